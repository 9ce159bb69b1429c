use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Files written by one subcommand, plus the manifest describing them.
pub struct Output {
    dir: PathBuf,
    prefix: String,
    files: Vec<String>,
    counts: serde_json::Map<String, Value>,
}

impl Output {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), prefix: prefix.to_string(), files: Vec::new(), counts: Default::default() })
    }

    /// A sub-bundle in `dir/name` sharing nothing with `self`.
    pub fn child(&self, name: &str) -> Result<Self, CliError> {
        Output::new(&self.dir.join(name), name)
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn count(&mut self, key: &str, n: impl Into<Value>) {
        self.counts.insert(key.to_string(), n.into());
    }

    /// Write `<prefix>.manifest.json`. `config` is everything the numbers
    /// depend on; its hash identifies the run.
    pub fn finish(mut self, command: &str, config: &Value, tolerances: Value) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "command": command,
            "library_version": saddle_transport::VERSION,
            "config_hash": config_hash(config),
            "config": config,
            "tolerances": tolerances,
            "counts": Value::Object(std::mem::take(&mut self.counts)),
            "files": self.files,
        });
        let name = format!("{}.manifest.json", self.prefix);
        let path = self.dir.join(&name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}

/// SHA-256 of the compact JSON encoding. `serde_json` maps are key-sorted,
/// so equal configs hash equally.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values always serialise");
    hex::encode(Sha256::digest(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a": 1, "b": [1.5, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b": [1.5, 2], "a": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        assert_ne!(config_hash(&a), config_hash(&json!({"a": 2, "b": [1.5, 2]})));
    }

    #[test]
    fn manifest_lists_the_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::new(dir.path(), "demo").unwrap();
        out.json("x.json", &[1, 2, 3]).unwrap();
        out.csv("x.csv", |w| writeln!(w, "a,b")).unwrap();
        out.count("rows", 3);
        let path = out.finish("demo", &json!({"k": 1}), json!({})).unwrap();
        let m: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(m["files"], json!(["x.json", "x.csv"]));
        assert_eq!(m["counts"]["rows"], 3);
        assert_eq!(m["library_version"], saddle_transport::VERSION);
    }
}
