use std::path::{Path, PathBuf};

use saddle_transport::connections::SearchOptions;
use saddle_transport::integrate::IntegratorConfig;
use saddle_transport::itinerary::ShadowOptions;
use saddle_transport::manifolds::DEFAULT_EPS;
use saddle_transport::{ModelKind, SystemModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run depends on apart from the subcommand's own flags.
/// Loaded from `--config` (JSON); omitted fields take defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemModel>,
    pub integrator: IntegratorConfig,
    pub out_dir: Option<PathBuf>,
    /// Tube seeds for connection searches.
    pub n_seeds: usize,
    /// Seeds for figure-quality cuts.
    pub figure_seeds: usize,
    pub eps: f64,
    pub shadow: ShadowOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: None,
            integrator: IntegratorConfig::default(),
            out_dir: None,
            n_seeds: 400,
            figure_seeds: 1000,
            eps: DEFAULT_EPS,
            shadow: ShadowOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.integrator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.shadow.integrator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.n_seeds < 3 || self.figure_seeds < 3 {
            return Err(CliError::Usage("seed counts must be at least 3".into()));
        }
        if !(self.eps > 0.0) {
            return Err(CliError::Usage(format!("eps must be positive, got {}", self.eps)));
        }
        let s = &self.shadow;
        if !(s.tol > 0.0 && s.dwell_radius > 0.0 && s.spacing > 0.0) || s.max_iter == 0 {
            return Err(CliError::Usage("shadow tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The model for `--system`: the configured one if its kind matches,
    /// otherwise the default parameters of that kind.
    pub fn model(&self, kind: Option<ModelKind>) -> Result<SystemModel, CliError> {
        match (kind, self.system) {
            (Some(k), Some(m)) if m.kind() == k => Ok(m),
            (Some(k), Some(m)) => Err(CliError::Usage(format!("--system {k} conflicts with the configured {} model", m.kind()))),
            (Some(k), None) => Ok(SystemModel::default_for(k)),
            (None, Some(m)) => Ok(m),
            (None, None) => Ok(SystemModel::default_for(ModelKind::PhysicalDp)),
        }
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions { n_seeds: self.n_seeds, eps: self.eps, integrator: self.integrator, ..SearchOptions::default() }
    }

    /// Output directory: `--out` (or `TUBE_OUT`), then the config file,
    /// then `./out`.
    pub fn resolve_out(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.n_seeds, 400);
        assert!(c.system.is_none());
        c.validate().unwrap();
    }

    #[test]
    fn system_flag_must_agree_with_config() {
        let c: RunConfig = serde_json::from_str(r#"{"system": {"kind": "pcr3bp", "params": {"mu": 0.01}}}"#).unwrap();
        assert!(c.model(Some(ModelKind::PhysicalDp)).is_err());
        assert_eq!(c.model(Some(ModelKind::Pcr3bp)).unwrap(), SystemModel::pcr3bp(0.01).unwrap());
        assert_eq!(c.model(None).unwrap(), SystemModel::pcr3bp(0.01).unwrap());
    }

    #[test]
    fn bad_tolerances_are_rejected() {
        let c: RunConfig = serde_json::from_str(r#"{"eps": -1.0}"#).unwrap();
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"nseeds": 3}"#).is_err());
    }
}
