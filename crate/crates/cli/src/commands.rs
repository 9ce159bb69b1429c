use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use saddle_transport::connections::{find_heteroclinics, find_homoclinics, homoclinic_sides, ConnectionOrbit, SearchOptions};
use saddle_transport::dynamics::GridSpec;
use saddle_transport::equilibria::{
    enumerate_equilibria, find_equilibrium, lagrange_point_x, lagrange_quintic_residual, Classification, EquilibriumLabel,
    LagrangeBranch,
};
use saddle_transport::integrate::IntegratorConfig;
use saddle_transport::itinerary::{build_graph, construct_shadow_orbit, enumerate_walks, ConnectionGraph, ShadowKind, ShadowOrbit, ShadowSpec, Walk};
use saddle_transport::manifolds::{globalize_tube, seed_tube, BranchSign, SectionCut, TubeBranch};
use saddle_transport::upo::{find_symmetric_upo, PeriodicOrbit};
use saddle_transport::{Direction, ModelKind, SectionSpec, SystemModel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Output;
use crate::CliError;

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    /// Everything the numbers of a subcommand depend on.
    pub fn config_value(&self, model: Option<&SystemModel>, args: &impl Serialize) -> Value {
        let mut run = serde_json::to_value(&self.cfg).expect("config serialises");
        // where the files go does not change what is in them
        run.as_object_mut().expect("object").remove("out_dir");
        json!({ "run": run, "system": model, "args": args })
    }

    pub fn tolerances(&self) -> Value {
        json!({ "integrator": self.cfg.integrator, "eps": self.cfg.eps, "shadow": self.cfg.shadow })
    }

    fn integrator(&self) -> &IntegratorConfig {
        &self.cfg.integrator
    }
}

pub fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: saddle_transport::Error| e.to_string())
}

pub fn parse_label(s: &str) -> Result<EquilibriumLabel, String> {
    s.parse().map_err(|e: saddle_transport::Error| e.to_string())
}

pub fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::Center => "Center",
        Classification::Index1Saddle => "Index1",
        Classification::Index2Saddle => "Index2",
    }
}

fn float_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("not a number: {t:?}"))))
        .collect()
}

// ---------------------------------------------------------------- equilibria

#[derive(Debug, Args, Serialize)]
pub struct SystemArgs {
    /// physical_dp, point_mass_dp or pcr3bp.
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
}

pub fn equilibrium_table(model: &SystemModel) -> Result<Vec<Value>, CliError> {
    Ok(enumerate_equilibria(model)?
        .iter()
        .map(|e| {
            json!({
                "label": e.label.as_str(),
                "state": e.state.to_array(),
                "energy": e.energy,
                "classification": class_name(e.classification),
                "eigenvalues": e.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            })
        })
        .collect())
}

pub fn equilibria(ctx: &Ctx, args: &SystemArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    let rows = equilibrium_table(&model)?;
    let mut out = Output::new(&ctx.out_dir, "equilibria")?;
    out.json("equilibria.json", &rows)?;
    out.count("equilibria", rows.len());
    out.finish("equilibria", &ctx.config_value(Some(&model), args), ctx.tolerances())?;
    print_json(&rows)
}

// ---------------------------------------------------------------------- upo

#[derive(Debug, Args, Serialize)]
pub struct UpoArgs {
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
    /// Index-1 saddle the orbit surrounds, e.g. DownUp or L1.
    #[arg(long, value_parser = parse_label)]
    pub saddle: EquilibriumLabel,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Points in the sampled-orbit CSV.
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

pub fn compute_upo(model: &SystemModel, saddle: EquilibriumLabel, h: f64, cfg: &IntegratorConfig) -> Result<PeriodicOrbit, CliError> {
    let eq = find_equilibrium(model, saddle)?;
    Ok(find_symmetric_upo(model, &eq, h, 0.0, cfg)?)
}

pub fn upo_summary(orbit: &PeriodicOrbit) -> Value {
    json!({
        "saddle": orbit.saddle.as_str(),
        "anchor": orbit.anchor.to_array(),
        "period": orbit.period,
        "energy": orbit.energy,
        "multipliers": orbit.multipliers.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "lambda_u": orbit.lambda_u,
        "lambda_s": orbit.lambda_s,
        "closure": orbit.closure,
    })
}

pub fn write_orbit(out: &mut Output, name: &str, model: &SystemModel, orbit: &PeriodicOrbit, n: usize, cfg: &IntegratorConfig) -> Result<usize, CliError> {
    let tr = orbit.sample(model, n, cfg)?;
    out.csv(name, |w| tr.write_csv(model, w))?;
    Ok(tr.len())
}

pub fn upo(ctx: &Ctx, args: &UpoArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    let orbit = compute_upo(&model, args.saddle, args.energy, ctx.integrator())?;
    let summary = upo_summary(&orbit);
    let mut out = Output::new(&ctx.out_dir, "upo")?;
    out.json("upo.json", &summary)?;
    let n = write_orbit(&mut out, "upo.csv", &model, &orbit, args.samples.max(1), ctx.integrator())?;
    out.count("samples", n);
    out.finish("upo", &ctx.config_value(Some(&model), args), ctx.tolerances())?;
    print_json(&summary)
}

// --------------------------------------------------------------------- tube

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityArg {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionArg {
    Positive,
    Negative,
    Any,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Positive => Direction::Positive,
            DirectionArg::Negative => Direction::Negative,
            DirectionArg::Any => Direction::Any,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TubeArgs {
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
    #[arg(long, value_parser = parse_label)]
    pub saddle: EquilibriumLabel,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long, value_enum, default_value_t = StabilityArg::Unstable)]
    pub stability: StabilityArg,
    /// Sense of the rotating arm; picks the default branch and section.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub rotation: i32,
    /// Override the section: theta1:K, theta2:K, diagonal:K or y0.
    #[arg(long)]
    pub section: Option<String>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Positive)]
    pub direction: DirectionArg,
    /// Override the branch sign.
    #[arg(long, value_enum)]
    pub sign: Option<SignArg>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
}

pub fn parse_section(spec: &str, direction: Direction) -> Result<SectionSpec, CliError> {
    let (name, k) = match spec.split_once(':') {
        Some((n, k)) => (n, Some(k.trim().parse::<i32>().map_err(|_| CliError::Usage(format!("bad section lift in {spec:?}")))?)),
        None => (spec, None),
    };
    match (name.trim(), k) {
        ("theta1", Some(k)) => Ok(SectionSpec::theta1(k, direction)),
        ("theta2", Some(k)) => Ok(SectionSpec::theta2(k, direction)),
        ("diagonal", Some(k)) => Ok(SectionSpec::diagonal(k, direction)),
        ("y0", None) => Ok(SectionSpec::pcr3bp_y0(direction)),
        _ => Err(CliError::Usage(format!("unknown section {spec:?}; expected theta1:K, theta2:K, diagonal:K or y0"))),
    }
}

/// Cut CSV with one row per seed, in seed order; seeds that never reached
/// the section have `complete = 0` and NaN coordinates.
pub fn write_cut_csv(w: &mut dyn Write, branch: &TubeBranch, cut: &SectionCut) -> std::io::Result<()> {
    writeln!(w, "seed,phase,s1,s2,q1,q2,v1,v2,flight_time,complete")?;
    let mut at = vec![None; branch.seeds.len()];
    for (k, &i) in cut.seed_index.iter().enumerate() {
        at[i] = Some(k);
    }
    for (i, slot) in at.iter().enumerate() {
        match slot {
            Some(k) => {
                let (k, s) = (*k, cut.full_states[*k]);
                writeln!(
                    w,
                    "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},1",
                    branch.phases[i], cut.coords[k][0], cut.coords[k][1], s.q1, s.q2, s.v1, s.v2, cut.flight_times[k]
                )?;
            }
            None => writeln!(w, "{i},{:.17e},NaN,NaN,NaN,NaN,NaN,NaN,NaN,0", branch.phases[i])?,
        }
    }
    Ok(())
}

pub fn cut_summary(cut: &SectionCut) -> Value {
    json!({
        "section": cut.section,
        "stability": cut.stability,
        "energy": cut.energy,
        "n_seeds": cut.n_seeds,
        "complete": cut.len(),
        "incomplete": cut.incomplete_count,
        "closed": cut.closed,
    })
}

pub fn tube(ctx: &Ctx, args: &TubeArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    let cfg = ctx.integrator();
    let orbit = compute_upo(&model, args.saddle, args.energy, cfg)?;
    let (u, s) = homoclinic_sides(&model, &orbit, args.rotation, ctx.cfg.eps)?;
    let mut side = match args.stability {
        StabilityArg::Unstable => u,
        StabilityArg::Stable => s,
    };
    if let Some(spec) = &args.section {
        side.section = parse_section(spec, args.direction.into())?;
    }
    if let Some(sign) = args.sign {
        side.sign = match sign {
            SignArg::Plus => BranchSign::Plus,
            SignArg::Minus => BranchSign::Minus,
        };
    }
    let n = args.n_seeds.unwrap_or(ctx.cfg.figure_seeds);
    let branch = seed_tube(&model, &orbit, side.stability, side.sign, side.eps, n, cfg)?;
    let cut = globalize_tube(&model, &branch, &side.section, cfg)?;
    let mut summary = cut_summary(&cut);
    summary["sign"] = json!(side.sign);
    summary["upo"] = upo_summary(&orbit);
    let mut out = Output::new(&ctx.out_dir, "tube")?;
    out.csv("tube_cut.csv", |w| write_cut_csv(w, &branch, &cut))?;
    out.json("tube.json", &summary)?;
    out.count("seeds", n);
    out.count("complete", cut.len());
    out.count("incomplete", cut.incomplete_count);
    out.finish("tube", &ctx.config_value(Some(&model), args), ctx.tolerances())?;
    print_json(&summary)
}

// -------------------------------------------------------------- connections

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnType {
    Hom,
    Het,
}

#[derive(Debug, Args, Serialize)]
pub struct ConnectionsArgs {
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    #[arg(long = "type", value_enum)]
    pub kind: ConnType,
    #[arg(long, value_parser = parse_label)]
    pub src: EquilibriumLabel,
    /// Target saddle (heteroclinics only).
    #[arg(long, value_parser = parse_label)]
    pub dst: Option<EquilibriumLabel>,
    /// Sense of the rotating arm for homoclinics.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub rotation: i32,
    #[arg(long)]
    pub n_seeds: Option<usize>,
}

pub fn connection_row(c: &ConnectionOrbit) -> Value {
    json!({
        "id": c.id,
        "kind": c.kind,
        "source": c.source.as_str(),
        "target": c.target.as_str(),
        "section_point": c.section_point,
        "symmetric": c.symmetric,
        "partner": c.partner,
        "rotation_signature": c.rotation,
        "mismatch": c.max_mismatch(),
        "approach": c.approach,
        "flight_times": c.flight_times,
        "low_confidence": c.low_confidence,
    })
}

/// `<prefix>.json` listing the connections and one trajectory CSV each.
pub fn write_connections(out: &mut Output, prefix: &str, model: &SystemModel, conns: &[ConnectionOrbit]) -> Result<Vec<Value>, CliError> {
    let rows: Vec<Value> = conns.iter().map(connection_row).collect();
    out.json(&format!("{prefix}.json"), &rows)?;
    for (i, c) in conns.iter().enumerate() {
        out.csv(&format!("{prefix}_{i}.csv"), |w| c.trajectory.write_csv(model, w))?;
    }
    Ok(rows)
}

fn search(ctx: &Ctx, n_seeds: Option<usize>) -> SearchOptions {
    let mut opts = ctx.cfg.search();
    if let Some(n) = n_seeds {
        opts.n_seeds = n;
    }
    opts
}

pub fn connections(ctx: &Ctx, args: &ConnectionsArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    let opts = search(ctx, args.n_seeds);
    let cfg = &opts.integrator;
    let src = compute_upo(&model, args.src, args.energy, cfg)?;
    let conns = match args.kind {
        ConnType::Hom => {
            if args.dst.is_some_and(|d| d != args.src) {
                return Err(CliError::Usage("homoclinics take --src only".into()));
            }
            find_homoclinics(&model, &src, args.rotation, &opts)?
        }
        ConnType::Het => {
            let dst = args.dst.ok_or_else(|| CliError::Usage("heteroclinics need --dst".into()))?;
            if dst == args.src {
                return Err(CliError::Usage("--dst must differ from --src".into()));
            }
            let b = compute_upo(&model, dst, args.energy, cfg)?;
            find_heteroclinics(&model, &src, &b, &opts)?
        }
    };
    let mut out = Output::new(&ctx.out_dir, "connections")?;
    let rows = write_connections(&mut out, "connections", &model, &conns)?;
    out.count("connections", conns.len());
    out.count("symmetric", conns.iter().filter(|c| c.symmetric).count());
    let tol = json!({ "integrator": cfg, "eps": opts.eps, "n_seeds": opts.n_seeds, "merge_tol": opts.merge_tol });
    out.finish("connections", &ctx.config_value(Some(&model), args), tol)?;
    print_json(&rows)
}

// -------------------------------------------------------------------- graph

#[derive(Debug, Args, Serialize)]
pub struct GraphArgs {
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Comma-separated saddles, one vertex each.
    #[arg(long, value_delimiter = ',', value_parser = parse_label, default_value = "DownUp")]
    pub saddles: Vec<EquilibriumLabel>,
    /// Rotation senses searched for homoclinics ("none" for no loops).
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub homoclinic: String,
    /// Skip the heteroclinic searches between distinct saddles.
    #[arg(long)]
    pub no_heteroclinic: bool,
    /// Also list the closed walks with this many edges.
    #[arg(long)]
    pub walks: Option<usize>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
}

/// A graph together with the model it was computed for; the input of
/// `shadow`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GraphFile {
    pub system: SystemModel,
    pub graph: ConnectionGraph,
}

fn senses(s: &str) -> Result<Vec<i32>, CliError> {
    if s.trim() == "none" || s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| match t.trim() {
            "1" | "+1" => Ok(1),
            "-1" => Ok(-1),
            other => Err(CliError::Usage(format!("rotation sense must be 1 or -1, got {other:?}"))),
        })
        .collect()
}

/// Append `found` with ids continuing after `all`; partner references move
/// along.
fn append_renumbered(all: &mut Vec<ConnectionOrbit>, found: Vec<ConnectionOrbit>) {
    let base = all.len();
    for mut c in found {
        c.id += base;
        c.partner = c.partner.map(|p| p + base);
        all.push(c);
    }
}

pub fn compute_graph(
    model: &SystemModel,
    energy: f64,
    saddles: &[EquilibriumLabel],
    rotations: &[i32],
    heteroclinic: bool,
    opts: &SearchOptions,
) -> Result<ConnectionGraph, CliError> {
    let cfg = &opts.integrator;
    let orbits = saddles.iter().map(|&s| compute_upo(model, s, energy, cfg)).collect::<Result<Vec<_>, _>>()?;
    let mut conns = Vec::new();
    for o in &orbits {
        for &r in rotations {
            append_renumbered(&mut conns, find_homoclinics(model, o, r, opts)?);
        }
    }
    if heteroclinic {
        for a in &orbits {
            for b in orbits.iter().filter(|b| b.saddle != a.saddle) {
                append_renumbered(&mut conns, find_heteroclinics(model, a, b, opts)?);
            }
        }
    }
    Ok(build_graph(&orbits, &conns)?)
}

pub fn graph_summary(g: &ConnectionGraph) -> Value {
    json!({
        "energy": g.energy,
        "vertices": g.vertices.iter().map(|v| v.saddle.as_str()).collect::<Vec<_>>(),
        "loops": g.loops(),
        "edges": g.edges.iter().enumerate().map(|(i, e)| json!({
            "edge": format!("e{i}"),
            "source": e.source,
            "target": e.target,
            "kind": e.connection.kind,
            "connection": e.connection.id,
            "section_point": e.connection.section_point,
            "symmetric": e.connection.symmetric,
            "rotation_signature": e.connection.rotation,
        })).collect::<Vec<_>>(),
    })
}

pub fn write_graph(out: &mut Output, prefix: &str, model: &SystemModel, graph: &ConnectionGraph) -> Result<Value, CliError> {
    let summary = graph_summary(graph);
    out.json(&format!("{prefix}.json"), &GraphFile { system: *model, graph: graph.clone() })?;
    out.json(&format!("{prefix}_summary.json"), &summary)?;
    out.count(&format!("{prefix}_vertices"), graph.vertices.len());
    out.count(&format!("{prefix}_edges"), graph.edges.len());
    Ok(summary)
}

fn walk_label(w: &Walk) -> String {
    w.edges.iter().map(|e| format!("e{e}")).collect::<Vec<_>>().join(",")
}

pub fn graph(ctx: &Ctx, args: &GraphArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    if args.saddles.is_empty() {
        return Err(CliError::Usage("--saddles needs at least one saddle".into()));
    }
    let opts = search(ctx, args.n_seeds);
    let rotations = senses(&args.homoclinic)?;
    let heteroclinic = !args.no_heteroclinic && args.saddles.len() > 1;
    let g = compute_graph(&model, args.energy, &args.saddles, &rotations, heteroclinic, &opts)?;
    let mut out = Output::new(&ctx.out_dir, "graph")?;
    let mut summary = write_graph(&mut out, "graph", &model, &g)?;
    if let Some(k) = args.walks {
        if k == 0 {
            return Err(CliError::Usage("--walks needs k >= 1".into()));
        }
        let walks: Vec<String> = enumerate_walks(&g, k, None, true).iter().map(walk_label).collect();
        out.count("closed_walks", walks.len());
        out.json("walks.json", &walks)?;
        summary["closed_walks"] = json!(walks);
    }
    let tol = json!({ "integrator": opts.integrator, "eps": opts.eps, "n_seeds": opts.n_seeds });
    out.finish("graph", &ctx.config_value(Some(&model), args), tol)?;
    print_json(&summary)
}

// ------------------------------------------------------------------- shadow

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Periodic,
    Connecting,
}

#[derive(Debug, Args, Serialize)]
pub struct ShadowArgs {
    /// Graph file written by `graph`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Edge sequence, e.g. "e3,e1,e1".
    #[arg(long)]
    pub walk: String,
    /// Turns at each orbit visited, e.g. "4,4,6".
    #[arg(long)]
    pub wraps: String,
    #[arg(long, value_enum, default_value_t = KindArg::Periodic)]
    pub kind: KindArg,
}

pub fn parse_walk(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.strip_prefix('e').unwrap_or(t).parse::<usize>().map_err(|_| CliError::Usage(format!("bad edge {t:?} in walk")))
        })
        .collect()
}

pub fn parse_wraps(s: &str) -> Result<Vec<usize>, CliError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad wrap count {t:?}")))).collect()
}

pub fn shadow_summary(s: &ShadowOrbit) -> Value {
    json!({
        "walk": walk_label(&s.spec.walk),
        "wraps": s.spec.wraps,
        "kind": s.spec.kind,
        "energy": s.energy,
        "residual": s.residual,
        "iterations": s.iterations,
        "dwell_counts": s.dwell_counts,
        "total_time": s.total_time,
        "transfer_deviation": s.transfer_deviation,
        "closure": s.closure,
        "rotation": s.rotation,
        "shift": s.shift,
        "nodes": s.nodes.len(),
    })
}

pub fn shadow(ctx: &Ctx, args: &ShadowArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.graph).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.graph.display())))?;
    let file: GraphFile = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.graph.display())))?;
    let walk = Walk::new(&file.graph, parse_walk(&args.walk)?)?;
    let kind = match args.kind {
        KindArg::Periodic => ShadowKind::Periodic,
        KindArg::Connecting => ShadowKind::Connecting,
    };
    let spec = ShadowSpec { walk, wraps: parse_wraps(&args.wraps)?, kind };
    let orbit = construct_shadow_orbit(&file.system, &file.graph, &spec, &ctx.cfg.shadow)?;
    let summary = shadow_summary(&orbit);
    let mut out = Output::new(&ctx.out_dir, "shadow")?;
    out.csv("shadow.csv", |w| orbit.trajectory.write_csv(&file.system, w))?;
    out.json("shadow.json", &summary)?;
    out.count("samples", orbit.trajectory.len());
    out.count("nodes", orbit.nodes.len());
    // the graph is identified by content, not by path
    let config = json!({
        "run": { "shadow": ctx.cfg.shadow },
        "graph_hash": crate::output::config_hash(&serde_json::to_value(&file).map_err(std::io::Error::from)?),
        "args": { "walk": args.walk, "wraps": args.wraps, "kind": args.kind },
    });
    out.finish("shadow", &config, json!({ "shadow": ctx.cfg.shadow }))?;
    print_json(&summary)
}

// -------------------------------------------------------------------- hills

#[derive(Debug, Args, Serialize)]
pub struct HillsArgs {
    #[arg(long, value_parser = parse_kind)]
    pub system: Option<ModelKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub energy: f64,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    /// "lo,hi" for both coordinates; defaults to one period of each angle,
    /// or [-1.5, 1.5] for the three-body problem.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
}

pub fn hills(ctx: &Ctx, args: &HillsArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(args.system)?;
    let (lo, hi) = match &args.range {
        Some(r) => match float_list(r)?.as_slice() {
            [lo, hi] => (*lo, *hi),
            _ => return Err(CliError::Usage(format!("--range takes lo,hi, got {r:?}"))),
        },
        None if model.kind().is_pendulum() => (-std::f64::consts::PI, std::f64::consts::PI),
        None => (-1.5, 1.5),
    };
    let grid = GridSpec::square(lo, hi, args.grid);
    let region = model.hills_region_grid(args.energy, &grid)?;
    let mut out = Output::new(&ctx.out_dir, "hills")?;
    out.csv("hills.csv", |w| {
        writeln!(w, "q1,q2,accessible")?;
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                writeln!(w, "{:.17e},{:.17e},{}", grid.coord1(i), grid.coord2(j), u8::from(region.is_accessible(i, j)))?;
            }
        }
        Ok(())
    })?;
    let cells = grid.n1 * grid.n2;
    let summary = json!({
        "energy": args.energy,
        "grid": grid,
        "accessible": region.count(),
        "fraction": region.count() as f64 / cells as f64,
    });
    out.json("hills.json", &summary)?;
    out.count("cells", cells);
    out.count("accessible", region.count());
    out.finish("hills", &ctx.config_value(Some(&model), args), json!({}))?;
    print_json(&summary)
}

// ------------------------------------------------------------ pcr3bp-points

#[derive(Debug, Args, Serialize)]
pub struct PointsArgs {
    /// Mass ratio of the smaller primary.
    #[arg(long)]
    pub mu: f64,
}

pub fn pcr3bp_points(ctx: &Ctx, args: &PointsArgs) -> Result<(), CliError> {
    let model = SystemModel::pcr3bp(args.mu)?;
    let x1 = lagrange_point_x(args.mu, LagrangeBranch::L1)?;
    let x2 = lagrange_point_x(args.mu, LagrangeBranch::L2)?;
    let secondary = 1.0 - args.mu;
    let table = json!({
        "mu": args.mu,
        "x_L1": x1,
        "x_L2": x2,
        "quintic_residual_L1": lagrange_quintic_residual(args.mu, LagrangeBranch::L1, secondary - x1),
        "quintic_residual_L2": lagrange_quintic_residual(args.mu, LagrangeBranch::L2, x2 - secondary),
        "equilibria": equilibrium_table(&model)?,
    });
    let mut out = Output::new(&ctx.out_dir, "pcr3bp_points")?;
    out.json("pcr3bp_points.json", &table)?;
    out.count("points", 2);
    out.finish("pcr3bp-points", &ctx.config_value(Some(&model), args), json!({}))?;
    let mut w = std::io::stdout().lock();
    writeln!(w, "x_L1={x1}")?;
    writeln!(w, "x_L2={x2}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse() {
        assert_eq!(parse_section("theta2:1", Direction::Positive).unwrap(), SectionSpec::theta2(1, Direction::Positive));
        assert_eq!(parse_section("diagonal:-1", Direction::Any).unwrap(), SectionSpec::diagonal(-1, Direction::Any));
        assert_eq!(parse_section("y0", Direction::Negative).unwrap(), SectionSpec::pcr3bp_y0(Direction::Negative));
        assert!(parse_section("theta3:1", Direction::Any).is_err());
        assert!(parse_section("theta1", Direction::Any).is_err());
    }

    #[test]
    fn walks_and_wraps_parse() {
        assert_eq!(parse_walk("e3,e1, e1").unwrap(), vec![3, 1, 1]);
        assert_eq!(parse_walk("0,2").unwrap(), vec![0, 2]);
        assert!(parse_walk("e3,,e1").is_err());
        assert_eq!(parse_wraps("4,4,6").unwrap(), vec![4, 4, 6]);
        assert_eq!(parse_wraps("").unwrap(), Vec::<usize>::new());
        assert!(parse_wraps("4,-1").is_err());
    }

    #[test]
    fn rotation_senses_parse() {
        assert_eq!(senses("1,-1").unwrap(), vec![1, -1]);
        assert_eq!(senses("none").unwrap(), Vec::<i32>::new());
        assert!(senses("2").is_err());
    }
}
