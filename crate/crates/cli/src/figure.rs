//! Dataset recipes for the standard figures. Each recipe fixes its
//! energies and searches; seed counts and tolerances come from the run
//! configuration.

use std::io::Write;

use clap::{Args, ValueEnum};
use saddle_transport::connections::{find_heteroclinics, find_homoclinics, heteroclinic_sides, homoclinic_sides, mirror_plane_point, ManifoldSide};
use saddle_transport::equilibria::EquilibriumLabel;
use saddle_transport::integrate::IntegratorConfig;
use saddle_transport::itinerary::{build_graph, construct_shadow_orbit, ConnectionGraph, ShadowKind, ShadowSpec, Walk};
use saddle_transport::manifolds::{globalize_tube, interior_iterate, point_in_polygon, seed_tube, SectionCut, TubeBranch};
use saddle_transport::upo::PeriodicOrbit;
use saddle_transport::{ModelKind, SectionSpec, State, SystemModel};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{compute_graph, compute_upo, cut_summary, shadow_summary, upo_summary, write_connections, write_cut_csv, write_graph, write_orbit, Ctx};
use crate::output::Output;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig11,
    Fig12,
    Fig13,
}

#[derive(Debug, Args, Serialize)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub id: FigureId,
}

const ORBIT_SAMPLES: usize = 400;
/// Energies of the homoclinic ladder.
pub const LADDER: [f64; 6] = [-0.147, -0.07, -0.034, 0.06, 0.102, 0.157];

struct Recipe<'a> {
    ctx: &'a Ctx,
    model: SystemModel,
    cfg: IntegratorConfig,
}

impl Recipe<'_> {
    fn upo(&self, saddle: EquilibriumLabel, h: f64) -> Result<PeriodicOrbit, CliError> {
        compute_upo(&self.model, saddle, h, &self.cfg)
    }

    fn cut(&self, side: &ManifoldSide, section: &SectionSpec) -> Result<(TubeBranch, SectionCut), CliError> {
        let branch = seed_tube(&self.model, &side.orbit, side.stability, side.sign, side.eps, self.ctx.cfg.figure_seeds, &self.cfg)?;
        let cut = globalize_tube(&self.model, &branch, section, &self.cfg)?;
        Ok((branch, cut))
    }

    /// Cut through the side's own section, written as `<name>.csv`.
    fn write_cut(&self, out: &mut Output, name: &str, side: &ManifoldSide, section: Option<SectionSpec>) -> Result<(SectionCut, Value), CliError> {
        let (branch, cut) = self.cut(side, &section.unwrap_or(side.section))?;
        out.csv(&format!("{name}.csv"), |w| write_cut_csv(w, &branch, &cut))?;
        out.count(name, cut.len());
        let summary = cut_summary(&cut);
        Ok((cut, summary))
    }

    fn write_upo(&self, out: &mut Output, name: &str, orbit: &PeriodicOrbit) -> Result<Value, CliError> {
        write_orbit(out, &format!("{name}.csv"), &self.model, orbit, ORBIT_SAMPLES, &self.cfg)?;
        Ok(upo_summary(orbit))
    }

    fn finish(&self, out: Output, id: &str, recipe: Value) -> Result<(), CliError> {
        let config = self.ctx.config_value(Some(&self.model), &json!({ "figure": id, "recipe": recipe }));
        out.finish(id, &config, self.ctx.tolerances())?;
        Ok(())
    }
}

pub fn figure(ctx: &Ctx, args: &FigureArgs) -> Result<(), CliError> {
    let model = ctx.cfg.model(Some(ModelKind::PhysicalDp))?;
    let r = Recipe { ctx, model, cfg: ctx.cfg.integrator };
    let id = serde_json::to_value(args.id).expect("enum serialises").as_str().expect("string").to_string();
    let mut out = Output::new(&ctx.out_dir.join(&id), &id)?;
    let summary = match args.id {
        FigureId::Fig6 => fig6(&r, &mut out)?,
        FigureId::Fig7 => fig7(&r, &mut out)?,
        FigureId::Fig8 => fig8(&r, &mut out)?,
        FigureId::Fig9 => fig9(&r, &mut out)?,
        FigureId::Fig11 => fig11(&r, &mut out)?,
        FigureId::Fig12 => fig12(&r, &mut out)?,
        FigureId::Fig13 => fig13(&r, &mut out)?,
    };
    out.json("summary.json", &summary)?;
    r.finish(out, &id, summary["recipe"].clone())?;
    crate::commands::print_json(&summary)
}

fn sense_name(r: i32) -> &'static str {
    if r > 0 {
        "plus"
    } else {
        "minus"
    }
}

/// Down-Up tubes at H = 0.2 and their cuts with θ2 = 2πk, both senses of
/// rotation.
fn fig6(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let h = 0.2;
    let orbit = r.upo(EquilibriumLabel::DownUp, h)?;
    let upo = r.write_upo(out, "upo_down_up", &orbit)?;
    let mut cuts = Vec::new();
    for rot in [1, -1] {
        let (u, s) = homoclinic_sides(&r.model, &orbit, rot, r.ctx.cfg.eps)?;
        let (_, a) = r.write_cut(out, &format!("cut_{}_unstable", sense_name(rot)), &u, None)?;
        let (_, b) = r.write_cut(out, &format!("cut_{}_stable", sense_name(rot)), &s, None)?;
        cuts.push(json!({ "rotation": rot, "unstable": a, "stable": b }));
    }
    Ok(json!({ "recipe": { "energy": h, "saddle": "DownUp", "rotations": [1, -1] }, "upo": upo, "cuts": cuts }))
}

/// One dataset per ladder energy: cuts and the homoclinics they give.
fn fig7(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let mut rows = Vec::new();
    for h in LADDER {
        let name = format!("h_{h}");
        let mut sub = out.child(&name)?;
        let orbit = r.upo(EquilibriumLabel::DownUp, h)?;
        let upo = r.write_upo(&mut sub, "upo", &orbit)?;
        let (u, s) = homoclinic_sides(&r.model, &orbit, 1, r.ctx.cfg.eps)?;
        let (_, a) = r.write_cut(&mut sub, "cut_unstable", &u, None)?;
        let (_, b) = r.write_cut(&mut sub, "cut_stable", &s, None)?;
        let homs = find_homoclinics(&r.model, &orbit, 1, &r.ctx.cfg.search())?;
        write_connections(&mut sub, "homoclinics", &r.model, &homs)?;
        sub.count("homoclinics", homs.len());
        let row = json!({ "energy": h, "dataset": name, "homoclinics": homs.len(), "upo": upo, "unstable": a, "stable": b });
        sub.json("summary.json", &row)?;
        r.finish(sub, &name, json!({ "energy": h, "saddle": "DownUp", "rotation": 1 }))?;
        out.count(&name, homs.len());
        rows.push(row);
    }
    Ok(json!({ "recipe": { "energies": LADDER, "saddle": "DownUp", "rotation": 1 }, "datasets": rows }))
}

fn write_states(w: &mut dyn Write, section: &SectionSpec, states: &[Option<State>]) -> std::io::Result<()> {
    writeln!(w, "point,s1,s2,q1,q2,v1,v2")?;
    for (i, s) in states.iter().enumerate() {
        match s {
            Some(s) => {
                let p = section.wrapped_plane_coords(&s.to_array());
                writeln!(w, "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", p[0], p[1], s.q1, s.q2, s.v1, s.v2)?
            }
            None => writeln!(w, "{i},NaN,NaN,NaN,NaN,NaN,NaN")?,
        }
    }
    Ok(())
}

/// Interior of both cuts: grid points inside both polygons, kept together
/// with their mirror images, completed to the energy surface.
fn interior_points(model: &SystemModel, h: f64, section: &SectionSpec, cu: &SectionCut, cs: &SectionCut, n: usize) -> Vec<State> {
    let (lo, hi) = cu.coords.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let mut points = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = [lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / n as f64, lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / n as f64];
            let pair = [p, mirror_plane_point(model, p)];
            if !pair.iter().all(|q| point_in_polygon(&cu.coords, *q) && point_in_polygon(&cs.coords, *q)) {
                continue;
            }
            let states: Vec<State> = pair.iter().filter_map(|q| section.complete_state(model, *q, h, &cu.full_states[0]).ok()).collect();
            if states.len() == 2 && states.iter().all(|s| s.v2 > 0.0) {
                points.extend(states);
            }
        }
    }
    points
}

fn first_symmetric(graph: &ConnectionGraph) -> Option<usize> {
    graph.edges.iter().position(|e| e.connection.symmetric)
}

/// Interior iterates at H = −0.06985 and the symmetric periodic orbit that
/// stays inside both tubes.
fn fig8(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let h = -0.06985;
    let returns = 3;
    let orbit = r.upo(EquilibriumLabel::DownUp, h)?;
    let upo = r.write_upo(out, "upo", &orbit)?;
    let (u, s) = homoclinic_sides(&r.model, &orbit, 1, r.ctx.cfg.eps)?;
    let (cu, a) = r.write_cut(out, "cut_unstable", &u, None)?;
    let (cs, b) = r.write_cut(out, "cut_stable", &s, None)?;
    let section = u.section;
    let points = interior_points(&r.model, h, &section, &cu, &cs, 20);
    let initial: Vec<Option<State>> = points.iter().copied().map(Some).collect();
    out.csv("interior_initial.csv", |w| write_states(w, &section, &initial))?;
    out.count("interior_points", points.len());
    let forward = interior_iterate(&r.model, &points, &section, returns, 1.0, 1, &r.cfg)?;
    let backward = interior_iterate(&r.model, &points, &section, returns, -1.0, -1, &r.cfg)?;
    let mut inside = Vec::new();
    for (k, (f, b)) in forward.iter().zip(&backward).enumerate() {
        out.csv(&format!("forward_{}.csv", k + 1), |w| write_states(w, &section, f))?;
        out.csv(&format!("backward_{}.csv", k + 1), |w| write_states(w, &section, b))?;
        let returned: Vec<&State> = f.iter().flatten().collect();
        let n_in = returned.iter().filter(|s| point_in_polygon(&cu.coords, section.wrapped_plane_coords(&s.to_array()))).count();
        inside.push(json!({ "return": k + 1, "returned": returned.len(), "inside_unstable": n_in }));
    }

    let homs = find_homoclinics(&r.model, &orbit, 1, &r.ctx.cfg.search())?;
    write_connections(out, "homoclinics", &r.model, &homs)?;
    let graph = build_graph(std::slice::from_ref(&orbit), &homs)?;
    let shadow = match first_symmetric(&graph) {
        Some(e) => {
            let spec = ShadowSpec { walk: Walk::new(&graph, vec![e])?, wraps: vec![3], kind: ShadowKind::Periodic };
            let orbit = construct_shadow_orbit(&r.model, &graph, &spec, &r.ctx.cfg.shadow)?;
            out.csv("periodic_shadow.csv", |w| orbit.trajectory.write_csv(&r.model, w))?;
            shadow_summary(&orbit)
        }
        None => Value::Null,
    };
    Ok(json!({
        "recipe": { "energy": h, "saddle": "DownUp", "rotation": 1, "returns": returns, "grid": 20, "shadow_wraps": [3] },
        "upo": upo, "unstable": a, "stable": b, "returns": inside, "homoclinics": homs.len(), "periodic_shadow": shadow,
    }))
}

/// Down-Up and Up-Down tubes meeting the section θ1 = θ2 at H = 0.2.
fn fig9(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let h = 0.2;
    let du = r.upo(EquilibriumLabel::DownUp, h)?;
    let ud = r.upo(EquilibriumLabel::UpDown, h)?;
    let upos = [r.write_upo(out, "upo_down_up", &du)?, r.write_upo(out, "upo_up_down", &ud)?];
    let mut cuts = Vec::new();
    for dir in [1, -1] {
        let (u, s) = heteroclinic_sides(&r.model, &du, &ud, dir, r.ctx.cfg.eps)?;
        let (_, a) = r.write_cut(out, &format!("cut_{}_unstable", sense_name(dir)), &u, None)?;
        let (_, b) = r.write_cut(out, &format!("cut_{}_stable", sense_name(dir)), &s, None)?;
        cuts.push(json!({ "direction": dir, "unstable": a, "stable": b }));
    }
    let hets = find_heteroclinics(&r.model, &du, &ud, &r.ctx.cfg.search())?;
    write_connections(out, "heteroclinics", &r.model, &hets)?;
    out.count("heteroclinics", hets.len());
    Ok(json!({
        "recipe": { "energy": h, "source": "DownUp", "target": "UpDown", "directions": [1, -1] },
        "upos": upos, "cuts": cuts, "heteroclinics": hets.len(),
    }))
}

/// Up-Down tubes at H = 0.2 and their cuts with θ1 = 2πk.
fn fig11(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let h = 0.2;
    let orbit = r.upo(EquilibriumLabel::UpDown, h)?;
    let upo = r.write_upo(out, "upo_up_down", &orbit)?;
    let mut cuts = Vec::new();
    for rot in [1, -1] {
        let (u, s) = homoclinic_sides(&r.model, &orbit, rot, r.ctx.cfg.eps)?;
        let (_, a) = r.write_cut(out, &format!("cut_{}_unstable", sense_name(rot)), &u, None)?;
        let (_, b) = r.write_cut(out, &format!("cut_{}_stable", sense_name(rot)), &s, None)?;
        cuts.push(json!({ "rotation": rot, "unstable": a, "stable": b }));
    }
    let homs = find_homoclinics(&r.model, &orbit, 1, &r.ctx.cfg.search())?;
    write_connections(out, "homoclinics", &r.model, &homs)?;
    out.count("homoclinics", homs.len());
    Ok(json!({ "recipe": { "energy": h, "saddle": "UpDown", "rotations": [1, -1] }, "upo": upo, "cuts": cuts, "homoclinics": homs.len() }))
}

/// The three connection graphs.
fn fig12(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    use EquilibriumLabel::{DownUp, UpDown};
    let opts = r.ctx.cfg.search();
    let panels: [(&str, f64, &[EquilibriumLabel], &[i32], bool); 3] = [
        ("graph_a", -0.07, &[DownUp], &[1], false),
        ("graph_b", 0.2, &[DownUp, UpDown], &[], true),
        ("graph_c", 0.2, &[DownUp, UpDown], &[1], true),
    ];
    let mut rows = Vec::new();
    let mut recipe = Vec::new();
    for (name, h, saddles, rotations, het) in panels {
        let g = compute_graph(&r.model, h, saddles, rotations, het, &opts)?;
        let summary = write_graph(out, name, &r.model, &g)?;
        recipe.push(json!({ "graph": name, "energy": h, "saddles": saddles, "homoclinic_rotations": rotations, "heteroclinic": het }));
        rows.push(json!({ "graph": name, "vertices": g.vertices.len(), "edges": g.edges.len(), "loops": g.loops(), "summary": summary }));
    }
    Ok(json!({ "recipe": recipe, "graphs": rows }))
}

/// Longer homoclinics at H = −0.07: the unstable tube continued to
/// θ2 = 4π and 6π against the stable cut at θ2 = 0, and a doubly-homoclinic
/// shadow of a symmetric homoclinic.
fn fig13(r: &Recipe, out: &mut Output) -> Result<Value, CliError> {
    let h = -0.07;
    let orbit = r.upo(EquilibriumLabel::DownUp, h)?;
    let upo = r.write_upo(out, "upo", &orbit)?;
    let (u, s) = homoclinic_sides(&r.model, &orbit, 1, r.ctx.cfg.eps)?;
    let (_, stable) = r.write_cut(out, "cut_stable", &s, None)?;
    let (_, double) = r.write_cut(out, "cut_unstable_4pi", &u, Some(u.section.lifted(1)))?;
    let (_, triple) = r.write_cut(out, "cut_unstable_6pi", &u, Some(u.section.lifted(2)))?;
    let homs = find_homoclinics(&r.model, &orbit, 1, &r.ctx.cfg.search())?;
    let graph = build_graph(std::slice::from_ref(&orbit), &homs)?;
    let shadow = match first_symmetric(&graph) {
        Some(e) => {
            let spec = ShadowSpec { walk: Walk::new(&graph, vec![e, e])?, wraps: vec![3], kind: ShadowKind::Connecting };
            let orbit = construct_shadow_orbit(&r.model, &graph, &spec, &r.ctx.cfg.shadow)?;
            out.csv("doubly_homoclinic.csv", |w| orbit.trajectory.write_csv(&r.model, w))?;
            shadow_summary(&orbit)
        }
        None => Value::Null,
    };
    Ok(json!({
        "recipe": { "energy": h, "saddle": "DownUp", "rotation": 1, "lifts": [1, 2], "shadow_wraps": [3] },
        "upo": upo, "stable": stable, "unstable_4pi": double, "unstable_6pi": triple, "doubly_homoclinic": shadow,
    }))
}
