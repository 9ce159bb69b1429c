//! Homoclinic and heteroclinic connections between periodic orbits, found
//! as intersections of tube cuts on a common section and refined by
//! shooting along the tubes.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{State, SystemModel};
use crate::equilibria::{find_equilibrium, EquilibriumLabel};
use crate::error::{Error, Result};
use crate::integrate::{self, CrossingEvent, IntegratorConfig, Trajectory};
use crate::linalg::{dot4, mat_vec, norm4};
use crate::manifolds::{globalize_tube, seed_tube, BranchSign, SectionCut, Stability, DEFAULT_EPS};
use crate::section::{wrap_angle, Direction, SectionKind, SectionSpec};
use crate::upo::{find_symmetric_upo, PeriodicOrbit};

pub mod geometry;

pub use geometry::{intersect_cuts, intersect_polylines, Candidate};

/// Candidates closer than this in section coordinates are merged.
pub const MERGE_TOL: f64 = 1e-6;
/// Distance to the symmetry line below which a connection is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-6;
/// Required stable/unstable agreement at the section, every coordinate.
pub const MISMATCH_TOL: f64 = 1e-8;
pub const APPROACH_TOL: f64 = 1e-3;
const REFINE_TOL: f64 = 1e-14;
/// Distances from the orbits at which the shooting conditions are imposed,
/// in turn; each stage starts inside the next one's basin. The last one is
/// where refined connections are re-seeded.
const SHOOTING_DISTANCES: [f64; 4] = [1e-2, 3e-3, 1e-3, 5e-4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Homoclinic,
    Heteroclinic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionOrbit {
    pub id: usize,
    pub kind: ConnectionKind,
    pub source: EquilibriumLabel,
    pub target: EquilibriumLabel,
    pub energy: f64,
    pub section: SectionSpec,
    pub section_point: [f64; 2],
    /// Unstable-side state at the section.
    pub state: State,
    /// Stable-side state at the section (possibly on another angle lift).
    pub stable_state: State,
    /// `|unstable − stable|` per coordinate, angles compared modulo 2π.
    pub mismatch: [f64; 4],
    /// Orbit phases of the two re-seeded points and their signed flight
    /// times to the section.
    pub phases: [f64; 2],
    pub flight_times: [f64; 2],
    /// From the unstable-side seed through the section to the stable-side
    /// seed, both about 1e-4 from their orbits.
    pub trajectory: Trajectory,
    pub symmetric: bool,
    pub partner: Option<usize>,
    /// Net turns of (θ1, θ2) from source to target, relative to the saddles.
    pub rotation: [i32; 2],
    /// Distances from the source orbit and the target orbit of the two ends
    /// of the shooting problem.
    pub approach: [f64; 2],
    pub low_confidence: bool,
}

impl ConnectionOrbit {
    pub fn max_mismatch(&self) -> f64 {
        self.mismatch.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// One side of a connection: a tube branch of `orbit` and the section it is
/// flowed to.
#[derive(Debug, Clone)]
pub struct ManifoldSide {
    pub orbit: PeriodicOrbit,
    pub stability: Stability,
    pub sign: BranchSign,
    pub eps: f64,
    pub section: SectionSpec,
}

impl ManifoldSide {
    /// Tube seed at an arbitrary phase, consistent with [`seed_tube`].
    pub fn seed_at(&self, model: &SystemModel, phase: f64, cfg: &IntegratorConfig) -> Result<State> {
        let period = self.orbit.period;
        let phase = phase.rem_euclid(period);
        let (t, dir) = match self.stability {
            Stability::Unstable => (phase, self.orbit.unstable_dir),
            Stability::Stable => (if phase == 0.0 { 0.0 } else { phase - period }, self.orbit.stable_dir),
        };
        let (x, m) = integrate::integrate_variational(model, self.orbit.anchor, t, cfg)?;
        let v = unit(mat_vec(&m, &dir));
        let x = x.to_array();
        Ok(State::from_array([0, 1, 2, 3].map(|i| x[i] + self.sign.value() * self.eps * v[i])))
    }

    /// First section crossing of the tube trajectory through the seed at
    /// `phase`.
    pub fn hit(&self, model: &SystemModel, phase: f64, cfg: &IntegratorConfig) -> Result<CrossingEvent> {
        let seed = self.seed_at(model, phase, cfg)?;
        integrate::next_crossing(model, seed, &self.section, self.stability.time_sign(), cfg, 0)
    }

    pub fn cut(&self, model: &SystemModel, n_seeds: usize, cfg: &IntegratorConfig) -> Result<SectionCut> {
        let branch = seed_tube(model, &self.orbit, self.stability, self.sign, self.eps, n_seeds, cfg)?;
        globalize_tube(model, &branch, &self.section, cfg)
    }
}

/// Plane-coordinate difference with angular coordinates compared mod 2π.
fn plane_diff(section: &SectionSpec, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d0 = a[0] - b[0];
    [if section.plane_is_angular() { wrap_angle(d0) } else { d0 }, a[1] - b[1]]
}

fn state_mismatch(model: &SystemModel, a: &State, b: &State) -> [f64; 4] {
    let (a, b) = (a.to_array(), b.to_array());
    let mut d = [0.0; 4];
    for i in 0..4 {
        let raw = a[i] - b[i];
        d[i] = if model.kind().is_pendulum() && i < 2 { wrap_angle(raw).abs() } else { raw.abs() };
    }
    d
}

/// Image of a section point under the section's reversing symmetry: the
/// reflection θ ↦ −θ composed with the reverser for the pendulums, the
/// reverser itself for the three-body problem.
pub fn mirror_plane_point(model: &SystemModel, p: [f64; 2]) -> [f64; 2] {
    if model.kind().is_pendulum() {
        [wrap_angle(-p[0]), p[1]]
    } else {
        [p[0], -p[1]]
    }
}

/// Image of a section point under the point reflection θ ↦ −θ, ω ↦ −ω of
/// the pendulums. It keeps the direction of time, so it maps connections
/// between two saddles to connections between the same saddles (on other
/// lifts); the three-body problem has no such symmetry and is returned
/// unchanged.
pub fn reflect_plane_point(model: &SystemModel, p: [f64; 2]) -> [f64; 2] {
    if model.kind().is_pendulum() {
        [wrap_angle(-p[0]), -p[1]]
    } else {
        p
    }
}

/// The symmetry pairing connections of `kind`: [`mirror_plane_point`] for
/// homoclinics, [`reflect_plane_point`] for heteroclinics.
pub fn partner_point(model: &SystemModel, kind: ConnectionKind, p: [f64; 2]) -> [f64; 2] {
    match kind {
        ConnectionKind::Homoclinic => mirror_plane_point(model, p),
        ConnectionKind::Heteroclinic => reflect_plane_point(model, p),
    }
}

/// Full-state version of [`mirror_plane_point`].
pub fn mirror_state(model: &SystemModel, s: &State) -> State {
    if model.kind().is_pendulum() {
        State::new(-s.q1, -s.q2, s.v1, s.v2)
    } else {
        model.reverser(s)
    }
}

/// Multiples of 2π (per angle) taking `b` closest to `a`.
fn lift_offset(model: &SystemModel, a: &State, b: &State) -> [f64; 2] {
    if !model.kind().is_pendulum() {
        return [0.0, 0.0];
    }
    let k = |d: f64| (d / (2.0 * PI)).round() * 2.0 * PI;
    [k(a.q1 - b.q1), k(a.q2 - b.q2)]
}

fn shift(s: &State, by: [f64; 2]) -> State {
    State::new(s.q1 + by[0], s.q2 + by[1], s.v1, s.v2)
}

/// Distance from `p` to the closed polyline `orbit`, angles of `p` shifted
/// by 2π multiples toward `center` first.
fn distance_to_orbit(model: &SystemModel, orbit: &[State], center: &State, p: &State) -> f64 {
    let p = model.wrap_near(p, center).to_array();
    let n = orbit.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = orbit[i].to_array();
        let b = orbit[(i + 1) % n].to_array();
        let mut ab = [0.0; 4];
        let mut ap = [0.0; 4];
        for k in 0..4 {
            ab[k] = b[k] - a[k];
            ap[k] = p[k] - a[k];
        }
        let l2: f64 = ab.iter().map(|x| x * x).sum();
        let t = if l2 > 0.0 { (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / l2).clamp(0.0, 1.0) } else { 0.0 };
        let d: f64 = (0..4).map(|k| (ap[k] - t * ab[k]).powi(2)).sum::<f64>().sqrt();
        best = best.min(d);
    }
    best
}

/// Settings shared by the connection searches.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub n_seeds: usize,
    pub eps: f64,
    pub merge_tol: f64,
    pub integrator: IntegratorConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { n_seeds: 400, eps: DEFAULT_EPS, merge_tol: MERGE_TOL, integrator: IntegratorConfig::default() }
    }
}

/// Samples per period of the polyline used to locate points near an orbit.
const FRAME_SAMPLES: usize = 2000;

/// An orbit prepared for locating nearby points.
pub(crate) struct OrbitFrame<'a> {
    pub(crate) orbit: &'a PeriodicOrbit,
    samples: Vec<State>,
    pub(crate) center: State,
}

/// Floquet coordinates of a point close to an orbit.
pub(crate) struct LocalCoords {
    pub(crate) phase: f64,
    /// Orbit point at `phase`, on the angle lift of the located point.
    pub(crate) base: State,
    /// Columns: unit unstable and stable directions, the vector field and
    /// the energy gradient.
    pub(crate) basis: Matrix4<f64>,
    /// Offset from `base` in that basis.
    pub(crate) coeffs: [f64; 4],
    /// Inverse of the basis matrix; row `k` yields coefficient `k`.
    pub(crate) inverse: Matrix4<f64>,
}

impl LocalCoords {
    /// The located point with its component off the branch of `stability`
    /// removed. That component is tangent to the energy level, so the
    /// energy is unchanged to first order.
    pub(crate) fn on_manifold(&self, stability: Stability) -> State {
        let drop = match stability {
            Stability::Unstable => 1,
            Stability::Stable => 0,
        };
        let mut y = Vector4::from(self.base.to_array());
        for k in (0..4).filter(|&k| k != drop) {
            y += self.coeffs[k] * self.basis.column(k);
        }
        State::new(y[0], y[1], y[2], y[3])
    }

    /// Size of the component off the branch of `stability` relative to the
    /// component along it.
    pub(crate) fn off_ratio(&self, stability: Stability) -> f64 {
        let [a, b, _, _] = self.coeffs;
        match stability {
            Stability::Unstable => (b / a).abs(),
            Stability::Stable => (a / b).abs(),
        }
    }
}

pub(crate) fn unit(v: [f64; 4]) -> [f64; 4] {
    let n = norm4(&v);
    v.map(|x| x / n)
}

pub(crate) fn energy_gradient(model: &SystemModel, y: &[f64; 4]) -> [f64; 4] {
    let mut g = [0.0; 4];
    for i in 0..4 {
        let h = 1e-7 * (1.0 + y[i].abs());
        let (mut p, mut m) = (*y, *y);
        p[i] += h;
        m[i] -= h;
        g[i] = (model.energy(&p) - model.energy(&m)) / (2.0 * h);
    }
    g
}

impl<'a> OrbitFrame<'a> {
    pub(crate) fn new(model: &SystemModel, orbit: &'a PeriodicOrbit, cfg: &IntegratorConfig) -> Result<Self> {
        let mut samples = orbit.sample(model, FRAME_SAMPLES, cfg)?.states;
        samples.pop();
        let center = find_equilibrium(model, orbit.saddle)?.state;
        Ok(Self { orbit, samples, center })
    }

    pub(crate) fn distance(&self, model: &SystemModel, p: &State) -> f64 {
        distance_to_orbit(model, &self.samples, &self.center, p)
    }

    /// First `|t|` along the flow from `p` over `span` (signed) at which the
    /// distance to the orbit is at most `target`.
    pub(crate) fn time_to_reach(&self, model: &SystemModel, p: State, span: f64, target: f64, cfg: &IntegratorConfig) -> Result<f64> {
        let n = 400;
        let times: Vec<f64> = (1..=n).map(|k| span * k as f64 / n as f64).collect();
        let states = integrate::sample(model, p, &times, cfg)?;
        states
            .iter()
            .zip(&times)
            .find(|(s, _)| self.distance(model, s) <= target)
            .map(|(_, t)| t.abs())
            .ok_or_else(|| {
                let best = states.iter().map(|s| self.distance(model, s)).fold(f64::INFINITY, f64::min);
                Error::RefinementDiverged(format!("flow does not come within {target:e} of the orbit (closest {best:.3e})"))
            })
    }

    /// Orbit phase whose base point differs from `p` only transversally to
    /// the flow, and the Floquet frame there.
    pub(crate) fn locate(&self, model: &SystemModel, p: &State, cfg: &IntegratorConfig) -> Result<LocalCoords> {
        let period = self.orbit.period;
        let q = model.wrap_near(p, &self.center);
        let k = (0..self.samples.len())
            .min_by(|&i, &j| self.samples[i].distance(&q).total_cmp(&self.samples[j].distance(&q)))
            .expect("orbit samples");
        let mut phase = period * k as f64 / self.samples.len() as f64;
        let offset = |x: &State| {
            let (a, b) = (p.to_array(), x.to_array());
            [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
        };
        for iter in 0.. {
            let (x, forward) = integrate::integrate_variational(model, self.orbit.anchor, phase, cfg)?;
            let base = model.wrap_near(&x, p);
            let f = model.field(&base.to_array());
            let d = offset(&base);
            let dt = dot4(&d, &f) / dot4(&f, &f);
            if dt.abs() > 1e-13 * period && iter < 8 {
                phase = (phase + dt).rem_euclid(period);
                continue;
            }
            let (_, backward) = integrate::integrate_variational(model, self.orbit.anchor, phase - period, cfg)?;
            let unstable = unit(mat_vec(&forward, &self.orbit.unstable_dir));
            let stable = unit(mat_vec(&backward, &self.orbit.stable_dir));
            let grad = energy_gradient(model, &base.to_array());
            let basis = Matrix4::from_columns(&[
                Vector4::from(unstable),
                Vector4::from(stable),
                Vector4::from(f),
                Vector4::from(grad),
            ]);
            let inverse = basis.try_inverse().ok_or_else(|| Error::Degenerate("singular Floquet frame".into()))?;
            let c = inverse * Vector4::from(d);
            return Ok(LocalCoords { phase, base, basis, coeffs: [c[0], c[1], c[2], c[3]], inverse });
        }
        unreachable!()
    }
}

/// Tube trajectories magnify integration error by roughly `1/eps`; the
/// refinement runs at tighter tolerances than the cuts.
pub(crate) fn refinement_config(cfg: &IntegratorConfig) -> IntegratorConfig {
    IntegratorConfig { rel_tol: cfg.rel_tol.min(REFINE_TOL), abs_tol: cfg.abs_tol.min(REFINE_TOL), ..*cfg }
}

fn phase_at(cut: &SectionCut, seg: usize, t: f64, period: f64) -> f64 {
    let a = cut.phases[seg];
    let mut b = cut.phases[(seg + 1) % cut.len()];
    if b < a {
        b += period;
    }
    (a + t * (b - a)).rem_euclid(period)
}

/// Coarse stage: adjust the two tube phases until the tube trajectories
/// meet on the section to within the tube integration noise (about
/// `tol / eps`). Returns the unstable-side crossing and the stable-side
/// flight time.
fn match_tube_phases(
    model: &SystemModel,
    candidate: &Candidate,
    unstable: &ManifoldSide,
    stable: &ManifoldSide,
    cut_u: &SectionCut,
    cut_s: &SectionCut,
    cfg: &IntegratorConfig,
) -> Result<(CrossingEvent, f64)> {
    let (tu, ts) = (unstable.orbit.period, stable.orbit.period);
    let mut z = [phase_at(cut_u, candidate.seg_u, candidate.t_u, tu), phase_at(cut_s, candidate.seg_s, candidate.t_s, ts)];
    let section = unstable.section;
    let eval = |z: &[f64; 2]| -> Result<([f64; 2], CrossingEvent, CrossingEvent)> {
        let u = unstable.hit(model, z[0], cfg)?;
        let s = stable.hit(model, z[1], cfg)?;
        let pu = section.plane_coords(&u.state.to_array());
        let ps = stable.section.plane_coords(&s.state.to_array());
        Ok((plane_diff(&section, pu, ps), u, s))
    };
    let norm = |r: &[f64; 2]| r[0].abs().max(r[1].abs());
    let (mut r, mut u, mut s) = eval(&z)?;
    let h = [1e-6 * tu, 1e-6 * ts];
    for _ in 0..20 {
        if norm(&r) < 1e-7 {
            break;
        }
        let mut jac = Matrix2::zeros();
        for c in 0..2 {
            let (mut zp, mut zm) = (z, z);
            zp[c] += h[c];
            zm[c] -= h[c];
            let (rp, _, _) = eval(&zp)?;
            let (rm, _, _) = eval(&zm)?;
            for k in 0..2 {
                jac[(k, c)] = (rp[k] - rm[k]) / (2.0 * h[c]);
            }
        }
        let Some(dz) = jac.lu().solve(&Vector2::new(-r[0], -r[1])) else { break };
        let mut scale = (0.05 * tu.min(ts) / dz.amax()).min(1.0);
        let mut moved = false;
        for _ in 0..12 {
            let trial = [z[0] + scale * dz[0], z[1] + scale * dz[1]];
            if let Ok((rt, ut, st)) = eval(&trial) {
                if norm(&rt) < norm(&r) {
                    (z, r, u, s) = (trial, rt, ut, st);
                    moved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !(norm(&r) < 1e-4) {
        return Err(Error::RefinementDiverged(format!("tube phases do not match: residual {:.3e}", norm(&r))));
    }
    Ok((u, s.time))
}

/// Shooting refinement of an intersection candidate. The unknown is the
/// point on the section; flowed backward it must land on the local
/// unstable manifold of the source orbit and flowed forward on the local
/// stable manifold of the target, which is well conditioned because
/// departures from either manifold are magnified by the same factor as
/// the signal. The result is then verified by re-seeding on both local
/// manifolds and flowing each seed to the section.
pub fn refine_connection(
    model: &SystemModel,
    candidate: &Candidate,
    unstable: &ManifoldSide,
    stable: &ManifoldSide,
    cut_u: &SectionCut,
    cut_s: &SectionCut,
    cfg: &IntegratorConfig,
) -> Result<ConnectionOrbit> {
    let h = unstable.orbit.energy;
    if (h - stable.orbit.energy).abs() > 1e-8 {
        return Err(Error::EnergyMismatch(format!("{} vs {}", h, stable.orbit.energy)));
    }
    let cfg = &refinement_config(cfg);
    let section = unstable.section;
    let frame_u = OrbitFrame::new(model, &unstable.orbit, cfg)?;
    let frame_s = OrbitFrame::new(model, &stable.orbit, cfg)?;

    let (hit_u, flight_s) = match_tube_phases(model, candidate, unstable, stable, cut_u, cut_s, cfg)?;
    let (template, flight_u) = (hit_u.state, hit_u.time);

    let build = |plane: [f64; 2]| section.complete_state(model, plane, h, &template);
    struct Eval {
        ends: [State; 2],
        local: [LocalCoords; 2],
        residual: Vector2<f64>,
        jacobian: Matrix2<f64>,
    }
    let eval = |plane: [f64; 2], tau_u: f64, tau_s: f64| -> Result<Eval> {
        let p = build(plane)?;
        let mut e = Matrix4x2::zeros();
        for c in 0..2 {
            let dh = 1e-7 * (1.0 + plane[c].abs());
            let (mut pp, mut pm) = (plane, plane);
            pp[c] += dh;
            pm[c] -= dh;
            let (a, b) = (build(pp)?.to_array(), build(pm)?.to_array());
            for r in 0..4 {
                e[(r, c)] = (a[r] - b[r]) / (2.0 * dh);
            }
        }
        let (yu, mu) = integrate::integrate_variational(model, p, -tau_u, cfg)?;
        let (ys, ms) = integrate::integrate_variational(model, p, tau_s, cfg)?;
        let lu = frame_u.locate(model, &yu, cfg)?;
        let ls = frame_s.locate(model, &ys, cfg)?;
        let row_u = lu.inverse.row(1) * mu * e;
        let row_s = ls.inverse.row(0) * ms * e;
        Ok(Eval {
            ends: [yu, ys],
            residual: Vector2::new(lu.coeffs[1], ls.coeffs[0]),
            jacobian: Matrix2::new(row_u[0], row_u[1], row_s[0], row_s[1]),
            local: [lu, ls],
        })
    };
    let merit = |e: &Eval| e.local[0].off_ratio(Stability::Unstable).max(e.local[1].off_ratio(Stability::Stable));

    let mut plane = section.plane_coords(&template.to_array());
    let mut cur = None;
    for (stage, &distance) in SHOOTING_DISTANCES.iter().enumerate() {
        let last = stage + 1 == SHOOTING_DISTANCES.len();
        let p = build(plane)?;
        let tau_u = frame_u.time_to_reach(model, p, -(flight_u.abs() + unstable.orbit.period), distance, cfg)?;
        let tau_s = frame_s.time_to_reach(model, p, flight_s.abs() + stable.orbit.period, distance, cfg)?;
        let near = |e: &Eval| {
            frame_u.distance(model, &e.ends[0]) < 5.0 * distance && frame_s.distance(model, &e.ends[1]) < 5.0 * distance
        };
        let mut now = eval(plane, tau_u, tau_s)?;
        if !near(&now) {
            return Err(Error::RefinementDiverged(format!("candidate does not shadow the tubes at distance {distance:e}")));
        }
        for _ in 0..30 {
            if !last && merit(&now) < 1e-5 {
                break;
            }
            let Some(step) = now.jacobian.lu().solve(&(-now.residual)) else { break };
            let mut scale = 1.0;
            let mut moved = false;
            for _ in 0..12 {
                let trial = [plane[0] + scale * step[0], plane[1] + scale * step[1]];
                if let Ok(e) = eval(trial, tau_u, tau_s) {
                    if merit(&e) < merit(&now) && near(&e) {
                        plane = trial;
                        now = e;
                        moved = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !moved || step.amax() * scale < 1e-14 * (1.0 + plane[0].abs().max(plane[1].abs())) {
                break;
            }
        }
        cur = Some(now);
    }
    let cur = cur.expect("at least one stage");
    if !(merit(&cur) < 1e-4) {
        return Err(Error::RefinementDiverged(format!("off-manifold ratio {:.3e}", merit(&cur))));
    }

    // re-seed on the local linear manifolds and flow back to the section
    let [lu, ls] = &cur.local;
    let seed_u = lu.on_manifold(Stability::Unstable);
    let seed_s = ls.on_manifold(Stability::Stable);
    let section_s = stable.section.lifted(section.lift_count(&stable.section));
    let ev_u = integrate::next_crossing(model, seed_u, &section, 1.0, cfg, 0)?;
    let ev_s = integrate::next_crossing(model, seed_s, &section_s, -1.0, cfg, 0)?;
    let mismatch = state_mismatch(model, &ev_u.state, &ev_s.state);
    let worst = mismatch.iter().fold(0.0f64, |m, v| m.max(*v));
    if !(worst < MISMATCH_TOL) {
        return Err(Error::RefinementDiverged(format!("section mismatch {worst:.3e}")));
    }
    let approach = [frame_u.distance(model, &cur.ends[0]), frame_s.distance(model, &cur.ends[1])];
    if !(approach[0] < APPROACH_TOL && approach[1] < APPROACH_TOL) {
        return Err(Error::AsymptoticsFailed(format!("end distances {:.3e} / {:.3e}", approach[0], approach[1])));
    }

    let (t_u, t_s) = (ev_u.time, ev_s.time);
    let first = integrate::integrate(model, seed_u, (0.0, t_u), cfg)?;
    let second = integrate::integrate(model, seed_s, (0.0, t_s), cfg)?;
    let lift = lift_offset(model, &ev_u.state, &ev_s.state);
    let mut times = first.times.clone();
    let mut states = first.states.clone();
    times.extend(second.times.iter().rev().skip(1).map(|t| t_u + (t - t_s)));
    states.extend(second.states.iter().rev().skip(1).map(|x| shift(x, lift)));
    let trajectory = Trajectory {
        model: model.kind(),
        times,
        states,
        energy_at_start: first.energy_at_start,
        energy_at_end: second.energy_at_start,
    };

    let end_s = shift(&seed_s, lift);
    let rotation = if model.kind().is_pendulum() {
        let d1 = end_s.q1 - seed_u.q1 - (frame_s.center.q1 - frame_u.center.q1);
        let d2 = end_s.q2 - seed_u.q2 - (frame_s.center.q2 - frame_u.center.q2);
        [(d1 / (2.0 * PI)).round() as i32, (d2 / (2.0 * PI)).round() as i32]
    } else {
        [0, 0]
    };
    let point = section.wrapped_plane_coords(&ev_u.state.to_array());
    let kind = if unstable.orbit.saddle == stable.orbit.saddle { ConnectionKind::Homoclinic } else { ConnectionKind::Heteroclinic };
    let m = partner_point(model, kind, point);
    let symmetric = plane_diff(&section, point, m).iter().all(|d| d.abs() < 2.0 * SYMMETRY_TOL);
    Ok(ConnectionOrbit {
        id: 0,
        kind,
        source: unstable.orbit.saddle,
        target: stable.orbit.saddle,
        energy: h,
        section,
        section_point: point,
        state: ev_u.state,
        stable_state: ev_s.state,
        mismatch,
        phases: [lu.phase, ls.phase],
        flight_times: [t_u, t_s],
        trajectory,
        symmetric,
        partner: None,
        rotation,
        approach,
        low_confidence: candidate.low_confidence,
    })
}

/// Cut both sides, intersect, refine every candidate (in parallel), drop
/// failures and duplicates, and link mirror partners.
pub fn connect(model: &SystemModel, unstable: &ManifoldSide, stable: &ManifoldSide, opts: &SearchOptions) -> Result<Vec<ConnectionOrbit>> {
    let cfg = &opts.integrator;
    let cut_u = unstable.cut(model, opts.n_seeds, cfg)?;
    let cut_s = stable.cut(model, opts.n_seeds, cfg)?;
    let candidates = intersect_cuts(&cut_u, &cut_s, opts.merge_tol)?;
    let refined: Vec<Option<ConnectionOrbit>> = candidates
        .par_iter()
        .map(|c| refine_connection(model, c, unstable, stable, &cut_u, &cut_s, cfg).ok())
        .collect();
    let mut out: Vec<ConnectionOrbit> = Vec::new();
    for c in refined.into_iter().flatten() {
        let dup = out.iter().any(|o| {
            let d = plane_diff(&c.section, o.section_point, c.section_point);
            d[0].abs() < opts.merge_tol && d[1].abs() < opts.merge_tol
        });
        if !dup {
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.section_point[0].total_cmp(&b.section_point[0]).then(a.section_point[1].total_cmp(&b.section_point[1])));
    for (i, c) in out.iter_mut().enumerate() {
        c.id = i;
    }
    link_partners(model, &mut out, 1e-5);
    Ok(out)
}

/// Pair each asymmetric connection with the one at its image under
/// [`partner_point`].
pub fn link_partners(model: &SystemModel, conns: &mut [ConnectionOrbit], tol: f64) {
    let points: Vec<([f64; 2], SectionSpec)> = conns.iter().map(|c| (c.section_point, c.section)).collect();
    for c in conns.iter_mut() {
        if c.symmetric {
            continue;
        }
        let m = partner_point(model, c.kind, c.section_point);
        c.partner = points
            .iter()
            .enumerate()
            .find(|(j, (p, sec))| *j != c.id && plane_diff(sec, *p, m).iter().all(|d| d.abs() < tol))
            .map(|(j, _)| j);
    }
}

/// Index of the angle that turns during a connection out of `label`.
fn rotating_angle(label: EquilibriumLabel) -> Option<usize> {
    match label {
        EquilibriumLabel::DownUp => Some(1),
        EquilibriumLabel::UpDown => Some(0),
        _ => None,
    }
}

fn sign_of(x: f64) -> BranchSign {
    if x >= 0.0 {
        BranchSign::Plus
    } else {
        BranchSign::Minus
    }
}

/// Sides for 'physical' homoclinics of `orbit`: the rotating arm turns once
/// in the sense of `rotation` (+1 increases the angle). The unstable branch
/// leaving in that sense is flowed forward to the next 2πk level, the
/// stable branch arriving in that sense backward to the previous one.
pub fn homoclinic_sides(model: &SystemModel, orbit: &PeriodicOrbit, rotation: i32, eps: f64) -> Result<(ManifoldSide, ManifoldSide)> {
    let d = if rotation >= 0 { 1.0 } else { -1.0 };
    let dir = if d > 0.0 { Direction::Positive } else { Direction::Negative };
    let (section_u, section_s, q) = if model.kind().is_pendulum() {
        let q = rotating_angle(orbit.saddle)
            .ok_or_else(|| Error::InvalidConfig(format!("no rotating arm for {}", orbit.saddle.as_str())))?;
        let center = find_equilibrium(model, orbit.saddle)?.state.to_array()[q];
        let k_u = ((center + d * PI) / (2.0 * PI)).round() as i32;
        let k_s = ((center - d * PI) / (2.0 * PI)).round() as i32;
        let mk = |k| if q == 0 { SectionSpec::theta1(k, dir) } else { SectionSpec::theta2(k, dir) };
        (mk(k_u), mk(k_s), q)
    } else {
        // interior-side loops around the larger primary on y = 0, x < 0
        let s = SectionSpec::pcr3bp_y0(Direction::Any);
        (s, s, 0)
    };
    let (su, ss) = if model.kind().is_pendulum() {
        (sign_of(d * orbit.unstable_dir[q]), sign_of(-d * orbit.stable_dir[q]))
    } else {
        (sign_of(-orbit.unstable_dir[0]), sign_of(-orbit.stable_dir[0]))
    };
    Ok((
        ManifoldSide { orbit: orbit.clone(), stability: Stability::Unstable, sign: su, eps, section: section_u },
        ManifoldSide { orbit: orbit.clone(), stability: Stability::Stable, sign: ss, eps, section: section_s },
    ))
}

/// Physical homoclinics of `orbit` with one turn of the rotating arm.
pub fn find_homoclinics(model: &SystemModel, orbit: &PeriodicOrbit, rotation: i32, opts: &SearchOptions) -> Result<Vec<ConnectionOrbit>> {
    let (u, s) = homoclinic_sides(model, orbit, rotation, opts.eps)?;
    connect(model, &u, &s, opts)
}

/// Same-lift homoclinics: leave upward in the rotating angle and come back
/// from above without completing a turn. The unstable branch is followed to
/// its first downward crossing of the level above the saddle, the stable
/// branch arriving from above backward to the same level.
pub fn find_same_lift_homoclinics(model: &SystemModel, orbit: &PeriodicOrbit, opts: &SearchOptions) -> Result<Vec<ConnectionOrbit>> {
    let q = rotating_angle(orbit.saddle).ok_or_else(|| Error::InvalidConfig("same-lift search needs a pendulum saddle".into()))?;
    let center = find_equilibrium(model, orbit.saddle)?.state.to_array()[q];
    let k = ((center + PI) / (2.0 * PI)).round() as i32;
    let section = if q == 0 { SectionSpec::theta1(k, Direction::Negative) } else { SectionSpec::theta2(k, Direction::Negative) };
    let u = ManifoldSide {
        orbit: orbit.clone(),
        stability: Stability::Unstable,
        sign: sign_of(orbit.unstable_dir[q]),
        eps: opts.eps,
        section,
    };
    let s = ManifoldSide { orbit: orbit.clone(), stability: Stability::Stable, sign: sign_of(orbit.stable_dir[q]), eps: opts.eps, section };
    match connect(model, &u, &s, opts) {
        Err(Error::AllSeedsIncomplete) => Ok(Vec::new()),
        other => other,
    }
}

/// Sides for connections from `src` to `dst` across `θ1 − θ2 = 2πk`, in
/// the sense `direction` (+1: θ1 − θ2 increasing).
pub fn heteroclinic_sides(
    model: &SystemModel,
    src: &PeriodicOrbit,
    dst: &PeriodicOrbit,
    direction: i32,
    eps: f64,
) -> Result<(ManifoldSide, ManifoldSide)> {
    if !model.kind().is_pendulum() {
        return Err(Error::InvalidConfig("diagonal sections exist only for the pendulums".into()));
    }
    let d = if direction >= 0 { 1.0 } else { -1.0 };
    let dir = if d > 0.0 { Direction::Positive } else { Direction::Negative };
    let diag = |label| -> Result<f64> {
        let s = find_equilibrium(model, label)?.state;
        Ok(s.q1 - s.q2)
    };
    let (c_src, c_dst) = (diag(src.saddle)?, diag(dst.saddle)?);
    // the level between each saddle and its neighbouring lift in the sense d
    let level = |c: f64, toward: f64| -> i32 {
        let target = c + toward * PI;
        (target / (2.0 * PI)).round() as i32
    };
    let section_u = SectionSpec::diagonal(level(c_src, d), dir);
    let section_s = SectionSpec::diagonal(level(c_dst, -d), dir);
    let comp = |v: &[f64; 4]| v[0] - v[1];
    Ok((
        ManifoldSide {
            orbit: src.clone(),
            stability: Stability::Unstable,
            sign: sign_of(d * comp(&src.unstable_dir)),
            eps,
            section: section_u,
        },
        ManifoldSide { orbit: dst.clone(), stability: Stability::Stable, sign: sign_of(-d * comp(&dst.stable_dir)), eps, section: section_s },
    ))
}

/// Heteroclinics from `src` to `dst` at their common energy, both senses of
/// crossing the diagonal.
pub fn find_heteroclinics(model: &SystemModel, src: &PeriodicOrbit, dst: &PeriodicOrbit, opts: &SearchOptions) -> Result<Vec<ConnectionOrbit>> {
    if (src.energy - dst.energy).abs() > 1e-8 {
        return Err(Error::EnergyMismatch(format!("{} vs {}", src.energy, dst.energy)));
    }
    let mut all = Vec::new();
    for direction in [1, -1] {
        let (u, s) = heteroclinic_sides(model, src, dst, direction, opts.eps)?;
        match connect(model, &u, &s, opts) {
            Ok(found) => all.extend(found),
            Err(Error::AllSeedsIncomplete) => {}
            Err(e) => return Err(e),
        }
    }
    for (i, c) in all.iter_mut().enumerate() {
        c.id = i;
    }
    link_partners(model, &mut all, 1e-5);
    Ok(all)
}

/// Heteroclinics from the UPO family of `src` to that of `dst` at energy
/// `h`. Below either saddle energy one of the families does not exist and
/// the result is empty.
pub fn find_heteroclinics_at(
    model: &SystemModel,
    src: EquilibriumLabel,
    dst: EquilibriumLabel,
    h: f64,
    opts: &SearchOptions,
) -> Result<Vec<ConnectionOrbit>> {
    let (es, ed) = (find_equilibrium(model, src)?, find_equilibrium(model, dst)?);
    if h <= es.energy || h <= ed.energy {
        return Ok(Vec::new());
    }
    let cfg = &opts.integrator;
    let a = find_symmetric_upo(model, &es, h, 0.0, cfg)?;
    let b = find_symmetric_upo(model, &ed, h, 0.0, cfg)?;
    find_heteroclinics(model, &a, &b, opts)
}

/// Whether the reverser image of `conn` is a connection from its target
/// orbit back to its source: the image of the section state, flowed forward
/// over the unstable flight time, must reach the source orbit and, flowed
/// backward over the stable one, the target orbit. Returns the two
/// distances (target, source).
pub fn verify_reversed(model: &SystemModel, conn: &ConnectionOrbit, source: &PeriodicOrbit, target: &PeriodicOrbit, cfg: &IntegratorConfig) -> Result<[f64; 2]> {
    let image = model.reverser(&conn.state);
    let geo_src = OrbitFrame::new(model, source, cfg)?;
    let geo_dst = OrbitFrame::new(model, target, cfg)?;
    let reach = |t: f64, frame: &OrbitFrame| -> f64 { integrate::flow(model, image, t, cfg).map_or(f64::INFINITY, |p| frame.distance(model, &p)) };
    let to_source = reach(conn.flight_times[0], &geo_src);
    let from_target = reach(conn.flight_times[1], &geo_dst);
    if to_source < APPROACH_TOL && from_target < APPROACH_TOL {
        Ok([from_target, to_source])
    } else {
        Err(Error::AsymptoticsFailed(format!("reversed image: {from_target:.3e} / {to_source:.3e}")))
    }
}

/// Whether a section kind is usable for the connection searches above.
pub fn supports_section(kind: &SectionKind) -> bool {
    !matches!(kind, SectionKind::Hyperplane { .. })
}

#[cfg(test)]
mod tests;






