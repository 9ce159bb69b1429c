//! Orbits that follow a walk: along each connection, then a prescribed
//! number of turns near each intermediate periodic orbit.
//!
//! The orbit is found by multiple shooting. Nodes are placed along the
//! stored connection trajectories and along the periodic orbits for the
//! dwells, so every shooting segment is short compared with the orbit's
//! e-folding time, and the whole chain is corrected at once by SVD
//! Gauss–Newton.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use super::{ConnectionGraph, Walk};
use crate::connections::{energy_gradient, refinement_config, OrbitFrame};
use crate::dynamics::{State, SystemModel};
use crate::error::{Error, Result};
use crate::integrate::{self, IntegratorConfig, Trajectory};
use crate::linalg::{dot4, lstsq};
use crate::upo::PeriodicOrbit;

/// Fewest turns allowed at an intermediate orbit.
pub const N_MIN: usize = 2;
/// Radius around a periodic orbit within which returns count as turns.
pub const DWELL_RADIUS: f64 = 0.02;
/// Largest residual accepted from the shooting solve.
pub const SHADOW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowKind {
    /// From the unstable manifold of the first orbit to the stable manifold
    /// of the last; `wraps` has one entry per intermediate vertex.
    Connecting,
    /// Closed walk traversed periodically (up to angle lifts); `wraps` has
    /// one entry per edge, the turns made at the edge's target.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSpec {
    pub walk: Walk,
    pub wraps: Vec<usize>,
    pub kind: ShadowKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ShadowOptions {
    pub n_min: usize,
    pub dwell_radius: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Longest shooting segment as a fraction of the shortest period.
    pub spacing: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self { n_min: N_MIN, dwell_radius: DWELL_RADIUS, tol: SHADOW_TOL, max_iter: 30, spacing: 0.25, integrator: IntegratorConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowOrbit {
    pub spec: ShadowSpec,
    pub energy: f64,
    pub nodes: Vec<State>,
    pub segment_times: Vec<f64>,
    pub trajectory: Trajectory,
    pub total_time: f64,
    /// Turns counted near each dwell orbit, in walk order.
    pub dwell_counts: Vec<usize>,
    /// Largest distance of each transfer from its connection.
    pub transfer_deviation: Vec<f64>,
    /// Largest shooting residual at the solution.
    pub residual: f64,
    pub iterations: usize,
    /// Angle shift between the end and the start of a periodic shadow.
    pub shift: [f64; 2],
    /// `‖x(T) − x(0)‖` (up to `shift`) of a periodic shadow.
    pub closure: Option<f64>,
    /// Net turns of `(q1, q2)` from start to end, relative to the saddles.
    pub rotation: [i32; 2],
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Transfer { edge: usize },
    Dwell { vertex: usize },
}

/// Node range `[first, last]` of each piece of the chain.
#[derive(Debug, Clone, Copy)]
struct Span {
    piece: Piece,
    first: usize,
    last: usize,
    /// Angle shift applied to the stored connection (transfers only).
    offset: [f64; 2],
}

struct Chain {
    nodes: Vec<State>,
    times: Vec<f64>,
    spans: Vec<Span>,
    /// Node `M` for a periodic chain is `nodes[0]` shifted by this.
    shift: [f64; 2],
}

fn shifted(s: &State, d: [f64; 2]) -> State {
    State::new(s.q1 + d[0], s.q2 + d[1], s.v1, s.v2)
}

/// Angle shift taking `s` to its lift nearest `reference`, negated.
fn lift_of(model: &SystemModel, s: &State, reference: &State) -> [f64; 2] {
    let w = model.wrap_near(s, reference);
    [s.q1 - w.q1, s.q2 - w.q2]
}

fn validate(graph: &ConnectionGraph, spec: &ShadowSpec, opts: &ShadowOptions) -> Result<()> {
    let walk = Walk::new(graph, spec.walk.edges.clone())?;
    if walk != spec.walk {
        return Err(Error::InvalidWalk("vertex list does not match the edges".into()));
    }
    let k = walk.len();
    let want = match spec.kind {
        ShadowKind::Connecting => k - 1,
        ShadowKind::Periodic => {
            if !walk.is_closed() {
                return Err(Error::InvalidWalk("a periodic shadow needs a closed walk".into()));
            }
            k
        }
    };
    if spec.wraps.len() != want {
        return Err(Error::InvalidWalk(format!("{} wrap counts given for {} dwells", spec.wraps.len(), want)));
    }
    if let Some(&w) = spec.wraps.iter().find(|&&w| w < opts.n_min) {
        return Err(Error::WrapsTooSmall { wraps: w, min: opts.n_min });
    }
    if !(opts.tol > 0.0 && opts.spacing > 0.0 && opts.dwell_radius > 0.0) {
        return Err(Error::InvalidConfig("shadow tolerances must be positive".into()));
    }
    Ok(())
}

/// Indices into `times` with gaps at most `h` (where the samples allow),
/// always including both ends.
fn thin(times: &[f64], h: f64) -> Vec<usize> {
    let mut idx = vec![0];
    let mut last = 0;
    for j in 1..times.len() {
        if times[j] - times[last] > h && j - 1 > last {
            idx.push(j - 1);
            last = j - 1;
        }
    }
    if *idx.last().unwrap() != times.len() - 1 {
        idx.push(times.len() - 1);
    }
    idx
}

fn initial_chain(
    model: &SystemModel,
    graph: &ConnectionGraph,
    frames: &[OrbitFrame],
    spec: &ShadowSpec,
    h_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Chain> {
    let k = spec.walk.len();
    let periodic = spec.kind == ShadowKind::Periodic;
    let mut nodes = Vec::new();
    let mut times = Vec::new();
    let mut spans = Vec::new();
    let mut offset = [0.0; 2];
    for i in 0..k {
        let edge = spec.walk.edges[i];
        let tr = &graph.edges[edge].connection.trajectory;
        let first = nodes.len();
        let idx = thin(&tr.times, h_max);
        for w in idx.windows(2) {
            nodes.push(shifted(&tr.states[w[0]], offset));
            times.push(tr.times[w[1]] - tr.times[w[0]]);
        }
        spans.push(Span { piece: Piece::Transfer { edge }, first, last: nodes.len(), offset });
        let arrival = shifted(tr.states.last().expect("connection samples"), offset);
        if i + 1 == k && !periodic {
            nodes.push(arrival);
            break;
        }

        let vertex = spec.walk.vertices[i + 1];
        let frame = &frames[vertex];
        let orbit = frame.orbit;
        let period = orbit.period;
        let next = &graph.edges[spec.walk.edges[(i + 1) % k]].connection.trajectory.states[0];
        let phi_s = frame.locate(model, &arrival, cfg)?.phase;
        let phi_u = frame.locate(model, next, cfg)?.phase;
        let wraps = spec.wraps[i];
        let dwell = wraps as f64 * period + (phi_u - phi_s).rem_euclid(period);
        let n = (dwell / h_max).ceil().max(1.0) as usize;
        let dt = dwell / n as f64;
        let first = nodes.len();
        nodes.push(arrival);
        times.push(dt);
        for j in 1..n {
            let phase = (phi_s + j as f64 * dt).rem_euclid(period);
            let x = integrate::flow(model, orbit.anchor, phase, cfg)?;
            nodes.push(model.wrap_near(&x, &arrival));
            times.push(dt);
        }
        spans.push(Span { piece: Piece::Dwell { vertex }, first, last: nodes.len(), offset: [0.0; 2] });
        // the next connection leaves from the lift of the orbit the dwell is on
        let lift = lift_of(model, &arrival, &frame.center);
        let own = lift_of(model, next, &frame.center);
        offset = [lift[0] - own[0], lift[1] - own[1]];
    }
    let shift = if periodic { offset } else { [0.0; 2] };
    Ok(Chain { nodes, times, spans, shift })
}

/// Extra conditions at the two ends of a connecting chain.
struct Ends<'a> {
    start: &'a OrbitFrame<'a>,
    end: &'a OrbitFrame<'a>,
}

struct System<'a> {
    model: &'a SystemModel,
    energy: f64,
    ends: Option<Ends<'a>>,
    shift: [f64; 2],
    cfg: IntegratorConfig,
}

struct Linearised {
    residual: DVector<f64>,
    jacobian: DMatrix<f64>,
    /// Largest joint residual and where it is.
    worst_joint: (usize, f64),
}

impl System<'_> {
    fn n_nodes(&self, n_seg: usize) -> usize {
        if self.ends.is_some() {
            n_seg + 1
        } else {
            n_seg
        }
    }

    fn target(&self, nodes: &[State], j: usize) -> State {
        if j < nodes.len() {
            nodes[j]
        } else {
            shifted(&nodes[0], self.shift)
        }
    }

    /// Residual, and with `want_jacobian` its Jacobian (zeros otherwise).
    fn linearise(&self, nodes: &[State], times: &[f64], want_jacobian: bool) -> Result<Linearised> {
        let m = times.len();
        let nn = self.n_nodes(m);
        let cols = 4 * nn + m;
        let extra = if self.ends.is_some() { 3 } else { 1 };
        let rows = 4 * m + nn + extra;
        let mut jac = if want_jacobian { DMatrix::zeros(rows, cols) } else { DMatrix::zeros(0, 0) };
        let mut res = DVector::zeros(rows);
        let mut worst_joint = (0, 0.0f64);

        for j in 0..m {
            let (end, mono) = if want_jacobian {
                integrate::integrate_variational(self.model, nodes[j], times[j], &self.cfg)?
            } else {
                (integrate::flow(self.model, nodes[j], times[j], &self.cfg)?, Matrix4::zeros())
            };
            let target = self.target(nodes, j + 1);
            let f = self.model.field(&end.to_array());
            let (e, t) = (end.to_array(), target.to_array());
            let mut worst = 0.0f64;
            for r in 0..4 {
                let row = 4 * j + r;
                res[row] = e[r] - t[r];
                worst = worst.max(res[row].abs());
                if !want_jacobian {
                    continue;
                }
                for c in 0..4 {
                    jac[(row, 4 * j + c)] = mono[(r, c)];
                }
                // closing joint of a periodic chain lands on node 0
                let next = (j + 1) % nn;
                jac[(row, 4 * next + r)] -= 1.0;
                jac[(row, 4 * nn + j)] = f[r];
            }
            if worst > worst_joint.1 {
                worst_joint = (j, worst);
            }
        }

        // nodes only move across the flow
        let mut row = 4 * m;
        for (j, x) in nodes.iter().enumerate().take(nn) {
            if want_jacobian {
                let f = self.model.field(&x.to_array());
                for c in 0..4 {
                    jac[(row, 4 * j + c)] = f[c];
                }
            }
            row += 1;
        }

        let x0 = nodes[0].to_array();
        res[row] = self.model.energy(&x0) - self.energy;
        if want_jacobian {
            let g = energy_gradient(self.model, &x0);
            for c in 0..4 {
                jac[(row, c)] = g[c];
            }
        }
        row += 1;

        if let Some(ends) = &self.ends {
            // start on the local unstable manifold, end on the local stable one
            for (node, frame, k) in [(0, ends.start, 1), (nn - 1, ends.end, 0)] {
                let loc = frame.locate(self.model, &nodes[node], &self.cfg)?;
                res[row] = loc.coeffs[k];
                if want_jacobian {
                    for c in 0..4 {
                        jac[(row, 4 * node + c)] = loc.inverse[(k, c)];
                    }
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, rows);
        Ok(Linearised { residual: res, jacobian: jac, worst_joint })
    }

    fn residual_norm(&self, nodes: &[State], times: &[f64]) -> Result<f64> {
        Ok(self.linearise(nodes, times, false)?.residual.amax())
    }
}

fn apply(nodes: &[State], times: &[f64], dz: &DVector<f64>, scale: f64) -> (Vec<State>, Vec<f64>) {
    let nn = nodes.len();
    let new_nodes = nodes
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let a = s.to_array();
            State::from_array([0, 1, 2, 3].map(|c| a[c] + scale * dz[4 * j + c]))
        })
        .collect();
    let new_times = times.iter().enumerate().map(|(j, t)| t + scale * dz[4 * nn + j]).collect();
    (new_nodes, new_times)
}

/// Counts `−→+` crossings of the plane through the orbit anchor normal to
/// the flow, made near the anchor and within `radius` of the orbit.
fn count_turns(model: &SystemModel, frame: &OrbitFrame, states: &[State], radius: f64, reach: f64) -> usize {
    let anchor = frame.orbit.anchor;
    let normal = model.field(&anchor.to_array());
    let g = |s: &State| {
        let q = model.wrap_near(s, &anchor).to_array();
        let a = anchor.to_array();
        dot4(&normal, &[q[0] - a[0], q[1] - a[1], q[2] - a[2], q[3] - a[3]])
    };
    let near = |s: &State| model.wrap_near(s, &anchor).distance(&anchor) < reach && frame.distance(model, s) < radius;
    states.windows(2).filter(|w| g(&w[0]) < 0.0 && g(&w[1]) >= 0.0 && near(&w[0]) && near(&w[1])).count()
}

fn polyline_distance(p: &State, line: &[State]) -> f64 {
    let p = p.to_array();
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        let (a, b) = (w[0].to_array(), w[1].to_array());
        let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2], b[3] - a[3]];
        let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2], p[3] - a[3]];
        let l2 = dot4(&ab, &ab);
        let t = if l2 > 0.0 { (dot4(&ap, &ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let d = (0..4).map(|k| (ap[k] - t * ab[k]).powi(2)).sum::<f64>().sqrt();
        best = best.min(d);
    }
    best
}

/// Cubic Hermite refinement of sampled flow states, so chords do not
/// overstate distances where the flow is fast.
fn densify(model: &SystemModel, times: &[f64], states: &[State], offset: [f64; 2]) -> Vec<State> {
    const SUB: usize = 8;
    let mut out = Vec::with_capacity(SUB * states.len());
    for j in 0..states.len().saturating_sub(1) {
        let h = times[j + 1] - times[j];
        let (a, b) = (states[j].to_array(), states[j + 1].to_array());
        let (fa, fb) = (model.field(&a), model.field(&b));
        for k in 0..SUB {
            let t = k as f64 / SUB as f64;
            let (h00, h10) = (2.0 * t.powi(3) - 3.0 * t * t + 1.0, t.powi(3) - 2.0 * t * t + t);
            let (h01, h11) = (-2.0 * t.powi(3) + 3.0 * t * t, t.powi(3) - t * t);
            let y = [0, 1, 2, 3].map(|c| h00 * a[c] + h10 * h * fa[c] + h01 * b[c] + h11 * h * fb[c]);
            out.push(shifted(&State::from_array(y), offset));
        }
    }
    if let Some(last) = states.last() {
        out.push(shifted(last, offset));
    }
    out
}

/// Solve for an orbit following `spec` through `graph`.
pub fn construct_shadow_orbit(model: &SystemModel, graph: &ConnectionGraph, spec: &ShadowSpec, opts: &ShadowOptions) -> Result<ShadowOrbit> {
    validate(graph, spec, opts)?;
    let cfg = refinement_config(&opts.integrator);
    let frames = graph.vertices.iter().map(|o| OrbitFrame::new(model, o, &cfg)).collect::<Result<Vec<_>>>()?;
    let shortest = graph.vertices.iter().map(|o: &PeriodicOrbit| o.period).fold(f64::INFINITY, f64::min);
    let chain = initial_chain(model, graph, &frames, spec, opts.spacing * shortest, &cfg)?;

    let walk = &spec.walk;
    let ends = match spec.kind {
        ShadowKind::Connecting => Some(Ends { start: &frames[walk.vertices[0]], end: &frames[*walk.vertices.last().unwrap()] }),
        ShadowKind::Periodic => None,
    };
    let sys = System { model, energy: graph.energy, ends, shift: chain.shift, cfg };

    let (mut nodes, mut times) = (chain.nodes, chain.times);
    let mut iterations = 0;
    let residual = loop {
        let lin = sys.linearise(&nodes, &times, true)?;
        let r = lin.residual.amax();
        if r < opts.tol {
            break r;
        }
        if iterations == opts.max_iter {
            return Err(Error::ShadowDiverged { joint: lin.worst_joint.0, residual: r });
        }
        iterations += 1;
        let dz = lstsq(&lin.jacobian, &(-&lin.residual), 1e-13);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let (n2, t2) = apply(&nodes, &times, &dz, scale);
            if t2.iter().all(|t| *t > 0.0) {
                if let Ok(r2) = sys.residual_norm(&n2, &t2) {
                    if r2 < r {
                        (nodes, times) = (n2, t2);
                        accepted = true;
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::ShadowDiverged { joint: lin.worst_joint.0, residual: r });
        }
    };

    // dense trajectory, piece by piece
    let mut tr_times = vec![0.0];
    let mut tr_states = vec![nodes[0]];
    let mut node_sample = vec![0];
    let mut t0 = 0.0;
    for (j, &dt) in times.iter().enumerate() {
        let seg = integrate::integrate(model, nodes[j], (0.0, dt), &cfg)?;
        tr_times.extend(seg.times.iter().skip(1).map(|t| t0 + t));
        tr_states.extend(seg.states.iter().skip(1).copied());
        t0 += dt;
        node_sample.push(tr_states.len() - 1);
    }
    let h0 = model.energy(&nodes[0].to_array());
    let trajectory = Trajectory {
        model: model.kind(),
        energy_at_end: model.energy(&tr_states.last().unwrap().to_array()),
        times: tr_times,
        states: tr_states,
        energy_at_start: h0,
    };

    let mut dwell_counts = Vec::new();
    let mut transfer_deviation = Vec::new();
    for span in &chain.spans {
        let states = &trajectory.states[node_sample[span.first]..=node_sample[span.last]];
        match span.piece {
            Piece::Dwell { vertex } => {
                let frame = &frames[vertex];
                let reach = frame_reach(model, frame, &cfg)?;
                dwell_counts.push(count_turns(model, frame, states, opts.dwell_radius, reach));
            }
            Piece::Transfer { edge } => {
                let conn = &graph.edges[edge].connection.trajectory;
                let base = densify(model, &conn.times, &conn.states, span.offset);
                transfer_deviation.push(states.iter().map(|s| polyline_distance(s, &base)).fold(0.0, f64::max));
            }
        }
    }

    let last = *trajectory.states.last().unwrap();
    let closure = match spec.kind {
        ShadowKind::Periodic => Some(last.distance(&shifted(&nodes[0], chain.shift))),
        ShadowKind::Connecting => None,
    };
    let rotation = if model.kind().is_pendulum() {
        let (c0, c1) = (&frames[walk.vertices[0]].center, &frames[*walk.vertices.last().unwrap()].center);
        let turns = |d: f64| (d / (2.0 * std::f64::consts::PI)).round() as i32;
        [turns(last.q1 - nodes[0].q1 - (c1.q1 - c0.q1)), turns(last.q2 - nodes[0].q2 - (c1.q2 - c0.q2))]
    } else {
        [0, 0]
    };

    Ok(ShadowOrbit {
        spec: spec.clone(),
        closure,
        rotation,
        energy: graph.energy,
        total_time: t0,
        nodes,
        segment_times: times,
        trajectory,
        dwell_counts,
        transfer_deviation,
        residual,
        iterations,
        shift: chain.shift,
    })
}

/// Half the largest distance from the anchor to the rest of the orbit:
/// crossings farther out are on the far side of the loop.
fn frame_reach(model: &SystemModel, frame: &OrbitFrame, cfg: &IntegratorConfig) -> Result<f64> {
    let tr = frame.orbit.sample(model, 200, cfg)?;
    Ok(0.5 * tr.states.iter().map(|s| s.distance(&frame.orbit.anchor)).fold(0.0, f64::max))
}
