//! Adaptive integration, section-crossing events and variational flows.

mod dop853;
mod tableau;

use std::io::Write;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelKind, State, SystemModel};
use crate::error::{Error, Result};
use crate::section::SectionSpec;
use dop853::{Dense, Stepper};

/// Crossings closer than this to the start time are ignored.
pub const START_EXCLUSION: f64 = 1e-9;
/// Residual bound on the section function at a refined crossing.
pub const EVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Time budget for event searches.
    pub max_time: f64,
    /// Allowed |H(t) − H(0)|.
    pub drift_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-12, max_step: 0.25, max_time: 50.0, drift_tol: 1e-8, max_steps: 10_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.rel_tol, self.abs_tol, self.max_step, self.max_time, self.drift_tol]
            .iter()
            .all(|v| *v > 0.0 && !v.is_nan())
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("integrator settings must be positive: {self:?}")))
        }
    }

    pub fn with_max_time(mut self, t: f64) -> Self {
        self.max_time = t;
        self
    }
}

/// A sampled solution. `times` run forwards or backwards monotonically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: ModelKind,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energy_at_start: f64,
    pub energy_at_end: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// CSV with header `t,q1,q2,v1,v2,H`.
    pub fn write_csv<W: Write>(&self, model: &SystemModel, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,q1,q2,v1,v2,H")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", t, s.q1, s.q2, s.v1, s.v2, model.energy(&s.to_array()))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, model: &SystemModel, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        self.write_csv(model, std::io::BufWriter::new(f))
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

/// A refined section crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub state: State,
    pub time: f64,
    /// Sign of the section function's derivative along forward time.
    pub direction: i8,
}

fn time_sign(t: f64) -> f64 {
    if t < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn stepper(
    model: SystemModel,
    y0: [f64; 4],
    sign: f64,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Stepper<4, impl Fn(&[f64; 4]) -> [f64; 4]> {
    let f = move |y: &[f64; 4]| {
        let d = model.field(y);
        [sign * d[0], sign * d[1], sign * d[2], sign * d[3]]
    };
    Stepper::new(f, y0, cfg.rel_tol, cfg.abs_tol, cfg.max_step, horizon.max(1e-12))
}

fn variational_stepper(
    model: SystemModel,
    y0: [f64; 20],
    sign: f64,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Stepper<20, impl Fn(&[f64; 20]) -> [f64; 20]> {
    let f = move |y: &[f64; 20]| {
        let u = [y[0], y[1], y[2], y[3]];
        let d = model.field(&u);
        let j = model.jacobian_array(&u);
        let mut out = [0.0; 20];
        for i in 0..4 {
            out[i] = sign * d[i];
        }
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += j[r][k] * y[4 + 4 * k + c];
                }
                out[4 + 4 * r + c] = sign * acc;
            }
        }
        out
    };
    Stepper::new(f, y0, cfg.rel_tol, cfg.abs_tol, cfg.max_step, horizon.max(1e-12))
}

fn check_state(y: &[f64], model: &SystemModel, h0: f64, cfg: &IntegratorConfig, t: f64) -> Result<()> {
    let u = [y[0], y[1], y[2], y[3]];
    if !u.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { component: "state" });
    }
    let drift = (model.energy(&u) - h0).abs();
    if drift > cfg.drift_tol || drift.is_nan() {
        return Err(Error::DriftExceeded { drift, tol: cfg.drift_tol, time: t });
    }
    Ok(())
}

fn initial_energy(model: &SystemModel, s0: &State, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::NonFinite { component: "initial state" });
    }
    model.eval_vector_field(s0)?;
    model.eval_hamiltonian(s0)
}

/// Integrate over `t_span = (t0, t1)`; backward if `t1 < t0`. Every accepted
/// step is recorded.
pub fn integrate(model: &SystemModel, s0: State, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory> {
    let h0 = initial_energy(model, &s0, cfg)?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) || t0 == t1 {
        return Err(Error::InvalidConfig(format!("degenerate time span {t_span:?}")));
    }
    let sign = time_sign(t1 - t0);
    let span = (t1 - t0).abs();
    let mut st = stepper(*model, s0.to_array(), sign, cfg, span);
    let mut times = vec![t0];
    let mut states = vec![s0];
    while st.tau < span {
        if st.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(st.steps));
        }
        st.step(span)?;
        let t = t0 + sign * st.tau;
        check_state(&st.y, model, h0, cfg, t)?;
        times.push(if st.tau >= span { t1 } else { t });
        states.push(State::from_array(st.y));
    }
    let energy_at_end = model.energy(&st.y);
    Ok(Trajectory { model: model.kind(), times, states, energy_at_start: h0, energy_at_end })
}

/// Flow map `φ_t(s0)`; `t` may be negative.
pub fn flow(model: &SystemModel, s0: State, t: f64, cfg: &IntegratorConfig) -> Result<State> {
    let h0 = initial_energy(model, &s0, cfg)?;
    if t == 0.0 {
        return Ok(s0);
    }
    let sign = time_sign(t);
    let span = t.abs();
    let mut st = stepper(*model, s0.to_array(), sign, cfg, span);
    while st.tau < span {
        if st.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(st.steps));
        }
        st.step(span)?;
        check_state(&st.y, model, h0, cfg, sign * st.tau)?;
    }
    Ok(State::from_array(st.y))
}

/// States at the requested times, which must all share one sign and be
/// sorted by increasing magnitude. Uses the dense interpolant.
pub fn sample(model: &SystemModel, s0: State, times: &[f64], cfg: &IntegratorConfig) -> Result<Vec<State>> {
    let h0 = initial_energy(model, &s0, cfg)?;
    let Some(&t_end) = times.last() else { return Ok(Vec::new()) };
    let sign = time_sign(t_end);
    if times.iter().any(|t| time_sign(*t) != sign && *t != 0.0) || times.windows(2).any(|w| w[1].abs() < w[0].abs()) {
        return Err(Error::InvalidConfig("sample times must share a sign and grow in magnitude".into()));
    }
    let span = t_end.abs();
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && times[idx] == 0.0 {
        out.push(s0);
        idx += 1;
    }
    if idx == times.len() {
        return Ok(out);
    }
    let mut st = stepper(*model, s0.to_array(), sign, cfg, span);
    while idx < times.len() {
        if st.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(st.steps));
        }
        st.step(span)?;
        check_state(&st.y, model, h0, cfg, sign * st.tau)?;
        if times[idx].abs() <= st.tau {
            let dense = st.dense();
            while idx < times.len() && times[idx].abs() <= st.tau {
                out.push(State::from_array(dense.eval(times[idx].abs())));
                idx += 1;
            }
        }
    }
    Ok(out)
}

/// Uniformly sampled trajectory with spacing `dt` (plus the end point).
pub fn integrate_sampled(model: &SystemModel, s0: State, t_end: f64, dt: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("sampling interval must be positive".into()));
    }
    let n = (t_end.abs() / dt).ceil() as usize;
    let sign = time_sign(t_end);
    let times: Vec<f64> = (0..=n).map(|i| sign * (i as f64 * dt).min(t_end.abs())).collect();
    let states = sample(model, s0, &times, cfg)?;
    let energy_at_start = model.energy(&s0.to_array());
    let energy_at_end = model.energy(&states.last().unwrap_or(&s0).to_array());
    Ok(Trajectory { model: model.kind(), times, states, energy_at_start, energy_at_end })
}

/// Locate the root of the section function inside the last step.
fn refine_crossing(model: &SystemModel, dense: &Dense<4>, sign: f64, section: &SectionSpec, lo: f64, hi: f64) -> (f64, [f64; 4]) {
    let g = |tau: f64| section.value(&dense.eval(tau));
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * (1.0 + b.abs()) {
            break;
        }
    }
    let bisected = 0.5 * (a + b);
    // Newton polish on the interpolant
    let grad = section.gradient();
    let mut tau = bisected;
    for _ in 0..4 {
        let y = dense.eval(tau);
        let gv = section.value(&y);
        if gv.abs() <= 1e-15 {
            break;
        }
        let f = model.field(&y);
        let dg: f64 = sign * (0..4).map(|i| grad[i] * f[i]).sum::<f64>();
        if dg == 0.0 || !dg.is_finite() {
            break;
        }
        let next = tau - gv / dg;
        if next < lo || next > hi {
            tau = bisected;
            break;
        }
        tau = next;
    }
    let y_newton = dense.eval(tau);
    let y_bis = dense.eval(bisected);
    if section.value(&y_newton).abs() <= section.value(&y_bis).abs() {
        (tau, y_newton)
    } else {
        (bisected, y_bis)
    }
}

struct EventSearch<'a> {
    model: &'a SystemModel,
    section: &'a SectionSpec,
    sign: f64,
    skip_count: usize,
    record: bool,
}

impl EventSearch<'_> {
    fn run(&self, s0: State, cfg: &IntegratorConfig) -> Result<(CrossingEvent, Option<Trajectory>)> {
        let model = self.model;
        let section = self.section;
        section.validate()?;
        let h0 = initial_energy(model, &s0, cfg)?;
        let sign = self.sign;
        let horizon = cfg.max_time;
        let mut st = stepper(*model, s0.to_array(), sign, cfg, horizon);
        let mut times = vec![0.0];
        let mut states = vec![s0];
        let mut seen = 0usize;
        let mut g_old = section.value(&st.y);
        while st.tau < horizon {
            if st.steps >= cfg.max_steps {
                return Err(Error::MaxStepsExceeded(st.steps));
            }
            st.step(horizon)?;
            check_state(&st.y, model, h0, cfg, sign * st.tau)?;
            let g_new = section.value(&st.y);
            let crossed = (g_old * g_new < 0.0) || (g_new == 0.0 && g_old != 0.0);
            if crossed {
                // direction along physical time
                let dir: i8 = if (g_new - g_old) * sign > 0.0 { 1 } else { -1 };
                if section.direction.accepts(dir) {
                    let dense = st.dense();
                    let (tau, y) = refine_crossing(model, &dense, sign, section, st.tau_old, st.tau);
                    if tau > START_EXCLUSION && section.admits(&y) {
                        if seen == self.skip_count {
                            let state = State::from_array(y);
                            let event = CrossingEvent { state, time: sign * tau, direction: dir };
                            let traj = self.record.then(|| {
                                times.push(sign * tau);
                                states.push(state);
                                Trajectory {
                                    model: model.kind(),
                                    times: std::mem::take(&mut times),
                                    states: std::mem::take(&mut states),
                                    energy_at_start: h0,
                                    energy_at_end: model.energy(&y),
                                }
                            });
                            return Ok((event, traj));
                        }
                        seen += 1;
                    }
                }
            }
            g_old = g_new;
            if self.record {
                times.push(sign * st.tau);
                states.push(State::from_array(st.y));
            }
        }
        Err(Error::NoEventWithinMaxTime { max_time: cfg.max_time })
    }
}

/// Forward integration to the `(skip_count + 1)`-th crossing of `section`
/// in the section's crossing direction.
pub fn integrate_to_event(
    model: &SystemModel,
    s0: State,
    section: &SectionSpec,
    cfg: &IntegratorConfig,
    skip_count: usize,
) -> Result<(CrossingEvent, Trajectory)> {
    let (e, t) = EventSearch { model, section, sign: 1.0, skip_count, record: true }.run(s0, cfg)?;
    Ok((e, t.expect("trajectory recorded")))
}

/// Crossing search in either time direction without recording the path.
/// `time_sign < 0` integrates backwards; the crossing direction of the
/// section is still judged along forward time.
pub fn next_crossing(
    model: &SystemModel,
    s0: State,
    section: &SectionSpec,
    time_sign: f64,
    cfg: &IntegratorConfig,
    skip_count: usize,
) -> Result<CrossingEvent> {
    let sign = if time_sign < 0.0 { -1.0 } else { 1.0 };
    Ok(EventSearch { model, section, sign, skip_count, record: false }.run(s0, cfg)?.0)
}

/// Like [`next_crossing`] but also returns the recorded path.
pub fn crossing_with_path(
    model: &SystemModel,
    s0: State,
    section: &SectionSpec,
    time_sign: f64,
    cfg: &IntegratorConfig,
    skip_count: usize,
) -> Result<(CrossingEvent, Trajectory)> {
    let sign = if time_sign < 0.0 { -1.0 } else { 1.0 };
    let (e, t) = EventSearch { model, section, sign, skip_count, record: true }.run(s0, cfg)?;
    Ok((e, t.expect("trajectory recorded")))
}

/// Endpoint `φ_T(s0)` together with its differential `Dφ_T(s0)`.
pub fn integrate_variational(model: &SystemModel, s0: State, t: f64, cfg: &IntegratorConfig) -> Result<(State, Matrix4<f64>)> {
    let h0 = initial_energy(model, &s0, cfg)?;
    if !t.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite integration time {t}")));
    }
    if t == 0.0 {
        return Ok((s0, Matrix4::identity()));
    }
    let mut y0 = [0.0; 20];
    y0[..4].copy_from_slice(&s0.to_array());
    for i in 0..4 {
        y0[4 + 5 * i] = 1.0;
    }
    let sign = time_sign(t);
    let span = t.abs();
    let mut st = variational_stepper(*model, y0, sign, cfg, span);
    while st.tau < span {
        if st.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(st.steps));
        }
        st.step(span)?;
        check_state(&st.y, model, h0, cfg, sign * st.tau)?;
    }
    let y = st.y;
    Ok((State::new(y[0], y[1], y[2], y[3]), Matrix4::from_fn(|r, c| y[4 + 4 * r + c])))
}

/// Variational flow sampled at times sharing one sign and growing in
/// magnitude (so backward sampling is allowed).
pub fn sample_variational(
    model: &SystemModel,
    s0: State,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<(State, Matrix4<f64>)>> {
    let h0 = initial_energy(model, &s0, cfg)?;
    let Some(&t_end) = times.last() else { return Ok(Vec::new()) };
    let sign = time_sign(t_end);
    if times.iter().any(|t| time_sign(*t) != sign && *t != 0.0) || times.windows(2).any(|w| w[1].abs() < w[0].abs()) {
        return Err(Error::InvalidConfig("variational sample times must share a sign and grow in magnitude".into()));
    }
    let mut y0 = [0.0; 20];
    y0[..4].copy_from_slice(&s0.to_array());
    for i in 0..4 {
        y0[4 + 5 * i] = 1.0;
    }
    let unpack = |y: [f64; 20]| (State::new(y[0], y[1], y[2], y[3]), Matrix4::from_fn(|r, c| y[4 + 4 * r + c]));
    let mut out = Vec::with_capacity(times.len());
    let mut idx = 0;
    while idx < times.len() && times[idx] == 0.0 {
        out.push(unpack(y0));
        idx += 1;
    }
    if idx == times.len() {
        return Ok(out);
    }
    let span = t_end.abs();
    let mut st = variational_stepper(*model, y0, sign, cfg, span);
    while idx < times.len() {
        if st.steps >= cfg.max_steps {
            return Err(Error::MaxStepsExceeded(st.steps));
        }
        st.step(span)?;
        check_state(&st.y, model, h0, cfg, sign * st.tau)?;
        if times[idx].abs() <= st.tau {
            let dense = st.dense();
            while idx < times.len() && times[idx].abs() <= st.tau {
                out.push(unpack(dense.eval(times[idx].abs())));
                idx += 1;
            }
        }
    }
    Ok(out)
}
