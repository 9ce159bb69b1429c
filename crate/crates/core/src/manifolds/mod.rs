//! Stable and unstable tubes of periodic orbits and their section cuts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{State, SystemModel};
use crate::error::{Error, Result};
use crate::integrate::{self, IntegratorConfig, EVENT_TOL};
use crate::linalg::{mat_vec, norm4};
use crate::section::SectionSpec;
use crate::upo::PeriodicOrbit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    /// Direction of time in which this branch leaves the orbit.
    pub fn time_sign(self) -> f64 {
        match self {
            Stability::Stable => -1.0,
            Stability::Unstable => 1.0,
        }
    }
}

/// Side of the orbit the displacement points to, relative to the oriented
/// eigendirection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    pub fn value(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            BranchSign::Plus => BranchSign::Minus,
            BranchSign::Minus => BranchSign::Plus,
        }
    }
}

pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubeBranch {
    pub orbit: PeriodicOrbit,
    pub stability: Stability,
    pub sign: BranchSign,
    pub eps: f64,
    pub seeds: Vec<State>,
    /// Orbit phase (time from the anchor, in `[0, T)`) of each seed.
    pub phases: Vec<f64>,
    /// Orbit point each seed was displaced from.
    pub base_points: Vec<State>,
}

/// Seeds on the linearised tube: `n_seeds` orbit points at equal time
/// fractions, each displaced by `eps` along the transported eigendirection.
pub fn seed_tube(
    model: &SystemModel,
    orbit: &PeriodicOrbit,
    stability: Stability,
    sign: BranchSign,
    eps: f64,
    n_seeds: usize,
    cfg: &IntegratorConfig,
) -> Result<TubeBranch> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::InvalidConfig(format!("tube displacement {eps} outside [1e-8, 1e-4]")));
    }
    if n_seeds < 3 {
        return Err(Error::InvalidConfig("a tube needs at least 3 seeds".into()));
    }
    if !(orbit.lambda_u.abs() > 1.0) {
        return Err(Error::NonHyperbolic(format!("λ_u = {}", orbit.lambda_u)));
    }
    let period = orbit.period;
    let dt = period / n_seeds as f64;
    // Transport each direction in the time direction that expands it, so
    // round-off in the other component decays.
    let (dir, samples, phases): (_, Vec<_>, Vec<f64>) = match stability {
        Stability::Unstable => {
            let times: Vec<f64> = (0..n_seeds).map(|k| k as f64 * dt).collect();
            (orbit.unstable_dir, integrate::sample_variational(model, orbit.anchor, &times, cfg)?, times)
        }
        Stability::Stable => {
            let times: Vec<f64> = (0..n_seeds).map(|k| -(k as f64) * dt).collect();
            let s = integrate::sample_variational(model, orbit.anchor, &times, cfg)?;
            let phases = times.iter().map(|t| if *t == 0.0 { 0.0 } else { period + t }).collect();
            (orbit.stable_dir, s, phases)
        }
    };
    let mut rows: Vec<(f64, State, State)> = samples
        .into_iter()
        .zip(phases)
        .map(|((x, m), phase)| {
            let v = mat_vec(&m, &dir);
            let n = norm4(&v);
            let x_arr = x.to_array();
            let mut seed = [0.0; 4];
            for i in 0..4 {
                seed[i] = x_arr[i] + sign.value() * eps * v[i] / n;
            }
            (phase, State::from_array(seed), x)
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TubeBranch {
        orbit: orbit.clone(),
        stability,
        sign,
        eps,
        phases: rows.iter().map(|r| r.0).collect(),
        seeds: rows.iter().map(|r| r.1).collect(),
        base_points: rows.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionCut {
    pub section: SectionSpec,
    pub stability: Stability,
    pub energy: f64,
    /// In-section coordinates, angular ones wrapped to (−π, π].
    pub coords: Vec<[f64; 2]>,
    pub full_states: Vec<State>,
    /// Signed flight times from seed to section.
    pub flight_times: Vec<f64>,
    /// Seed phase and index of each cut point; cut points are ordered by phase.
    pub phases: Vec<f64>,
    pub seed_index: Vec<usize>,
    pub closed: bool,
    pub incomplete_count: usize,
    /// Number of seeds the cut was computed from.
    pub n_seeds: usize,
}

impl SectionCut {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Whether consecutive cut points `i` and `i + 1` (cyclically) came from
    /// adjacent seeds, i.e. no seed between them timed out.
    pub fn segment_is_genuine(&self, i: usize) -> bool {
        let j = (i + 1) % self.len();
        let (a, b) = (self.seed_index[i], self.seed_index[j]);
        (a + 1) % self.n_seeds == b
    }

    /// CSV with one row per cut point.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "seed,phase,s1,s2,q1,q2,v1,v2,flight_time")?;
        for i in 0..self.len() {
            let s = self.full_states[i];
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.seed_index[i],
                self.phases[i],
                self.coords[i][0],
                self.coords[i][1],
                s.q1,
                s.q2,
                s.v1,
                s.v2,
                self.flight_times[i]
            )?;
        }
        Ok(())
    }
}

fn is_timeout(e: &Error) -> bool {
    matches!(e, Error::NoEventWithinMaxTime { .. } | Error::MaxStepsExceeded(_))
}

/// Flow every seed of `branch` to its first admissible crossing of
/// `section` — unstable branches forward, stable branches backward.
pub fn globalize_tube(model: &SystemModel, branch: &TubeBranch, section: &SectionSpec, cfg: &IntegratorConfig) -> Result<SectionCut> {
    section.validate()?;
    let sign = branch.stability.time_sign();
    let results: Vec<Result<Option<integrate::CrossingEvent>>> = branch
        .seeds
        .par_iter()
        .map(|seed| match integrate::next_crossing(model, *seed, section, sign, cfg, 0) {
            Ok(ev) => Ok(Some(ev)),
            Err(e) if is_timeout(&e) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut cut = SectionCut {
        section: *section,
        stability: branch.stability,
        energy: branch.orbit.energy,
        coords: Vec::new(),
        full_states: Vec::new(),
        flight_times: Vec::new(),
        phases: Vec::new(),
        seed_index: Vec::new(),
        closed: false,
        incomplete_count: 0,
        n_seeds: branch.seeds.len(),
    };
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Some(ev) => {
                cut.coords.push(section.wrapped_plane_coords(&ev.state.to_array()));
                cut.full_states.push(ev.state);
                cut.flight_times.push(ev.time);
                cut.phases.push(branch.phases[i]);
                cut.seed_index.push(i);
            }
            None => cut.incomplete_count += 1,
        }
    }
    if cut.is_empty() {
        return Err(Error::AllSeedsIncomplete);
    }
    cut.closed = cut.incomplete_count == 0 && closes(&cut.coords);
    Ok(cut)
}

fn closes(coords: &[[f64; 2]]) -> bool {
    if coords.len() < 3 {
        return false;
    }
    let d = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let longest = coords.windows(2).map(|w| d(&w[0], &w[1])).fold(0.0, f64::max);
    d(&coords[coords.len() - 1], &coords[0]) <= longest.max(1e-12)
}

/// Successive returns of `points` to the section family of `section`; the
/// r-th return lands on the section lifted by `r` turns in the direction of
/// travel (`lift_step = ±1` lifts per return, 0 for non-angular sections).
/// Returns `images[r][i]`, `None` once point `i` has timed out.
pub fn interior_iterate(
    model: &SystemModel,
    points: &[State],
    section: &SectionSpec,
    n_returns: usize,
    time_sign: f64,
    lift_step: i32,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<Option<State>>>> {
    section.validate()?;
    let per_point: Vec<Result<Vec<Option<State>>>> = points
        .par_iter()
        .map(|p| {
            if section.value(&p.to_array()).abs() > 1e3 * EVENT_TOL {
                return Err(Error::InvalidConfig("interior point does not lie on the section".into()));
            }
            let mut out = Vec::with_capacity(n_returns);
            let mut cur = *p;
            let mut alive = true;
            for r in 1..=n_returns {
                if !alive {
                    out.push(None);
                    continue;
                }
                let target = section.lifted(lift_step * r as i32);
                match integrate::next_crossing(model, cur, &target, time_sign, cfg, 0) {
                    Ok(ev) => {
                        cur = ev.state;
                        out.push(Some(ev.state));
                    }
                    Err(e) if is_timeout(&e) => {
                        alive = false;
                        out.push(None);
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect();
    let per_point = per_point.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..n_returns).map(|r| per_point.iter().map(|v| v[r]).collect()).collect())
}

/// Winding-number point-in-polygon test; the polygon is closed implicitly.
pub fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    winding_number(poly, p) != 0
}

pub fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

#[cfg(test)]
mod tests;
