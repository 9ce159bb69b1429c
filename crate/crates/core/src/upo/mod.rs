//! Symmetric unstable periodic orbits around index-1 saddles.
//!
//! An orbit is found by shooting from the symmetry set Fix(R) for half a
//! period and asking to land on Fix(R) again; reversibility then closes it.

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelKind, State, SystemModel};
use crate::equilibria::{orient, Classification, Equilibrium, EquilibriumLabel};
use crate::error::{Error, Result};
use crate::integrate::{self, IntegratorConfig, Trajectory};
use crate::linalg::null_vector;

pub const NEWTON_TOL: f64 = 1e-11;
pub const NEWTON_MAX_ITER: usize = 25;
/// Smallest energy step the continuation may take before giving up.
pub const MIN_ENERGY_STEP: f64 = 1e-5;
/// Largest energy step the continuation takes.
pub const MAX_ENERGY_STEP: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub model: ModelKind,
    pub saddle: EquilibriumLabel,
    /// Point of the orbit on Fix(R).
    pub anchor: State,
    pub period: f64,
    pub energy: f64,
    /// Sorted as `{λ_u, 1, 1, λ_s}`.
    pub multipliers: [Complex64; 4],
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// Unit monodromy eigenvectors at the anchor.
    pub unstable_dir: [f64; 4],
    pub stable_dir: [f64; 4],
    pub monodromy: Matrix4<f64>,
    /// `‖φ_T(anchor) − anchor‖`.
    pub closure: f64,
}

impl PeriodicOrbit {
    /// Dense samples of one period, `n + 1` points including both ends.
    pub fn sample(&self, model: &SystemModel, n: usize, cfg: &IntegratorConfig) -> Result<Trajectory> {
        integrate::integrate_sampled(model, self.anchor, self.period, self.period / n.max(1) as f64, cfg)
    }

    /// Largest excursion of each position coordinate from `center`.
    pub fn amplitude(&self, model: &SystemModel, center: &State, cfg: &IntegratorConfig) -> Result<[f64; 2]> {
        let tr = self.sample(model, 400, cfg)?;
        let mut amp = [0.0f64; 2];
        for s in &tr.states {
            amp[0] = amp[0].max((s.q1 - center.q1).abs());
            amp[1] = amp[1].max((s.q2 - center.q2).abs());
        }
        Ok(amp)
    }

    /// `max_k ‖R x(−t_k) − x(t_k)‖` over `n` times spread across half a
    /// period, with `x(−t)` read off the forward flow as `x(T − t)`. Each
    /// state is integrated separately: the dense interpolant is not
    /// accurate enough for this.
    pub fn symmetry_residual(&self, model: &SystemModel, n: usize, cfg: &IntegratorConfig) -> Result<f64> {
        let half = 0.5 * self.period;
        let mut worst = 0.0f64;
        for k in 1..=n {
            let t = half * k as f64 / (n + 1) as f64;
            let a = integrate::flow(model, self.anchor, t, cfg)?;
            let b = integrate::flow(model, self.anchor, self.period - t, cfg)?;
            worst = worst.max(model.reverser(&b).distance(&a));
        }
        Ok(worst)
    }
}

struct Shooting<'a> {
    model: &'a SystemModel,
    free: [usize; 2],
    pinned: [usize; 2],
    energy: f64,
    cfg: &'a IntegratorConfig,
}

struct Eval {
    r: [f64; 3],
    jac: Matrix3<f64>,
}

impl Shooting<'_> {
    fn anchor(&self, z: &[f64; 3]) -> State {
        let mut a = [0.0; 4];
        a[self.free[0]] = z[0];
        a[self.free[1]] = z[1];
        State::from_array(a)
    }

    fn eval(&self, z: &[f64; 3]) -> Result<Eval> {
        if !(z[2] > 0.0) {
            return Err(Error::NewtonDiverged(format!("half-period became {}", z[2])));
        }
        let a = self.anchor(z);
        let (end, m) = integrate::integrate_variational(self.model, a, z[2], self.cfg)?;
        let e = end.to_array();
        let f_end = self.model.field(&e);
        let r = [self.model.energy(&a.to_array()) - self.energy, e[self.pinned[0]], e[self.pinned[1]]];
        let mut jac = Matrix3::zeros();
        for (c, &k) in self.free.iter().enumerate() {
            let h = 1e-6;
            let mut p = a.to_array();
            let mut q = a.to_array();
            p[k] += h;
            q[k] -= h;
            jac[(0, c)] = (self.model.energy(&p) - self.model.energy(&q)) / (2.0 * h);
            jac[(1, c)] = m[(self.pinned[0], k)];
            jac[(2, c)] = m[(self.pinned[1], k)];
        }
        jac[(1, 2)] = f_end[self.pinned[0]];
        jac[(2, 2)] = f_end[self.pinned[1]];
        Ok(Eval { r, jac })
    }

    fn solve(&self, mut z: [f64; 3]) -> Result<[f64; 3]> {
        let norm = |r: &[f64; 3]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let newton_step = |ev: &Eval| {
            ev.jac
                .lu()
                .solve(&Vector3::new(-ev.r[0], -ev.r[1], -ev.r[2]))
                .ok_or_else(|| Error::NewtonDiverged("singular shooting Jacobian".into()))
        };
        let mut ev = self.eval(&z)?;
        let mut iter = 0;
        while norm(&ev.r) >= NEWTON_TOL {
            if iter == NEWTON_MAX_ITER {
                return Err(Error::NewtonDiverged(format!("residual {:.3e} after {NEWTON_MAX_ITER} iterations", norm(&ev.r))));
            }
            iter += 1;
            let rn = norm(&ev.r);
            if iter > 10 && rn > 1e-6 {
                return Err(Error::NewtonDiverged(format!("no quadratic convergence, residual {rn:.3e}")));
            }
            let dz = newton_step(&ev)?;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..10 {
                let trial = [z[0] + scale * dz[0], z[1] + scale * dz[1], z[2] + scale * dz[2]];
                if let Ok(tev) = self.eval(&trial) {
                    if norm(&tev.r) < rn {
                        accepted = Some((trial, tev));
                        break;
                    }
                }
                scale *= 0.5;
            }
            let Some((trial, tev)) = accepted else {
                return Err(Error::NewtonDiverged(format!("residual stuck at {rn:.3e}")));
            };
            z = trial;
            ev = tev;
        }
        // polish below the tolerance while full steps keep paying off
        for _ in 0..3 {
            let rn = norm(&ev.r);
            let Ok(dz) = newton_step(&ev) else { break };
            let trial = [z[0] + dz[0], z[1] + dz[1], z[2] + dz[2]];
            match self.eval(&trial) {
                Ok(tev) if norm(&tev.r) < 0.5 * rn => {
                    z = trial;
                    ev = tev;
                }
                _ => break,
            }
        }
        Ok(z)
    }
}

fn check_saddle(saddle: &Equilibrium, target_energy: f64) -> Result<()> {
    if saddle.classification != Classification::Index1Saddle || saddle.saddle_frame.is_none() {
        return Err(Error::NotIndex1);
    }
    if !(target_energy > saddle.energy) {
        return Err(Error::EnergyBelowSaddle { target: target_energy, saddle: saddle.energy });
    }
    Ok(())
}

/// Point on the line `saddle + s·center_fix` (s > 0) with energy `h`.
fn linear_guess(model: &SystemModel, saddle: &Equilibrium, h: f64, amplitude_guess: f64) -> Result<State> {
    let frame = saddle.saddle_frame.as_ref().ok_or(Error::NotIndex1)?;
    let base = saddle.state.to_array();
    let at = |s: f64| {
        let mut y = base;
        for i in 0..4 {
            y[i] += s * frame.center_fix[i];
        }
        y
    };
    let g = |s: f64| model.energy(&at(s)) - h;
    let mut hi = if amplitude_guess > 0.0 { amplitude_guess } else { (2.0 * (h - saddle.energy) / frame.omega).sqrt() };
    let mut grown = 0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 60 {
            return Err(Error::NewtonDiverged("energy level not reached along the centre direction".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(State::from_array(at(0.5 * (lo + hi))))
}

fn assemble(model: &SystemModel, saddle: EquilibriumLabel, energy: f64, anchor: State, half: f64, cfg: &IntegratorConfig) -> Result<PeriodicOrbit> {
    let mut orbit = PeriodicOrbit {
        model: model.kind(),
        saddle,
        anchor,
        period: 2.0 * half,
        energy,
        multipliers: [Complex64::new(0.0, 0.0); 4],
        lambda_u: 0.0,
        lambda_s: 0.0,
        unstable_dir: [0.0; 4],
        stable_dir: [0.0; 4],
        monodromy: Matrix4::identity(),
        closure: 0.0,
    };
    compute_floquet(model, &mut orbit, cfg)?;
    Ok(orbit)
}

fn shooting<'a>(model: &'a SystemModel, energy: f64, cfg: &'a IntegratorConfig) -> Shooting<'a> {
    let (free, pinned) = model.reverser_fixed_coords();
    Shooting { model, free, pinned, energy, cfg }
}

fn unknowns(sh: &Shooting<'_>, anchor: &State, half: f64) -> [f64; 3] {
    let a = anchor.to_array();
    [a[sh.free[0]], a[sh.free[1]], half]
}

/// Newton solve from the linear centre-direction guess only; no continuation.
fn direct(model: &SystemModel, saddle: &Equilibrium, h: f64, amplitude_guess: f64, cfg: &IntegratorConfig) -> Result<PeriodicOrbit> {
    let frame = saddle.saddle_frame.as_ref().ok_or(Error::NotIndex1)?;
    let guess = linear_guess(model, saddle, h, amplitude_guess)?;
    let sh = shooting(model, h, cfg);
    let z = sh.solve(unknowns(&sh, &guess, std::f64::consts::PI / frame.omega))?;
    let anchor = model.wrap_near(&sh.anchor(&z), &saddle.state);
    assemble(model, saddle.label, h, anchor, z[2], cfg)
}

/// Energy offset above the saddle at which the linear guess is trusted.
const NEAR_SADDLE: f64 = 1e-3;

/// Symmetric UPO at `target_energy` around `saddle`. Energies far above the
/// saddle are reached by continuation from near it.
pub fn find_symmetric_upo(
    model: &SystemModel,
    saddle: &Equilibrium,
    target_energy: f64,
    amplitude_guess: f64,
    cfg: &IntegratorConfig,
) -> Result<PeriodicOrbit> {
    check_saddle(saddle, target_energy)?;
    if target_energy - saddle.energy <= NEAR_SADDLE {
        return direct(model, saddle, target_energy, amplitude_guess, cfg);
    }
    let start = saddle.energy + NEAR_SADDLE;
    let fam = continue_family(model, saddle, &[start, target_energy], cfg)?;
    Ok(fam.into_iter().last().expect("two members"))
}

/// Re-solve `orbit` at a nearby energy, using it as the initial guess.
pub fn correct_at_energy(model: &SystemModel, orbit: &PeriodicOrbit, energy: f64, cfg: &IntegratorConfig) -> Result<PeriodicOrbit> {
    correct_from(model, orbit, None, energy, cfg)
}

/// Newton solve at `energy` seeded by a secant extrapolation through
/// `previous` and `orbit` when available.
fn correct_from(
    model: &SystemModel,
    orbit: &PeriodicOrbit,
    previous: Option<&PeriodicOrbit>,
    energy: f64,
    cfg: &IntegratorConfig,
) -> Result<PeriodicOrbit> {
    let sh = shooting(model, energy, cfg);
    let mut z = unknowns(&sh, &orbit.anchor, 0.5 * orbit.period);
    if let Some(prev) = previous {
        let zp = unknowns(&sh, &model.wrap_near(&prev.anchor, &orbit.anchor), 0.5 * prev.period);
        let s = (energy - orbit.energy) / (orbit.energy - prev.energy);
        for i in 0..3 {
            z[i] += s * (z[i] - zp[i]);
        }
    }
    let z = sh.solve(z)?;
    let anchor = model.wrap_near(&sh.anchor(&z), &orbit.anchor);
    assemble(model, orbit.saddle, energy, anchor, z[2], cfg)
}

/// Natural-parameter continuation through increasing energies, with
/// step halving between requested members when Newton fails.
pub fn continue_family(model: &SystemModel, saddle: &Equilibrium, energies: &[f64], cfg: &IntegratorConfig) -> Result<Vec<PeriodicOrbit>> {
    if energies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("continuation energies must increase".into()));
    }
    let Some(&first) = energies.first() else { return Ok(Vec::new()) };
    check_saddle(saddle, first)?;
    let wrap = |index: usize, e: Error| Error::ContinuationFailed { index, source: Box::new(e) };
    let mut current = direct(model, saddle, first, 0.0, cfg).map_err(|e| wrap(0, e))?;
    let mut previous: Option<PeriodicOrbit> = None;
    let mut out = vec![current.clone()];
    let mut step = MAX_ENERGY_STEP;
    for (index, &target) in energies.iter().enumerate().skip(1) {
        while current.energy < target {
            let h = (current.energy + step).min(target);
            // a jump in anchor or period means Newton hopped to another orbit
            let attempt = correct_from(model, &current, previous.as_ref(), h, cfg).and_then(|next| {
                let jump = next.anchor.distance(&current.anchor);
                if jump > 0.5 || (next.period - current.period).abs() > 0.25 * current.period {
                    Err(Error::NewtonDiverged(format!("continuation jumped by {jump:.3e} at H = {h}")))
                } else {
                    Ok(next)
                }
            });
            match attempt {
                Ok(next) => {
                    previous = Some(std::mem::replace(&mut current, next));
                    step = (step * 1.5).min(MAX_ENERGY_STEP);
                }
                Err(e) => {
                    step *= 0.5;
                    if step < MIN_ENERGY_STEP {
                        return Err(wrap(index, e));
                    }
                }
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Monodromy, multipliers and eigendirections; fills the Floquet fields of
/// `orbit` and returns the sorted multipliers.
pub fn compute_floquet(model: &SystemModel, orbit: &mut PeriodicOrbit, cfg: &IntegratorConfig) -> Result<[Complex64; 4]> {
    let (end, m) = integrate::integrate_variational(model, orbit.anchor, orbit.period, cfg)?;
    let eig = m.complex_eigenvalues();
    let mut eigs = [eig[0], eig[1], eig[2], eig[3]];
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let u = eigs[0];
    if u.im.abs() > 1e-8 * u.norm() || !(u.norm() > 1.0 + 1e-6) {
        return Err(Error::NonHyperbolic(format!("leading multiplier {u}")));
    }
    // The contracting multiplier is resolved only to ~ε·λ_u by the forward
    // monodromy; take it as the dominant multiplier of the inverse-time one.
    let (_, m_back) = integrate::integrate_variational(model, orbit.anchor, -orbit.period, cfg)?;
    let back = m_back.complex_eigenvalues();
    let b = back.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).expect("four eigenvalues");
    if b.im.abs() > 1e-8 * b.norm() || !(b.norm() > 1.0 + 1e-6) {
        return Err(Error::NonHyperbolic(format!("leading inverse multiplier {b}")));
    }
    let lambda_u = u.re;
    let lambda_s = 1.0 / b.re;
    let unstable = orient(unit(null_vector(&(m - Matrix4::identity() * lambda_u))));
    let stable = orient(unit(null_vector(&(m_back - Matrix4::identity() * b.re))));
    orbit.multipliers = [u, eigs[1], eigs[2], Complex64::new(lambda_s, 0.0)];
    orbit.lambda_u = lambda_u;
    orbit.lambda_s = lambda_s;
    orbit.unstable_dir = unstable;
    orbit.stable_dir = stable;
    orbit.monodromy = m;
    orbit.closure = end.distance(&orbit.anchor);
    Ok(orbit.multipliers)
}

fn unit(v: [f64; 4]) -> [f64; 4] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

#[cfg(test)]
mod tests;
