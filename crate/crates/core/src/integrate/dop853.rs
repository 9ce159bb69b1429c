//! Adaptive Dormand–Prince 8(5,3) stepper with 7th-order dense output.
//!
//! The stepper always advances its own clock `tau` forwards; callers wanting
//! backward time hand it the negated field.

use super::tableau::{A, B, D, E3, E5, STAGES, STAGES_EXT};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

pub(crate) struct Stepper<const N: usize, F: Fn(&[f64; N]) -> [f64; N]> {
    f: F,
    rtol: f64,
    atol: f64,
    max_step: f64,
    pub tau: f64,
    pub y: [f64; N],
    fy: [f64; N],
    h_abs: f64,
    // state of the last accepted step
    pub tau_old: f64,
    pub y_old: [f64; N],
    h_prev: f64,
    // running compensation for the rounding of `y + increment`
    comp: [f64; N],
    k: [[f64; N]; STAGES_EXT],
    pub steps: usize,
}

fn rms_norm<const N: usize>(v: &[f64; N]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / N as f64).sqrt()
}

impl<const N: usize, F: Fn(&[f64; N]) -> [f64; N]> Stepper<N, F> {
    pub fn new(f: F, y0: [f64; N], rtol: f64, atol: f64, max_step: f64, horizon: f64) -> Self {
        let fy = f(&y0);
        let mut s = Self {
            f,
            rtol,
            atol,
            max_step,
            tau: 0.0,
            y: y0,
            fy,
            h_abs: 0.0,
            tau_old: 0.0,
            y_old: y0,
            h_prev: 0.0,
            comp: [0.0; N],
            k: [[0.0; N]; STAGES_EXT],
            steps: 0,
        };
        s.h_abs = s.initial_step(horizon);
        s
    }

    fn initial_step(&self, horizon: f64) -> f64 {
        let mut scaled0 = [0.0; N];
        let mut scaled1 = [0.0; N];
        for i in 0..N {
            let sc = self.atol + self.y[i].abs() * self.rtol;
            scaled0[i] = self.y[i] / sc;
            scaled1[i] = self.fy[i] / sc;
        }
        let (d0, d1) = (rms_norm(&scaled0), rms_norm(&scaled1));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(horizon);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + h0 * self.fy[i];
        }
        let f1 = (self.f)(&y1);
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = (f1[i] - self.fy[i]) / (self.atol + self.y[i].abs() * self.rtol);
        }
        let d2 = rms_norm(&diff) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1).min(horizon).min(self.max_step)
    }

    /// One RK step of size `h` from the current state. Fills stages 0..=12
    /// and returns the new state with its updated compensation term.
    fn rk_step(&mut self, h: f64) -> ([f64; N], [f64; N]) {
        self.k[0] = self.fy;
        for s in 1..STAGES {
            let mut ys = self.y;
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * self.k[j][i];
                    }
                }
            }
            self.k[s] = (self.f)(&ys);
        }
        let mut incr = [0.0; N];
        for j in 0..STAGES {
            let b = B[j];
            if b != 0.0 {
                for i in 0..N {
                    incr[i] += b * self.k[j][i];
                }
            }
        }
        let mut y_new = self.y;
        let mut comp = self.comp;
        for i in 0..N {
            let d = h * incr[i] - comp[i];
            let t = self.y[i] + d;
            comp[i] = (t - self.y[i]) - d;
            y_new[i] = t;
        }
        self.k[STAGES] = (self.f)(&y_new);
        (y_new, comp)
    }

    fn error_norm(&self, h: f64, y_new: &[f64; N]) -> f64 {
        let (mut e5, mut e3) = (0.0, 0.0);
        for i in 0..N {
            let scale = self.atol + self.y[i].abs().max(y_new[i].abs()) * self.rtol;
            let (mut s5, mut s3) = (0.0, 0.0);
            for j in 0..=STAGES {
                s5 += self.k[j][i] * E5[j];
                s3 += self.k[j][i] * E3[j];
            }
            e5 += (s5 / scale).powi(2);
            e3 += (s3 / scale).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
    }

    /// Advance by one accepted step, never past `tau_bound`.
    pub fn step(&mut self, tau_bound: f64) -> Result<()> {
        let min_step = 10.0 * (self.tau.next_up() - self.tau);
        let mut h_abs = self.h_abs.min(self.max_step).max(min_step);
        let mut rejected = false;
        loop {
            if h_abs < min_step {
                return Err(Error::StepSizeUnderflow(self.tau));
            }
            let mut tau_new = self.tau + h_abs;
            if tau_new > tau_bound {
                tau_new = tau_bound;
            }
            let h = tau_new - self.tau;
            h_abs = h.abs();
            let (y_new, comp) = self.rk_step(h);
            let err = self.error_norm(h, &y_new);
            if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
                h_abs *= MIN_FACTOR;
                rejected = true;
                continue;
            }
            if err < 1.0 {
                let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h_abs * factor;
                self.h_prev = h;
                self.tau_old = self.tau;
                self.y_old = self.y;
                self.tau = tau_new;
                self.y = y_new;
                self.comp = comp;
                self.fy = self.k[STAGES];
                self.steps += 1;
                return Ok(());
            }
            h_abs *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            rejected = true;
        }
    }

    /// Interpolant over the last accepted step. Costs three field evaluations.
    pub fn dense(&mut self) -> Dense<N> {
        let h = self.h_prev;
        for s in (STAGES + 1)..STAGES_EXT {
            let mut ys = self.y_old;
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * self.k[j][i];
                    }
                }
            }
            self.k[s] = (self.f)(&ys);
        }
        let f_old = self.k[0];
        let mut coef = [[0.0; N]; 7];
        for i in 0..N {
            let dy = self.y[i] - self.y_old[i];
            coef[0][i] = dy;
            coef[1][i] = h * f_old[i] - dy;
            coef[2][i] = 2.0 * dy - h * (self.fy[i] + f_old[i]);
        }
        for (r, drow) in D.iter().enumerate() {
            for i in 0..N {
                let mut acc = 0.0;
                for j in 0..STAGES_EXT {
                    acc += drow[j] * self.k[j][i];
                }
                coef[3 + r][i] = h * acc;
            }
        }
        Dense { tau_old: self.tau_old, h, y_old: self.y_old, coef }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense<const N: usize> {
    pub tau_old: f64,
    pub h: f64,
    y_old: [f64; N],
    coef: [[f64; N]; 7],
}

impl<const N: usize> Dense<N> {
    pub fn eval(&self, tau: f64) -> [f64; N] {
        let x = if self.h == 0.0 { 0.0 } else { (tau - self.tau_old) / self.h };
        let mut y = [0.0; N];
        for (n, row) in self.coef.iter().rev().enumerate() {
            for i in 0..N {
                y[i] += row[i];
                y[i] *= if n % 2 == 0 { x } else { 1.0 - x };
            }
        }
        for i in 0..N {
            y[i] += self.y_old[i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::super::tableau::{A, B, C};
    use super::*;

    #[test]
    fn tableau_is_consistent() {
        for (s, row) in A.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - C[s]).abs() < 1e-12, "row {s}: {sum} vs {}", C[s]);
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_decay_and_dense_output() {
        let mut st = Stepper::new(|y: &[f64; 1]| [-y[0]], [1.0], 1e-12, 1e-12, 1.0, 5.0);
        while st.tau < 5.0 {
            st.step(5.0).unwrap();
            let d = st.dense();
            let mid = 0.5 * (st.tau_old + st.tau);
            assert!((d.eval(mid)[0] - (-mid).exp()).abs() < 1e-11);
            assert!((d.eval(st.tau)[0] - st.y[0]).abs() < 1e-14);
            assert!((d.eval(st.tau_old)[0] - st.y_old[0]).abs() < 1e-14);
        }
        assert!((st.y[0] - (-5.0f64).exp()).abs() < 1e-11);
    }
}
