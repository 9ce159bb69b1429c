//! Physical double pendulum: two rigid arms with distributed mass and inertia.
//!
//! The length of the second arm never enters the dynamics (only its centre of
//! mass offset `a2` does), so it is not a parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Masses (kg), centre-of-mass offsets and first arm length (m), moments of
/// inertia (kg m^2) and gravitational acceleration (m/s^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalParams {
    pub m1: f64,
    pub m2: f64,
    pub a1: f64,
    pub a2: f64,
    pub l1: f64,
    pub j1: f64,
    pub j2: f64,
    pub g: f64,
}

impl Default for PhysicalParams {
    /// Parameters estimated for the laboratory pendulum.
    fn default() -> Self {
        Self {
            m1: 0.0938,
            m2: 0.1376,
            a1: 0.1086,
            a2: 0.1168,
            l1: 0.1727,
            j1: 1.0e-4,
            j2: 1.0e-4,
            g: 9.808,
        }
    }
}

impl PhysicalParams {
    pub(crate) fn validate(&self) -> Result<()> {
        let named = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("l1", self.l1),
            ("j1", self.j1),
            ("j2", self.j2),
            ("g", self.g),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        for i in 0..=720 {
            let delta = -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 360.0;
            let d = self.denominator(delta);
            if !(d > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "mass-matrix determinant {d} not positive at angle difference {delta}"
                )));
            }
        }
        Ok(())
    }

    fn c(&self) -> f64 {
        self.l1 * self.l1 * self.a2 * self.a2 * self.m2 * self.m2
    }

    /// Determinant of the mass matrix as a function of `theta1 - theta2`.
    pub fn denominator(&self, delta: f64) -> f64 {
        let Self { m1, m2, a1, a2, l1, j1, j2, .. } = *self;
        let cd = delta.cos();
        -self.c() * cd * cd
            + self.c()
            + j2 * l1 * l1 * m2
            + m1 * a1 * a1 * a2 * a2 * m2
            + j2 * m1 * a1 * a1
            + j1 * a2 * a2 * m2
            + j1 * j2
    }

    pub fn potential(&self, t1: f64, t2: f64) -> f64 {
        let Self { m1, m2, a1, a2, l1, g, .. } = *self;
        -g * (m1 * a1 * t1.cos() + m2 * (l1 * t1.cos() + a2 * t2.cos()))
    }

    pub fn kinetic(&self, t1: f64, t2: f64, w1: f64, w2: f64) -> f64 {
        let Self { m1, m2, a1, a2, l1, j1, j2, .. } = *self;
        0.5 * (m1 * a1 * a1 * w1 * w1
            + m2 * (l1 * l1 * w1 * w1 + a2 * a2 * w2 * w2 + 2.0 * l1 * a2 * w1 * w2 * (t1 - t2).cos())
            + j1 * w1 * w1
            + j2 * w2 * w2)
    }

    // Numerator coefficients. The angular accelerations are N / (2 D).
    fn coefficients(&self, w1: f64, w2: f64) -> Coefficients {
        let Self { m1, m2, a1, a2, l1, j1, j2, g } = *self;
        Coefficients {
            a10: -l1 * g * a2 * a2 * m2 * m2
                - 2.0 * a1 * g * m1 * a2 * a2 * m2
                - 2.0 * j2 * l1 * g * m2
                - 2.0 * j2 * a1 * g * m1,
            a11: -2.0 * l1 * a2.powi(3) * w2 * w2 * m2 * m2 - 2.0 * j2 * l1 * a2 * w2 * w2 * m2,
            a12: -l1 * a2 * a2 * g * m2 * m2,
            a22: -l1 * l1 * a2 * a2 * w1 * w1 * m2 * m2,
            b01: -a2 * m2 * (g * m2 * l1 * l1 - g * m1 * l1 * a1 + 2.0 * g * m1 * a1 * a1 + 2.0 * j1 * g),
            b11: a2
                * m2
                * (2.0 * m2 * l1.powi(3) * w1 * w1 + 2.0 * m1 * l1 * a1 * a1 * w1 * w1 + 2.0 * j1 * l1 * w1 * w1),
            b21: a2 * m2 * (g * m2 * l1 * l1 + a1 * g * m1 * l1),
            b22: m2 * m2 * l1 * l1 * a2 * a2 * w2 * w2,
        }
    }

    pub fn vector_field(&self, y: &[f64; 4]) -> [f64; 4] {
        let [t1, t2, w1, w2] = *y;
        let k = self.coefficients(w1, w2);
        let delta = t1 - t2;
        let two_d = 2.0 * self.denominator(delta);
        let n1 = k.a10 * t1.sin()
            + k.a11 * delta.sin()
            + k.a12 * (t1 - 2.0 * t2).sin()
            + k.a22 * (2.0 * delta).sin();
        let n2 = k.b01 * t2.sin()
            + k.b11 * delta.sin()
            + k.b21 * (2.0 * t1 - t2).sin()
            + k.b22 * (2.0 * delta).sin();
        [w1, w2, n1 / two_d, n2 / two_d]
    }

    pub fn jacobian(&self, y: &[f64; 4]) -> [[f64; 4]; 4] {
        let Self { m1, m2, a1, a2, l1, j1, j2, .. } = *self;
        let [t1, t2, w1, w2] = *y;
        let k = self.coefficients(w1, w2);
        let delta = t1 - t2;
        let d = self.denominator(delta);
        // dD/dtheta1 = c sin(2 delta), dD/dtheta2 = -c sin(2 delta)
        let dd1 = self.c() * (2.0 * delta).sin();

        let s2d = (2.0 * delta).sin();
        let c2d = (2.0 * delta).cos();
        let n1 = k.a10 * t1.sin() + k.a11 * delta.sin() + k.a12 * (t1 - 2.0 * t2).sin() + k.a22 * s2d;
        let n2 = k.b01 * t2.sin() + k.b11 * delta.sin() + k.b21 * (2.0 * t1 - t2).sin() + k.b22 * s2d;

        let n1_t1 = k.a10 * t1.cos() + k.a11 * delta.cos() + k.a12 * (t1 - 2.0 * t2).cos() + 2.0 * k.a22 * c2d;
        let n1_t2 = -k.a11 * delta.cos() - 2.0 * k.a12 * (t1 - 2.0 * t2).cos() - 2.0 * k.a22 * c2d;
        let n1_w1 = -2.0 * l1 * l1 * a2 * a2 * m2 * m2 * w1 * s2d;
        let n1_w2 = (-4.0 * l1 * a2.powi(3) * m2 * m2 - 4.0 * j2 * l1 * a2 * m2) * w2 * delta.sin();

        let n2_t1 = k.b11 * delta.cos() + 2.0 * k.b21 * (2.0 * t1 - t2).cos() + 2.0 * k.b22 * c2d;
        let n2_t2 = k.b01 * t2.cos() - k.b11 * delta.cos() - k.b21 * (2.0 * t1 - t2).cos() - 2.0 * k.b22 * c2d;
        let n2_w1 = 2.0 * a2 * m2 * (2.0 * m2 * l1.powi(3) + 2.0 * m1 * l1 * a1 * a1 + 2.0 * j1 * l1) * w1 * delta.sin();
        let n2_w2 = 2.0 * m2 * m2 * l1 * l1 * a2 * a2 * w2 * s2d;

        let two_d = 2.0 * d;
        let quot = |n: f64, n_t: f64, d_t: f64| n_t / two_d - n * d_t / (two_d * d);
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [quot(n1, n1_t1, dd1), quot(n1, n1_t2, -dd1), n1_w1 / two_d, n1_w2 / two_d],
            [quot(n2, n2_t1, dd1), quot(n2, n2_t2, -dd1), n2_w1 / two_d, n2_w2 / two_d],
        ]
    }
}

struct Coefficients {
    a10: f64,
    a11: f64,
    a12: f64,
    a22: f64,
    b01: f64,
    b11: f64,
    b21: f64,
    b22: f64,
}
