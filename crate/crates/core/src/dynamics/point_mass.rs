//! Point-mass double pendulum (massless rods).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self { m1: 1.0, m2: 1.0, l1: 1.0, l2: 1.0, g: 9.81 }
    }
}

impl PointMassParams {
    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [("m1", self.m1), ("m2", self.m2), ("l1", self.l1), ("l2", self.l2), ("g", self.g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn den(&self, delta: f64) -> f64 {
        let c = delta.cos();
        self.m1 + self.m2 - self.m2 * c * c
    }

    pub fn potential(&self, t1: f64, t2: f64) -> f64 {
        -(self.m1 + self.m2) * self.l1 * self.g * t1.cos() - self.m2 * self.l2 * self.g * t2.cos()
    }

    pub fn kinetic(&self, t1: f64, t2: f64, w1: f64, w2: f64) -> f64 {
        let Self { m1, m2, l1, l2, .. } = *self;
        0.5 * (m1 + m2) * l1 * l1 * w1 * w1
            + 0.5 * m2 * l2 * l2 * w2 * w2
            + m2 * l1 * l2 * w1 * w2 * (t2 - t1).cos()
    }

    pub fn vector_field(&self, y: &[f64; 4]) -> [f64; 4] {
        let Self { m1, m2, l1, l2, g } = *self;
        let [t1, t2, w1, w2] = *y;
        let m = m1 + m2;
        let delta = t2 - t1;
        let den = self.den(delta);
        let a = m2 * l1 * l2 * l2 * w2 * w2 * delta.sin()
            + 0.5 * m2 * l1 * l1 * l2 * w1 * w1 * (2.0 * delta).sin()
            + l1 * l2 * g * (m2 * t2.sin() * delta.cos() - m * t1.sin());
        let b = -0.5 * l1 * l2 * l2 * m2 * m2 * w2 * w2 * (2.0 * delta).sin()
            - l1 * l1 * l2 * m2 * m * w1 * w1 * delta.sin()
            - l1 * l2 * m2 * g * m * (t2.sin() - t1.sin() * delta.cos());
        [w1, w2, a / (l1 * l1 * l2 * den), b / (l1 * l2 * l2 * m2 * den)]
    }

    pub fn jacobian(&self, y: &[f64; 4]) -> [[f64; 4]; 4] {
        let Self { m1, m2, l1, l2, g } = *self;
        let [t1, t2, w1, w2] = *y;
        let m = m1 + m2;
        let delta = t2 - t1;
        let (sd, cd) = delta.sin_cos();
        let (s2d, c2d) = (2.0 * delta).sin_cos();
        let den = self.den(delta);
        // d(den)/dtheta1 = -m2 sin(2 delta); d/dtheta2 is the negative
        let den_t1 = -m2 * s2d;
        let den_t2 = m2 * s2d;

        let na = m2 * l1 * l2 * l2 * w2 * w2 * sd
            + 0.5 * m2 * l1 * l1 * l2 * w1 * w1 * s2d
            + l1 * l2 * g * (m2 * t2.sin() * cd - m * t1.sin());
        let na_t1 = -m2 * l1 * l2 * l2 * w2 * w2 * cd - m2 * l1 * l1 * l2 * w1 * w1 * c2d
            + l1 * l2 * g * (m2 * t2.sin() * sd - m * t1.cos());
        let na_t2 = m2 * l1 * l2 * l2 * w2 * w2 * cd
            + m2 * l1 * l1 * l2 * w1 * w1 * c2d
            + l1 * l2 * g * (m2 * t2.cos() * cd - m2 * t2.sin() * sd);
        let na_w1 = m2 * l1 * l1 * l2 * w1 * s2d;
        let na_w2 = 2.0 * m2 * l1 * l2 * l2 * w2 * sd;

        let nb = -0.5 * l1 * l2 * l2 * m2 * m2 * w2 * w2 * s2d
            - l1 * l1 * l2 * m2 * m * w1 * w1 * sd
            - l1 * l2 * m2 * g * m * (t2.sin() - t1.sin() * cd);
        let nb_t1 = l1 * l2 * l2 * m2 * m2 * w2 * w2 * c2d
            + l1 * l1 * l2 * m2 * m * w1 * w1 * cd
            + l1 * l2 * m2 * g * m * (t1.cos() * cd + t1.sin() * sd);
        let nb_t2 = -l1 * l2 * l2 * m2 * m2 * w2 * w2 * c2d
            - l1 * l1 * l2 * m2 * m * w1 * w1 * cd
            - l1 * l2 * m2 * g * m * (t2.cos() + t1.sin() * sd);
        let nb_w1 = -2.0 * l1 * l1 * l2 * m2 * m * w1 * sd;
        let nb_w2 = -l1 * l2 * l2 * m2 * m2 * w2 * s2d;

        let ka = l1 * l1 * l2;
        let kb = l1 * l2 * l2 * m2;
        let quot = |k: f64, n: f64, n_t: f64, den_t: f64| (n_t * den - n * den_t) / (k * den * den);
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [
                quot(ka, na, na_t1, den_t1),
                quot(ka, na, na_t2, den_t2),
                na_w1 / (ka * den),
                na_w2 / (ka * den),
            ],
            [
                quot(kb, nb, nb_t1, den_t1),
                quot(kb, nb, nb_t2, den_t2),
                nb_w1 / (kb * den),
                nb_w2 / (kb * den),
            ],
        ]
    }
}
