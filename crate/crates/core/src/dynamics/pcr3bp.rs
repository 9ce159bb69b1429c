//! Planar circular restricted three-body problem in the rotating frame.
//!
//! The primaries sit at `x = -mu` (mass `1 - mu`) and `x = 1 - mu` (mass `mu`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pcr3bpParams {
    pub mu: f64,
}

impl Default for Pcr3bpParams {
    /// Sun–Jupiter mass ratio.
    fn default() -> Self {
        Self { mu: 9.537e-4 }
    }
}

impl Pcr3bpParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidModel(format!("mu must lie in (0, 1), got {}", self.mu)));
        }
        Ok(())
    }

    fn radii(&self, x: f64, y: f64) -> (f64, f64) {
        let mu = self.mu;
        (((x + mu).powi(2) + y * y).sqrt(), ((x - 1.0 + mu).powi(2) + y * y).sqrt())
    }

    /// Effective (amended) potential.
    pub fn potential(&self, x: f64, y: f64) -> f64 {
        let (r1, r2) = self.radii(x, y);
        let (mu1, mu2) = (1.0 - self.mu, self.mu);
        -0.5 * (mu1 * r1 * r1 + mu2 * r2 * r2) - mu1 / r1 - mu2 / r2
    }

    pub fn vector_field(&self, s: &[f64; 4]) -> [f64; 4] {
        let [x, y, vx, vy] = *s;
        let mu = self.mu;
        let (mu1, mu2) = (1.0 - mu, mu);
        let (r1, r2) = self.radii(x, y);
        let (r13, r23) = (r1.powi(3), r2.powi(3));
        [
            vx,
            vy,
            2.0 * vy + x - mu1 * (x + mu) / r13 - mu2 * (x - mu1) / r23,
            -2.0 * vx + y - mu1 * y / r13 - mu2 * y / r23,
        ]
    }

    pub fn jacobian(&self, s: &[f64; 4]) -> [[f64; 4]; 4] {
        let [x, y, _, _] = *s;
        let mu = self.mu;
        let (mu1, mu2) = (1.0 - mu, mu);
        let (r1, r2) = self.radii(x, y);
        let (dx1, dx2) = (x + mu, x - mu1);
        let (r13, r23) = (r1.powi(3), r2.powi(3));
        let (r15, r25) = (r1.powi(5), r2.powi(5));
        // second derivatives of the effective potential, sign-flipped
        let uxx = 1.0 - mu1 / r13 - mu2 / r23 + 3.0 * mu1 * dx1 * dx1 / r15 + 3.0 * mu2 * dx2 * dx2 / r25;
        let uyy = 1.0 - mu1 / r13 - mu2 / r23 + 3.0 * mu1 * y * y / r15 + 3.0 * mu2 * y * y / r25;
        let uxy = 3.0 * mu1 * dx1 * y / r15 + 3.0 * mu2 * dx2 * y / r25;
        [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [uxx, uxy, 0.0, 2.0],
            [uxy, uyy, -2.0, 0.0],
        ]
    }
}
