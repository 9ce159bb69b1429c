//! Poincaré sections as zero sets of scalar functions on phase space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{State, SystemModel};
use crate::error::{Error, Result};

/// Which angle an [`SectionKind::AngleLevel`] section constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Angle {
    Theta1,
    Theta2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SectionKind {
    /// `θ_which = value` with `value` a multiple of 2π (unwrapped).
    AngleLevel { which: Angle, value: f64 },
    /// `θ1 − θ2 = offset` with `offset` a multiple of 2π.
    Diagonal { offset: f64 },
    /// `y = 0` restricted to the half-plane `x < 0`.
    Pcr3bpY0,
    /// `n · (s − p) = 0`, optionally restricted to `|s − p| < radius`.
    Hyperplane { point: [f64; 4], normal: [f64; 4], radius: Option<f64> },
}

/// Direction of a crossing, measured along forward physical time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    Any,
}

impl Direction {
    pub fn accepts(self, sign: i8) -> bool {
        match self {
            Direction::Positive => sign > 0,
            Direction::Negative => sign < 0,
            Direction::Any => true,
        }
    }

    pub fn from_sign(sign: i32) -> Self {
        match sign.signum() {
            1 => Direction::Positive,
            -1 => Direction::Negative,
            _ => Direction::Any,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub direction: Direction,
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - 2.0 * PI * (a / (2.0 * PI)).round();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn is_multiple_of_two_pi(v: f64) -> bool {
    let k = v / (2.0 * PI);
    (k - k.round()).abs() < 1e-12
}

impl SectionSpec {
    pub fn angle(which: Angle, value: f64, direction: Direction) -> Result<Self> {
        if !is_multiple_of_two_pi(value) {
            return Err(Error::InvalidConfig(format!("section level {value} is not a multiple of 2π")));
        }
        Ok(Self { kind: SectionKind::AngleLevel { which, value }, direction })
    }

    /// `θ2 = 2πk`.
    pub fn theta2(k: i32, direction: Direction) -> Self {
        Self { kind: SectionKind::AngleLevel { which: Angle::Theta2, value: 2.0 * PI * k as f64 }, direction }
    }

    /// `θ1 = 2πk`.
    pub fn theta1(k: i32, direction: Direction) -> Self {
        Self { kind: SectionKind::AngleLevel { which: Angle::Theta1, value: 2.0 * PI * k as f64 }, direction }
    }

    /// `θ1 − θ2 = 2πk`.
    pub fn diagonal(k: i32, direction: Direction) -> Self {
        Self { kind: SectionKind::Diagonal { offset: 2.0 * PI * k as f64 }, direction }
    }

    pub fn pcr3bp_y0(direction: Direction) -> Self {
        Self { kind: SectionKind::Pcr3bpY0, direction }
    }

    pub fn hyperplane(point: [f64; 4], normal: [f64; 4], radius: Option<f64>, direction: Direction) -> Self {
        Self { kind: SectionKind::Hyperplane { point, normal, radius }, direction }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SectionKind::AngleLevel { value, .. } if !is_multiple_of_two_pi(value) => {
                Err(Error::InvalidConfig(format!("section level {value} is not a multiple of 2π")))
            }
            SectionKind::Diagonal { offset } if !is_multiple_of_two_pi(offset) => {
                Err(Error::InvalidConfig(format!("diagonal offset {offset} is not a multiple of 2π")))
            }
            SectionKind::Hyperplane { normal, .. } if normal.iter().all(|v| *v == 0.0) => {
                Err(Error::InvalidConfig("hyperplane normal is zero".into()))
            }
            _ => Ok(()),
        }
    }

    /// Section function; crossings are its zeros.
    #[inline]
    pub fn value(&self, y: &[f64; 4]) -> f64 {
        match self.kind {
            SectionKind::AngleLevel { which: Angle::Theta1, value } => y[0] - value,
            SectionKind::AngleLevel { which: Angle::Theta2, value } => y[1] - value,
            SectionKind::Diagonal { offset } => y[0] - y[1] - offset,
            SectionKind::Pcr3bpY0 => y[1],
            SectionKind::Hyperplane { point, normal, .. } => (0..4).map(|i| normal[i] * (y[i] - point[i])).sum(),
        }
    }

    #[inline]
    pub fn gradient(&self) -> [f64; 4] {
        match self.kind {
            SectionKind::AngleLevel { which: Angle::Theta1, .. } => [1.0, 0.0, 0.0, 0.0],
            SectionKind::AngleLevel { which: Angle::Theta2, .. } => [0.0, 1.0, 0.0, 0.0],
            SectionKind::Diagonal { .. } => [1.0, -1.0, 0.0, 0.0],
            SectionKind::Pcr3bpY0 => [0.0, 1.0, 0.0, 0.0],
            SectionKind::Hyperplane { normal, .. } => normal,
        }
    }

    /// Time derivative of the section function along the physical flow.
    pub fn rate(&self, model: &SystemModel, y: &[f64; 4]) -> f64 {
        let f = model.field(y);
        let g = self.gradient();
        (0..4).map(|i| g[i] * f[i]).sum()
    }

    /// Side conditions beyond `g = 0`.
    pub fn admits(&self, y: &[f64; 4]) -> bool {
        match self.kind {
            SectionKind::Pcr3bpY0 => y[0] < 0.0,
            SectionKind::Hyperplane { point, radius: Some(r), .. } => {
                (0..4).map(|i| (y[i] - point[i]).powi(2)).sum::<f64>().sqrt() < r
            }
            _ => true,
        }
    }

    /// Two in-section coordinates used for plotting and intersecting cuts.
    pub fn plane_coords(&self, y: &[f64; 4]) -> [f64; 2] {
        match self.kind {
            SectionKind::AngleLevel { which: Angle::Theta2, .. } | SectionKind::Diagonal { .. } => [y[0], y[2]],
            SectionKind::AngleLevel { which: Angle::Theta1, .. } => [y[1], y[3]],
            SectionKind::Pcr3bpY0 => [y[0], y[2]],
            SectionKind::Hyperplane { .. } => [y[0], y[2]],
        }
    }

    pub fn plane_coords_state(&self, s: &State) -> [f64; 2] {
        self.plane_coords(&s.to_array())
    }

    /// Same surface, different crossing direction.
    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// The same section shifted by `n` lifts of 2π; sections without an
    /// angle are returned unchanged.
    pub fn lifted(mut self, n: i32) -> Self {
        let shift = 2.0 * PI * n as f64;
        match &mut self.kind {
            SectionKind::AngleLevel { value, .. } => *value += shift,
            SectionKind::Diagonal { offset } => *offset += shift,
            _ => {}
        }
        self
    }

    /// Whether the first plane coordinate is an angle (compared modulo 2π).
    pub fn plane_is_angular(&self) -> bool {
        matches!(self.kind, SectionKind::AngleLevel { .. } | SectionKind::Diagonal { .. })
    }

    /// Plane coordinates with an angular first coordinate wrapped to (−π, π].
    pub fn wrapped_plane_coords(&self, y: &[f64; 4]) -> [f64; 2] {
        let [a, b] = self.plane_coords(y);
        if self.plane_is_angular() {
            [wrap_angle(a), b]
        } else {
            [a, b]
        }
    }

    /// Full state on the section at energy `h` with the given plane
    /// coordinates. The remaining position follows from the section and the
    /// remaining velocity from the energy (kinetic energy is quadratic in
    /// it); of the two roots, the one nearest `guess` is taken.
    pub fn complete_state(&self, model: &SystemModel, plane: [f64; 2], h: f64, guess: &State) -> Result<State> {
        let mut y = guess.to_array();
        let solve = match self.kind {
            SectionKind::AngleLevel { which: Angle::Theta2, value } => {
                (y[0], y[2], y[1]) = (plane[0], plane[1], value);
                3
            }
            SectionKind::AngleLevel { which: Angle::Theta1, value } => {
                (y[1], y[3], y[0]) = (plane[0], plane[1], value);
                2
            }
            SectionKind::Diagonal { offset } => {
                (y[0], y[2]) = (plane[0], plane[1]);
                y[1] = y[0] - offset;
                3
            }
            SectionKind::Pcr3bpY0 => {
                (y[0], y[2], y[1]) = (plane[0], plane[1], 0.0);
                3
            }
            SectionKind::Hyperplane { .. } => {
                return Err(Error::InvalidConfig("hyperplane sections have no plane parametrisation".into()))
            }
        };
        // exact quadratic through three samples around the guess
        let v0 = y[solve];
        let at = |v: f64| {
            let mut z = y;
            z[solve] = v;
            model.energy(&z) - h
        };
        let (fm, f0, fp) = (at(v0 - 1.0), at(v0), at(v0 + 1.0));
        let a = 0.5 * (fp + fm) - f0;
        let b = 0.5 * (fp - fm);
        let disc = b * b - 4.0 * a * f0;
        if a == 0.0 || disc < 0.0 {
            return Err(Error::Degenerate(format!("energy {h} not reachable at plane point {plane:?}")));
        }
        let r = disc.sqrt();
        // numerically stable pair of roots (offsets from v0)
        let q = -0.5 * (b + b.signum() * r);
        let roots = [q / a, if q != 0.0 { f0 / q } else { -q / a }];
        let d = if roots[0].abs() <= roots[1].abs() { roots[0] } else { roots[1] };
        y[solve] = v0 + d;
        Ok(State::from_array(y))
    }

    /// Number of 2π lifts separating this section from `other` of the same
    /// family (`other.lifted(n)` coincides with `self`).
    pub fn lift_count(&self, other: &SectionSpec) -> i32 {
        let level = |s: &SectionSpec| match s.kind {
            SectionKind::AngleLevel { value, .. } => value,
            SectionKind::Diagonal { offset } => offset,
            _ => 0.0,
        };
        ((level(self) - level(other)) / (2.0 * PI)).round() as i32
    }

    /// Same geometric family: the surfaces differ only by a 2π lift.
    pub fn same_family(&self, other: &SectionSpec) -> bool {
        match (self.kind, other.kind) {
            (SectionKind::AngleLevel { which: a, .. }, SectionKind::AngleLevel { which: b, .. }) => a == b,
            (SectionKind::Diagonal { .. }, SectionKind::Diagonal { .. }) => true,
            (SectionKind::Pcr3bpY0, SectionKind::Pcr3bpY0) => true,
            (a, b) => a == b,
        }
    }
}
