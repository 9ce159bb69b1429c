//! The three built-in Hamiltonian systems and the common operations on them.

mod pcr3bp;
mod physical;
mod point_mass;

use std::fmt;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pcr3bp::Pcr3bpParams;
pub use physical::PhysicalParams;
pub use point_mass::PointMassParams;

/// A phase-space point. For the pendulums `(q1, q2, v1, v2) = (θ1, θ2, ω1, ω2)`
/// with angles kept unwrapped; for the three-body problem `(x, y, vx, vy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub q1: f64,
    pub q2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl State {
    pub const fn new(q1: f64, q2: f64, v1: f64, v2: f64) -> Self {
        Self { q1, q2, v1, v2 }
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.q1, self.q2, self.v1, self.v2]
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the difference.
    pub fn distance(&self, other: &State) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
    }
}

impl From<[f64; 4]> for State {
    fn from(a: [f64; 4]) -> Self {
        Self::from_array(a)
    }
}

impl From<State> for [f64; 4] {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

/// Pendulum reverser `(q1, q2, v1, v2) ↦ (q1, q2, −v1, −v2)`.
pub fn apply_reverser(s: &State) -> State {
    State::new(s.q1, s.q2, -s.v1, -s.v2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PhysicalDp,
    PointMassDp,
    Pcr3bp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::PhysicalDp => "physical_dp",
            ModelKind::PointMassDp => "point_mass_dp",
            ModelKind::Pcr3bp => "pcr3bp",
        }
    }

    pub fn is_pendulum(self) -> bool {
        !matches!(self, ModelKind::Pcr3bp)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical_dp" => Ok(ModelKind::PhysicalDp),
            "point_mass_dp" => Ok(ModelKind::PointMassDp),
            "pcr3bp" => Ok(ModelKind::Pcr3bp),
            other => Err(Error::InvalidModel(format!("unknown system kind {other:?}"))),
        }
    }
}

/// One of the built-in systems together with its parameters.
///
/// Construct through [`SystemModel::physical_dp`] and friends or
/// [`SystemModel::from_json`]; all constructors validate the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SystemModel {
    PhysicalDp(PhysicalParams),
    PointMassDp(PointMassParams),
    Pcr3bp(Pcr3bpParams),
}

#[derive(Deserialize)]
struct RawModel {
    kind: ModelKind,
    #[serde(default)]
    params: serde_json::Value,
}

impl<'de> Deserialize<'de> for SystemModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawModel::deserialize(d)?;
        let params = if raw.params.is_null() { serde_json::json!({}) } else { raw.params };
        let model = match raw.kind {
            ModelKind::PhysicalDp => SystemModel::PhysicalDp(serde_json::from_value(params).map_err(D::Error::custom)?),
            ModelKind::PointMassDp => {
                SystemModel::PointMassDp(serde_json::from_value(params).map_err(D::Error::custom)?)
            }
            ModelKind::Pcr3bp => SystemModel::Pcr3bp(serde_json::from_value(params).map_err(D::Error::custom)?),
        };
        model.validate().map_err(D::Error::custom)?;
        Ok(model)
    }
}

impl SystemModel {
    pub fn physical_dp(p: PhysicalParams) -> Result<Self> {
        let m = SystemModel::PhysicalDp(p);
        m.validate()?;
        Ok(m)
    }

    pub fn point_mass_dp(p: PointMassParams) -> Result<Self> {
        let m = SystemModel::PointMassDp(p);
        m.validate()?;
        Ok(m)
    }

    pub fn pcr3bp(mu: f64) -> Result<Self> {
        let m = SystemModel::Pcr3bp(Pcr3bpParams { mu });
        m.validate()?;
        Ok(m)
    }

    /// Default-parameter model of the given kind.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::PhysicalDp => SystemModel::PhysicalDp(PhysicalParams::default()),
            ModelKind::PointMassDp => SystemModel::PointMassDp(PointMassParams::default()),
            ModelKind::Pcr3bp => SystemModel::Pcr3bp(Pcr3bpParams::default()),
        }
    }

    /// Parse `{"kind": "...", "params": {...}}`; omitted parameters take defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemModel::PhysicalDp(p) => p.validate(),
            SystemModel::PointMassDp(p) => p.validate(),
            SystemModel::Pcr3bp(p) => p.validate(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            SystemModel::PhysicalDp(_) => ModelKind::PhysicalDp,
            SystemModel::PointMassDp(_) => ModelKind::PointMassDp,
            SystemModel::Pcr3bp(_) => ModelKind::Pcr3bp,
        }
    }

    /// Raw vector field on arrays; no finiteness check.
    #[inline]
    pub fn field(&self, y: &[f64; 4]) -> [f64; 4] {
        match self {
            SystemModel::PhysicalDp(p) => p.vector_field(y),
            SystemModel::PointMassDp(p) => p.vector_field(y),
            SystemModel::Pcr3bp(p) => p.vector_field(y),
        }
    }

    /// Raw Jacobian on arrays, row-major.
    #[inline]
    pub fn jacobian_array(&self, y: &[f64; 4]) -> [[f64; 4]; 4] {
        match self {
            SystemModel::PhysicalDp(p) => p.jacobian(y),
            SystemModel::PointMassDp(p) => p.jacobian(y),
            SystemModel::Pcr3bp(p) => p.jacobian(y),
        }
    }

    #[inline]
    pub fn energy(&self, y: &[f64; 4]) -> f64 {
        let [q1, q2, v1, v2] = *y;
        match self {
            SystemModel::PhysicalDp(p) => p.kinetic(q1, q2, v1, v2) + p.potential(q1, q2),
            SystemModel::PointMassDp(p) => p.kinetic(q1, q2, v1, v2) + p.potential(q1, q2),
            SystemModel::Pcr3bp(p) => 0.5 * (v1 * v1 + v2 * v2) + p.potential(q1, q2),
        }
    }

    /// `(q̇1, q̇2, v̇1, v̇2)` at `s`.
    pub fn eval_vector_field(&self, s: &State) -> Result<State> {
        let f = self.field(&s.to_array());
        const NAMES: [&str; 4] = ["q1_dot", "q2_dot", "v1_dot", "v2_dot"];
        for (i, v) in f.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { component: NAMES[i] });
            }
        }
        Ok(State::from_array(f))
    }

    pub fn eval_hamiltonian(&self, s: &State) -> Result<f64> {
        let h = self.energy(&s.to_array());
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::NonFinite { component: "H" })
        }
    }

    pub fn eval_jacobian(&self, s: &State) -> Matrix4<f64> {
        let j = self.jacobian_array(&s.to_array());
        Matrix4::from_fn(|r, c| j[r][c])
    }

    pub fn potential(&self, q1: f64, q2: f64) -> f64 {
        match self {
            SystemModel::PhysicalDp(p) => p.potential(q1, q2),
            SystemModel::PointMassDp(p) => p.potential(q1, q2),
            SystemModel::Pcr3bp(p) => p.potential(q1, q2),
        }
    }

    /// Time-reversal symmetry of this system. The pendulums flip both rates;
    /// the rotating-frame three-body problem reflects across `y = 0`.
    pub fn reverser(&self, s: &State) -> State {
        match self {
            SystemModel::Pcr3bp(_) => State::new(s.q1, -s.q2, -s.v1, s.v2),
            _ => apply_reverser(s),
        }
    }

    /// Indices of the coordinates that are free on Fix(R) and those pinned to zero.
    pub fn reverser_fixed_coords(&self) -> ([usize; 2], [usize; 2]) {
        match self {
            SystemModel::Pcr3bp(_) => ([0, 3], [1, 2]),
            _ => ([0, 1], [2, 3]),
        }
    }

    /// For the pendulums, shift both angles by multiples of 2π so they lie
    /// within π of `reference`; the three-body problem has no angles.
    pub fn wrap_near(&self, s: &State, reference: &State) -> State {
        match self {
            SystemModel::Pcr3bp(_) => *s,
            _ => {
                let tau = 2.0 * std::f64::consts::PI;
                let w = |q: f64, r: f64| q - tau * ((q - r) / tau).round();
                State::new(w(s.q1, reference.q1), w(s.q2, reference.q2), s.v1, s.v2)
            }
        }
    }

    /// Sublevel set `{V ≤ h}` sampled on a regular grid.
    pub fn hills_region_grid(&self, h: f64, grid: &GridSpec) -> Result<HillsRegion> {
        grid.validate()?;
        let mut accessible = Vec::with_capacity(grid.n1 * grid.n2);
        for j in 0..grid.n2 {
            let q2 = grid.coord2(j);
            for i in 0..grid.n1 {
                let q1 = grid.coord1(i);
                accessible.push(self.potential(q1, q2) <= h);
            }
        }
        Ok(HillsRegion { grid: *grid, h, accessible })
    }
}

/// A regular grid over configuration space; cell centres are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q1_min: f64,
    pub q1_max: f64,
    pub q2_min: f64,
    pub q2_max: f64,
    pub n1: usize,
    pub n2: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self { q1_min: lo, q1_max: hi, q2_min: lo, q2_max: hi, n1: n, n2: n }
    }

    fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || !(self.q1_max > self.q1_min) || !(self.q2_max > self.q2_min) {
            return Err(Error::InvalidConfig(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn coord1(&self, i: usize) -> f64 {
        self.q1_min + (i as f64 + 0.5) * (self.q1_max - self.q1_min) / self.n1 as f64
    }

    pub fn coord2(&self, j: usize) -> f64 {
        self.q2_min + (j as f64 + 0.5) * (self.q2_max - self.q2_min) / self.n2 as f64
    }

    /// Index of the cell containing `(q1, q2)`, if inside the grid.
    pub fn cell_of(&self, q1: f64, q2: f64) -> Option<(usize, usize)> {
        let fi = (q1 - self.q1_min) / (self.q1_max - self.q1_min) * self.n1 as f64;
        let fj = (q2 - self.q2_min) / (self.q2_max - self.q2_min) * self.n2 as f64;
        if fi < 0.0 || fj < 0.0 || fi >= self.n1 as f64 || fj >= self.n2 as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillsRegion {
    pub grid: GridSpec,
    pub h: f64,
    /// Row-major in `q2`: index `j * n1 + i`.
    pub accessible: Vec<bool>,
}

impl HillsRegion {
    pub fn is_accessible(&self, i: usize, j: usize) -> bool {
        self.accessible[j * self.grid.n1 + i]
    }

    pub fn count(&self) -> usize {
        self.accessible.iter().filter(|&&a| a).count()
    }
}
