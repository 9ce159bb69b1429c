//! Equilibria, their linear classification, and the collinear Lagrange points.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{State, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{null_vector, null_vector_complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    DownDown,
    DownUp,
    UpDown,
    UpUp,
    L1,
    L2,
}

impl EquilibriumLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EquilibriumLabel::DownDown => "DownDown",
            EquilibriumLabel::DownUp => "DownUp",
            EquilibriumLabel::UpDown => "UpDown",
            EquilibriumLabel::UpUp => "UpUp",
            EquilibriumLabel::L1 => "L1",
            EquilibriumLabel::L2 => "L2",
        }
    }
}

impl std::str::FromStr for EquilibriumLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match norm.as_str() {
            "downdown" => EquilibriumLabel::DownDown,
            "downup" => EquilibriumLabel::DownUp,
            "updown" => EquilibriumLabel::UpDown,
            "upup" => EquilibriumLabel::UpUp,
            "l1" => EquilibriumLabel::L1,
            "l2" => EquilibriumLabel::L2,
            _ => return Err(Error::InvalidConfig(format!("unknown equilibrium label {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Center,
    Index1Saddle,
    Index2Saddle,
}

/// Linear data of an index-1 saddle: eigenvalues `±λ`, `±iω` and directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleFrame {
    pub lambda: f64,
    pub omega: f64,
    /// Unit eigenvectors for `+λ` and `−λ`.
    pub unstable: [f64; 4],
    pub stable: [f64; 4],
    /// Real and imaginary parts of the eigenvector for `+iω`.
    pub center_re: [f64; 4],
    pub center_im: [f64; 4],
    /// Unit vector in the centre plane lying in Fix(R): the direction in
    /// which small symmetric periodic orbits leave the saddle.
    pub center_fix: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub state: State,
    pub energy: f64,
    pub classification: Classification,
    pub eigenvalues: [Complex64; 4],
    pub saddle_frame: Option<SaddleFrame>,
}

/// Collinear Lagrange point branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LagrangeBranch {
    L1,
    L2,
}

fn quintic(mu: f64, s: f64, g: f64) -> (f64, f64) {
    let p = ((((g - s * (3.0 - mu)) * g + (3.0 - 2.0 * mu)) * g - mu) * g + s * 2.0 * mu) * g - mu;
    let dp = (((5.0 * g - 4.0 * s * (3.0 - mu)) * g + 3.0 * (3.0 - 2.0 * mu)) * g - 2.0 * mu) * g + s * 2.0 * mu;
    (p, dp)
}

/// Residual of the Lagrange quintic at `gamma`.
pub fn lagrange_quintic_residual(mu: f64, branch: LagrangeBranch, gamma: f64) -> f64 {
    let s = if branch == LagrangeBranch::L1 { 1.0 } else { -1.0 };
    quintic(mu, s, gamma).0
}

/// Distance `γ` from the smaller primary to L1 (upper signs) or L2 (lower
/// signs): the root in (0, 1) of
/// `γ⁵ ∓ (3−μ)γ⁴ + (3−2μ)γ³ − μγ² ± 2μγ − μ = 0`.
pub fn solve_lagrange_quintic(mu: f64, branch: LagrangeBranch) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidModel(format!("mu must lie in (0, 1), got {mu}")));
    }
    let s = if branch == LagrangeBranch::L1 { 1.0 } else { -1.0 };
    let p = |g: f64| quintic(mu, s, g).0;
    // bracket from the first sign change on a 1e-3 grid
    let mut bracket = None;
    let mut prev = p(0.0);
    for i in 1..=1000 {
        let g = i as f64 * 1e-3;
        let cur = p(g);
        if prev == 0.0 && i > 1 {
            return Ok(g - 1e-3);
        }
        if prev * cur < 0.0 || cur == 0.0 {
            bracket = Some((g - 1e-3, g));
            break;
        }
        prev = cur;
    }
    let (mut a, mut b) = bracket.ok_or(Error::QuinticNoRoot)?;
    let mut fa = p(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = p(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let mut g = 0.5 * (a + b);
    for _ in 0..20 {
        let (v, dv) = quintic(mu, s, g);
        if v == 0.0 || dv == 0.0 {
            break;
        }
        let next = g - v / dv;
        if !(next > a - 1e-9 && next < b + 1e-9) {
            break;
        }
        if (next - g).abs() < 1e-17 {
            g = next;
            break;
        }
        g = next;
    }
    Ok(g)
}

/// x-coordinate of L1 or L2 in the rotating frame.
pub fn lagrange_point_x(mu: f64, branch: LagrangeBranch) -> Result<f64> {
    let g = solve_lagrange_quintic(mu, branch)?;
    Ok(match branch {
        LagrangeBranch::L1 => 1.0 - mu - g,
        LagrangeBranch::L2 => 1.0 - mu + g,
    })
}

fn sort_eigs(mut e: [Complex64; 4]) -> [Complex64; 4] {
    e.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    e
}

/// Classify from the spectrum of the Jacobian at `state`.
pub fn classify_equilibrium(
    model: &SystemModel,
    state: &State,
) -> Result<(Classification, [Complex64; 4], Option<SaddleFrame>)> {
    let f = model.eval_vector_field(state)?.to_array();
    if f.iter().any(|v| v.abs() > 1e-9) {
        return Err(Error::Degenerate(format!("not an equilibrium: field {f:?}")));
    }
    let jac = model.eval_jacobian(state);
    let eig = jac.complex_eigenvalues();
    let eigs = sort_eigs([eig[0], eig[1], eig[2], eig[3]]);
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-8 * scale;
    if eigs.iter().any(|z| z.norm() < tol) {
        return Err(Error::Degenerate(format!("zero eigenvalue in {eigs:?}")));
    }
    let real: Vec<&Complex64> = eigs.iter().filter(|z| z.im.abs() <= tol).collect();
    let imag: Vec<&Complex64> = eigs.iter().filter(|z| z.re.abs() <= tol).collect();
    let class = match (real.len(), imag.len()) {
        (0, 4) => Classification::Center,
        (2, 2) => Classification::Index1Saddle,
        (4, 0) => Classification::Index2Saddle,
        _ => return Err(Error::Degenerate(format!("unsupported spectrum {eigs:?}"))),
    };
    let frame = if class == Classification::Index1Saddle {
        Some(saddle_frame(model, &jac, real[0].re.abs(), imag.iter().map(|z| z.im.abs()).fold(0.0, f64::max))?)
    } else {
        None
    };
    Ok((class, eigs, frame))
}

fn normalize(v: [f64; 4]) -> [f64; 4] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Flip so that the largest-magnitude position component is positive.
pub(crate) fn orient(v: [f64; 4]) -> [f64; 4] {
    let k = if v[0].abs() >= v[1].abs() { 0 } else { 1 };
    if v[k] < 0.0 {
        v.map(|x| -x)
    } else {
        v
    }
}

fn saddle_frame(model: &SystemModel, jac: &Matrix4<f64>, lambda: f64, omega: f64) -> Result<SaddleFrame> {
    let unstable = orient(normalize(null_vector(&(jac - Matrix4::identity() * lambda))));
    let stable = orient(normalize(null_vector(&(jac + Matrix4::identity() * lambda))));
    let jc = jac.map(|x| Complex64::new(x, 0.0)) - Matrix4::identity() * Complex64::new(0.0, omega);
    let vc = null_vector_complex(&jc);
    let center_re = [vc[0].re, vc[1].re, vc[2].re, vc[3].re];
    let center_im = [vc[0].im, vc[1].im, vc[2].im, vc[3].im];
    // Re(e^{iφ} v) = cos φ Re v − sin φ Im v; choose φ killing the pinned coordinates
    let (_, pinned) = model.reverser_fixed_coords();
    let m = Matrix2::new(center_re[pinned[0]], -center_im[pinned[0]], center_re[pinned[1]], -center_im[pinned[1]]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Degenerate("SVD failed".into()))?;
    let (k, _) = svd.singular_values.argmin();
    let cs = Vector2::new(vt[(k, 0)], vt[(k, 1)]);
    let mut fix = [0.0; 4];
    for i in 0..4 {
        fix[i] = cs[0] * center_re[i] - cs[1] * center_im[i];
    }
    Ok(SaddleFrame {
        lambda,
        omega,
        unstable,
        stable,
        center_re,
        center_im,
        center_fix: orient(normalize(fix)),
    })
}

/// Eigenvalues of the lower-left 2×2 block of a pendulum Jacobian; the 4×4
/// eigenvalues square to these.
pub fn block_eigenvalues(model: &SystemModel, state: &State) -> [Complex64; 2] {
    let j = model.eval_jacobian(state);
    let b = Matrix2::new(j[(2, 0)], j[(2, 1)], j[(3, 0)], j[(3, 1)]);
    let e = b.complex_eigenvalues();
    [e[0], e[1]]
}

/// The four fundamental pendulum equilibria sorted by energy, or L1 and L2
/// for the three-body problem.
pub fn enumerate_equilibria(model: &SystemModel) -> Result<Vec<Equilibrium>> {
    let candidates: Vec<(EquilibriumLabel, State)> = match model {
        SystemModel::Pcr3bp(p) => vec![
            (EquilibriumLabel::L1, State::new(lagrange_point_x(p.mu, LagrangeBranch::L1)?, 0.0, 0.0, 0.0)),
            (EquilibriumLabel::L2, State::new(lagrange_point_x(p.mu, LagrangeBranch::L2)?, 0.0, 0.0, 0.0)),
        ],
        _ => vec![
            (EquilibriumLabel::DownDown, State::new(0.0, 0.0, 0.0, 0.0)),
            (EquilibriumLabel::DownUp, State::new(0.0, PI, 0.0, 0.0)),
            (EquilibriumLabel::UpDown, State::new(PI, 0.0, 0.0, 0.0)),
            (EquilibriumLabel::UpUp, State::new(PI, PI, 0.0, 0.0)),
        ],
    };
    let mut out = Vec::with_capacity(candidates.len());
    for (label, state) in candidates {
        let (classification, eigenvalues, saddle_frame) = classify_equilibrium(model, &state)?;
        out.push(Equilibrium { label, state, energy: model.eval_hamiltonian(&state)?, classification, eigenvalues, saddle_frame });
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}

/// Look up one equilibrium by label.
pub fn find_equilibrium(model: &SystemModel, label: EquilibriumLabel) -> Result<Equilibrium> {
    enumerate_equilibria(model)?
        .into_iter()
        .find(|e| e.label == label)
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not an equilibrium of {}", label.as_str(), model.kind())))
}
