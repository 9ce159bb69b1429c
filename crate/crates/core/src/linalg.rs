//! Small dense linear-algebra helpers.

use nalgebra::{Complex, DMatrix, DVector, Matrix4};

/// Right singular vector of the smallest singular value.
pub(crate) fn null_vector(m: &Matrix4<f64>) -> [f64; 4] {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let (k, _) = svd.singular_values.argmin();
    [vt[(k, 0)], vt[(k, 1)], vt[(k, 2)], vt[(k, 3)]]
}

/// Complex analogue of [`null_vector`], phase-normalised so the largest
/// component is real and positive.
pub(crate) fn null_vector_complex(m: &Matrix4<Complex<f64>>) -> [Complex<f64>; 4] {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let (k, _) = svd.singular_values.argmin();
    // rows of V^H are conjugated right singular vectors
    let v = [vt[(k, 0)].conj(), vt[(k, 1)].conj(), vt[(k, 2)].conj(), vt[(k, 3)].conj()];
    let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let phase = big.conj() / big.norm();
    v.map(|z| z * phase)
}

/// Minimum-norm least-squares solution of `a x = b` by SVD, discarding
/// singular values below `rcond` times the largest.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("u and v_t requested")
}

pub(crate) fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub(crate) fn norm4(a: &[f64; 4]) -> f64 {
    dot4(a, a).sqrt()
}

pub(crate) fn mat_vec(m: &Matrix4<f64>, v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for r in 0..4 {
        for c in 0..4 {
            out[r] += m[(r, c)] * v[c];
        }
    }
    out
}
