//! Small dense helpers shared by the numerical modules.

use nalgebra::DMatrix;

/// Largest eigenvalue modulus of a square matrix.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let half_tr = 0.5 * (a + d);
            let det = a * d - b * c;
            let disc = half_tr * half_tr - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                (half_tr + s).abs().max((half_tr - s).abs())
            } else {
                det.sqrt()
            }
        }
        _ => {
            if m.iter().any(|v| !v.is_finite()) {
                return f64::INFINITY;
            }
            m.clone()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        }
    }
}

/// Spectral (operator 2-) norm.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Block companion matrix of `I - sum C_i z^i`; its eigenvalues are the
/// reciprocals of the polynomial's roots.
pub(crate) fn companion(coeffs: &[DMatrix<f64>], d: usize) -> DMatrix<f64> {
    let k = coeffs.len();
    let n = d * k;
    let mut c = DMatrix::zeros(n, n);
    for (i, ci) in coeffs.iter().enumerate() {
        c.view_mut((0, i * d), (d, d)).copy_from(ci);
    }
    for i in 1..k {
        for r in 0..d {
            c[(i * d + r, (i - 1) * d + r)] = 1.0;
        }
    }
    c
}

/// Spectral radius of the companion of `I - sum C_i z^i`. Trailing zero
/// blocks are dropped first, so an all-zero polynomial gives exactly 0.
pub(crate) fn companion_radius(coeffs: &[DMatrix<f64>], d: usize) -> f64 {
    let k = coeffs.iter().rposition(|c| c.iter().any(|v| *v != 0.0)).map_or(0, |i| i + 1);
    if k == 0 {
        return 0.0;
    }
    spectral_radius(&companion(&coeffs[..k], d))
}

/// Log-determinant of a symmetric positive definite matrix stored row-major
/// in `m` (dimension `d`). `None` when the matrix is not positive definite.
pub(crate) fn log_det_spd(m: &[f64], d: usize) -> Option<f64> {
    let v = match d {
        1 => {
            if m[0] > 0.0 {
                m[0].ln()
            } else {
                return None;
            }
        }
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if m[0] > 0.0 && det > 0.0 {
                det.ln()
            } else {
                return None;
            }
        }
        _ => {
            let mat = DMatrix::from_row_slice(d, d, m);
            let chol = mat.cholesky()?;
            2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
        }
    };
    v.is_finite().then_some(v)
}

/// Inverse of a symmetric positive definite matrix, row-major.
pub(crate) fn inverse_spd(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(d, d, m);
    let inv = mat.cholesky()?.inverse();
    let out: Vec<f64> = inv.transpose().iter().copied().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}
