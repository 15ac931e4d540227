//! Thin dense complex linear-algebra layer on top of `faer`.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::GateError;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> Mat<C64> {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::ZERO })
}

pub fn adjoint(a: &Mat<C64>) -> Mat<C64> {
    a.adjoint().to_owned()
}

pub fn scale(s: C64, a: &Mat<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| s * a[(i, j)])
}

/// a + s*b, the workhorse for accumulating Hamiltonian terms.
pub fn axpy(a: &mut Mat<C64>, s: C64, b: &Mat<C64>) {
    debug_assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] += s * b[(i, j)];
        }
    }
}

pub fn max_abs(a: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn frobenius(a: &Mat<C64>) -> f64 {
    let mut s = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn trace(a: &Mat<C64>) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let mut out = Mat::zeros(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    faer::linalg::kron::kron(out.as_mut(), a.as_ref(), b.as_ref());
    out
}

pub fn commutator(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a * b - b * a
}

pub fn hermiticity_defect(a: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Eigendecomposition of a Hermitian matrix: returns (eigenvalues ascending,
/// eigenvector matrix V with H = V diag(w) V^dagger).
pub fn eigh(h: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>), GateError> {
    let evd = h
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| GateError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let n = h.nrows();
    let s = evd.S();
    let w: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    Ok((w, evd.U().to_owned()))
}

/// exp(-i H t) for Hermitian H via eigendecomposition.
pub fn expm_hermitian(h: &Mat<C64>, t: f64) -> Result<Mat<C64>, GateError> {
    let scale_h = max_abs(h).max(1.0);
    let defect = hermiticity_defect(h);
    if defect > 1e-10 * scale_h {
        return Err(GateError::Numerical(format!(
            "matrix not Hermitian: defect {defect:.3e} (scale {scale_h:.3e})"
        )));
    }
    let (w, v) = eigh(h)?;
    Ok(unitary_from_eigh(&w, &v, t))
}

/// Rebuild exp(-i H t) from a cached eigendecomposition.
pub fn unitary_from_eigh(w: &[f64], v: &Mat<C64>, t: f64) -> Mat<C64> {
    let n = w.len();
    // V * diag(e^{-i w t}), then * V^dagger
    let mut vd = Mat::zeros(n, n);
    for j in 0..n {
        let ph = C64::from_polar(1.0, -w[j] * t);
        for i in 0..n {
            vd[(i, j)] = v[(i, j)] * ph;
        }
    }
    &vd * &v.adjoint()
}

/// exp(A) for anti-Hermitian A (A = -A^dagger), via exp(A) = exp(-i (iA) * 1).
pub fn expm_antihermitian(a: &Mat<C64>) -> Result<Mat<C64>, GateError> {
    let h = scale(I, a);
    expm_hermitian(&h, 1.0)
}

pub fn unitarity_defect(u: &Mat<C64>) -> f64 {
    let prod = &u.adjoint().to_owned() * u;
    max_abs_diff(&prod, &identity(u.nrows()))
}
