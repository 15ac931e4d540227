//! Hilbert-space algebra for two qubits and two truncated phonon modes.
//!
//! The tensor factor order is fixed once and for all as
//! qubit1 (x) qubit2 (x) mode1 (x) mode2; every builder in the crate goes
//! through [`HilbertLayout::index`] so there is a single source of truth
//! for basis ordering. Qubit basis: index 0 = |0>, sigma_z = |1><1| - |0><0|.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::linalg::{self, c};
use crate::GateError;

pub const N_QUBITS: usize = 2;
pub const N_MODES: usize = 2;

/// Truncation-loss bound used by the thermal-state and displacement guards.
pub const TRUNCATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertLayout {
    /// Phonon cutoff per mode; each mode keeps Fock levels 0..=n_max.
    pub n_max: usize,
}

impl HilbertLayout {
    pub fn new(n_max: usize) -> Result<Self, GateError> {
        if n_max < 1 {
            return Err(GateError::Config("n_max must be >= 1".into()));
        }
        Ok(HilbertLayout { n_max })
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        4 * self.fock_dim() * self.fock_dim()
    }

    /// Flat index of |q1 q2; n1 n2>.
    pub fn index(&self, q1: usize, q2: usize, n1: usize, n2: usize) -> usize {
        let f = self.fock_dim();
        ((q1 * 2 + q2) * f + n1) * f + n2
    }
}

/// Elementary operator labels; ion and mode indices are 1-based as in the
/// physics notation (ion i in {1,2}, mode n in {1,2}).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elem {
    SigmaX(usize),
    SigmaY(usize),
    SigmaZ(usize),
    SigmaPlus(usize),
    SigmaMinus(usize),
    A(usize),
    ADag(usize),
    NumOp(usize),
}

#[derive(Clone, Debug)]
pub struct Operator {
    pub layout: HilbertLayout,
    pub mat: Mat<C64>,
}

impl Operator {
    pub fn new(layout: HilbertLayout, mat: Mat<C64>) -> Self {
        debug_assert_eq!(mat.nrows(), layout.dim());
        debug_assert_eq!(mat.ncols(), layout.dim());
        Operator { layout, mat }
    }

    pub fn zero(layout: HilbertLayout) -> Self {
        Operator::new(layout, linalg::zeros(layout.dim(), layout.dim()))
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        Operator::new(layout, linalg::identity(layout.dim()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let s = linalg::max_abs(&self.mat).max(1.0);
        linalg::hermiticity_defect(&self.mat) <= tol * s
    }

    /// exp(-i H t) with H = self.
    pub fn expm(&self, t: f64) -> Result<Operator, GateError> {
        Ok(Operator::new(self.layout, linalg::expm_hermitian(&self.mat, t)?))
    }

    pub fn expectation(&self, state: &State) -> C64 {
        // Tr(O rho)
        let d = self.layout.dim();
        let mut s = C64::ZERO;
        for i in 0..d {
            for j in 0..d {
                s += self.mat[(i, j)] * state.rho[(j, i)];
            }
        }
        s
    }

    pub fn expectation_vec(&self, psi: &Mat<C64>) -> C64 {
        let d = self.layout.dim();
        let mut s = C64::ZERO;
        for i in 0..d {
            let mut row = C64::ZERO;
            for j in 0..d {
                row += self.mat[(i, j)] * psi[(j, 0)];
            }
            s += psi[(i, 0)].conj() * row;
        }
        s
    }
}

/// Identity-padded tensor embedding of an elementary operator.
pub fn build_elementary(layout: HilbertLayout, which: Elem) -> Result<Operator, GateError> {
    let (idx, on_qubit) = match which {
        Elem::SigmaX(i) | Elem::SigmaY(i) | Elem::SigmaZ(i) | Elem::SigmaPlus(i)
        | Elem::SigmaMinus(i) => (i, true),
        Elem::A(n) | Elem::ADag(n) | Elem::NumOp(n) => (n, false),
    };
    if idx < 1 || idx > 2 {
        return Err(GateError::Config(format!(
            "{}-index {idx} out of range (must be 1 or 2)",
            if on_qubit { "ion" } else { "mode" }
        )));
    }

    let small = match which {
        Elem::SigmaX(_) => {
            let mut m = linalg::zeros(2, 2);
            m[(0, 1)] = c(1.0, 0.0);
            m[(1, 0)] = c(1.0, 0.0);
            m
        }
        Elem::SigmaY(_) => {
            // basis order (|0>, |1>) with sigma_z = diag(-1, +1), so
            // sigma_x sigma_y = i sigma_z and sigma_+ = (sigma_x + i sigma_y)/2
            let mut m = linalg::zeros(2, 2);
            m[(0, 1)] = c(0.0, 1.0);
            m[(1, 0)] = c(0.0, -1.0);
            m
        }
        Elem::SigmaZ(_) => {
            let mut m = linalg::zeros(2, 2);
            m[(0, 0)] = c(-1.0, 0.0);
            m[(1, 1)] = c(1.0, 0.0);
            m
        }
        Elem::SigmaPlus(_) => {
            let mut m = linalg::zeros(2, 2);
            m[(1, 0)] = c(1.0, 0.0); // |1><0|
            m
        }
        Elem::SigmaMinus(_) => {
            let mut m = linalg::zeros(2, 2);
            m[(0, 1)] = c(1.0, 0.0);
            m
        }
        Elem::A(_) => ladder(layout.fock_dim()),
        Elem::ADag(_) => linalg::adjoint(&ladder(layout.fock_dim())),
        Elem::NumOp(_) => {
            let f = layout.fock_dim();
            Mat::from_fn(f, f, |i, j| if i == j { c(i as f64, 0.0) } else { C64::ZERO })
        }
    };

    let f = layout.fock_dim();
    let id2 = linalg::identity(2);
    let idf = linalg::identity(f);
    let mat = match (on_qubit, idx) {
        (true, 1) => linalg::kron(&linalg::kron(&small, &id2), &linalg::identity(f * f)),
        (true, 2) => linalg::kron(&linalg::kron(&id2, &small), &linalg::identity(f * f)),
        (false, 1) => linalg::kron(&linalg::identity(4), &linalg::kron(&small, &idf)),
        (false, 2) => linalg::kron(&linalg::identity(4), &linalg::kron(&idf, &small)),
        _ => unreachable!(),
    };
    Ok(Operator::new(layout, mat))
}

fn ladder(f: usize) -> Mat<C64> {
    let mut m = linalg::zeros(f, f);
    for n in 0..f - 1 {
        m[(n, n + 1)] = c(((n + 1) as f64).sqrt(), 0.0);
    }
    m
}

#[derive(Clone, Debug)]
pub struct State {
    pub layout: HilbertLayout,
    pub rho: Mat<C64>,
}

impl State {
    pub fn from_density(layout: HilbertLayout, rho: Mat<C64>) -> Result<Self, GateError> {
        let s = State { layout, rho };
        s.check_invariants()?;
        Ok(s)
    }

    pub fn pure(layout: HilbertLayout, psi: &Mat<C64>) -> Result<Self, GateError> {
        let d = layout.dim();
        if psi.nrows() != d || psi.ncols() != 1 {
            return Err(GateError::Config("state vector dimension mismatch".into()));
        }
        let rho = Mat::from_fn(d, d, |i, j| psi[(i, 0)] * psi[(j, 0)].conj());
        State::from_density(layout, rho)
    }

    /// |q1 q2> (x) |n1 n2>.
    pub fn basis_ket(layout: HilbertLayout, q1: usize, q2: usize, n1: usize, n2: usize) -> Mat<C64> {
        let mut v = linalg::zeros(layout.dim(), 1);
        v[(layout.index(q1, q2, n1, n2), 0)] = c(1.0, 0.0);
        v
    }

    /// qubit_rho (4x4) tensor phonon_rho ((n_max+1)^2 square).
    pub fn from_qubit_phonon(
        layout: HilbertLayout,
        qubit_rho: &Mat<C64>,
        phonon_rho: &Mat<C64>,
    ) -> Result<Self, GateError> {
        let rho = linalg::kron(qubit_rho, phonon_rho);
        State::from_density(layout, rho)
    }

    pub fn check_invariants(&self) -> Result<(), GateError> {
        // tolerance covers round-off accumulated over long chains of
        // propagation steps and large trajectory averages
        let tr = linalg::trace(&self.rho);
        if (tr.re - 1.0).abs() > 1e-7 || tr.im.abs() > 1e-7 {
            return Err(GateError::Numerical(format!("state trace {tr} != 1")));
        }
        if linalg::hermiticity_defect(&self.rho) > 1e-7 {
            return Err(GateError::Numerical("state not Hermitian".into()));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64, GateError> {
        let (w, _) = linalg::eigh(&self.rho)?;
        Ok(w.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Thermal phonon density matrix rho_th(nbar_1) (x) rho_th(nbar_2),
/// to be tensored with a qubit state via [`State::from_qubit_phonon`].
pub fn thermal_state(
    layout: HilbertLayout,
    nbar_1: f64,
    nbar_2: f64,
) -> Result<Mat<C64>, GateError> {
    let w1 = thermal_weights(layout.fock_dim(), nbar_1)?;
    let w2 = thermal_weights(layout.fock_dim(), nbar_2)?;
    let f = layout.fock_dim();
    Ok(Mat::from_fn(f * f, f * f, |i, j| {
        if i == j {
            c(w1[i / f] * w2[i % f], 0.0)
        } else {
            C64::ZERO
        }
    }))
}

fn thermal_weights(f: usize, nbar: f64) -> Result<Vec<f64>, GateError> {
    if nbar < 0.0 {
        return Err(GateError::Config("nbar must be >= 0".into()));
    }
    if nbar == 0.0 {
        let mut w = vec![0.0; f];
        w[0] = 1.0;
        return Ok(w);
    }
    let q = nbar / (nbar + 1.0);
    let mut w: Vec<f64> = (0..f).map(|n| q.powi(n as i32) / (nbar + 1.0)).collect();
    let total: f64 = w.iter().sum();
    let loss = 1.0 - total;
    if loss > TRUNCATION_TOL {
        return Err(GateError::Numerical(format!(
            "thermal truncation loss {loss:.3e} exceeds {TRUNCATION_TOL:.0e} (nbar={nbar}, n_max={})",
            f - 1
        )));
    }
    for x in w.iter_mut() {
        *x /= total;
    }
    Ok(w)
}

/// Trace out both phonon modes; returns the 4x4 qubit density matrix.
pub fn partial_trace_phonons(s: &State) -> Mat<C64> {
    let f = s.layout.fock_dim();
    let mut out = linalg::zeros(4, 4);
    for qa in 0..4 {
        for qb in 0..4 {
            let mut acc = C64::ZERO;
            for n1 in 0..f {
                for n2 in 0..f {
                    let ia = (qa * f + n1) * f + n2;
                    let ib = (qb * f + n1) * f + n2;
                    acc += s.rho[(ia, ib)];
                }
            }
            out[(qa, qb)] = acc;
        }
    }
    out
}

/// Tr(D(alpha) rho) for the displacement operator of one mode,
/// D(alpha) = exp(alpha a^dag - alpha^* a).
pub fn displacement_expectation(
    s: &State,
    mode: usize,
    alpha: C64,
) -> Result<C64, GateError> {
    let a = build_elementary(s.layout, Elem::A(mode))?;
    let adag = build_elementary(s.layout, Elem::ADag(mode))?;
    // generator alpha a^dag - alpha^* a is anti-Hermitian
    let mut g = linalg::scale(alpha, &adag.mat);
    linalg::axpy(&mut g, -alpha.conj(), &a.mat);
    let d = linalg::expm_antihermitian(&g)?;

    // Guard: the displaced state must not lean on the top Fock level.
    let drd = &(&d * &s.rho) * &d.adjoint().to_owned();
    let tail = top_level_population(s.layout, mode, &s.rho)
        + top_level_population(s.layout, mode, &drd);
    if tail > TRUNCATION_TOL {
        return Err(GateError::Numerical(format!(
            "displacement truncation tail {tail:.3e} exceeds {TRUNCATION_TOL:.0e} (|alpha|={})",
            alpha.norm()
        )));
    }
    Ok(linalg::trace(&(&d * &s.rho)))
}

fn top_level_population(layout: HilbertLayout, mode: usize, rho: &Mat<C64>) -> f64 {
    let f = layout.fock_dim();
    let mut p = 0.0;
    for q in 0..4 {
        for other in 0..f {
            let i = match mode {
                1 => (q * f + (f - 1)) * f + other,
                _ => (q * f + other) * f + (f - 1),
            };
            p += rho[(i, i)].re;
        }
    }
    p
}
