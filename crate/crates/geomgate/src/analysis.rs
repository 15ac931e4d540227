//! Target Bell states, fidelity metrics, closed-form noise predictions,
//! and gate-error sweep assembly.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::linalg::{self, c};
use crate::params::GateParams;
use crate::qcore::{partial_trace_phonons, State};
use crate::GateError;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Bell-state labels; the tilde variants live in the sigma^x (|+->) basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
    PhiTildePlus,
    PhiTildeMinus,
    PsiTildePlus,
    PsiTildeMinus,
}

/// A Bell target together with the sign convention of the coupling that
/// generates it (sgn of the effective J for the drive in use).
#[derive(Debug, Clone, Copy)]
pub struct BellTarget {
    pub label: BellLabel,
    pub sign: f64,
}

impl BellTarget {
    pub fn new(label: BellLabel, sign: f64) -> Self {
        BellTarget { label, sign: sign.signum() }
    }

    /// Sign convention taken from the resolved coupling of `params`.
    pub fn for_params(label: BellLabel, params: &GateParams) -> Self {
        Self::new(label, params.j12)
    }

    pub fn state_vector(&self) -> Mat<C64> {
        bell_state(self.label, self.sign)
    }
}

/// Computational-basis qubit ket |q1 q2> as a 4-vector.
fn zket(q1: usize, q2: usize) -> Mat<C64> {
    let mut v = linalg::zeros(4, 1);
    v[(q1 * 2 + q2, 0)] = c(1.0, 0.0);
    v
}

/// sigma^x-basis ket; sign = +1 for |+>, -1 for |->.
pub fn xket(s1: f64, s2: f64) -> Mat<C64> {
    let mut v = linalg::zeros(4, 1);
    for q1 in 0..2 {
        for q2 in 0..2 {
            let a1 = if q1 == 0 { 1.0 } else { s1.signum() };
            let a2 = if q2 == 0 { 1.0 } else { s2.signum() };
            v[(q1 * 2 + q2, 0)] = c(0.5 * a1 * a2, 0.0);
        }
    }
    v
}

/// The four Bell states of each table as 4-vectors; `sign` is the sign of
/// the generating coupling (tilde-J for the z-basis table, J-ddss for the
/// x-basis one).
pub fn bell_state(label: BellLabel, sign: f64) -> Mat<C64> {
    let s = c(0.0, sign.signum());
    let combine = |a: Mat<C64>, b: Mat<C64>, plus: bool| {
        let mut v = linalg::scale(c(SQRT_HALF, 0.0), &a);
        let phase = if plus { s } else { -s };
        linalg::axpy(&mut v, phase * c(SQRT_HALF, 0.0), &b);
        v
    };
    match label {
        BellLabel::PhiMinus => combine(zket(0, 0), zket(1, 1), false),
        BellLabel::PsiMinus => combine(zket(0, 1), zket(1, 0), false),
        BellLabel::PsiPlus => combine(zket(0, 1), zket(1, 0), true),
        BellLabel::PhiPlus => combine(zket(0, 0), zket(1, 1), true),
        BellLabel::PhiTildeMinus => combine(xket(1.0, 1.0), xket(-1.0, -1.0), false),
        BellLabel::PsiTildeMinus => combine(xket(1.0, -1.0), xket(-1.0, 1.0), false),
        BellLabel::PsiTildePlus => combine(xket(1.0, -1.0), xket(-1.0, 1.0), true),
        BellLabel::PhiTildePlus => combine(xket(1.0, 1.0), xket(-1.0, -1.0), true),
    }
}

/// F = <target| Tr_ph rho |target>.
pub fn bell_fidelity(state: &State, target: &BellTarget) -> Result<f64, GateError> {
    let rho_q = partial_trace_phonons(state);
    let t = target.state_vector();
    let mut f = C64::ZERO;
    for i in 0..4 {
        for j in 0..4 {
            f += t[(i, 0)].conj() * rho_q[(i, j)] * t[(j, 0)];
        }
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Closed-form fidelity of |10> -> |Psi+> under the approximate propagator
/// with a thermal phonon state:
///   F = 1/4 + (1/2) e^{-sum_n k_n (1 - cos delta_n t)}
///       + (1/8) sum_n e^{-4 k_n (1 - cos delta_n t)},
///   k_n = (|F_1n|^2 / delta_n^2) (2 nbar_n + 1).
pub fn thermal_fidelity_closed_form(
    params: &GateParams,
    nbar_1: f64,
    nbar_2: f64,
    t: f64,
) -> Result<f64, GateError> {
    if nbar_1 < 0.0 || nbar_2 < 0.0 {
        return Err(GateError::Config("mean phonon numbers must be >= 0".into()));
    }
    let deltas = params.deltas();
    let nbars = [nbar_1, nbar_2];
    let mut sum_k = 0.0;
    let mut third = 0.0;
    for n in 0..2 {
        let kappa = params.forces[0][n].norm_sqr() / (deltas[n] * deltas[n]) * (2.0 * nbars[n] + 1.0);
        let open = 1.0 - (deltas[n] * t).cos();
        sum_k += kappa * open;
        third += 0.125 * (-4.0 * kappa * open).exp();
    }
    Ok(0.25 + 0.5 * (-sum_k).exp() + third)
}

/// Dressed-state dephasing figures for an O-U process of correlation time
/// tau calibrated to a bare decoherence time T2 under a carrier driving
/// Omega_d.
#[derive(Debug, Clone)]
pub struct DephasingPredictions {
    /// Bare collective dephasing rate Gamma_d = c tau^2 / 4 = 1/(2 T2).
    pub gamma_d: f64,
    /// Dressed-state energy shift Delta-Omega_d.
    pub delta_omega_shift: f64,
    /// Renormalized rate Gamma_d / (1 + (Omega_d tau)^2).
    pub gamma_tilde: f64,
    /// Renormalized decoherence time T2 (1 + (Omega_d tau)^2).
    pub t2_tilde: f64,
    /// Set when Omega_d T2 < 10, outside the derivation's validity.
    pub warning: Option<String>,
}

pub fn dephasing_predictions(t2: f64, tau: f64, omega_d: f64) -> Result<DephasingPredictions, GateError> {
    if !(t2 > 0.0 && tau > 0.0) || omega_d < 0.0 {
        return Err(GateError::Config("dephasing predictions need T2, tau > 0 and Omega_d >= 0".into()));
    }
    let gamma_d = 1.0 / (2.0 * t2);
    let filter = 1.0 + (omega_d * tau) * (omega_d * tau);
    let warning = (omega_d * t2 < 10.0).then(|| {
        format!(
            "Omega_d T2 = {:.2} < 10: outside the Born-Markov validity regime",
            omega_d * t2
        )
    });
    Ok(DephasingPredictions {
        gamma_d,
        delta_omega_shift: omega_d * tau / (4.0 * t2 * filter),
        gamma_tilde: gamma_d / filter,
        t2_tilde: t2 * filter,
        warning,
    })
}

/// One point of a gate-error sweep over the driving strength.
#[derive(Debug, Clone)]
pub struct SweepResultRow {
    pub omega_d: f64,
    pub p: i64,
    pub error: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub noise_kind: String,
    pub noise_magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Rows sorted by driving strength.
    pub rows: Vec<SweepResultRow>,
    /// Index (into `rows`) of the minimum-error point.
    pub min_index: usize,
}

pub fn assemble_sweep(mut rows: Vec<SweepResultRow>) -> Result<SweepResult, GateError> {
    if rows.is_empty() {
        return Err(GateError::Config("sweep has no rows".into()));
    }
    let kind = rows[0].noise_kind.clone();
    for row in &rows {
        if row.noise_kind != kind {
            return Err(GateError::Config(format!(
                "sweep mixes noise kinds {kind:?} and {:?}",
                row.noise_kind
            )));
        }
        if !(0.0..=1.0).contains(&row.error) {
            return Err(GateError::Numerical(format!(
                "gate error {:.3e} outside [0, 1] at p = {}",
                row.error, row.p
            )));
        }
    }
    rows.sort_by(|a, b| a.omega_d.partial_cmp(&b.omega_d).unwrap());
    let min_index = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.error.partial_cmp(&b.1.error).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(SweepResult { rows, min_index })
}
