//! Propagation engines: cached-eigendecomposition exponentials for
//! time-independent Hamiltonians, piecewise-constant stepping for stochastic
//! and time-dependent ones, echo insertion, and Monte-Carlo ensemble
//! averaging.
//!
//! Noisy runs evolve all trajectories side by side as the columns of a
//! dim x n_traj matrix, so each step costs a handful of dense matrix
//! products instead of thousands of small ones. Noise entering linearly
//! (H(x) = H0 + x V) is handled by fitting the step-propagator family
//! x -> e^{-i H(x) dt} with a Chebyshev matrix polynomial once and
//! evaluating it per column; laser-phase noise is applied exactly through
//! the phonon-number conjugation H(phi) = e^{-i phi N} H(0) e^{i phi N}
//! with N = n_1 + n_2.

use faer::Mat;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::hamiltonian::{
    build_dss, build_dss_intensity_noisy, DoubleDriveGenerator, EchoPulse, EchoSpec,
};
use crate::linalg::{self, c};
use crate::noise::{check_dt_guard, ou_step, traj_rng, wiener_step, OUConfig, WienerConfig};
use crate::params::{DriveMode, GateParams};
use crate::qcore::{build_elementary, Elem, HilbertLayout, Operator, State};
use crate::GateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    SingleDrive,
    DoubleDrive,
}

#[derive(Debug, Clone)]
pub enum NoiseModel {
    None,
    /// Collective dephasing O(t)/2 (sigma_1^z + sigma_2^z).
    Dephasing(OUConfig),
    /// Microwave-intensity fluctuation Omega_d -> Omega_d + O(t).
    Intensity(OUConfig),
    /// Laser-phase drift F_in -> F_in e^{i phi(t)}.
    PhaseDrift(WienerConfig),
    /// Intensity fluctuation of the first microwave driving of the
    /// doubly-driven gate.
    FirstDriveIntensity(OUConfig),
}

#[derive(Debug, Clone)]
pub struct PropagationPlan {
    pub kind: HamiltonianKind,
    pub t_g: f64,
    pub steps: usize,
    pub echo: EchoSpec,
    pub noise: NoiseModel,
    pub n_traj: usize,
    pub seed: u64,
}

impl PropagationPlan {
    pub fn new(kind: HamiltonianKind, t_g: f64) -> Self {
        PropagationPlan {
            kind,
            t_g,
            steps: 200,
            echo: EchoSpec::none(),
            noise: NoiseModel::None,
            n_traj: 1000,
            seed: 1,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_g / self.steps as f64
    }

    /// Step index at which the echo pulse is inserted, if any.
    pub fn echo_step(&self) -> Option<usize> {
        if self.echo.pulse == EchoPulse::None {
            return None;
        }
        Some((self.echo.at * self.steps as f64).round() as usize)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if self.steps < 1 {
            return Err(GateError::Config("steps must be >= 1".into()));
        }
        if !(self.t_g > 0.0) {
            return Err(GateError::Config("t_g must be positive".into()));
        }
        if self.n_traj < 1 {
            return Err(GateError::Config("n_traj must be >= 1".into()));
        }
        if self.echo.pulse != EchoPulse::None {
            let pos = self.echo.at * self.steps as f64;
            if (pos - pos.round()).abs() > 1e-9 || pos.round() < 1.0
                || pos.round() > self.steps as f64 - 1.0
            {
                return Err(GateError::Config(format!(
                    "echo at {} of {} steps does not land on an interior step boundary",
                    self.echo.at, self.steps
                )));
            }
        }
        match (&self.kind, &self.noise) {
            (_, NoiseModel::None) => {}
            (HamiltonianKind::SingleDrive, NoiseModel::Dephasing(ou))
            | (HamiltonianKind::SingleDrive, NoiseModel::Intensity(ou)) => {
                check_dt_guard(self.dt(), ou.tau)?;
            }
            (HamiltonianKind::SingleDrive, NoiseModel::PhaseDrift(_)) => {}
            (HamiltonianKind::DoubleDrive, NoiseModel::FirstDriveIntensity(ou)) => {
                check_dt_guard(self.dt(), ou.tau)?;
            }
            (kind, noise) => {
                return Err(GateError::Config(format!(
                    "noise model {noise:?} not applicable to {kind:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct EnsembleResult {
    pub mean_state: State,
    pub per_traj_fidelity: Vec<f64>,
    pub mean_fidelity: f64,
    /// Monte-Carlo standard error of the mean fidelity.
    pub stderr: f64,
}

impl EnsembleResult {
    fn from_columns(
        layout: HilbertLayout,
        psi: &Mat<C64>,
        target_qubit: &Mat<C64>,
    ) -> Result<Self, GateError> {
        check_column_norms(psi)?;
        let fids = qubit_fidelities(layout, psi, target_qubit);
        let n = fids.len();
        let mean: f64 = fids.iter().sum::<f64>() / n as f64;
        let var: f64 = if n > 1 && fids.iter().any(|f| *f != fids[0]) {
            fids.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let stderr = (var / n as f64).sqrt();
        let mut rho = linalg::zeros(layout.dim(), layout.dim());
        matmul_adjoint_acc(&mut rho, psi, psi);
        let rho = linalg::scale(c(1.0 / n as f64, 0.0), &rho);
        Ok(EnsembleResult {
            mean_state: State::from_density(layout, rho)?,
            per_traj_fidelity: fids,
            mean_fidelity: mean,
            stderr,
        })
    }
}

/// Cached eigendecomposition of a time-independent Hamiltonian; the
/// propagator at any t is rebuilt from the spectrum.
pub struct StaticPropagator {
    pub layout: HilbertLayout,
    w: Vec<f64>,
    v: Mat<C64>,
    v_dag: Mat<C64>,
}

impl StaticPropagator {
    pub fn new(h: &Operator) -> Result<Self, GateError> {
        let scale_h = linalg::max_abs(&h.mat).max(1.0);
        let defect = linalg::hermiticity_defect(&h.mat);
        if defect > 1e-10 * scale_h {
            return Err(GateError::Numerical(format!(
                "Hamiltonian not Hermitian: defect {defect:.3e}"
            )));
        }
        let (w, v) = linalg::eigh(&h.mat)?;
        let v_dag = linalg::adjoint(&v);
        Ok(StaticPropagator { layout: h.layout, w, v, v_dag })
    }

    pub fn unitary(&self, t: f64) -> Operator {
        Operator::new(self.layout, linalg::unitary_from_eigh(&self.w, &self.v, t))
    }

    /// U(t) * cols without forming the full propagator.
    pub fn apply(&self, t: f64, cols: &Mat<C64>) -> Mat<C64> {
        let mut y = &self.v_dag * cols;
        for j in 0..y.ncols() {
            for i in 0..y.nrows() {
                y[(i, j)] *= C64::from_polar(1.0, -self.w[i] * t);
            }
        }
        &self.v * &y
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.w
    }
}

/// One-shot exponential; see [`StaticPropagator`] for reuse across times.
pub fn propagate_static(h: &Operator, t: f64) -> Result<Operator, GateError> {
    Ok(StaticPropagator::new(h)?.unitary(t))
}

// ---------------------------------------------------------------------------
// internals
// ---------------------------------------------------------------------------

/// acc += a * b^dagger (used for the ensemble density matrix).
fn matmul_adjoint_acc(acc: &mut Mat<C64>, a: &Mat<C64>, b: &Mat<C64>) {
    let prod = a * &linalg::adjoint(b);
    linalg::axpy(acc, c(1.0, 0.0), &prod);
}

fn check_column_norms(psi: &Mat<C64>) -> Result<(), GateError> {
    for j in 0..psi.ncols() {
        let mut n2 = 0.0;
        for i in 0..psi.nrows() {
            n2 += psi[(i, j)].norm_sqr();
        }
        // round-off accumulates over hundreds of chained matrix
        // exponentials; anything beyond this is a genuine unitarity bug
        if (n2 - 1.0).abs() > 1e-7 {
            return Err(GateError::Numerical(format!(
                "trajectory {j} norm^2 drifted to {n2:.12}"
            )));
        }
    }
    Ok(())
}

/// Fidelity of each column against a 4-component qubit target:
/// F = <target| Tr_ph |psi><psi| |target>.
pub fn qubit_fidelities(layout: HilbertLayout, psi: &Mat<C64>, target: &Mat<C64>) -> Vec<f64> {
    let pd = layout.fock_dim() * layout.fock_dim();
    let mut out = Vec::with_capacity(psi.ncols());
    for j in 0..psi.ncols() {
        let mut fid = 0.0;
        for ph in 0..pd {
            let mut amp = C64::ZERO;
            for q in 0..4 {
                amp += target[(q, 0)].conj() * psi[(q * pd + ph, j)];
            }
            fid += amp.norm_sqr();
        }
        out.push(fid);
    }
    out
}

/// Extract the state vector of a (numerically) pure state.
fn pure_vector(initial: &State) -> Result<Mat<C64>, GateError> {
    // For a pure state rho = |psi><psi|, any column with a nonzero diagonal
    // is proportional to psi; purity tr(rho^2) = sum |rho_ij|^2 for
    // Hermitian rho. This avoids an eigendecomposition that iterative
    // solvers can fail to converge on for exactly rank-1 input.
    let rho = &initial.rho;
    let d = rho.nrows();
    let mut purity = 0.0;
    for i in 0..d {
        for j in 0..d {
            purity += rho[(i, j)].norm_sqr();
        }
    }
    if purity < 1.0 - 1e-9 {
        return Err(GateError::Config(format!(
            "stochastic propagation requires a pure initial state (purity {purity:.6})"
        )));
    }
    let pivot = (0..d).max_by(|&a, &b| rho[(a, a)].re.total_cmp(&rho[(b, b)].re)).unwrap();
    let norm = rho[(pivot, pivot)].re.sqrt();
    Ok(Mat::from_fn(d, 1, |i, _| rho[(i, pivot)] / c(norm, 0.0)))
}

fn replicate_columns(col: &Mat<C64>, n: usize) -> Mat<C64> {
    Mat::from_fn(col.nrows(), n, |i, _| col[(i, 0)])
}

/// Chebyshev matrix-polynomial fit of a one-parameter propagator family
/// U(x) on [-x_max, x_max].
struct ChebFamily {
    coeffs: Vec<Mat<C64>>,
    x_max: f64,
}

impl ChebFamily {
    fn fit(
        x_max: f64,
        order: usize,
        mut u_at: impl FnMut(f64) -> Result<Mat<C64>, GateError>,
    ) -> Result<Self, GateError> {
        debug_assert!(x_max > 0.0);
        let m = order + 4;
        let thetas: Vec<f64> = (0..m).map(|j| PI * (j as f64 + 0.5) / m as f64).collect();
        let us: Vec<Mat<C64>> = thetas
            .iter()
            .map(|&th| u_at(x_max * th.cos()))
            .collect::<Result<_, _>>()?;
        let d = us[0].nrows();
        let mut coeffs = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let norm = if k == 0 { 1.0 / m as f64 } else { 2.0 / m as f64 };
            let mut ck = linalg::zeros(d, d);
            for (j, u) in us.iter().enumerate() {
                let wgt = norm * (k as f64 * thetas[j]).cos();
                linalg::axpy(&mut ck, c(wgt, 0.0), u);
            }
            coeffs.push(ck);
        }
        Ok(ChebFamily { coeffs, x_max })
    }

    /// Column i of the result is U(xs[i]) * psi[:, i]; xs must lie within
    /// [-x_max, x_max] (the caller handles excursions separately).
    fn apply(&self, psi: &Mat<C64>, xs: &[f64]) -> Mat<C64> {
        let (d, n) = (psi.nrows(), psi.ncols());
        debug_assert_eq!(n, xs.len());
        let xi: Vec<f64> = xs.iter().map(|&x| (x / self.x_max).clamp(-1.0, 1.0)).collect();
        let mut t_prev: Vec<f64> = vec![1.0; n];
        let mut t_cur: Vec<f64> = xi.clone();
        let mut out = linalg::zeros(d, n);
        let mut scratch = linalg::zeros(d, n);
        for (k, ck) in self.coeffs.iter().enumerate() {
            let tk: &[f64] = match k {
                0 => &t_prev,
                1 => &t_cur,
                _ => {
                    let next: Vec<f64> = (0..n)
                        .map(|i| 2.0 * xi[i] * t_cur[i] - t_prev[i])
                        .collect();
                    t_prev = std::mem::replace(&mut t_cur, next);
                    &t_cur
                }
            };
            for j in 0..n {
                let s = c(tk[j], 0.0);
                for i in 0..d {
                    scratch[(i, j)] = s * psi[(i, j)];
                }
            }
            let prod = ck * &scratch;
            linalg::axpy(&mut out, c(1.0, 0.0), &prod);
        }
        out
    }
}

/// Shared stepping loop for noise entering the Hamiltonian linearly,
/// H(x) = H0 + x V, with an O-U sample path per trajectory.
#[allow(clippy::too_many_arguments)]
fn step_linear_ou(
    psi: &mut Mat<C64>,
    mut u_at: impl FnMut(f64) -> Result<Mat<C64>, GateError>,
    ou: &OUConfig,
    dt: f64,
    steps: usize,
    echo_step: Option<usize>,
    echo_mat: Option<&Mat<C64>>,
    seed: u64,
    order: usize,
    refit_per_step: bool,
) -> Result<(), GateError> {
    let n = psi.ncols();
    let sigma = (ou.c * ou.tau / 2.0).sqrt();
    let x_max = (8.0 * sigma + ou.x0.abs()).max(1.0);
    let mut cheb = if refit_per_step { None } else { Some(ChebFamily::fit(x_max, order, &mut u_at)?) };
    let mut rngs: Vec<_> = (0..n).map(|i| traj_rng(seed, i as u64)).collect();
    let mut xs = vec![ou.x0; n];
    for step in 0..steps {
        if echo_step == Some(step) {
            if let Some(e) = echo_mat {
                *psi = e * &*psi;
            }
        }
        if refit_per_step {
            cheb = Some(ChebFamily::fit(x_max, order, &mut u_at)?);
        }
        let cf = cheb.as_ref().unwrap();
        let next = cf.apply(psi, &xs);
        // out-of-range samples (vanishingly rare at 8 sigma) get the exact
        // per-column propagator instead of the fit
        let mut fixed = next;
        for (j, &x) in xs.iter().enumerate() {
            if x.abs() > x_max {
                let u = u_at(x)?;
                for i in 0..u.nrows() {
                    let mut acc = C64::ZERO;
                    for l in 0..u.ncols() {
                        acc += u[(i, l)] * psi[(l, j)];
                    }
                    fixed[(i, j)] = acc;
                }
            }
        }
        *psi = fixed;
        for j in 0..n {
            xs[j] = ou_step(xs[j], dt, ou, &mut rngs[j]);
        }
    }
    Ok(())
}

/// exp(i w dt) primitive: int_0^dt e^{i w u} du, series near w = 0.
fn phi_int(w: f64, dt: f64) -> C64 {
    let x = w * dt;
    if x.abs() < 1e-6 {
        c(dt, 0.0)
            * (c(1.0, 0.0) + c(0.0, x / 2.0) - c(x * x / 6.0, 0.0) - c(0.0, x * x * x / 24.0))
    } else {
        (C64::from_polar(1.0, x) - 1.0) / c(0.0, w)
    }
}

/// int_0^dt u^k e^{i w u} du.
fn psi_moment(w: f64, dt: f64, k: usize) -> C64 {
    let x = w * dt;
    if x.abs() < 1e-3 {
        // series sum_m (i w)^m dt^{k+m+1} / (m! (k+m+1))
        let mut s = C64::ZERO;
        let mut pref = c(1.0, 0.0); // (i w)^m / m!
        let mut dpow = dt.powi(k as i32 + 1);
        for m in 0..8 {
            s += pref * c(dpow / (k + m + 1) as f64, 0.0);
            pref *= c(0.0, w) / (m as f64 + 1.0);
            dpow *= dt;
        }
        s
    } else {
        // recursion psi_k = (dt^k e^{i w dt} - k psi_{k-1}) / (i w)
        let iw = c(0.0, w);
        let e = C64::from_polar(1.0, x);
        let mut psi = phi_int(w, dt);
        let mut dpow = 1.0;
        for j in 1..=k {
            dpow *= dt;
            psi = (e * c(dpow, 0.0) - psi * c(j as f64, 0.0)) / iw;
        }
        psi
    }
}

/// int_0^dt e^{i wa u} (e^{i wb u} - 1)/(i wb) du (the inner-then-outer
/// ordered double integral for one frequency pair).
fn t_pair(wa: f64, wb: f64, dt: f64) -> C64 {
    if (wb * dt).abs() < 1e-6 {
        psi_moment(wa, dt, 1)
            + c(0.0, wb / 2.0) * psi_moment(wa, dt, 2)
            - c(wb * wb / 6.0, 0.0) * psi_moment(wa, dt, 3)
    } else {
        (phi_int(wa + wb, dt) - phi_int(wa, dt)) / c(0.0, wb)
    }
}

fn conj_expsum(g: &crate::hamiltonian::ExpSum) -> crate::hamiltonian::ExpSum {
    crate::hamiltonian::ExpSum {
        terms: g.terms.iter().map(|&(a, w)| (a.conj(), -w)).collect(),
    }
}

/// Second-order Magnus stepper for the doubly-driven gate. The Hamiltonian
/// is a sum of time-independent matrices with exponential-sum amplitudes,
/// so both the step integral and the ordered double integral of every
/// channel pair are exact; the pair commutators are precomputed once.
/// The noise contribution stays first order (its cross term with the force
/// channels is smaller than the force-force term by x/|F| ~ 1e-2).
struct DoubleDriveStepper {
    gen: DoubleDriveGenerator,
    channels: Vec<crate::hamiltonian::ExpSum>,
    /// (mu, nu, [M_mu, M_nu]) for mu < nu with non-vanishing commutator
    comms: Vec<(usize, usize, Mat<C64>)>,
}

impl DoubleDriveStepper {
    fn new(gen: DoubleDriveGenerator) -> Self {
        let mut mats: Vec<&Mat<C64>> = Vec::new();
        let mut channels = Vec::new();
        for term in &gen.force_terms {
            mats.push(&term.mat);
            channels.push(term.g.clone());
            mats.push(&term.mat_dag);
            channels.push(conj_expsum(&term.g));
        }
        let mut comms = Vec::new();
        let scale: f64 = mats.iter().map(|m| linalg::max_abs(m)).fold(0.0, f64::max);
        for mu in 0..mats.len() {
            for nu in mu + 1..mats.len() {
                let cm = linalg::commutator(mats[mu], mats[nu]);
                if linalg::max_abs(&cm) > 1e-14 * scale * scale {
                    comms.push((mu, nu, cm));
                }
            }
        }
        DoubleDriveStepper { gen, channels, comms }
    }

    /// Scalar weights of the commutator contributions for a fixed substep
    /// length: the coefficient of [M_mu, M_nu] in the second-order Magnus
    /// term over [t0, t0 + dt] is an exponential sum in t0,
    ///   -1/2 (S_{mu nu} - S_{nu mu})
    ///     = sum_{a,b} -1/2 a b (T(wa, wb) - T(wb, wa)) e^{i (wa + wb) t0},
    /// with T the ordered double integral over one substep. Precomputing
    /// these sums leaves only one phase evaluation per pair and substep.
    fn pair_weights(&self, dt: f64) -> Vec<crate::hamiltonian::ExpSum> {
        self.comms
            .iter()
            .map(|(mu, nu, _)| {
                let mut terms = Vec::new();
                for &(a, wa) in &self.channels[*mu].terms {
                    for &(b, wb) in &self.channels[*nu].terms {
                        let coeff = c(-0.5, 0.0) * a * b * (t_pair(wa, wb, dt) - t_pair(wb, wa, dt));
                        terms.push((coeff, wa + wb));
                    }
                }
                crate::hamiltonian::ExpSum { terms }.compacted()
            })
            .collect()
    }

    /// Deterministic step generator P - (1/2) int int [H(t), H(s)], plus the
    /// first-order noise generator Q; `weights` must come from
    /// [`Self::pair_weights`] for dt = t1 - t0.
    fn step_generators_cached(
        &self,
        t0: f64,
        t1: f64,
        weights: &[crate::hamiltonian::ExpSum],
    ) -> (Mat<C64>, Mat<C64>) {
        let (mut p, q) = self.gen.step_generators(t0, t1);
        for ((_, _, cm), w) in self.comms.iter().zip(weights) {
            linalg::axpy(&mut p, w.eval(t0), cm);
        }
        (p, q)
    }

    /// Per-substep (P, Q) generators of one noise step.
    fn step_generator_list(&self, t0: f64, t1: f64, nsub: usize) -> Vec<(Mat<C64>, Mat<C64>)> {
        let dts = (t1 - t0) / nsub as f64;
        let weights = self.pair_weights(dts);
        (0..nsub)
            .map(|s| {
                let ta = t0 + s as f64 * dts;
                self.step_generators_cached(ta, ta + dts, &weights)
            })
            .collect()
    }

    /// Propagator with the noise sample frozen at x, composed from cached
    /// substep generators.
    fn unitary_from_generators(
        list: &[(Mat<C64>, Mat<C64>)],
        x: f64,
    ) -> Result<Mat<C64>, GateError> {
        let mut u: Option<Mat<C64>> = None;
        for (p, q) in list {
            let us = if x != 0.0 {
                let mut g = p.clone();
                linalg::axpy(&mut g, c(x, 0.0), q);
                linalg::expm_antihermitian(&g)?
            } else {
                linalg::expm_antihermitian(p)?
            };
            u = Some(match u {
                None => us,
                Some(prev) => &us * &prev,
            });
        }
        u.ok_or_else(|| GateError::Config("empty substep list".into()))
    }

    /// Number of substeps per noise step so that the deterministic
    /// resolution is at least [`DD_EFFECTIVE_STEPS`] over the whole gate;
    /// the residual third-order error is then < 2e-6 regardless of the
    /// (much coarser) noise grid.
    fn substeps(plan_steps: usize) -> usize {
        DD_EFFECTIVE_STEPS.div_ceil(plan_steps).max(1)
    }

    /// Propagator of one noise step (noise sample frozen at x), composed
    /// from `nsub` second-order Magnus substeps.
    fn step_unitary(&self, t0: f64, t1: f64, x: f64, nsub: usize) -> Result<Mat<C64>, GateError> {
        Self::unitary_from_generators(&self.step_generator_list(t0, t1, nsub), x)
    }
}

/// Deterministic time resolution of the double-drive stepper (see
/// `DoubleDriveStepper::substeps`).
const DD_EFFECTIVE_STEPS: usize = 6400;

fn collective_pauli(layout: HilbertLayout, which: fn(usize) -> Elem) -> Result<Mat<C64>, GateError> {
    let d = layout.dim();
    let mut m = linalg::zeros(d, d);
    for i in 1..=2 {
        linalg::axpy(&mut m, c(1.0, 0.0), &build_elementary(layout, which(i))?.mat);
    }
    Ok(m)
}

/// Total phonon number nu_j = n_1 + n_2 of each basis state, the generator
/// of the laser-phase conjugation.
fn phonon_number_diagonal(layout: HilbertLayout) -> Vec<f64> {
    let f = layout.fock_dim();
    let mut nu = vec![0.0; layout.dim()];
    for q in 0..4 {
        for n1 in 0..f {
            for n2 in 0..f {
                nu[layout.index(q / 2, q % 2, n1, n2)] = (n1 + n2) as f64;
            }
        }
    }
    nu
}

/// Monte-Carlo propagation of an ensemble of noisy trajectories.
pub fn propagate_noisy(
    plan: &PropagationPlan,
    params: &GateParams,
    layout: HilbertLayout,
    initial: &State,
    target_qubit: &Mat<C64>,
) -> Result<EnsembleResult, GateError> {
    plan.validate()?;
    let want_mode = match plan.kind {
        HamiltonianKind::SingleDrive => DriveMode::SingleDrive,
        HamiltonianKind::DoubleDrive => DriveMode::DoubleDrive,
    };
    if params.mode != want_mode {
        return Err(GateError::Config("plan kind does not match params drive mode".into()));
    }
    let psi0 = pure_vector(initial)?;
    let dt = plan.dt();
    let echo_mat = match plan.echo.pulse {
        EchoPulse::None => None,
        _ => Some(plan.echo.operator(layout)?.mat),
    };
    let echo_step = plan.echo_step();

    match (&plan.kind, &plan.noise) {
        (HamiltonianKind::SingleDrive, NoiseModel::None) => {
            let sp = StaticPropagator::new(&build_dss(params, layout)?)?;
            let mut psi = psi0;
            match (echo_step, &echo_mat) {
                (Some(s), Some(e)) => {
                    psi = sp.apply(s as f64 * dt, &psi);
                    psi = e * &psi;
                    psi = sp.apply((plan.steps - s) as f64 * dt, &psi);
                }
                _ => psi = sp.apply(plan.t_g, &psi),
            }
            let cols = replicate_columns(&psi, plan.n_traj);
            EnsembleResult::from_columns(layout, &cols, target_qubit)
        }
        (HamiltonianKind::SingleDrive, NoiseModel::Dephasing(ou)) => {
            let h0 = build_dss(params, layout)?.mat;
            let v = linalg::scale(c(0.5, 0.0), &collective_pauli(layout, Elem::SigmaZ)?);
            let mut psi = replicate_columns(&psi0, plan.n_traj);
            let u_at = |x: f64| {
                let mut h = h0.clone();
                linalg::axpy(&mut h, c(x, 0.0), &v);
                linalg::expm_hermitian(&h, dt)
            };
            step_linear_ou(
                &mut psi, u_at, ou, dt, plan.steps, echo_step, echo_mat.as_ref(), plan.seed, 10,
                false,
            )?;
            EnsembleResult::from_columns(layout, &psi, target_qubit)
        }
        (HamiltonianKind::SingleDrive, NoiseModel::Intensity(ou)) => {
            let mut psi = replicate_columns(&psi0, plan.n_traj);
            let u_at = |x: f64| {
                let h = build_dss_intensity_noisy(params, layout, x)?;
                linalg::expm_hermitian(&h.mat, dt)
            };
            step_linear_ou(
                &mut psi, u_at, ou, dt, plan.steps, echo_step, echo_mat.as_ref(), plan.seed, 10,
                false,
            )?;
            EnsembleResult::from_columns(layout, &psi, target_qubit)
        }
        (HamiltonianKind::SingleDrive, NoiseModel::PhaseDrift(w)) => {
            let sp = StaticPropagator::new(&build_dss(params, layout)?)?;
            let u0 = sp.unitary(dt).mat;
            let nu = phonon_number_diagonal(layout);
            let n = plan.n_traj;
            let mut psi = replicate_columns(&psi0, n);
            let mut rngs: Vec<_> = (0..n).map(|i| traj_rng(plan.seed, i as u64)).collect();
            let mut phis = vec![w.x0; n];
            for step in 0..plan.steps {
                if echo_step == Some(step) {
                    if let Some(e) = &echo_mat {
                        psi = e * &psi;
                    }
                }
                // psi_i <- e^{-i phi_i N} U0 e^{i phi_i N} psi_i
                for j in 0..n {
                    for i in 0..psi.nrows() {
                        psi[(i, j)] *= C64::from_polar(1.0, phis[j] * nu[i]);
                    }
                }
                psi = &u0 * &psi;
                for j in 0..n {
                    for i in 0..psi.nrows() {
                        psi[(i, j)] *= C64::from_polar(1.0, -phis[j] * nu[i]);
                    }
                }
                for j in 0..n {
                    phis[j] = wiener_step(phis[j], dt, w, &mut rngs[j]);
                }
            }
            EnsembleResult::from_columns(layout, &psi, target_qubit)
        }
        (HamiltonianKind::DoubleDrive, NoiseModel::None) => {
            let stepper = DoubleDriveStepper::new(DoubleDriveGenerator::build(params, layout)?);
            let mut psi = psi0;
            for step in 0..plan.steps {
                if echo_step == Some(step) {
                    if let Some(e) = &echo_mat {
                        psi = e * &psi;
                    }
                }
                let u = stepper.step_unitary(
                    step as f64 * dt,
                    (step + 1) as f64 * dt,
                    0.0,
                    DoubleDriveStepper::substeps(plan.steps),
                )?;
                psi = &u * &psi;
            }
            let cols = replicate_columns(&psi, plan.n_traj);
            EnsembleResult::from_columns(layout, &cols, target_qubit)
        }
        (HamiltonianKind::DoubleDrive, NoiseModel::FirstDriveIntensity(ou)) => {
            let stepper = DoubleDriveStepper::new(DoubleDriveGenerator::build(params, layout)?);
            let n = plan.n_traj;
            let mut psi = replicate_columns(&psi0, n);
            let mut rngs: Vec<_> = (0..n).map(|i| traj_rng(plan.seed, i as u64)).collect();
            let mut xs = vec![ou.x0; n];
            let sigma = (ou.c * ou.tau / 2.0).sqrt();
            let x_max = (8.0 * sigma + ou.x0.abs()).max(1.0);
            for step in 0..plan.steps {
                if echo_step == Some(step) {
                    if let Some(e) = &echo_mat {
                        psi = e * &psi;
                    }
                }
                let (t0, t1) = (step as f64 * dt, (step + 1) as f64 * dt);
                let nsub = DoubleDriveStepper::substeps(plan.steps);
                let gens = stepper.step_generator_list(t0, t1, nsub);
                let u_at = |x: f64| DoubleDriveStepper::unitary_from_generators(&gens, x);
                let cheb = ChebFamily::fit(x_max, 6, u_at)?;
                let next = cheb.apply(&psi, &xs);
                let mut fixed = next;
                for (j, &x) in xs.iter().enumerate() {
                    if x.abs() > x_max {
                        let u = DoubleDriveStepper::unitary_from_generators(&gens, x)?;
                        for i in 0..u.nrows() {
                            let mut acc = C64::ZERO;
                            for l in 0..u.ncols() {
                                acc += u[(i, l)] * psi[(l, j)];
                            }
                            fixed[(i, j)] = acc;
                        }
                    }
                }
                psi = fixed;
                for j in 0..n {
                    xs[j] = ou_step(xs[j], dt, ou, &mut rngs[j]);
                }
            }
            EnsembleResult::from_columns(layout, &psi, target_qubit)
        }
        _ => unreachable!("validate() rejects incompatible kind/noise pairs"),
    }
}

/// Noiseless evolution sampled at every step boundary: column k of the
/// returned matrix is the state at time k * plan.dt(). An echo pulse from
/// the plan is inserted at its step boundary.
pub fn noiseless_time_series(
    plan: &PropagationPlan,
    params: &GateParams,
    layout: HilbertLayout,
    initial: &State,
) -> Result<(Vec<f64>, Mat<C64>), GateError> {
    plan.validate()?;
    if !matches!(plan.noise, NoiseModel::None) {
        return Err(GateError::Config("time series supports only noiseless plans".into()));
    }
    let want_mode = match plan.kind {
        HamiltonianKind::SingleDrive => DriveMode::SingleDrive,
        HamiltonianKind::DoubleDrive => DriveMode::DoubleDrive,
    };
    if params.mode != want_mode {
        return Err(GateError::Config("plan kind does not match params drive mode".into()));
    }
    let psi0 = pure_vector(initial)?;
    let dt = plan.dt();
    let d = layout.dim();
    let echo_mat = match plan.echo.pulse {
        EchoPulse::None => None,
        _ => Some(plan.echo.operator(layout)?.mat),
    };
    let echo_step = plan.echo_step();
    let times: Vec<f64> = (0..=plan.steps).map(|k| k as f64 * dt).collect();
    let mut cols = linalg::zeros(d, plan.steps + 1);
    let mut psi = psi0;
    let mut store = |k: usize, v: &Mat<C64>| {
        for i in 0..d {
            cols[(i, k)] = v[(i, 0)];
        }
    };
    store(0, &psi);
    match plan.kind {
        HamiltonianKind::SingleDrive => {
            let sp = StaticPropagator::new(&build_dss(params, layout)?)?;
            for step in 0..plan.steps {
                if echo_step == Some(step) {
                    if let Some(e) = &echo_mat {
                        psi = e * &psi;
                    }
                }
                psi = sp.apply(dt, &psi);
                store(step + 1, &psi);
            }
        }
        HamiltonianKind::DoubleDrive => {
            let stepper = DoubleDriveStepper::new(DoubleDriveGenerator::build(params, layout)?);
            let nsub = DoubleDriveStepper::substeps(plan.steps);
            for step in 0..plan.steps {
                if echo_step == Some(step) {
                    if let Some(e) = &echo_mat {
                        psi = e * &psi;
                    }
                }
                let u = stepper.step_unitary(step as f64 * dt, (step + 1) as f64 * dt, 0.0, nsub)?;
                psi = &u * &psi;
                store(step + 1, &psi);
            }
        }
    }
    check_column_norms(&cols)?;
    Ok((times, cols))
}

/// Sequential gates under a persisting laser-phase drift: the Wiener phase
/// is quasi-constant within each gate and updated by dt = t_g between
/// gates; every gate starts from the fresh initial state. Returns the
/// per-gate fidelities.
pub fn propagate_sequential_gates(
    plan: &PropagationPlan,
    params: &GateParams,
    layout: HilbertLayout,
    initial: &State,
    target_qubit: &Mat<C64>,
    n_gates: usize,
) -> Result<Vec<f64>, GateError> {
    plan.validate()?;
    let w = match (&plan.kind, &plan.noise) {
        (HamiltonianKind::SingleDrive, NoiseModel::PhaseDrift(w)) => *w,
        _ => {
            return Err(GateError::Config(
                "sequential gates require a single-drive plan with Wiener phase noise".into(),
            ))
        }
    };
    let sp = StaticPropagator::new(&build_dss(params, layout)?)?;
    let u_gate = match plan.echo.pulse {
        EchoPulse::None => sp.unitary(plan.t_g).mat,
        _ => {
            let e = plan.echo.operator(layout)?.mat;
            let u1 = sp.unitary(plan.echo.at * plan.t_g).mat;
            let u2 = sp.unitary((1.0 - plan.echo.at) * plan.t_g).mat;
            &u2 * &(&e * &u1)
        }
    };
    let psi0 = pure_vector(initial)?;
    let nu = phonon_number_diagonal(layout);
    let d = layout.dim();
    let mut rng = traj_rng(plan.seed, 0);
    let mut phi = w.x0;
    let mut fids = Vec::with_capacity(n_gates);
    for _ in 0..n_gates {
        let mut v = Mat::from_fn(d, 1, |i, _| psi0[(i, 0)] * C64::from_polar(1.0, phi * nu[i]));
        v = &u_gate * &v;
        for i in 0..d {
            v[(i, 0)] *= C64::from_polar(1.0, -phi * nu[i]);
        }
        check_column_norms(&v)?;
        fids.push(qubit_fidelities(layout, &v, target_qubit)[0]);
        phi = wiener_step(phi, plan.t_g, &w, &mut rng);
    }
    Ok(fids)
}

/// Phase-space quadrature trajectories (<x~>, <p~>) of both modes, with
/// x~ = (a + a^dag)/sqrt(2) and p~ = -i (a - a^dag)/sqrt(2).
pub fn phase_space_trajectory(
    params: &GateParams,
    layout: HilbertLayout,
    initial: &State,
    times: &[f64],
) -> Result<[Vec<(f64, f64)>; 2], GateError> {
    for &t in times {
        if t < 0.0 || t > params.t_g * (1.0 + 1e-9) {
            return Err(GateError::Config(format!("time {t:.3e} outside [0, t_g]")));
        }
    }
    let h = build_dss(params, layout)?;
    let (w, v) = linalg::eigh(&h.mat)?;
    let vd = linalg::adjoint(&v);
    let rho_e = &vd * &(&initial.rho * &v);
    let d = layout.dim();
    let mut out: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for mode in 1..=2 {
        let a = build_elementary(layout, Elem::A(mode))?;
        let a_e = &vd * &(&a.mat * &v);
        // <a>(t) = Tr(rho U^dag a U) = sum_{k,j} M_{kj} e^{i(w_k - w_j)t}
        let m = Mat::from_fn(d, d, |k, j| rho_e[(j, k)] * a_e[(k, j)]);
        let traj = &mut out[mode - 1];
        for &t in times {
            let p: Vec<C64> = (0..d).map(|j| C64::from_polar(1.0, -w[j] * t)).collect();
            let mut val = C64::ZERO;
            for k in 0..d {
                let mut row = C64::ZERO;
                for j in 0..d {
                    row += m[(k, j)] * p[j];
                }
                val += p[k].conj() * row;
            }
            let sqrt2 = 2.0f64.sqrt();
            traj.push((sqrt2 * val.re, sqrt2 * val.im));
        }
    }
    Ok(out)
}
