//! Hamiltonian builders in the frames used for numerics.
//!
//! Single-drive gates are built in the frame where the driven single-sideband
//! Hamiltonian is time independent:
//!   H'_dss = sum_n delta_n a_n^dag a_n + sum_i (Omega_d/2) sigma_i^x
//!          + sum_{i,n} (F_in sigma_i^+ a_n + H.c.).
//! The doubly-driven gate is built in the double dressed interaction picture,
//! where every coefficient function is a finite sum of complex exponentials;
//! [`ExpSum`] keeps that structure explicit so propagators can integrate the
//! coefficients exactly per step.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::linalg::{self, c};
use crate::params::{DriveMode, GateParams};
use crate::qcore::{build_elementary, Elem, HilbertLayout, Operator};
use crate::GateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoPulse {
    None,
    /// sigma^z_1 sigma^z_2, used with the single-drive (sigma^x sigma^x) gate.
    SigmaZPair,
    /// sigma^y_1 sigma^y_2, used with the double-drive (sigma^z sigma^z) gate.
    SigmaYPair,
}

/// Spin-echo specification; the pulse is inserted at `at` * t_g (the paper
/// always uses 1/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoSpec {
    pub pulse: EchoPulse,
    pub at: f64,
}

impl EchoSpec {
    pub fn none() -> Self {
        EchoSpec { pulse: EchoPulse::None, at: 0.5 }
    }
    pub fn halfway(pulse: EchoPulse) -> Self {
        EchoSpec { pulse, at: 0.5 }
    }

    pub fn operator(&self, layout: HilbertLayout) -> Result<Operator, GateError> {
        match self.pulse {
            EchoPulse::None => Ok(Operator::identity(layout)),
            EchoPulse::SigmaZPair => {
                let z1 = build_elementary(layout, Elem::SigmaZ(1))?;
                let z2 = build_elementary(layout, Elem::SigmaZ(2))?;
                Ok(Operator::new(layout, &z1.mat * &z2.mat))
            }
            EchoPulse::SigmaYPair => {
                let y1 = build_elementary(layout, Elem::SigmaY(1))?;
                let y2 = build_elementary(layout, Elem::SigmaY(2))?;
                Ok(Operator::new(layout, &y1.mat * &y2.mat))
            }
        }
    }
}

fn check_single_drive(params: &GateParams) -> Result<(), GateError> {
    if params.mode != DriveMode::SingleDrive {
        return Err(GateError::Config("single-drive Hamiltonian requested for double-drive params".into()));
    }
    Ok(())
}

/// Time-independent driven single-sideband Hamiltonian H'_dss.
pub fn build_dss(params: &GateParams, layout: HilbertLayout) -> Result<Operator, GateError> {
    check_single_drive(params)?;
    build_dss_phase_noisy(params, layout, 0.0)
}

/// H'_dss with the laser phase offset: F_in -> F_in e^{i phi}.
pub fn build_dss_phase_noisy(
    params: &GateParams,
    layout: HilbertLayout,
    phi: f64,
) -> Result<Operator, GateError> {
    let d = layout.dim();
    let mut h = linalg::zeros(d, d);
    let deltas = params.deltas();
    for n in 1..=2 {
        let nop = build_elementary(layout, Elem::NumOp(n))?;
        linalg::axpy(&mut h, c(deltas[n - 1], 0.0), &nop.mat);
    }
    for i in 1..=2 {
        let sx = build_elementary(layout, Elem::SigmaX(i))?;
        linalg::axpy(&mut h, c(params.omega_d / 2.0, 0.0), &sx.mat);
    }
    let phase = C64::from_polar(1.0, phi);
    for i in 1..=2 {
        let sp = build_elementary(layout, Elem::SigmaPlus(i))?;
        for n in 1..=2 {
            let a = build_elementary(layout, Elem::A(n))?;
            let f = params.forces[i - 1][n - 1] * phase;
            let spa = &sp.mat * &a.mat;
            linalg::axpy(&mut h, f, &spa);
            let adsm = linalg::adjoint(&spa);
            linalg::axpy(&mut h, C64::new(1.0, 0.0), &linalg::scale(f.conj(), &adsm));
        }
    }
    Ok(Operator::new(layout, h))
}

/// H'_dss with a microwave-intensity fluctuation: Omega_d -> Omega_d + dOmega.
pub fn build_dss_intensity_noisy(
    params: &GateParams,
    layout: HilbertLayout,
    d_omega: f64,
) -> Result<Operator, GateError> {
    check_single_drive(params)?;
    if d_omega.abs() >= params.omega_d {
        return Err(GateError::Config(format!(
            "intensity fluctuation {d_omega:.3e} not small against Omega_d {:.3e}; noise config mis-scaled?",
            params.omega_d
        )));
    }
    let mut op = build_dss(params, layout)?;
    for i in 1..=2 {
        let sx = build_elementary(layout, Elem::SigmaX(i))?;
        linalg::axpy(&mut op.mat, c(d_omega / 2.0, 0.0), &sx.mat);
    }
    Ok(op)
}

/// Compose the two gate halves with the echo pulse in between.
pub fn apply_echo(
    u_first_half: &Operator,
    u_second_half: &Operator,
    echo: &EchoSpec,
    layout: HilbertLayout,
) -> Result<Operator, GateError> {
    if u_first_half.mat.nrows() != layout.dim() || u_second_half.mat.nrows() != layout.dim() {
        return Err(GateError::Config("echo composition: dimension mismatch".into()));
    }
    let e = echo.operator(layout)?;
    Ok(Operator::new(layout, &u_second_half.mat * &(&e.mat * &u_first_half.mat)))
}

// ---------------------------------------------------------------------------
// Exponential sums and the doubly-driven Hamiltonian
// ---------------------------------------------------------------------------

/// A finite sum  sum_k A_k e^{i w_k t}  with complex amplitudes.
#[derive(Debug, Clone, Default)]
pub struct ExpSum {
    pub terms: Vec<(C64, f64)>,
}

impl ExpSum {
    pub fn constant(a: C64) -> Self {
        ExpSum { terms: vec![(a, 0.0)] }
    }

    pub fn cos(w: f64) -> Self {
        ExpSum { terms: vec![(c(0.5, 0.0), w), (c(0.5, 0.0), -w)] }
    }

    pub fn sin(w: f64) -> Self {
        ExpSum { terms: vec![(c(0.0, -0.5), w), (c(0.0, 0.5), -w)] }
    }

    pub fn scaled(&self, s: C64) -> Self {
        ExpSum { terms: self.terms.iter().map(|&(a, w)| (s * a, w)).collect() }
    }

    pub fn plus(&self, other: &ExpSum) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        ExpSum { terms }.compacted()
    }

    pub fn times(&self, other: &ExpSum) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(a, wa) in &self.terms {
            for &(b, wb) in &other.terms {
                terms.push((a * b, wa + wb));
            }
        }
        ExpSum { terms }.compacted()
    }

    /// Multiply by e^{i w t}.
    pub fn rotated(&self, w: f64) -> Self {
        ExpSum { terms: self.terms.iter().map(|&(a, wk)| (a, wk + w)).collect() }
    }

    pub fn compacted(mut self) -> Self {
        self.terms.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
        let mut out: Vec<(C64, f64)> = Vec::with_capacity(self.terms.len());
        for (a, w) in self.terms {
            match out.last_mut() {
                Some((a0, w0)) if (*w0 - w).abs() < 1e-9 => *a0 += a,
                _ => out.push((a, w)),
            }
        }
        out.retain(|(a, _)| a.norm() > 1e-300);
        ExpSum { terms: out }
    }

    pub fn eval(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|&(a, w)| a * C64::from_polar(1.0, w * t))
            .sum()
    }

    /// Exact integral over [t0, t1].
    pub fn integral(&self, t0: f64, t1: f64) -> C64 {
        let dt = t1 - t0;
        let mut s = C64::ZERO;
        for &(a, w) in &self.terms {
            let x = w * dt;
            // int_{t0}^{t1} e^{iwt} dt = e^{iw t0} * (e^{iw dt} - 1)/(iw)
            let factor = if x.abs() < 1e-8 {
                // series of (e^{ix}-1)/(iw) = dt (1 + ix/2 - x^2/6 + ...)
                c(dt, 0.0) * (c(1.0, 0.0) + c(0.0, x / 2.0) - c(x * x / 6.0, 0.0))
            } else {
                (C64::from_polar(1.0, x) - 1.0) / c(0.0, w)
            };
            s += a * C64::from_polar(1.0, w * t0) * factor;
        }
        s
    }
}

/// One contribution  g(t) M + g(t)^* M^dagger  to a time-dependent Hamiltonian.
#[derive(Clone)]
pub struct DriveTerm {
    pub mat: Mat<C64>,
    pub mat_dag: Mat<C64>,
    pub g: ExpSum,
}

impl DriveTerm {
    fn new(mat: Mat<C64>, g: ExpSum) -> Self {
        let mat_dag = linalg::adjoint(&mat);
        DriveTerm { mat, mat_dag, g }
    }
}

/// The doubly-driven single-sideband Hamiltonian in the double dressed
/// interaction picture, split into deterministic force terms and the
/// intensity-noise terms of the first driving (scaled by the noise sample x):
///   H(t, x) = sum_m [g_m(t) M_m + H.c.] + x * sum_m [h_m(t) N_m + H.c.].
pub struct DoubleDriveGenerator {
    pub layout: HilbertLayout,
    pub force_terms: Vec<DriveTerm>,
    pub noise_terms: Vec<DriveTerm>,
}

impl DoubleDriveGenerator {
    pub fn build(params: &GateParams, layout: HilbertLayout) -> Result<Self, GateError> {
        if params.mode != DriveMode::DoubleDrive {
            return Err(GateError::Config("double-drive generator requires double-drive params".into()));
        }
        // the laser sits on the dressed sideband: the bare detunings that
        // enter the phases are delta_n = delta~_n + Omega_d
        Self::build_with_drives(params, layout, params.omega_d, params.omega_d2, params.omega_d)
    }

    /// Variant with explicit drive frequencies and sideband offset. The
    /// stored detunings are relative to the sideband the laser is tuned to;
    /// `sideband_offset` shifts them back to the bare sideband (Omega_d for
    /// the doubly-driven gate, 0 to recover the single-drive interaction
    /// picture with omega_d2 = 0).
    pub fn build_with_drives(
        params: &GateParams,
        layout: HilbertLayout,
        omega_d: f64,
        omega_d2: f64,
        sideband_offset: f64,
    ) -> Result<Self, GateError> {
        let half = omega_d2 / 2.0;
        let cos_half = ExpSum::cos(half);
        let sin_half = ExpSum::sin(half);
        let cos_d = ExpSum::cos(omega_d);
        let sin_d = ExpSum::sin(omega_d);
        let i_unit = c(0.0, 1.0);

        // f_x = cos(W~t/2) - i sin(W~t/2) cos(Wt)
        let f_x = cos_half.plus(&sin_half.times(&cos_d).scaled(-i_unit));
        // f_y = sin(W~t/2) + i cos(W~t/2) cos(Wt)
        let f_y = sin_half.plus(&cos_half.times(&cos_d).scaled(i_unit));
        // f_z = sin(Wt)
        let f_z = sin_d;

        let deltas = params.deltas();
        let mut force_terms = Vec::new();
        for i in 1..=2 {
            let sx = build_elementary(layout, Elem::SigmaX(i))?;
            let sy = build_elementary(layout, Elem::SigmaY(i))?;
            let sz = build_elementary(layout, Elem::SigmaZ(i))?;
            for n in 1..=2 {
                let a = build_elementary(layout, Elem::A(n))?;
                let f = params.forces[i - 1][n - 1];
                let rot = -(deltas[n - 1] + sideband_offset);
                let gx = f_x.scaled(f * 0.5).rotated(rot);
                let gy = f_y.scaled(f * 0.5).rotated(rot);
                let gz = f_z.scaled(f * 0.5 * (-i_unit)).rotated(rot);
                force_terms.push(DriveTerm::new(&sx.mat * &a.mat, gx));
                force_terms.push(DriveTerm::new(&sy.mat * &a.mat, gy));
                force_terms.push(DriveTerm::new(&sz.mat * &a.mat, gz));
            }
        }

        // Intensity noise of the first driving, rotated into this picture:
        //   (x/2) [cos(W~t/2) sum_i sigma_i^x + sin(W~t/2) sum_i sigma_i^y].
        let mut noise_terms = Vec::new();
        let mut sxs = linalg::zeros(layout.dim(), layout.dim());
        let mut sys = linalg::zeros(layout.dim(), layout.dim());
        for i in 1..=2 {
            linalg::axpy(&mut sxs, c(1.0, 0.0), &build_elementary(layout, Elem::SigmaX(i))?.mat);
            linalg::axpy(&mut sys, c(1.0, 0.0), &build_elementary(layout, Elem::SigmaY(i))?.mat);
        }
        noise_terms.push(DriveTerm::new(sxs, cos_half.scaled(c(0.25, 0.0))));
        noise_terms.push(DriveTerm::new(sys, sin_half.scaled(c(0.25, 0.0))));

        Ok(DoubleDriveGenerator { layout, force_terms, noise_terms })
    }

    pub fn hamiltonian(&self, t: f64, x: f64) -> Mat<C64> {
        let d = self.layout.dim();
        let mut h = linalg::zeros(d, d);
        for term in &self.force_terms {
            let g = term.g.eval(t);
            linalg::axpy(&mut h, g, &term.mat);
            linalg::axpy(&mut h, g.conj(), &term.mat_dag);
        }
        if x != 0.0 {
            for term in &self.noise_terms {
                let g = term.g.eval(t) * x;
                linalg::axpy(&mut h, g, &term.mat);
                linalg::axpy(&mut h, g.conj(), &term.mat_dag);
            }
        }
        h
    }

    /// First-order Magnus generator of one step, split into the
    /// noise-independent and noise-linear parts:
    ///   Omega_step(x) = P + x Q  with  P = -i int_{t0}^{t1} H_det(t) dt.
    /// Both P and Q are anti-Hermitian.
    pub fn step_generators(&self, t0: f64, t1: f64) -> (Mat<C64>, Mat<C64>) {
        let d = self.layout.dim();
        let mi = c(0.0, -1.0);
        let mut p = linalg::zeros(d, d);
        for term in &self.force_terms {
            let gi = term.g.integral(t0, t1);
            linalg::axpy(&mut p, mi * gi, &term.mat);
            linalg::axpy(&mut p, mi * gi.conj(), &term.mat_dag);
        }
        let mut q = linalg::zeros(d, d);
        for term in &self.noise_terms {
            let gi = term.g.integral(t0, t1);
            linalg::axpy(&mut q, mi * gi, &term.mat);
            linalg::axpy(&mut q, mi * gi.conj(), &term.mat_dag);
        }
        (p, q)
    }
}

/// H(t) of the doubly-driven gate with an intensity-fluctuation sample on
/// the first driving.
pub fn build_double_drive(
    params: &GateParams,
    layout: HilbertLayout,
    t: f64,
    d_omega1: f64,
) -> Result<Operator, GateError> {
    if t < 0.0 || t > params.t_g * (1.0 + 1e-12) {
        return Err(GateError::Config(format!("t = {t:.3e} outside [0, t_g]")));
    }
    let gen = DoubleDriveGenerator::build(params, layout)?;
    Ok(Operator::new(layout, gen.hamiltonian(t, d_omega1)))
}
