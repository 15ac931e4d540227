//! Resolve raw trap inputs into the fully constrained gate parameter set.
//!
//! All frequencies are angular (rad/s), times in seconds, hbar = 1.
//! The laser detuning delta_1 comes out negative for the radial zigzag mode
//! below the center-of-mass mode (xi < 1, k = 2); detunings are stored
//! signed and the gate time is defined from |delta_1|. The integers r, k, p
//! (and q for the double drive) are stored with the signs that make the
//! commensurability relations Omega_d = p*delta_1, t_g = r*2pi/|delta_1|
//! hold exactly with Omega_d > 0.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::GateError;

#[derive(Debug, Clone, Copy)]
pub struct TrapSpec {
    /// Radial trap frequency (rad/s).
    pub omega_x: f64,
    /// Axial trap frequency (rad/s).
    pub omega_z: f64,
    /// Lamb-Dicke parameter of the center-of-mass mode.
    pub eta_1: f64,
}

impl TrapSpec {
    pub fn validate(&self) -> Result<(), GateError> {
        if !(self.omega_x > 0.0 && self.omega_z > 0.0) {
            return Err(GateError::Constraint("trap frequencies must be positive".into()));
        }
        if self.omega_z >= self.omega_x {
            return Err(GateError::Constraint(
                "omega_z >= omega_x: no radial zigzag mode below the com mode".into(),
            ));
        }
        if self.eta_1 <= 0.0 {
            return Err(GateError::Constraint("eta_1 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveMode {
    SingleDrive,
    DoubleDrive,
}

#[derive(Debug, Clone)]
pub struct GateParams {
    pub omega_1: f64,
    pub omega_2: f64,
    pub xi: f64,
    /// Signed laser detunings (rad/s); for the double drive these are the
    /// dressed-sideband detunings delta~_n.
    pub delta_1: f64,
    pub delta_2: f64,
    pub eta_1: f64,
    pub eta_2: f64,
    /// |Omega_L| (rad/s).
    pub omega_l: f64,
    /// Primary microwave Rabi frequency (rad/s), > 0.
    pub omega_d: f64,
    /// Secondary microwave Rabi frequency (rad/s); 0 in single-drive mode.
    pub omega_d2: f64,
    pub t_g: f64,
    pub r: i64,
    pub k: i64,
    pub p: i64,
    pub q: i64,
    /// forces[i][n]: sideband coupling of ion i+1 to mode n+1 (rad/s).
    pub forces: [[C64; 2]; 2],
    /// Effective sigma^x sigma^x (single drive) or sigma^z sigma^z (double
    /// drive) coupling J_12 (rad/s).
    pub j12: f64,
    pub mode: DriveMode,
    pub warnings: Vec<String>,
}

impl GateParams {
    pub fn deltas(&self) -> [f64; 2] {
        [self.delta_1, self.delta_2]
    }
}

/// Normal-mode data derived from the trap: (omega_1, omega_2, xi, eta_2).
pub fn resolve_modes(spec: &TrapSpec) -> Result<(f64, f64, f64, f64), GateError> {
    spec.validate()?;
    let omega_1 = spec.omega_x;
    let omega_2 = (spec.omega_x * spec.omega_x - spec.omega_z * spec.omega_z).sqrt();
    let xi = omega_2 / omega_1;
    if 1.0 - xi < 1e-9 {
        return Err(GateError::Constraint(
            "degenerate radial modes (xi -> 1): detuning vanishes and the gate time diverges".into(),
        ));
    }
    let eta_2 = spec.eta_1 * (omega_1 / omega_2).sqrt();
    Ok((omega_1, omega_2, xi, eta_2))
}

fn check_integers(r: i64, k: i64, p: i64) -> Result<(), GateError> {
    if r == 0 || k == 0 || p == 0 {
        return Err(GateError::Constraint("r, k, p must be nonzero integers".into()));
    }
    if k == 1 {
        return Err(GateError::Constraint("k = 1 makes delta_1 = (xi-1)/(k-1) undefined".into()));
    }
    if r % k != 0 {
        return Err(GateError::Constraint(format!("r/k must be an integer (r={r}, k={k})")));
    }
    if p.abs() <= r.abs() + k.abs() {
        return Err(GateError::Constraint(format!(
            "|p| > |r| + |k| required (p={p}, r={r}, k={k})"
        )));
    }
    Ok(())
}

fn laser_root(xi: f64, r: i64) -> Result<f64, GateError> {
    let u = 1.0 - 1.0 / (2.0 * xi);
    if u <= 0.0 {
        return Err(GateError::Constraint(format!(
            "1 - 1/(2 xi) = {u:.3e} <= 0: laser intensity formula undefined"
        )));
    }
    Ok(((r.abs() as f64 / 2.0) * u).sqrt())
}

fn build_forces(omega_l: f64, eta_1: f64, eta_2: f64) -> [[C64; 2]; 2] {
    // F_i1 = i |Omega_L| eta_1 / (2 sqrt(2)); F_i2 = i (-1)^i |Omega_L| eta_2 / (2 sqrt(2))
    let f1 = omega_l * eta_1 / (2.0 * 2.0f64.sqrt());
    let f2 = omega_l * eta_2 / (2.0 * 2.0f64.sqrt());
    [
        [C64::new(0.0, f1), C64::new(0.0, -f2)],
        [C64::new(0.0, f1), C64::new(0.0, f2)],
    ]
}

fn j12_from_forces(forces: &[[C64; 2]; 2], deltas: [f64; 2], denom_scale: f64) -> f64 {
    // J_12 = -sum_n F_1n F_2n^* / (denom_scale * delta_n)
    let mut j = C64::ZERO;
    for n in 0..2 {
        j -= forces[0][n] * forces[1][n].conj() / C64::new(denom_scale * deltas[n], 0.0);
    }
    debug_assert!(j.im.abs() < 1e-9 * j.re.abs().max(1.0));
    j.re
}

pub fn resolve_single_drive(
    spec: &TrapSpec,
    r: i64,
    k: i64,
    p: i64,
) -> Result<GateParams, GateError> {
    let (omega_1, omega_2, xi, eta_2) = resolve_modes(spec)?;
    check_integers(r, k, p)?;

    let c = (xi - 1.0) / (k as f64 - 1.0);
    let delta_1 = c * omega_1;
    let delta_2 = k as f64 * delta_1;
    let t_g = r.abs() as f64 * 2.0 * PI / delta_1.abs();
    let omega_l = delta_1.abs() / (spec.eta_1 * laser_root(xi, r)?);
    // store p with the sign that makes Omega_d = p * delta_1 positive
    let p_signed = if delta_1 > 0.0 { p.abs() } else { -p.abs() };
    let omega_d = p_signed as f64 * delta_1;

    let forces = build_forces(omega_l, spec.eta_1, eta_2);
    let j12 = j12_from_forces(&forces, [delta_1, delta_2], 4.0);
    let t_g_check = PI / (8.0 * j12);
    if ((t_g_check - t_g) / t_g).abs() > 1e-9 {
        return Err(GateError::Numerical(format!(
            "gate-time self-check failed: r*2pi/|delta_1| = {t_g:.6e}, pi/(8 J12) = {t_g_check:.6e}"
        )));
    }

    Ok(GateParams {
        omega_1,
        omega_2,
        xi,
        delta_1,
        delta_2,
        eta_1: spec.eta_1,
        eta_2,
        omega_l,
        omega_d,
        omega_d2: 0.0,
        t_g,
        r: r.abs(),
        k,
        p: p_signed,
        q: 0,
        forces,
        j12,
        mode: DriveMode::SingleDrive,
        warnings: Vec::new(),
    })
}

pub fn resolve_double_drive(
    spec: &TrapSpec,
    r: i64,
    k: i64,
    p: i64,
    q: i64,
) -> Result<GateParams, GateError> {
    let (omega_1, omega_2, xi, eta_2) = resolve_modes(spec)?;
    check_integers(r, k, p)?;
    if q == 0 {
        return Err(GateError::Constraint("q must be a nonzero integer".into()));
    }

    let c = (xi - 1.0) / (k as f64 - 1.0);
    let delta_1 = c * omega_1; // dressed-sideband detuning delta~_1
    let delta_2 = k as f64 * delta_1;
    let t_g = r.abs() as f64 * 2.0 * PI / delta_1.abs();
    let omega_l = 2.0 * delta_1.abs() / (spec.eta_1 * laser_root(xi, r)?);
    let p_signed = if delta_1 > 0.0 { p.abs() } else { -p.abs() };
    let q_signed = if delta_1 > 0.0 { q.abs() } else { -q.abs() };
    let omega_d = p_signed as f64 * delta_1;
    let omega_d2 = q_signed as f64 * delta_1;

    let forces = build_forces(omega_l, spec.eta_1, eta_2);
    let j12 = j12_from_forces(&forces, [delta_1, delta_2], 16.0);
    let t_g_check = PI / (8.0 * j12);
    if ((t_g_check - t_g) / t_g).abs() > 1e-9 {
        return Err(GateError::Numerical(format!(
            "double-drive gate-time self-check failed: {t_g:.6e} vs {t_g_check:.6e}"
        )));
    }

    let mut warnings = Vec::new();
    let band = omega_d2 / (4.0 * omega_d);
    if !(0.05..=0.25).contains(&band) {
        warnings.push(format!(
            "secondary driving outside the strong-driving band: Omega~_d/(4 Omega_d) = {band:.3} not in [0.05, 0.25]"
        ));
    }
    let fmax = forces.iter().flatten().map(|f| f.norm()).fold(0.0, f64::max);
    if fmax / 2.0 > 0.1 * omega_d2 {
        warnings.push(format!(
            "|F|/2 = {:.3e} rad/s is not small against Omega~_d = {omega_d2:.3e} rad/s",
            fmax / 2.0
        ));
    }

    Ok(GateParams {
        omega_1,
        omega_2,
        xi,
        delta_1,
        delta_2,
        eta_1: spec.eta_1,
        eta_2,
        omega_l,
        omega_d,
        omega_d2,
        t_g,
        r: r.abs(),
        k,
        p: p_signed,
        q: q_signed,
        forces,
        j12,
        mode: DriveMode::DoubleDrive,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn table1_trap() -> TrapSpec {
        TrapSpec {
            omega_x: 2.0 * PI * 4.0e6,
            omega_z: 2.0 * PI * 1.0e6,
            eta_1: 0.225,
        }
    }

    #[test]
    fn mode_resolution_matches_table1() {
        let (_, _, xi, eta_2) = resolve_modes(&table1_trap()).unwrap();
        assert!((eta_2 - 0.229).abs() < 5e-4, "eta_2 = {eta_2}");
        assert!((xi - 0.9682).abs() < 1e-4, "xi = {xi}");
    }

    #[test]
    fn degenerate_modes_rejected() {
        let spec = TrapSpec {
            omega_x: 2.0 * PI * 4.0e6,
            omega_z: 1.0,
            eta_1: 0.225,
        };
        assert!(resolve_modes(&spec).is_err());
    }

    #[test]
    fn single_drive_table1_values() {
        let gp = resolve_single_drive(&table1_trap(), 8, 2, 57).unwrap();
        let two_pi = 2.0 * PI;
        assert!((gp.delta_1.abs() / two_pi - 127.1e3).abs() < 0.2e3, "delta_1 = {}", gp.delta_1 / two_pi);
        assert!((gp.delta_2.abs() / two_pi - 254.2e3).abs() < 0.4e3);
        assert!((gp.t_g - 62.9e-6).abs() < 0.2e-6, "t_g = {}", gp.t_g);
        assert!((gp.omega_l / two_pi - 406e3).abs() < 2e3, "Omega_L = {}", gp.omega_l / two_pi);
        assert!(gp.omega_d > 0.0);
        assert!((gp.omega_d - gp.p as f64 * gp.delta_1).abs() < 1e-9);
    }

    #[test]
    fn single_drive_r2_laser_intensity() {
        let gp = resolve_single_drive(&table1_trap(), 2, 2, 17).unwrap();
        assert!((gp.omega_l / (2.0 * PI) - 811e3).abs() < 3e3, "Omega_L = {}", gp.omega_l / (2.0 * PI));
    }

    #[test]
    fn laser_intensity_sqrt2_scaling_in_r() {
        let a = resolve_single_drive(&table1_trap(), 8, 2, 57).unwrap();
        let b = resolve_single_drive(&table1_trap(), 16, 2, 113).unwrap();
        assert!((b.omega_l / a.omega_l - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closure_phases_are_multiples_of_2pi() {
        for &(r, k, p) in &[(8i64, 2i64, 57i64), (2, 2, 17), (16, 2, 113)] {
            let gp = resolve_single_drive(&table1_trap(), r, k, p).unwrap();
            let ph1 = gp.delta_1 * gp.t_g / (2.0 * PI);
            let ph2 = gp.delta_2 * gp.t_g / (2.0 * PI);
            assert!((ph1 - ph1.round()).abs() < 1e-9, "delta_1 closure {ph1}");
            assert!((ph2 - ph2.round()).abs() < 1e-9, "delta_2 closure {ph2}");
            assert!((gp.t_g * 8.0 * gp.j12.abs() - PI).abs() < 1e-9 * PI);
        }
    }

    #[test]
    fn forces_match_scalar_arithmetic() {
        let gp = resolve_single_drive(&table1_trap(), 2, 2, 17).unwrap();
        // |F_11| = |Omega_L| eta_1 / (2 sqrt(2)) ~ 2pi * 64.5 kHz for Omega_L/2pi = 811 kHz
        let f11 = gp.forces[0][0];
        assert!(f11.re.abs() < 1e-12);
        assert!((f11.im / (2.0 * PI) - 64.5e3).abs() < 0.5e3, "F11 = {}", f11.im / (2.0 * PI));
        // mode-2 forces differ in sign between the ions
        assert!((gp.forces[0][1] + gp.forces[1][1]).norm() < 1e-12);
    }

    #[test]
    fn constraint_violations_rejected() {
        let t = table1_trap();
        assert!(resolve_single_drive(&t, 8, 3, 57).is_err()); // r/k not integer
        assert!(resolve_single_drive(&t, 8, 2, 9).is_err()); // |p| too small
        assert!(resolve_single_drive(&t, 8, 1, 57).is_err()); // k = 1
    }

    #[test]
    fn double_drive_table1_values() {
        let gp = resolve_double_drive(&table1_trap(), 32, 2, 79, 47).unwrap();
        assert!((gp.t_g - 251.7e-6).abs() < 0.5e-6, "t_g = {}", gp.t_g);
        assert!((gp.omega_d / (2.0 * PI) - 10.0e6).abs() < 0.1e6);
        assert!((gp.omega_d2 / (2.0 * PI) - 6.0e6).abs() < 0.1e6);
        assert!(gp.warnings.is_empty(), "{:?}", gp.warnings);
        assert!((gp.t_g * 8.0 * gp.j12.abs() - PI).abs() < 1e-9 * PI);
    }

    #[test]
    fn double_drive_band_warning() {
        // q too large pushes Omega~_d/(4 Omega_d) above 0.25
        let gp = resolve_double_drive(&table1_trap(), 32, 2, 79, 100).unwrap();
        assert!(!gp.warnings.is_empty());
    }

    #[test]
    fn double_drive_rejects_zero_q() {
        assert!(resolve_double_drive(&table1_trap(), 32, 2, 79, 0).is_err());
    }
}
