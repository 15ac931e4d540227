//! Ornstein-Uhlenbeck and Wiener processes with exact update formulas,
//! plus the noise-parameter choices used by the gate-error studies.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::GateError;

/// O-U process dO = -O/tau dt + sqrt(c) dW; stationary variance c*tau/2.
#[derive(Debug, Clone, Copy)]
pub struct OUConfig {
    pub tau: f64,
    pub c: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct WienerConfig {
    pub c: f64,
    pub x0: f64,
}

#[derive(Debug, Clone)]
pub struct NoisePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Deterministic per-trajectory RNG substream.
pub fn traj_rng(base_seed: u64, traj: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(traj.wrapping_add(1));
    rng
}

/// Exact O-U update over an arbitrary step:
/// O(t+dt) = O(t) e^{-dt/tau} + sqrt((c tau/2)(1 - e^{-2 dt/tau})) n.
pub fn ou_step<R: Rng + ?Sized>(x: f64, dt: f64, cfg: &OUConfig, rng: &mut R) -> f64 {
    debug_assert!(dt > 0.0);
    let decay = (-dt / cfg.tau).exp();
    let sigma = (cfg.c * cfg.tau / 2.0 * (1.0 - decay * decay)).sqrt();
    let n: f64 = rng.sample(StandardNormal);
    x * decay + sigma * n
}

/// Exact Wiener update: W(t+dt) = W(t) + sqrt(c dt) n.
pub fn wiener_step<R: Rng + ?Sized>(x: f64, dt: f64, cfg: &WienerConfig, rng: &mut R) -> f64 {
    debug_assert!(dt > 0.0);
    let n: f64 = rng.sample(StandardNormal);
    x + (cfg.c * dt).sqrt() * n
}

pub fn sample_ou_path(cfg: &OUConfig, times: &[f64], seed: u64, traj: u64) -> NoisePath {
    let mut rng = traj_rng(seed, traj);
    let mut values = Vec::with_capacity(times.len());
    let mut x = cfg.x0;
    let mut t_prev = None;
    for &t in times {
        if let Some(tp) = t_prev {
            x = ou_step(x, t - tp, cfg, &mut rng);
        }
        values.push(x);
        t_prev = Some(t);
    }
    NoisePath { times: times.to_vec(), values, seed }
}

/// Dephasing noise: T2 = 2/(c tau^2) with tau = tau_ratio * T2 (default 0.1).
pub fn dephasing_config(t2: f64, tau_ratio: f64) -> OUConfig {
    let tau = tau_ratio * t2;
    OUConfig { tau, c: 2.0 / (t2 * tau * tau), x0: 0.0 }
}

/// Microwave intensity noise: c = 2 (zeta_I Omega_d)^2 / tau, so the
/// stationary standard deviation is zeta_I * Omega_d.
pub fn intensity_config(omega_d: f64, zeta_i: f64, tau: f64) -> OUConfig {
    OUConfig { tau, c: 2.0 * (zeta_i * omega_d).powi(2) / tau, x0: 0.0 }
}

/// Laser-phase drift: Wiener process scaled so that after 10^3 gates the
/// accumulated phase spread is zeta_p * pi.
pub fn phase_drift_config(zeta_p: f64, t_g: f64) -> WienerConfig {
    WienerConfig { c: (zeta_p * PI).powi(2) / (1e3 * t_g), x0: 0.0 }
}

/// Exact <Y^2(t_f)> for Y = int_0^{t_f} O(t) dt with O(0) = 0:
/// c tau^2 (t_f - 2 tau (1 - e^{-t_f/tau}) + (tau/2)(1 - e^{-2 t_f/tau})).
pub fn integrated_ou_variance(cfg: &OUConfig, t_f: f64) -> f64 {
    let e1 = (-t_f / cfg.tau).exp();
    let e2 = (-2.0 * t_f / cfg.tau).exp();
    cfg.c * cfg.tau * cfg.tau
        * (t_f - 2.0 * cfg.tau * (1.0 - e1) + cfg.tau / 2.0 * (1.0 - e2))
}

/// Appendix-B discretization rule: piecewise-constant O-U sampling needs
/// dt well below the correlation time.
pub fn check_dt_guard(dt: f64, tau: f64) -> Result<(), GateError> {
    if dt > tau / 3.0 {
        return Err(GateError::Numerical(format!(
            "step dt = {dt:.3e} s too coarse for O-U correlation time tau = {tau:.3e} s (need dt <= tau/3)"
        )));
    }
    Ok(())
}

/// Two-sample Kolmogorov-Smirnov test; returns the asymptotic p-value.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    // Kolmogorov survival function
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Scalar free-induction decay under collective dephasing: averages
/// cos(Y(t_f)) with Y the integral of the O-U process; for t_f >> tau this
/// decays as e^{-t_f/T2}.
pub fn free_induction_mean_sigma_x(
    cfg: &OUConfig,
    t_f: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> f64 {
    let dt = t_f / steps as f64;
    let mut acc = 0.0;
    for traj in 0..n_paths {
        let mut rng = traj_rng(seed, traj as u64);
        let mut x = cfg.x0;
        let mut y = 0.0;
        for _ in 0..steps {
            // piecewise-constant sample over the step, then exact update
            y += x * dt;
            x = ou_step(x, dt, cfg, &mut rng);
        }
        acc += y.cos();
    }
    acc / n_paths as f64
}
