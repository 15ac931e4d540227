//! Experiment runners behind the CLI: parse a config, run the matching
//! simulation, and write a comma-delimited table plus a run manifest.

use std::fmt::Write as _;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::analysis::{xket, BellLabel, BellTarget};
use crate::config::ConfigMap;
use crate::evolve::{
    noiseless_time_series, phase_space_trajectory, propagate_noisy, propagate_sequential_gates,
    qubit_fidelities, HamiltonianKind, NoiseModel, PropagationPlan,
};
use crate::hamiltonian::{build_dss, EchoPulse, EchoSpec};
use crate::linalg::{self, c};
use crate::noise::{
    dephasing_config, integrated_ou_variance, intensity_config, ks_two_sample, ou_step,
    phase_drift_config, traj_rng, wiener_step, OUConfig, WienerConfig,
};
use crate::params::{resolve_double_drive, resolve_single_drive, GateParams, TrapSpec};
use crate::qcore::{build_elementary, thermal_state, Elem, HilbertLayout, State};
use crate::{evolve::StaticPropagator, GateError};

/// Environment variable selecting the number of worker threads for the
/// dense linear algebra (default: all cores).
pub const WORKERS_ENV: &str = "GEOMGATE_WORKERS";

pub struct ExperimentInfo {
    pub name: &'static str,
    pub figure: &'static str,
    pub required: &'static str,
    pub optional: &'static str,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "bell_dynamics",
        figure: "Fig. 2 (Magnus vs exact qubit dynamics, Bell-state generation)",
        required: "output",
        optional: "r=8 k=2 p=57 n_max=10 steps=252 omega_x=4MHz omega_z=1MHz eta_1=0.225",
    },
    ExperimentInfo {
        name: "trajectories",
        figure: "Fig. 3 (phase-space trajectories, closed vs open)",
        required: "output",
        optional: "r=8 k=2 p=57 omega_d_list=200kHz,5MHz nbar=0.5 n_max=15 initial=++ steps=200",
    },
    ExperimentInfo {
        name: "thermal_sweep",
        figure: "Fig. 4 (gate error vs driving for thermal phonons)",
        required: "output p_list nbar_list",
        optional: "r=8 k=2 n_max=25 echo=z",
    },
    ExperimentInfo {
        name: "dephasing_sweep",
        figure: "Fig. 5 (gate error under magnetic-field dephasing)",
        required: "output p_list t2_list",
        optional: "r=8 k=2 n_max=7 tau_ratio=0.1 n_traj=1000 steps=200 seed=1 echo=z",
    },
    ExperimentInfo {
        name: "phase_sweep",
        figure: "Fig. 6 (gate error under laser-phase drift)",
        required: "output p_list zeta_p_list",
        optional: "r=8 k=2 n_max=7 n_gates=1000 seed=1 echo=z",
    },
    ExperimentInfo {
        name: "intensity_sweep",
        figure: "Figs. 7 and 9 (gate error under microwave-intensity noise)",
        required: "output p_list zeta_i_list",
        optional: "r=8 k=2 n_max=7 tau=1ms n_traj=1000 steps=200 seed=1 echo=z",
    },
    ExperimentInfo {
        name: "double_drive_dynamics",
        figure: "Fig. 8 (doubly-driven gate, noiseless Bell-state generation)",
        required: "output",
        optional: "r=32 k=2 p=79 q=47 n_max=5 steps=200 initial=+- echo=none",
    },
    ExperimentInfo {
        name: "double_drive_noise",
        figure: "Fig. 8 (doubly-driven gate under intensity noise of the first drive)",
        required: "output",
        optional: "r=32 k=2 p=79 q=47 n_max=5 zeta_i=1e-4 tau=1ms n_traj=1000 steps=200 seed=1 echo=y initial=+-",
    },
    ExperimentInfo {
        name: "noise_selftest",
        figure: "Appendix B (statistical checks of the noise generators)",
        required: "output",
        optional: "seed=1 n_samples=100000 tau=1ms",
    },
];

pub fn list_text() -> String {
    let mut s = String::from("available experiments:\n");
    for e in EXPERIMENTS {
        let _ = writeln!(s, "  {:<22} {}", e.name, e.figure);
        let _ = writeln!(s, "  {:<22}   required keys: experiment {}", "", e.required);
        let _ = writeln!(s, "  {:<22}   optional keys: {}", "", e.optional);
    }
    s
}

struct RunOutput {
    header: &'static str,
    rows: Vec<String>,
    resolved: Vec<GateParams>,
}

pub fn run_file(path: &Path) -> Result<(), GateError> {
    let cfg = ConfigMap::from_file(path)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &ConfigMap) -> Result<(), GateError> {
    apply_worker_env()?;
    let name = cfg.get_str("experiment")?;
    let out = match name {
        "bell_dynamics" => bell_dynamics(cfg)?,
        "trajectories" => trajectories(cfg)?,
        "thermal_sweep" => thermal_sweep(cfg)?,
        "dephasing_sweep" => noisy_sweep(cfg, SweepKind::Dephasing)?,
        "phase_sweep" => phase_sweep(cfg)?,
        "intensity_sweep" => noisy_sweep(cfg, SweepKind::Intensity)?,
        "double_drive_dynamics" => double_drive_dynamics(cfg)?,
        "double_drive_noise" => double_drive_noise(cfg)?,
        "noise_selftest" => noise_selftest(cfg)?,
        other => {
            let valid: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
            return Err(GateError::Config(format!(
                "unknown experiment '{other}'; valid experiments: {}",
                valid.join(", ")
            )));
        }
    };
    let output = cfg.get_str("output")?;
    write_table(Path::new(output), out.header, &out.rows)?;
    write_manifest(Path::new(output), name, cfg, &out.resolved)?;
    Ok(())
}

fn apply_worker_env() -> Result<(), GateError> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(()), // default: all cores (library default)
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                GateError::Config(format!("{WORKERS_ENV}='{raw}' is not a worker count"))
            })?;
            if n == 1 {
                faer::set_global_parallelism(faer::Par::Seq);
            } else {
                faer::set_global_parallelism(faer::Par::rayon(n));
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

fn fmt(x: f64) -> String {
    format!("{x:.10e}")
}

fn hz(omega: f64) -> f64 {
    omega / (2.0 * std::f64::consts::PI)
}

fn trap_from(cfg: &ConfigMap) -> Result<TrapSpec, GateError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(TrapSpec {
        omega_x: two_pi * cfg.get_f64_or("omega_x", 4.0e6)?,
        omega_z: two_pi * cfg.get_f64_or("omega_z", 1.0e6)?,
        eta_1: cfg.get_f64_or("eta_1", 0.225)?,
    })
}

fn echo_from(cfg: &ConfigMap, default: &'static str) -> Result<EchoSpec, GateError> {
    let at = cfg.get_f64_or("echo_at", 0.5)?;
    let pulse = match cfg.get_str_or("echo", default) {
        "none" => EchoPulse::None,
        "z" => EchoPulse::SigmaZPair,
        "y" => EchoPulse::SigmaYPair,
        other => {
            return Err(GateError::Config(format!(
                "key 'echo': expected none|z|y, got '{other}'"
            )))
        }
    };
    Ok(EchoSpec { pulse, at })
}

fn qubit_ket(label: &str) -> Result<Mat<C64>, GateError> {
    let sign = |ch: u8| if ch == b'+' { 1.0 } else { -1.0 };
    let b = label.as_bytes();
    if b.len() == 2 && b.iter().all(|ch| matches!(ch, b'+' | b'-')) {
        return Ok(xket(sign(b[0]), sign(b[1])));
    }
    if b.len() == 2 && b.iter().all(|ch| matches!(ch, b'0' | b'1')) {
        let mut v = linalg::zeros(4, 1);
        let q = (b[0] - b'0') as usize * 2 + (b[1] - b'0') as usize;
        v[(q, 0)] = c(1.0, 0.0);
        return Ok(v);
    }
    Err(GateError::Config(format!(
        "key 'initial': expected a two-qubit label like 10 or +-, got '{label}'"
    )))
}

fn product_state(
    layout: HilbertLayout,
    qubit: &Mat<C64>,
    nbar: f64,
) -> Result<State, GateError> {
    let qubit_rho = qubit * &linalg::adjoint(qubit);
    let phonons = thermal_state(layout, nbar, nbar)?;
    State::from_qubit_phonon(layout, &qubit_rho, &phonons)
}

/// Re <col_j| M |col_j> for every column.
fn column_expectations(m: &Mat<C64>, cols: &Mat<C64>) -> Vec<f64> {
    let prod = m * cols;
    (0..cols.ncols())
        .map(|j| {
            let mut s = C64::ZERO;
            for i in 0..cols.nrows() {
                s += cols[(i, j)].conj() * prod[(i, j)];
            }
            s.re
        })
        .collect()
}

fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<(), GateError> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| GateError::Config(format!("cannot write '{}': {e}", path.display())))
}

fn write_manifest(
    output: &Path,
    experiment: &str,
    cfg: &ConfigMap,
    resolved: &[GateParams],
) -> Result<(), GateError> {
    let mut s = String::new();
    let _ = writeln!(s, "geomgate = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "experiment = {experiment}");
    for key in cfg.keys() {
        let _ = writeln!(s, "config.{key} = {}", cfg.get_str(key).unwrap_or(""));
    }
    for (i, p) in resolved.iter().enumerate() {
        let _ = writeln!(s, "params[{i}].mode = {:?}", p.mode);
        let _ = writeln!(s, "params[{i}].r = {}", p.r);
        let _ = writeln!(s, "params[{i}].k = {}", p.k);
        let _ = writeln!(s, "params[{i}].p = {}", p.p);
        let _ = writeln!(s, "params[{i}].q = {}", p.q);
        let _ = writeln!(s, "params[{i}].delta_1_hz = {}", fmt(hz(p.delta_1)));
        let _ = writeln!(s, "params[{i}].delta_2_hz = {}", fmt(hz(p.delta_2)));
        let _ = writeln!(s, "params[{i}].omega_l_hz = {}", fmt(hz(p.omega_l)));
        let _ = writeln!(s, "params[{i}].omega_d_hz = {}", fmt(hz(p.omega_d)));
        if p.omega_d2 != 0.0 {
            let _ = writeln!(s, "params[{i}].omega_d2_hz = {}", fmt(hz(p.omega_d2)));
        }
        let _ = writeln!(s, "params[{i}].j12_hz = {}", fmt(hz(p.j12)));
        let _ = writeln!(s, "params[{i}].t_g_s = {}", fmt(p.t_g));
        for w in &p.warnings {
            let _ = writeln!(s, "params[{i}].warning = {w}");
        }
    }
    let path = manifest_path(output);
    std::fs::write(&path, s)
        .map_err(|e| GateError::Config(format!("cannot write '{}': {e}", path.display())))
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut os = output.as_os_str().to_owned();
    os.push(".manifest");
    os.into()
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

fn bell_dynamics(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let trap = trap_from(cfg)?;
    let params = resolve_single_drive(
        &trap,
        cfg.get_i64_or("r", 8)?,
        cfg.get_i64_or("k", 2)?,
        cfg.get_i64_or("p", 57)?,
    )?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 10)?)?;
    let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, 2.0 * params.t_g);
    plan.steps = cfg.get_usize_or("steps", 252)?;
    let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "10"))?, 0.0)?;
    let (times, cols) = noiseless_time_series(&plan, &params, layout, &initial)?;
    let sz1 = column_expectations(&build_elementary(layout, Elem::SigmaZ(1))?.mat, &cols);
    let sz2 = column_expectations(&build_elementary(layout, Elem::SigmaZ(2))?.mat, &cols);
    let target = BellTarget::for_params(BellLabel::PsiPlus, &params).state_vector();
    let fids = qubit_fidelities(layout, &cols, &target);
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, &t)| format!("{},{},{},{}", fmt(t), fmt(sz1[i]), fmt(sz2[i]), fmt(fids[i])))
        .collect();
    Ok(RunOutput { header: "t_s,sz1,sz2,bell_fidelity", rows, resolved: vec![params] })
}

fn trajectories(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let trap = trap_from(cfg)?;
    let base = resolve_single_drive(
        &trap,
        cfg.get_i64_or("r", 8)?,
        cfg.get_i64_or("k", 2)?,
        cfg.get_i64_or("p", 57)?,
    )?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 15)?)?;
    let nbar = cfg.get_f64_or("nbar", 0.5)?;
    let steps = cfg.get_usize_or("steps", 200)?;
    let omega_d_list = if cfg.contains("omega_d_list") {
        cfg.get_f64_list("omega_d_list")?
    } else {
        vec![200.0e3, 5.0e6]
    };
    let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "++"))?, nbar)?;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * base.t_g / steps as f64).collect();
    let mut rows = Vec::new();
    let mut resolved = Vec::new();
    for &f_d in &omega_d_list {
        if !(f_d > 0.0) {
            return Err(GateError::Constraint(format!(
                "driving frequency {f_d} Hz in omega_d_list must be positive"
            )));
        }
        let mut params = base.clone();
        params.omega_d = 2.0 * std::f64::consts::PI * f_d;
        let modes = phase_space_trajectory(&params, layout, &initial, &times)?;
        for (m, traj) in modes.iter().enumerate() {
            for (i, &(x, p)) in traj.iter().enumerate() {
                rows.push(format!(
                    "{},{},{},{},{}",
                    fmt(f_d),
                    m + 1,
                    fmt(times[i]),
                    fmt(x),
                    fmt(p)
                ));
            }
        }
        resolved.push(params);
    }
    Ok(RunOutput { header: "omega_d_hz,mode,t_s,x,p", rows, resolved })
}

fn thermal_sweep(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let trap = trap_from(cfg)?;
    let k = cfg.get_i64_or("k", 2)?;
    let r = cfg.get_i64_or("r", 8)?;
    let p_list = cfg.get_i64_list("p_list")?;
    let nbar_list = cfg.get_f64_list("nbar_list")?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 25)?)?;
    let seed = cfg.get_u64_or("seed", 1)?;
    let echo = echo_from(cfg, "z")?;
    let pulse = echo.operator(layout)?.mat;
    let f = layout.fock_dim();
    let d = layout.dim();
    let mut rows = Vec::new();
    let mut resolved = Vec::new();
    for &p in &p_list {
        let params = resolve_single_drive(&trap, r, k, p)?;
        let sp = StaticPropagator::new(&build_dss(&params, layout)?)?;
        // propagate every |1 0 n1 n2> basis ket at once, then weight by the
        // thermal occupations of each requested nbar
        let mut cols = linalg::zeros(d, f * f);
        for n1 in 0..f {
            for n2 in 0..f {
                cols[(layout.index(1, 0, n1, n2), n1 * f + n2)] = c(1.0, 0.0);
            }
        }
        let t_pulse = echo.at * params.t_g;
        let evolved =
            sp.apply(params.t_g - t_pulse, &(&pulse * &sp.apply(t_pulse, &cols)));
        let target = BellTarget::for_params(BellLabel::PsiPlus, &params).state_vector();
        let fids = qubit_fidelities(layout, &evolved, &target);
        for &nbar in &nbar_list {
            let weights = thermal_state(layout, nbar, nbar)?;
            let mut fid = 0.0;
            for j in 0..f * f {
                fid += weights[(j, j)].re * fids[j];
            }
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                params.p,
                fmt(hz(params.omega_d)),
                fmt(nbar),
                fmt(1.0 - fid),
                fmt(0.0),
                0,
                seed
            ));
        }
        resolved.push(params);
    }
    Ok(RunOutput { header: "p,omega_d_hz,nbar,error,stderr,n_traj,seed", rows, resolved })
}

enum SweepKind {
    Dephasing,
    Intensity,
}

/// Monte-Carlo gate-error sweeps over driving strength and noise magnitude
/// (dephasing and microwave-intensity noise share all plumbing).
fn noisy_sweep(cfg: &ConfigMap, kind: SweepKind) -> Result<RunOutput, GateError> {
    let trap = trap_from(cfg)?;
    let k = cfg.get_i64_or("k", 2)?;
    let r = cfg.get_i64_or("r", 8)?;
    let p_list = cfg.get_i64_list("p_list")?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 7)?)?;
    let n_traj = cfg.get_usize_or("n_traj", 1000)?;
    let steps = cfg.get_usize_or("steps", 200)?;
    let seed = cfg.get_u64_or("seed", 1)?;
    let echo = echo_from(cfg, "z")?;
    let (mags, header) = match kind {
        SweepKind::Dephasing => (
            cfg.get_f64_list("t2_list")?,
            "p,omega_d_hz,t2_s,error,stderr,n_traj,seed",
        ),
        SweepKind::Intensity => (
            cfg.get_f64_list("zeta_i_list")?,
            "p,omega_d_hz,zeta_i,error,stderr,n_traj,seed",
        ),
    };
    let tau_ratio = cfg.get_f64_or("tau_ratio", 0.1)?;
    let tau = cfg.get_f64_or("tau", 1.0e-3)?;
    let mut rows = Vec::new();
    let mut resolved = Vec::new();
    for &p in &p_list {
        let params = resolve_single_drive(&trap, r, k, p)?;
        let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "00"))?, 0.0)?;
        let target = BellTarget::for_params(BellLabel::PhiMinus, &params).state_vector();
        for &mag in &mags {
            let noise = match kind {
                SweepKind::Dephasing => NoiseModel::Dephasing(dephasing_config(mag, tau_ratio)),
                SweepKind::Intensity => {
                    NoiseModel::Intensity(intensity_config(params.omega_d, mag, tau))
                }
            };
            let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, params.t_g);
            plan.steps = steps;
            plan.echo = echo;
            plan.noise = noise;
            plan.n_traj = n_traj;
            plan.seed = seed;
            let res = propagate_noisy(&plan, &params, layout, &initial, &target)?;
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                params.p,
                fmt(hz(params.omega_d)),
                fmt(mag),
                fmt(1.0 - res.mean_fidelity),
                fmt(res.stderr),
                n_traj,
                seed
            ));
        }
        resolved.push(params);
    }
    Ok(RunOutput { header, rows, resolved })
}

fn phase_sweep(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let trap = trap_from(cfg)?;
    let k = cfg.get_i64_or("k", 2)?;
    let r = cfg.get_i64_or("r", 8)?;
    let p_list = cfg.get_i64_list("p_list")?;
    let zeta_p_list = cfg.get_f64_list("zeta_p_list")?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 7)?)?;
    let n_gates = cfg.get_usize_or("n_gates", 1000)?;
    let seed = cfg.get_u64_or("seed", 1)?;
    let echo = echo_from(cfg, "z")?;
    let mut rows = Vec::new();
    let mut resolved = Vec::new();
    for &p in &p_list {
        let params = resolve_single_drive(&trap, r, k, p)?;
        let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "00"))?, 0.0)?;
        let target = BellTarget::for_params(BellLabel::PhiMinus, &params).state_vector();
        for &zeta_p in &zeta_p_list {
            let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, params.t_g);
            plan.echo = echo;
            plan.noise = NoiseModel::PhaseDrift(phase_drift_config(zeta_p, params.t_g));
            plan.seed = seed;
            let fids =
                propagate_sequential_gates(&plan, &params, layout, &initial, &target, n_gates)?;
            let n = fids.len() as f64;
            let mean = fids.iter().sum::<f64>() / n;
            let var = fids.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1.0);
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                params.p,
                fmt(hz(params.omega_d)),
                fmt(zeta_p),
                fmt(1.0 - mean),
                fmt((var / n).sqrt()),
                n_gates,
                seed
            ));
        }
        resolved.push(params);
    }
    Ok(RunOutput { header: "p,omega_d_hz,zeta_p,error,stderr,n_gates,seed", rows, resolved })
}

fn resolve_dd(cfg: &ConfigMap) -> Result<GateParams, GateError> {
    let trap = trap_from(cfg)?;
    resolve_double_drive(
        &trap,
        cfg.get_i64_or("r", 32)?,
        cfg.get_i64_or("k", 2)?,
        cfg.get_i64_or("p", 79)?,
        cfg.get_i64_or("q", 47)?,
    )
}

fn dd_target(params: &GateParams, echo: &EchoSpec) -> BellTarget {
    // the sigma^y sigma^y refocusing pulse swaps the Bell target of the
    // doubly-driven gate from Psi~- to Psi~+
    let label = match echo.pulse {
        EchoPulse::None => BellLabel::PsiTildeMinus,
        _ => BellLabel::PsiTildePlus,
    };
    BellTarget::for_params(label, params)
}

fn double_drive_dynamics(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let params = resolve_dd(cfg)?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 5)?)?;
    let echo = echo_from(cfg, "none")?;
    let mut plan = PropagationPlan::new(HamiltonianKind::DoubleDrive, params.t_g);
    plan.steps = cfg.get_usize_or("steps", 200)?;
    plan.echo = echo;
    let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "+-"))?, 0.0)?;
    let (times, cols) = noiseless_time_series(&plan, &params, layout, &initial)?;
    let sx1 = column_expectations(&build_elementary(layout, Elem::SigmaX(1))?.mat, &cols);
    let sx2 = column_expectations(&build_elementary(layout, Elem::SigmaX(2))?.mat, &cols);
    let target = dd_target(&params, &plan.echo).state_vector();
    let fids = qubit_fidelities(layout, &cols, &target);
    let rows = times
        .iter()
        .enumerate()
        .map(|(i, &t)| format!("{},{},{},{}", fmt(t), fmt(sx1[i]), fmt(sx2[i]), fmt(fids[i])))
        .collect();
    Ok(RunOutput { header: "t_s,sx1,sx2,bell_fidelity", rows, resolved: vec![params] })
}

fn double_drive_noise(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let params = resolve_dd(cfg)?;
    let layout = HilbertLayout::new(cfg.get_usize_or("n_max", 5)?)?;
    let echo = echo_from(cfg, "y")?;
    let zeta_i = cfg.get_f64_or("zeta_i", 1.0e-4)?;
    let tau = cfg.get_f64_or("tau", 1.0e-3)?;
    let seed = cfg.get_u64_or("seed", 1)?;
    let n_traj = cfg.get_usize_or("n_traj", 1000)?;
    let mut plan = PropagationPlan::new(HamiltonianKind::DoubleDrive, params.t_g);
    plan.steps = cfg.get_usize_or("steps", 200)?;
    plan.echo = echo;
    plan.noise = NoiseModel::FirstDriveIntensity(intensity_config(params.omega_d, zeta_i, tau));
    plan.n_traj = n_traj;
    plan.seed = seed;
    let initial = product_state(layout, &qubit_ket(cfg.get_str_or("initial", "+-"))?, 0.0)?;
    let target = dd_target(&params, &plan.echo).state_vector();
    let res = propagate_noisy(&plan, &params, layout, &initial, &target)?;
    let rows = vec![format!(
        "{},{},{},{},{},{},{}",
        params.p,
        fmt(hz(params.omega_d)),
        fmt(zeta_i),
        fmt(1.0 - res.mean_fidelity),
        fmt(res.stderr),
        n_traj,
        seed
    )];
    Ok(RunOutput {
        header: "p,omega_d_hz,zeta_i,error,stderr,n_traj,seed",
        rows,
        resolved: vec![params],
    })
}

fn noise_selftest(cfg: &ConfigMap) -> Result<RunOutput, GateError> {
    let seed = cfg.get_u64_or("seed", 1)?;
    let n = cfg.get_usize_or("n_samples", 100_000)?;
    if n < 1000 {
        return Err(GateError::Config("n_samples must be >= 1000".into()));
    }
    let tau = cfg.get_f64_or("tau", 1.0e-3)?;
    let ou = OUConfig { tau, c: 2.0 / tau, x0: 0.0 }; // stationary variance 1
    let mut rows = Vec::new();
    let mut push = |check: &str, value: f64, expected: f64, tol: f64| {
        let pass = (value - expected).abs() <= tol;
        rows.push(format!("{check},{},{},{},{}", fmt(value), fmt(expected), fmt(tol), pass));
        pass
    };

    // stationary mean and variance of the O-U update (independent draws
    // after a burn-in long enough to forget x0)
    let mut rng = traj_rng(seed, 0);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = 0.0;
        for _ in 0..4 {
            x = ou_step(x, 3.0 * tau, &ou, &mut rng);
        }
        xs.push(x);
    }
    let var0 = ou.c * ou.tau / 2.0;
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    push("ou_stationary_mean", mean, 0.0, 3.0 * (var0 / n as f64).sqrt());
    push("ou_stationary_var", var, var0, 3.0 * var0 * (2.0 / n as f64).sqrt());

    // one step of dt must be distributed like two steps of dt/2; the
    // two-sample KS p-value should not fall below the 1% level
    let m = 4096;
    let dt = tau / 4.0;
    let mut rng = traj_rng(seed, 1);
    let mut a: Vec<f64> = (0..m).map(|_| ou_step(0.3, dt, &ou, &mut rng)).collect();
    let mut b: Vec<f64> = (0..m)
        .map(|_| {
            let x = ou_step(0.3, dt / 2.0, &ou, &mut rng);
            ou_step(x, dt / 2.0, &ou, &mut rng)
        })
        .collect();
    let p_value = ks_two_sample(&mut a, &mut b);
    push("ou_step_splitting_ks_pvalue", p_value, 0.505, 0.495);

    // variance of the time-integrated O-U process at dt = tau/10
    let m_int = (n / 5).max(2000);
    let dt = tau / 10.0;
    let t_f = 2.0 * tau;
    let nsteps = (t_f / dt).round() as usize;
    let mut rng = traj_rng(seed, 2);
    let mut sq = 0.0;
    for _ in 0..m_int {
        let mut x = 0.0;
        let mut y = 0.0;
        for _ in 0..nsteps {
            let x_next = ou_step(x, dt, &ou, &mut rng);
            y += 0.5 * (x + x_next) * dt;
            x = x_next;
        }
        sq += y * y;
    }
    let var_y = sq / m_int as f64;
    let expected = integrated_ou_variance(&ou, t_f);
    push("ou_integrated_var", var_y, expected, 0.02 * expected);

    // Wiener increments: Var W(T) = c T
    let w = WienerConfig { c: 1.0 / tau, x0: 0.0 };
    let mut rng = traj_rng(seed, 3);
    let t_tot = 10.0 * tau;
    let mut sq = 0.0;
    for _ in 0..n {
        let mut x = w.x0;
        for _ in 0..10 {
            x = wiener_step(x, tau, &w, &mut rng);
        }
        sq += x * x;
    }
    let var_w = sq / n as f64;
    let cw = w.c * t_tot;
    push("wiener_var", var_w, cw, 3.0 * cw * (2.0 / n as f64).sqrt());

    Ok(RunOutput {
        header: "check,value,expected,tolerance,pass",
        rows,
        resolved: Vec::new(),
    })
}
