//! A slow laser-phase drift (Wiener process persisting across gates) does
//! not degrade the gate: the phase enters only through the sideband forces
//! and is a gauge choice for each run. Simulates a long sequence of gates
//! with the drift carried over from one to the next.
//!
//!     cargo run --release --example phase_drift_gates

use geomgate::analysis::{BellLabel, BellTarget};
use geomgate::evolve::{
    propagate_sequential_gates, HamiltonianKind, NoiseModel, PropagationPlan,
};
use geomgate::hamiltonian::{EchoPulse, EchoSpec};
use geomgate::noise::phase_drift_config;
use geomgate::params::{resolve_single_drive, TrapSpec};
use geomgate::qcore::{HilbertLayout, State};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    let params = resolve_single_drive(&trap, 8, 2, 79).unwrap();
    let layout = HilbertLayout::new(5).unwrap();
    let initial = State::pure(layout, &State::basis_ket(layout, 0, 0, 0, 0)).unwrap();
    let target = BellTarget::for_params(BellLabel::PhiMinus, &params).state_vector();

    // drift band Delta-phi ~ zeta_p * pi after 10^3 gates
    let zeta_p = 0.1;
    let n_gates = 200;
    let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, params.t_g);
    plan.echo = EchoSpec::halfway(EchoPulse::SigmaZPair);
    plan.noise = NoiseModel::PhaseDrift(phase_drift_config(zeta_p, params.t_g));
    plan.seed = 11;

    let fids = propagate_sequential_gates(&plan, &params, layout, &initial, &target, n_gates)
        .unwrap();
    let mean_err = 1.0 - fids.iter().sum::<f64>() / fids.len() as f64;
    let worst = fids.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("# {n_gates} sequential gates, zeta_p = {zeta_p}");
    println!("# mean error {mean_err:.3e}, worst single-gate fidelity {worst:.6}");
    println!("gate,fidelity");
    for (k, f) in fids.iter().enumerate().step_by(20) {
        println!("{k},{f:.8}");
    }
}
