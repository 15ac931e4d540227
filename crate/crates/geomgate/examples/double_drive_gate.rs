//! The doubly-driven gate: a second, weaker microwave drive protects the
//! gate against intensity fluctuations of the first. Runs the noiseless
//! gate and a small noisy ensemble with the sigma^y sigma^y refocusing
//! pulse.
//!
//!     cargo run --release --example double_drive_gate

use geomgate::analysis::{xket, BellLabel, BellTarget};
use geomgate::evolve::{propagate_noisy, HamiltonianKind, NoiseModel, PropagationPlan};
use geomgate::hamiltonian::{EchoPulse, EchoSpec};
use geomgate::noise::intensity_config;
use geomgate::params::{resolve_double_drive, TrapSpec};
use geomgate::qcore::{thermal_state, HilbertLayout, State};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    let params = resolve_double_drive(&trap, 32, 2, 79, 47).unwrap();
    println!(
        "# t_g = {:.2} us, Omega_d/2pi = {:.2} MHz, second drive {:.2} MHz",
        params.t_g * 1e6,
        params.omega_d / (2.0 * PI * 1e6),
        params.omega_d2 / (2.0 * PI * 1e6)
    );

    // n_max = 3 keeps the run short; the acceptance-grade runs use 5
    let layout = HilbertLayout::new(3).unwrap();
    let ket = xket(1.0, -1.0);
    let rho_q = faer::Mat::from_fn(4, 4, |i, j| ket[(i, 0)] * ket[(j, 0)].conj());
    let phonons = thermal_state(layout, 0.0, 0.0).unwrap();
    let initial = State::from_qubit_phonon(layout, &rho_q, &phonons).unwrap();

    let mut plan = PropagationPlan::new(HamiltonianKind::DoubleDrive, params.t_g);
    plan.steps = 100;
    plan.n_traj = 1;
    let target = BellTarget::for_params(BellLabel::PsiTildeMinus, &params).state_vector();
    let f0 = propagate_noisy(&plan, &params, layout, &initial, &target).unwrap().mean_fidelity;
    println!("# noiseless |+-> -> |Psi~->: F(t_g) = {f0:.6}");

    plan.echo = EchoSpec::halfway(EchoPulse::SigmaYPair);
    plan.noise = NoiseModel::FirstDriveIntensity(intensity_config(params.omega_d, 1.0e-4, 1.0e-3));
    plan.n_traj = 50;
    plan.seed = 9;
    // the pulse maps the target to |Psi~+>
    let target = BellTarget::for_params(BellLabel::PsiTildePlus, &params).state_vector();
    let res = propagate_noisy(&plan, &params, layout, &initial, &target).unwrap();
    println!(
        "# zeta_I = 1e-4 on the first drive, {} trajectories: error {:.2e} +- {:.1e}",
        plan.n_traj,
        1.0 - res.mean_fidelity,
        res.stderr
    );
}
