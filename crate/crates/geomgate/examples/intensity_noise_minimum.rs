//! Gate error under microwave-intensity noise: stronger driving suppresses
//! dephasing but amplifies the intensity fluctuation dOmega = zeta Omega_d,
//! so the error has a minimum at intermediate driving.
//!
//!     cargo run --release --example intensity_noise_minimum

use geomgate::analysis::{BellLabel, BellTarget};
use geomgate::evolve::{propagate_noisy, HamiltonianKind, NoiseModel, PropagationPlan};
use geomgate::hamiltonian::{EchoPulse, EchoSpec};
use geomgate::noise::intensity_config;
use geomgate::params::{resolve_single_drive, TrapSpec};
use geomgate::qcore::{HilbertLayout, State};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    let layout = HilbertLayout::new(5).unwrap();
    let initial = State::pure(layout, &State::basis_ket(layout, 0, 0, 0, 0)).unwrap();
    let zeta_i = 1.0e-4;
    let tau = 1.0e-3;

    println!("# zeta_I = {zeta_i:.1e}, tau = 1 ms, 100 trajectories per point");
    println!("p,omega_d_mhz,error,stderr");
    for p in [17i64, 41, 79, 157] {
        let params = resolve_single_drive(&trap, 8, 2, p).unwrap();
        let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, params.t_g);
        plan.steps = 200;
        plan.echo = EchoSpec::halfway(EchoPulse::SigmaZPair);
        plan.noise = NoiseModel::Intensity(intensity_config(params.omega_d, zeta_i, tau));
        plan.n_traj = 100;
        plan.seed = 5;
        let target = BellTarget::for_params(BellLabel::PhiMinus, &params).state_vector();
        let res = propagate_noisy(&plan, &params, layout, &initial, &target).unwrap();
        println!(
            "{p},{:.3},{:.3e},{:.1e}",
            params.omega_d / (2.0 * PI * 1e6),
            1.0 - res.mean_fidelity,
            res.stderr
        );
    }
}
