//! Monte-Carlo gate error under collective dephasing noise (global
//! Ornstein-Uhlenbeck frequency fluctuation) for a few driving strengths:
//! the strong carrier drive dresses the qubits and suppresses the noise.
//!
//!     cargo run --release --example dephasing_monte_carlo

use geomgate::analysis::{dephasing_predictions, BellLabel, BellTarget};
use geomgate::evolve::{
    propagate_noisy, HamiltonianKind, NoiseModel, PropagationPlan,
};
use geomgate::hamiltonian::{EchoPulse, EchoSpec};
use geomgate::noise::dephasing_config;
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
    let t2 = 25.0e-6;

    println!("# T2 = {} us, 200 trajectories per point", t2 * 1e6);
    println!("p,omega_d_mhz,error,stderr,t2_dressed_us");
    for p in [11i64, 25, 57] {
        let params = resolve_single_drive(&trap, 8, 2, p).unwrap();
        let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, params.t_g);
        plan.steps = 160;
        plan.echo = EchoSpec::halfway(EchoPulse::SigmaZPair);
        plan.noise = NoiseModel::Dephasing(dephasing_config(t2, 0.1));
        plan.n_traj = 200;
        plan.seed = 7;
        let target = BellTarget::for_params(BellLabel::PhiMinus, &params).state_vector();
        let res = propagate_noisy(&plan, &params, layout, &initial, &target).unwrap();
        let pred = dephasing_predictions(t2, 0.1 * t2, params.omega_d).unwrap();
        println!(
            "{p},{:.3},{:.3e},{:.1e},{:.1}",
            params.omega_d / (2.0 * PI * 1e6),
            1.0 - res.mean_fidelity,
            res.stderr,
            pred.t2_tilde * 1e6
        );
    }
}
