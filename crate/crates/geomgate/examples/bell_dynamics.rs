//! Noiseless gate dynamics: fidelity with the target Bell state and the
//! qubit populations over two gate times (the content of the paper's
//! fidelity/population figure).
//!
//!     cargo run --release --example bell_dynamics

use geomgate::analysis::{BellLabel, BellTarget};
use geomgate::evolve::{noiseless_time_series, qubit_fidelities, HamiltonianKind, PropagationPlan};
use geomgate::params::{resolve_single_drive, TrapSpec};
use geomgate::qcore::{build_elementary, Elem, HilbertLayout, State};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    let params = resolve_single_drive(&trap, 8, 2, 57).unwrap();
    println!(
        "# t_g = {:.2} us, Omega_d/2pi = {:.3} MHz, J12/2pi = {:.2} kHz",
        params.t_g * 1e6,
        params.omega_d / (2.0 * PI * 1e6),
        params.j12 / (2.0 * PI * 1e3)
    );

    let layout = HilbertLayout::new(8).unwrap();
    let initial = State::pure(layout, &State::basis_ket(layout, 1, 0, 0, 0)).unwrap();
    let mut plan = PropagationPlan::new(HamiltonianKind::SingleDrive, 2.0 * params.t_g);
    plan.steps = 100;
    let (times, cols) = noiseless_time_series(&plan, &params, layout, &initial).unwrap();

    let target = BellTarget::for_params(BellLabel::PsiPlus, &params).state_vector();
    let fids = qubit_fidelities(layout, &cols, &target);
    let sz1 = build_elementary(layout, Elem::SigmaZ(1)).unwrap().mat;

    let y = &sz1 * &cols;
    println!("t_us,bell_fidelity,sz1");
    for (j, &t) in times.iter().enumerate() {
        let mut z = 0.0;
        for i in 0..cols.nrows() {
            z += (cols[(i, j)].conj() * y[(i, j)]).re;
        }
        println!("{:.3},{:.6},{:.6}", t * 1e6, fids[j], z);
    }
}
