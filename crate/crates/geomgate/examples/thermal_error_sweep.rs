//! Deterministic gate error against a thermal phonon background, as a
//! function of the driving strength, with the refocusing pulse at half the
//! gate time. Also prints the closed-form fidelity prediction at the
//! strongest driving.
//!
//!     cargo run --release --example thermal_error_sweep

use geomgate::analysis::{thermal_fidelity_closed_form, BellLabel, BellTarget};
use geomgate::evolve::{qubit_fidelities, StaticPropagator};
use geomgate::hamiltonian::{build_dss, EchoPulse, EchoSpec};
use geomgate::linalg::{self, c};
use geomgate::params::{resolve_single_drive, TrapSpec};
use geomgate::qcore::{thermal_state, HilbertLayout};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    // n_max = 20 keeps this example reasonably quick (the headline runs use 25)
    let layout = HilbertLayout::new(20).unwrap();
    let f = layout.fock_dim();
    let nbars = [0.0, 0.5, 1.0];

    // every |1 0 n1 n2> basis ket at once; thermal averages reweight them
    let mut cols = linalg::zeros(layout.dim(), f * f);
    for n1 in 0..f {
        for n2 in 0..f {
            cols[(layout.index(1, 0, n1, n2), n1 * f + n2)] = c(1.0, 0.0);
        }
    }
    let echo = EchoSpec::halfway(EchoPulse::SigmaZPair).operator(layout).unwrap().mat;

    println!("p,omega_d_mhz,err_nbar0,err_nbar05,err_nbar1");
    for p in [11i64, 17, 25, 41, 57, 79] {
        let params = resolve_single_drive(&trap, 8, 2, p).unwrap();
        let sp = StaticPropagator::new(&build_dss(&params, layout).unwrap()).unwrap();
        let half = 0.5 * params.t_g;
        let evolved = sp.apply(half, &(&echo * &sp.apply(half, &cols)));
        let target = BellTarget::for_params(BellLabel::PsiPlus, &params).state_vector();
        let fids = qubit_fidelities(layout, &evolved, &target);
        let errs: Vec<f64> = nbars
            .iter()
            .map(|&nbar| {
                let w = thermal_state(layout, nbar, nbar).unwrap();
                1.0 - (0..f * f).map(|j| w[(j, j)].re * fids[j]).sum::<f64>()
            })
            .collect();
        println!(
            "{p},{:.3},{:.3e},{:.3e},{:.3e}",
            params.omega_d / (2.0 * PI * 1e6),
            errs[0],
            errs[1],
            errs[2]
        );
    }

    // at t_g the trajectories close and the formula returns exactly 1;
    // mid-gate the displacement error is exposed
    let params = resolve_single_drive(&trap, 8, 2, 79).unwrap();
    for &nbar in &nbars {
        let f_gate = thermal_fidelity_closed_form(&params, nbar, nbar, params.t_g).unwrap();
        let f_mid = thermal_fidelity_closed_form(&params, nbar, nbar, 0.7 * params.t_g).unwrap();
        println!("# closed form, nbar={nbar}: F(t_g) = {f_gate:.6}, F(0.7 t_g) = {f_mid:.6}");
    }
}
