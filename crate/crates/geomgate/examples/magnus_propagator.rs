//! Analytic second-order Magnus propagator against the exact evolution:
//! tracks <sigma^z_1>(t) with both and prints the running deviation, and
//! lists the effective couplings (J_eff, K_eff, M_eff, DeltaOmega).
//!
//!     cargo run --release --example magnus_propagator

use geomgate::evolve::StaticPropagator;
use geomgate::hamiltonian::build_dss;
use geomgate::magnus::{couplings, u_app_from_engine, MagnusEngine};
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
    let (j_eff, k_eff, m_eff, delta_omega) = couplings(&params);
    println!("# J_eff(1,2)/2pi  = {:+.3} kHz", j_eff[0][1] / (2.0 * PI * 1e3));
    println!("# K_eff(1,2)/2pi  = {:+.3} kHz", k_eff[0][1] / (2.0 * PI * 1e3));
    println!("# M_eff(1,2)/2pi  = {:+.3} kHz", m_eff[0][1] / (2.0 * PI * 1e3));
    println!("# dOmega(1,1)/2pi = {:+.3} kHz", delta_omega[0][0] / (2.0 * PI * 1e3));

    let layout = HilbertLayout::new(8).unwrap();
    let sp = StaticPropagator::new(&build_dss(&params, layout).unwrap()).unwrap();
    let engine = MagnusEngine::new(&params, layout).unwrap();
    let sz1 = build_elementary(layout, Elem::SigmaZ(1)).unwrap().mat;
    let psi0 = State::basis_ket(layout, 1, 0, 0, 0);

    let expect = |psi: &faer::Mat<num_complex::Complex64>| -> f64 {
        let y = &sz1 * psi;
        (0..psi.nrows()).map(|i| (psi[(i, 0)].conj() * y[(i, 0)]).re).sum()
    };

    println!("t_us,sz1_exact,sz1_magnus");
    let mut worst = 0.0f64;
    for k in 0..=40 {
        let t = 2.0 * params.t_g * k as f64 / 40.0;
        let ze = expect(&sp.apply(t, &psi0));
        let zm = expect(&(&u_app_from_engine(&engine, t).unwrap().mat * &psi0));
        worst = worst.max((ze - zm).abs());
        println!("{:.3},{:.6},{:.6}", t * 1e6, ze, zm);
    }
    println!("# max deviation {worst:.4}");
}
