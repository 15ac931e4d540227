//! Phase-space trajectories of the two radial modes for a spin eigenstate
//! |++>: at strong driving the centre-of-mass trajectory is a closed loop
//! (geometric gate), at weak driving it stays open.
//!
//!     cargo run --release --example phase_space_trajectories

use geomgate::analysis::xket;
use geomgate::evolve::phase_space_trajectory;
use geomgate::params::{resolve_single_drive, TrapSpec};
use geomgate::qcore::{thermal_state, HilbertLayout, State};
use std::f64::consts::PI;

fn main() {
    let trap = TrapSpec {
        omega_x: 2.0 * PI * 4.0e6,
        omega_z: 2.0 * PI * 1.0e6,
        eta_1: 0.225,
    };
    let layout = HilbertLayout::new(12).unwrap();
    let ket = xket(1.0, 1.0);
    let rho_q = faer::Mat::from_fn(4, 4, |i, j| ket[(i, 0)] * ket[(j, 0)].conj());
    let phonons = thermal_state(layout, 0.5, 0.5).unwrap();
    let initial = State::from_qubit_phonon(layout, &rho_q, &phonons).unwrap();

    for (label, omega_d_hz) in [("strong (5 MHz)", 5.0e6), ("weak (200 kHz)", 2.0e5)] {
        let mut params = resolve_single_drive(&trap, 8, 2, 57).unwrap();
        params.omega_d = 2.0 * PI * omega_d_hz;
        let times: Vec<f64> = (0..=60).map(|k| params.t_g * k as f64 / 60.0).collect();
        let [com, zz] = phase_space_trajectory(&params, layout, &initial, &times).unwrap();
        let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        println!("# {label}: com return distance {:.4}, zz max excursion {:.4}",
            dist(com[60], com[0]),
            zz.iter().map(|&p| dist(p, zz[0])).fold(0.0, f64::max));
        println!("t_us,com_x,com_p");
        for (k, &t) in times.iter().enumerate() {
            println!("{:.3},{:.5},{:.5}", t * 1e6, com[k].0, com[k].1);
        }
    }
}
