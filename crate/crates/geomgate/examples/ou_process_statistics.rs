//! Sanity checks of the stochastic machinery: stationary statistics of the
//! Ornstein-Uhlenbeck process from its exact one-step update, and the
//! variance of its time integral against the closed form.
//!
//!     cargo run --release --example ou_process_statistics

use geomgate::noise::{integrated_ou_variance, ou_step, traj_rng, OUConfig};

fn main() {
    let tau = 1.0e-3;
    let t2 = 25.0e-6;
    let cfg = OUConfig { tau, c: 2.0 / (t2 * tau * tau), x0: 0.0 };
    let n = 100_000usize;

    // stationary mean and variance after a burn-in of many relaxation times
    let mut mean = 0.0;
    let mut var = 0.0;
    for k in 0..n {
        let mut rng = traj_rng(17, k as u64);
        let x = ou_step(0.0, 8.0 * tau, &cfg, &mut rng);
        mean += x;
        var += x * x;
    }
    mean /= n as f64;
    var = var / n as f64 - mean * mean;
    let var_th = cfg.c * tau / 2.0;
    println!("stationary mean {mean:+.3e} (expected 0)");
    println!("stationary var  {var:.5e} vs c*tau/2 = {var_th:.5e}");

    // variance of Y = int_0^tf O(t) dt by trapezoid over 20 steps
    let t_f = 2.0 * tau;
    let steps = 20usize;
    let dt = t_f / steps as f64;
    let mut acc = 0.0;
    let m = 20_000usize;
    for k in 0..m {
        let mut rng = traj_rng(33, k as u64);
        let mut x = 0.0;
        let mut y = 0.0;
        for _ in 0..steps {
            let x1 = ou_step(x, dt, &cfg, &mut rng);
            y += 0.5 * dt * (x + x1);
            x = x1;
        }
        acc += y * y;
    }
    let var_y = acc / m as f64;
    println!(
        "integrated var  {var_y:.5e} vs closed form {:.5e}",
        integrated_ou_variance(&cfg, t_f)
    );
}
