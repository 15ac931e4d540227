//! Drive an experiment from an in-memory flat key=value config, exactly as
//! the `geomgate` binary does from a file. Writes the table and the run
//! manifest next to it.
//!
//!     cargo run --release --example config_driven_run

use geomgate::config::ConfigMap;
use geomgate::runner::{list_text, run_config};

fn main() {
    println!("{}", list_text());

    let cfg = ConfigMap::parse_str(
        "\
# quick thermal sweep at reduced truncation
experiment = thermal_sweep
omega_x = 4 MHz
omega_z = 1 MHz
eta_1 = 0.225
r = 8
k = 2
p_list = 11, 25, 57
nbar_list = 0, 0.5
n_max = 10
output = /tmp/geomgate_example_thermal.csv
",
    )
    .unwrap();
    run_config(&cfg).unwrap();

    let table = std::fs::read_to_string("/tmp/geomgate_example_thermal.csv").unwrap();
    println!("{table}");
}
