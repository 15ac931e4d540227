use std::path::Path;
use std::process::ExitCode;

use geomgate::runner;

const USAGE: &str = "usage:
  geomgate run <config>   run the experiment described by a key=value config
  geomgate list           list experiments, their figures and config keys

set GEOMGATE_WORKERS to limit the number of worker threads (default: all cores).";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.iter().map(|s| s.as_str()).collect::<Vec<_>>().as_slice() {
        ["run", config] => match runner::run_file(Path::new(config)) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("geomgate: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        ["list"] => {
            print!("{}", runner::list_text());
            ExitCode::SUCCESS
        }
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
    }
}
