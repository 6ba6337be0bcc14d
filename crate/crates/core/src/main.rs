use std::process::ExitCode;

use clap::Parser;
use qsagnac::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(m) => {
            for o in &m.outputs {
                println!("{}", o.path);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qsagnac: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
