use std::process::ExitCode;

use clap::Parser;
use groundmine_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("groundmine: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
