use std::process::ExitCode;

use clap::Parser;
use lattice_series::cli::Cli;
use lattice_series::report::{execute, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.into_config() {
        Ok(config) => execute(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code)
}
