use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use qpm_cli::exit::EXIT_CONFIG;
use qpm_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    match execute(&cli, &mut std::io::stdout()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpm {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
