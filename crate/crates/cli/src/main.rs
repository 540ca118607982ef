//! `vessaff` command-line front end. Each subcommand reads its inputs, calls
//! the library once, and writes the result.
//!
//! Exit codes: 0 success, 1 invalid arguments or failed checks, 2 I/O or
//! file-format errors.

mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use error::CliResult;

fn run(argv: Vec<String>) -> CliResult<()> {
    let argv = config::expand(argv, &Cli::command())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match &cli.command {
        Command::Affinity(a) => commands::affinity(a),
        Command::Loss(a) => commands::loss(a),
        Command::Strengthen(a) => commands::strengthen(a),
        Command::Eval(a) => commands::eval(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Synth(a) => commands::synth(a),
        Command::Selfcheck(a) => commands::selfcheck(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
