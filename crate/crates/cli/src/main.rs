use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use nzefg::cli::{Cli, Command};
use nzefg::commands::{cmd_run, cmd_sweep, cmd_verify};

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            cmd_run(&args.config()?)?;
            Ok(true)
        }
        Command::Sweep(args) => {
            let cfg = args.solve.config(nzefg::experiment::EtaSpec::Auto(1.0))?;
            let report = cmd_sweep(&cfg, &args.grid()?, args.workers())?;
            Ok(report.cells.iter().any(|c| c.result.is_ok()))
        }
        Command::Verify(args) => Ok(cmd_verify(&args.spec()?)?.ok()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
