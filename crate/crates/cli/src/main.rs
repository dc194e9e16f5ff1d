//! `cubeporos`: porosity scans, packing constants, sparse witnesses and
//! codimension estimates for sets described in JSON.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when the report is written
//! but records a failure at the chosen resolution (no free cube within the
//! search depth, an unbounded measure cell, or a failed check).

mod commands;
mod config;
mod error;
mod io;

use std::process::ExitCode;

use clap::Parser;
use cubeporos::SetModel;

use crate::commands::{analyze, emit, error_report, gamma, invert, plotdata, witness};
use crate::config::{resolve, Cli, Command};
use crate::error::CliError;
use crate::io::{load_family, load_set, write_out};

const THREADS_VAR: &str = "CUBEPOROS_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("{THREADS_VAR}: {e}")))
}

fn need_set(set: Option<SetModel>, command: &str) -> Result<SetModel, CliError> {
    set.ok_or_else(|| CliError::Input(format!("{command} needs --set FILE")))
}

fn run(cmd: &Command) -> Result<ExitCode, CliError> {
    let f = cmd.flags();
    let set = f.set.as_deref().map(|p| load_set(p, f.budget)).transpose()?;
    let family = f.family.as_deref().map(load_family).transpose()?;
    let hint = set.as_ref().map(SetModel::dim).or(family.as_ref().map(|s| s.root.dim()));
    let cfg = resolve(cmd, hint)?;
    let result = match cmd {
        Command::Analyze(_) => analyze::run(&cfg, &need_set(set, cmd.name())?),
        Command::Witness(_) => witness::run(&cfg, &need_set(set, cmd.name())?),
        Command::Invert(_) => invert::run(&cfg, &invert::family(&cfg, family)),
        Command::Gamma(_) => gamma::run(&cfg, &need_set(set, cmd.name())?),
        Command::Plotdata(_) => match (set, family) {
            (Some(e), _) => plotdata::run_set(&cfg, &e),
            (None, Some(s)) => plotdata::run_family(&s),
            (None, None) => Err(CliError::Input("plotdata needs --set FILE or --family FILE".into())),
        },
    };
    match result {
        Ok(o) => {
            emit(f.out.as_deref(), cfg.format, &o)?;
            Ok(if o.budget_failure { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        Err(CliError::Lib(e)) => {
            write_out(f.out.as_deref(), &error_report(&cfg, &e))?;
            Err(CliError::Lib(e))
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| run(&cli.command));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
