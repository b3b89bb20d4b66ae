#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RunConfig, OUT_DIR_ENV};
use output::Clock;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerics(_) => 1,
            CliError::Budget(_) => 3,
            _ => 2,
        }
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = RunConfig::resolve(cli, std::env::var_os(OUT_DIR_ENV).map(Into::into))?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let clock = Clock::start();
    let done = match cfg.command.as_str() {
        "verify" => commands::verify(&cfg, &clock),
        "eisenstein" => commands::eisenstein(&cfg, &clock),
        "loglaw" => commands::loglaw(&cfg, &clock),
        "dm" => commands::dm(&cfg, &clock),
        _ => commands::orbit(&cfg, &clock),
    }?;
    println!(
        "{} -> {} [{}: {}]",
        cfg.command,
        done.path.display(),
        if done.gate.passed { "pass" } else { "FAIL" },
        done.gate.detail
    );
    Ok(done.gate.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cuspflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
