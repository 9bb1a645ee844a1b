//! `gausspert`: command-line front end for `gausspert-core`.
//!
//! Every run prints one versioned JSON report (or a CSV table for
//! table-shaped results) and exits with 0 on success, 1 on numerical
//! non-convergence, 2 on parameter errors and 3 when a checked inequality
//! fails.

mod args;
mod commands;
mod report;
mod specs;

use std::fs;
use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use gausspert_core::Error;

use args::{Cli, Command, Format};
use report::{FileConfig, Settings};

enum Failure {
    Core(Error),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Core(Error::NonConvergence { .. } | Error::NonFinite(_)) => 1,
            Failure::Core(Error::InvalidParameter(_)) | Failure::Usage(_) => 2,
            Failure::Core(Error::Violation(_)) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => e.fmt(f),
            Failure::Usage(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn settings(cli: &Cli) -> Result<Settings, Failure> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            toml::from_str::<FileConfig>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let st = Settings {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        format: cli.format.or(file.format).unwrap_or(Format::Json),
        threads: cli.threads.or(file.threads),
        output: cli.output.clone().or(file.output),
        quad: file.quad.unwrap_or_default(),
        grid: file.grid.unwrap_or_default(),
    };
    st.quad.validate()?;
    st.grid.validate()?;
    Ok(st)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let st = settings(&cli)?;
    if let Some(n) = st.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    let (report, parameters) = match &cli.command {
        Command::Fourg(a) => (commands::fourg(a, &st)?, serde_json::to_value(a)),
        Command::Kernel(a) => (commands::kernel(a, &st)?, serde_json::to_value(a)),
        Command::Kato(a) => (commands::kato(a, &st)?, serde_json::to_value(a)),
        Command::Series(a) => (commands::series(a, &st)?, serde_json::to_value(a)),
        Command::Bound(a) => (commands::bound(a, &st)?, serde_json::to_value(a)),
        Command::Split(a) => (commands::split_cmd(a, &st)?, serde_json::to_value(a)),
        Command::Verify(a) => (commands::verify(a, &st)?, serde_json::to_value(a)),
    };
    let parameters = parameters.expect("arguments serialize");
    let bytes = match st.format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&report.envelope(cli.command.name(), parameters, &st))
                .expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let table = report.table.as_ref().ok_or_else(|| {
                Failure::Usage(format!("{} has no tabular output; use --format json", cli.command.name()))
            })?;
            report::write_csv(table).map_err(|e| Failure::Usage(e.to_string()))?
        }
    };
    match &st.output {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(&bytes).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
