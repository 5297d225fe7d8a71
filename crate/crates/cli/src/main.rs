//! Command-line front end: run one experiment config, write its artifacts.
//!
//! Usage: nlspec <config.json> [--out-dir DIR] [--threads N]
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 assertion or
//! invariant failure (the violated invariant is named on stderr).

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use runner::{run, CliError};

struct Args {
    config: PathBuf,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
}

const USAGE: &str = "usage: nlspec <config.json> [--out-dir DIR] [--threads N]";

fn parse_args() -> Result<Args, CliError> {
    let mut config = None;
    let mut out_dir = None;
    let mut threads = None;
    let mut it = std::env::args().skip(1);
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--help" | "-h" => {
                println!("{USAGE}");
                std::process::exit(0);
            }
            "--out-dir" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--out-dir needs a value\n{USAGE}")))?;
                out_dir = Some(PathBuf::from(v));
            }
            "--threads" => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--threads needs a value\n{USAGE}")))?;
                threads = Some(v.parse::<usize>().map_err(|_| {
                    CliError::Usage(format!("--threads needs an integer, got `{v}`"))
                })?);
            }
            other if other.starts_with('-') => {
                return Err(CliError::Usage(format!("unknown flag `{other}`\n{USAGE}")));
            }
            other => {
                if config.replace(PathBuf::from(other)).is_some() {
                    return Err(CliError::Usage(format!(
                        "multiple config paths given\n{USAGE}"
                    )));
                }
            }
        }
    }
    let config = config.ok_or_else(|| CliError::Usage(format!("missing config path\n{USAGE}")))?;
    if threads.is_none() {
        if let Ok(v) = std::env::var("NLSPEC_THREADS") {
            threads = Some(v.parse::<usize>().map_err(|_| {
                CliError::Usage(format!("NLSPEC_THREADS needs an integer, got `{v}`"))
            })?);
        }
    }
    Ok(Args {
        config,
        out_dir,
        threads,
    })
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match args.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build();
            match pool {
                Ok(pool) => pool.install(|| run(&args.config, args.out_dir.as_deref())),
                Err(e) => Err(CliError::Usage(format!("cannot build thread pool: {e}"))),
            }
        }
        None => run(&args.config, args.out_dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
