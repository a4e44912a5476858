use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hg_compton_cli::{execute, parse_config_with, with_threads, Overrides, RunError, THREADS_ENV};

/// Differential Compton cross sections for Hermite-Gaussian photon beams.
#[derive(Debug, Parser)]
#[command(name = "hg-compton", version)]
struct Cli {
    /// Configuration file (`key = value` lines with dotted keys).
    config: PathBuf,
    /// Override `scan.mode`: angular, spectrum, validate or kn-reference.
    #[arg(long)]
    mode: Option<String>,
    /// Override `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `output.units`: natural or barn.
    #[arg(long)]
    units: Option<String>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let err = serde_json::json!({ "status": "error", "kind": kind, "message": message });
    eprintln!("{err}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                "config",
                &format!("cannot read {}: {e}", cli.config.display()),
                2,
            )
        }
    };
    let over = Overrides {
        mode: cli.mode,
        out: cli.out,
        units: cli.units,
    };
    let cfg = match parse_config_with(&text, &over) {
        Ok(c) => c,
        Err(e) => return fail("config", &e.to_string(), 2),
    };
    if !cfg.defaults_applied.is_empty() {
        eprintln!("defaults applied: {}", cfg.defaults_applied.join(", "));
    }
    let result = match with_threads(cli.threads, || execute(&cfg)) {
        Ok(r) => r,
        Err(e) => return fail("config", &e, 2),
    };
    let report = match result.and_then(|r| r.write().map(|_| r)) {
        Ok(r) => r,
        Err(e) => return fail(e.kind(), &e.to_string(), e.exit_code()),
    };
    for line in &report.summary {
        println!("{line}");
    }
    for (path, _) in &report.files {
        println!("wrote {}", path.display());
    }
    match &report.failure {
        Some(msg) => fail(
            "numerical",
            msg,
            RunError::Numerical(String::new()).exit_code(),
        ),
        None => ExitCode::SUCCESS,
    }
}
