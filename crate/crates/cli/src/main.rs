//! Command-line front end of the PML convergence laboratory.
//!
//! Exit status: 0 on full success, 2 when some points failed (a `failures.csv`
//! manifest is written next to the results), 1 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pmlconv::harness::{
    run_ntd, run_oracle_study, run_solve, run_sweep, write_failures, write_ntd, write_outcome, write_solve,
    PointFailure, RunConfig,
};
use pmlconv::PmlError;

#[derive(Parser)]
#[command(name = "pmlconv", version, about = "PML convergence studies for periodic-surface scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// |w₀| and |w₁| of the layered-medium oracle against P, with decay fits.
    Oracle(Common),
    /// One PML-truncated solve; writes the field over D.
    Solve(Common),
    /// E_rel against L for each wavenumber, with decay fits.
    Sweep(Common),
    /// Cell NtD blocks, lateral operators and marching-operator spectra.
    Ntd(Common),
}

#[derive(Args)]
struct Common {
    /// INI configuration file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "PMLP_THREADS")]
    threads: Option<usize>,
    /// Relative tolerance of the oracle quadrature.
    #[arg(long)]
    tol: Option<f64>,
}

enum Failure {
    Config(String),
    Run(anyhow::Error),
}

fn load(c: &Common) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(t) = c.tol {
        cfg.oracle.tol = t;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    if c.threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    Ok(cfg)
}

/// Runs the command; Ok(true) when every point succeeded.
fn execute(cmd: &Command) -> std::result::Result<bool, Failure> {
    let common = match cmd {
        Command::Oracle(c) | Command::Solve(c) | Command::Sweep(c) | Command::Ntd(c) => c,
    };
    let cfg = load(common)?;
    let geometry = match cmd {
        Command::Oracle(_) => Ok(()),
        Command::Solve(_) | Command::Ntd(_) => cfg.check_geometry(cfg.problem.wavenumber, cfg.pml.thickness),
        Command::Sweep(_) => cfg
            .sweep
            .k_values
            .iter()
            .try_for_each(|&k| cfg.check_geometry(k, cfg.reference_l().unwrap_or(cfg.pml.thickness))),
    };
    geometry.map_err(|e| Failure::Config(e.to_string()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Run(e.into()))?;
    let out = &common.out;
    pool.install(|| -> std::result::Result<bool, Failure> {
        let run = |r: pmlconv::Result<bool>| {
            r.with_context(|| format!("writing results to {}", out.display())).map_err(Failure::Run)
        };
        match cmd {
            Command::Oracle(_) => {
                let outcome = run_oracle_study(&cfg);
                run(write_outcome(&outcome, out, "oracle_summary.txt").map(|_| outcome.is_complete()))
            }
            Command::Sweep(_) => {
                let outcome = run_sweep(&cfg);
                run(write_outcome(&outcome, out, "sweep_summary.txt").map(|_| outcome.is_complete()))
            }
            Command::Solve(_) => match run_solve(&cfg) {
                Ok((field, report)) => run(write_solve(&field, &report, &cfg, out).map(|_| true)),
                Err(e) => failed(&cfg, e, out),
            },
            Command::Ntd(_) => match run_ntd(&cfg) {
                Ok(dump) => run(write_ntd(&dump, out).map(|_| true)),
                Err(e) => failed(&cfg, e, out),
            },
        }
    })
}

/// A failed single run: configuration problems exit with 1, anything else is
/// recorded in the manifest.
fn failed(cfg: &RunConfig, e: PmlError, out: &std::path::Path) -> std::result::Result<bool, Failure> {
    if let PmlError::Config(_) = e {
        return Err(Failure::Config(e.to_string()));
    }
    let f =
        PointFailure { wavenumber: cfg.problem.wavenumber, thickness: Some(cfg.pml.thickness), message: e.to_string() };
    write_failures(&[f], out)
        .with_context(|| format!("writing the manifest to {}", out.display()))
        .map_err(Failure::Run)?;
    eprintln!("error: {e}");
    Ok(false)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some points failed; see failures.csv in the output directory");
            ExitCode::from(2)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
