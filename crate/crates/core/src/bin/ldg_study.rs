//! `ldg-study`: convergence tables for the LDG scheme on Bakhvalov-type meshes.
//!
//! Exit codes: 0 on success, 1 for configuration or output errors, 2 when
//! every cell of the sweep failed to solve.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use ldg_core::assembly::FluxParams;
use ldg_core::solver::{SolverConfig, SolverMethod};
use ldg_core::study::{emit, run_convergence, write_table, OutputFormat, RunConfig, StudyError};

#[derive(Debug, Parser)]
#[command(name = "ldg-study", version, about = "Convergence study for the LDG method on a Bakhvalov-type mesh")]
struct Cli {
    /// poly_patch, layer_const or layer_var
    #[arg(long)]
    problem: String,
    /// Polynomial degree k
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Comma-separated element counts per direction
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Comma-separated perturbation parameters
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    /// Mesh grading parameter (default k + 2)
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda2: f64,
    /// Gauss points per direction for assembly (default k + 3)
    #[arg(long)]
    quad_order: Option<usize>,
    /// direct or gmres
    #[arg(long, default_value = "direct")]
    solver: String,
    /// Relative residual tolerance of the linear solve
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// csv or md
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let method: SolverMethod = match cli.solver.parse() {
        Ok(m) => m,
        Err(e) => return config_error(e),
    };
    let format: OutputFormat = match cli.format.parse() {
        Ok(f) => f,
        Err(e) => return config_error(e),
    };
    let cfg = RunConfig {
        problem: cli.problem,
        k: cli.degree,
        n_values: cli.n,
        epsilons: cli.epsilon,
        rho: cli.rho,
        flux: FluxParams {
            lambda1: cli.lambda1,
            lambda2: cli.lambda2,
        },
        quad_order: cli.quad_order,
        solver: SolverConfig {
            method,
            rel_tol: cli.tol,
            ..SolverConfig::default()
        },
        format,
        out: cli.out,
    };

    let table = match run_convergence(&cfg) {
        Ok(t) => t,
        Err(e) => return config_error(e),
    };
    for r in &table.rows {
        if let Some(f) = &r.failure {
            eprintln!("N = {}, eps = {:e}: {f}", r.n, r.epsilon);
        }
    }
    let written = match &cfg.out {
        Some(path) => emit(&table, cfg.format, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_table(&table, cfg.format, &mut lock).and_then(|_| {
                lock.flush().map_err(|source| StudyError::Io {
                    path: "<stdout>".to_string(),
                    source,
                })
            })
        }
    };
    if let Err(e) = written {
        return config_error(e);
    }
    if table.all_failed() {
        eprintln!("error: {}", StudyError::AllRowsFailed);
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
