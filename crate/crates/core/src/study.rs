//! Convergence studies: sweep `eps` and `N`, run
//! mesh -> assemble -> solve -> norms for each cell, and tabulate errors and
//! observed rates.
//!
//! A failing cell is recorded in its row and the sweep carries on.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::assembly::{assemble, num_dofs, FluxParams};
use crate::basis::gauss_legendre_rule;
use crate::mesh::{build_mesh_2d, MeshConfig};
use crate::norms::{interpolation_error_of, supercloseness_from, true_error};
use crate::problems::{make_problem, ProblemKind};
use crate::projections::{interpolate_exact, Interpolant};
use crate::solver::{solve, SolverConfig};

/// Exact CSV header.
pub const CSV_HEADER: &str = "problem,k,epsilon,rho,N,dofs,superclose_E,superclose_u,superclose_p,superclose_q,superclose_jumps,l2_err,linf_eta_u,rate_superclose,rate_l2,log_adjusted_ratio,solve_seconds";

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
    #[error("nothing to emit: the table is empty")]
    EmptyTable,
    #[error("every row of the sweep failed")]
    AllRowsFailed,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown output format {0:?} (expected csv or md)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(StudyError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Markdown => "md",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub k: usize,
    pub n_values: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Defaults to `k + 2`.
    pub rho: Option<f64>,
    pub flux: FluxParams,
    /// Gauss points per direction for assembly; defaults to `k + 3`.
    pub quad_order: Option<usize>,
    pub solver: SolverConfig,
    pub format: OutputFormat,
    pub out: Option<std::path::PathBuf>,
}

impl RunConfig {
    pub fn new(problem: &str, k: usize, n_values: Vec<usize>, epsilons: Vec<f64>) -> Self {
        Self {
            problem: problem.to_string(),
            k,
            n_values,
            epsilons,
            rho: None,
            flux: FluxParams::default(),
            quad_order: None,
            solver: SolverConfig::default(),
            format: OutputFormat::Csv,
            out: None,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(self.k as f64 + 2.0)
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order.unwrap_or(self.k + 3)
    }

    /// Error norms and interpolants use at least `k + 5` points.
    pub fn error_quad_order(&self) -> usize {
        self.quad_order().max(self.k + 5)
    }
}

/// Checks every sweep cell before any work starts and lists all violations.
pub fn validate_config(cfg: &RunConfig) -> Result<(), StudyError> {
    let mut errs = Vec::new();
    let kind = cfg.problem.parse::<ProblemKind>();
    if let Err(e) = &kind {
        errs.push(e.to_string());
    }
    if cfg.k == 0 {
        errs.push("degree k must be at least 1".to_string());
    }
    if cfg.n_values.is_empty() {
        errs.push("the N sweep is empty".to_string());
    }
    if cfg.epsilons.is_empty() {
        errs.push("the epsilon sweep is empty".to_string());
    }
    if cfg.quad_order() < cfg.k + 3 {
        errs.push(format!(
            "quadrature order {} is below k + 3 = {}",
            cfg.quad_order(),
            cfg.k + 3
        ));
    }
    if let Err(e) = cfg.flux.validate() {
        errs.push(e.to_string());
    }
    if let Err(e) = cfg.solver.validate() {
        errs.push(e.to_string());
    }
    let rho = cfg.rho();
    if rho < cfg.k as f64 + 2.0 {
        errs.push(format!("rho = {rho} is below k + 2 = {}", cfg.k + 2));
    }
    for &eps in &cfg.epsilons {
        if let Ok(kind) = &kind {
            if let Err(e) = make_problem(kind.name(), eps) {
                errs.push(format!("eps = {eps:e}: {e}"));
            }
        }
        for &n in &cfg.n_values {
            for v in MeshConfig::new(n, rho, eps).violations() {
                errs.push(format!("N = {n}, eps = {eps:e}: {v}"));
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(StudyError::InvalidConfig(errs))
    }
}

/// Measured errors of one successful cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    /// `|||pi w - W|||_E` and its parts (square roots of the squared parts).
    pub superclose_e: f64,
    pub superclose_u: f64,
    pub superclose_p: f64,
    pub superclose_q: f64,
    pub superclose_jumps: f64,
    /// `|||w - W|||_2`
    pub l2_err: f64,
    /// Sampled `||u - P^- u||_inf`.
    pub linf_eta_u: f64,
    /// `e / (N^{-(k+1)} ln^{1/2} N)`
    pub log_adjusted_ratio: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub problem: String,
    pub k: usize,
    pub epsilon: f64,
    pub rho: f64,
    pub n: usize,
    pub dofs: usize,
    /// `None` when the cell failed.
    pub metrics: Option<RowMetrics>,
    pub rate_superclose: Option<f64>,
    pub rate_l2: Option<f64>,
    /// Why the cell failed; not part of the CSV.
    pub failure: Option<String>,
    /// `|||w - pi w|||_2`, kept for the triangle-inequality check; not part
    /// of the CSV.
    pub eta_total_2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.metrics.is_none())
    }

    /// Rows for one `eps`, in sweep order.
    pub fn for_epsilon(&self, eps: f64) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter(move |r| r.epsilon == eps)
    }
}

/// Observed order between `(n1, e1)` and `(n2, e2)`; `log2(e1 / e2)` when
/// `n2 = 2 n1`.
pub fn observed_rate(n1: usize, e1: f64, n2: usize, e2: f64) -> f64 {
    (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln()
}

/// Least-squares slope of `-ln e` against `ln N`.
pub fn fit_rate(ns: &[usize], es: &[f64]) -> f64 {
    assert_eq!(ns.len(), es.len());
    assert!(ns.len() >= 2, "a rate needs at least two points");
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `e / (N^{-(k+1)} sqrt(ln N))`.
pub fn log_adjusted_ratio(e: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    e / (nf.powi(-(k as i32 + 1)) * nf.ln().sqrt())
}

struct CellOutput {
    metrics: RowMetrics,
    eta_total_2: f64,
}

fn run_cell(cfg: &RunConfig, eps: f64, n: usize) -> Result<CellOutput, String> {
    let k = cfg.k;
    let problem = make_problem(&cfg.problem, eps).map_err(|e| e.to_string())?;
    let mcfg = MeshConfig::new(n, cfg.rho(), eps);
    let mesh = build_mesh_2d(&mcfg, &mcfg).map_err(|e| e.to_string())?;
    let quad = gauss_legendre_rule(cfg.quad_order());
    let quad_err = gauss_legendre_rule(cfg.error_quad_order());
    let sys = assemble(&problem, &mesh, k, &cfg.flux, &quad).map_err(|e| e.to_string())?;
    let (w_h, stats) = solve(&sys, &cfg.solver).map_err(|e| e.to_string())?;
    let pi_w = interpolate_exact(&problem, &mesh, k, &quad_err, Interpolant::Composite).map_err(|e| e.to_string())?;
    let xi = supercloseness_from(&pi_w, &w_h, &problem, &mesh, &cfg.flux, &quad_err).map_err(|e| e.to_string())?;
    let err = true_error(&w_h, &problem, &mesh, &quad_err).map_err(|e| e.to_string())?;
    let eta = interpolation_error_of(&pi_w, &problem, &mesh, &quad_err).map_err(|e| e.to_string())?;
    Ok(CellOutput {
        metrics: RowMetrics {
            superclose_e: xi.total_e,
            superclose_u: xi.u_weighted_l2_sq.sqrt(),
            superclose_p: xi.p_scaled_l2_sq.sqrt(),
            superclose_q: xi.q_scaled_l2_sq.sqrt(),
            superclose_jumps: xi.jumps_sq().sqrt(),
            l2_err: err.l2.total_2,
            linf_eta_u: err.linf_eta_u,
            log_adjusted_ratio: log_adjusted_ratio(xi.total_e, n, k),
            solve_seconds: stats.seconds,
        },
        eta_total_2: eta.total_2,
    })
}

/// Runs the whole sweep (`eps` outer, `N` inner). Fails only on an invalid
/// configuration; per-cell failures land in the rows.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceTable, StudyError> {
    validate_config(cfg)?;
    let name = cfg
        .problem
        .parse::<ProblemKind>()
        .map(|k| k.name().to_string())
        .unwrap_or_else(|_| cfg.problem.clone());
    let mut rows = Vec::new();
    for &eps in &cfg.epsilons {
        let mut prev: Option<(usize, RowMetrics)> = None;
        for &n in &cfg.n_values {
            let outcome = run_cell(cfg, eps, n);
            let (metrics, failure, eta_total_2) = match outcome {
                Ok(c) => (Some(c.metrics), None, Some(c.eta_total_2)),
                Err(msg) => (None, Some(msg), None),
            };
            let (rate_superclose, rate_l2) = match (prev, metrics) {
                (Some((pn, pm)), Some(m)) => (
                    Some(observed_rate(pn, pm.superclose_e, n, m.superclose_e)),
                    Some(observed_rate(pn, pm.l2_err, n, m.l2_err)),
                ),
                _ => (None, None),
            };
            prev = metrics.map(|m| (n, m));
            rows.push(ConvergenceRow {
                problem: name.clone(),
                k: cfg.k,
                epsilon: eps,
                rho: cfg.rho(),
                n,
                dofs: num_dofs(cfg.k, n),
                metrics,
                rate_superclose,
                rate_l2,
                failure,
                eta_total_2,
            });
        }
    }
    Ok(ConvergenceTable { rows })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn row_fields(r: &ConvergenceRow) -> Vec<String> {
    let m = r.metrics;
    let get = |f: fn(&RowMetrics) -> f64| opt(m.as_ref().map(f));
    vec![
        r.problem.clone(),
        r.k.to_string(),
        format!("{:e}", r.epsilon),
        format!("{:e}", r.rho),
        r.n.to_string(),
        r.dofs.to_string(),
        get(|m| m.superclose_e),
        get(|m| m.superclose_u),
        get(|m| m.superclose_p),
        get(|m| m.superclose_q),
        get(|m| m.superclose_jumps),
        get(|m| m.l2_err),
        get(|m| m.linf_eta_u),
        opt(r.rate_superclose),
        opt(r.rate_l2),
        get(|m| m.log_adjusted_ratio),
        get(|m| m.solve_seconds),
    ]
}

/// CSV with [`CSV_HEADER`]; floats in shortest round-trip `{:e}` form, empty
/// fields for absent rates and failed cells.
pub fn write_csv<W: Write>(table: &ConvergenceTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(out, "{}", row_fields(r).join(","))?;
    }
    Ok(())
}

/// Markdown table with the CSV columns; failed cells are listed below it.
pub fn write_markdown<W: Write>(table: &ConvergenceTable, mut out: W) -> std::io::Result<()> {
    let cols: Vec<&str> = CSV_HEADER.split(',').collect();
    writeln!(out, "| {} |", cols.join(" | "))?;
    writeln!(out, "|{}", "---|".repeat(cols.len()))?;
    for r in &table.rows {
        writeln!(out, "| {} |", row_fields(r).join(" | "))?;
    }
    let failures: Vec<_> = table.rows.iter().filter_map(|r| r.failure.as_ref().map(|f| (r, f))).collect();
    if !failures.is_empty() {
        writeln!(out)?;
        for (r, f) in failures {
            writeln!(out, "- N = {}, eps = {:e}: {f}", r.n, r.epsilon)?;
        }
    }
    Ok(())
}

pub fn write_table<W: Write>(table: &ConvergenceTable, format: OutputFormat, out: W) -> Result<(), StudyError> {
    if table.is_empty() {
        return Err(StudyError::EmptyTable);
    }
    let res = match format {
        OutputFormat::Csv => write_csv(table, out),
        OutputFormat::Markdown => write_markdown(table, out),
    };
    res.map_err(|source| StudyError::Io {
        path: "<output>".to_string(),
        source,
    })
}

/// Writes the table to `path`.
pub fn emit(table: &ConvergenceTable, format: OutputFormat, path: &Path) -> Result<(), StudyError> {
    if table.is_empty() {
        return Err(StudyError::EmptyTable);
    }
    let io_err = |source| StudyError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let res = match format {
        OutputFormat::Csv => write_csv(table, &mut w),
        OutputFormat::Markdown => write_markdown(table, &mut w),
    };
    res.and_then(|_| w.flush()).map_err(io_err)
}

/// Parses CSV produced by [`write_csv`]. Failure messages and the
/// interpolation error are not stored in the CSV and come back as `None`.
pub fn parse_csv(text: &str) -> Result<ConvergenceTable, StudyError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => {
            return Err(StudyError::Parse {
                line: 1,
                msg: "missing or wrong header".to_string(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let bad = |msg: String| StudyError::Parse { line: line_no, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 17 {
            return Err(bad(format!("expected 17 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        let metrics = if f[6].is_empty() {
            None
        } else {
            Some(RowMetrics {
                superclose_e: num(f[6])?,
                superclose_u: num(f[7])?,
                superclose_p: num(f[8])?,
                superclose_q: num(f[9])?,
                superclose_jumps: num(f[10])?,
                l2_err: num(f[11])?,
                linf_eta_u: num(f[12])?,
                log_adjusted_ratio: num(f[15])?,
                solve_seconds: num(f[16])?,
            })
        };
        rows.push(ConvergenceRow {
            problem: f[0].to_string(),
            k: int(f[1])?,
            epsilon: num(f[2])?,
            rho: num(f[3])?,
            n: int(f[4])?,
            dofs: int(f[5])?,
            metrics,
            rate_superclose: maybe(f[13])?,
            rate_l2: maybe(f[14])?,
            failure: None,
            eta_total_2: None,
        });
    }
    Ok(ConvergenceTable { rows })
}
