//! Linear solvers for the assembled system: sparse LU (default) and
//! restarted GMRES with a block Gauss-Seidel preconditioner.
//!
//! Every solve ends with a residual certificate recomputed serially from the
//! stored matrix entries; a solve whose certificate exceeds the tolerance is
//! reported as a failure.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use faer::prelude::*;
use thiserror::Error;

use crate::assembly::{from_vector, LinearSystem};
use crate::dg_space::DGSolution;
use crate::sparse::{norm2, CsrMatrix, DenseLu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("relative tolerance {0} must lie in (0, 1e-6]")]
    BadTolerance(f64),
    #[error("max_iter and restart must be positive")]
    BadIterationLimits,
    #[error("unknown solver {0:?} (expected direct or gmres)")]
    UnknownMethod(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("diagonal block of element {0} is singular")]
    SingularBlock(usize),
    #[error("GMRES did not converge in {iterations} iterations (relative residual {relative_residual:e})")]
    NotConverged { iterations: usize, relative_residual: f64 },
    #[error("residual certificate {relative_residual:e} exceeds tolerance {tol:e}")]
    Certificate { relative_residual: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    #[default]
    Direct,
    Gmres,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Gmres => "gmres",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "gmres" => Ok(Self::Gmres),
            other => Err(SolverError::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rel_tol: f64,
    /// Total GMRES iterations across restarts.
    pub max_iter: usize,
    /// Krylov dimension per GMRES cycle.
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Direct,
            rel_tol: 1e-10,
            max_iter: 2000,
            restart: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) {
            return Err(SolverError::BadTolerance(self.rel_tol));
        }
        if self.max_iter == 0 || self.restart == 0 {
            return Err(SolverError::BadIterationLimits);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub method: SolverMethod,
    /// GMRES iterations, or refinement steps after the LU solve.
    pub iterations: usize,
    /// Certified `||b - A w|| / ||b||`.
    pub relative_residual: f64,
    pub seconds: f64,
}

/// `||b - A x|| / ||b||` (or `||A x||` when `b = 0`), accumulated entry by
/// entry from the stored triplets.
pub fn residual_certificate(matrix: &CsrMatrix, rhs: &[f64], x: &[f64]) -> f64 {
    let mut r = rhs.to_vec();
    for (i, j, v) in matrix.triplets() {
        r[i] -= v * x[j];
    }
    let b = norm2(rhs);
    if b > 0.0 {
        norm2(&r) / b
    } else {
        norm2(&r)
    }
}

pub fn solve(sys: &LinearSystem, cfg: &SolverConfig) -> Result<(DGSolution, SolveStats), SolverError> {
    let (x, stats) = solve_vector(sys, cfg)?;
    let w = from_vector(sys.k, sys.n, &x).expect("solution length matches the system");
    Ok((w, stats))
}

/// As [`solve`], returning the raw coefficient vector.
pub fn solve_vector(sys: &LinearSystem, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveStats), SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let (x, iterations) = match cfg.method {
        SolverMethod::Direct => direct(sys, cfg.rel_tol)?,
        SolverMethod::Gmres => gmres(sys, cfg)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let relative_residual = residual_certificate(&sys.matrix, &sys.rhs, &x);
    if !(relative_residual <= cfg.rel_tol) {
        return Err(SolverError::Certificate {
            relative_residual,
            tol: cfg.rel_tol,
        });
    }
    Ok((
        x,
        SolveStats {
            method: cfg.method,
            iterations,
            relative_residual,
            seconds,
        },
    ))
}

const MAX_REFINEMENT: usize = 3;

/// Sparse LU with up to three steps of iterative refinement.
fn direct(sys: &LinearSystem, tol: f64) -> Result<(Vec<f64>, usize), SolverError> {
    let n = sys.num_dofs();
    let lu = sys
        .matrix
        .to_faer()
        .sp_lu()
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let mut x = sys.rhs.clone();
    lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(&mut x, n, 1));
    let bnorm = norm2(&sys.rhs).max(f64::MIN_POSITIVE);
    let mut steps = 0;
    while steps < MAX_REFINEMENT {
        let mut r = sys.residual(&x);
        if norm2(&r) <= 0.1 * tol * bnorm {
            break;
        }
        lu.solve_in_place(faer::MatMut::from_column_major_slice_mut(&mut r, n, 1));
        for (xi, di) in x.iter_mut().zip(&r) {
            *xi += di;
        }
        steps += 1;
    }
    Ok((x, steps))
}

/// Forward block Gauss-Seidel sweep over element blocks in lexicographic
/// order (`ix` fastest), which follows the upwind direction of the
/// convection coupling.
struct BlockGaussSeidel {
    block: usize,
    diag: Vec<DenseLu>,
}

impl BlockGaussSeidel {
    fn new(a: &CsrMatrix, block: usize) -> Result<Self, SolverError> {
        let nblocks = a.nrows() / block;
        let mut diag = Vec::with_capacity(nblocks);
        for e in 0..nblocks {
            let lo = e * block;
            let mut d = vec![0.0; block * block];
            for i in 0..block {
                let (cols, vals) = a.row(lo + i);
                for (&c, &v) in cols.iter().zip(vals) {
                    if c >= lo && c < lo + block {
                        d[i * block + (c - lo)] = v;
                    }
                }
            }
            let lu = DenseLu::new(block, &d);
            if lu.pivot_ratio() == 0.0 {
                return Err(SolverError::SingularBlock(e));
            }
            diag.push(lu);
        }
        Ok(Self { block, diag })
    }

    /// `z = M^{-1} r`.
    fn apply(&self, a: &CsrMatrix, r: &[f64]) -> Vec<f64> {
        let bs = self.block;
        let mut z = vec![0.0; r.len()];
        for (e, lu) in self.diag.iter().enumerate() {
            let lo = e * bs;
            let mut local: Vec<f64> = (0..bs)
                .map(|i| {
                    let (cols, vals) = a.row(lo + i);
                    let lower: f64 = cols
                        .iter()
                        .zip(vals)
                        .take_while(|(&c, _)| c < lo)
                        .map(|(&c, &v)| v * z[c])
                        .sum();
                    r[lo + i] - lower
                })
                .collect();
            lu.solve_in_place(&mut local);
            z[lo..lo + bs].copy_from_slice(&local);
        }
        z
    }
}

/// Right-preconditioned restarted GMRES; the minimized residual is the true
/// one.
fn gmres(sys: &LinearSystem, cfg: &SolverConfig) -> Result<(Vec<f64>, usize), SolverError> {
    let a = &sys.matrix;
    let b = &sys.rhs;
    let n = b.len();
    let block = 3 * (sys.k + 1) * (sys.k + 1);
    let pre = BlockGaussSeidel::new(a, block)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let target = cfg.rel_tol * bnorm;
    let m = cfg.restart;
    let mut total = 0;
    while total < cfg.max_iter {
        let r = sys.residual(&x);
        let beta = norm2(&r);
        if beta <= target {
            return Ok((x, total));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            if total >= cfg.max_iter {
                break;
            }
            let z = pre.apply(a, &v[j]);
            let mut w = a.matvec(&z);
            zs.push(z);
            // modified Gram-Schmidt
            for (i, vi) in v.iter().enumerate() {
                let hij: f64 = w.iter().zip(vi).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = h[j][j].hypot(h[j + 1][j]);
            if d == 0.0 {
                break;
            }
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            if g[j + 1].abs() <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / hn).collect());
        }
        if used == 0 {
            break;
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            for (xk, zk) in x.iter_mut().zip(z) {
                *xk += yi * zk;
            }
        }
    }
    let final_rel = norm2(&sys.residual(&x)) / bnorm;
    if final_rel <= cfg.rel_tol {
        return Ok((x, total));
    }
    Err(SolverError::NotConverged {
        iterations: total,
        relative_residual: final_rel,
    })
}
