//! Energy norm and the error quantities `eta = w - pi w`, `xi = pi w - W`
//! and `e = w - W`.
//!
//! ```text
//! |||w|||_E^2 = ||(b - div(alpha)/2)^{1/2} u||^2 + eps^-1 ||p||^2 + eps^-1 ||q||^2
//!             + sum_j { sum_{i=0}^{N-1} a1/2 ||[[u]]_{i,y}||^2_{J_j}
//!                       + (a1/2 + lambda1) ||[[u]]_{N,y}||^2_{J_j} }
//!             + (the same over horizontal edges with a2, lambda2)
//! ```
//!
//! and `|||w|||_2` keeps only the first line. The sup-norm of `eta_u` is a
//! sampled sup-norm: the maximum over the error-quadrature nodes and the
//! element corners.

use thiserror::Error;

use crate::assembly::FluxParams;
use crate::basis::{affine_map, legendre_table, BasisTable, QuadratureRule};
use crate::dg_space::{DGField, DGSolution, DgError, EdgePoly, Side};
use crate::mesh::Mesh2D;
use crate::problems::{ProblemError, ProblemSpec};
use crate::projections::{interpolate_exact, Interpolant, ProjectionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("quadrature with {points} points is too coarse for degree {degree}")]
    QuadratureTooCoarse { points: usize, degree: usize },
    #[error("field lives on N = {field} but the mesh has N = {mesh}")]
    MeshMismatch { field: usize, mesh: usize },
    #[error(transparent)]
    Space(#[from] DgError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Squared components of the energy norm and the two totals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorBreakdown {
    pub u_weighted_l2_sq: f64,
    pub p_scaled_l2_sq: f64,
    pub q_scaled_l2_sq: f64,
    pub jump_x_sq: f64,
    pub jump_y_sq: f64,
    /// `|||.|||_E`
    pub total_e: f64,
    /// `|||.|||_2`
    pub total_2: f64,
}

impl ErrorBreakdown {
    fn new(u: f64, p: f64, q: f64, jx: f64, jy: f64) -> Self {
        let l2 = u + p + q;
        Self {
            u_weighted_l2_sq: u,
            p_scaled_l2_sq: p,
            q_scaled_l2_sq: q,
            jump_x_sq: jx,
            jump_y_sq: jy,
            total_e: (l2 + jx + jy).sqrt(),
            total_2: l2.sqrt(),
        }
    }

    /// `|||.|||_E^2`.
    pub fn total_e_sq(&self) -> f64 {
        self.u_weighted_l2_sq + self.p_scaled_l2_sq + self.q_scaled_l2_sq + self.jump_x_sq + self.jump_y_sq
    }

    pub fn jumps_sq(&self) -> f64 {
        self.jump_x_sq + self.jump_y_sq
    }
}

fn check(k: usize, n: usize, mesh: &Mesh2D, quad: &QuadratureRule, min_points: usize) -> Result<(), NormError> {
    if n != mesh.n() {
        return Err(NormError::MeshMismatch { field: n, mesh: mesh.n() });
    }
    if quad.len() < min_points {
        return Err(NormError::QuadratureTooCoarse {
            points: quad.len(),
            degree: k,
        });
    }
    Ok(())
}

/// `int c (g - F)^2` for the DG field `F`, element by element.
fn weighted_l2_sq<G, C>(field: &DGField, g: G, c: C, mesh: &Mesh2D, table: &BasisTable, quad: &QuadratureRule) -> f64
where
    G: Fn(f64, f64) -> f64,
    C: Fn(f64, f64) -> f64,
{
    let k = field.degree();
    let n = field.n();
    let nq = quad.len();
    let mut total = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let rect = mesh.element(ix, iy);
            let jac = 0.25 * rect.hx() * rect.hy();
            let block = field.block(ix, iy);
            let mut local = 0.0;
            for qy in 0..nq {
                let y = affine_map(rect.y0, rect.y1, quad.nodes[qy]);
                for qx in 0..nq {
                    let x = affine_map(rect.x0, rect.x1, quad.nodes[qx]);
                    let mut v = 0.0;
                    for nn in 0..=k {
                        for m in 0..=k {
                            v += block[nn * (k + 1) + m] * table.values[m][qx] * table.values[nn][qy];
                        }
                    }
                    let d = g(x, y) - v;
                    local += quad.weights[qx] * quad.weights[qy] * c(x, y) * d * d;
                }
            }
            total += jac * local;
        }
    }
    total
}

/// `int_{t0}^{t1} c(s) a(s)^2 ds`.
fn edge_sq<C: Fn(f64) -> f64>(quad: &QuadratureRule, t0: f64, t1: f64, a: &EdgePoly, c: C) -> f64 {
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&r, &w)| {
            let v = a.eval(r);
            w * c(affine_map(t0, t1, r)) * v * v
        })
        .sum::<f64>()
        * 0.5
        * (t1 - t0)
}

/// `|||w|||_E` with its components.
pub fn energy_norm(
    w: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<ErrorBreakdown, NormError> {
    let (k, n) = (w.degree(), w.n());
    check(k, n, mesh, quad, k + 3)?;
    let table = legendre_table(k, &quad.nodes);
    let inv_eps = 1.0 / problem.epsilon;
    let zero = |_: f64, _: f64| 0.0;
    let u = weighted_l2_sq(&w.u, zero, |x, y| problem.reaction_weight(x, y), mesh, &table, quad);
    let p = inv_eps * weighted_l2_sq(&w.p, zero, |_, _| 1.0, mesh, &table, quad);
    let q = inv_eps * weighted_l2_sq(&w.q, zero, |_, _| 1.0, mesh, &table, quad);

    let (mut jx, mut jy) = (0.0, 0.0);
    for j in 0..n {
        let (y0, y1) = mesh.mesh_y.interval(j);
        let (x0, x1) = mesh.mesh_x.interval(j);
        for e in 0..=n {
            let extra_x = if e == n { flux.lambda1 } else { 0.0 };
            let extra_y = if e == n { flux.lambda2 } else { 0.0 };
            let xe = mesh.mesh_x.points[e];
            let ye = mesh.mesh_y.points[e];
            jx += edge_sq(quad, y0, y1, &w.u.jump_x(e, j)?, |s| 0.5 * problem.a1(xe, s) + extra_x);
            jy += edge_sq(quad, x0, x1, &w.u.jump_y(e, j)?, |s| 0.5 * problem.a2(s, ye) + extra_y);
        }
    }
    Ok(ErrorBreakdown::new(u, p, q, jx, jy))
}

/// `|||pi w - W|||_E`, with `pi w` built from the composite interpolant using
/// `quad` for the projections as well.
pub fn supercloseness_error(
    w_h: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<ErrorBreakdown, NormError> {
    let pi_w = interpolate_exact(problem, mesh, w_h.degree(), quad, Interpolant::Composite)?;
    supercloseness_from(&pi_w, w_h, problem, mesh, flux, quad)
}

/// As [`supercloseness_error`] with a precomputed `pi w`.
pub fn supercloseness_from(
    pi_w: &DGSolution,
    w_h: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<ErrorBreakdown, NormError> {
    let xi = pi_w.axpy(-1.0, w_h)?;
    energy_norm(&xi, problem, mesh, flux, quad)
}

/// `|||w - Z|||_2` for the exact solution `w` and a discrete triple `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct L2Error {
    pub u_weighted_l2_sq: f64,
    pub p_scaled_l2_sq: f64,
    pub q_scaled_l2_sq: f64,
    pub total_2: f64,
}

fn l2_error(z: &DGSolution, problem: &ProblemSpec, mesh: &Mesh2D, quad: &QuadratureRule) -> Result<L2Error, NormError> {
    let ex = problem.require_exact()?;
    let table = legendre_table(z.degree(), &quad.nodes);
    let inv_eps = 1.0 / problem.epsilon;
    let u = weighted_l2_sq(&z.u, |x, y| ex.u(x, y), |x, y| problem.reaction_weight(x, y), mesh, &table, quad);
    let p = inv_eps * weighted_l2_sq(&z.p, |x, y| ex.p(x, y), |_, _| 1.0, mesh, &table, quad);
    let q = inv_eps * weighted_l2_sq(&z.q, |x, y| ex.q(x, y), |_, _| 1.0, mesh, &table, quad);
    Ok(L2Error {
        u_weighted_l2_sq: u,
        p_scaled_l2_sq: p,
        q_scaled_l2_sq: q,
        total_2: (u + p + q).sqrt(),
    })
}

/// Sampled `max |u - F|` over the tensor quadrature nodes and the element
/// corners, each element's polynomial evaluated on its own closure.
fn sampled_sup<G: Fn(f64, f64) -> f64>(field: &DGField, g: G, mesh: &Mesh2D, nodes: &[f64]) -> Result<f64, NormError> {
    let mut pts: Vec<f64> = nodes.to_vec();
    pts.push(-1.0);
    pts.push(1.0);
    let n = field.n();
    let mut sup = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let rect = mesh.element(ix, iy);
            for &ry in &pts {
                for &rx in &pts {
                    // tensor nodes and the four corners only
                    let corner_x = rx.abs() == 1.0;
                    let corner_y = ry.abs() == 1.0;
                    if corner_x != corner_y {
                        continue;
                    }
                    let (x, y) = (affine_map(rect.x0, rect.x1, rx), affine_map(rect.y0, rect.y1, ry));
                    let d = (g(x, y) - field.eval(ix, iy, rx, ry)?).abs();
                    sup = sup.max(d);
                }
            }
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrueError {
    /// `|||w - W|||_2` and its parts.
    pub l2: L2Error,
    /// Sampled sup-norm of `eta_u = u - P^- u`.
    pub linf_eta_u: f64,
}

/// `w - W` in `|||.|||_2` and the sampled sup-norm of `eta_u`, both with the
/// error quadrature `quad_err` (which also builds `P^- u`).
pub fn true_error(
    w_h: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    quad_err: &QuadratureRule,
) -> Result<TrueError, NormError> {
    let k = w_h.degree();
    check(k, w_h.n(), mesh, quad_err, k + 3)?;
    let l2 = l2_error(w_h, problem, mesh, quad_err)?;
    let pi_w = interpolate_exact(problem, mesh, k, quad_err, Interpolant::Composite)?;
    let ex = problem.require_exact()?;
    let linf_eta_u = sampled_sup(&pi_w.u, |x, y| ex.u(x, y), mesh, &quad_err.nodes)?;
    Ok(TrueError { l2, linf_eta_u })
}

/// Interpolation errors `eta = w - pi w`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterpolationError {
    /// Sampled `||eta_u||_inf`.
    pub linf_eta_u: f64,
    /// `|||eta|||_2`.
    pub total_2: f64,
    /// `eps^{-1/2} ||eta_p||`.
    pub p_scaled: f64,
    /// `eps^{-1/2} ||eta_q||`.
    pub q_scaled: f64,
    /// `max_i sum_j ||(eta_u)^-_{i,y}||^2_{J_j}` over the vertical edges
    /// `x_1..x_N`, plus the same over horizontal edges.
    pub max_line_trace_sq: f64,
}

pub fn interpolation_error(
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    k: usize,
    quad_err: &QuadratureRule,
) -> Result<InterpolationError, NormError> {
    check(k, mesh.n(), mesh, quad_err, k + 3)?;
    let pi_w = interpolate_exact(problem, mesh, k, quad_err, Interpolant::Composite)?;
    interpolation_error_of(&pi_w, problem, mesh, quad_err)
}

/// As [`interpolation_error`] with a precomputed `pi w`.
pub fn interpolation_error_of(
    pi_w: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    quad_err: &QuadratureRule,
) -> Result<InterpolationError, NormError> {
    let ex = problem.require_exact()?;
    let l2 = l2_error(pi_w, problem, mesh, quad_err)?;
    let linf_eta_u = sampled_sup(&pi_w.u, |x, y| ex.u(x, y), mesh, &quad_err.nodes)?;
    let n = mesh.n();
    let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
    for i in 1..=n {
        let xe = mesh.mesh_x.points[i];
        let ye = mesh.mesh_y.points[i];
        let (mut sx, mut sy) = (0.0, 0.0);
        for j in 0..n {
            let (y0, y1) = mesh.mesh_y.interval(j);
            let (x0, x1) = mesh.mesh_x.interval(j);
            let tx = pi_w.u.trace_x(i, j, Side::Minus)?;
            let ty = pi_w.u.trace_y(i, j, Side::Minus)?;
            sx += trace_error_sq(quad_err, y0, y1, &tx, |s| ex.u(xe, s));
            sy += trace_error_sq(quad_err, x0, x1, &ty, |s| ex.u(s, ye));
        }
        max_x = max_x.max(sx);
        max_y = max_y.max(sy);
    }
    Ok(InterpolationError {
        linf_eta_u,
        total_2: l2.total_2,
        p_scaled: l2.p_scaled_l2_sq.sqrt(),
        q_scaled: l2.q_scaled_l2_sq.sqrt(),
        max_line_trace_sq: max_x + max_y,
    })
}

/// `int_{t0}^{t1} (g - a)^2`.
fn trace_error_sq<G: Fn(f64) -> f64>(quad: &QuadratureRule, t0: f64, t1: f64, a: &EdgePoly, g: G) -> f64 {
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&r, &w)| {
            let d = g(affine_map(t0, t1, r)) - a.eval(r);
            w * d * d
        })
        .sum::<f64>()
        * 0.5
        * (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{apply_b, from_vector, num_dofs};
    use crate::basis::gauss_legendre_rule;
    use crate::mesh::{build_mesh_2d, MeshConfig};
    use crate::problems::{problem, ProblemKind};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn setup(k: usize) -> (ProblemSpec, Mesh2D, QuadratureRule) {
        let eps = 1e-4;
        let cfg = MeshConfig::new(8, k as f64 + 2.0, eps);
        (
            problem(ProblemKind::LayerConst, eps).unwrap(),
            build_mesh_2d(&cfg, &cfg).unwrap(),
            gauss_legendre_rule(k + 3),
        )
    }

    fn random(rng: &mut StdRng, k: usize) -> DGSolution {
        let v: Vec<f64> = (0..num_dofs(k, 8)).map(|_| rng.random_range(-1.0..1.0)).collect();
        from_vector(k, 8, &v).unwrap()
    }

    #[test]
    fn zero_triple_has_zero_norm() {
        let (p, mesh, quad) = setup(1);
        let b = energy_norm(&DGSolution::zeros(1, 8), &p, &mesh, &FluxParams::default(), &quad).unwrap();
        assert_eq!(b, ErrorBreakdown::default());
    }

    #[test]
    fn energy_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        for k in [1, 2] {
            let (p, mesh, quad) = setup(k);
            let flux = FluxParams::new(0.7, 1.3).unwrap();
            for _ in 0..20 {
                let w = random(&mut rng, k);
                let e = energy_norm(&w, &p, &mesh, &flux, &quad).unwrap();
                let b = apply_b(&w, &w, &p, &mesh, &flux, &quad).unwrap();
                assert!((e.total_e_sq() - b).abs() <= 1e-12 * e.total_e_sq(), "{} vs {b}", e.total_e_sq());
            }
        }
    }

    #[test]
    fn homogeneity_and_ordering() {
        let mut rng = StdRng::seed_from_u64(9);
        let (p, mesh, quad) = setup(1);
        let flux = FluxParams::default();
        let w = random(&mut rng, 1);
        let e = energy_norm(&w, &p, &mesh, &flux, &quad).unwrap();
        let c = -3.5;
        let ec = energy_norm(&w.scaled(c), &p, &mesh, &flux, &quad).unwrap();
        assert!((ec.total_e - c.abs() * e.total_e).abs() <= 1e-13 * ec.total_e);
        assert!(e.total_e >= e.total_2);
    }

    #[test]
    fn interpolant_has_zero_supercloseness_error() {
        let (p, mesh, quad) = setup(1);
        let pi_w = interpolate_exact(&p, &mesh, 1, &quad, Interpolant::Composite).unwrap();
        let s = supercloseness_error(&pi_w, &p, &mesh, &FluxParams::default(), &quad).unwrap();
        assert_eq!(s.total_e, 0.0);
    }

    #[test]
    fn polynomial_exact_solution_is_reproduced() {
        let eps = 1e-3;
        let k = 2;
        let p = problem(ProblemKind::PolyPatch, eps).unwrap();
        let cfg = MeshConfig::new(8, 4.0, eps);
        let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
        let quad = gauss_legendre_rule(k + 5);
        let pi_w = interpolate_exact(&p, &mesh, k, &quad, Interpolant::Composite).unwrap();
        let t = true_error(&pi_w, &p, &mesh, &quad).unwrap();
        assert!(t.l2.total_2 <= 1e-13, "{}", t.l2.total_2);
        assert!(t.linf_eta_u <= 1e-13);
    }

    #[test]
    fn rejects_mismatched_mesh() {
        let (p, mesh, quad) = setup(1);
        let w = DGSolution::zeros(1, 4);
        assert!(matches!(
            energy_norm(&w, &p, &mesh, &FluxParams::default(), &quad),
            Err(NormError::MeshMismatch { .. })
        ));
    }
}
