//! Assembly of the monolithic `(U, P, Q)` system `B(W; Z) = (f, v)`.
//!
//! The bilinear form is the sum of
//!
//! ```text
//! B1 = ((b - div alpha) U, v) + eps^-1 (P, s) + eps^-1 (Q, r)
//! B2 = (U, s_x) + sum_{i=1}^{N-1} <U^-, [[s]]>_i              (+ y-analogue with r)
//! B3 = (P, v_x) + sum_{i=0}^{N-1} <P^+, [[v]]>_i - <P^-, v^->_N   (+ y-analogue with Q)
//! B4 = -(a1 U, v_x) - sum_{i=1}^{N} <a1 U^-, [[v]]>_i + lambda1 <U^-, v^->_N
//!      (+ y-analogue with a2, lambda2)
//! ```
//!
//! with `[[v]]_0 = v^+` and `[[v]]_N = -v^-`. Rows are test functions
//! `(v, s, r)`, columns trial coefficients `(U, P, Q)`; the global index of
//! local basis `l` of field `f` on element `e = iy N + ix` is
//! `(3 e + f) (k+1)^2 + l`.

use thiserror::Error;

use crate::basis::{affine_map, legendre_table, BasisTable, QuadratureRule};
use crate::dg_space::{DGField, DGSolution, DgError, Side};
use crate::mesh::{Mesh2D, MeshError};
use crate::problems::ProblemSpec;
use crate::sparse::CsrMatrix;

/// Largest admissible boundary penalty.
pub const MAX_LAMBDA: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("quadrature with {points} points is too coarse for degree {degree} (need at least k + 3)")]
    QuadratureTooCoarse { points: usize, degree: usize },
    #[error("penalty {name} = {value} outside [0, {max}]", max = MAX_LAMBDA)]
    BadPenalty { name: &'static str, value: f64 },
    #[error("degree must be at least 1")]
    DegreeZero,
    #[error(transparent)]
    Space(#[from] DgError),
    #[error("vector of length {0} does not match {1} unknowns")]
    BadLength(usize, usize),
}

/// Boundary penalties on the outflow edges `x = 1` and `y = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for FluxParams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl FluxParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self, AssemblyError> {
        let f = Self { lambda1, lambda2 };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        for (name, value) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(0.0..=MAX_LAMBDA).contains(&value) {
                return Err(AssemblyError::BadPenalty { name, value });
            }
        }
        Ok(())
    }
}

/// Field slot inside an element's dof block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U = 0,
    P = 1,
    Q = 2,
}

pub fn num_dofs(k: usize, n: usize) -> usize {
    3 * n * n * (k + 1) * (k + 1)
}

/// Global index of local basis `local` of `field` on element `(ix, iy)`.
#[inline]
pub fn dof_index(k: usize, n: usize, ix: usize, iy: usize, field: Field, local: usize) -> usize {
    let nb = (k + 1) * (k + 1);
    ((iy * n + ix) * 3 + field as usize) * nb + local
}

/// Flattens a solution into the global dof ordering.
pub fn to_vector(w: &DGSolution) -> Vec<f64> {
    let (k, n) = (w.degree(), w.n());
    let nb = (k + 1) * (k + 1);
    let mut out = vec![0.0; num_dofs(k, n)];
    for iy in 0..n {
        for ix in 0..n {
            for (f, field) in w.fields().iter().enumerate() {
                let start = ((iy * n + ix) * 3 + f) * nb;
                out[start..start + nb].copy_from_slice(field.block(ix, iy));
            }
        }
    }
    out
}

/// Inverse of [`to_vector`].
pub fn from_vector(k: usize, n: usize, x: &[f64]) -> Result<DGSolution, AssemblyError> {
    if x.len() != num_dofs(k, n) {
        return Err(AssemblyError::BadLength(x.len(), num_dofs(k, n)));
    }
    let nb = (k + 1) * (k + 1);
    let mut fields = [DGField::zeros(k, n), DGField::zeros(k, n), DGField::zeros(k, n)];
    for iy in 0..n {
        for ix in 0..n {
            for (f, field) in fields.iter_mut().enumerate() {
                let start = ((iy * n + ix) * 3 + f) * nb;
                field.block_mut(ix, iy).copy_from_slice(&x[start..start + nb]);
            }
        }
    }
    let [u, p, q] = fields;
    Ok(DGSolution { u, p, q })
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub k: usize,
    pub n: usize,
}

impl LinearSystem {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }

    /// `rhs - A x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .matvec(x)
            .iter()
            .zip(&self.rhs)
            .map(|(ax, b)| b - ax)
            .collect()
    }
}

/// Shared preconditions of `assemble` and `apply_b`.
pub(crate) fn check_inputs(
    mesh: &Mesh2D,
    k: usize,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<(), AssemblyError> {
    if k == 0 {
        return Err(AssemblyError::DegreeZero);
    }
    if quad.len() < k + 3 {
        return Err(AssemblyError::QuadratureTooCoarse {
            points: quad.len(),
            degree: k,
        });
    }
    flux.validate()?;
    for cfg in [mesh.mesh_x.config, mesh.mesh_y.config].iter().flatten() {
        cfg.validate_for_degree(k)?;
    }
    Ok(())
}

/// Edge mass matrix `G[i][j] = int_a^b c(s) P_i P_j ds` by quadrature.
fn edge_mass<C: Fn(f64) -> f64>(table: &BasisTable, quad: &QuadratureRule, a: f64, b: f64, c: C) -> Vec<Vec<f64>> {
    let k = table.degree;
    let half = 0.5 * (b - a);
    let cw: Vec<f64> = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&r, &w)| w * half * c(affine_map(a, b, r)))
        .collect();
    (0..=k)
        .map(|i| {
            (0..=k)
                .map(|j| {
                    cw.iter()
                        .enumerate()
                        .map(|(q, w)| w * table.values[i][q] * table.values[j][q])
                        .sum()
                })
                .collect()
        })
        .collect()
}

struct Triplets {
    k: usize,
    n: usize,
    nb: usize,
    out: Vec<(usize, usize, f64)>,
}

impl Triplets {
    /// Adds `scale * t_row(m) * t_col(m') * g[n][n']` for every pair of local
    /// bases, where `t` are the trace factors of each side. On vertical edges
    /// the trace factor acts on the x-degree `m`, on horizontal ones on `n`.
    #[allow(clippy::too_many_arguments)]
    fn edge_block(
        &mut self,
        row: (usize, usize, Field),
        col: (usize, usize, Field),
        row_trace: &[f64],
        col_trace: &[f64],
        g: &[Vec<f64>],
        scale: f64,
        vertical: bool,
    ) {
        let k = self.k;
        for a in 0..self.nb {
            let (am, an) = (a % (k + 1), a / (k + 1));
            let (a_normal, a_tan) = if vertical { (am, an) } else { (an, am) };
            for b in 0..self.nb {
                let (bm, bn) = (b % (k + 1), b / (k + 1));
                let (b_normal, b_tan) = if vertical { (bm, bn) } else { (bn, bm) };
                let v = scale * row_trace[a_normal] * col_trace[b_normal] * g[a_tan][b_tan];
                if v != 0.0 {
                    self.out.push((
                        dof_index(k, self.n, row.0, row.1, row.2, a),
                        dof_index(k, self.n, col.0, col.1, col.2, b),
                        v,
                    ));
                }
            }
        }
    }
}

/// Assembles the LDG system for degree `k` on `mesh`.
pub fn assemble(
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    k: usize,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<LinearSystem, AssemblyError> {
    check_inputs(mesh, k, flux, quad)?;
    let n = mesh.n();
    let nb = (k + 1) * (k + 1);
    let nq = quad.len();
    let table = legendre_table(k, &quad.nodes);
    let inv_eps = 1.0 / problem.epsilon;
    let mut trip = Triplets {
        k,
        n,
        nb,
        out: Vec::with_capacity(n * n * nb * nb * 20),
    };
    let rhs = assemble_rhs(mesh, k, quad, |x, y| problem.f(x, y));

    // Volume terms.
    let mut block_vu = vec![0.0; nb * nb];
    let mut block_vp = vec![0.0; nb * nb];
    let mut block_vq = vec![0.0; nb * nb];
    let mut block_mass = vec![0.0; nb * nb];
    for iy in 0..n {
        for ix in 0..n {
            let rect = mesh.element(ix, iy);
            let (hx, hy) = (rect.hx(), rect.hy());
            let jac = 0.25 * hx * hy;
            let (dx, dy) = (2.0 / hx, 2.0 / hy);
            block_vu.fill(0.0);
            block_vp.fill(0.0);
            block_vq.fill(0.0);
            block_mass.fill(0.0);
            for qy in 0..nq {
                let y = affine_map(rect.y0, rect.y1, quad.nodes[qy]);
                for qx in 0..nq {
                    let x = affine_map(rect.x0, rect.x1, quad.nodes[qx]);
                    let w = quad.weights[qx] * quad.weights[qy] * jac;
                    let c = problem.b(x, y) - problem.div_alpha(x, y);
                    let (a1, a2) = (problem.a1(x, y), problem.a2(x, y));
                    for t in 0..nb {
                        let (tm, tn) = (t % (k + 1), t / (k + 1));
                        let phi_t = table.values[tm][qx] * table.values[tn][qy];
                        let tx = table.derivs[tm][qx] * dx * table.values[tn][qy];
                        let ty = table.values[tm][qx] * table.derivs[tn][qy] * dy;
                        for s in 0..nb {
                            let (sm, sn) = (s % (k + 1), s / (k + 1));
                            let phi_s = w * table.values[sm][qx] * table.values[sn][qy];
                            block_vu[t * nb + s] += phi_s * (c * phi_t - a1 * tx - a2 * ty);
                            block_vp[t * nb + s] += phi_s * tx;
                            block_vq[t * nb + s] += phi_s * ty;
                            block_mass[t * nb + s] += phi_s * phi_t;
                        }
                    }
                }
            }
            for t in 0..nb {
                for s in 0..nb {
                    let idx = |f: Field, l: usize| dof_index(k, n, ix, iy, f, l);
                    let ts = t * nb + s;
                    let entries = [
                        (Field::U, Field::U, block_vu[ts]),
                        (Field::U, Field::P, block_vp[ts]),
                        (Field::U, Field::Q, block_vq[ts]),
                        // (U, s_x) and (U, r_y) share the derivative blocks
                        (Field::P, Field::U, block_vp[ts]),
                        (Field::Q, Field::U, block_vq[ts]),
                        (Field::P, Field::P, inv_eps * block_mass[ts]),
                        (Field::Q, Field::Q, inv_eps * block_mass[ts]),
                    ];
                    for (rf, cf, v) in entries {
                        if v != 0.0 {
                            trip.out.push((idx(rf, t), idx(cf, s), v));
                        }
                    }
                }
            }
        }
    }

    // Edge terms. `left` holds P_m(-1) (trace from the element above/right of
    // the edge), `right` holds P_m(1) (from the element below/left).
    let plus = table.left.clone();
    let minus = table.right.clone();
    for vertical in [true, false] {
        let (mesh_n, mesh_t) = if vertical {
            (&mesh.mesh_x, &mesh.mesh_y)
        } else {
            (&mesh.mesh_y, &mesh.mesh_x)
        };
        let lambda = if vertical { flux.lambda1 } else { flux.lambda2 };
        let (test_flux, trial_flux) = if vertical {
            (Field::P, Field::P)
        } else {
            (Field::Q, Field::Q)
        };
        for j in 0..n {
            let (t0, t1) = mesh_t.interval(j);
            for e in 0..=n {
                let xe = mesh_n.points[e];
                // coordinates of the element on each side of the edge
                let elem = |i: usize| if vertical { (i, j) } else { (j, i) };
                let conv = |s: f64| {
                    if vertical {
                        problem.a1(xe, s)
                    } else {
                        problem.a2(s, xe)
                    }
                };
                let g = edge_mass(&table, quad, t0, t1, |_| 1.0);
                let ga = edge_mass(&table, quad, t0, t1, conv);
                let (u, f) = (Field::U, trial_flux);
                if e == 0 {
                    let r = elem(0);
                    trip.edge_block((r.0, r.1, u), (r.0, r.1, f), &plus, &plus, &g, 1.0, vertical);
                } else if e == n {
                    let l = elem(n - 1);
                    trip.edge_block((l.0, l.1, u), (l.0, l.1, f), &minus, &minus, &g, -1.0, vertical);
                    let gl = edge_mass(&table, quad, t0, t1, |s| conv(s) + lambda);
                    trip.edge_block((l.0, l.1, u), (l.0, l.1, u), &minus, &minus, &gl, 1.0, vertical);
                } else {
                    let (l, r) = (elem(e - 1), elem(e));
                    // <U^-, [[s]]>
                    trip.edge_block((r.0, r.1, test_flux), (l.0, l.1, u), &plus, &minus, &g, 1.0, vertical);
                    trip.edge_block((l.0, l.1, test_flux), (l.0, l.1, u), &minus, &minus, &g, -1.0, vertical);
                    // <P^+, [[v]]>
                    trip.edge_block((r.0, r.1, u), (r.0, r.1, f), &plus, &plus, &g, 1.0, vertical);
                    trip.edge_block((l.0, l.1, u), (r.0, r.1, f), &minus, &plus, &g, -1.0, vertical);
                    // -<a U^-, [[v]]>
                    trip.edge_block((r.0, r.1, u), (l.0, l.1, u), &plus, &minus, &ga, -1.0, vertical);
                    trip.edge_block((l.0, l.1, u), (l.0, l.1, u), &minus, &minus, &ga, 1.0, vertical);
                }
            }
        }
    }
    let nd = num_dofs(k, n);
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(nd, nd, trip.out),
        rhs,
        k,
        n,
    })
}

/// Load vector `(f, v)`; the `s` and `r` rows are zero.
pub fn assemble_rhs<F: Fn(f64, f64) -> f64>(mesh: &Mesh2D, k: usize, quad: &QuadratureRule, f: F) -> Vec<f64> {
    let n = mesh.n();
    let nb = (k + 1) * (k + 1);
    let table = legendre_table(k, &quad.nodes);
    let mut rhs = vec![0.0; num_dofs(k, n)];
    for iy in 0..n {
        for ix in 0..n {
            let rect = mesh.element(ix, iy);
            let jac = 0.25 * rect.hx() * rect.hy();
            let start = dof_index(k, n, ix, iy, Field::U, 0);
            for (qy, &ry) in quad.nodes.iter().enumerate() {
                let y = affine_map(rect.y0, rect.y1, ry);
                for (qx, &rx) in quad.nodes.iter().enumerate() {
                    let x = affine_map(rect.x0, rect.x1, rx);
                    let fw = quad.weights[qx] * quad.weights[qy] * jac * f(x, y);
                    for t in 0..nb {
                        let (tm, tn) = (t % (k + 1), t / (k + 1));
                        rhs[start + t] += fw * table.values[tm][qx] * table.values[tn][qy];
                    }
                }
            }
        }
    }
    rhs
}

/// Values and gradients of a local polynomial on the tensor quadrature grid.
pub(crate) struct LocalEval {
    pub val: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Evaluates the block `c` of a degree-`k` field on element `(hx, hy)` at the
/// tensor grid of `table`; the index is `qy * nq + qx`.
pub(crate) fn eval_local(table: &BasisTable, c: &[f64], hx: f64, hy: f64) -> LocalEval {
    let k = table.degree;
    let nq = table.nodes.len();
    let mut out = LocalEval {
        val: vec![0.0; nq * nq],
        dx: vec![0.0; nq * nq],
        dy: vec![0.0; nq * nq],
    };
    for qy in 0..nq {
        for qx in 0..nq {
            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for nn in 0..=k {
                for m in 0..=k {
                    let a = c[nn * (k + 1) + m];
                    v += a * table.values[m][qx] * table.values[nn][qy];
                    gx += a * table.derivs[m][qx] * table.values[nn][qy];
                    gy += a * table.values[m][qx] * table.derivs[nn][qy];
                }
            }
            let i = qy * nq + qx;
            out.val[i] = v;
            out.dx[i] = gx * 2.0 / hx;
            out.dy[i] = gy * 2.0 / hy;
        }
    }
    out
}

/// `int_edge c(s) a(s) b(s) ds` for edge polynomials on `[t0, t1]`.
pub(crate) fn edge_integral<C: Fn(f64) -> f64>(
    quad: &QuadratureRule,
    t0: f64,
    t1: f64,
    a: &crate::dg_space::EdgePoly,
    b: &crate::dg_space::EdgePoly,
    c: C,
) -> f64 {
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&r, &w)| w * c(affine_map(t0, t1, r)) * a.eval(r) * b.eval(r))
        .sum::<f64>()
        * 0.5
        * (t1 - t0)
}

/// `B(W; Z)` evaluated term by term from traces and jumps, independently of
/// the assembled matrix.
pub fn apply_b(
    w: &DGSolution,
    z: &DGSolution,
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    flux: &FluxParams,
    quad: &QuadratureRule,
) -> Result<f64, AssemblyError> {
    let (k, n) = (w.degree(), w.n());
    if z.degree() != k || z.n() != n || n != mesh.n() {
        return Err(DgError::Mismatch(k, n, z.degree(), z.n()).into());
    }
    check_inputs(mesh, k, flux, quad)?;
    let table = legendre_table(k, &quad.nodes);
    let nq = quad.len();
    let inv_eps = 1.0 / problem.epsilon;

    let mut volume = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let rect = mesh.element(ix, iy);
            let (hx, hy) = (rect.hx(), rect.hy());
            let jac = 0.25 * hx * hy;
            let wu = eval_local(&table, w.u.block(ix, iy), hx, hy);
            let wp = eval_local(&table, w.p.block(ix, iy), hx, hy);
            let wq = eval_local(&table, w.q.block(ix, iy), hx, hy);
            let zv = eval_local(&table, z.u.block(ix, iy), hx, hy);
            let zs = eval_local(&table, z.p.block(ix, iy), hx, hy);
            let zr = eval_local(&table, z.q.block(ix, iy), hx, hy);
            for qy in 0..nq {
                let y = affine_map(rect.y0, rect.y1, quad.nodes[qy]);
                for qx in 0..nq {
                    let x = affine_map(rect.x0, rect.x1, quad.nodes[qx]);
                    let i = qy * nq + qx;
                    let weight = quad.weights[qx] * quad.weights[qy] * jac;
                    let b1 = (problem.b(x, y) - problem.div_alpha(x, y)) * wu.val[i] * zv.val[i]
                        + inv_eps * (wp.val[i] * zs.val[i] + wq.val[i] * zr.val[i]);
                    let b2 = wu.val[i] * (zs.dx[i] + zr.dy[i]);
                    let b3 = wp.val[i] * zv.dx[i] + wq.val[i] * zv.dy[i];
                    let b4 = -wu.val[i] * (problem.a1(x, y) * zv.dx[i] + problem.a2(x, y) * zv.dy[i]);
                    volume += weight * (b1 + b2 + b3 + b4);
                }
            }
        }
    }

    let mut edges = 0.0;
    for j in 0..n {
        let (y0, y1) = mesh.mesh_y.interval(j);
        let (x0, x1) = mesh.mesh_x.interval(j);
        for e in 0..=n {
            // vertical edge x = x_e, row j
            let xe = mesh.mesh_x.points[e];
            let a1 = |s: f64| problem.a1(xe, s);
            let jv = w_jump(&z.u, e, j, true)?;
            if e > 0 && e < n {
                let um = w.u.trace_x(e, j, Side::Minus)?;
                edges += edge_integral(quad, y0, y1, &um, &z.p.jump_x(e, j)?, |_| 1.0);
                edges -= edge_integral(quad, y0, y1, &um, &jv, a1);
            }
            if e < n {
                let pp = w.p.trace_x(e, j, Side::Plus)?;
                edges += edge_integral(quad, y0, y1, &pp, &jv, |_| 1.0);
            } else {
                let um = w.u.trace_x(e, j, Side::Minus)?;
                let pm = w.p.trace_x(e, j, Side::Minus)?;
                let vm = z.u.trace_x(e, j, Side::Minus)?;
                edges -= edge_integral(quad, y0, y1, &pm, &vm, |_| 1.0);
                edges -= edge_integral(quad, y0, y1, &um, &jv, a1);
                edges += flux.lambda1 * edge_integral(quad, y0, y1, &um, &vm, |_| 1.0);
            }

            // horizontal edge y = y_e, column j
            let ye = mesh.mesh_y.points[e];
            let a2 = |s: f64| problem.a2(s, ye);
            let jv = w_jump(&z.u, e, j, false)?;
            if e > 0 && e < n {
                let um = w.u.trace_y(e, j, Side::Minus)?;
                edges += edge_integral(quad, x0, x1, &um, &z.q.jump_y(e, j)?, |_| 1.0);
                edges -= edge_integral(quad, x0, x1, &um, &jv, a2);
            }
            if e < n {
                let qp = w.q.trace_y(e, j, Side::Plus)?;
                edges += edge_integral(quad, x0, x1, &qp, &jv, |_| 1.0);
            } else {
                let um = w.u.trace_y(e, j, Side::Minus)?;
                let qm = w.q.trace_y(e, j, Side::Minus)?;
                let vm = z.u.trace_y(e, j, Side::Minus)?;
                edges -= edge_integral(quad, x0, x1, &qm, &vm, |_| 1.0);
                edges -= edge_integral(quad, x0, x1, &um, &jv, a2);
                edges += flux.lambda2 * edge_integral(quad, x0, x1, &um, &vm, |_| 1.0);
            }
        }
    }
    Ok(volume + edges)
}

fn w_jump(f: &DGField, e: usize, j: usize, vertical: bool) -> Result<crate::dg_space::EdgePoly, DgError> {
    if vertical {
        f.jump_x(e, j)
    } else {
        f.jump_y(e, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_legendre_rule;
    use crate::mesh::{build_mesh_2d, Mesh1D, MeshConfig};
    use crate::problems::{problem, ProblemKind};
    use crate::projections::{interpolate_exact, Interpolant};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn layer_mesh(n: usize, eps: f64, k: usize) -> Mesh2D {
        let cfg = MeshConfig::new(n, k as f64 + 2.0, eps);
        build_mesh_2d(&cfg, &cfg).unwrap()
    }

    fn random_solution(rng: &mut StdRng, k: usize, n: usize) -> DGSolution {
        let v: Vec<f64> = (0..num_dofs(k, n)).map(|_| rng.random_range(-1.0..1.0)).collect();
        from_vector(k, n, &v).unwrap()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn zero_source_gives_zero_rhs() {
        let mesh = layer_mesh(8, 1e-4, 1);
        let quad = gauss_legendre_rule(4);
        assert!(assemble_rhs(&mesh, 1, &quad, |_, _| 0.0).iter().all(|&v| v == 0.0));
        let p = problem(ProblemKind::LayerConst, 1e-4).unwrap();
        let sys = assemble(&p, &mesh, 1, &FluxParams::default(), &quad).unwrap();
        let zero = vec![0.0; sys.num_dofs()];
        assert!(sys.matrix.matvec(&zero).iter().all(|&v| v == 0.0));
        for iy in 0..8 {
            for ix in 0..8 {
                for l in 0..4 {
                    assert_eq!(sys.rhs[dof_index(1, 8, ix, iy, Field::P, l)], 0.0);
                    assert_eq!(sys.rhs[dof_index(1, 8, ix, iy, Field::Q, l)], 0.0);
                }
            }
        }
    }

    #[test]
    fn vector_round_trip() {
        let mut rng = StdRng::seed_from_u64(1);
        let w = random_solution(&mut rng, 2, 8);
        assert_eq!(from_vector(2, 8, &to_vector(&w)).unwrap(), w);
        assert!(from_vector(2, 8, &[0.0; 3]).is_err());
    }

    #[test]
    fn matrix_matches_bilinear_form() {
        let mut rng = StdRng::seed_from_u64(7);
        for (kind, k) in [(ProblemKind::LayerConst, 1), (ProblemKind::LayerVar, 2)] {
            let eps = 1e-3;
            let p = problem(kind, eps).unwrap();
            let mesh = layer_mesh(8, eps, k);
            let quad = gauss_legendre_rule(k + 3);
            let flux = FluxParams::new(0.5, 2.0).unwrap();
            let sys = assemble(&p, &mesh, k, &flux, &quad).unwrap();
            for _ in 0..25 {
                let w = random_solution(&mut rng, k, 8);
                let z = random_solution(&mut rng, k, 8);
                let direct = apply_b(&w, &z, &p, &mesh, &flux, &quad).unwrap();
                let via_matrix = dot(&to_vector(&z), &sys.matrix.matvec(&to_vector(&w)));
                let scale = direct.abs().max(1.0);
                assert!(
                    (direct - via_matrix).abs() <= 1e-12 * scale,
                    "{kind:?}: {direct} vs {via_matrix}"
                );
            }
        }
    }

    #[test]
    fn bilinear_in_trial() {
        let mut rng = StdRng::seed_from_u64(3);
        let p = problem(ProblemKind::LayerConst, 1e-4).unwrap();
        let mesh = layer_mesh(8, 1e-4, 1);
        let quad = gauss_legendre_rule(4);
        let flux = FluxParams::default();
        let (w1, w2, z) = (
            random_solution(&mut rng, 1, 8),
            random_solution(&mut rng, 1, 8),
            random_solution(&mut rng, 1, 8),
        );
        let (a, b) = (1.7, -0.3);
        let comb = w1.scaled(a).axpy(b, &w2).unwrap();
        let lhs = apply_b(&comb, &z, &p, &mesh, &flux, &quad).unwrap();
        let rhs = a * apply_b(&w1, &z, &p, &mesh, &flux, &quad).unwrap()
            + b * apply_b(&w2, &z, &p, &mesh, &flux, &quad).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        let zero = DGSolution::zeros(1, 8);
        assert_eq!(apply_b(&zero, &z, &p, &mesh, &flux, &quad).unwrap(), 0.0);
        assert_eq!(apply_b(&w1, &zero, &p, &mesh, &flux, &quad).unwrap(), 0.0);
    }

    #[test]
    fn coercive_on_random_fields() {
        let mut rng = StdRng::seed_from_u64(11);
        let eps = 1e-4;
        let p = problem(ProblemKind::LayerVar, eps).unwrap();
        let mesh = layer_mesh(8, eps, 1);
        let quad = gauss_legendre_rule(4);
        for _ in 0..100 {
            let w = random_solution(&mut rng, 1, 8);
            assert!(apply_b(&w, &w, &p, &mesh, &FluxParams::default(), &quad).unwrap() > 0.0);
        }
    }

    #[test]
    fn patch_test_residual() {
        let eps = 1e-3;
        let k = 2;
        let p = problem(ProblemKind::PolyPatch, eps).unwrap();
        let quad = gauss_legendre_rule(k + 3);
        let meshes = [layer_mesh(8, eps, k), {
            let u = Mesh1D::uniform(8).unwrap();
            Mesh2D::new(u.clone(), u).unwrap()
        }];
        for mesh in meshes {
            let sys = assemble(&p, &mesh, k, &FluxParams::default(), &quad).unwrap();
            let exact = interpolate_exact(&p, &mesh, k, &quad, Interpolant::Composite).unwrap();
            let r = sys.residual(&to_vector(&exact));
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm(&r) <= 1e-10 * norm(&sys.rhs), "{}", norm(&r) / norm(&sys.rhs));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = problem(ProblemKind::LayerConst, 1e-4).unwrap();
        let quad = gauss_legendre_rule(4);
        let flux = FluxParams::default();
        let cfg = MeshConfig::new(8, 2.5, 1e-4);
        let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
        assert!(matches!(
            assemble(&p, &mesh, 1, &flux, &quad),
            Err(AssemblyError::Mesh(MeshError::RhoTooSmall { .. }))
        ));
        let mesh = layer_mesh(8, 1e-4, 2);
        assert!(matches!(
            assemble(&p, &mesh, 2, &flux, &quad),
            Err(AssemblyError::QuadratureTooCoarse { .. })
        ));
        assert!(FluxParams::new(-1.0, 0.0).is_err());
        assert!(FluxParams::new(0.0, 2e3).is_err());
    }

    #[test]
    fn sparsity_is_nearest_neighbour() {
        let p = problem(ProblemKind::LayerConst, 1e-4).unwrap();
        let mesh = layer_mesh(8, 1e-4, 1);
        let sys = assemble(&p, &mesh, 1, &FluxParams::default(), &gauss_legendre_rule(4)).unwrap();
        let block = 3 * 4;
        for (r, c, _) in sys.matrix.triplets() {
            let (er, ec) = (r / block, c / block);
            let (rx, ry) = ((er % 8) as i64, (er / 8) as i64);
            let (cx, cy) = ((ec % 8) as i64, (ec / 8) as i64);
            assert!((rx - cx).abs() + (ry - cy).abs() <= 1);
        }
    }
}
