//! Local Gauss-Radau projections onto `Q^k(K)` and the composite
//! interpolant `pi w = (P^- u, pi_x^+ p, pi_y^+ q)`.
//!
//! Each projection is fixed by `(k+1)^2` linear conditions on one element:
//!
//! | kind         | interior moments against      | face conditions                     |
//! |--------------|-------------------------------|-------------------------------------|
//! | `PiMinus`    | `Q^{k-1}`                     | right/top faces vs `P^{k-1}`, corner `(x_i^-, y_j^-)` |
//! | `PiXMinus`   | `P^{k-1}(I) x P^k(J)`         | right face vs `P^k(J)`              |
//! | `PiXPlus`    | `P^{k-1}(I) x P^k(J)`         | left face vs `P^k(J)`               |
//! | `PiYMinus`   | `P^k(I) x P^{k-1}(J)`         | top face vs `P^k(I)`                |
//! | `PiYPlus`    | `P^k(I) x P^{k-1}(J)`         | bottom face vs `P^k(I)`             |
//!
//! Face traces are always taken from inside the element being projected; the
//! projected functions are continuous, so `z` is simply evaluated on the face.

use thiserror::Error;

use crate::basis::{affine_map, legendre_norm_sq, legendre_table, BasisTable, QuadratureRule};
use crate::dg_space::{DGField, DGSolution};
use crate::mesh::{Mesh2D, Rect};
use crate::problems::{ProblemError, ProblemSpec};
use crate::sparse::DenseLu;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("quadrature with {points} points is too coarse for degree {degree} (need at least k + 3)")]
    QuadratureTooCoarse { points: usize, degree: usize },
    #[error("degree must be at least 1")]
    DegreeZero,
    #[error("local moment system for {0:?} is singular")]
    Singular(ProjectionKind),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    PiMinus,
    PiXMinus,
    PiYMinus,
    PiXPlus,
    PiYPlus,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 5] = [
        Self::PiMinus,
        Self::PiXMinus,
        Self::PiYMinus,
        Self::PiXPlus,
        Self::PiYPlus,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// One defining condition, in reference coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Condition {
    /// `int_K z P_m(xr) P_n(yr)`
    Interior(usize, usize),
    /// `int z(x_right, .) P_n`
    Right(usize),
    Left(usize),
    /// `int z(., y_top) P_m`
    Top(usize),
    Bottom(usize),
    /// `z(x_right, y_top)`
    Corner,
}

fn conditions(kind: ProjectionKind, k: usize) -> Vec<Condition> {
    use Condition::*;
    let mut out = Vec::with_capacity((k + 1) * (k + 1));
    let (mx, my) = match kind {
        ProjectionKind::PiMinus => (k, k),
        ProjectionKind::PiXMinus | ProjectionKind::PiXPlus => (k, k + 1),
        ProjectionKind::PiYMinus | ProjectionKind::PiYPlus => (k + 1, k),
    };
    for n in 0..my {
        for m in 0..mx {
            out.push(Interior(m, n));
        }
    }
    match kind {
        ProjectionKind::PiMinus => {
            out.extend((0..k).map(Right));
            out.extend((0..k).map(Top));
            out.push(Corner);
        }
        ProjectionKind::PiXMinus => out.extend((0..=k).map(Right)),
        ProjectionKind::PiXPlus => out.extend((0..=k).map(Left)),
        ProjectionKind::PiYMinus => out.extend((0..=k).map(Top)),
        ProjectionKind::PiYPlus => out.extend((0..=k).map(Bottom)),
    }
    out
}

/// Condition applied to the basis function `P_m(xr) P_n(yr)`.
fn condition_on_basis(c: Condition, m: usize, n: usize) -> f64 {
    let endpoint = |deg: usize, right: bool| if right || deg % 2 == 0 { 1.0 } else { -1.0 };
    match c {
        Condition::Interior(a, b) => {
            if a == m && b == n {
                legendre_norm_sq(m) * legendre_norm_sq(n)
            } else {
                0.0
            }
        }
        Condition::Right(b) | Condition::Left(b) if b != n => 0.0,
        Condition::Right(_) => endpoint(m, true) * legendre_norm_sq(n),
        Condition::Left(_) => endpoint(m, false) * legendre_norm_sq(n),
        Condition::Top(a) | Condition::Bottom(a) if a != m => 0.0,
        Condition::Top(_) => endpoint(n, true) * legendre_norm_sq(m),
        Condition::Bottom(_) => endpoint(n, false) * legendre_norm_sq(m),
        Condition::Corner => 1.0,
    }
}

/// Condition applied to `z` by quadrature.
fn condition_on_fn<F: Fn(f64, f64) -> f64>(
    c: Condition,
    z: &F,
    rect: &Rect,
    quad: &QuadratureRule,
    table: &BasisTable,
) -> f64 {
    let xs = |q: usize| affine_map(rect.x0, rect.x1, quad.nodes[q]);
    let ys = |q: usize| affine_map(rect.y0, rect.y1, quad.nodes[q]);
    let nq = quad.len();
    match c {
        Condition::Interior(m, n) => {
            let mut s = 0.0;
            for qy in 0..nq {
                let y = ys(qy);
                let wy = quad.weights[qy] * table.values[n][qy];
                for qx in 0..nq {
                    s += quad.weights[qx] * table.values[m][qx] * wy * z(xs(qx), y);
                }
            }
            s
        }
        Condition::Right(n) | Condition::Left(n) => {
            let x = if matches!(c, Condition::Right(_)) { rect.x1 } else { rect.x0 };
            (0..nq)
                .map(|q| quad.weights[q] * table.values[n][q] * z(x, ys(q)))
                .sum()
        }
        Condition::Top(m) | Condition::Bottom(m) => {
            let y = if matches!(c, Condition::Top(_)) { rect.y1 } else { rect.y0 };
            (0..nq)
                .map(|q| quad.weights[q] * table.values[m][q] * z(xs(q), y))
                .sum()
        }
        Condition::Corner => z(rect.x1, rect.y1),
    }
}

/// Reusable projector: the moment matrices only depend on `(kind, k)`, so
/// they are factored once.
pub struct Projector {
    k: usize,
    quad: QuadratureRule,
    table: BasisTable,
    systems: Vec<(Vec<Condition>, DenseLu)>,
}

impl Projector {
    pub fn new(k: usize, quad: &QuadratureRule) -> Result<Self, ProjectionError> {
        if k == 0 {
            return Err(ProjectionError::DegreeZero);
        }
        if quad.len() < k + 3 {
            return Err(ProjectionError::QuadratureTooCoarse {
                points: quad.len(),
                degree: k,
            });
        }
        let nb = (k + 1) * (k + 1);
        let mut systems = Vec::with_capacity(5);
        for kind in ProjectionKind::ALL {
            let conds = conditions(kind, k);
            debug_assert_eq!(conds.len(), nb);
            let mut a = vec![0.0; nb * nb];
            for (row, &c) in conds.iter().enumerate() {
                for n in 0..=k {
                    for m in 0..=k {
                        a[row * nb + n * (k + 1) + m] = condition_on_basis(c, m, n);
                    }
                }
            }
            let lu = DenseLu::new(nb, &a);
            if lu.pivot_ratio() < 1e-12 {
                return Err(ProjectionError::Singular(kind));
            }
            systems.push((conds, lu));
        }
        Ok(Self {
            k,
            quad: quad.clone(),
            table: legendre_table(k, &quad.nodes),
            systems,
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// Local Legendre coefficients of `kind` applied to `z` on `rect`.
    pub fn project<F: Fn(f64, f64) -> f64>(&self, z: &F, rect: &Rect, kind: ProjectionKind) -> Vec<f64> {
        let (conds, lu) = &self.systems[kind.index()];
        let mut rhs: Vec<f64> = conds
            .iter()
            .map(|&c| condition_on_fn(c, z, rect, &self.quad, &self.table))
            .collect();
        lu.solve_in_place(&mut rhs);
        rhs
    }
}

pub fn project_element<F: Fn(f64, f64) -> f64>(
    z: &F,
    rect: &Rect,
    kind: ProjectionKind,
    k: usize,
    quad: &QuadratureRule,
) -> Result<Vec<f64>, ProjectionError> {
    Ok(Projector::new(k, quad)?.project(z, rect, kind))
}

/// Largest violation of the defining conditions of `kind` by the local
/// polynomial `coeffs`, relative to the sampled sup of `|z|`. Both sides are
/// evaluated by quadrature with `quad`.
pub fn moment_residual<F: Fn(f64, f64) -> f64>(
    z: &F,
    rect: &Rect,
    kind: ProjectionKind,
    k: usize,
    coeffs: &[f64],
    quad: &QuadratureRule,
) -> f64 {
    let table = legendre_table(k, &quad.nodes);
    let poly = |x: f64, y: f64| {
        let xr = 2.0 * (x - rect.x0) / rect.hx() - 1.0;
        let yr = 2.0 * (y - rect.y0) / rect.hy() - 1.0;
        let (px, _) = crate::basis::legendre_values(k, xr);
        let (py, _) = crate::basis::legendre_values(k, yr);
        let mut v = 0.0;
        for n in 0..=k {
            for m in 0..=k {
                v += coeffs[n * (k + 1) + m] * px[m] * py[n];
            }
        }
        v
    };
    let mut scale = 0.0f64;
    for &xr in &quad.nodes {
        for &yr in &quad.nodes {
            scale = scale.max(z(affine_map(rect.x0, rect.x1, xr), affine_map(rect.y0, rect.y1, yr)).abs());
        }
    }
    scale = scale.max(z(rect.x1, rect.y1).abs()).max(f64::MIN_POSITIVE);
    conditions(kind, k)
        .into_iter()
        .map(|c| {
            let lhs = condition_on_fn(c, &poly, rect, quad, &table);
            let rhs = condition_on_fn(c, z, rect, quad, &table);
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
        / scale
}

/// Which projection the composite interpolant `P^- u` uses on the 0-based
/// element `(ix, iy)`: `pi_x^-` on the column just below the x-transition
/// point, `pi_y^-` on the matching row, `pi^-` elsewhere (including their
/// intersection).
pub fn p_minus_kind(ix: usize, iy: usize, n: usize) -> ProjectionKind {
    let t = n / 2 - 1;
    match (ix == t, iy == t) {
        (true, false) => ProjectionKind::PiXMinus,
        (false, true) => ProjectionKind::PiYMinus,
        _ => ProjectionKind::PiMinus,
    }
}

/// Elementwise projection with a per-element kind.
pub fn project_field<F, K>(z: &F, mesh: &Mesh2D, projector: &Projector, kind_of: K) -> DGField
where
    F: Fn(f64, f64) -> f64,
    K: Fn(usize, usize) -> ProjectionKind,
{
    let n = mesh.n();
    let mut field = DGField::zeros(projector.degree(), n);
    for iy in 0..n {
        for ix in 0..n {
            let c = projector.project(z, &mesh.element(ix, iy), kind_of(ix, iy));
            field.block_mut(ix, iy).copy_from_slice(&c);
        }
    }
    field
}

/// `P^- u`.
pub fn interpolate_p_minus<F: Fn(f64, f64) -> f64>(
    u: &F,
    mesh: &Mesh2D,
    k: usize,
    quad: &QuadratureRule,
) -> Result<DGField, ProjectionError> {
    let projector = Projector::new(k, quad)?;
    let n = mesh.n();
    Ok(project_field(u, mesh, &projector, |ix, iy| p_minus_kind(ix, iy, n)))
}

/// `(pi_x^+ p, pi_y^+ q)` on every element.
pub fn interpolate_flux<F: Fn(f64, f64) -> f64, G: Fn(f64, f64) -> f64>(
    p: &F,
    q: &G,
    mesh: &Mesh2D,
    k: usize,
    quad: &QuadratureRule,
) -> Result<(DGField, DGField), ProjectionError> {
    let projector = Projector::new(k, quad)?;
    Ok((
        project_field(p, mesh, &projector, |_, _| ProjectionKind::PiXPlus),
        project_field(q, mesh, &projector, |_, _| ProjectionKind::PiYPlus),
    ))
}

/// Which interpolant of `u` to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolant {
    /// `P^- u`: `pi_x^-` / `pi_y^-` on the transition column / row.
    #[default]
    Composite,
    /// Plain `pi^- u` everywhere, for comparison.
    PiMinusOnly,
}

/// `pi w` for the exact solution of `problem`.
pub fn interpolate_exact(
    problem: &ProblemSpec,
    mesh: &Mesh2D,
    k: usize,
    quad: &QuadratureRule,
    which: Interpolant,
) -> Result<DGSolution, ProjectionError> {
    let ex = problem.require_exact()?;
    let projector = Projector::new(k, quad)?;
    let n = mesh.n();
    let uf = |x: f64, y: f64| ex.u(x, y);
    let u = match which {
        Interpolant::Composite => project_field(&uf, mesh, &projector, |ix, iy| p_minus_kind(ix, iy, n)),
        Interpolant::PiMinusOnly => project_field(&uf, mesh, &projector, |_, _| ProjectionKind::PiMinus),
    };
    let p = project_field(&|x, y| ex.p(x, y), mesh, &projector, |_, _| ProjectionKind::PiXPlus);
    let q = project_field(&|x, y| ex.q(x, y), mesh, &projector, |_, _| ProjectionKind::PiYPlus);
    Ok(DGSolution { u, p, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_legendre_rule;

    fn unit() -> Rect {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    #[test]
    fn condition_counts() {
        for k in 1..=4 {
            for kind in ProjectionKind::ALL {
                assert_eq!(conditions(kind, k).len(), (k + 1) * (k + 1));
            }
        }
    }

    #[test]
    fn pi_x_plus_of_x_squared() {
        let q = gauss_legendre_rule(4);
        let c = project_element(&|x: f64, _| x * x, &unit(), ProjectionKind::PiXPlus, 1, &q).unwrap();
        // (2/3) x on [0,1] is (1/3) + (1/3) xr
        let expected = [1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];
        for (a, b) in c.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15, "{c:?}");
        }
    }

    #[test]
    fn pi_x_minus_of_x_squared_matches_right_face() {
        let q = gauss_legendre_rule(4);
        let c = project_element(&|x: f64, _| x * x, &unit(), ProjectionKind::PiXMinus, 1, &q).unwrap();
        // right trace = c00 + c10 (P_1(1) = 1) for the P_0(y) part, c01 + c11 for P_1(y)
        assert!((c[0] + c[1] - 1.0).abs() < 1e-15);
        assert!((c[2] + c[3]).abs() < 1e-15);
        // interior moment int x^2 = 1/3 fixes c00
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn p_minus_region_bookkeeping() {
        // 1-based (i, j) from the analysis; 0-based here.
        assert_eq!(p_minus_kind(3, 1, 8), ProjectionKind::PiXMinus); // (4,2)
        assert_eq!(p_minus_kind(2, 3, 8), ProjectionKind::PiYMinus); // (3,4)
        assert_eq!(p_minus_kind(3, 3, 8), ProjectionKind::PiMinus); // (4,4)
        assert_eq!(p_minus_kind(1, 1, 8), ProjectionKind::PiMinus); // (2,2)
    }

    #[test]
    fn rejects_coarse_quadrature() {
        assert!(matches!(
            Projector::new(2, &gauss_legendre_rule(4)),
            Err(ProjectionError::QuadratureTooCoarse { .. })
        ));
        assert!(matches!(Projector::new(0, &gauss_legendre_rule(4)), Err(ProjectionError::DegreeZero)));
    }

    #[test]
    fn corner_condition_of_pi_minus() {
        let q = gauss_legendre_rule(5);
        let z = |x: f64, y: f64| (x + 2.0 * y).sin() + x * x * y;
        let r = Rect { x0: 0.2, x1: 0.5, y0: 0.1, y1: 0.3 };
        let c = project_element(&z, &r, ProjectionKind::PiMinus, 2, &q).unwrap();
        let corner: f64 = c.iter().sum(); // all P_m(1) P_n(1) = 1
        assert!((corner - z(0.5, 0.3)).abs() < 1e-14);
    }
}
