use proptest::prelude::*;

use ldg_core::basis::{gauss_legendre_rule, legendre_values};
use ldg_core::dg_space::Side;
use ldg_core::mesh::{build_mesh_2d, Mesh1D, Mesh2D, MeshConfig, Rect};
use ldg_core::norms::interpolation_error;
use ldg_core::problems::{problem, ProblemKind};
use ldg_core::projections::{
    interpolate_flux, interpolate_p_minus, p_minus_kind, project_field, ProjectionKind, Projector,
};
use ldg_core::study::fit_rate;

fn eval(c: &[f64], k: usize, rect: &Rect, x: f64, y: f64) -> f64 {
    let (px, _) = legendre_values(k, 2.0 * (x - rect.x0) / rect.hx() - 1.0);
    let (py, _) = legendre_values(k, 2.0 * (y - rect.y0) / rect.hy() - 1.0);
    (0..=k)
        .flat_map(|n| (0..=k).map(move |m| (m, n)))
        .map(|(m, n)| c[n * (k + 1) + m] * px[m] * py[n])
        .sum()
}

fn rect() -> impl Strategy<Value = Rect> {
    (-1.0f64..1.0, -1.0f64..1.0, 1e-4f64..1.0, 1e-4f64..1.0).prop_map(|(x0, y0, hx, hy)| Rect {
        x0,
        x1: x0 + hx,
        y0,
        y1: y0 + hy,
    })
}

proptest! {
    #[test]
    fn sup_norm_stability(r in rect(), k in 1usize..=3, a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.0f64..6.0) {
        let z = |x: f64, y: f64| (a * (x - r.x0) / r.hx() + c).sin() * (b * (y - r.y0) / r.hy()).cos();
        let projector = Projector::new(k, &gauss_legendre_rule(k + 3)).unwrap();
        let samples: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let sup_z = samples
            .iter()
            .flat_map(|&s| samples.iter().map(move |&t| (s, t)))
            .map(|(s, t)| z(r.x0 + s * r.hx(), r.y0 + t * r.hy()).abs())
            .fold(0.0, f64::max);
        for kind in ProjectionKind::ALL {
            let coeffs = projector.project(&z, &r, kind);
            let sup_pi = samples
                .iter()
                .flat_map(|&s| samples.iter().map(move |&t| (s, t)))
                .map(|(s, t)| eval(&coeffs, k, &r, r.x0 + s * r.hx(), r.y0 + t * r.hy()).abs())
                .fold(0.0, f64::max);
            prop_assert!(sup_pi <= 10.0 * sup_z + 1e-14, "{kind:?}: {sup_pi} vs {sup_z}");
        }
    }
}

fn uniform(n: usize) -> Mesh2D {
    let m = Mesh1D::uniform(n).unwrap();
    Mesh2D::new(m.clone(), m).unwrap()
}

/// `||z - Pi z||` on a uniform mesh of `n x n` elements.
fn l2_projection_error(n: usize, k: usize, kind: ProjectionKind) -> f64 {
    let z = |x: f64, y: f64| (3.0 * x).sin() * (2.0 * y + 0.5).exp();
    let mesh = uniform(n);
    let projector = Projector::new(k, &gauss_legendre_rule(k + 3)).unwrap();
    let field = project_field(&z, &mesh, &projector, |_, _| kind);
    let quad = gauss_legendre_rule(k + 5);
    let mut total = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let r = mesh.element(ix, iy);
            let c = field.block(ix, iy);
            for (qx, wx) in quad.nodes.iter().zip(&quad.weights) {
                for (qy, wy) in quad.nodes.iter().zip(&quad.weights) {
                    let x = r.x0 + 0.5 * r.hx() * (qx + 1.0);
                    let y = r.y0 + 0.5 * r.hy() * (qy + 1.0);
                    let d = z(x, y) - eval(c, k, &r, x, y);
                    total += 0.25 * r.hx() * r.hy() * wx * wy * d * d;
                }
            }
        }
    }
    total.sqrt()
}

#[test]
fn approximation_order_on_uniform_meshes() {
    for k in [1, 2] {
        for kind in ProjectionKind::ALL {
            let ns = [4, 8, 16];
            let es: Vec<f64> = ns.iter().map(|&n| l2_projection_error(n, k, kind)).collect();
            let rate = fit_rate(&ns, &es);
            assert!((rate - (k as f64 + 1.0)).abs() < 0.2, "k={k} {kind:?}: {rate}");
        }
    }
}

#[test]
fn global_polynomial_is_reproduced() {
    let k = 2;
    let z = |x: f64, y: f64| 1.0 + x - 2.0 * y * y + 3.0 * x * x * y;
    let cfg = MeshConfig::new(8, 4.0, 1e-3);
    let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
    let quad = gauss_legendre_rule(k + 3);
    let u = interpolate_p_minus(&z, &mesh, k, &quad).unwrap();
    let (p, q) = interpolate_flux(&z, &z, &mesh, k, &quad).unwrap();
    for iy in 0..8 {
        for ix in 0..8 {
            let r = mesh.element(ix, iy);
            for (s, t) in [(0.1, 0.2), (0.9, 0.5), (0.4, 0.7)] {
                let (x, y) = (r.x0 + s * r.hx(), r.y0 + t * r.hy());
                for f in [&u, &p, &q] {
                    let v = eval(f.block(ix, iy), k, &r, x, y);
                    assert!((v - z(x, y)).abs() < 1e-12);
                }
            }
        }
    }
    let (p0, _) = interpolate_flux(&|_, _| 0.0, &|_, _| 0.0, &mesh, k, &quad).unwrap();
    assert_eq!(p0.max_abs_coeff(), 0.0);
}

#[test]
fn pi_x_minus_column_matches_right_face() {
    let eps = 1e-4;
    let k = 1;
    let n = 8;
    let p = problem(ProblemKind::LayerConst, eps).unwrap();
    let ex = p.exact().unwrap();
    let cfg = MeshConfig::new(n, 3.0, eps);
    let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
    let quad = gauss_legendre_rule(k + 5);
    let u = interpolate_p_minus(&|x, y| ex.u(x, y), &mesh, k, &quad).unwrap();
    let col = n / 2 - 1;
    assert_eq!(p_minus_kind(col, 0, n), ProjectionKind::PiXMinus);
    let xe = mesh.mesh_x.points[col + 1];
    for j in (0..n).filter(|&j| j != col) {
        let trace = u.trace_x(col + 1, j, Side::Minus).unwrap();
        let (y0, y1) = mesh.mesh_y.interval(j);
        for deg in 0..=k {
            // <u - P^- u, P_deg> over the right face
            let moment: f64 = quad
                .nodes
                .iter()
                .zip(&quad.weights)
                .map(|(&r, &w)| {
                    let y = y0 + 0.5 * (y1 - y0) * (r + 1.0);
                    let (pl, _) = legendre_values(k, r);
                    w * (ex.u(xe, y) - trace.eval(r)) * pl[deg]
                })
                .sum::<f64>()
                * 0.5
                * (y1 - y0);
            assert!(moment.abs() <= 1e-12, "row {j}, degree {deg}: {moment}");
        }
    }
}

#[test]
fn interpolation_estimates_on_layer_problem() {
    let eps = 1e-6;
    for k in [1, 2] {
        let p = problem(ProblemKind::LayerConst, eps).unwrap();
        let quad = gauss_legendre_rule(k + 5);
        let ns = [8, 16, 32, 64];
        let mut sup = Vec::new();
        let mut normalised_traces = Vec::new();
        for &n in &ns {
            let cfg = MeshConfig::new(n, k as f64 + 2.0, eps);
            let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
            let eta = interpolation_error(&p, &mesh, k, &quad).unwrap();
            sup.push(eta.linf_eta_u);
            normalised_traces.push(eta.max_line_trace_sq * (n as f64).powi(2 * (k as i32 + 1)));
        }
        let rate = fit_rate(&ns, &sup);
        assert!((rate - (k as f64 + 1.0)).abs() <= 0.25, "k={k}: sup-norm rate {rate}");
        let growth = normalised_traces.iter().cloned().fold(0.0, f64::max) / normalised_traces[0];
        assert!(growth <= 2.0, "k={k}: trace sums {normalised_traces:?}");
    }
}

#[test]
fn flux_interpolation_rate_at_moderate_eps() {
    let eps = 1e-2;
    let k = 1;
    let p = problem(ProblemKind::LayerConst, eps).unwrap();
    let quad = gauss_legendre_rule(k + 5);
    let errs: Vec<f64> = [16, 32]
        .iter()
        .map(|&n| {
            let cfg = MeshConfig::new(n, 3.0, eps);
            let mesh = build_mesh_2d(&cfg, &cfg).unwrap();
            interpolation_error(&p, &mesh, k, &quad).unwrap().p_scaled
        })
        .collect();
    let rate = (errs[0] / errs[1]).log2();
    assert!(rate >= 1.8, "{rate}");
}
