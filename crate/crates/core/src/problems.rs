//! Model problems `-eps Lap u + alpha . grad u + b u = f` on the unit square
//! with homogeneous Dirichlet data, and their manufactured solutions.
//!
//! The layer problems use `u = g(x) g(y)` with `g(s) = s (1 - exp(-(1-s)/eps))`,
//! which carries exponential layers at `x = 1` and `y = 1` and a corner layer
//! at `(1, 1)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem '{0}' (expected poly_patch, layer_const or layer_var)")]
    UnknownProblem(String),
    #[error("epsilon = {0} must lie in (0, 1)")]
    BadEpsilon(f64),
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("coefficient check failed: {0}")]
    Inadmissible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    PolyPatch,
    LayerConst,
    LayerVar,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [Self::PolyPatch, Self::LayerConst, Self::LayerVar];

    pub fn name(self) -> &'static str {
        match self {
            Self::PolyPatch => "poly_patch",
            Self::LayerConst => "layer_const",
            Self::LayerVar => "layer_var",
        }
    }

    fn has_layers(self) -> bool {
        !matches!(self, Self::PolyPatch)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ProblemError::UnknownProblem(s.to_string()))
    }
}

/// Closed-form exact solution `(u, p, q) = (u, eps u_x, eps u_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    kind: ProblemKind,
    epsilon: f64,
}

impl ExactSolution {
    pub fn u(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ProblemKind::PolyPatch => x * (1.0 - x) * y * (1.0 - y),
            _ => self.g(x) * self.g(y),
        }
    }

    pub fn u_x(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ProblemKind::PolyPatch => (1.0 - 2.0 * x) * y * (1.0 - y),
            _ => self.dg(x) * self.g(y),
        }
    }

    pub fn u_y(&self, x: f64, y: f64) -> f64 {
        self.u_x(y, x)
    }

    /// `eps u_x`, evaluated without forming `u_x` (which is `O(1/eps)` in the layer).
    pub fn p(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ProblemKind::PolyPatch => self.epsilon * self.u_x(x, y),
            _ => self.eps_dg(x) * self.g(y),
        }
    }

    pub fn q(&self, x: f64, y: f64) -> f64 {
        self.p(y, x)
    }

    fn layer(&self, s: f64) -> f64 {
        (-(1.0 - s) / self.epsilon).exp()
    }

    fn g(&self, s: f64) -> f64 {
        s * (1.0 - self.layer(s))
    }

    fn dg(&self, s: f64) -> f64 {
        let e = self.layer(s);
        1.0 - e - s * e / self.epsilon
    }

    fn eps_dg(&self, s: f64) -> f64 {
        let e = self.layer(s);
        self.epsilon * (1.0 - e) - s * e
    }
}

/// A problem instance: coefficients, source and (optionally) the exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub epsilon: f64,
    /// Lower bound of `a1` on the closed square (layer decay rate in x).
    pub alpha1: f64,
    /// Lower bound of `a2` on the closed square.
    pub alpha2: f64,
    /// Sampled minimum of `b - div(alpha)/2`.
    pub min_reaction: f64,
    exact: Option<ExactSolution>,
}

impl ProblemSpec {
    pub fn a1(&self, x: f64, _y: f64) -> f64 {
        match self.kind {
            ProblemKind::LayerVar => 2.0 + x,
            _ => 1.0,
        }
    }

    pub fn a2(&self, _x: f64, y: f64) -> f64 {
        match self.kind {
            ProblemKind::LayerVar => 2.0 + y,
            _ => 1.0,
        }
    }

    pub fn b(&self, _x: f64, _y: f64) -> f64 {
        match self.kind {
            ProblemKind::LayerVar => 4.0,
            _ => 2.0,
        }
    }

    /// `div(alpha)` in closed form.
    pub fn div_alpha(&self, _x: f64, _y: f64) -> f64 {
        match self.kind {
            ProblemKind::LayerVar => 2.0,
            _ => 0.0,
        }
    }

    /// `b - div(alpha) / 2`, the weight of the u-part of the energy norm.
    pub fn reaction_weight(&self, x: f64, y: f64) -> f64 {
        self.b(x, y) - 0.5 * self.div_alpha(x, y)
    }

    pub fn f(&self, x: f64, y: f64) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            ProblemKind::PolyPatch => {
                let (gx, gy) = (x * (1.0 - x), y * (1.0 - y));
                2.0 * eps * (gx + gy) + (1.0 - 2.0 * x) * gy + gx * (1.0 - 2.0 * y) + 2.0 * gx * gy
            }
            ProblemKind::LayerConst => {
                // -eps g'' + g' = 1 + E collapses the O(1/eps) terms exactly.
                let ex = self.layer(x);
                let ey = self.layer(y);
                let (gx, gy) = (x * (1.0 - ex), y * (1.0 - ey));
                (1.0 + ex) * gy + gx * (1.0 + ey) + 2.0 * gx * gy
            }
            ProblemKind::LayerVar => {
                // -eps g''(s) + (2 + s) g'(s) = (2 + s) - s E - s (1 + s) E / eps
                let part = |s: f64| {
                    let e = self.layer(s);
                    (2.0 + s) - s * e - s * (1.0 + s) * e / eps
                };
                let ex = self.layer(x);
                let ey = self.layer(y);
                let (gx, gy) = (x * (1.0 - ex), y * (1.0 - ey));
                part(x) * gy + gx * part(y) + 4.0 * gx * gy
            }
        }
    }

    pub fn exact(&self) -> Option<&ExactSolution> {
        self.exact.as_ref()
    }

    pub fn require_exact(&self) -> Result<&ExactSolution, ProblemError> {
        self.exact.as_ref().ok_or(ProblemError::NoExactSolution)
    }

    /// Drops the exact solution, leaving a problem that can only be solved.
    pub fn without_exact(mut self) -> Self {
        self.exact = None;
        self
    }

    pub fn has_layers(&self) -> bool {
        self.kind.has_layers()
    }

    fn layer(&self, s: f64) -> f64 {
        (-(1.0 - s) / self.epsilon).exp()
    }
}

const SAMPLES: usize = 101;

pub fn make_problem(name: &str, epsilon: f64) -> Result<ProblemSpec, ProblemError> {
    let kind: ProblemKind = name.parse()?;
    problem(kind, epsilon)
}

pub fn problem(kind: ProblemKind, epsilon: f64) -> Result<ProblemSpec, ProblemError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ProblemError::BadEpsilon(epsilon));
    }
    let (alpha1, alpha2) = match kind {
        ProblemKind::LayerVar => (2.0, 2.0),
        _ => (1.0, 1.0),
    };
    let mut p = ProblemSpec {
        kind,
        epsilon,
        alpha1,
        alpha2,
        min_reaction: f64::INFINITY,
        exact: Some(ExactSolution { kind, epsilon }),
    };
    p.min_reaction = check_admissible(&p)?;
    Ok(p)
}

/// Samples the coefficient hypotheses on a 101 x 101 grid; returns the minimum
/// of `b - div(alpha)/2`.
fn check_admissible(p: &ProblemSpec) -> Result<f64, ProblemError> {
    let s = |i: usize| i as f64 / (SAMPLES - 1) as f64;
    let mut min_reaction = f64::INFINITY;
    for i in 0..SAMPLES {
        for j in 0..SAMPLES {
            let (x, y) = (s(i), s(j));
            if !(p.a1(x, y) > 0.0 && p.a2(x, y) > 0.0) {
                return Err(ProblemError::Inadmissible(format!(
                    "alpha not positive at ({x}, {y})"
                )));
            }
            if p.a1(x, y) < p.alpha1 || p.a2(x, y) < p.alpha2 {
                return Err(ProblemError::Inadmissible(format!(
                    "alpha below its recorded lower bound at ({x}, {y})"
                )));
            }
            min_reaction = min_reaction.min(p.reaction_weight(x, y));
        }
    }
    if !(min_reaction > 0.0) {
        return Err(ProblemError::Inadmissible(format!(
            "b - div(alpha)/2 has minimum {min_reaction}"
        )));
    }
    if let Some(ex) = p.exact() {
        for i in 0..SAMPLES {
            let t = s(i);
            for (x, y) in [(0.0, t), (1.0, t), (t, 0.0), (t, 1.0)] {
                if ex.u(x, y).abs() > 1e-12 {
                    return Err(ProblemError::Inadmissible(format!(
                        "exact solution does not vanish at ({x}, {y})"
                    )));
                }
            }
        }
    }
    Ok(min_reaction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// `max |f - (-eps Lap u + alpha . grad u + b u)|` over the sample set.
    pub max_abs: f64,
    /// `max |f|` over the same samples.
    pub max_f: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        self.max_abs / self.max_f.max(f64::MIN_POSITIVE)
    }
}

/// Residual of the PDE applied to the exact solution, with derivatives from
/// fourth-order central differences.
///
/// Samples a uniform `grid x grid` interior set plus points at
/// `{0.05, 0.1, ..., 20} eps` from the outflow boundaries. Near the layer the
/// step shrinks to `max(eps/100, (1 - x)/200)`, capped at `1e-3`.
pub fn residual_check(p: &ProblemSpec, grid: usize) -> Result<Residual, ProblemError> {
    let ex = p.require_exact()?;
    let eps = p.epsilon;
    let mut axis: Vec<f64> = (1..=grid).map(|i| i as f64 / (grid + 1) as f64).collect();
    if p.has_layers() {
        for t in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let s = 1.0 - t * eps;
            if s > 0.0 {
                axis.push(s);
            }
        }
    }
    let step = |s: f64| {
        if p.has_layers() {
            (eps / 100.0).max((1.0 - s) / 200.0).min(1e-3)
        } else {
            1e-3
        }
    };
    let u = |x: f64, y: f64| ex.u(x, y);
    let mut max_abs = 0.0f64;
    let mut max_f = 0.0f64;
    for &x in &axis {
        let hx = step(x);
        if x - 2.0 * hx <= 0.0 || x + 2.0 * hx >= 1.0 {
            continue;
        }
        for &y in &axis {
            let hy = step(y);
            if y - 2.0 * hy <= 0.0 || y + 2.0 * hy >= 1.0 {
                continue;
            }
            let (uxx, ux) = central_4th(|t| u(t, y), x, hx);
            let (uyy, uy) = central_4th(|t| u(x, t), y, hy);
            let lhs = -eps * (uxx + uyy) + p.a1(x, y) * ux + p.a2(x, y) * uy + p.b(x, y) * u(x, y);
            let f = p.f(x, y);
            max_abs = max_abs.max((f - lhs).abs());
            max_f = max_f.max(f.abs());
        }
    }
    Ok(Residual { max_abs, max_f })
}

/// Fourth-order central second and first derivatives.
fn central_4th<F: Fn(f64) -> f64>(g: F, x: f64, h: f64) -> (f64, f64) {
    let (m2, m1, c, p1, p2) = (g(x - 2.0 * h), g(x - h), g(x), g(x + h), g(x + 2.0 * h));
    let d2 = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
    let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    (d2, d1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
        }
        assert!(matches!(
            make_problem("shishkin", 1e-3),
            Err(ProblemError::UnknownProblem(_))
        ));
        assert!(matches!(make_problem("poly_patch", 1.5), Err(ProblemError::BadEpsilon(_))));
    }

    #[test]
    fn layer_const_vanishes_on_outflow() {
        let p = make_problem("layer_const", 1e-3).unwrap();
        let ex = p.exact().unwrap();
        for j in 0..=20 {
            let y = j as f64 / 20.0;
            assert_eq!(ex.u(1.0, y), 0.0);
            assert_eq!(ex.u(y, 1.0), 0.0);
        }
    }

    #[test]
    fn layer_const_centre_value() {
        let p = make_problem("layer_const", 1e-2).unwrap();
        let g = 0.5 * (1.0 - (-50.0f64).exp());
        assert!((p.exact().unwrap().u(0.5, 0.5) - g * g).abs() < 1e-16);
        assert!((g * g - 0.25).abs() < 1e-20);
    }

    #[test]
    fn poly_patch_source_at_centre() {
        let eps = 1e-3;
        let p = make_problem("poly_patch", eps).unwrap();
        // -eps Lap u = eps (2 y(1-y) + 2 x(1-x)) = eps at the centre; u_x = u_y = 0; 2u = 1/8
        assert!((p.f(0.5, 0.5) - (eps + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn flux_accessors_match_scaled_gradient() {
        for kind in ProblemKind::ALL {
            let p = problem(kind, 1e-2).unwrap();
            let ex = p.exact().unwrap();
            for &(x, y) in &[(0.3, 0.7), (0.99, 0.5), (0.995, 0.999)] {
                assert!((ex.p(x, y) - p.epsilon * ex.u_x(x, y)).abs() < 1e-13);
                assert!((ex.q(x, y) - p.epsilon * ex.u_y(x, y)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn admissibility_records_reaction_minimum() {
        assert_eq!(make_problem("layer_const", 1e-4).unwrap().min_reaction, 2.0);
        assert_eq!(make_problem("layer_var", 1e-4).unwrap().min_reaction, 3.0);
        let p = make_problem("layer_var", 1e-4).unwrap();
        assert_eq!((p.alpha1, p.alpha2), (2.0, 2.0));
    }

    #[test]
    fn poly_patch_residual_is_roundoff() {
        for eps in [1e-1, 1e-3, 1e-6] {
            let p = make_problem("poly_patch", eps).unwrap();
            let r = residual_check(&p, 40).unwrap();
            assert!(r.max_abs <= 1e-10, "eps={eps}: {}", r.max_abs);
        }
    }

    #[test]
    fn layer_residuals_within_tolerance() {
        for name in ["layer_const", "layer_var"] {
            for eps in [1e-2, 1e-3] {
                let p = make_problem(name, eps).unwrap();
                let r = residual_check(&p, 40).unwrap();
                assert!(
                    r.max_abs <= 1e-6 * r.max_f,
                    "{name} eps={eps}: {} vs max f {}",
                    r.max_abs,
                    r.max_f
                );
            }
        }
    }

    #[test]
    fn residual_needs_exact() {
        let p = make_problem("layer_const", 1e-2).unwrap().without_exact();
        assert_eq!(residual_check(&p, 10), Err(ProblemError::NoExactSolution));
    }
}
