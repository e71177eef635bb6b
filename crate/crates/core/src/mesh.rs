//! Bakhvalov-type layer-adapted meshes.
//!
//! The generating function grades towards `d = 0`:
//!
//! ```text
//! phi(d) = -rho eps ln(1 - 2 (1 - eps) d)   d in [0, 1/2]
//! phi(d) = 1 - t (1 - d)                    d in (1/2, 1],  t = 2 (1 - tau)
//! ```
//!
//! with transition point `tau = rho eps ln(1/eps)`. The layers of the model
//! problem sit at `x = 1` and `y = 1`, so the mesh is mirrored:
//! `x_i = 1 - phi((N - i) / N)`. The fine graded region is then
//! `[1 - tau, 1]` and all step bounds below are read with distances measured
//! from `x = 1`.

use std::io::Write;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("N = {0} must be even and at least 8")]
    BadElementCount(usize),
    #[error("rho = {0} must be finite and positive")]
    BadRho(f64),
    #[error("epsilon = {0} must lie in (0, 1)")]
    BadEpsilon(f64),
    #[error("epsilon = {epsilon} exceeds 1/N = {bound}")]
    EpsilonTooLarge { epsilon: f64, bound: f64 },
    #[error("transition point rho*eps*ln(1/eps) = {tau} is not below 1/2")]
    TransitionTooWide { tau: f64 },
    #[error("rho = {rho} is below k + 2 = {bound} for degree k = {degree}")]
    RhoTooSmall { rho: f64, degree: usize, bound: f64 },
    #[error("x- and y-meshes have different element counts ({0} vs {1})")]
    MismatchedN(usize, usize),
    #[error("mesh points must start at 0, end at 1 and strictly increase")]
    BadPoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshConfig {
    /// Elements per direction.
    pub n: usize,
    pub rho: f64,
    pub epsilon: f64,
}

impl MeshConfig {
    pub fn new(n: usize, rho: f64, epsilon: f64) -> Self {
        Self { n, rho, epsilon }
    }

    /// `rho * eps * ln(1/eps)`.
    pub fn tau(&self) -> f64 {
        self.rho * self.epsilon * (1.0 / self.epsilon).ln()
    }

    /// Every violated bound, in a fixed order. Empty when the config is usable.
    pub fn violations(&self) -> Vec<MeshError> {
        let mut out = Vec::new();
        if self.n < 8 || self.n % 2 != 0 {
            out.push(MeshError::BadElementCount(self.n));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            out.push(MeshError::BadRho(self.rho));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            out.push(MeshError::BadEpsilon(self.epsilon));
            return out;
        }
        if self.n > 0 && self.epsilon > 1.0 / self.n as f64 {
            out.push(MeshError::EpsilonTooLarge {
                epsilon: self.epsilon,
                bound: 1.0 / self.n as f64,
            });
        }
        let tau = self.tau();
        if self.rho.is_finite() && self.rho > 0.0 && tau >= 0.5 {
            out.push(MeshError::TransitionTooWide { tau });
        }
        out
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// The grading must be at least `k + 2` for degree-`k` elements.
    pub fn validate_for_degree(&self, k: usize) -> Result<(), MeshError> {
        self.validate()?;
        let bound = k as f64 + 2.0;
        if self.rho < bound {
            return Err(MeshError::RhoTooSmall {
                rho: self.rho,
                degree: k,
                bound,
            });
        }
        Ok(())
    }

    /// The (unmirrored) generating function `phi(d)`.
    pub fn generating_function(&self, d: f64) -> f64 {
        if d <= 0.5 {
            -self.rho * self.epsilon * (1.0 - 2.0 * (1.0 - self.epsilon) * d).ln()
        } else {
            1.0 - self.linear_slope() * (1.0 - d)
        }
    }

    /// `t = 2 (1 - tau)`, making `phi` continuous at `d = 1/2`.
    pub fn linear_slope(&self) -> f64 {
        2.0 * (1.0 - self.tau())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    /// `x_0 = 0 < x_1 < ... < x_N = 1`
    pub points: Vec<f64>,
    /// `steps[i - 1] = h_i = x_i - x_{i-1}` for `i = 1..=N`
    pub steps: Vec<f64>,
    /// Always `N / 2`.
    pub transition_index: usize,
    /// `1 - x_{N/2}`.
    pub tau: f64,
    /// Present when the mesh came from [`build_mesh_1d`].
    pub config: Option<MeshConfig>,
}

impl Mesh1D {
    /// A mesh from explicit points (uniform meshes in tests, for instance).
    pub fn from_points(points: Vec<f64>) -> Result<Self, MeshError> {
        let n = points.len().saturating_sub(1);
        if n == 0
            || n % 2 != 0
            || points[0] != 0.0
            || points[n] != 1.0
            || points.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(MeshError::BadPoints);
        }
        let steps = points.windows(2).map(|w| w[1] - w[0]).collect();
        let tau = 1.0 - points[n / 2];
        Ok(Self {
            points,
            steps,
            transition_index: n / 2,
            tau,
            config: None,
        })
    }

    pub fn uniform(n: usize) -> Result<Self, MeshError> {
        let mut points: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        if let Some(last) = points.last_mut() {
            *last = 1.0;
        }
        Self::from_points(points)
    }

    pub fn n(&self) -> usize {
        self.steps.len()
    }

    /// Step `h_i` with the 1-based index used throughout the analysis.
    pub fn h(&self, i: usize) -> f64 {
        self.steps[i - 1]
    }

    /// `[x_e, x_{e+1}]` for 0-based element `e`.
    pub fn interval(&self, e: usize) -> (f64, f64) {
        (self.points[e], self.points[e + 1])
    }

    /// Debug dump with columns `i,x_i,h_i` (`h_0` left empty).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,x_i,h_i")?;
        for (i, x) in self.points.iter().enumerate() {
            if i == 0 {
                writeln!(out, "{i},{x:e},")?;
            } else {
                writeln!(out, "{i},{x:e},{:e}", self.steps[i - 1])?;
            }
        }
        Ok(())
    }
}

/// Mirrored Bakhvalov-type mesh, `x_i = 1 - phi((N - i) / N)`.
pub fn build_mesh_1d(cfg: &MeshConfig) -> Result<Mesh1D, MeshError> {
    cfg.validate()?;
    let n = cfg.n;
    let nf = n as f64;
    let t = cfg.linear_slope();
    let points: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 {
                0.0
            } else if i < n / 2 {
                // 1 - phi(d) on the linear branch, without cancellation
                t * (i as f64 / nf)
            } else {
                1.0 - cfg.generating_function((n - i) as f64 / nf)
            }
        })
        .collect();
    let steps = points.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(Mesh1D {
        tau: 1.0 - points[n / 2],
        points,
        steps,
        transition_index: n / 2,
        config: Some(*cfg),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub measured: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn within(name: &'static str, measured: f64, lower: f64, upper: f64) -> Self {
        Self {
            name,
            measured,
            lower,
            upper,
            passed: measured >= lower && measured <= upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Upper constant for `h_N <= c eps / N`. With `a = 2 (1 - eps) / N <= 1/4`,
/// `h_N = -rho eps ln(1 - a) <= rho eps a / (1 - a) <= (4/3) rho eps a`.
pub fn last_step_upper_constant(rho: f64) -> f64 {
    8.0 * rho / 3.0
}

/// Checks the step-size lemma on a mirrored mesh. Report-only; never fails.
pub fn check_mesh_properties(m: &Mesh1D, cfg: &MeshConfig) -> PropertyReport {
    let n = m.n();
    let half = n / 2;
    let nf = n as f64;
    let (rho, eps) = (cfg.rho, cfg.epsilon);
    let tau = cfg.tau();
    let mut checks = Vec::new();

    let endpoint_err = m.points[0].abs().max((m.points[n] - 1.0).abs());
    checks.push(PropertyCheck::within("endpoints", endpoint_err, 0.0, 0.0));

    let min_step = m.steps.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(PropertyCheck::within(
        "strictly_increasing",
        min_step,
        f64::MIN_POSITIVE,
        f64::INFINITY,
    ));

    let transition_err = ((1.0 - m.points[half]) - tau).abs();
    checks.push(PropertyCheck::within(
        "transition_point",
        transition_err,
        0.0,
        4.0 * f64::EPSILON,
    ));

    let h1 = m.h(1);
    let coarse_spread = (1..=half)
        .map(|i| (m.h(i) - h1).abs())
        .fold(0.0, f64::max);
    checks.push(PropertyCheck::within(
        "coarse_uniform",
        coarse_spread,
        0.0,
        8.0 * f64::EPSILON,
    ));

    let coarse_min = (1..=half).map(|i| m.h(i)).fold(f64::INFINITY, f64::min);
    let coarse_max = (1..=half).map(|i| m.h(i)).fold(0.0, f64::max);
    checks.push(PropertyCheck::within(
        "coarse_step_lower",
        coarse_min,
        1.0 / nf,
        f64::INFINITY,
    ));
    checks.push(PropertyCheck::within(
        "coarse_step_upper",
        coarse_max,
        0.0,
        2.0 / nf,
    ));

    // largest increase h_{i} - h_{i-1} over i = N/2+3..=N; must be <= 0
    let max_increase = ((half + 3)..=n)
        .map(|i| m.h(i) - m.h(i - 1))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(PropertyCheck::within(
        "graded_non_increasing",
        if max_increase.is_finite() { max_increase } else { 0.0 },
        f64::NEG_INFINITY,
        0.0,
    ));

    checks.push(PropertyCheck::within(
        "last_step",
        m.h(n),
        rho * eps / nf,
        last_step_upper_constant(rho) * eps / nf,
    ));
    checks.push(PropertyCheck::within(
        "step_after_transition_plus_one",
        m.h(half + 2),
        0.25 * rho * eps,
        rho * eps,
    ));
    checks.push(PropertyCheck::within(
        "step_after_transition",
        m.h(half + 1),
        0.5 * rho * eps,
        2.0 * rho / nf,
    ));

    // 1 - x_{N/2+1} = rho eps ln(1/(2/N + eps(1 - 2/N))): at most rho eps ln N,
    // at least rho eps ln(N/3) >= rho eps ln(N) / 4 for eps <= 1/N, N >= 8.
    let ln_n = nf.ln();
    checks.push(PropertyCheck::within(
        "first_graded_distance",
        1.0 - m.points[half + 1],
        0.25 * rho * eps * ln_n,
        rho * eps * ln_n,
    ));
    checks.push(PropertyCheck::within(
        "transition_distance",
        1.0 - m.points[half],
        rho * eps * eps.ln().abs() - 4.0 * f64::EPSILON,
        f64::INFINITY,
    ));

    PropertyReport { checks }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    pub mesh_x: Mesh1D,
    pub mesh_y: Mesh1D,
}

impl Mesh2D {
    pub fn new(mesh_x: Mesh1D, mesh_y: Mesh1D) -> Result<Self, MeshError> {
        if mesh_x.n() != mesh_y.n() {
            return Err(MeshError::MismatchedN(mesh_x.n(), mesh_y.n()));
        }
        Ok(Self { mesh_x, mesh_y })
    }

    pub fn n(&self) -> usize {
        self.mesh_x.n()
    }

    pub fn num_elements(&self) -> usize {
        self.n() * self.n()
    }

    /// `(x0, x1, y0, y1)` of the 0-based element `(ix, iy)`.
    pub fn element(&self, ix: usize, iy: usize) -> Rect {
        let (x0, x1) = self.mesh_x.interval(ix);
        let (y0, y1) = self.mesh_y.interval(iy);
        Rect { x0, x1, y0, y1 }
    }

    /// The smaller of the two configured gradings, if both are Bakhvalov meshes.
    pub fn rho(&self) -> Option<f64> {
        match (&self.mesh_x.config, &self.mesh_y.config) {
            (Some(a), Some(b)) => Some(a.rho.min(b.rho)),
            _ => None,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn hx(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn hy(&self) -> f64 {
        self.y1 - self.y0
    }
}

pub fn build_mesh_2d(cfg_x: &MeshConfig, cfg_y: &MeshConfig) -> Result<Mesh2D, MeshError> {
    if cfg_x.n != cfg_y.n {
        return Err(MeshError::MismatchedN(cfg_x.n, cfg_y.n));
    }
    Mesh2D::new(build_mesh_1d(cfg_x)?, build_mesh_1d(cfg_y)?)
}
