//! Reference-interval machinery: Gauss-Legendre quadrature, Legendre
//! polynomial tables and the affine map onto a physical interval.
//!
//! Everything lives on `[-1, 1]`. The local space on a rectangle is the
//! tensor product of these 1D tables, so no 2D reference data is stored.

/// An n-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(affine_map(a, b, r)))
            .sum::<f64>()
            * half
    }
}

/// Builds the `n`-point Gauss-Legendre rule.
///
/// Nodes are the roots of `P_n`, found by Newton iteration from the
/// Chebyshev-like initial guesses `cos(pi (i + 3/4) / (n + 1/2))`. Weights are
/// `2 / ((1 - x^2) P_n'(x)^2)`. Nodes are returned in increasing order.
///
/// # Panics
///
/// Panics if `n == 0`.
pub fn gauss_legendre_rule(n: usize) -> QuadratureRule {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // Roots are symmetric; compute the non-negative half.
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

/// Value and derivative of `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (vals, ders) = legendre_values(n, x);
    (vals[n], ders[n])
}

/// Values and first derivatives of `P_0..=P_k` at `x` via the three-term
/// recurrence `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}` and
/// `P'_{n+1} = P'_{n-1} + (2n+1) P_n`.
pub fn legendre_values(k: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; k + 1];
    let mut dp = vec![0.0; k + 1];
    p[0] = 1.0;
    if k >= 1 {
        p[1] = x;
        dp[1] = 1.0;
    }
    for n in 1..k {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * nf + 1.0) * p[n];
    }
    (p, dp)
}

/// `int_{-1}^{1} P_n^2 = 2 / (2n + 1)`.
#[inline]
pub fn legendre_norm_sq(n: usize) -> f64 {
    2.0 / (2.0 * n as f64 + 1.0)
}

/// Legendre values and derivatives of degree `0..=k` tabulated on a node set.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub degree: usize,
    pub nodes: Vec<f64>,
    /// `values[m][q] = P_m(nodes[q])`
    pub values: Vec<Vec<f64>>,
    /// `derivs[m][q] = P_m'(nodes[q])`
    pub derivs: Vec<Vec<f64>>,
    /// `P_m(-1) = (-1)^m`
    pub left: Vec<f64>,
    /// `P_m(1) = 1`
    pub right: Vec<f64>,
}

impl BasisTable {
    pub fn n_basis(&self) -> usize {
        self.degree + 1
    }
}

pub fn legendre_table(k: usize, nodes: &[f64]) -> BasisTable {
    let mut values = vec![vec![0.0; nodes.len()]; k + 1];
    let mut derivs = vec![vec![0.0; nodes.len()]; k + 1];
    for (q, &x) in nodes.iter().enumerate() {
        let (p, dp) = legendre_values(k, x);
        for m in 0..=k {
            values[m][q] = p[m];
            derivs[m][q] = dp[m];
        }
    }
    let left = (0..=k).map(|m| if m % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let right = vec![1.0; k + 1];
    BasisTable {
        degree: k,
        nodes: nodes.to_vec(),
        values,
        derivs,
        left,
        right,
    }
}

/// Maps `r` in `[-1, 1]` onto `[a, b]`.
#[inline]
pub fn affine_map(a: f64, b: f64, r: f64) -> f64 {
    a + 0.5 * (b - a) * (r + 1.0)
}

/// `dx/dr` of [`affine_map`].
#[inline]
pub fn jacobian(a: f64, b: f64) -> f64 {
    0.5 * (b - a)
}

/// Inverse of [`affine_map`].
#[inline]
pub fn to_reference(a: f64, b: f64, x: f64) -> f64 {
    2.0 * (x - a) / (b - a) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bisection on P_n between sign changes: independent of the Newton path.
    fn legendre_roots_by_bisection(n: usize) -> Vec<f64> {
        let p = |x: f64| legendre_values(n, x).0[n];
        let samples = 20_000;
        let mut roots = Vec::new();
        for s in 0..samples {
            let mut a = -1.0 + 2.0 * s as f64 / samples as f64;
            let mut b = -1.0 + 2.0 * (s + 1) as f64 / samples as f64;
            if p(a) == 0.0 {
                roots.push(a);
                continue;
            }
            if p(a) * p(b) < 0.0 {
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if p(a) * p(m) <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    #[test]
    fn one_point_rule() {
        let q = gauss_legendre_rule(1);
        assert_eq!(q.nodes, vec![0.0]);
        assert_eq!(q.weights, vec![2.0]);
    }

    #[test]
    fn two_point_rule_matches_bisection_roots() {
        let q = gauss_legendre_rule(2);
        let roots = legendre_roots_by_bisection(2);
        assert_eq!(roots.len(), 2);
        for (x, r) in q.nodes.iter().zip(&roots) {
            assert!((x - r).abs() < 1e-15);
        }
        assert!((q.nodes[1] - 0.5773502691896257).abs() < 1e-16);
        assert!((q.weights[0] - 1.0).abs() < 1e-15);
        assert!((q.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nodes_agree_with_bisection_up_to_eight_points() {
        for n in 3..=8 {
            let q = gauss_legendre_rule(n);
            let roots = legendre_roots_by_bisection(n);
            assert_eq!(roots.len(), n);
            for (x, r) in q.nodes.iter().zip(&roots) {
                assert!((x - r).abs() < 1e-14, "n={n}: {x} vs {r}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=12 {
            let s: f64 = gauss_legendre_rule(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}: {s}");
        }
    }

    #[test]
    fn legendre_spot_values() {
        let (p, _) = legendre_values(3, 0.5);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.5);
        assert!((p[2] + 0.125).abs() < 1e-16);
        let t = legendre_table(4, &[-1.0, 1.0]);
        for m in 0..=4 {
            assert_eq!(t.values[m][1], 1.0);
            assert!((t.values[m][0] - t.left[m]).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let delta = 1e-6;
        for k in 1..=4 {
            for &x in &[-0.9, -0.3, 0.0, 0.41, 0.77] {
                let (_, dp) = legendre_values(k, x);
                let (pp, _) = legendre_values(k, x + delta);
                let (pm, _) = legendre_values(k, x - delta);
                for m in 0..=k {
                    let fd = (pp[m] - pm[m]) / (2.0 * delta);
                    assert!((fd - dp[m]).abs() < 1e-8, "k={k} m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn affine_map_examples() {
        assert_eq!(affine_map(0.0, 1.0, -1.0), 0.0);
        assert_eq!(affine_map(0.0, 1.0, 1.0), 1.0);
        assert_eq!(affine_map(2.0, 6.0, 0.0), 4.0);
        assert_eq!(jacobian(2.0, 6.0), 2.0);
        assert!((to_reference(2.0, 6.0, 5.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_on_physical_interval() {
        let q = gauss_legendre_rule(3);
        let v = q.integrate(1.0, 3.0, |x| x * x * x);
        assert!((v - 20.0).abs() < 1e-13);
    }
}
