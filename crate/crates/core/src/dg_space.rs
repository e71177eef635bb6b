//! Discontinuous tensor-product fields on the `N x N` mesh.
//!
//! Element `(ix, iy)` (0-based) spans `[x_ix, x_{ix+1}] x [y_iy, y_{iy+1}]`;
//! the analysis' `K_{ij}` is `(i - 1, j - 1)`. On each element the field is
//! `sum_{m,n} c_{mn} P_m(xr) P_n(yr)` with Legendre polynomials in reference
//! coordinates. Coefficients are stored element by element with `ix`
//! fastest, and `m` fastest inside an element.
//!
//! Vertical edges are numbered `0..=N` by their abscissa `x_e`; the "minus"
//! trace comes from the element on the left, "plus" from the one on the
//! right. Horizontal edges are analogous with below/above.

use thiserror::Error;

use crate::basis::{legendre_norm_sq, legendre_values};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DgError {
    #[error("element ({0}, {1}) outside an {2} x {2} mesh")]
    ElementOutOfRange(usize, usize, usize),
    #[error("edge {edge} has no {side:?} trace (domain boundary)")]
    NoTrace { edge: usize, side: Side },
    #[error("edge index {0} outside 0..={1}")]
    EdgeOutOfRange(usize, usize),
    #[error("discretisations differ: (k={0}, N={1}) vs (k={2}, N={3})")]
    Mismatch(usize, usize, usize, usize),
    #[error("coefficient vector has length {0}, expected {1}")]
    BadLength(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from below (left / bottom).
    Minus,
    /// Limit from above (right / top).
    Plus,
}

/// Degree-`k` polynomial on an edge segment, in Legendre coefficients of the
/// segment's reference coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePoly(pub Vec<f64>);

impl EdgePoly {
    pub fn zero(k: usize) -> Self {
        Self(vec![0.0; k + 1])
    }

    pub fn eval(&self, r: f64) -> f64 {
        let (p, _) = legendre_values(self.0.len() - 1, r);
        self.0.iter().zip(&p).map(|(c, v)| c * v).sum()
    }

    /// `int_segment self * other` for a segment of length `h`.
    pub fn inner(&self, other: &EdgePoly, h: f64) -> f64 {
        0.5 * h
            * self
                .0
                .iter()
                .zip(&other.0)
                .enumerate()
                .map(|(n, (a, b))| a * b * legendre_norm_sq(n))
                .sum::<f64>()
    }

    fn sub(&self, other: &EdgePoly) -> EdgePoly {
        EdgePoly(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    fn neg(&self) -> EdgePoly {
        EdgePoly(self.0.iter().map(|a| -a).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DGField {
    k: usize,
    n: usize,
    coeffs: Vec<f64>,
}

impl DGField {
    pub fn zeros(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            coeffs: vec![0.0; n * n * (k + 1) * (k + 1)],
        }
    }

    pub fn from_coeffs(k: usize, n: usize, coeffs: Vec<f64>) -> Result<Self, DgError> {
        let expected = n * n * (k + 1) * (k + 1);
        if coeffs.len() != expected {
            return Err(DgError::BadLength(coeffs.len(), expected));
        }
        Ok(Self { k, n, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Basis functions per element, `(k + 1)^2`.
    pub fn block_len(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Index of basis `P_m P_n` inside an element block.
    #[inline]
    pub fn local_index(&self, m: usize, n: usize) -> usize {
        n * (self.k + 1) + m
    }

    fn check(&self, ix: usize, iy: usize) -> Result<(), DgError> {
        if ix >= self.n || iy >= self.n {
            return Err(DgError::ElementOutOfRange(ix, iy, self.n));
        }
        Ok(())
    }

    pub fn block(&self, ix: usize, iy: usize) -> &[f64] {
        let nb = self.block_len();
        let e = iy * self.n + ix;
        &self.coeffs[e * nb..(e + 1) * nb]
    }

    pub fn block_mut(&mut self, ix: usize, iy: usize) -> &mut [f64] {
        let nb = self.block_len();
        let e = iy * self.n + ix;
        &mut self.coeffs[e * nb..(e + 1) * nb]
    }

    /// Value at reference point `(xr, yr)` of element `(ix, iy)`.
    pub fn eval(&self, ix: usize, iy: usize, xr: f64, yr: f64) -> Result<f64, DgError> {
        self.check(ix, iy)?;
        let (px, _) = legendre_values(self.k, xr);
        let (py, _) = legendre_values(self.k, yr);
        let c = self.block(ix, iy);
        let mut v = 0.0;
        for n in 0..=self.k {
            for m in 0..=self.k {
                v += c[self.local_index(m, n)] * px[m] * py[n];
            }
        }
        Ok(v)
    }

    /// Trace on vertical edge `edge` restricted to element row `iy`.
    pub fn trace_x(&self, edge: usize, iy: usize, side: Side) -> Result<EdgePoly, DgError> {
        if edge > self.n {
            return Err(DgError::EdgeOutOfRange(edge, self.n));
        }
        let (ix, end) = match side {
            Side::Minus if edge > 0 => (edge - 1, 1.0),
            Side::Plus if edge < self.n => (edge, -1.0),
            _ => return Err(DgError::NoTrace { edge, side }),
        };
        self.check(ix, iy)?;
        let (px, _) = legendre_values(self.k, end);
        let c = self.block(ix, iy);
        let out = (0..=self.k)
            .map(|n| (0..=self.k).map(|m| c[self.local_index(m, n)] * px[m]).sum())
            .collect();
        Ok(EdgePoly(out))
    }

    /// Trace on horizontal edge `edge` restricted to element column `ix`.
    pub fn trace_y(&self, edge: usize, ix: usize, side: Side) -> Result<EdgePoly, DgError> {
        if edge > self.n {
            return Err(DgError::EdgeOutOfRange(edge, self.n));
        }
        let (iy, end) = match side {
            Side::Minus if edge > 0 => (edge - 1, 1.0),
            Side::Plus if edge < self.n => (edge, -1.0),
            _ => return Err(DgError::NoTrace { edge, side }),
        };
        self.check(ix, iy)?;
        let (py, _) = legendre_values(self.k, end);
        let c = self.block(ix, iy);
        let out = (0..=self.k)
            .map(|m| (0..=self.k).map(|n| c[self.local_index(m, n)] * py[n]).sum())
            .collect();
        Ok(EdgePoly(out))
    }

    /// `[[v]]` on vertical edge `edge`, row `iy`: `v+ - v-` inside,
    /// `v+` at `x = 0` and `-v-` at `x = 1`.
    pub fn jump_x(&self, edge: usize, iy: usize) -> Result<EdgePoly, DgError> {
        if edge == 0 {
            self.trace_x(edge, iy, Side::Plus)
        } else if edge == self.n {
            Ok(self.trace_x(edge, iy, Side::Minus)?.neg())
        } else {
            Ok(self
                .trace_x(edge, iy, Side::Plus)?
                .sub(&self.trace_x(edge, iy, Side::Minus)?))
        }
    }

    /// `[[v]]` on horizontal edge `edge`, column `ix`.
    pub fn jump_y(&self, edge: usize, ix: usize) -> Result<EdgePoly, DgError> {
        if edge == 0 {
            self.trace_y(edge, ix, Side::Plus)
        } else if edge == self.n {
            Ok(self.trace_y(edge, ix, Side::Minus)?.neg())
        } else {
            Ok(self
                .trace_y(edge, ix, Side::Plus)?
                .sub(&self.trace_y(edge, ix, Side::Minus)?))
        }
    }

    fn same_space(&self, other: &DGField) -> Result<(), DgError> {
        if self.k != other.k || self.n != other.n {
            return Err(DgError::Mismatch(self.k, self.n, other.k, other.n));
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &DGField) -> Result<DGField, DgError> {
        self.same_space(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(DGField { coeffs, ..*self })
    }

    pub fn scaled(&self, alpha: f64) -> DGField {
        DGField {
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
            ..*self
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// The LDG unknowns `(U, P, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DGSolution {
    pub u: DGField,
    pub p: DGField,
    pub q: DGField,
}

impl DGSolution {
    pub fn new(u: DGField, p: DGField, q: DGField) -> Result<Self, DgError> {
        u.same_space(&p)?;
        u.same_space(&q)?;
        Ok(Self { u, p, q })
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        Self {
            u: DGField::zeros(k, n),
            p: DGField::zeros(k, n),
            q: DGField::zeros(k, n),
        }
    }

    pub fn degree(&self) -> usize {
        self.u.k
    }

    pub fn n(&self) -> usize {
        self.u.n
    }

    pub fn fields(&self) -> [&DGField; 3] {
        [&self.u, &self.p, &self.q]
    }

    pub fn axpy(&self, alpha: f64, other: &DGSolution) -> Result<DGSolution, DgError> {
        Ok(DGSolution {
            u: self.u.axpy(alpha, &other.u)?,
            p: self.p.axpy(alpha, &other.p)?,
            q: self.q.axpy(alpha, &other.q)?,
        })
    }

    pub fn scaled(&self, alpha: f64) -> DGSolution {
        DGSolution {
            u: self.u.scaled(alpha),
            p: self.p.scaled(alpha),
            q: self.q.scaled(alpha),
        }
    }
}
