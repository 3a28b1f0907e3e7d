//! Symmetric matrices, the positive semidefinite cone and its Hilbert
//! projective metric.
//!
//! Everything the transfer operator touches lives in the space of `d x d`
//! symmetric matrices equipped with the Hilbert-Schmidt inner product
//! `(A, B) = tr(A B)`. Three norms are in play:
//!
//! * `op`: the largest singular value,
//! * `hs`: the Hilbert-Schmidt norm `sqrt((A, A))`,
//! * `quad`: the largest eigenvalue in absolute value.
//!
//! For symmetric matrices `op == quad` and `quad <= hs <= sqrt(d) * quad`.
//!
//! The projective metric on the open cone of positive definite matrices is
//! `theta(A, B) = log(beta / alpha)` where `alpha = sup{t : B - tA >= 0}` and
//! `beta = inf{t : tA - B >= 0}`. Both extremes are eigenvalues of the
//! whitened matrix `A^{-1/2} B A^{-1/2}`.

mod jacobi;

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use jacobi::SymEigen;

/// Dense symmetric `d x d` matrix.
///
/// Construction symmetrizes its input, so `get(i, j) == get(j, i)` holds
/// exactly for every value of this type.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + m^t) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Empty);
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix { m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(values)),
        }
    }

    /// Rank-one matrix `v v^t`.
    pub fn outer(v: &DVector<f64>) -> Self {
        Self::symmetrized(v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.m[(i, j)] = value;
        self.m[(j, i)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix { m: &self.m * c }
    }

    /// `L^t A L`; `l` may be any square matrix of matching size.
    pub fn congruence(&self, l: &DMatrix<f64>) -> Self {
        Self::symmetrized(l.transpose() * &self.m * l)
    }

    /// `L A L^t`.
    pub fn co_congruence(&self, l: &DMatrix<f64>) -> Self {
        Self::symmetrized(l * &self.m * l.transpose())
    }

    pub fn eigen(&self) -> SymEigen {
        jacobi::jacobi_eigen(&self.m)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Upper triangle, row-major: `a11, a12, ..., a1d, a22, ..., add`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    /// Applies `f` to the eigenvalues: `V f(Lambda) V^t`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let e = self.eigen();
        let mapped = DVector::from_iterator(e.values.len(), e.values.iter().map(|&x| f(x)));
        Self::symmetrized(&e.vectors * DMatrix::from_diagonal(&mapped) * e.vectors.transpose())
    }

    fn check_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &SymMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(SymMatrix {
            m: &self.m + &other.m,
        })
    }

    pub fn try_sub(&self, other: &SymMatrix) -> Result<Self> {
        self.check_dim(other)?;
        Ok(SymMatrix {
            m: &self.m - &other.m,
        })
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = self
            .m
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        f.debug_tuple("SymMatrix").field(&rows).finish()
    }
}

/// Panics on dimension mismatch; use [`SymMatrix::try_add`] for checked addition.
impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.try_add(rhs)
            .expect("dimension mismatch in SymMatrix addition")
    }
}

/// Panics on dimension mismatch; use [`SymMatrix::try_sub`] for checked subtraction.
impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.try_sub(rhs)
            .expect("dimension mismatch in SymMatrix subtraction")
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, rhs: f64) -> SymMatrix {
        self.scaled(rhs)
    }
}

/// Parameters of the Hölder cone: amplitude `a > 0` and exponent `0 < nu <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams {
    a: f64,
    nu: f64,
}

impl ConeParams {
    pub fn new(a: f64, nu: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cone amplitude must be > 0, got {a}"
            )));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cone exponent must be in (0, 1], got {nu}"
            )));
        }
        Ok(ConeParams { a, nu })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Hilbert-Schmidt inner product `tr(A^t B)`.
pub fn hs_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_dim(b)?;
    Ok(a.m.dot(&b.m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub op: f64,
    pub hs: f64,
    pub quad: f64,
}

pub fn norms(a: &SymMatrix) -> Norms {
    let op =
        a.m.clone()
            .svd(false, false)
            .singular_values
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s));
    let hs = a.m.dot(&a.m).sqrt();
    let e = a.eigen();
    let quad = e.min().abs().max(e.max().abs());
    Norms { op, hs, quad }
}

pub fn hs_norm(a: &SymMatrix) -> f64 {
    a.m.norm()
}

/// True iff `lambda_min(A) >= -tol * max(1, hs(A))`.
pub fn is_psd(a: &SymMatrix, tol: f64) -> bool {
    a.eigen().min() >= -tol * hs_norm(a).max(1.0)
}

fn require_pd(a: &SymMatrix) -> Result<SymEigen> {
    let e = a.eigen();
    if e.min() > 0.0 {
        Ok(e)
    } else {
        Err(Error::NotPositiveDefinite {
            min_eigenvalue: e.min(),
        })
    }
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of `A^{-1/2} B A^{-1/2}`.
pub fn whitened_extremes(a: &SymMatrix, b: &SymMatrix) -> Result<(f64, f64)> {
    a.check_dim(b)?;
    let ea = require_pd(a)?;
    require_pd(b)?;
    let inv_sqrt =
        DVector::from_iterator(ea.values.len(), ea.values.iter().map(|&x| x.sqrt().recip()));
    let w = &ea.vectors * DMatrix::from_diagonal(&inv_sqrt) * ea.vectors.transpose();
    let whitened = SymMatrix::symmetrized(&w * &b.m * &w);
    let e = whitened.eigen();
    Ok((e.min(), e.max()))
}

/// `sup{t > 0 : B - tA is positive semidefinite}`.
pub fn cone_alpha(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    whitened_extremes(a, b).map(|(lo, _)| lo)
}

/// `inf{t > 0 : tA - B is positive semidefinite}`.
pub fn cone_beta(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    whitened_extremes(a, b).map(|(_, hi)| hi)
}

/// Hilbert projective distance between the rays through `A` and `B`.
pub fn cone_theta(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    let (lo, hi) = whitened_extremes(a, b)?;
    Ok((hi / lo).ln().max(0.0))
}
