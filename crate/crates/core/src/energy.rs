//! The energy form `E(f, h) = int (grad f, d tau grad h)` evaluated by a
//! cell sum at a fixed depth, and its self-similarity residual.
//!
//! Each cell `[w]` contributes `(grad f(x_w), tau([w]) grad h(x_w))` with the
//! node `x_w = psi_w(p)`, `p` the fixed point of `psi_1`. Because the nodes
//! satisfy `x_{iw} = psi_i(x_w)`, the sum over `f o psi_i` at depth `L`
//! is exactly `beta` times the sum over `f` at depth `L + 1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gibbs::GibbsData;
use crate::ifs::AffineMap;

type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Linear,
    Polynomial,
    Callable,
}

/// A `C^1` function on `R^d` together with its gradient.
#[derive(Clone)]
pub struct TestFunction {
    kind: FunctionKind,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl TestFunction {
    /// `x -> (coeffs, x) + constant`.
    pub fn linear(coeffs: DVector<f64>, constant: f64) -> Self {
        let dim = coeffs.len();
        let grad = coeffs.clone();
        TestFunction {
            kind: FunctionKind::Linear,
            dim,
            value: Arc::new(move |x| coeffs.dot(x) + constant),
            gradient: Arc::new(move |_| grad.clone()),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::linear(DVector::zeros(dim), c)
    }

    /// The coordinate function `x -> x_k` (0-based `k`).
    pub fn coordinate(dim: usize, k: usize) -> Self {
        assert!(k < dim, "coordinate {k} out of range for dimension {dim}");
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        Self::linear(e, 0.0)
    }

    /// Sum of monomials `c * prod_j x_j^{e_j}`, each given as `(c, exponents)`.
    pub fn polynomial(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: e.len(),
            });
        }
        let terms = Arc::new(terms);
        let for_grad = Arc::clone(&terms);
        Ok(TestFunction {
            kind: FunctionKind::Polynomial,
            dim,
            value: Arc::new(move |x| terms.iter().map(|(c, e)| c * monomial(x, e, None)).sum()),
            gradient: Arc::new(move |x| {
                DVector::from_fn(dim, |k, _| {
                    for_grad
                        .iter()
                        .filter(|(_, e)| e[k] > 0)
                        .map(|(c, e)| c * e[k] as f64 * monomial(x, e, Some(k)))
                        .sum()
                })
            }),
        })
    }

    pub fn callable<V, G>(dim: usize, value: V, gradient: G) -> Self
    where
        V: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        TestFunction {
            kind: FunctionKind::Callable,
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    /// `f o map`, with gradient `L^t grad f(map(x))`.
    pub fn compose(&self, map: &AffineMap) -> Result<Self> {
        if map.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: map.dim(),
            });
        }
        let (value, gradient) = (Arc::clone(&self.value), Arc::clone(&self.gradient));
        let (m1, m2) = (map.clone(), map.clone());
        Ok(TestFunction {
            kind: self.kind,
            dim: self.dim,
            value: Arc::new(move |x| value(&m1.apply(x))),
            gradient: Arc::new(move |x| m2.linear().transpose() * gradient(&m2.apply(x))),
        })
    }

    pub fn sum(&self, other: &TestFunction) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let kind = match (self.kind, other.kind) {
            (FunctionKind::Linear, FunctionKind::Linear) => FunctionKind::Linear,
            (FunctionKind::Callable, _) | (_, FunctionKind::Callable) => FunctionKind::Callable,
            _ => FunctionKind::Polynomial,
        };
        let (v1, v2) = (Arc::clone(&self.value), Arc::clone(&other.value));
        let (g1, g2) = (Arc::clone(&self.gradient), Arc::clone(&other.gradient));
        Ok(TestFunction {
            kind,
            dim: self.dim,
            value: Arc::new(move |x| v1(x) + v2(x)),
            gradient: Arc::new(move |x| g1(x) + g2(x)),
        })
    }

    /// Largest relative deviation between the gradient and centered finite
    /// differences (step `1e-5`) at `points` random points of `[-1, 1]^d`.
    pub fn gradient_error<R: Rng + ?Sized>(&self, rng: &mut R, points: usize) -> f64 {
        const STEP: f64 = 1e-5;
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0));
            let g = self.gradient(&x);
            let mut fd = DVector::zeros(self.dim);
            for k in 0..self.dim {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[k] += STEP;
                minus[k] -= STEP;
                fd[k] = (self.value(&plus) - self.value(&minus)) / (2.0 * STEP);
            }
            worst = worst.max((&g - &fd).norm() / g.norm().max(1.0));
        }
        worst
    }

    /// Whether the gradient passes the finite-difference check (20 points, `1e-6`).
    pub fn check_gradient<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.gradient_error(rng, 20) <= 1e-6
    }
}

fn monomial(x: &DVector<f64>, exponents: &[u32], lowered: Option<usize>) -> f64 {
    exponents
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let e = if lowered == Some(j) { e - 1 } else { e };
            x[j].powi(e as i32)
        })
        .product()
}

fn check_dims(g: &GibbsData, f: &TestFunction, h: &TestFunction) -> Result<()> {
    let d = g.system().dim();
    for t in [f, h] {
        if t.dim() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: t.dim(),
            });
        }
    }
    Ok(())
}

/// `sum_{|w| = depth} (grad f(x_w), tau([w]) grad h(x_w))`.
pub fn energy(
    g: &GibbsData,
    f: &TestFunction,
    h: &TestFunction,
    depth: usize,
    cap: usize,
) -> Result<f64> {
    check_dims(g, f, h)?;
    let p = g.system().base_point();
    let tau = g.tau_mass().as_matrix();
    let scale = g.beta().powi(-(depth as i32));
    let terms = g.system().cells_map(depth, cap, |_, map| {
        let x = map.apply(&p);
        let l = map.linear();
        // (a, L tau L^t b) = (L^t a, tau L^t b)
        let a = l.transpose() * f.gradient(&x);
        let b = l.transpose() * h.gradient(&x);
        scale * a.dot(&(tau * b))
    })?;
    Ok(terms.iter().sum())
}

/// `(a, tau(Sigma) b)`: the energy of `x -> (a, x)` against `x -> (b, x)`.
pub fn linear_energy(g: &GibbsData, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(g.tau_mass().as_matrix() * b))
}

/// `|sum_i E_L(f o psi_i, h o psi_i) - beta E_{L+1}(f, h)|`, relative to
/// `max(1, |beta E_{L+1}(f, h)|)`.
pub fn self_similarity_residual(
    g: &GibbsData,
    f: &TestFunction,
    h: &TestFunction,
    depth: usize,
    cap: usize,
) -> Result<f64> {
    check_dims(g, f, h)?;
    let mut lhs = 0.0;
    for map in g.system().maps() {
        lhs += energy(g, &f.compose(map)?, &h.compose(map)?, depth, cap)?;
    }
    let rhs = g.beta() * energy(g, f, h, depth + 1, cap)?;
    Ok((lhs - rhs).abs() / rhs.abs().max(1.0))
}

/// `|E_{L+1}(f, h) - E_L(f, h)|`, the depth-refinement diagnostic.
pub fn refinement_difference(
    g: &GibbsData,
    f: &TestFunction,
    h: &TestFunction,
    depth: usize,
    cap: usize,
) -> Result<f64> {
    Ok((energy(g, f, h, depth + 1, cap)? - energy(g, f, h, depth, cap)?).abs())
}
