//! Matrix-valued transfer operators on self-affine fractals.
//!
//! For an affine iterated function system `psi_1, ..., psi_n` on `R^d` the
//! matrix Ruelle operator `A -> sum_i L_i^t A L_i` acts on the cone of
//! positive semidefinite symmetric matrices. Its Perron eigenpair `(beta, Q)`
//! and the dual fixed point `tau(Sigma)` determine a matrix-valued Gibbs
//! measure with closed-form cylinder values
//! `tau([w]) = beta^{-|w|} L_w tau(Sigma) L_w^t`, the Kusuoka measure
//! `kappa = (Q, tau)_HS`, and a self-similar energy form.
//!
//! Modules:
//!
//! * [`matcone`]: symmetric matrices, norms, the PSD cone and its projective metric
//! * [`ifs`]: affine systems, words, cells, presets, the non-degeneracy estimate
//! * [`ruelle`]: the operator, its Perron eigenpair and contraction diagnostics
//! * [`gibbs`]: Gibbs and Kusuoka measures on cylinders
//! * [`energy`]: the self-similar energy form
//! * [`fit`]: geometric decay fits used by the convergence diagnostics
//! * [`sample`]: seeded random matrices for property suites

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod fit;
pub mod gibbs;
pub mod ifs;
pub mod matcone;
pub mod ruelle;
pub mod sample;

pub use error::{Error, Result};
pub use gibbs::{GibbsData, MeasureTable};

pub use ifs::{AffineMap, IfsSystem, Word};
pub use matcone::SymMatrix;
pub use ruelle::{CylinderField, EigenPair};

/// Default cap on the number of enumerated cells, `n^L`.
pub const DEFAULT_CELL_CAP: usize = 1_000_000;
