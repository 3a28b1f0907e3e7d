//! The matrix Ruelle operator and its Perron eigenpair.
//!
//! For an affine system with linear parts `L_i` the operator acts on
//! constant matrix fields by `A -> sum_i L_i^t A L_i`, and on fields over the
//! cylinders of depth `L` by
//!
//! ```text
//! (LA)(w) = sum_i L_i^t A(trunc(i w)) L_i
//! ```
//!
//! where `trunc` keeps the first `L` letters. Both preserve the PSD cone and,
//! under the non-degeneracy condition, map it into the interior, which makes
//! them strict contractions of the projective metric. The Perron eigenpair is
//! computed by projective power iteration from the identity, with the
//! projective metric as stopping rule.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{IfsSystem, Word};
use crate::matcone::{cone_alpha, cone_theta, hs_inner, hs_norm, SymMatrix};
use crate::sample;

/// `sum_i L_i^t A L_i`.
pub fn congruence_sum(linears: &[DMatrix<f64>], a: &SymMatrix) -> Result<SymMatrix> {
    let mut out = SymMatrix::zeros(a.dim());
    for l in linears {
        if l.nrows() != a.dim() {
            return Err(Error::DimensionMismatch {
                left: l.nrows(),
                right: a.dim(),
            });
        }
        out = &out + &a.congruence(l);
    }
    Ok(out)
}

/// `sum_i L_i X L_i^t`, the Hilbert-Schmidt adjoint of [`congruence_sum`].
pub fn adjoint_sum(linears: &[DMatrix<f64>], x: &SymMatrix) -> Result<SymMatrix> {
    let mut out = SymMatrix::zeros(x.dim());
    for l in linears {
        if l.nrows() != x.dim() {
            return Err(Error::DimensionMismatch {
                left: l.nrows(),
                right: x.dim(),
            });
        }
        out = &out + &x.co_congruence(l);
    }
    Ok(out)
}

/// The operator on constant fields.
pub fn apply_const(sys: &IfsSystem, a: &SymMatrix) -> Result<SymMatrix> {
    congruence_sum(sys.linears(), a)
}

/// Perron data of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub beta: f64,
    /// Positive definite, `hs(q) == 1`.
    pub q: SymMatrix,
    /// `hs(Lq - beta q) / hs(q)`.
    pub residual: f64,
    pub iterations: usize,
}

pub fn leading_eigenpair(sys: &IfsSystem, tol: f64, max_iter: usize) -> Result<EigenPair> {
    leading_eigenpair_from(
        sys.linears(),
        &SymMatrix::identity(sys.dim()),
        tol,
        max_iter,
    )
}

/// Projective power iteration `B <- L(B) / hs(L(B))` from `start` until
/// consecutive iterates are within `tol` in the projective metric.
pub fn leading_eigenpair_from(
    linears: &[DMatrix<f64>],
    start: &SymMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let start_norm = hs_norm(start);
    if start_norm == 0.0 {
        return Err(Error::InvalidArgument("start matrix is zero".into()));
    }
    let mut current = start.scaled(1.0 / start_norm);
    let mut current_pd = current.eigen().min() > 0.0;
    let mut last_theta = f64::INFINITY;

    for iteration in 1..=max_iter {
        let image = congruence_sum(linears, &current)?;
        let norm = hs_norm(&image);
        if norm == 0.0 || image.eigen().min() <= 0.0 {
            return Err(Error::LeftCone { iteration });
        }
        let next = image.scaled(1.0 / norm);
        if current_pd {
            last_theta = cone_theta(&current, &next)?;
        }
        current = next;
        current_pd = true;
        if last_theta < tol {
            return Ok(finish(linears, current, iteration));
        }
    }
    let pair = finish(linears, current, max_iter);
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: pair.residual,
    })
}

fn finish(linears: &[DMatrix<f64>], q: SymMatrix, iterations: usize) -> EigenPair {
    let q = q.scaled(1.0 / hs_norm(&q));
    let image = congruence_sum(linears, &q).expect("dimensions checked during iteration");
    let beta =
        hs_inner(&image, &q).expect("same dimension") / hs_inner(&q, &q).expect("same dimension");
    let residual = hs_norm(&(&image - &q.scaled(beta))) / hs_norm(&q);
    EigenPair {
        beta,
        q,
        residual,
        iterations,
    }
}

/// Coordinates of a symmetric matrix in the orthonormal basis
/// `E_ii, (E_ij + E_ji)/sqrt 2` (`i < j`), ordered along the upper triangle.
pub fn vectorize(a: &SymMatrix) -> DVector<f64> {
    let d = a.dim();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let scale = if i == j {
                1.0
            } else {
                std::f64::consts::SQRT_2
            };
            out.push(a.get(i, j) * scale);
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &DVector<f64>, dim: usize) -> Result<SymMatrix> {
    if v.len() != dim * (dim + 1) / 2 {
        return Err(Error::DimensionMismatch {
            left: dim * (dim + 1) / 2,
            right: v.len(),
        });
    }
    let mut a = SymMatrix::zeros(dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let scale = if i == j {
                1.0
            } else {
                std::f64::consts::SQRT_2
            };
            a.set(i, j, v[k] / scale);
            k += 1;
        }
    }
    Ok(a)
}

/// Matrix of the operator in the basis of [`vectorize`]; `m x m` with `m = d(d+1)/2`.
pub fn operator_matrix(sys: &IfsSystem) -> DMatrix<f64> {
    operator_matrix_for(sys.linears(), sys.dim())
}

pub fn operator_matrix_for(linears: &[DMatrix<f64>], dim: usize) -> DMatrix<f64> {
    let m = dim * (dim + 1) / 2;
    let mut out = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut e = DVector::zeros(m);
        e[c] = 1.0;
        let basis = devectorize(&e, dim).expect("length m by construction");
        let image = congruence_sum(linears, &basis).expect("dimensions match");
        out.set_column(c, &vectorize(&image));
    }
    out
}

/// Dominant eigenpair of a dense (generally non-symmetric) matrix: the
/// eigenvalue of largest real part from the Schur form, and a null vector
/// of `M - lambda Id` from the SVD.
pub fn dense_dominant_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = m.nrows();
    let lambda = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::MIN, f64::max);
    let shifted = m - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^t");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(
            (0, f64::MAX),
            |best, (k, &s)| if s < best.1 { (k, s) } else { best },
        );
    let v = v_t.row(k).transpose();
    (lambda, v.into_owned())
}

/// Perron eigenpair through the dense operator matrix, normalized like
/// [`leading_eigenpair`] (`hs(q) == 1`, positive trace).
pub fn dense_eigenpair(sys: &IfsSystem) -> Result<(f64, SymMatrix)> {
    let (beta, v) = dense_dominant_eigenpair(&operator_matrix(sys));
    let mut q = devectorize(&v, sys.dim())?;
    if q.trace() < 0.0 {
        q = q.scaled(-1.0);
    }
    let n = hs_norm(&q);
    Ok((beta, q.scaled(1.0 / n)))
}

/// Projective distance from the normalized iterates `L^l B` to `q`, for `l = 1..=steps`.
pub fn convergence_profile(
    sys: &IfsSystem,
    start: &SymMatrix,
    q: &SymMatrix,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut current = start.clone();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let image = apply_const(sys, &current)?;
        current = image.scaled(1.0 / hs_norm(&image));
        out.push(cone_theta(&current, q)?);
    }
    Ok(out)
}

/// Empirical contraction constants of the operator on the PSD cone.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub trials: usize,
    /// Largest observed `theta(LA, LB)`: an estimate of the diameter of the image cone.
    pub diameter: f64,
    /// Largest observed `theta(LA, LB) / theta(A, B)`; `None` when every
    /// sampled pair was projectively equal (one-dimensional cone).
    pub max_ratio: Option<f64>,
    /// Smallest observed `lambda_min(LA) / hs(A)` over PSD `A`.
    pub lower_constant: f64,
}

impl ContractionReport {
    /// `1 - exp(-diameter)`.
    pub fn bound(&self) -> f64 {
        1.0 - (-self.diameter).exp()
    }

    /// Observed ratio within `1 - exp(-diameter) + 1e-9`.
    pub fn bound_holds(&self) -> bool {
        self.max_ratio.is_none_or(|r| r <= self.bound() + 1e-9)
    }
}

pub fn contraction_diagnostics<R: Rng + ?Sized>(
    sys: &IfsSystem,
    trials: usize,
    rng: &mut R,
) -> Result<ContractionReport> {
    contraction_diagnostics_for(sys.linears(), sys.dim(), trials, rng)
}

/// Same as [`contraction_diagnostics`] for a bare family of linear parts,
/// which may be degenerate (a single map, say).
pub fn contraction_diagnostics_for<R: Rng + ?Sized>(
    linears: &[DMatrix<f64>],
    dim: usize,
    trials: usize,
    rng: &mut R,
) -> Result<ContractionReport> {
    if trials < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 trials, got {trials}"
        )));
    }
    let mut diameter = 0.0f64;
    let mut max_ratio: Option<f64> = None;
    let mut lower_constant = f64::INFINITY;

    for t in 0..trials {
        // alternate between comfortably interior and near-boundary pairs
        let (a, b) = if t % 2 == 0 {
            (
                sample::near_boundary_pd(rng, dim),
                sample::near_boundary_pd(rng, dim),
            )
        } else {
            (
                sample::positive_definite(rng, dim),
                sample::positive_definite(rng, dim),
            )
        };
        let la = congruence_sum(linears, &a)?;
        let lb = congruence_sum(linears, &b)?;
        let image_theta = cone_theta(&la, &lb)?;
        diameter = diameter.max(image_theta);
        let theta = cone_theta(&a, &b)?;
        if theta > 1e-12 {
            let r = image_theta / theta;
            max_ratio = Some(max_ratio.map_or(r, |m| m.max(r)));
        }

        let p = sample::psd(rng, dim);
        let lp = congruence_sum(linears, &p)?;
        lower_constant = lower_constant.min(lp.eigen().min() / hs_norm(&p));
    }

    Ok(ContractionReport {
        trials,
        diameter,
        max_ratio,
        lower_constant,
    })
}

/// Matrix field over the cylinders of a fixed depth, stored in
/// lexicographic word order.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderField {
    alphabet: usize,
    depth: usize,
    dim: usize,
    values: Vec<SymMatrix>,
}

impl CylinderField {
    pub fn new(alphabet: usize, depth: usize, values: Vec<SymMatrix>) -> Result<Self> {
        let expected = alphabet.pow(depth as u32);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                left: expected,
                right: values.len(),
            });
        }
        let dim = values[0].dim();
        if let Some(bad) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        Ok(CylinderField {
            alphabet,
            depth,
            dim,
            values,
        })
    }

    pub fn constant(alphabet: usize, depth: usize, value: &SymMatrix) -> Self {
        CylinderField {
            alphabet,
            depth,
            dim: value.dim(),
            values: vec![value.clone(); alphabet.pow(depth as u32)],
        }
    }

    pub fn from_fn(alphabet: usize, depth: usize, f: impl Fn(&Word) -> SymMatrix) -> Result<Self> {
        let values = Word::all(alphabet, depth).iter().map(f).collect();
        Self::new(alphabet, depth, values)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[SymMatrix] {
        &self.values
    }

    fn index_of(&self, letters: &[usize]) -> usize {
        letters.iter().fold(0, |acc, &l| acc * self.alphabet + l)
    }

    /// Value on the cylinder of `w`; `w` must have the field's depth.
    pub fn get(&self, w: &Word) -> &SymMatrix {
        assert_eq!(w.depth(), self.depth, "word depth must match field depth");
        &self.values[self.index_of(w.letters())]
    }

    pub fn words(&self) -> Vec<Word> {
        Word::all(self.alphabet, self.depth)
    }

    /// `sup_w hs(A(w))`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(hs_norm).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        CylinderField {
            values: self.values.iter().map(|v| v.scaled(c)).collect(),
            ..self.clone()
        }
    }
}

/// The operator on cylinder fields of depth `L >= 1`. Derivatives are
/// evaluated at the cell anchors, which for affine maps is exact.
pub fn apply_field(sys: &IfsSystem, field: &CylinderField) -> Result<CylinderField> {
    if field.depth == 0 {
        return Err(Error::InvalidArgument("field depth must be >= 1".into()));
    }
    if field.alphabet != sys.len() || field.dim != sys.dim() {
        return Err(Error::InvalidArgument(format!(
            "field over {} letters in dimension {} does not fit a system of {} maps in dimension {}",
            field.alphabet,
            field.dim,
            sys.len(),
            sys.dim()
        )));
    }
    let words = field.words();
    let values = words
        .par_iter()
        .map(|w| {
            let head = w.truncated(field.depth - 1);
            let mut out = SymMatrix::zeros(field.dim);
            for (i, l) in sys.linears().iter().enumerate() {
                let source = field.get(&head.prefixed(i));
                out = &out + &source.congruence(l);
            }
            out
        })
        .collect();
    CylinderField::new(field.alphabet, field.depth, values)
}

/// Perron data of the operator on depth-`L` fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEigenPair {
    pub beta: f64,
    /// Normalized so that `sup_w hs(q(w)) == 1`.
    pub q: CylinderField,
    pub residual: f64,
    pub iterations: usize,
}

/// Projective power iteration on fields from the constant identity field;
/// stops when every cell moves less than `tol` in the projective metric.
pub fn leading_field_eigenpair(
    sys: &IfsSystem,
    depth: usize,
    tol: f64,
    max_iter: usize,
) -> Result<FieldEigenPair> {
    let mut current = CylinderField::constant(sys.len(), depth, &SymMatrix::identity(sys.dim()));
    for iteration in 1..=max_iter {
        let image = apply_field(sys, &current)?;
        let norm = image.sup_norm();
        let next = image.scaled(1.0 / norm);
        let mut worst = 0.0f64;
        for (a, b) in current.values.iter().zip(&next.values) {
            worst = worst.max(cone_theta(a, b).map_err(|_| Error::LeftCone { iteration })?);
        }
        current = next;
        if worst < tol {
            let image = apply_field(sys, &current)?;
            let num: f64 = image
                .values
                .iter()
                .zip(&current.values)
                .map(|(a, b)| hs_inner(a, b).expect("same dim"))
                .sum();
            let den: f64 = current
                .values
                .iter()
                .map(|b| hs_inner(b, b).expect("same dim"))
                .sum();
            let beta = num / den;
            let residual = image
                .values
                .iter()
                .zip(&current.values)
                .map(|(a, b)| hs_norm(&(a - &b.scaled(beta))))
                .fold(0.0, f64::max);
            return Ok(FieldEigenPair {
                beta,
                q: current,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Measured Hölder-cone constants of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeMembership {
    pub a_hat: f64,
    pub nu: f64,
}

/// Distance `gamma^k` between depth-`L` cylinders whose words first differ at index `k`.
pub fn coding_distance(u: &Word, w: &Word, gamma: f64) -> f64 {
    match u
        .letters()
        .iter()
        .zip(w.letters())
        .position(|(a, b)| a != b)
    {
        Some(k) => gamma.powi(k as i32),
        None => 0.0,
    }
}

/// Smallest `a` such that `A_w exp(-a d(w, w')^nu) <= A_{w'}` for every
/// ordered pair of distinct cells, with `d` the coding distance of ratio `gamma`.
pub fn cone_membership(field: &CylinderField, gamma: f64, nu: f64) -> Result<ConeMembership> {
    if !(nu > 0.0 && nu <= 1.0) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < nu <= 1 and 0 < gamma < 1, got nu = {nu}, gamma = {gamma}"
        )));
    }
    for v in &field.values {
        let m = v.eigen().min();
        if !(m > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: m });
        }
    }
    let words = field.words();
    let a_hat = words
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut worst = 0.0f64;
            for (j, w) in words.iter().enumerate() {
                if i == j {
                    continue;
                }
                let alpha = cone_alpha(&field.values[i], &field.values[j]).expect("PD checked");
                if alpha < 1.0 {
                    let d = coding_distance(u, w, gamma);
                    worst = worst.max(-alpha.ln() / d.powf(nu));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(ConeMembership { a_hat, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{build_system, preset_dyadic, preset_harmonic_gasket};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
        (a.as_matrix() - b.as_matrix()).abs().max()
    }

    #[test]
    fn gasket_maps_identity_to_three_fifths_identity() {
        let sys = preset_harmonic_gasket();
        let out = apply_const(&sys, &SymMatrix::identity(2)).unwrap();
        assert!(max_diff(&out, &SymMatrix::identity(2).scaled(0.6)) < 1e-15);
    }

    #[test]
    fn dyadic_scalar_case() {
        let sys = preset_dyadic();
        let out = apply_const(&sys, &SymMatrix::identity(1)).unwrap();
        assert_abs_diff_eq!(out.get(0, 0), 0.5, epsilon = 1e-16);
    }

    #[test]
    fn apply_const_is_linear() {
        let sys = preset_harmonic_gasket();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = sample::symmetric(&mut rng, 2);
            let b = sample::symmetric(&mut rng, 2);
            let lhs = apply_const(&sys, &(&a + &b)).unwrap();
            let rhs = &apply_const(&sys, &a).unwrap() + &apply_const(&sys, &b).unwrap();
            assert!(max_diff(&lhs, &rhs) < 1e-13);
        }
        assert!(apply_const(&sys, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn eigenpair_examples() {
        let pair = leading_eigenpair(&preset_harmonic_gasket(), 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(pair.beta, 0.6, epsilon = 1e-12);
        let expected = SymMatrix::identity(2).scaled(std::f64::consts::FRAC_1_SQRT_2);
        assert!(max_diff(&pair.q, &expected) < 1e-12);
        assert!(pair.residual <= 1e-12);

        let pair = leading_eigenpair(&preset_dyadic(), 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(pair.beta, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pair.q.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_multiples_of_identity() {
        // every symmetric matrix is an eigenvector; B0 = Id picks Id / sqrt d
        let c = 0.4;
        for (n, d) in [(2, 2), (3, 3), (4, 2)] {
            let sys = build_system(
                (0..n)
                    .map(|k| {
                        (
                            DMatrix::identity(d, d) * c,
                            DVector::from_element(d, k as f64),
                        )
                    })
                    .collect(),
            )
            .unwrap();
            let pair = leading_eigenpair(&sys, 1e-12, 100).unwrap();
            assert_abs_diff_eq!(pair.beta, n as f64 * c * c, epsilon = 1e-14);
            let expected = SymMatrix::identity(d).scaled(1.0 / (d as f64).sqrt());
            assert!(max_diff(&pair.q, &expected) < 1e-14);
        }
    }

    #[test]
    fn non_convergence_and_bad_tolerance_are_reported() {
        let sys = preset_harmonic_gasket();
        assert!(matches!(
            leading_eigenpair_from(
                sys.linears(),
                &sample::gram(&mut ChaCha8Rng::seed_from_u64(3), 2, 1),
                1e-12,
                3
            ),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
        assert!(leading_eigenpair(&sys, 0.0, 10).is_err());
    }

    #[test]
    fn degenerate_family_leaves_the_cone() {
        // a single rank-deficient direction: L^t A L is singular
        let l = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(
            leading_eigenpair_from(&[l], &SymMatrix::identity(2), 1e-12, 10),
            Err(Error::LeftCone { iteration: 1 })
        ));
    }

    #[test]
    fn restarts_agree() {
        let sys = preset_harmonic_gasket();
        let tol = 1e-12;
        let reference = leading_eigenpair(&sys, tol, 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let start = sample::positive_definite(&mut rng, 2);
            let pair = leading_eigenpair_from(sys.linears(), &start, tol, 10_000).unwrap();
            assert!(cone_theta(&pair.q, &reference.q).unwrap() < 10.0 * tol);
        }
    }

    #[test]
    fn vectorization_round_trip_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=4 {
            let a = sample::symmetric(&mut rng, d);
            let b = sample::symmetric(&mut rng, d);
            let v = vectorize(&a);
            assert!(max_diff(&devectorize(&v, d).unwrap(), &a) < 1e-15);
            assert_abs_diff_eq!(
                v.dot(&vectorize(&b)),
                hs_inner(&a, &b).unwrap(),
                epsilon = 1e-13
            );
        }
        assert!(devectorize(&DVector::zeros(4), 2).is_err());
    }

    #[test]
    fn operator_matrix_examples() {
        let m = operator_matrix(&preset_harmonic_gasket());
        assert_eq!(m.shape(), (3, 3));
        let (lambda, _) = dense_dominant_eigenpair(&m);
        assert_abs_diff_eq!(lambda, 0.6, epsilon = 1e-14);

        let m = operator_matrix(&preset_dyadic());
        assert_eq!(m.shape(), (1, 1));
        assert_abs_diff_eq!(m[(0, 0)], 0.5, epsilon = 1e-16);
    }

    #[test]
    fn operator_matrix_matches_apply_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..50 {
            let d = 1 + k % 3;
            let sys = sample::system(&mut rng, d, d + 1, false);
            let m = operator_matrix(&sys);
            let id = SymMatrix::identity(d);
            let lhs = &m * vectorize(&id);
            let rhs = vectorize(&apply_const(&sys, &id).unwrap());
            assert!((lhs - rhs).abs().max() < 1e-14);
        }
    }

    #[test]
    fn power_iteration_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 0..30 {
            let d = 1 + k % 3;
            let sys = sample::system(&mut rng, d, d + 2, true);
            let pair = leading_eigenpair(&sys, 1e-13, 100_000).unwrap();
            let (beta, q) = dense_eigenpair(&sys).unwrap();
            assert!(
                (pair.beta - beta).abs() <= 1e-10 * beta,
                "{} vs {beta}",
                pair.beta
            );
            assert!(cone_theta(&pair.q, &q).unwrap() < 1e-8);
        }
    }

    #[test]
    fn diagnostics_on_gasket() {
        let sys = preset_harmonic_gasket();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let report = contraction_diagnostics(&sys, 500, &mut rng).unwrap();
        assert!(report.diameter > 0.0);
        assert!(report.bound_holds(), "{report:?}");
        assert!(report.lower_constant > 0.0);
        assert!(contraction_diagnostics(&sys, 1, &mut rng).is_err());
    }

    #[test]
    fn diagnostics_single_scaled_identity_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = [DMatrix::identity(2, 2) * 0.5];
        let report = contraction_diagnostics_for(&l, 2, 200, &mut rng).unwrap();
        let ratio = report.max_ratio.unwrap();
        // conjugation by a multiple of the identity preserves theta exactly
        assert_abs_diff_eq!(ratio, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn diagnostics_dyadic_single_ray() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report = contraction_diagnostics(&preset_dyadic(), 50, &mut rng).unwrap();
        assert!(report.diameter < 1e-14);
        assert_eq!(report.max_ratio, None);
        assert!(report.bound_holds());
    }

    #[test]
    fn field_constant_reduces_to_const() {
        let sys = preset_harmonic_gasket();
        let field = CylinderField::constant(3, 3, &SymMatrix::identity(2));
        let out = apply_field(&sys, &field).unwrap();
        for v in out.values() {
            assert!(max_diff(v, &SymMatrix::identity(2).scaled(0.6)) < 1e-15);
        }
    }

    #[test]
    fn field_hand_evaluation_dyadic() {
        let sys = preset_dyadic();
        let field =
            CylinderField::new(2, 1, vec![SymMatrix::diag(&[2.0]), SymMatrix::diag(&[4.0])])
                .unwrap();
        let out = apply_field(&sys, &field).unwrap();
        for v in out.values() {
            assert_abs_diff_eq!(v.get(0, 0), 1.5, epsilon = 1e-15);
        }
        assert!(apply_field(
            &sys,
            &CylinderField::constant(2, 0, &SymMatrix::identity(1))
        )
        .is_err());
    }

    #[test]
    fn field_commutes_with_gasket_reflection() {
        // swapping letters 2 and 3 and conjugating by diag(1, -1) is a symmetry
        let sys = preset_harmonic_gasket();
        let reflect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let swap = |w: &Word| {
            Word::from_zero_based(
                w.letters()
                    .iter()
                    .map(|&l| match l {
                        1 => 2,
                        2 => 1,
                        other => other,
                    })
                    .collect(),
            )
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base: Vec<SymMatrix> = (0..27)
            .map(|_| sample::positive_definite(&mut rng, 2))
            .collect();
        let field = CylinderField::new(3, 3, base).unwrap();
        let mirrored =
            CylinderField::from_fn(3, 3, |w| field.get(&swap(w)).congruence(&reflect)).unwrap();

        let image = apply_field(&sys, &field).unwrap();
        let image_of_mirror = apply_field(&sys, &mirrored).unwrap();
        for w in field.words() {
            let expected = image.get(&swap(&w)).congruence(&reflect);
            assert!(max_diff(image_of_mirror.get(&w), &expected) < 1e-14);
        }
    }

    #[test]
    fn field_eigenpair_is_constant_for_affine_systems() {
        let sys = preset_harmonic_gasket();
        let pair = leading_field_eigenpair(&sys, 2, 1e-12, 10_000).unwrap();
        assert_abs_diff_eq!(pair.beta, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.q.sup_norm(), 1.0, epsilon = 1e-15);
        let expected = SymMatrix::identity(2).scaled(std::f64::consts::FRAC_1_SQRT_2);
        for v in pair.q.values() {
            assert!(max_diff(v, &expected) < 1e-11);
        }
    }

    #[test]
    fn cone_membership_examples() {
        let constant = CylinderField::constant(3, 2, &SymMatrix::identity(2));
        assert_eq!(cone_membership(&constant, 0.6, 1.0).unwrap().a_hat, 0.0);

        let e = std::f64::consts::E;
        let field = CylinderField::new(
            2,
            1,
            vec![SymMatrix::identity(2), SymMatrix::identity(2).scaled(e)],
        )
        .unwrap();
        let m = cone_membership(&field, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(m.a_hat, 1.0, epsilon = 1e-14);
        // definition-level check: the condition holds at a_hat and fails just below
        let d = coding_distance(
            &Word::from_zero_based(vec![0]),
            &Word::from_zero_based(vec![1]),
            0.5,
        );
        assert_eq!(d, 1.0);
        let ok = |a: f64| {
            cone_alpha(&field.values()[1], &field.values()[0]).unwrap() >= (-a * d).exp() - 1e-15
        };
        assert!(ok(m.a_hat));
        assert!(!ok(m.a_hat - 1e-6));

        let singular = CylinderField::new(
            2,
            1,
            vec![SymMatrix::identity(2), SymMatrix::diag(&[1.0, 0.0])],
        )
        .unwrap();
        assert!(cone_membership(&singular, 0.5, 1.0).is_err());
    }

    #[test]
    fn operator_decreases_cone_amplitude() {
        let sys = preset_harmonic_gasket();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let values = (0..81)
                .map(|_| sample::positive_definite(&mut rng, 2))
                .collect();
            let field = CylinderField::new(3, 4, values).unwrap();
            let before = cone_membership(&field, sys.gamma(), 1.0).unwrap().a_hat;
            let after = cone_membership(&apply_field(&sys, &field).unwrap(), sys.gamma(), 1.0)
                .unwrap()
                .a_hat;
            assert!(after <= before, "{after} > {before}");
        }
    }
}
