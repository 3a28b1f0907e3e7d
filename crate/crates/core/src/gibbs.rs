//! Matrix-valued Gibbs measure and the Kusuoka measure on cylinders.
//!
//! For affine systems the Gibbs measure `tau` is determined by its total
//! mass `tau(Sigma)`, the dominant fixed point of the dual operator
//! `X -> sum_i L_i X L_i^t`, through the closed form
//!
//! ```text
//! tau([w]) = beta^{-|w|} L_w tau(Sigma) L_w^t
//! ```
//!
//! and the Kusuoka measure is the scalar measure `kappa([w]) = (Q, tau([w]))_HS`.
//! Normalization: `hs(Q) == 1` first, then `(Q, tau(Sigma))_HS == 1`, so that
//! `kappa` is a probability measure.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ifs::{check_cap, IfsSystem, Word};
use crate::matcone::{cone_theta, hs_inner, hs_norm, is_psd, SymMatrix};
use crate::ruelle::{adjoint_sum, leading_eigenpair, EigenPair};

/// Entrywise tolerance of the consistency checks.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Result of the dual power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMass {
    /// `tau(Sigma)`, normalized by `(q, tau) == 1`.
    pub tau: SymMatrix,
    /// Rayleigh quotient of the dual operator at `tau`.
    pub adjoint_beta: f64,
    /// `hs(sum_i L_i tau L_i^t - beta tau) / hs(tau)`.
    pub residual: f64,
    pub iterations: usize,
}

/// Dominant fixed point of `X -> sum_i L_i X L_i^t`, by projective power
/// iteration from the identity.
pub fn stationary_mass(
    sys: &IfsSystem,
    pair: &EigenPair,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryMass> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be > 0, got {tol}"
        )));
    }
    let linears = sys.linears();
    let mut current = SymMatrix::identity(sys.dim()).scaled(1.0 / (sys.dim() as f64).sqrt());
    for iteration in 1..=max_iter {
        let image = adjoint_sum(linears, &current)?;
        let norm = hs_norm(&image);
        if norm == 0.0 {
            return Err(Error::ZeroMass);
        }
        let next = image.scaled(1.0 / norm);
        let theta = cone_theta(&current, &next).map_err(|_| Error::LeftCone { iteration })?;
        current = next;
        if theta < tol {
            let mass = hs_inner(&pair.q, &current)?;
            if !(mass > 0.0) {
                return Err(Error::ZeroMass);
            }
            let tau = current.scaled(1.0 / mass);
            let image = adjoint_sum(linears, &tau)?;
            let adjoint_beta = hs_inner(&image, &tau)? / hs_inner(&tau, &tau)?;
            let residual = hs_norm(&(&image - &tau.scaled(adjoint_beta))) / hs_norm(&tau);
            if (adjoint_beta - pair.beta).abs() > tol * pair.beta.max(1.0) {
                return Err(Error::SpectrumMismatch {
                    primal: pair.beta,
                    adjoint: adjoint_beta,
                });
            }
            return Ok(StationaryMass {
                tau,
                adjoint_beta,
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

/// Perron data plus the total mass of the Gibbs measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsData {
    pair: EigenPair,
    tau_mass: SymMatrix,
    system: IfsSystem,
}

impl GibbsData {
    pub fn new(system: &IfsSystem, tol: f64, max_iter: usize) -> Result<Self> {
        let pair = leading_eigenpair(system, tol, max_iter)?;
        let mass = stationary_mass(system, &pair, tol, max_iter)?;
        Ok(GibbsData {
            pair,
            tau_mass: mass.tau,
            system: system.clone(),
        })
    }

    /// Replaces the total mass without re-checking any invariant; used to
    /// probe the sensitivity of the consistency checks.
    pub fn with_tau_mass(mut self, tau_mass: SymMatrix) -> Self {
        self.tau_mass = tau_mass;
        self
    }

    pub fn pair(&self) -> &EigenPair {
        &self.pair
    }

    pub fn beta(&self) -> f64 {
        self.pair.beta
    }

    pub fn q(&self) -> &SymMatrix {
        &self.pair.q
    }

    pub fn tau_mass(&self) -> &SymMatrix {
        &self.tau_mass
    }

    pub fn system(&self) -> &IfsSystem {
        &self.system
    }

    /// `hs(sum_i L_i tau L_i^t - beta tau)`.
    pub fn adjoint_residual(&self) -> f64 {
        let image = adjoint_sum(self.system.linears(), &self.tau_mass).expect("same dimension");
        hs_norm(&(&image - &self.tau_mass.scaled(self.beta())))
    }

    /// `sqrt(d) / lambda_min(q)`: the constant in `hs(tau(B)) <= D3 kappa(B)`.
    pub fn tv_constant(&self) -> f64 {
        (self.system.dim() as f64).sqrt() / self.pair.q.eigen().min()
    }

    /// `tau([w]) = beta^{-|w|} L_w tau(Sigma) L_w^t`.
    pub fn cylinder_tau(&self, w: &Word) -> Result<SymMatrix> {
        self.system.check_word(w)?;
        let l = self.system.word_linear(w);
        Ok(self
            .tau_mass
            .co_congruence(&l)
            .scaled(self.beta().powi(-(w.depth() as i32))))
    }

    /// `kappa([w]) = (q, tau([w]))_HS`.
    pub fn kappa(&self, w: &Word) -> Result<f64> {
        hs_inner(&self.pair.q, &self.cylinder_tau(w)?)
    }

    /// All cylinder values of depth `depth` in lexicographic order.
    pub fn cylinder_taus(&self, depth: usize, cap: usize) -> Result<Vec<SymMatrix>> {
        let scale = self.beta().powi(-(depth as i32));
        self.system.cells_map(depth, cap, |_, map| {
            self.tau_mass.co_congruence(map.linear()).scaled(scale)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub word: Word,
    pub tau: SymMatrix,
    pub kappa: f64,
}

/// Every cylinder of one depth with its `tau` and `kappa` values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTable {
    pub depth: usize,
    pub dim: usize,
    pub rows: Vec<MeasureRow>,
}

impl MeasureTable {
    pub fn kappa_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.kappa).sum()
    }

    pub fn max_kappa(&self) -> f64 {
        self.rows.iter().map(|r| r.kappa).fold(0.0, f64::max)
    }
}

pub fn measure_table(g: &GibbsData, depth: usize, cap: usize) -> Result<MeasureTable> {
    let taus = g.cylinder_taus(depth, cap)?;
    let words = Word::all(g.system.len(), depth);
    let rows = words
        .into_iter()
        .zip(taus)
        .map(|(word, tau)| {
            let kappa = hs_inner(&g.pair.q, &tau).expect("same dimension");
            MeasureRow { word, tau, kappa }
        })
        .collect();
    Ok(MeasureTable {
        depth,
        dim: g.system.dim(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// `sum_j tau([w j]) == tau([w])`.
    Additivity,
    /// `sum_i kappa([i w]) == kappa([w])`.
    ShiftInvariance,
    /// `tau([i w]) == beta^{-1} L_i tau([w]) L_i^t`.
    Recursion,
    /// `hs(tau([w])) <= D3 kappa([w])`.
    TotalVariation,
    /// `kappa([w]) == 0` exactly when `tau([w]) == 0`.
    AbsoluteContinuity,
    /// `(q, tau(Sigma))_HS == 1`.
    Normalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: CheckKind,
    pub word: Word,
    pub value: f64,
}

/// Outcome of [`consistency_checks`]; maxima are over all words checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub depth: usize,
    pub tolerance: f64,
    pub max_additivity_error: f64,
    pub max_shift_error: f64,
    pub max_recursion_error: f64,
    pub normalization_error: f64,
    /// Largest `hs(tau_w) / (D3 kappa_w)`; at most 1 when the bound holds.
    pub max_tv_ratio: f64,
    pub tv_constant: f64,
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn passed_kind(&self, kind: CheckKind) -> bool {
        !self.violations.iter().any(|v| v.kind == kind)
    }
}

fn max_entry_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
    (a.as_matrix() - b.as_matrix()).abs().max()
}

/// Checks the normalization of `tau(Sigma)`, additivity, shift-invariance
/// and the prefix recursion for every word of length `< depth`, and the
/// total-variation bound and absolute continuity on every cylinder of
/// length `<= depth`.
pub fn consistency_checks(g: &GibbsData, depth: usize, cap: usize) -> Result<ConsistencyReport> {
    if depth == 0 {
        return Err(Error::InvalidArgument(
            "consistency checks need depth >= 1".into(),
        ));
    }
    let n = g.system.len();
    check_cap("consistency checks", n, depth, cap)?;
    let levels: Vec<Vec<SymMatrix>> = (0..=depth)
        .map(|k| g.cylinder_taus(k, cap))
        .collect::<Result<_>>()?;
    let kappas: Vec<Vec<f64>> = levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|t| hs_inner(&g.pair.q, t).expect("same dimension"))
                .collect()
        })
        .collect();

    let tol = CONSISTENCY_TOL;
    let d3 = g.tv_constant();
    let inv_beta = 1.0 / g.beta();
    let mut report = ConsistencyReport {
        depth,
        tolerance: tol,
        max_additivity_error: 0.0,
        max_shift_error: 0.0,
        max_recursion_error: 0.0,
        normalization_error: (kappas[0][0] - 1.0).abs(),
        max_tv_ratio: 0.0,
        tv_constant: d3,
        violations: Vec::new(),
    };
    if report.normalization_error > tol {
        report.violations.push(Violation {
            kind: CheckKind::Normalization,
            word: Word::empty(),
            value: report.normalization_error,
        });
    }

    for k in 0..depth {
        let words = Word::all(n, k);
        let stride = n.pow(k as u32);
        for (idx, w) in words.iter().enumerate() {
            let mut children = SymMatrix::zeros(g.system.dim());
            for j in 0..n {
                children = &children + &levels[k + 1][idx * n + j];
            }
            let err = max_entry_diff(&children, &levels[k][idx]);
            report.max_additivity_error = report.max_additivity_error.max(err);
            if err > tol {
                report.violations.push(Violation {
                    kind: CheckKind::Additivity,
                    word: w.clone(),
                    value: err,
                });
            }

            let shifted: f64 = (0..n).map(|i| kappas[k + 1][i * stride + idx]).sum();
            let err = (shifted - kappas[k][idx]).abs();
            report.max_shift_error = report.max_shift_error.max(err);
            if err > tol {
                report.violations.push(Violation {
                    kind: CheckKind::ShiftInvariance,
                    word: w.clone(),
                    value: err,
                });
            }

            for (i, l) in g.system.linears().iter().enumerate() {
                let recursed = levels[k][idx].co_congruence(l).scaled(inv_beta);
                let err = max_entry_diff(&recursed, &levels[k + 1][i * stride + idx]);
                report.max_recursion_error = report.max_recursion_error.max(err);
                if err > tol {
                    report.violations.push(Violation {
                        kind: CheckKind::Recursion,
                        word: w.prefixed(i),
                        value: err,
                    });
                }
            }
        }
    }

    for k in 0..=depth {
        for (idx, w) in Word::all(n, k).into_iter().enumerate() {
            let hs = hs_norm(&levels[k][idx]);
            let kappa = kappas[k][idx];
            if (kappa == 0.0) != (hs == 0.0) {
                report.violations.push(Violation {
                    kind: CheckKind::AbsoluteContinuity,
                    word: w.clone(),
                    value: kappa,
                });
            }
            if hs > 0.0 {
                let ratio = hs / (d3 * kappa);
                report.max_tv_ratio = report.max_tv_ratio.max(ratio);
                if !(ratio <= 1.0 + tol) {
                    report.violations.push(Violation {
                        kind: CheckKind::TotalVariation,
                        word: w,
                        value: ratio,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// `sum_{|w| = l} (A, tau([w u]))_HS`, the correlation of the indicator of
/// `[u]` with `A` after `l` shifts.
pub fn correlation(g: &GibbsData, u: &Word, a: &SymMatrix, l: usize, cap: usize) -> Result<f64> {
    check_cap("correlation", g.system.len(), l + u.depth(), cap)?;
    let tau_u = g.cylinder_tau(u)?;
    let scale = g.beta().powi(-(l as i32));
    let terms = g.system.cells_map(l, cap, |_, map| {
        hs_inner(a, &tau_u.co_congruence(map.linear())).expect("same dimension") * scale
    })?;
    Ok(terms.iter().sum())
}

/// `kappa([u]) (A, tau(Sigma))_HS`, the limit of [`correlation`] as `l` grows.
pub fn correlation_limit(g: &GibbsData, u: &Word, a: &SymMatrix) -> Result<f64> {
    Ok(g.kappa(u)? * hs_inner(a, &g.tau_mass)?)
}

/// `|correlation(l) - limit|` for `l` in `ls`.
pub fn mixing_errors(
    g: &GibbsData,
    u: &Word,
    a: &SymMatrix,
    ls: impl IntoIterator<Item = usize>,
    cap: usize,
) -> Result<Vec<f64>> {
    let limit = correlation_limit(g, u, a)?;
    ls.into_iter()
        .map(|l| Ok((correlation(g, u, a, l, cap)? - limit).abs()))
        .collect()
}

/// Dominant direction of a normalized cylinder matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    /// Unit vector, first non-negligible component positive.
    pub vector: DVector<f64>,
    /// Second-largest over largest eigenvalue; 0 means exactly rank one.
    pub residual: f64,
}

pub fn direction_field(g: &GibbsData, w: &Word) -> Result<Direction> {
    if w.is_empty() {
        return Err(Error::InvalidArgument(
            "direction field needs depth >= 1".into(),
        ));
    }
    let tau = g.cylinder_tau(w)?;
    let norm = hs_norm(&tau);
    if norm == 0.0 {
        return Err(Error::ZeroMass);
    }
    let e = tau.scaled(1.0 / norm).eigen();
    let d = e.values.len();
    let top = e.values[d - 1];
    let residual = if d == 1 { 0.0 } else { e.values[d - 2] / top };
    let mut vector: DVector<f64> = e.vectors.column(d - 1).into_owned();
    let pivot = vector
        .iter()
        .copied()
        .find(|x| x.abs() > 1e-14)
        .unwrap_or(1.0);
    if pivot < 0.0 {
        vector = -vector;
    }
    Ok(Direction { vector, residual })
}

/// Whether every cylinder value in `table` is PSD under the relative tolerance `tol`.
pub fn all_psd(table: &MeasureTable, tol: f64) -> bool {
    table
        .rows
        .iter()
        .all(|r| is_psd(&r.tau, tol) && r.kappa >= -tol)
}
