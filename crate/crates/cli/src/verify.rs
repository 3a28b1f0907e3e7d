//! The `verify` suite: every acceptance check that applies to the given
//! system, reported as `CHECK name PASS|FAIL value tolerance` lines.

use std::fmt;

use anyhow::Result;
use matgibbs::energy::{energy, linear_energy, self_similarity_residual, TestFunction};
use matgibbs::fit::{envelope_ratio, geometric_fit_sequence, Decay};
use matgibbs::gibbs::{
    consistency_checks, correlation_limit, direction_field, measure_table, mixing_errors, CheckKind,
};
use matgibbs::matcone::{cone_alpha, cone_theta, hs_norm, is_psd, norms, whitened_extremes};
use matgibbs::ruelle::{
    contraction_diagnostics, convergence_profile, dense_eigenpair, leading_eigenpair_from,
};
use matgibbs::{sample, GibbsData, SymMatrix, Word, DEFAULT_CELL_CAP};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Preset, SystemSource};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} {:.6e} {:.1e}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.value,
            self.tolerance
        )
    }
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value <= tolerance, value, tolerance);
    }

    fn push(&mut self, name: &str, pass: bool, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            value,
            tolerance,
        });
    }
}

pub struct VerifyOptions {
    pub depth: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// Largest `l <= limit` with `n^(l + extra) <= cap`.
fn affordable_depth(n: usize, limit: usize, extra: usize) -> usize {
    (0..=limit)
        .take_while(|&l| (n as f64).powi((l + extra) as i32) <= DEFAULT_CELL_CAP as f64)
        .last()
        .unwrap_or(0)
}

pub fn run(source: &SystemSource, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let sys = &source.system;
    let (d, n) = (sys.dim(), sys.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut s = Suite::default();

    let g = GibbsData::new(sys, opts.tol, opts.max_iter)?;
    let beta = g.beta();

    // Perron eigenpair
    let (dense_beta, dense_q) = dense_eigenpair(sys)?;
    s.at_most("eigen.dense_beta", (beta - dense_beta).abs() / beta, 1e-10);
    s.at_most(
        "eigen.dense_q",
        cone_theta(g.q(), &dense_q).unwrap_or(f64::INFINITY),
        1e-8,
    );
    s.at_most("eigen.residual", g.pair().residual, 1e-10);
    let mut restart = 0.0f64;
    for _ in 0..20 {
        let start = sample::positive_definite(&mut rng, d);
        let p = leading_eigenpair_from(sys.linears(), &start, opts.tol, opts.max_iter)?;
        restart = restart.max(cone_theta(&p.q, g.q())?);
    }
    s.at_most("eigen.restarts", restart, 1e-8);

    // Gibbs measure
    s.at_most(
        "gibbs.adjoint_residual",
        g.adjoint_residual() / hs_norm(g.tau_mass()),
        1e-12,
    );

    let depth = opts.depth.max(1);
    let mut sum_err = 0.0f64;
    let mut psd = true;
    for l in 0..=depth {
        let t = measure_table(&g, l, DEFAULT_CELL_CAP)?;
        sum_err = sum_err.max((t.kappa_sum() - 1.0).abs());
        psd &= t
            .rows
            .iter()
            .all(|r| is_psd(&r.tau, 1e-12) && r.kappa >= 0.0);
    }
    s.at_most("measure.kappa_sum", sum_err, 1e-12);
    s.push("measure.psd", psd, if psd { 0.0 } else { 1.0 }, 0.0);

    let report = consistency_checks(&g, depth, DEFAULT_CELL_CAP)?;
    s.at_most(
        "gibbs.additivity",
        report.max_additivity_error,
        report.tolerance,
    );
    s.at_most(
        "gibbs.recursion",
        report.max_recursion_error,
        report.tolerance,
    );
    s.at_most(
        "gibbs.normalization",
        report.normalization_error,
        report.tolerance,
    );
    s.at_most(
        "gibbs.shift_invariance",
        report.max_shift_error,
        report.tolerance,
    );
    s.at_most(
        "gibbs.total_variation",
        report.max_tv_ratio,
        1.0 + report.tolerance,
    );
    let continuity = report.passed_kind(CheckKind::AbsoluteContinuity);
    s.push(
        "gibbs.absolute_continuity",
        continuity,
        if continuity { 0.0 } else { 1.0 },
        0.0,
    );

    let mut bad = g.tau_mass().clone();
    bad.set(0, 0, bad.get(0, 0) * 1.01 + 0.01);
    let faulty = consistency_checks(&g.clone().with_tau_mass(bad), 1, DEFAULT_CELL_CAP)?;
    s.push(
        "gibbs.fault_injection_detected",
        !faulty.passed(),
        faulty.max_additivity_error.max(faulty.normalization_error),
        report.tolerance,
    );

    // Cone contraction
    let diag = contraction_diagnostics(sys, 200, &mut rng)?;
    let bound = diag.bound() + 1e-9;
    let mut worst_ratio = 0.0f64;
    let mut converging = true;
    for _ in 0..20 {
        let b = sample::psd(&mut rng, d);
        let profile = convergence_profile(sys, &b, g.q(), 30)?;
        let decay = Decay::classify(&profile, 1, 1e-13);
        converging &= decay.is_decaying();
        worst_ratio = worst_ratio.max(decay.ratio().unwrap_or(0.0));
    }
    s.push(
        "ruelle.convergence_ratio",
        converging && worst_ratio <= bound,
        worst_ratio,
        bound,
    );

    // Mixing; the envelope tolerates a complex subdominant spectrum
    let l_max = affordable_depth(n, 8, 1).max(2);
    let random = sample::gram(&mut rng, d, d);
    let mut mixing_ratio = 0.0f64;
    for i in 0..n {
        let u = Word::from_zero_based(vec![i]);
        for a in [SymMatrix::identity(d), g.q().clone(), random.clone()] {
            let floor = 1e-12 * correlation_limit(&g, &u, &a)?.abs().max(1.0);
            let errors = mixing_errors(&g, &u, &a, 1..=l_max, DEFAULT_CELL_CAP)?;
            if errors.iter().all(|&e| e <= floor) {
                continue;
            }
            let r = envelope_ratio(&errors, floor).unwrap_or(f64::INFINITY);
            mixing_ratio = mixing_ratio.max(r);
        }
    }
    s.at_most("gibbs.mixing_envelope_ratio", mixing_ratio, 1.0 - 1e-9);

    // Energy
    let x1 = TestFunction::coordinate(d, 0);
    let other = TestFunction::coordinate(d, d - 1);
    let mut quad_terms = vec![(1.0, exponents(d, &[(0, 2)]))];
    if d > 1 {
        quad_terms.push((1.0, exponents(d, &[(0, 1), (1, 1)])));
    } else {
        quad_terms.push((1.0, exponents(d, &[(0, 3)])));
    }
    let quad = TestFunction::polynomial(d, quad_terms)?;
    let mut residual = 0.0f64;
    let mut closed = 0.0f64;
    for l in 0..=affordable_depth(n, depth.min(5), 2) {
        for (f, h) in [(&x1, &other), (&x1, &x1), (&quad, &quad), (&quad, &other)] {
            residual = residual.max(self_similarity_residual(&g, f, h, l, DEFAULT_CELL_CAP)?);
        }
        let e = energy(&g, &x1, &other, l, DEFAULT_CELL_CAP)?;
        let a = DVector::from_fn(d, |k, _| if k == 0 { 1.0 } else { 0.0 });
        let b = DVector::from_fn(d, |k, _| if k == d - 1 { 1.0 } else { 0.0 });
        let exact = linear_energy(&g, &a, &b);
        closed = closed.max((e - exact).abs() / exact.abs().max(1.0));
    }
    s.at_most("energy.self_similarity", residual, 1e-12);
    s.at_most("energy.linear_closed_form", closed, 1e-12);

    // Matrix cone
    cone_suites(&mut s, d, &mut rng);

    // Exact values for the presets
    match source.preset {
        Some(Preset::HarmonicGasket) => gasket_values(&mut s, &g)?,
        Some(Preset::Dyadic) => dyadic_values(&mut s, &g, depth)?,
        None => {}
    }
    if d == 1 {
        let r = direction_field(&g, &Word::repeated(0, 3))?.residual;
        s.at_most("direction.rank_one_scalar", r, 0.0);
    }
    Ok(s.checks)
}

fn exponents(d: usize, powers: &[(usize, u32)]) -> Vec<u32> {
    let mut e = vec![0; d];
    for &(k, p) in powers {
        e[k] = p;
    }
    e
}

fn cone_suites(s: &mut Suite, d: usize, rng: &mut ChaCha8Rng) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = sample::symmetric(rng, d);
        let nm = norms(&a);
        let slack = 1e-12 * nm.hs.max(1.0);
        worst =
            worst.max((nm.quad - nm.hs - slack).max(nm.hs - (d as f64).sqrt() * nm.quad - slack));
    }
    s.at_most("cone.norm_equivalence", worst.max(0.0), 0.0);

    let mut metric = 0.0f64;
    for _ in 0..500 {
        let (a, b, c) = (
            sample::positive_definite(rng, d),
            sample::positive_definite(rng, d),
            sample::positive_definite(rng, d),
        );
        let ab = cone_theta(&a, &b).unwrap_or(f64::NAN);
        let asym = (ab - cone_theta(&b, &a).unwrap_or(f64::NAN)).abs();
        let triangle =
            cone_theta(&a, &c).unwrap_or(f64::NAN) - ab - cone_theta(&b, &c).unwrap_or(f64::NAN);
        let ray = cone_theta(&a, &a.scaled(3.7)).unwrap_or(f64::NAN);
        metric = metric.max(asym).max(triangle).max(ray).max(-ab);
    }
    s.push("cone.theta_metric", metric <= 1e-9, metric.max(0.0), 1e-9);

    let mut alpha_err = 0.0f64;
    for _ in 0..200 {
        let (a, b) = (
            sample::positive_definite(rng, d),
            sample::positive_definite(rng, d),
        );
        let exact = cone_alpha(&a, &b).unwrap_or(f64::NAN);
        let err = (exact - bisection_alpha(&a, &b)).abs() / exact.max(1.0);
        alpha_err = alpha_err.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    s.at_most("cone.alpha_bisection", alpha_err, 1e-10);

    let mut sandwich = 0.0f64;
    for _ in 0..200 {
        let (a, b) = (
            sample::positive_definite(rng, d),
            sample::positive_definite(rng, d),
        );
        if let Ok((lo, hi)) = whitened_extremes(&b, &a) {
            let d4 = lo.ln().abs().max(hi.ln().abs());
            let bound = (d as f64).sqrt() * d4.exp_m1() * hs_norm(&a);
            sandwich = sandwich.max(hs_norm(&(&b - &a)) / bound);
        }
    }
    s.at_most("cone.sandwich_converse", sandwich, 1.0 + 1e-12);
}

fn bisection_alpha(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while is_psd(&(b - &a.scaled(hi)), 0.0) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if is_psd(&(b - &a.scaled(mid)), 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn gasket_values(s: &mut Suite, g: &GibbsData) -> Result<()> {
    s.at_most("gasket.beta", (g.beta() - 0.6).abs(), 1e-12);
    s.at_most(
        "gasket.q_isotropic",
        g.q()
            .get(0, 1)
            .abs()
            .max((g.q().get(0, 0) - g.q().get(1, 1)).abs()),
        1e-10,
    );
    let cases = [
        ("1", 75.0),
        ("2", 75.0),
        ("3", 75.0),
        ("1.1", 41.0),
        ("1.2", 17.0),
        ("1.3", 17.0),
    ];
    let mut worst = 0.0f64;
    for (w, num) in cases {
        worst = worst.max((g.kappa(&Word::parse(w, 3)?)? - num / 225.0).abs());
    }
    s.at_most("gasket.kappa_values", worst, 1e-12);

    let residuals: Vec<f64> = (4..=10)
        .map(|l| direction_field(g, &Word::repeated(0, l)).map(|d| d.residual))
        .collect::<Result<_, _>>()?;
    let ratio = geometric_fit_sequence(&residuals, 4, 0.0).map_or(f64::INFINITY, |f| f.ratio);
    s.at_most("gasket.direction_ratio", (ratio * 9.0 - 1.0).abs(), 0.2);
    let dir = direction_field(g, &Word::repeated(0, 10))?.vector;
    s.at_most(
        "gasket.direction_limit",
        (dir[0] - 1.0).abs().max(dir[1].abs()),
        1e-8,
    );
    Ok(())
}

fn dyadic_values(s: &mut Suite, g: &GibbsData, depth: usize) -> Result<()> {
    s.at_most("dyadic.beta", (g.beta() - 0.5).abs(), 1e-12);
    s.at_most("dyadic.q", (g.q().get(0, 0) - 1.0).abs(), 1e-12);
    let mut worst = 0.0f64;
    for l in 0..=affordable_depth(2, depth.max(10), 0) {
        let expected = 0.5f64.powi(l as i32);
        for r in measure_table(g, l, DEFAULT_CELL_CAP)?.rows {
            worst = worst.max((r.kappa - expected).abs());
        }
    }
    s.at_most("dyadic.kappa_uniform", worst, 1e-12);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(depth: usize) -> VerifyOptions {
        VerifyOptions {
            depth,
            tol: 1e-12,
            max_iter: 10_000,
            seed: 0,
        }
    }

    #[test]
    fn presets_pass() {
        for p in [Preset::HarmonicGasket, Preset::Dyadic] {
            let checks = run(&SystemSource::preset(p), &opts(5)).unwrap();
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.to_string())
                .collect();
            assert!(failed.is_empty(), "{failed:?}");
        }
    }

    #[test]
    fn random_systems_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in 0..12 {
            let d = 1 + k % 3;
            let system = sample::system(&mut rng, d, d + 1 + k % 2, true);
            let source = SystemSource {
                system,
                preset: None,
            };
            let checks = run(&source, &opts(3)).unwrap();
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.to_string())
                .collect();
            assert!(failed.is_empty(), "system {k}: {failed:?}");
        }
    }

    #[test]
    fn check_line_format() {
        let c = Check {
            name: "gibbs.additivity".into(),
            pass: true,
            value: 1e-16,
            tolerance: 1e-12,
        };
        assert_eq!(
            c.to_string(),
            "CHECK gibbs.additivity PASS 1.000000e-16 1.0e-12"
        );
    }

    #[test]
    fn affordable_depths() {
        assert_eq!(affordable_depth(3, 8, 1), 8);
        assert_eq!(affordable_depth(10, 8, 1), 5);
    }
}
