//! Seeded random generators for matrices and systems used by the property
//! suites and diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::ifs::{AffineMap, IfsSystem};
use crate::matcone::SymMatrix;

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Entries uniform in `[-1, 1)`.
pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymMatrix {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::new(m).expect("square by construction")
}

pub fn matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Gram matrix `G G^t` with `G` of shape `dim x rank`; PSD of rank at most `rank`.
pub fn gram<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> SymMatrix {
    let g = matrix(rng, dim, rank);
    SymMatrix::new(&g * g.transpose()).expect("square by construction")
}

/// Full-rank Gram matrix shifted by `0.05 * Id`; comfortably inside the cone.
pub fn positive_definite<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymMatrix {
    let g = gram(rng, dim, dim);
    &g + &SymMatrix::identity(dim).scaled(0.05)
}

/// PD matrix that may sit very close to the boundary of the cone: a Gram
/// matrix of random rank plus a tiny multiple of the identity.
pub fn near_boundary_pd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymMatrix {
    let rank = rng.gen_range(1..=dim);
    let g = gram(rng, dim, rank);
    let eps = 10f64.powf(rng.gen_range(-9.0..-1.0)) * g.trace().max(1e-3);
    &g + &SymMatrix::identity(dim).scaled(eps)
}

/// PSD matrix: rank-one with probability 1/3, otherwise a Gram matrix of random rank.
pub fn psd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymMatrix {
    if rng.gen_range(0..3) == 0 {
        SymMatrix::outer(&unit_vector(rng, dim))
    } else {
        let rank = rng.gen_range(1..=dim);
        gram(rng, dim, rank)
    }
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random affine system of `n` maps on `R^dim` whose linear parts have
/// operator norms drawn from `[0.2, 0.8)`. When `require_nd` is set, draws
/// are repeated until the non-degeneracy estimate on a coarse grid is positive.
pub fn system<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize, require_nd: bool) -> IfsSystem {
    loop {
        let maps: Vec<AffineMap> = (0..n)
            .map(|_| {
                let raw = matrix(rng, dim, dim);
                let norm = crate::ifs::operator_norm(&raw);
                let target = rng.gen_range(0.2..0.8);
                let linear = raw * (target / norm.max(1e-12));
                let translation = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
                AffineMap::new(linear, translation).expect("square by construction")
            })
            .collect();
        let Ok(sys) = IfsSystem::new(maps) else {
            continue;
        };
        if !require_nd || sys.nd_constant(64).map(|b| b > 1e-3).unwrap_or(false) {
            return sys;
        }
    }
}
