//! Affine iterated function systems and their symbolic coding.
//!
//! A system is an ordered list of affine contractions `psi_i(x) = L_i x + t_i`
//! on `R^d`. Finite words over the alphabet address cylinders of the coding
//! space and the corresponding cells `psi_w(G)` of the attractor, with the
//! first letter outermost: `psi_{w0 w1 ... } = psi_{w0} o psi_{w1} o ...`.
//!
//! Letters are 0-based in memory and 1-based whenever a word is rendered or
//! parsed.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sample;

/// Below this, `|det L|` is treated as singular.
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    translation: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if linear.nrows() != linear.ncols() {
            return Err(Error::NotSquare {
                rows: linear.nrows(),
                cols: linear.ncols(),
            });
        }
        if linear.nrows() == 0 {
            return Err(Error::Empty);
        }
        if translation.len() != linear.nrows() {
            return Err(Error::DimensionMismatch {
                left: linear.nrows(),
                right: translation.len(),
            });
        }
        Ok(AffineMap {
            linear,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            linear: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.nrows()
    }

    pub fn linear(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.translation
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            linear: &self.linear * &inner.linear,
            translation: &self.linear * &inner.translation + &self.translation,
        }
    }

    /// Solves `(Id - L) x = t`. `None` when `Id - L` is singular.
    pub fn fixed_point(&self) -> Option<DVector<f64>> {
        let d = self.dim();
        let system = DMatrix::identity(d, d) - &self.linear;
        system.lu().solve(&self.translation)
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.linear)
    }

    /// Conjugation by the dilation `x -> factor * x`.
    pub fn rescaled(&self, factor: f64) -> AffineMap {
        AffineMap {
            linear: self.linear.clone(),
            translation: &self.translation * factor,
        }
    }
}

pub(crate) fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

/// A validated iterated function system of `n >= 2` affine contractions.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem {
    dim: usize,
    maps: Vec<AffineMap>,
    linears: Vec<DMatrix<f64>>,
    eta: f64,
    diam_scale: f64,
}

/// Validates raw `(linear, translation)` pairs into a system.
pub fn build_system(raw: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<IfsSystem> {
    let maps = raw
        .into_iter()
        .map(|(l, t)| AffineMap::new(l, t))
        .collect::<Result<Vec<_>>>()?;
    IfsSystem::new(maps)
}

impl IfsSystem {
    pub fn new(maps: Vec<AffineMap>) -> Result<Self> {
        let Some(dim) = maps.first().map(AffineMap::dim) else {
            return Err(Error::TooFewMaps { min: 2, got: 0 });
        };
        let mut eta = 0.0f64;
        for (k, map) in maps.iter().enumerate() {
            if map.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: map.dim(),
                });
            }
            let norm = map.operator_norm();
            if !(norm < 1.0) {
                return Err(Error::NotContraction { index: k + 1, norm });
            }
            let det = map.linear.determinant();
            if !(det.abs() > SINGULAR_DET) {
                return Err(Error::SingularMap { index: k + 1, det });
            }
            eta = eta.max(norm);
        }
        // per-map errors take precedence so a single bad map is named
        if maps.len() < 2 {
            return Err(Error::TooFewMaps {
                min: 2,
                got: maps.len(),
            });
        }

        let mut max_fix = 0.0f64;
        let mut max_shift = 0.0f64;
        for map in &maps {
            let fix = map
                .fixed_point()
                .expect("contractions have a unique fixed point");
            max_fix = max_fix.max(fix.norm());
            max_shift = max_shift.max(map.translation.norm());
        }
        let diameter_bound = 2.0 * max_fix + 2.0 * max_shift / (1.0 - eta);
        let diam_scale = if diameter_bound > 0.0 {
            1.0 / diameter_bound
        } else {
            1.0
        };

        let linears = maps.iter().map(|m| m.linear.clone()).collect();
        Ok(IfsSystem {
            dim,
            maps,
            linears,
            eta,
            diam_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of maps (alphabet size).
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn linears(&self) -> &[DMatrix<f64>] {
        &self.linears
    }

    /// Largest operator norm of the linear parts.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Dilation factor that brings the bounding-ball estimate of the
    /// attractor diameter down to 1. See [`IfsSystem::normalized`].
    pub fn diam_scale(&self) -> f64 {
        self.diam_scale
    }

    /// Ratio of the metric on the coding space: `max(eta, 1/2)`.
    pub fn gamma(&self) -> f64 {
        self.eta.max(0.5)
    }

    /// The same system in coordinates dilated by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<IfsSystem> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rescaling factor must be positive, got {factor}"
            )));
        }
        IfsSystem::new(self.maps.iter().map(|m| m.rescaled(factor)).collect())
    }

    /// The system in coordinates where the estimated attractor diameter is at most 1.
    pub fn normalized(&self) -> IfsSystem {
        self.rescaled(self.diam_scale)
            .expect("diam_scale is positive and conjugation preserves validity")
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.letters.iter().find(|&&l| l >= self.len()) {
            Some(&l) => Err(Error::LetterOutOfRange {
                letter: l + 1,
                alphabet: self.len(),
            }),
            None => Ok(()),
        }
    }

    /// `psi_{w0} o psi_{w1} o ... o psi_{w_{l-1}}`; identity for the empty word.
    pub fn word_map(&self, w: &Word) -> AffineMap {
        w.letters
            .iter()
            .fold(AffineMap::identity(self.dim), |acc, &l| {
                acc.compose(&self.maps[l])
            })
    }

    /// Linear part of [`IfsSystem::word_map`].
    pub fn word_linear(&self, w: &Word) -> DMatrix<f64> {
        w.letters
            .iter()
            .fold(DMatrix::identity(self.dim, self.dim), |acc, &l| {
                acc * &self.linears[l]
            })
    }

    /// Fixed point of `psi_w`, i.e. the image of the periodic word `www...`.
    pub fn cell_anchor(&self, w: &Word) -> Result<DVector<f64>> {
        if w.is_empty() {
            return Err(Error::InvalidArgument(
                "cell anchor needs a word of depth >= 1".into(),
            ));
        }
        self.check_word(w)?;
        Ok(self
            .word_map(w)
            .fixed_point()
            .expect("eta^depth < 1 keeps Id - L_w invertible"))
    }

    /// Fixed point of the first map; lies on the attractor.
    pub fn base_point(&self) -> DVector<f64> {
        self.maps[0]
            .fixed_point()
            .expect("contractions have a unique fixed point")
    }

    /// Quadrature node of the cell `[w]`: `psi_w(base_point)`.
    ///
    /// Unlike [`IfsSystem::cell_anchor`], nodes are equivariant:
    /// `cell_node(i w) == psi_i(cell_node(w))`.
    pub fn cell_node(&self, w: &Word) -> DVector<f64> {
        self.word_map(w).apply(&self.base_point())
    }

    /// Grid estimate of the non-degeneracy constant, see [`nd_constant`].
    pub fn nd_constant(&self, grid_count: usize) -> Result<f64> {
        nd_constant(&self.linears, grid_count)
    }

    /// Maps `f` over all cells of depth `depth` in lexicographic order,
    /// handing it the word letters and the composed map.
    pub fn cells_map<T, F>(&self, depth: usize, cap: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[usize], &AffineMap) -> T + Sync,
    {
        check_cap("cells", self.len(), depth, cap)?;
        if depth == 0 {
            return Ok(vec![f(&[], &AffineMap::identity(self.dim))]);
        }
        let chunks: Vec<Vec<T>> = (0..self.len())
            .into_par_iter()
            .map(|first| {
                let mut out = Vec::new();
                let mut letters = vec![first];
                self.visit(&mut letters, &self.maps[first], depth, &f, &mut out);
                out
            })
            .collect();
        Ok(chunks.into_iter().flatten().collect())
    }

    fn visit<T, F>(
        &self,
        letters: &mut Vec<usize>,
        map: &AffineMap,
        depth: usize,
        f: &F,
        out: &mut Vec<T>,
    ) where
        F: Fn(&[usize], &AffineMap) -> T,
    {
        if letters.len() == depth {
            out.push(f(letters, map));
            return;
        }
        for j in 0..self.len() {
            letters.push(j);
            let next = map.compose(&self.maps[j]);
            self.visit(letters, &next, depth, f, out);
            letters.pop();
        }
    }
}

/// Errors when `n^depth` exceeds `cap`.
pub fn check_cap(what: &'static str, n: usize, depth: usize, cap: usize) -> Result<u128> {
    let mut count: u128 = 1;
    for _ in 0..depth {
        count = count.saturating_mul(n as u128);
        if count > cap as u128 {
            return Err(Error::CapExceeded { what, count, cap });
        }
    }
    Ok(count)
}

/// Grid estimate of the constant `b` in the non-degeneracy condition: the
/// minimum over pairs of unit vectors `(v, v0)` of `max_i |(L_i v, v0)|`.
///
/// The grid is `grid_count` equally spaced angles in `d = 2`, the two signs
/// in `d = 1`, and in higher dimension the coordinate axes together with
/// `grid_count` seeded pseudo-random directions. A value that is zero up to
/// rounding is reported as exactly 0; `<= 0` means the condition fails on
/// the grid.
pub fn nd_constant(linears: &[DMatrix<f64>], grid_count: usize) -> Result<f64> {
    if grid_count < 16 {
        return Err(Error::InvalidArgument(format!(
            "nd grid needs at least 16 points, got {grid_count}"
        )));
    }
    let Some(first) = linears.first() else {
        return Err(Error::TooFewMaps { min: 1, got: 0 });
    };
    let dim = first.nrows();
    let directions = unit_grid(dim, grid_count);

    let images: Vec<Vec<DVector<f64>>> = directions
        .iter()
        .map(|v| linears.iter().map(|l| l * v).collect())
        .collect();
    let b = images
        .par_iter()
        .map(|lv| {
            directions
                .iter()
                .map(|v0| lv.iter().map(|w| w.dot(v0).abs()).fold(f64::MIN, f64::max))
                .fold(f64::MAX, f64::min)
        })
        .reduce(|| f64::MAX, f64::min);

    let scale = linears.iter().map(operator_norm).fold(0.0, f64::max);
    Ok(if b.abs() <= 1e-14 * scale.max(1.0) {
        0.0
    } else {
        b
    })
}

fn unit_grid(dim: usize, grid_count: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ],
        2 => (0..grid_count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / grid_count as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut out = Vec::with_capacity(grid_count + 2 * dim);
            for k in 0..dim {
                let mut e = DVector::zeros(dim);
                e[k] = 1.0;
                out.push(-e.clone());
                out.push(e);
            }
            out.extend((0..grid_count).map(|_| sample::unit_vector(&mut rng, dim)));
            out
        }
    }
}

/// The harmonic Sierpinski gasket on `R^2`.
///
/// `T1 = [[3/5, 0], [0, 1/5]]` and `T2`, `T3` are its conjugates by
/// rotations of `+-120` degrees; the fixed points are `A = (0, 0)`,
/// `B = (1, 1/sqrt 3)` and `C = (1, -1/sqrt 3)`, with
/// `psi_1(x) = T1 x`, `psi_2(x) = B + T2 (x - B)`, `psi_3(x) = C + T3 (x - C)`.
pub fn preset_harmonic_gasket() -> IfsSystem {
    let s3 = 3f64.sqrt();
    let t1 = DMatrix::from_row_slice(2, 2, &[3.0 / 5.0, 0.0, 0.0, 1.0 / 5.0]);
    let t2 = DMatrix::from_row_slice(2, 2, &[3.0 / 10.0, s3 / 10.0, s3 / 10.0, 1.0 / 2.0]);
    let t3 = DMatrix::from_row_slice(2, 2, &[3.0 / 10.0, -s3 / 10.0, -s3 / 10.0, 1.0 / 2.0]);
    let a = DVector::from_vec(vec![0.0, 0.0]);
    let b = DVector::from_vec(vec![1.0, 1.0 / s3]);
    let c = DVector::from_vec(vec![1.0, -1.0 / s3]);
    let around = |t: DMatrix<f64>, p: DVector<f64>| {
        let shift = &p - &t * &p;
        (t, shift)
    };
    build_system(vec![around(t1, a), around(t2, b), around(t3, c)])
        .expect("gasket preset is a valid system")
}

/// `{x/2, (x+1)/2}` on `R^1`.
pub fn preset_dyadic() -> IfsSystem {
    build_system(vec![
        (
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 0.0),
        ),
        (
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 0.5),
        ),
    ])
    .expect("dyadic preset is a valid system")
}

/// Finite word over the alphabet `{0..n}` (rendered 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    letters: Vec<usize>,
}

impl Word {
    pub fn empty() -> Self {
        Word::default()
    }

    pub fn from_zero_based(letters: Vec<usize>) -> Self {
        Word { letters }
    }

    /// Letters numbered from 1, as they are written.
    pub fn from_one_based(letters: &[usize], alphabet: usize) -> Result<Self> {
        letters
            .iter()
            .map(|&l| {
                if l >= 1 && l <= alphabet {
                    Ok(l - 1)
                } else {
                    Err(Error::LetterOutOfRange {
                        letter: l,
                        alphabet,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word::from_zero_based)
    }

    /// `i` repeated `depth` times (0-based letter).
    pub fn repeated(letter: usize, depth: usize) -> Self {
        Word {
            letters: vec![letter; depth],
        }
    }

    /// Parses the dot-joined 1-based form, e.g. `"1.3.2"`; `""` is the empty word.
    pub fn parse(text: &str, alphabet: usize) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Word::empty());
        }
        let letters = text
            .split('.')
            .map(|part| {
                part.trim().parse::<usize>().map_err(|_| {
                    Error::InvalidArgument(format!("bad letter {part:?} in word {text:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Word::from_one_based(&letters, alphabet)
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn depth(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `self ++ other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word { letters }
    }

    /// `i w`.
    pub fn prefixed(&self, letter: usize) -> Word {
        let mut letters = Vec::with_capacity(self.letters.len() + 1);
        letters.push(letter);
        letters.extend_from_slice(&self.letters);
        Word { letters }
    }

    /// `w j`.
    pub fn extended(&self, letter: usize) -> Word {
        let mut letters = self.letters.clone();
        letters.push(letter);
        Word { letters }
    }

    /// First `depth` letters.
    pub fn truncated(&self, depth: usize) -> Word {
        Word {
            letters: self.letters[..depth.min(self.letters.len())].to_vec(),
        }
    }

    /// All `n^depth` words in lexicographic order.
    pub fn all(alphabet: usize, depth: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..depth {
            out = out
                .iter()
                .flat_map(|w| (0..alphabet).map(move |j| w.extended(j)))
                .collect();
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}
