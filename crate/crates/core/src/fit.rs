//! Least-squares fits of geometric decay `y_l ~ C * r^l`.

/// Result of fitting `ln y_l = ln C + l ln r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub ratio: f64,
    pub prefactor: f64,
    /// Number of samples that entered the fit.
    pub points: usize,
}

/// Fits `(l, y_l)` pairs, ignoring samples with `y_l <= floor`.
///
/// Returns `None` when fewer than two samples remain.
pub fn geometric_fit(samples: &[(f64, f64)], floor: f64) -> Option<GeometricFit> {
    let kept: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, y)| y.is_finite() && *y > floor)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if kept.len() < 2 {
        return None;
    }
    let n = kept.len() as f64;
    let mean_x = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = kept.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    Some(GeometricFit {
        ratio: slope.exp(),
        prefactor: (mean_y - slope * mean_x).exp(),
        points: kept.len(),
    })
}

/// Fits a sequence whose first entry has index `first`.
pub fn geometric_fit_sequence(values: &[f64], first: usize, floor: f64) -> Option<GeometricFit> {
    let samples: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(k, &y)| ((first + k) as f64, y))
        .collect();
    geometric_fit(&samples, floor)
}

/// Per-step ratio of the sequence envelope: the largest value in the later
/// half against the largest in the earlier half, taken to the power
/// `1 / offset` where `offset` is the distance between the two halves.
///
/// Unlike [`geometric_fit`] this tolerates oscillating sequences such as
/// `r^l cos(l w)`. Values below `floor` count as `floor`. Returns `None`
/// for fewer than two samples or an earlier half entirely below `floor`.
pub fn envelope_ratio(values: &[f64], floor: f64) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let offset = values.len() / 2;
    let head = values[..offset].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = values[offset..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(head > floor) {
        return None;
    }
    Some((tail.max(floor) / head).powf(1.0 / offset as f64))
}

/// Outcome of a geometric-decay check on an error sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// Every sample is at or below the floor: the limit is attained.
    Exact,
    Geometric(GeometricFit),
    /// Too few samples above the floor to fit.
    Undetermined,
}

impl Decay {
    pub fn classify(values: &[f64], first: usize, floor: f64) -> Decay {
        if values.iter().all(|&v| v.abs() <= floor) {
            return Decay::Exact;
        }
        match geometric_fit_sequence(values, first, floor) {
            Some(fit) => Decay::Geometric(fit),
            None => Decay::Undetermined,
        }
    }

    /// Exact, or a fitted ratio strictly below 1.
    pub fn is_decaying(&self) -> bool {
        match self {
            Decay::Exact => true,
            Decay::Geometric(fit) => fit.ratio < 1.0,
            Decay::Undetermined => false,
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        match self {
            Decay::Geometric(fit) => Some(fit.ratio),
            _ => None,
        }
    }
}
