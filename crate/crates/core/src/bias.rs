//! Latitudinal equator bias: a Laplace profile over latitude fitted to
//! saliency maps and re-applied to predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ksum;
use crate::salmap::{normalize, Normalization, SaliencyMap};

/// Laplace distribution over latitude, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquatorBias {
    pub mu: f64,
    pub beta: f64,
}

impl Default for EquatorBias {
    /// A generic prior for runs without data to fit.
    fn default() -> Self {
        Self { mu: 0.0, beta: 15.0 }
    }
}

impl EquatorBias {
    pub fn new(mu: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("bias beta {beta} must be positive")));
        }
        if !(mu.abs() <= 90.0) {
            return Err(Error::InvalidParameter(format!("bias mu {mu} outside [-90, 90]")));
        }
        Ok(Self { mu, beta })
    }

    pub fn density(&self, lat: f64) -> f64 {
        (-(lat - self.mu).abs() / self.beta).exp() / (2.0 * self.beta)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("two floats always serialise")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: EquatorBias = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(1, |s| text[..s.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        Self::new(raw.mu, raw.beta)
    }
}

/// Probability mass per latitude row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatProfile {
    /// Centre latitude of each row, north to south.
    pub lats: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Row sums of a map, normalised to sum to one.
pub fn lat_marginal(m: &SaliencyMap) -> Result<LatProfile> {
    let dims = m.dims();
    let rows: Vec<f64> = m
        .data()
        .chunks(dims.width)
        .map(|row| ksum(row.iter().copied()))
        .collect();
    let total = ksum(rows.iter().copied());
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(LatProfile {
        lats: (0..dims.height).map(|r| dims.row_lat(r)).collect(),
        weights: rows.into_iter().map(|v| v / total).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub bias: EquatorBias,
    /// Set when all mass sits in one bin and `beta` was clamped to the bin
    /// width.
    pub degenerate: bool,
}

/// Maximum-likelihood Laplace fit: `mu` is the weighted median of the bin
/// latitudes, `beta` the weighted mean absolute deviation about `mu`.
pub fn fit_laplace(profile: &LatProfile) -> Result<LaplaceFit> {
    let n = profile.lats.len();
    if n == 0 || profile.weights.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} latitudes for {} weights",
            n,
            profile.weights.len()
        )));
    }
    if profile.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("profile weights must be finite and non-negative".into()));
    }
    let total = ksum(profile.weights.iter().copied());
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("profile sums to {total}, expected 1")));
    }

    let mut bins: Vec<(f64, f64)> = profile
        .lats
        .iter()
        .copied()
        .zip(profile.weights.iter().map(|w| w / total))
        .filter(|b| b.1 > 0.0)
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));

    // cumulative weight reaching exactly one half between two bins puts the
    // median midway, so symmetric profiles fit their centre exactly
    let mut cum = 0.0;
    let mut mu = bins[bins.len() - 1].0;
    for (k, &(lat, w)) in bins.iter().enumerate() {
        cum += w;
        if (cum - 0.5).abs() <= 1e-12 && k + 1 < bins.len() {
            mu = 0.5 * (lat + bins[k + 1].0);
            break;
        }
        if cum > 0.5 {
            mu = lat;
            break;
        }
    }
    let mut beta = ksum(bins.iter().map(|&(lat, w)| w * (lat - mu).abs()));
    let degenerate = bins.len() == 1 || beta <= 0.0;
    if degenerate {
        beta = bin_width(&profile.lats);
    }
    Ok(LaplaceFit {
        bias: EquatorBias::new(mu.clamp(-90.0, 90.0), beta)?,
        degenerate,
    })
}

/// Smallest spacing between distinct bin latitudes (180 for a single bin).
fn bin_width(lats: &[f64]) -> f64 {
    let mut sorted = lats.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(180.0)
}

/// Multiplies every row by the Laplace density at its latitude and
/// renormalises to sum one.
pub fn apply_equator_bias(m: &SaliencyMap, b: &EquatorBias) -> Result<SaliencyMap> {
    let b = EquatorBias::new(b.mu, b.beta)?;
    let dims = m.dims();
    let data: Vec<f64> = m
        .data()
        .chunks(dims.width)
        .enumerate()
        .flat_map(|(r, row)| {
            let f = b.density(dims.row_lat(r));
            row.iter().map(move |v| v * f)
        })
        .collect();
    normalize(&SaliencyMap::new(dims, data, Normalization::RawCounts)?, Normalization::SumOne)
}
