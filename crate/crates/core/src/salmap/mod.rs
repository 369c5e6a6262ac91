//! Saliency maps on the equirectangular grid: construction from fixations,
//! spherical blur, normalisation, entropy and salient-region masks.
//!
//! All statistics are computed in pixel space unless a [`Weighting::SolidAngle`]
//! variant is requested explicitly. Entropy values are only comparable between
//! maps of the same resolution.

mod blur;

pub use blur::spherical_blur;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ksum;
use crate::sphere::{EquirectGrid, GridDims, Raster, SphericalDir};
use crate::trajectory::Fixation;

/// Default analysis resolution (width x height).
pub const DEFAULT_DIMS: GridDims = GridDims {
    width: 1024,
    height: 512,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    RawCounts,
    SumOne,
    SqSumOne,
    MaxOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Pixel,
    SolidAngle,
}

impl Weighting {
    /// Per-row weight (the cosine of the row latitude for solid angle).
    pub fn row_weights(self, dims: GridDims) -> Vec<f64> {
        (0..dims.height)
            .map(|r| match self {
                Weighting::Pixel => 1.0,
                Weighting::SolidAngle => dims.row_lat(r).to_radians().cos(),
            })
            .collect()
    }
}

/// Non-negative scalar field over the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    dims: GridDims,
    data: Vec<f64>,
    norm: Normalization,
}

impl SaliencyMap {
    pub fn new(dims: GridDims, data: Vec<f64>, norm: Normalization) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} map",
                data.len(),
                dims.width,
                dims.height
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saliency values must be finite and non-negative, found {v}"
            )));
        }
        let map = Self { dims, data, norm };
        map.check_normalization()?;
        Ok(map)
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.len()],
            norm: Normalization::RawCounts,
        }
    }

    /// Wraps an already-validated single-channel grid.
    pub fn from_grid(grid: &EquirectGrid, norm: Normalization) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "saliency grids are single-channel, got {} channels",
                grid.channels()
            )));
        }
        Self::new(grid.dims(), grid.data().to_vec(), norm)
    }

    pub fn from_fn(dims: GridDims, f: impl FnMut(SphericalDir) -> f64) -> Result<Self> {
        Self::new(dims, dims.pixel_dirs().map(f).collect(), Normalization::RawCounts)
    }

    pub fn to_grid(&self) -> EquirectGrid {
        EquirectGrid::new(Raster {
            width: self.dims.width,
            height: self.dims.height,
            channels: 1,
            data: self.data.clone(),
        })
        .expect("saliency maps hold finite values on a valid grid")
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[self.dims.index(col, row)]
    }

    pub fn at(&self, d: SphericalDir) -> f64 {
        let (c, r) = self.dims.dir_to_pixel(d);
        self.get(c, r)
    }

    pub fn sum(&self) -> f64 {
        ksum(self.data.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Content rotated toward increasing longitude by `cols` columns.
    pub fn roll_columns(&self, cols: i64) -> Self {
        let grid = self.to_grid().roll_columns(cols);
        Self {
            dims: self.dims,
            data: grid.into_raster().data,
            norm: self.norm,
        }
    }

    /// Bilinear resampling to another grid; the result is tagged raw.
    pub fn resample(&self, dims: GridDims) -> Self {
        if dims == self.dims {
            return self.clone();
        }
        let grid = self.to_grid().resample(dims);
        Self {
            dims,
            data: grid.into_raster().data,
            norm: Normalization::RawCounts,
        }
    }

    pub(crate) fn from_parts_unchecked(dims: GridDims, data: Vec<f64>, norm: Normalization) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Self { dims, data, norm }
    }

    fn check_normalization(&self) -> Result<()> {
        let stat = match self.norm {
            Normalization::RawCounts => return Ok(()),
            Normalization::SumOne => self.sum(),
            Normalization::SqSumOne => ksum(self.data.iter().map(|v| v * v)),
            Normalization::MaxOne => self.max(),
        };
        if (stat - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "map declared {:?} but statistic is {stat}",
                self.norm
            )));
        }
        Ok(())
    }
}

/// Counts fixation centroids per pixel.
pub fn accumulate_fixations(fixations: &[Fixation], dims: GridDims) -> SaliencyMap {
    let mut data = vec![0.0; dims.len()];
    for f in fixations {
        let (c, r) = dims.dir_to_pixel(f.centroid);
        data[dims.index(c, r)] += 1.0;
    }
    SaliencyMap::from_parts_unchecked(dims, data, Normalization::RawCounts)
}

/// Rescales a map so that the requested statistic equals one. Pixel order is
/// preserved; `RawCounts` returns the map unchanged apart from the tag.
pub fn normalize(m: &SaliencyMap, mode: Normalization) -> Result<SaliencyMap> {
    let scale = match mode {
        Normalization::RawCounts => {
            return Ok(SaliencyMap {
                norm: mode,
                ..m.clone()
            })
        }
        Normalization::SumOne => m.sum(),
        Normalization::SqSumOne => ksum(m.data.iter().map(|v| v * v)).sqrt(),
        Normalization::MaxOne => m.max(),
    };
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::AllZero);
    }
    let inv = 1.0 / scale;
    Ok(SaliencyMap {
        dims: m.dims,
        data: m.data.iter().map(|v| v * inv).collect(),
        norm: mode,
    })
}

/// Shannon entropy (nats) of the distribution `s_i^2 / sum_j s_j^2`.
pub fn entropy(m: &SaliencyMap) -> Result<f64> {
    entropy_weighted(m, Weighting::Pixel)
}

/// Entropy with optional per-pixel solid-angle weighting of the
/// squared-saliency distribution.
pub fn entropy_weighted(m: &SaliencyMap, weighting: Weighting) -> Result<f64> {
    let rows = weighting.row_weights(m.dims);
    let w = m.dims.width;
    let mass = |i: usize, v: f64| rows[i / w] * v * v;
    let total = ksum(m.data.iter().enumerate().map(|(i, &v)| mass(i, v)));
    if total <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(-ksum(m.data.iter().enumerate().filter_map(|(i, &v)| {
        let p = mass(i, v) / total;
        (p > 0.0).then(|| p * p.ln())
    })))
}

/// Total order used for top-k selection: descending value, ties by
/// ascending pixel index.
fn salience_order(data: &[f64], a: u32, b: u32) -> Ordering {
    data[b as usize]
        .total_cmp(&data[a as usize])
        .then_with(|| a.cmp(&b))
}

/// Pixel indices sorted by decreasing saliency (ties by index).
pub fn descending_order(m: &SaliencyMap) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..m.data.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| salience_order(&m.data, a, b));
    idx
}

/// Rank (0 = most salient) of every pixel under [`descending_order`].
pub fn pixel_ranks(m: &SaliencyMap) -> Vec<u32> {
    let order = descending_order(m);
    let mut ranks = vec![0u32; order.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i as usize] = rank as u32;
    }
    ranks
}

/// Number of pixels making up the top `percent` of `n` pixels.
pub fn top_count(n: usize, percent: f64) -> usize {
    // round before ceil so that e.g. 5% of 200 does not become 11
    let exact = n as f64 * percent / 100.0;
    let k = ((exact * 1e9).round() / 1e9).ceil() as usize;
    k.min(n)
}

/// Binary mask of the most salient pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientMask {
    dims: GridDims,
    inside: Vec<bool>,
    count: usize,
}

impl SalientMask {
    pub fn from_bits(dims: GridDims, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != dims.len() {
            return Err(Error::DimensionMismatch("mask size differs from grid".into()));
        }
        let count = inside.iter().filter(|&&b| b).count();
        Ok(Self { dims, inside, count })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn coverage(&self) -> f64 {
        self.count as f64 / self.dims.len() as f64
    }

    pub fn contains_pixel(&self, col: usize, row: usize) -> bool {
        self.inside[self.dims.index(col, row)]
    }

    pub fn contains(&self, d: SphericalDir) -> bool {
        let (c, r) = self.dims.dir_to_pixel(d);
        self.contains_pixel(c, r)
    }
}

/// Mask of the `ceil(N * top_percent / 100)` most salient pixels.
pub fn salient_mask(m: &SaliencyMap, top_percent: f64) -> Result<SalientMask> {
    if !(top_percent > 0.0 && top_percent <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "top percent {top_percent} must lie in (0, 100]"
        )));
    }
    let n = m.data.len();
    let k = top_count(n, top_percent);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    if k < n {
        idx.select_nth_unstable_by(k, |&a, &b| salience_order(&m.data, a, b));
    }
    let mut inside = vec![false; n];
    for &i in &idx[..k] {
        inside[i as usize] = true;
    }
    Ok(SalientMask {
        dims: m.dims,
        inside,
        count: k,
    })
}

/// Per-pixel mean of the sum-one normalised inputs.
pub fn mean_map(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InsufficientData("mean of zero maps".into()))?;
    let dims = first.dims;
    if let Some(m) = maps.iter().find(|m| m.dims != dims) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            m.dims.width, m.dims.height, dims.width, dims.height
        )));
    }
    let normalized = maps
        .iter()
        .map(|m| normalize(m, Normalization::SumOne))
        .collect::<Result<Vec<_>>>()?;
    let inv = 1.0 / maps.len() as f64;
    let data = (0..dims.len())
        .map(|i| ksum(normalized.iter().map(|m| m.data[i])) * inv)
        .collect();
    Ok(SaliencyMap {
        dims,
        data,
        norm: Normalization::SumOne,
    })
}
