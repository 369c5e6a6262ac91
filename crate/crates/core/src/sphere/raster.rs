use serde::{Deserialize, Serialize};

use super::{GridDims, SphericalDir};
use crate::error::{Error, Result};

/// Linear interpolation that is exact for `a == b` and never leaves `[a, b]`.
#[inline]
pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    if a <= b {
        v.clamp(a, b)
    } else {
        v.clamp(b, a)
    }
}

/// Row-major, channel-interleaved image of `f64` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidGrid(format!(
                "empty raster {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {width}x{height}x{channels} raster",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, ch: usize, v: f64) {
        self.data[(row * self.width + col) * self.channels + ch] = v;
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Bilinear sample at continuous coordinates (pixel centres at integers),
    /// clamping at the borders. Writes one value per channel into `out`.
    pub fn sample_clamped(&self, x: f64, y: f64, out: &mut [f64]) {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        for (ch, o) in out.iter_mut().enumerate().take(self.channels) {
            let top = lerp(self.get(x0, y0, ch), self.get(x1, y0, ch), fx);
            let bot = lerp(self.get(x0, y1, ch), self.get(x1, y1, ch), fx);
            *o = lerp(top, bot, fy);
        }
    }

    /// Single-channel view of one channel.
    pub fn channel(&self, ch: usize) -> Raster {
        let data = self.data.iter().skip(ch).step_by(self.channels).copied().collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Mean over channels, producing a single-channel raster.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// An equirectangular panorama or scalar field (`width == 2 * height`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquirectGrid {
    raster: Raster,
}

impl EquirectGrid {
    pub fn new(raster: Raster) -> Result<Self> {
        GridDims::new(raster.width, raster.height)?;
        if let Some(v) = raster.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample {v}")));
        }
        Ok(Self { raster })
    }

    pub fn filled(dims: GridDims, channels: usize, value: f64) -> Self {
        Self {
            raster: Raster::filled(dims.width, dims.height, channels, value),
        }
    }

    /// Grid whose single channel is `f` evaluated at every pixel centre.
    pub fn from_fn(dims: GridDims, mut f: impl FnMut(SphericalDir) -> f64) -> Self {
        let data = dims.pixel_dirs().map(&mut f).collect();
        Self {
            raster: Raster {
                width: dims.width,
                height: dims.height,
                channels: 1,
                data,
            },
        }
    }

    pub fn dims(&self) -> GridDims {
        GridDims {
            width: self.raster.width,
            height: self.raster.height,
        }
    }

    pub fn channels(&self) -> usize {
        self.raster.channels
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    pub fn data(&self) -> &[f64] {
        &self.raster.data
    }

    /// Bilinear sample at a direction: longitude wraps around, latitude
    /// clamps at the pole rows.
    pub fn sample(&self, d: SphericalDir, out: &mut [f64]) {
        let dims = self.dims();
        let (x, y) = dims.continuous_coords(d);
        let w = dims.width as i64;
        let xf = x.floor();
        let fx = x - xf;
        let x0 = (xf as i64).rem_euclid(w) as usize;
        let x1 = (x0 + 1) % dims.width;
        let yc = y.clamp(0.0, (dims.height - 1) as f64);
        let y0 = yc.floor() as usize;
        let y1 = (y0 + 1).min(dims.height - 1);
        let fy = yc - y0 as f64;
        let r = &self.raster;
        for (ch, o) in out.iter_mut().enumerate().take(r.channels) {
            let top = lerp(r.get(x0, y0, ch), r.get(x1, y0, ch), fx);
            let bot = lerp(r.get(x0, y1, ch), r.get(x1, y1, ch), fx);
            *o = lerp(top, bot, fy);
        }
    }

    /// Content rotated toward increasing longitude by `cols` columns.
    pub fn roll_columns(&self, cols: i64) -> Self {
        let dims = self.dims();
        let ch = self.channels();
        let mut data = vec![0.0; self.raster.data.len()];
        for r in 0..dims.height {
            for c in 0..dims.width {
                let dst = (c as i64 + cols).rem_euclid(dims.width as i64) as usize;
                let s = (r * dims.width + c) * ch;
                let t = (r * dims.width + dst) * ch;
                data[t..t + ch].copy_from_slice(&self.raster.data[s..s + ch]);
            }
        }
        Self {
            raster: Raster { data, ..self.raster.clone() },
        }
    }

    /// Resamples onto another equirectangular grid with bilinear filtering.
    /// Returns a clone when the dimensions already match.
    pub fn resample(&self, dims: GridDims) -> Self {
        if dims == self.dims() {
            return self.clone();
        }
        let ch = self.channels();
        let mut data = vec![0.0; dims.len() * ch];
        for (i, d) in dims.pixel_dirs().enumerate() {
            self.sample(d, &mut data[i * ch..(i + 1) * ch]);
        }
        Self {
            raster: Raster {
                width: dims.width,
                height: dims.height,
                channels: ch,
                data,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lerp_exact_and_bounded() {
        assert_eq!(lerp(0.3, 0.3, 0.77), 0.3);
        let v = lerp(0.1, 0.3, 1.0);
        assert!(v <= 0.3 && v >= 0.1);
        assert_eq!(lerp(2.0, 1.0, 0.0), 2.0);
    }

    #[test]
    fn raster_size_checked() {
        assert!(Raster::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Raster::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn equirect_rejects_non_finite() {
        let r = Raster::new(4, 2, 1, vec![0.0, 1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(EquirectGrid::new(r).is_err());
    }

    #[test]
    fn sample_hits_pixel_centres() {
        let dims = GridDims::new(8, 4).unwrap();
        let g = EquirectGrid::from_fn(dims, |d| d.lat * 10.0 + d.lon);
        let mut out = [0.0];
        for r in 0..4 {
            for c in 0..8 {
                g.sample(dims.pixel_to_dir(c, r).unwrap(), &mut out);
                assert!((out[0] - g.raster().get(c, r, 0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn roll_moves_content_east() {
        let dims = GridDims::new(8, 4).unwrap();
        let g = EquirectGrid::from_fn(dims, |d| d.lon);
        let rolled = g.roll_columns(3);
        assert_eq!(rolled.raster().get(3, 0, 0), g.raster().get(0, 0, 0));
        assert_eq!(rolled.roll_columns(-3), g);
    }
}
