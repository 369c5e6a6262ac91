//! Gaussian blur on the sphere in great-circle distance.
//!
//! The kernel between two pixels depends only on their two latitudes and the
//! longitude difference, so the blur is a sum over row pairs of circular
//! convolutions along longitude. Each pair's kernel is evaluated exactly
//! (haversine distance) and truncated at four sigma; narrow kernels are
//! applied directly, wide ones (large sigma or rows near the poles) through
//! the FFT. Every source pixel is normalised to spread exactly its own mass.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::SaliencyMap;
use crate::error::{Error, Result};
use crate::sphere::GridDims;

/// Truncation radius in standard deviations.
const TRUNCATE: f64 = 4.0;

/// Row-pair kernels with more taps than this go through the FFT.
const DIRECT_MAX: usize = 48;

pub fn spherical_blur(m: &SaliencyMap, sigma_deg: f64) -> Result<SaliencyMap> {
    if !(sigma_deg > 0.0 && sigma_deg.is_finite()) {
        return Err(Error::InvalidParameter(format!("blur sigma {sigma_deg} must be positive")));
    }
    let dims = m.dims();
    let (w, h) = (dims.width, dims.height);
    let k = Kernels::new(dims, sigma_deg);
    let src = m.data();

    // pair kernels are symmetric, so each unordered pair is summed once
    let pair_sums: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|rs| {
            k.rows_near(rs)
                .filter(|&rt| rt >= rs)
                .map(|rt| k.taps(rs, rt).iter().map(|t| t.1).sum())
                .collect()
        })
        .collect();
    let mut norms = vec![0.0; h];
    for (rs, sums) in pair_sums.iter().enumerate() {
        for (rt, v) in (rs..).zip(sums) {
            norms[rs] += v;
            if rt != rs {
                norms[rt] += v;
            }
        }
    }
    let rows: Vec<Option<Vec<f64>>> = (0..h)
        .map(|r| {
            let row = &src[r * w..(r + 1) * w];
            row.iter().any(|v| *v != 0.0).then(|| row.iter().map(|v| v / norms[r]).collect())
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(w);
    let inv = planner.plan_fft_inverse(w);
    let spectra: Vec<Option<Vec<Complex64>>> = rows
        .par_iter()
        .map(|row| {
            row.as_ref().map(|row| {
                let mut buf: Vec<Complex64> = row.iter().map(|v| Complex64::new(*v, 0.0)).collect();
                fwd.process(&mut buf);
                buf
            })
        })
        .collect();

    let mut data = vec![0.0; dims.len()];
    data.par_chunks_mut(w).enumerate().for_each(|(rt, out)| {
        let mut spec: Option<Vec<Complex64>> = None;
        for rs in k.rows_near(rt) {
            let Some(row) = &rows[rs] else { continue };
            let taps = k.taps(rs, rt);
            if taps.len() <= DIRECT_MAX {
                for &(d, g) in &taps {
                    let (head, tail) = out.split_at_mut(w - d);
                    head.iter_mut().zip(&row[d..]).for_each(|(o, v)| *o += g * v);
                    tail.iter_mut().zip(&row[..d]).for_each(|(o, v)| *o += g * v);
                }
            } else {
                let mut kern = vec![Complex64::new(0.0, 0.0); w];
                for &(d, g) in &taps {
                    kern[d].re = g;
                }
                fwd.process(&mut kern);
                let acc = spec.get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); w]);
                let s = spectra[rs].as_ref().expect("non-zero rows have spectra");
                for ((a, x), y) in acc.iter_mut().zip(s).zip(&kern) {
                    *a += x * y;
                }
            }
        }
        if let Some(mut acc) = spec {
            inv.process(&mut acc);
            for (o, v) in out.iter_mut().zip(&acc) {
                *o += v.re / w as f64;
            }
        }
        // FFT rounding can leave tiny negatives where the result is zero
        out.iter_mut().for_each(|v| *v = v.max(0.0));
    });
    Ok(SaliencyMap::from_parts_unchecked(dims, data, m.normalization()))
}

fn gaussian(theta: f64, sigma: f64) -> f64 {
    (-0.5 * (theta / sigma).powi(2)).exp()
}

struct Kernels {
    width: usize,
    height: usize,
    step: f64,
    sigma: f64,
    lats: Vec<f64>,
}

impl Kernels {
    fn new(dims: GridDims, sigma: f64) -> Self {
        Self {
            width: dims.width,
            height: dims.height,
            step: dims.pixel_deg(),
            sigma,
            lats: (0..dims.height).map(|r| dims.row_lat(r).to_radians()).collect(),
        }
    }

    /// Rows whose latitude lies within the truncation radius of row `r`; the
    /// closest points of two latitude circles share a meridian.
    fn rows_near(&self, r: usize) -> std::ops::Range<usize> {
        let radius = (TRUNCATE * self.sigma / self.step + 1e-9).floor() as usize;
        r.saturating_sub(radius)..(r + radius + 1).min(self.height)
    }

    /// Kernel from row `rs` to row `rt` as (column offset mod width, weight).
    fn taps(&self, rs: usize, rt: usize) -> Vec<(usize, f64)> {
        let (a, b) = (self.lats[rs], self.lats[rt]);
        let dlat = (0.5 * (a - b)).sin().powi(2);
        let cc = a.cos() * b.cos();
        let limit = TRUNCATE * self.sigma;
        let mut taps = Vec::new();
        for m in 0..=self.width / 2 {
            let dlon = (0.5 * (m as f64 * self.step).to_radians()).sin().powi(2);
            let theta = 2.0 * (dlat + cc * dlon).min(1.0).sqrt().asin().to_degrees();
            if theta > limit {
                break;
            }
            let g = gaussian(theta, self.sigma);
            taps.push((m, g));
            if m != 0 && self.width - m != m {
                taps.push((self.width - m, g));
            }
        }
        taps
    }
}
