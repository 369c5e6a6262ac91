//! Spectral-residual saliency: the log amplitude spectrum minus its local
//! average, transformed back with the original phase.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::PlanarPredictor;
use crate::error::{Error, Result};
use crate::sphere::Raster;

/// Classical built-in predictor. Works on a box-downsampled copy about
/// `work_width` pixels wide and treats the image as periodic in both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralResidual {
    pub work_width: usize,
    /// Smoothing of the residual map, in work-grid pixels.
    pub blur_px: f64,
}

impl Default for SpectralResidual {
    fn default() -> Self {
        Self {
            work_width: 64,
            blur_px: 3.0,
        }
    }
}

pub const MIN_INPUT: usize = 16;

impl PlanarPredictor for SpectralResidual {
    fn name(&self) -> &str {
        "spectral-residual"
    }

    fn version(&self) -> &str {
        "1"
    }

    fn predict(&self, image: &Raster) -> Result<Raster> {
        if image.width < MIN_INPUT || image.height < MIN_INPUT {
            return Err(Error::InvalidParameter(format!(
                "spectral residual needs at least {MIN_INPUT}x{MIN_INPUT} pixels, got {}x{}",
                image.width, image.height
            )));
        }
        let gray = image.to_gray();
        let factor = (image.width / self.work_width.max(1)).max(1);
        let (w, h) = (image.width / factor, image.height / factor);
        let small = box_downsample(&gray, factor, w, h);

        let mean = small.iter().sum::<f64>() / small.len() as f64;
        let energy: f64 = small.iter().map(|v| (v - mean).powi(2)).sum();
        let scale = small.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if energy <= 1e-20 * (scale * scale * small.len() as f64).max(f64::MIN_POSITIVE) {
            return Raster::new(image.width, image.height, 1, vec![0.0; image.width * image.height]);
        }

        let residual = spectral_residual(&small, w, h);
        let smooth = gaussian_circular(&residual, w, h, self.blur_px * w as f64 / self.work_width.max(1) as f64);
        Raster::new(image.width, image.height, 1, upsample_wrap(&smooth, w, h, factor, image.width, image.height))
    }
}

fn box_downsample(src: &Raster, f: usize, w: usize, h: usize) -> Vec<f64> {
    let inv = 1.0 / (f * f) as f64;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in 0..f {
                let row = (y * f + dy) * src.width;
                acc += src.data[row + x * f..row + x * f + f].iter().sum::<f64>();
            }
            out[y * w + x] = acc * inv;
        }
    }
    out
}

fn fft2(data: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

fn spectral_residual(img: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut spec: Vec<Complex64> = img.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut spec, w, h, false);
    // Near-zero bins would otherwise dominate the residual. Tying the floor to
    // the mean amplitude keeps the result invariant to gain.
    let mean_amp = spec.iter().map(|c| c.norm()).sum::<f64>() / spec.len() as f64;
    let floor = mean_amp * 0.1;
    let log_amp: Vec<f64> = spec.iter().map(|c| (c.norm() + floor).ln()).collect();
    let mut out = spec.clone();
    for y in 0..h {
        for x in 0..w {
            let mut avg = 0.0;
            for dy in [h - 1, 0, 1] {
                for dx in [w - 1, 0, 1] {
                    avg += log_amp[((y + dy) % h) * w + (x + dx) % w];
                }
            }
            let i = y * w + x;
            let r = log_amp[i] - avg / 9.0;
            let phase = spec[i].arg();
            out[i] = Complex64::from_polar(r.exp(), phase);
        }
    }
    fft2(&mut out, w, h, true);
    out.iter().map(|c| c.norm_sqr()).collect()
}

fn gaussian_circular(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let taps: Vec<f64> = (0..=radius).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let norm = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let k = k as isize;
                acc += if k == 0 {
                    t * src[y * w + x]
                } else {
                    t * (src[y * w + wrap(x as isize + k, w)] + src[y * w + wrap(x as isize - k, w)])
                };
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let k = k as isize;
                acc += if k == 0 {
                    t * tmp[y * w + x]
                } else {
                    t * (tmp[wrap(y as isize + k, h) * w + x] + tmp[wrap(y as isize - k, h) * w + x])
                };
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}

/// Bilinear upsampling by `f` with periodic boundaries, aligned so that a
/// work pixel covers the `f x f` block it was averaged from.
fn upsample_wrap(src: &[f64], w: usize, h: usize, f: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        let sy = (y as f64 + 0.5) / f as f64 - 0.5;
        let y0 = sy.floor();
        let ty = sy - y0;
        let ya = (y0 as isize).rem_euclid(h as isize) as usize;
        let yb = (ya + 1) % h;
        for x in 0..out_w {
            let sx = (x as f64 + 0.5) / f as f64 - 0.5;
            let x0 = sx.floor();
            let tx = sx - x0;
            let xa = (x0 as isize).rem_euclid(w as isize) as usize;
            let xb = (xa + 1) % w;
            let top = src[ya * w + xa] * (1.0 - tx) + src[ya * w + xb] * tx;
            let bot = src[yb * w + xa] * (1.0 - tx) + src[yb * w + xb] * tx;
            out[y * out_w + x] = (top * (1.0 - ty) + bot * ty).max(0.0);
        }
    }
    out
}
