use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::salmap::SaliencyMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutAlignment {
    /// Longitudinal offset of `after` relative to `before`, in `[-180, 180)`.
    pub shift_deg: f64,
    pub shift_cols: i64,
    pub cc_at_shift: f64,
    /// Pearson CC for every column shift from `-width / 2` upwards.
    pub shifts_deg: Vec<f64>,
    pub curve: Vec<f64>,
}

/// Finds the circular longitudinal shift of `before` that best matches
/// `after` in Pearson CC. If `after` is `before` rotated east by 37 degrees,
/// the result is 37. Ties go to the smallest absolute shift, then to the
/// negative one.
pub fn align_cut(before: &SaliencyMap, after: &SaliencyMap) -> Result<CutAlignment> {
    let dims = before.dims();
    if after.dims() != dims {
        return Err(Error::DimensionMismatch(format!(
            "cut maps are {}x{} and {}x{}",
            dims.width,
            dims.height,
            after.dims().width,
            after.dims().height
        )));
    }
    let (a, sa) = centred(before.data())?;
    let (b, sb) = centred(after.data())?;
    let w = dims.width;

    // X(s) = sum_r sum_c a[r][c] b[r][c + s] = IFFT(conj(A) B)[s]
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(w);
    let inv = planner.plan_fft_inverse(w);
    let mut acc = vec![Complex64::new(0.0, 0.0); w];
    let mut ra = vec![Complex64::new(0.0, 0.0); w];
    let mut rb = vec![Complex64::new(0.0, 0.0); w];
    for (row_a, row_b) in a.chunks_exact(w).zip(b.chunks_exact(w)) {
        for c in 0..w {
            ra[c] = Complex64::new(row_a[c], 0.0);
            rb[c] = Complex64::new(row_b[c], 0.0);
        }
        fwd.process(&mut ra);
        fwd.process(&mut rb);
        for c in 0..w {
            acc[c] += ra[c].conj() * rb[c];
        }
    }
    inv.process(&mut acc);
    let scale = 1.0 / (w as f64 * sa * sb);

    let half = (w / 2) as i64;
    let shifts: Vec<i64> = (-half..w as i64 - half).collect();
    let curve: Vec<f64> = shifts
        .iter()
        .map(|s| (acc[s.rem_euclid(w as i64) as usize].re * scale).clamp(-1.0, 1.0))
        .collect();
    let col_deg = 360.0 / w as f64;
    let best = (0..shifts.len())
        .max_by(|&i, &j| {
            curve[i]
                .total_cmp(&curve[j])
                .then(shifts[j].abs().cmp(&shifts[i].abs()))
                .then(shifts[j].cmp(&shifts[i]))
        })
        .expect("width >= 2");
    Ok(CutAlignment {
        shift_deg: shifts[best] as f64 * col_deg,
        shift_cols: shifts[best],
        cc_at_shift: curve[best],
        shifts_deg: shifts.iter().map(|s| *s as f64 * col_deg).collect(),
        curve,
    })
}

/// Mean-free copy and its root sum of squares.
fn centred(data: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let out: Vec<f64> = data.iter().map(|v| v - mean).collect();
    let ss = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(ss > 0.0) {
        return Err(Error::UndefinedCorrelation("cut alignment needs non-constant maps".into()));
    }
    Ok((out, ss))
}
