//! Evaluation measures: correlation between maps, inter-observer congruency,
//! per-user behavioural metrics, convergence and the exploration curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{isotonic_increasing, ksum};
use crate::salmap::{accumulate_fixations, pixel_ranks, spherical_blur, top_count, SaliencyMap, SalientMask, Weighting};
use crate::sphere::lon_diff;
use crate::trajectory::{Fixation, Trajectory};

/// Pearson correlation over pixels.
pub fn pearson_cc(a: &SaliencyMap, b: &SaliencyMap) -> Result<f64> {
    pearson_cc_weighted(a, b, Weighting::Pixel)
}

/// Pearson correlation with optional solid-angle weighting of pixels.
pub fn pearson_cc_weighted(a: &SaliencyMap, b: &SaliencyMap, weighting: Weighting) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.dims().width,
            a.dims().height,
            b.dims().width,
            b.dims().height
        )));
    }
    let w = a.dims().width;
    let rows = weighting.row_weights(a.dims());
    pearson_slices(a.data(), b.data(), |i| rows[i / w])
}

fn pearson_slices(a: &[f64], b: &[f64], weight: impl Fn(usize) -> f64) -> Result<f64> {
    let wsum = ksum((0..a.len()).map(&weight));
    let ma = ksum(a.iter().enumerate().map(|(i, v)| weight(i) * v)) / wsum;
    let mb = ksum(b.iter().enumerate().map(|(i, v)| weight(i) * v)) / wsum;
    let sab = ksum((0..a.len()).map(|i| weight(i) * (a[i] - ma) * (b[i] - mb)));
    let saa = ksum((0..a.len()).map(|i| weight(i) * (a[i] - ma).powi(2)));
    let sbb = ksum((0..a.len()).map(|i| weight(i) * (b[i] - mb).powi(2)));
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation("constant map".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Top-% thresholds in increasing order.
    pub thresholds: Vec<f64>,
    pub hit_rates: Vec<f64>,
    /// Trapezoidal area over the threshold range, divided by its width.
    pub auc: f64,
}

/// Thresholds 1, 2, ..., 100 percent.
pub fn default_thresholds() -> Vec<f64> {
    (1..=100).map(f64::from).collect()
}

/// Fraction of `fixations` falling inside the top-n% region of
/// `ground_truth`, for every threshold n.
pub fn congruency_roc(fixations: &[Fixation], ground_truth: &SaliencyMap, thresholds: &[f64]) -> Result<RocCurve> {
    if fixations.is_empty() {
        return Err(Error::InsufficientData("congruency needs at least one fixation".into()));
    }
    let mut thresholds = thresholds.to_vec();
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && *t <= 100.0)) {
        return Err(Error::InvalidParameter("thresholds must lie in (0, 100]".into()));
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let dims = ground_truth.dims();
    let ranks = pixel_ranks(ground_truth);
    let fix_ranks: Vec<usize> = fixations
        .iter()
        .map(|f| {
            let (c, r) = dims.dir_to_pixel(f.centroid);
            ranks[dims.index(c, r)] as usize
        })
        .collect();
    let hit_rates: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            let k = top_count(dims.len(), t);
            fix_ranks.iter().filter(|&&r| r < k).count() as f64 / fix_ranks.len() as f64
        })
        .collect();
    let auc = normalized_trapezoid(&thresholds, &hit_rates);
    Ok(RocCurve {
        thresholds,
        hit_rates,
        auc,
    })
}

/// Trapezoidal integral divided by the width of `xs`; a single point
/// returns its value.
fn normalized_trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 {
        return ys.first().copied().unwrap_or(0.0);
    }
    let area: f64 = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum();
    area / (xs[xs.len() - 1] - xs[0])
}

/// Start time (seconds) of the first fixation inside the mask, `None` when
/// no fixation hits it.
pub fn time_to_sr(fixations: &[Fixation], mask: &SalientMask) -> Option<f64> {
    fixations
        .iter()
        .find(|f| mask.contains(f.centroid))
        .map(|f| f.t_start_ms / 1000.0)
}

pub fn perc_fix_inside(fixations: &[Fixation], mask: &SalientMask) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::InsufficientData("fraction inside is undefined without fixations".into()));
    }
    Ok(fixations.iter().filter(|f| mask.contains(f.centroid)).count() as f64 / fixations.len() as f64)
}

pub fn n_fix(fixations: &[Fixation]) -> usize {
    fixations.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergParams {
    pub step_s: f64,
    pub horizon_s: f64,
    pub blur_sigma_deg: f64,
}

impl Default for ConvergParams {
    fn default() -> Self {
        Self {
            step_s: 1.0,
            horizon_s: 30.0,
            blur_sigma_deg: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Trapezoidal area under CC(t) over `[0, horizon]`, divided by the horizon.
    pub auc: f64,
    pub times_s: Vec<f64>,
    pub cc: Vec<f64>,
    /// The recording ends before the horizon.
    pub partial: bool,
}

/// How quickly a user's fixation map approaches a converged map. At each
/// step the map of all fixations started so far is blurred and correlated
/// with `converged`; empty or constant maps score 0.
pub fn converg_time(
    fixations: &[Fixation],
    span_ms: f64,
    converged: &SaliencyMap,
    params: &ConvergParams,
) -> Result<Convergence> {
    if !(params.step_s > 0.0 && params.horizon_s > 0.0) {
        return Err(Error::InvalidParameter("step and horizon must be positive".into()));
    }
    let steps = (params.horizon_s / params.step_s).round() as usize;
    let mut times_s: Vec<f64> = (0..=steps).map(|k| (k as f64 * params.step_s).min(params.horizon_s)).collect();
    times_s.dedup();
    if *times_s.last().unwrap() < params.horizon_s {
        times_s.push(params.horizon_s);
    }
    let mut cc = Vec::with_capacity(times_s.len());
    let mut last: Option<(usize, f64)> = None;
    for &t in &times_s {
        let seen = fixations.iter().filter(|f| f.t_start_ms <= t * 1000.0).count();
        let score = match last {
            Some((n, s)) if n == seen => s,
            _ if seen == 0 => 0.0,
            _ => {
                let visible: Vec<Fixation> = fixations.iter().filter(|f| f.t_start_ms <= t * 1000.0).copied().collect();
                let map = spherical_blur(&accumulate_fixations(&visible, converged.dims()), params.blur_sigma_deg)?;
                pearson_cc(&map, converged).unwrap_or(0.0)
            }
        };
        last = Some((seen, score));
        cc.push(score);
    }
    Ok(Convergence {
        auc: normalized_trapezoid(&times_s, &cc),
        times_s,
        cc,
        partial: span_ms < params.horizon_s * 1000.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationCurve {
    pub offsets_deg: Vec<f64>,
    /// Isotonic (non-decreasing) mean time per reached bin.
    pub mean_time_s: Vec<Option<f64>>,
    /// Plain mean before the monotone cleanup.
    pub raw_mean_time_s: Vec<Option<f64>>,
    /// Number of trajectories reaching each bin.
    pub counts: Vec<usize>,
    /// Adjacent reached bins whose raw means decrease.
    pub raw_violations: usize,
}

impl ExplorationCurve {
    /// Offset reached after `t_s` seconds by piecewise-linear interpolation
    /// of the cleaned curve, saturating at the last reached bin.
    pub fn offset_at(&self, t_s: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .offsets_deg
            .iter()
            .zip(&self.mean_time_s)
            .filter_map(|(&o, t)| t.map(|t| (t, o)))
            .collect();
        let Some(&(t0, o0)) = pts.first() else {
            return 0.0;
        };
        if t_s <= t0 {
            return o0;
        }
        for w in pts.windows(2) {
            let ((ta, oa), (tb, ob)) = (w[0], w[1]);
            if t_s <= tb {
                return if tb > ta { oa + (ob - oa) * (t_s - ta) / (tb - ta) } else { ob };
            }
        }
        pts[pts.len() - 1].1
    }

    /// Time at which the full offset of 180 degrees is reached, if it is.
    pub fn full_exploration_s(&self) -> Option<f64> {
        self.offsets_deg
            .iter()
            .zip(&self.mean_time_s)
            .find(|(o, _)| **o >= 180.0)
            .and_then(|(_, t)| *t)
    }
}

/// First time (seconds since the first sample) at which the gaze reaches a
/// longitudinal offset of at least `delta` from the start longitude. Passing
/// over the antipode between two samples counts as reaching 180.
fn first_reach(traj: &Trajectory, delta: f64) -> Option<f64> {
    let s = traj.samples();
    let t0 = s[0].t_ms;
    let start = traj.meta.start_lon;
    let mut prev: Option<f64> = None;
    for x in s {
        let off = lon_diff(x.gaze.lon, start);
        let crossed = prev.is_some_and(|p| p.signum() != off.signum() && (p.abs() + off.abs()) > 180.0);
        if off.abs() >= delta || (crossed && delta <= 180.0) {
            return Some((x.t_ms - t0) / 1000.0);
        }
        prev = Some(off);
    }
    None
}

/// Mean time to reach each longitudinal offset bin, over trajectories.
pub fn exploration_curve(trajectories: &[Trajectory], bin_deg: f64) -> Result<ExplorationCurve> {
    if trajectories.is_empty() {
        return Err(Error::InsufficientData("exploration curve needs a trajectory".into()));
    }
    if !(bin_deg > 0.0 && bin_deg <= 180.0) {
        return Err(Error::InvalidParameter(format!("bin width {bin_deg} must lie in (0, 180]")));
    }
    let bins = (180.0 / bin_deg).round() as usize;
    let offsets_deg: Vec<f64> = (0..=bins).map(|k| (k as f64 * bin_deg).min(180.0)).collect();
    let mut raw_mean_time_s = Vec::with_capacity(offsets_deg.len());
    let mut counts = Vec::with_capacity(offsets_deg.len());
    for &d in &offsets_deg {
        let times: Vec<f64> = trajectories.iter().filter_map(|t| first_reach(t, d)).collect();
        counts.push(times.len());
        raw_mean_time_s.push((!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64));
    }
    let reached: Vec<usize> = (0..offsets_deg.len()).filter(|&k| raw_mean_time_s[k].is_some()).collect();
    let values: Vec<f64> = reached.iter().map(|&k| raw_mean_time_s[k].unwrap()).collect();
    let weights: Vec<f64> = reached.iter().map(|&k| counts[k] as f64).collect();
    let raw_violations = values.windows(2).filter(|w| w[1] < w[0]).count();
    let cleaned = isotonic_increasing(&values, &weights);
    let mut mean_time_s = vec![None; offsets_deg.len()];
    for (&k, v) in reached.iter().zip(cleaned) {
        mean_time_s[k] = Some(v);
    }
    Ok(ExplorationCurve {
        offsets_deg,
        mean_time_s,
        raw_mean_time_s,
        counts,
        raw_violations,
    })
}
