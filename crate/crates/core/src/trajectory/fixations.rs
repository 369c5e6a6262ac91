use serde::{Deserialize, Serialize};

use super::{Condition, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::sphere::{lon_diff, spherical_centroid, vec_angle, SphericalDir, Vec3};

/// A detected gaze dwell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub t_start_ms: f64,
    pub duration_ms: f64,
    pub centroid: SphericalDir,
}

impl Fixation {
    pub fn t_end_ms(&self) -> f64 {
        self.t_start_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationParams {
    pub min_duration_ms: f64,
    pub max_dispersion_deg: f64,
    /// A sample interval longer than this many nominal periods is a dropout
    /// and breaks any open window.
    pub gap_factor: f64,
}

impl Default for FixationParams {
    fn default() -> Self {
        Self {
            min_duration_ms: 150.0,
            max_dispersion_deg: 1.0,
            gap_factor: 2.0,
        }
    }
}

impl FixationParams {
    pub fn desktop() -> Self {
        Self {
            max_dispersion_deg: 2.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationSet {
    pub fixations: Vec<Fixation>,
    /// Set when the whole trajectory spans less than the minimum duration.
    pub too_short: bool,
}

/// Largest angle between the centroid of `vecs` and any member.
fn dispersion(vecs: &[Vec3]) -> f64 {
    match spherical_centroid(vecs) {
        Some(c) => vecs.iter().map(|v| vec_angle(v, &c)).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Dispersion-threshold identification on the sphere.
///
/// Starting from the earliest unused sample, the shortest window spanning
/// `min_duration_ms` is tested; if its dispersion is within bounds and it
/// contains no dropout it is grown one sample at a time until the next
/// sample would violate either condition, and emitted. Otherwise the start
/// advances by one sample.
pub fn detect_fixations(traj: &Trajectory, params: &FixationParams) -> Result<FixationSet> {
    if !(params.min_duration_ms >= 0.0 && params.max_dispersion_deg > 0.0 && params.gap_factor > 0.0) {
        return Err(Error::InvalidParameter(format!("bad fixation parameters {params:?}")));
    }
    let samples = traj.samples();
    let n = samples.len();
    let too_short = traj.span_ms() < params.min_duration_ms;
    let max_gap = params.gap_factor * traj.period_ms();
    let vecs: Vec<Vec3> = samples.iter().map(|s| s.gaze.to_vec3()).collect();
    // gaps_before[k] = number of dropouts between samples 0..=k
    let mut gaps_before = vec![0usize; n];
    for k in 1..n {
        let gap = samples[k].t_ms - samples[k - 1].t_ms > max_gap;
        gaps_before[k] = gaps_before[k - 1] + gap as usize;
    }
    let has_gap = |i: usize, j: usize| gaps_before[j] != gaps_before[i];

    let mut fixations = Vec::new();
    let mut i = 0;
    while i < n {
        let Some(mut j) = (i..n).find(|&j| samples[j].t_ms - samples[i].t_ms >= params.min_duration_ms) else {
            break;
        };
        if has_gap(i, j) || dispersion(&vecs[i..=j]) > params.max_dispersion_deg {
            i += 1;
            continue;
        }
        while j + 1 < n && !has_gap(j, j + 1) && dispersion(&vecs[i..=j + 1]) <= params.max_dispersion_deg {
            j += 1;
        }
        let centroid = spherical_centroid(&vecs[i..=j]).expect("dispersion bound implies a non-degenerate mean");
        fixations.push(Fixation {
            t_start_ms: samples[i].t_ms,
            duration_ms: samples[j].t_ms - samples[i].t_ms,
            centroid: SphericalDir::from_vec3(&centroid),
        });
        i = j + 1;
    }
    Ok(FixationSet { fixations, too_short })
}

/// Running mean of the last `window` gaze unit vectors, renormalised. Only
/// positions with a full window are kept, so the output is `window - 1`
/// samples shorter; each output keeps the timestamp and head pose of the
/// newest sample in its window.
pub fn smooth_desktop(traj: &Trajectory, window: usize) -> Result<Trajectory> {
    if window < 1 {
        return Err(Error::InvalidParameter("smoothing window must be >= 1".into()));
    }
    if traj.condition() != Condition::Desktop {
        return Err(Error::InvalidParameter(format!(
            "desktop smoothing applied to a {} trajectory",
            traj.condition()
        )));
    }
    let samples = traj.samples();
    let vecs: Vec<Vec3> = samples.iter().map(|s| s.gaze.to_vec3()).collect();
    let out = (window - 1..samples.len())
        .map(|k| {
            let mean = spherical_centroid(&vecs[k + 1 - window..=k]).ok_or_else(|| {
                Error::InvalidParameter(format!("antipodal gaze samples cancel at t = {} ms", samples[k].t_ms))
            })?;
            Ok(Sample::from_gaze(samples[k].t_ms, samples[k].head, SphericalDir::from_vec3(&mean)))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(traj.meta.clone(), out)
}

/// Drops every fixation before the first one whose centroid is more than
/// `vicinity_deg` of longitude away from `start_lon`.
pub fn filter_start_vicinity(fixations: &[Fixation], start_lon: f64, vicinity_deg: f64) -> Vec<Fixation> {
    match fixations
        .iter()
        .position(|f| lon_diff(f.centroid.lon, start_lon).abs() > vicinity_deg)
    {
        Some(k) => fixations[k..].to_vec(),
        None => Vec::new(),
    }
}
