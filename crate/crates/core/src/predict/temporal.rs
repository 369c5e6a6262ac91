use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ExplorationCurve;
use crate::salmap::{normalize, spherical_blur, Normalization, SaliencyMap, DEFAULT_DIMS};
use crate::sphere::{lon_diff, GridDims};
use crate::trajectory::{angular_velocity, Signal, Trajectory};

/// Half of the headset's horizontal field of view (95 degrees).
pub const DEFAULT_INIT_HALF_WIDTH: f64 = 47.5;

/// Reveals the converged map inside a longitudinal window around the start
/// longitude that widens as the exploration curve predicts. Every latitude
/// inside the window is kept. Once the half width reaches 180 the converged
/// map is returned unchanged (renormalised).
pub fn time_dependent(
    converged: &SaliencyMap,
    start_lon: f64,
    t_s: f64,
    curve: &ExplorationCurve,
    init_half_width: f64,
) -> Result<SaliencyMap> {
    if !(t_s >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t_s} must be >= 0")));
    }
    if !(init_half_width >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "initial half width {init_half_width} must be >= 0"
        )));
    }
    let half = init_half_width + curve.offset_at(t_s);
    if half >= 180.0 {
        return normalize(converged, Normalization::SumOne);
    }
    let dims = converged.dims();
    let active: Vec<bool> = (0..dims.width)
        .map(|c| lon_diff(dims.col_lon(c), start_lon).abs() <= half)
        .collect();
    let data: Vec<f64> = converged
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| if active[i % dims.width] { *v } else { 0.0 })
        .collect();
    normalize(&SaliencyMap::new(dims, data, Normalization::RawCounts)?, Normalization::SumOne)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadSpeed {
    /// Speed of the head longitude only.
    Longitudinal,
    /// Speed along both head axes (longitude scaled by cos latitude).
    Angular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadSalParams {
    pub speed_thresh_deg_s: f64,
    pub blur_deg: f64,
    pub speed: HeadSpeed,
    /// Skip samples until the gaze first leaves the start vicinity.
    pub exclude_start_vicinity: bool,
    pub vicinity_deg: f64,
    pub dims: GridDims,
}

impl Default for HeadSalParams {
    fn default() -> Self {
        Self {
            speed_thresh_deg_s: 19.6,
            blur_deg: 11.7,
            speed: HeadSpeed::Longitudinal,
            exclude_start_vicinity: true,
            vicinity_deg: 20.0,
            dims: DEFAULT_DIMS,
        }
    }
}

/// Saliency from head orientation alone: counts head-forward directions of
/// samples whose head speed is under the threshold, blurs and normalises.
pub fn head_saliency(trajectories: &[Trajectory], params: &HeadSalParams) -> Result<SaliencyMap> {
    if !(params.speed_thresh_deg_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "speed threshold {} must be positive",
            params.speed_thresh_deg_s
        )));
    }
    let dims = params.dims;
    let mut counts = vec![0.0; dims.len()];
    for traj in trajectories {
        let samples = traj.samples();
        let lon_v = angular_velocity(traj, Signal::HeadLon);
        let speed: Vec<f64> = match params.speed {
            HeadSpeed::Longitudinal => lon_v.iter().map(|v| v.abs()).collect(),
            HeadSpeed::Angular => {
                let lat_v = angular_velocity(traj, Signal::HeadLat);
                samples
                    .iter()
                    .zip(lon_v.iter().zip(&lat_v))
                    .map(|(s, (a, b))| (a * s.head.lat.to_radians().cos()).hypot(*b))
                    .collect()
            }
        };
        let first = if params.exclude_start_vicinity {
            let start = traj.meta.start_lon;
            match samples
                .iter()
                .position(|s| lon_diff(s.gaze.lon, start).abs() > params.vicinity_deg)
            {
                Some(k) => k,
                None => continue,
            }
        } else {
            0
        };
        for (s, v) in samples[first..].iter().zip(&speed[first..]) {
            if *v < params.speed_thresh_deg_s {
                let (c, r) = dims.dir_to_pixel(s.head.forward());
                counts[dims.index(c, r)] += 1.0;
            }
        }
    }
    if counts.iter().all(|c| *c == 0.0) {
        return Err(Error::NoQualifyingSamples(format!(
            "no head samples slower than {} deg/s",
            params.speed_thresh_deg_s
        )));
    }
    let raw = SaliencyMap::new(dims, counts, Normalization::RawCounts)?;
    let blurred = if params.blur_deg > 0.0 { spherical_blur(&raw, params.blur_deg)? } else { raw };
    normalize(&blurred, Normalization::SumOne)
}
