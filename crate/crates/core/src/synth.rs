//! Synthetic trajectories and panoramas with known ground truth.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`), whose output stream is
//! fixed by the algorithm, so a seed reproduces the same data on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::salmap::{Normalization, SaliencyMap};
use crate::sphere::{angular_distance, lon_diff, wrap_lon, EquirectGrid, GridDims, Raster, SphericalDir, Vec3};
use crate::trajectory::{Condition, Fixation, HeadPose, Sample, Trajectory, TrajectoryMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedFixation {
    pub lat: f64,
    pub lon: f64,
    pub duration_ms: f64,
    /// Absolute start time; when absent the dwell follows the previous
    /// saccade directly.
    #[serde(default)]
    pub start_ms: Option<f64>,
}

/// Random fixation plan: durations from a clamped normal, latitudes from a
/// normal around the equator, longitudes drifting away from the start at
/// the exploration speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomPlan {
    pub count: usize,
    pub duration_mean_ms: f64,
    pub duration_sd_ms: f64,
    pub min_duration_ms: f64,
    pub lat_sd_deg: f64,
    /// Minimum angle between consecutive targets.
    pub min_step_deg: f64,
}

impl Default for RandomPlan {
    fn default() -> Self {
        Self {
            count: 50,
            duration_mean_ms: 257.0,
            duration_sd_ms: 121.0,
            min_duration_ms: 160.0,
            lat_sd_deg: 15.0,
            min_step_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub rate_hz: f64,
    pub condition: Condition,
    pub start_lon: f64,
    pub plan: Vec<PlannedFixation>,
    /// Used when `plan` is empty.
    pub random: Option<RandomPlan>,
    /// Lower bound: saccades use whole samples, each covering at least
    /// `saccade_speed / rate` degrees.
    pub saccade_speed_deg_s: f64,
    /// Share of head motion the eyes cancel during a dwell (1 = perfect VOR).
    pub vor_fraction: f64,
    /// Head orientation trails the gaze plan by this much.
    pub head_lag_ms: f64,
    pub exploration_speed_deg_s: f64,
    pub gaze_noise_deg: f64,
    pub scene: String,
    pub user: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            rate_hz: 120.0,
            condition: Condition::Vr,
            start_lon: 0.0,
            plan: Vec::new(),
            random: None,
            saccade_speed_deg_s: 300.0,
            vor_fraction: 1.0,
            head_lag_ms: 0.0,
            exploration_speed_deg_s: 10.0,
            gaze_noise_deg: 0.0,
            scene: "synth".into(),
            user: "u0".into(),
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("synth spec: {}", e.message())))
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample rate {} must be positive", self.rate_hz)));
        }
        if !(self.saccade_speed_deg_s > 0.0) {
            return Err(Error::InvalidParameter("saccade speed must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.vor_fraction) {
            return Err(Error::InvalidParameter(format!("VOR fraction {} must lie in [0, 1]", self.vor_fraction)));
        }
        if !(self.head_lag_ms >= 0.0) || !(self.gaze_noise_deg >= 0.0) || !(self.exploration_speed_deg_s >= 0.0) {
            return Err(Error::InvalidParameter(
                "head lag, gaze noise and exploration speed must be >= 0".into(),
            ));
        }
        for p in &self.plan {
            if !(p.duration_ms > 0.0) {
                return Err(Error::InvalidParameter(format!("dwell duration {} must be positive", p.duration_ms)));
            }
            SphericalDir::try_new(p.lat, p.lon)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// One entry per dwell, timed on the sample grid.
    pub fixations: Vec<Fixation>,
    pub head_lag_ms: f64,
    pub vor_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTrajectory {
    pub trajectory: Trajectory,
    pub truth: GroundTruth,
}

/// Dwell on the sample grid: samples `first..=last` sit on `target`.
#[derive(Debug, Clone, Copy)]
struct Dwell {
    target: SphericalDir,
    first: usize,
    last: usize,
}

fn random_plan(spec: &SynthSpec, rp: &RandomPlan, rng: &mut ChaCha8Rng) -> Result<Vec<PlannedFixation>> {
    let dur = Normal::new(rp.duration_mean_ms, rp.duration_sd_ms.max(0.0))
        .map_err(|e| Error::InvalidParameter(format!("duration distribution: {e}")))?;
    let lat = Normal::new(0.0, rp.lat_sd_deg.max(0.0))
        .map_err(|e| Error::InvalidParameter(format!("latitude distribution: {e}")))?;
    let mut plan: Vec<PlannedFixation> = Vec::with_capacity(rp.count);
    let mut t = 0.0;
    let mut side = if rng.random::<bool>() { 1.0 } else { -1.0 };
    for _ in 0..rp.count {
        let duration_ms = dur.sample(rng).max(rp.min_duration_ms);
        let mut target;
        loop {
            let reach = (spec.exploration_speed_deg_s * t / 1000.0).min(180.0);
            let jitter = rng.random_range(-10.0..10.0);
            target = SphericalDir::new(
                lat.sample(rng).clamp(-80.0, 80.0),
                wrap_lon(spec.start_lon + side * reach + jitter),
            );
            let far_enough = plan
                .last()
                .is_none_or(|p| angular_distance(SphericalDir::new(p.lat, p.lon), target) >= rp.min_step_deg);
            if far_enough {
                break;
            }
        }
        if rng.random::<f64>() < 0.1 {
            side = -side;
        }
        if let Some(p) = plan.last() {
            t += angular_distance(SphericalDir::new(p.lat, p.lon), target) / spec.saccade_speed_deg_s * 1000.0;
        }
        t += duration_ms;
        plan.push(PlannedFixation {
            lat: target.lat,
            lon: target.lon,
            duration_ms,
            start_ms: None,
        });
    }
    Ok(plan)
}

/// Places the plan on the sample grid and checks it for overlaps.
fn schedule(spec: &SynthSpec, plan: &[PlannedFixation]) -> Result<Vec<Dwell>> {
    let dt = 1000.0 / spec.rate_hz;
    let step = spec.saccade_speed_deg_s / spec.rate_hz;
    let mut out: Vec<Dwell> = Vec::with_capacity(plan.len());
    for (i, p) in plan.iter().enumerate() {
        let target = SphericalDir::new(p.lat, p.lon);
        let earliest = match out.last() {
            None => 0,
            Some(prev) => prev.last + saccade_samples(prev.target, target, step),
        };
        let first = match p.start_ms {
            None => earliest,
            Some(s) => {
                let k = (s / dt).round();
                if k < 0.0 || (k as usize) < earliest {
                    return Err(Error::InfeasiblePlan(format!(
                        "dwell {i} starts at {s} ms, before the previous dwell and saccade end ({} ms)",
                        earliest as f64 * dt
                    )));
                }
                k as usize
            }
        };
        let intervals = ((p.duration_ms / dt).round() as usize).max(1);
        out.push(Dwell {
            target,
            first,
            last: first + intervals,
        });
    }
    Ok(out)
}

/// Whole sample intervals for a saccade, each covering at least `step`.
fn saccade_samples(a: SphericalDir, b: SphericalDir, step: f64) -> usize {
    let angle = angular_distance(a, b);
    ((angle / step).floor() as usize).max(1)
}

fn slerp(a: &Vec3, b: &Vec3, t: f64) -> Vec3 {
    let omega = a.dot(b).clamp(-1.0, 1.0).acos();
    if omega < 1e-12 {
        return *a;
    }
    let s = omega.sin();
    if s < 1e-9 {
        // antipodal: go through an arbitrary perpendicular
        let p = if a.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
        let perp = (p - a * a.dot(&p)).normalize();
        return (a * (std::f64::consts::PI * t).cos() + perp * (std::f64::consts::PI * t).sin()).normalize();
    }
    (a * ((1.0 - t) * omega).sin() / s + b * (t * omega).sin() / s).normalize()
}

/// Planned gaze at sample `k` and the dwell it belongs to, if any.
fn plan_at(dwells: &[Dwell], k: usize) -> (SphericalDir, Option<usize>) {
    let i = dwells.partition_point(|d| d.first <= k);
    if i == 0 {
        return (dwells[0].target, None);
    }
    let d = &dwells[i - 1];
    if k <= d.last || i == dwells.len() {
        return (d.target, if k <= d.last { Some(i - 1) } else { None });
    }
    let next = &dwells[i];
    let t = (k - d.last) as f64 / (next.first - d.last) as f64;
    let v = slerp(&d.target.to_vec3(), &next.target.to_vec3(), t);
    (SphericalDir::from_vec3(&v), None)
}

/// Generates a trajectory and its ground truth from a spec.
pub fn gen_trajectory(spec: &SynthSpec) -> Result<SynthTrajectory> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let plan = if spec.plan.is_empty() {
        match &spec.random {
            Some(rp) => random_plan(spec, rp, &mut rng)?,
            None => return Err(Error::InfeasiblePlan("empty fixation plan and no random plan".into())),
        }
    } else {
        spec.plan.clone()
    };
    if plan.is_empty() {
        return Err(Error::InfeasiblePlan("random plan with zero fixations".into()));
    }
    let dwells = schedule(spec, &plan)?;
    let dt = 1000.0 / spec.rate_hz;
    let n = dwells.last().expect("non-empty").last + 1;
    let lag = spec.head_lag_ms / dt;
    let noise = Normal::new(0.0, spec.gaze_noise_deg).expect("validated");

    let planned: Vec<(SphericalDir, Option<usize>)> = (0..n).map(|k| plan_at(&dwells, k)).collect();
    // head follows the plan with a (possibly fractional) sample delay,
    // interpolating longitude along the short way
    let head_at = |k: usize| -> HeadPose {
        let x = k as f64 - lag;
        if x <= 0.0 {
            let d = planned[0].0;
            return HeadPose::new(d.lon, d.lat, 0.0);
        }
        let i = x.floor() as usize;
        let f = x - i as f64;
        let a = planned[i].0;
        let b = planned[(i + 1).min(n - 1)].0;
        HeadPose::new(wrap_lon(a.lon + f * lon_diff(b.lon, a.lon)), a.lat + f * (b.lat - a.lat), 0.0)
    };

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let head = head_at(k);
        let (mut gaze, dwell) = planned[k];
        if let Some(i) = dwell {
            // partial VOR: the gaze follows the share of head motion the eyes
            // do not cancel
            let h0 = head_at(dwells[i].first);
            let f = 1.0 - spec.vor_fraction;
            if f > 0.0 {
                gaze = SphericalDir::new(
                    (gaze.lat + f * (head.lat - h0.lat)).clamp(-90.0, 90.0),
                    gaze.lon + f * lon_diff(head.lon, h0.lon),
                );
            }
        }
        if spec.gaze_noise_deg > 0.0 {
            gaze = SphericalDir::new(
                (gaze.lat + noise.sample(&mut rng)).clamp(-90.0, 90.0),
                gaze.lon + noise.sample(&mut rng),
            );
        }
        samples.push(Sample::from_gaze(k as f64 * dt, head, gaze));
    }

    let fixations = dwells
        .iter()
        .map(|d| {
            let dirs: Vec<Vec3> = samples[d.first..=d.last].iter().map(|s| s.gaze.to_vec3()).collect();
            let centroid = crate::sphere::spherical_centroid(dirs.iter()).map_or(d.target, |v| SphericalDir::from_vec3(&v));
            Fixation {
                t_start_ms: d.first as f64 * dt,
                duration_ms: d.last as f64 * dt - d.first as f64 * dt,
                centroid,
            }
        })
        .collect();

    let meta = TrajectoryMeta {
        scene: spec.scene.clone(),
        user: spec.user.clone(),
        condition: spec.condition,
        start_lon: spec.start_lon,
        rate_hz: spec.rate_hz,
    };
    Ok(SynthTrajectory {
        trajectory: Trajectory::new(meta, samples)?,
        truth: GroundTruth {
            fixations,
            head_lag_ms: spec.head_lag_ms,
            vor_slope: -spec.vor_fraction,
        },
    })
}

/// Generates several specs in parallel; results keep the input order.
pub fn gen_trajectories(specs: &[SynthSpec]) -> Result<Vec<SynthTrajectory>> {
    specs.par_iter().map(gen_trajectory).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blob {
    pub lat: f64,
    pub lon: f64,
    pub sigma_deg: f64,
    pub mass: f64,
}

/// Renders spherical Gaussian blobs (in great-circle distance). The map is
/// the raw mixture with every blob scaled to carry exactly its `mass` over
/// the grid; the panorama is the mixture scaled to `[0, 1]`, grey in three
/// channels. No blobs gives all zeros.
pub fn gen_panorama(blobs: &[Blob], dims: GridDims) -> Result<(EquirectGrid, SaliencyMap)> {
    for b in blobs {
        if !(b.sigma_deg > 0.0) || !(b.mass >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blob sigma {} must be positive and mass {} non-negative",
                b.sigma_deg, b.mass
            )));
        }
        SphericalDir::try_new(b.lat, b.lon)?;
    }
    let dirs: Vec<SphericalDir> = dims.pixel_dirs().collect();
    let mut data = vec![0.0; dims.len()];
    for b in blobs {
        let c = SphericalDir::new(b.lat, b.lon);
        let g: Vec<f64> = dirs
            .par_iter()
            .map(|d| {
                let a = angular_distance(*d, c) / b.sigma_deg;
                (-0.5 * a * a).exp()
            })
            .collect();
        let z = crate::numeric::ksum(g.iter().copied());
        for (o, v) in data.iter_mut().zip(&g) {
            *o += b.mass * v / z;
        }
    }
    let peak = data.iter().fold(0.0f64, |m, v| m.max(*v));
    let pano: Vec<f64> = data
        .iter()
        .flat_map(|v| {
            let x = if peak > 0.0 { v / peak } else { 0.0 };
            [x, x, x]
        })
        .collect();
    let grid = EquirectGrid::new(Raster::new(dims.width, dims.height, 3, pano)?)?;
    Ok((grid, SaliencyMap::new(dims, data, Normalization::RawCounts)?))
}
