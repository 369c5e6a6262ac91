//! Head and gaze trajectories: loading, frame composition, fixation
//! detection and kinematic statistics.
//!
//! Head orientation is given as yaw (`lon`), pitch (`lat`) and roll, applied
//! as `Rz(lon) * Ry(-lat) * Rx(roll)` to head-frame vectors. The head frame
//! looks along `+X` with `+Y` to the left and `+Z` up, so an eye-in-head
//! direction of `(lat 0, lon 0)` is the head's forward direction and positive
//! eye longitude is to the left (toward increasing world longitude), matching
//! the world convention. For desktop sessions the "head" columns carry the
//! interactively placed camera centre.

mod fixations;
mod io;
mod kinematics;

pub use fixations::{
    detect_fixations, filter_start_vicinity, smooth_desktop, Fixation, FixationParams, FixationSet,
};
pub use io::{load_trajectory, read_trajectory, write_trajectory, TrajectoryMeta};
pub use kinematics::{
    angular_velocity, eye_eccentricity, head_gaze_delay, summarize, vor_slope, DelayEstimate, Signal,
    TrajectoryStats, VorFit,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{wrap_lon, SphericalDir, Vec3};

/// Viewing condition of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "vr")]
    Vr,
    #[serde(rename = "vr-seated")]
    VrSeated,
    #[serde(rename = "desktop")]
    Desktop,
}

impl Condition {
    pub fn tag(self) -> &'static str {
        match self {
            Condition::Vr => "vr",
            Condition::VrSeated => "vr-seated",
            Condition::Desktop => "desktop",
        }
    }

    /// Fixation parameters used for this condition.
    pub fn fixation_params(self) -> FixationParams {
        match self {
            Condition::Desktop => FixationParams::desktop(),
            _ => FixationParams::default(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vr" | "vr-standing" => Ok(Condition::Vr),
            "vr-seated" | "seated" => Ok(Condition::VrSeated),
            "desktop" => Ok(Condition::Desktop),
            _ => Err(Error::UnknownCondition(s.to_string())),
        }
    }
}

/// Head orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub lon: f64,
    pub lat: f64,
    pub roll: f64,
}

impl HeadPose {
    pub fn new(lon: f64, lat: f64, roll: f64) -> Self {
        Self {
            lon: wrap_lon(lon),
            lat: lat.clamp(-90.0, 90.0),
            roll: wrap_lon(roll),
        }
    }

    pub fn forward(&self) -> SphericalDir {
        SphericalDir::new(self.lat, self.lon)
    }

    /// World-frame `(forward, left, up)` axes of the head.
    pub fn axes(&self) -> (Vec3, Vec3, Vec3) {
        let (sp, cp) = self.lat.to_radians().sin_cos();
        let (sl, cl) = self.lon.to_radians().sin_cos();
        let (sr, cr) = self.roll.to_radians().sin_cos();
        let f = Vec3::new(cp * cl, cp * sl, sp);
        let l0 = Vec3::new(-sl, cl, 0.0);
        let u0 = Vec3::new(-sp * cl, -sp * sl, cp);
        (f, l0 * cr + u0 * sr, u0 * cr - l0 * sr)
    }
}

/// World gaze from head orientation and eye-in-head direction.
pub fn compose_gaze(head: &HeadPose, eye: SphericalDir) -> SphericalDir {
    let (f, l, u) = head.axes();
    let e = eye.to_vec3();
    SphericalDir::from_vec3(&(f * e.x + l * e.y + u * e.z))
}

/// Eye-in-head direction of a world gaze direction; inverse of
/// [`compose_gaze`].
pub fn eye_in_head(head: &HeadPose, gaze: SphericalDir) -> SphericalDir {
    let (f, l, u) = head.axes();
    let g = gaze.to_vec3();
    SphericalDir::from_vec3(&Vec3::new(g.dot(&f), g.dot(&l), g.dot(&u)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_ms: f64,
    pub head: HeadPose,
    pub gaze: SphericalDir,
    pub eye: SphericalDir,
}

impl Sample {
    /// Sample from head pose and world gaze; eye-in-head is derived.
    pub fn from_gaze(t_ms: f64, head: HeadPose, gaze: SphericalDir) -> Self {
        Self {
            t_ms,
            head,
            gaze,
            eye: eye_in_head(&head, gaze),
        }
    }

    /// Sample from head pose and eye-in-head direction; world gaze is derived.
    pub fn from_eye(t_ms: f64, head: HeadPose, eye: SphericalDir) -> Self {
        Self {
            t_ms,
            head,
            gaze: compose_gaze(&head, eye),
            eye,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta, samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(meta.rate_hz > 0.0 && meta.rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample rate {} must be positive", meta.rate_hz)));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t_ms > w[0].t_ms) {
                return Err(Error::NonMonotoneTime {
                    line: i + 2,
                    t: w[1].t_ms,
                    prev: w[0].t_ms,
                });
            }
        }
        Ok(Self { meta, samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn condition(&self) -> Condition {
        self.meta.condition
    }

    /// Nominal sample period in milliseconds.
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.meta.rate_hz
    }

    pub fn span_ms(&self) -> f64 {
        self.samples[self.samples.len() - 1].t_ms - self.samples[0].t_ms
    }

    /// The same recording with every longitude (head, gaze, start) shifted
    /// by `delta` degrees.
    pub fn rotated_lon(&self, delta: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                t_ms: s.t_ms,
                head: HeadPose::new(s.head.lon + delta, s.head.lat, s.head.roll),
                gaze: s.gaze.rotated_lon(delta),
                eye: s.eye,
            })
            .collect();
        Self {
            meta: TrajectoryMeta {
                start_lon: wrap_lon(self.meta.start_lon + delta),
                ..self.meta.clone()
            },
            samples,
        }
    }
}
