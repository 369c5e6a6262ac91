use serde::{Deserialize, Serialize};

use super::{Fixation, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::sphere::{angular_distance, lon_diff, SphericalDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    HeadLon,
    HeadLat,
    GazeLon,
    GazeLat,
    /// Eye-in-head longitude, i.e. gaze relative to the head.
    EyeLon,
    EyeLat,
}

impl Signal {
    fn value(self, s: &Sample) -> f64 {
        match self {
            Signal::HeadLon => s.head.lon,
            Signal::HeadLat => s.head.lat,
            Signal::GazeLon => s.gaze.lon,
            Signal::GazeLat => s.gaze.lat,
            Signal::EyeLon => s.eye.lon,
            Signal::EyeLat => s.eye.lat,
        }
    }

    fn is_longitude(self) -> bool {
        matches!(self, Signal::HeadLon | Signal::GazeLon | Signal::EyeLon)
    }

    fn diff(self, a: f64, b: f64) -> f64 {
        if self.is_longitude() {
            lon_diff(a, b)
        } else {
            a - b
        }
    }
}

/// Angular velocity in degrees per second, by central differences (one-sided
/// at both ends). Longitude differences take the shortest signed angle.
pub fn angular_velocity(traj: &Trajectory, signal: Signal) -> Vec<f64> {
    let s = traj.samples();
    let n = s.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            let d = signal.diff(signal.value(&s[b]), signal.value(&s[a]));
            1000.0 * d / (s[b].t_ms - s[a].t_ms)
        })
        .collect()
}

/// Unwrapped copy of a longitude series (consecutive steps below 180).
fn unwrap_lon(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0];
    out.push(acc);
    for w in values.windows(2) {
        acc += lon_diff(w[1], w[0]);
        out.push(acc);
    }
    out
}

/// Linear interpolation of `(t, v)` onto `t0 + k * dt`.
fn resample_uniform(t: &[f64], v: &[f64], dt: f64) -> Vec<f64> {
    let n = ((t[t.len() - 1] - t[0]) / dt).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let x = t[0] + k as f64 * dt;
        while seg + 2 < t.len() && t[seg + 1] < x {
            seg += 1;
        }
        let a = ((x - t[seg]) / (t[seg + 1] - t[seg])).clamp(0.0, 1.0);
        out.push(v[seg] + a * (v[seg + 1] - v[seg]));
    }
    out
}

/// Second derivative by central differences on a uniform grid (interior only).
fn acceleration(v: &[f64], dt_s: f64) -> Vec<f64> {
    v.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / (dt_s * dt_s)).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// Positive when the head lags the gaze.
    pub lag_ms: f64,
    pub correlation: f64,
}

/// Lag maximising the normalised cross-correlation between gaze and head
/// longitudinal acceleration. Both signals are resampled to the nominal rate
/// first; lags are whole sample periods within `±max_lag_ms`.
pub fn head_gaze_delay(traj: &Trajectory, max_lag_ms: f64) -> Result<DelayEstimate> {
    if traj.span_ms() < 1000.0 {
        return Err(Error::InsufficientData(format!(
            "head-gaze delay needs at least 1 s of data, got {} ms",
            traj.span_ms()
        )));
    }
    if !(max_lag_ms >= 0.0) {
        return Err(Error::InvalidParameter(format!("max lag {max_lag_ms} must be >= 0")));
    }
    let s = traj.samples();
    let t: Vec<f64> = s.iter().map(|x| x.t_ms).collect();
    let dt = traj.period_ms();
    let series = |sig: Signal| {
        let raw: Vec<f64> = s.iter().map(|x| sig.value(x)).collect();
        acceleration(&resample_uniform(&t, &unwrap_lon(&raw), dt), dt / 1000.0)
    };
    let gaze = series(Signal::GazeLon);
    let head = series(Signal::HeadLon);
    // rounding noise on a constant-velocity path is not a signal
    let flat = |v: &[f64]| v.iter().all(|a| a.abs() < 1e-6);
    if flat(&gaze) || flat(&head) {
        return Err(Error::UndefinedCorrelation("constant acceleration series".into()));
    }
    let n = gaze.len();
    let max_lag = ((max_lag_ms / dt).floor() as usize).min(n.saturating_sub(3));

    let mut best: Option<(i64, f64)> = None;
    let mut lags: Vec<i64> = vec![0];
    for l in 1..=max_lag as i64 {
        lags.push(l);
        lags.push(-l);
    }
    for lag in lags {
        // head[k + lag] against gaze[k]
        let (g, h) = if lag >= 0 {
            let l = lag as usize;
            (&gaze[..n - l], &head[l..])
        } else {
            let l = (-lag) as usize;
            (&gaze[l..], &head[..n - l])
        };
        let Some(r) = pearson(g, h) else {
            if lag == 0 {
                return Err(Error::UndefinedCorrelation("constant acceleration series".into()));
            }
            continue;
        };
        // lags are visited by increasing magnitude, so ties keep the smaller one
        if best.is_none_or(|(_, b)| r > b + 1e-12) {
            best = Some((lag, r));
        }
    }
    let (lag, correlation) = best.ok_or_else(|| Error::UndefinedCorrelation("no valid lag".into()))?;
    Ok(DelayEstimate {
        lag_ms: lag as f64 * dt,
        correlation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VorFit {
    pub slope: f64,
    pub intercept: f64,
    pub samples: usize,
}

/// Least-squares slope of eye-in-head longitudinal velocity against head
/// longitudinal velocity over samples inside fixations. Only samples whose
/// neighbours lie in the same fixation are used, so velocities never straddle
/// a saccade.
pub fn vor_slope(traj: &Trajectory, fixations: &[Fixation]) -> Result<VorFit> {
    let s = traj.samples();
    let head_v = angular_velocity(traj, Signal::HeadLon);
    let eye_v = angular_velocity(traj, Signal::EyeLon);
    let inside = |t: f64| fixations.iter().position(|f| t >= f.t_start_ms && t <= f.t_end_ms());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 1..s.len().saturating_sub(1) {
        let here = inside(s[k].t_ms);
        if here.is_some() && inside(s[k - 1].t_ms) == here && inside(s[k + 1].t_ms) == here {
            xs.push(head_v[k]);
            ys.push(eye_v[k]);
        }
    }
    if xs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} fixation samples, at least 10 needed",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::UndefinedCorrelation("head velocity is constant during fixations".into()));
    }
    let slope = sxy / sxx;
    Ok(VorFit {
        slope,
        intercept: my - slope * mx,
        samples: xs.len(),
    })
}

/// Angle between gaze and the head's forward direction, per sample.
pub fn eye_eccentricity(traj: &Trajectory) -> Vec<f64> {
    traj.samples()
        .iter()
        .map(|s| angular_distance(s.eye, SphericalDir::new(0.0, 0.0)))
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Per-trajectory behavioural and kinematic summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub samples: usize,
    pub span_ms: f64,
    pub fixations: usize,
    pub fixation_duration_mean_ms: f64,
    pub fixation_duration_sd_ms: f64,
    pub eye_eccentricity_mean_deg: f64,
    pub eye_eccentricity_sd_deg: f64,
    pub head_lon_speed_mean_deg_s: f64,
    pub gaze_lon_speed_mean_deg_s: f64,
}

pub fn summarize(traj: &Trajectory, fixations: &[Fixation]) -> TrajectoryStats {
    let durations: Vec<f64> = fixations.iter().map(|f| f.duration_ms).collect();
    let (dm, dsd) = mean_sd(&durations);
    let (em, esd) = mean_sd(&eye_eccentricity(traj));
    let speed = |sig| mean_sd(&angular_velocity(traj, sig).iter().map(|v| v.abs()).collect::<Vec<_>>()).0;
    TrajectoryStats {
        samples: traj.len(),
        span_ms: traj.span_ms(),
        fixations: fixations.len(),
        fixation_duration_mean_ms: dm,
        fixation_duration_sd_ms: dsd,
        eye_eccentricity_mean_deg: em,
        eye_eccentricity_sd_deg: esd,
        head_lon_speed_mean_deg_s: speed(Signal::HeadLon),
        gaze_lon_speed_mean_deg_s: speed(Signal::GazeLon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::wrap_lon;
    use crate::trajectory::{detect_fixations, FixationParams, HeadPose, TrajectoryMeta};
    use proptest::prelude::*;

    fn meta(rate_hz: f64) -> TrajectoryMeta {
        TrajectoryMeta {
            rate_hz,
            ..TrajectoryMeta::default()
        }
    }

    fn traj_lon(rate_hz: f64, n: usize, f: impl Fn(f64) -> f64) -> Trajectory {
        let period = 1000.0 / rate_hz;
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * period;
                let lon = f(t / 1000.0);
                Sample::from_gaze(t, HeadPose::new(lon, 0.0, 0.0), SphericalDir::new(0.0, lon))
            })
            .collect();
        Trajectory::new(meta(rate_hz), samples).unwrap()
    }

    #[test]
    fn linear_longitude_has_constant_velocity() {
        let traj = traj_lon(120.0, 500, |t| 10.0 * t);
        for sig in [Signal::HeadLon, Signal::GazeLon] {
            assert!(angular_velocity(&traj, sig).iter().all(|v| (v - 10.0).abs() < 1e-9));
        }
        assert!(angular_velocity(&traj, Signal::EyeLon).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn velocity_across_the_seam() {
        let mut samples = Vec::new();
        for (t, lon) in [(0.0, 179.0), (100.0, -179.0)] {
            samples.push(Sample::from_gaze(t, HeadPose::new(lon, 0.0, 0.0), SphericalDir::new(0.0, lon)));
        }
        let traj = Trajectory::new(meta(10.0), samples).unwrap();
        let v = angular_velocity(&traj, Signal::HeadLon);
        assert!(v.iter().all(|x| (x - 20.0).abs() < 1e-9), "{v:?}");
    }

    #[test]
    fn velocity_matches_analytic_derivative() {
        let f = |t: f64| 40.0 * (1.3 * t).sin() + 15.0 * (0.4 * t).cos();
        let df = |t: f64| 40.0 * 1.3 * (1.3 * t).cos() - 15.0 * 0.4 * (0.4 * t).sin();
        let traj = traj_lon(120.0, 1200, f);
        let v = angular_velocity(&traj, Signal::GazeLon);
        for k in 5..v.len() - 5 {
            let t = traj.samples()[k].t_ms / 1000.0;
            let truth = df(t);
            assert!((v[k] - truth).abs() <= 0.05 * truth.abs().max(1.0), "t {t}: {} vs {truth}", v[k]);
        }
    }

    proptest! {
        #[test]
        fn wrapped_and_unwrapped_velocity_agree(a in -200.0..200.0f64, b in -90.0..90.0f64) {
            let f = |t: f64| a + b * t;
            let wrapped = traj_lon(60.0, 100, |t| wrap_lon(f(t)));
            let unwrapped = traj_lon(60.0, 100, f);
            let va = angular_velocity(&wrapped, Signal::GazeLon);
            let vb = angular_velocity(&unwrapped, Signal::GazeLon);
            for (x, y) in va.iter().zip(&vb) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }

    /// Head follows a smooth random-looking gaze path with a fixed delay.
    fn delayed(delay_ms: f64) -> Trajectory {
        let g = |t: f64| 30.0 * (2.1 * t).sin() + 12.0 * (5.3 * t + 1.0).sin() + 6.0 * (11.7 * t + 2.0).cos();
        let rate = 120.0;
        let samples = (0..1200)
            .map(|k| {
                let t = k as f64 * 1000.0 / rate;
                let head = HeadPose::new(g((t - delay_ms) / 1000.0), 0.0, 0.0);
                Sample::from_gaze(t, head, SphericalDir::new(0.0, g(t / 1000.0)))
            })
            .collect();
        Trajectory::new(meta(rate), samples).unwrap()
    }

    #[test]
    fn recovers_planted_head_delay() {
        let est = head_gaze_delay(&delayed(60.0), 500.0).unwrap();
        assert!((est.lag_ms - 60.0).abs() <= 1000.0 / 120.0, "{est:?}");
        let est = head_gaze_delay(&delayed(0.0), 500.0).unwrap();
        assert_eq!(est.lag_ms, 0.0);
        let est = head_gaze_delay(&delayed(-100.0), 500.0).unwrap();
        assert!((est.lag_ms + 100.0).abs() <= 1000.0 / 120.0, "{est:?}");
    }

    #[test]
    fn delay_errors() {
        let short = traj_lon(120.0, 60, |t| t * t);
        assert!(matches!(head_gaze_delay(&short, 500.0), Err(Error::InsufficientData(_))));
        let linear = traj_lon(120.0, 400, |t| 5.0 * t);
        assert!(matches!(head_gaze_delay(&linear, 500.0), Err(Error::UndefinedCorrelation(_))));
    }

    /// Head sweeps sinusoidally while world gaze holds still on planted
    /// targets.
    fn vor_trial() -> (Trajectory, Vec<Fixation>) {
        let rate = 120.0;
        let mut samples = Vec::new();
        let targets = [(0.0, 10.0), (5.0, 40.0), (-5.0, 70.0), (0.0, 100.0)];
        let mut t = 0.0;
        for (lat, lon) in targets {
            for k in 0..60 {
                let head_lon = lon + 8.0 * (k as f64 * 0.08).sin();
                let head = HeadPose::new(head_lon, 0.0, 0.0);
                samples.push(Sample::from_gaze(t, head, SphericalDir::new(lat, lon)));
                t += 1000.0 / rate;
            }
        }
        let traj = Trajectory::new(meta(rate), samples).unwrap();
        let fix = detect_fixations(&traj, &FixationParams::default()).unwrap().fixations;
        (traj, fix)
    }

    #[test]
    fn perfect_vor_has_unit_negative_slope() {
        let (traj, fix) = vor_trial();
        assert_eq!(fix.len(), 4);
        let fit = vor_slope(&traj, &fix).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn uncompensated_eye_has_zero_slope() {
        let rate = 120.0;
        let samples = (0..240)
            .map(|k| {
                let t = k as f64 * 1000.0 / rate;
                let head = HeadPose::new(0.3 * (k as f64 * 0.05).sin(), 0.0, 0.0);
                Sample::from_eye(t, head, SphericalDir::new(2.0, 3.0))
            })
            .collect();
        let traj = Trajectory::new(meta(rate), samples).unwrap();
        let fix = detect_fixations(&traj, &FixationParams::default()).unwrap().fixations;
        let fit = vor_slope(&traj, &fix).unwrap();
        assert!(fit.slope.abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn partial_compensation_slope() {
        // world gaze moves with 30% of the head motion: eye-in-head velocity is -0.7x head
        let rate = 120.0;
        let samples = (0..240)
            .map(|k| {
                let t = k as f64 * 1000.0 / rate;
                let h = 2.0 * (k as f64 * 0.05).sin();
                Sample::from_gaze(t, HeadPose::new(h, 0.0, 0.0), SphericalDir::new(0.0, 0.3 * h))
            })
            .collect();
        let traj = Trajectory::new(meta(rate), samples).unwrap();
        let fix = detect_fixations(&traj, &FixationParams::default()).unwrap().fixations;
        let fit = vor_slope(&traj, &fix).unwrap();
        assert!((fit.slope + 0.7).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn vor_needs_samples() {
        let traj = traj_lon(120.0, 50, |t| t);
        assert!(matches!(vor_slope(&traj, &[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn eccentricity_of_composed_samples() {
        let samples = vec![
            Sample::from_eye(0.0, HeadPose::new(50.0, 20.0, 10.0), SphericalDir::new(0.0, 12.0)),
            Sample::from_eye(10.0, HeadPose::new(-50.0, -20.0, 0.0), SphericalDir::new(-5.0, 0.0)),
        ];
        let traj = Trajectory::new(meta(100.0), samples).unwrap();
        let e = eye_eccentricity(&traj);
        assert!((e[0] - 12.0).abs() < 1e-9 && (e[1] - 5.0).abs() < 1e-9);
        let stats = summarize(&traj, &[]);
        assert!((stats.eye_eccentricity_mean_deg - 8.5).abs() < 1e-9);
        assert_eq!(stats.fixations, 0);
    }
}
