//! Trajectory log format.
//!
//! ```text
//! # scene = "plaza"
//! # user = "u07"
//! # condition = "vr"
//! # start_lon = 0.0
//! # rate_hz = 120.0
//! t_ms,head_lon,head_lat,head_roll,gaze_lon,gaze_lat,eye_lon,eye_lat
//! 0.0,0.0,0.0,0.0,1.5,-2.0,1.5,-2.0
//! ```
//!
//! The `#` block is TOML. Either the world gaze columns or the eye-in-head
//! columns (or both) must be present; when only eye-in-head is given the
//! world gaze is composed from the head pose. Rows whose gaze fields are empty
//! are tracker dropouts and are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, HeadPose, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::sphere::SphericalDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scene: String,
    pub user: String,
    pub condition: Condition,
    pub start_lon: f64,
    pub rate_hz: f64,
}

impl Default for TrajectoryMeta {
    fn default() -> Self {
        Self {
            scene: String::new(),
            user: String::new(),
            condition: Condition::Vr,
            start_lon: 0.0,
            rate_hz: 120.0,
        }
    }
}

#[derive(Deserialize)]
struct RawMeta {
    #[serde(default)]
    scene: String,
    #[serde(default)]
    user: String,
    condition: String,
    #[serde(default)]
    start_lon: f64,
    rate_hz: Option<f64>,
}

struct Columns {
    t: usize,
    head: [usize; 3],
    gaze: Option<[usize; 2]>,
    eye: Option<[usize; 2]>,
}

impl Columns {
    fn locate(headers: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        let pair = |a: &str, b: &str| -> Result<Option<[usize; 2]>> {
            match (find(a), find(b)) {
                (Some(x), Some(y)) => Ok(Some([x, y])),
                (None, None) => Ok(None),
                (None, _) => Err(Error::MissingColumn(a.to_string())),
                (_, None) => Err(Error::MissingColumn(b.to_string())),
            }
        };
        let cols = Columns {
            t: need("t_ms")?,
            head: [need("head_lon")?, need("head_lat")?, need("head_roll")?],
            gaze: pair("gaze_lon", "gaze_lat")?,
            eye: pair("eye_lon", "eye_lat")?,
        };
        if cols.gaze.is_none() && cols.eye.is_none() {
            return Err(Error::MissingColumn("gaze_lon".into()));
        }
        Ok(cols)
    }
}

fn field(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<Option<f64>> {
    let raw = rec.get(idx).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value `{raw}`"),
        });
    }
    Ok(Some(v))
}

fn required(rec: &csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<f64> {
    field(rec, idx, line)?.ok_or_else(|| Error::Parse {
        line,
        msg: format!("empty `{name}`"),
    })
}

fn latitude(v: f64, line: usize) -> Result<f64> {
    if (-90.0..=90.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Parse {
            line,
            msg: format!("latitude {v} outside [-90, 90]"),
        })
    }
}

fn dir_from(rec: &csv::StringRecord, cols: Option<[usize; 2]>, line: usize) -> Result<Option<SphericalDir>> {
    let Some([ilon, ilat]) = cols else {
        return Ok(None);
    };
    match (field(rec, ilon, line)?, field(rec, ilat, line)?) {
        (Some(lon), Some(lat)) => Ok(Some(SphericalDir::new(latitude(lat, line)?, lon))),
        (None, None) => Ok(None),
        _ => Err(Error::Parse {
            line,
            msg: "gaze longitude and latitude must both be present or both empty".into(),
        }),
    }
}

/// Parses a trajectory log from any reader.
pub fn load_trajectory<R: Read>(reader: R) -> Result<Trajectory> {
    let mut header = String::new();
    let mut body = String::new();
    let mut header_lines = 0usize;
    let mut in_header = true;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if in_header && line.trim_start().starts_with('#') {
            let text = line.trim_start().trim_start_matches('#');
            header.push_str(text.strip_prefix(' ').unwrap_or(text));
            header.push('\n');
            header_lines += 1;
        } else {
            in_header = false;
            body.push_str(&line);
            body.push('\n');
        }
    }

    let raw: RawMeta = toml::from_str(&header).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("metadata block: {}", e.message()),
    })?;
    let condition: Condition = raw.condition.parse()?;

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: header_lines + 1,
            msg: e.to_string(),
        })?
        .clone();
    let cols = Columns::locate(&headers)?;

    let mut samples: Vec<Sample> = Vec::new();
    let mut prev_t: Option<f64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: header_lines + e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = header_lines + rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let t = required(&rec, cols.t, line, "t_ms")?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(Error::NonMonotoneTime { line, t, prev: p });
            }
        }
        prev_t = Some(t);
        let head = HeadPose::new(
            required(&rec, cols.head[0], line, "head_lon")?,
            latitude(required(&rec, cols.head[1], line, "head_lat")?, line)?,
            required(&rec, cols.head[2], line, "head_roll")?,
        );
        let gaze = dir_from(&rec, cols.gaze, line)?;
        let eye = dir_from(&rec, cols.eye, line)?;
        let sample = match (gaze, eye) {
            (Some(g), Some(e)) => Sample {
                t_ms: t,
                head,
                gaze: g,
                eye: e,
            },
            (Some(g), None) => Sample::from_gaze(t, head, g),
            (None, Some(e)) => Sample::from_eye(t, head, e),
            (None, None) => continue,
        };
        samples.push(sample);
    }

    let rate_hz = match raw.rate_hz {
        Some(r) => r,
        None => infer_rate(&samples)?,
    };
    Trajectory::new(
        TrajectoryMeta {
            scene: raw.scene,
            user: raw.user,
            condition,
            start_lon: raw.start_lon,
            rate_hz,
        },
        samples,
    )
}

/// Rate from the median sample interval.
fn infer_rate(samples: &[Sample]) -> Result<f64> {
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].t_ms - w[0].t_ms).collect();
    if dts.is_empty() {
        return Err(Error::InsufficientData("cannot infer sample rate from fewer than 2 samples".into()));
    }
    dts.sort_by(f64::total_cmp);
    Ok(1000.0 / dts[dts.len() / 2])
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_trajectory(file)
}

/// Writes a trajectory in the log format, including eye-in-head columns.
pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<trajectory>", e);
    let meta = toml::to_string(&traj.meta).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    for line in meta.lines() {
        writeln!(out, "# {line}").map_err(io)?;
    }
    writeln!(out, "t_ms,head_lon,head_lat,head_roll,gaze_lon,gaze_lat,eye_lon,eye_lat").map_err(io)?;
    for s in traj.samples() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.t_ms, s.head.lon, s.head.lat, s.head.roll, s.gaze.lon, s.gaze.lat, s.eye.lon, s.eye.lat
        )
        .map_err(io)?;
    }
    Ok(())
}
