//! Run configuration: every subcommand's flags, also readable from and
//! written to TOML. Echoed configs are complete, so config files list every
//! key; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgAction, ArgGroup, Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use omnisal::predict::HeadSpeed;

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunConfig {
    /// Detect fixations in trajectory logs.
    Fixations(FixationsCfg),
    /// Ground-truth saliency map from the trajectories of one scene.
    Salmap(SalmapCfg),
    /// Fit the latitudinal equator bias to saliency maps.
    BiasFit(BiasFitCfg),
    /// Per-user behavioural metrics against a saliency map.
    Metrics(MetricsCfg),
    /// Leave-one-out inter-observer congruency ROC.
    Congruency(CongruencyCfg),
    /// Entropy of saliency maps.
    Entropy(EntropyCfg),
    /// Mean time to reach each longitudinal offset from the start.
    ExploreCurve(ExploreCurveCfg),
    /// Saliency prediction for a panorama.
    Predict(PredictCfg),
    /// Time-dependent saliency from a converged map and an exploration curve.
    Timedep(TimedepCfg),
    /// Saliency from slow head orientations.
    Headsal(HeadsalCfg),
    /// Longitudinal alignment of two cut maps.
    AlignCut(AlignCutCfg),
    /// Most salient gnomonic thumbnail of a panorama.
    Thumbnail(ThumbnailCfg),
    /// Viewport path over a sequence of frame saliency maps.
    Synopsis(SynopsisCfg),
    /// Saliency-guided raw-pixel compression.
    Compress(CompressCfg),
    /// Synthetic trajectories (and optionally a panorama) with ground truth.
    Synth(SynthCfg),
}

impl RunConfig {
    /// Makes every input path absolute so an echoed config replays from any
    /// working directory.
    pub fn absolutize(mut self) -> Result<Self> {
        match &mut self {
            Self::Fixations(c) => abs_all(&mut c.inputs)?,
            Self::Salmap(c) => abs_all(&mut c.inputs)?,
            Self::BiasFit(c) => abs_all(&mut c.maps)?,
            Self::Metrics(c) => {
                abs(&mut c.map)?;
                abs_all(&mut c.inputs)?;
            }
            Self::Congruency(c) => abs_all(&mut c.inputs)?,
            Self::Entropy(c) => abs_all(&mut c.maps)?,
            Self::ExploreCurve(c) => abs_all(&mut c.inputs)?,
            Self::Predict(c) => {
                for p in [&mut c.pano, &mut c.manifest, &mut c.import, &mut c.bias, &mut c.ground_truth] {
                    abs_opt(p)?;
                }
            }
            Self::Timedep(c) => {
                abs(&mut c.converged)?;
                abs(&mut c.curve)?;
            }
            Self::Headsal(c) => {
                abs_all(&mut c.inputs)?;
                abs_opt(&mut c.ground_truth)?;
            }
            Self::AlignCut(c) => {
                abs(&mut c.before)?;
                abs(&mut c.after)?;
            }
            Self::Thumbnail(c) => {
                abs(&mut c.sal)?;
                abs(&mut c.pano)?;
            }
            Self::Synopsis(c) => {
                abs_all(&mut c.frames)?;
                abs_all(&mut c.panos)?;
            }
            Self::Compress(c) => {
                abs(&mut c.pano)?;
                abs(&mut c.sal)?;
            }
            Self::Synth(c) => {
                abs_opt(&mut c.spec)?;
                abs_opt(&mut c.blobs)?;
            }
        }
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fixations(_) => "fixations",
            Self::Salmap(_) => "salmap",
            Self::BiasFit(_) => "bias-fit",
            Self::Metrics(_) => "metrics",
            Self::Congruency(_) => "congruency",
            Self::Entropy(_) => "entropy",
            Self::ExploreCurve(_) => "explore-curve",
            Self::Predict(_) => "predict",
            Self::Timedep(_) => "timedep",
            Self::Headsal(_) => "headsal",
            Self::AlignCut(_) => "align-cut",
            Self::Thumbnail(_) => "thumbnail",
            Self::Synopsis(_) => "synopsis",
            Self::Compress(_) => "compress",
            Self::Synth(_) => "synth",
        }
    }
}

fn abs(p: &mut PathBuf) -> Result<()> {
    *p = std::path::absolute(Path::new(p)).with_context(|| format!("resolving {}", p.display()))?;
    Ok(())
}

fn abs_all(ps: &mut [PathBuf]) -> Result<()> {
    ps.iter_mut().try_for_each(abs)
}

fn abs_opt(p: &mut Option<PathBuf>) -> Result<()> {
    p.as_mut().map_or(Ok(()), abs)
}

/// Fixation detection settings shared by commands that start from logs.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectCfg {
    /// Minimum fixation duration (default: per condition).
    #[arg(long)]
    pub min_duration_ms: Option<f64>,
    /// Maximum dispersion (default: per condition).
    #[arg(long)]
    pub max_dispersion_deg: Option<f64>,
    /// Running-mean window applied to desktop logs before detection.
    #[arg(long)]
    pub desktop_smooth: Option<usize>,
    /// Keep fixations before the gaze leaves the start vicinity.
    #[arg(long = "keep-start-vicinity", action = ArgAction::SetFalse)]
    pub exclude_start_vicinity: bool,
    #[arg(long, default_value_t = 20.0)]
    pub vicinity_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixationsCfg {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub detect: DetectCfg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SalmapCfg {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub detect: DetectCfg,
    /// Map width; height is half of it.
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long, default_value_t = 1.0)]
    pub blur_sigma_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasFitCfg {
    /// Saliency maps (PFM); the fit uses their mean.
    #[arg(required = true)]
    pub maps: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsCfg {
    /// Reference (converged) saliency map.
    #[arg(long)]
    pub map: PathBuf,
    /// Trajectory logs, one per user.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub detect: DetectCfg,
    #[arg(long, default_value_t = 5.0)]
    pub top_percent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step_s: f64,
    #[arg(long, default_value_t = 30.0)]
    pub horizon_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub blur_sigma_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongruencyCfg {
    /// Trajectory logs of one scene, one per user (at least two).
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub detect: DetectCfg,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long, default_value_t = 1.0)]
    pub blur_sigma_deg: f64,
    /// Top-percent thresholds (default 1..100).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyCfg {
    #[arg(required = true)]
    pub maps: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreCurveCfg {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    pub bin_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Equirect,
    Cubemap,
    Patch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagArg {
    Equirect,
    CubemapFaces,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(group(ArgGroup::new("source").required(true).args(["pano", "manifest", "import"])))]
pub struct PredictCfg {
    /// Panorama to run the built-in predictor on (or to export units from).
    #[arg(long, conflicts_with_all = ["manifest", "import"])]
    pub pano: Option<PathBuf>,
    /// Stitch the outputs of an external predictor listed in a manifest.
    #[arg(long, conflicts_with = "import")]
    pub manifest: Option<PathBuf>,
    /// Import a precomputed saliency image.
    #[arg(long)]
    pub import: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TagArg::Equirect)]
    pub import_tag: TagArg,
    /// Write the projection units and a manifest instead of predicting.
    #[arg(long, requires = "pano")]
    pub export_units: bool,
    #[arg(long, value_enum, default_value_t = StrategyKind::Patch)]
    pub strategy: StrategyKind,
    /// Cube face side (default: panorama width / 4).
    #[arg(long)]
    pub face_res: Option<usize>,
    #[arg(long, default_value_t = 90.0)]
    pub fov_deg: f64,
    #[arg(long, default_value_t = 30.0)]
    pub overlap_deg: f64,
    #[arg(long, default_value_t = 256)]
    pub patch_res: usize,
    /// Equator bias file written by bias-fit.
    #[arg(long)]
    pub bias: Option<PathBuf>,
    /// Apply the default equator bias when no bias file is given.
    #[arg(long)]
    pub equator_bias: bool,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    /// Ground-truth map to score the prediction against.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedepCfg {
    #[arg(long)]
    pub converged: PathBuf,
    /// Exploration curve JSON written by explore-curve.
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub start_lon: f64,
    /// Times in seconds.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0])]
    pub times: Vec<f64>,
    #[arg(long, default_value_t = omnisal::predict::DEFAULT_INIT_HALF_WIDTH)]
    pub init_half_width_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedArg {
    Longitudinal,
    Angular,
}

impl From<SpeedArg> for HeadSpeed {
    fn from(s: SpeedArg) -> Self {
        match s {
            SpeedArg::Longitudinal => HeadSpeed::Longitudinal,
            SpeedArg::Angular => HeadSpeed::Angular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadsalCfg {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 19.6)]
    pub speed_thresh_deg_s: f64,
    #[arg(long, default_value_t = 11.7)]
    pub blur_deg: f64,
    #[arg(long, value_enum, default_value_t = SpeedArg::Longitudinal)]
    pub speed: SpeedArg,
    #[arg(long = "keep-start-vicinity", action = ArgAction::SetFalse)]
    pub exclude_start_vicinity: bool,
    #[arg(long, default_value_t = 20.0)]
    pub vicinity_deg: f64,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignCutCfg {
    /// Map of the last frame before the cut.
    #[arg(long)]
    pub before: PathBuf,
    /// Map of the first frame after the cut.
    #[arg(long)]
    pub after: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSearchCfg {
    #[arg(long, default_value_t = 90.0)]
    pub fov_deg: f64,
    #[arg(long, default_value_t = 0.25)]
    pub weight_sigma_frac: f64,
    #[arg(long, default_value_t = 2.0)]
    pub step_deg: f64,
    #[arg(long)]
    pub refine: bool,
    #[arg(long, default_value_t = 32)]
    pub score_res: usize,
    #[arg(long, default_value_t = 256)]
    pub render_res: usize,
}

impl From<&WindowSearchCfg> for omnisal::apps::ThumbnailParams {
    fn from(c: &WindowSearchCfg) -> Self {
        Self {
            fov_deg: c.fov_deg,
            weight_sigma_frac: c.weight_sigma_frac,
            step_deg: c.step_deg,
            refine: c.refine,
            score_res: c.score_res,
            render_res: c.render_res,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThumbnailCfg {
    #[arg(long)]
    pub sal: PathBuf,
    #[arg(long)]
    pub pano: PathBuf,
    #[command(flatten)]
    pub search: WindowSearchCfg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynopsisCfg {
    /// Per-frame saliency maps in frame order.
    #[arg(required = true)]
    pub frames: Vec<PathBuf>,
    /// Keyframe stride in frames.
    #[arg(long)]
    pub stride: usize,
    #[arg(long)]
    pub neighborhood_deg: f64,
    /// Panorama frames to render keyframe views from (same count as maps).
    #[arg(long, value_delimiter = ',')]
    pub panos: Vec<PathBuf>,
    #[command(flatten)]
    pub search: WindowSearchCfg,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressCfg {
    #[arg(long)]
    pub pano: PathBuf,
    #[arg(long)]
    pub sal: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub down_factor: usize,
    #[arg(long, default_value_t = 10.0)]
    pub top_percent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub feather_deg: f64,
    /// Write 16-bit PNG instead of 8-bit.
    #[arg(long)]
    pub sixteen_bit: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthCfg {
    /// Synth spec TOML; without it a random plan is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of users; user i gets the base seed plus i.
    #[arg(long, default_value_t = 1)]
    pub users: usize,
    /// Base seed (default: the seed in the --spec file, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixations per user for the random plan (ignored when the --spec file lists a plan).
    #[arg(long)]
    pub fixations: Option<usize>,
    /// Blob list TOML for a panorama and its analytic saliency map.
    #[arg(long)]
    pub blobs: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
}
