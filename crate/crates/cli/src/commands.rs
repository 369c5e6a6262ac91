use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use serde_json::json;

use omnisal::apps::{align_cut, blend_alpha, compress, synopsis, thumbnail, CompressParams, SynopsisParams};
use omnisal::bias::{apply_equator_bias, fit_laplace, lat_marginal, EquatorBias};
use omnisal::io::{read_equirect, read_saliency, write_raster, write_saliency};
use omnisal::metrics::{
    congruency_roc, converg_time, default_thresholds, exploration_curve, n_fix, pearson_cc, perc_fix_inside,
    time_to_sr, ConvergParams, ExplorationCurve,
};
use omnisal::predict::external::{export_units, import_saliency, stitch_manifest, ImportTag};
use omnisal::predict::{head_saliency, predict, time_dependent, HeadSalParams, ProjectionStrategy, SpectralResidual};
use omnisal::salmap::{
    accumulate_fixations, entropy, entropy_weighted, mean_map, normalize, spherical_blur, Normalization, SaliencyMap,
    Weighting,
};
use omnisal::sphere::{gnomonic_sample, GridDims, Raster};
use omnisal::synth::{gen_panorama, gen_trajectories, Blob, SynthSpec};
use omnisal::trajectory::{
    detect_fixations, filter_start_vicinity, read_trajectory, smooth_desktop, write_trajectory, Condition, Fixation,
    Trajectory,
};

use crate::config::*;
use crate::report::Report;

pub fn run(cfg: &RunConfig, dir: &Path) -> Result<Report> {
    let mut r = Report::new(cfg.name());
    match cfg {
        RunConfig::Fixations(c) => fixations(c, dir, &mut r)?,
        RunConfig::Salmap(c) => salmap(c, dir, &mut r)?,
        RunConfig::BiasFit(c) => bias_fit(c, dir, &mut r)?,
        RunConfig::Metrics(c) => metrics(c, dir, &mut r)?,
        RunConfig::Congruency(c) => congruency(c, dir, &mut r)?,
        RunConfig::Entropy(c) => entropies(c, &mut r)?,
        RunConfig::ExploreCurve(c) => explore_curve(c, dir, &mut r)?,
        RunConfig::Predict(c) => predict_cmd(c, dir, &mut r)?,
        RunConfig::Timedep(c) => timedep(c, dir, &mut r)?,
        RunConfig::Headsal(c) => headsal(c, dir, &mut r)?,
        RunConfig::AlignCut(c) => align(c, dir, &mut r)?,
        RunConfig::Thumbnail(c) => thumb(c, dir, &mut r)?,
        RunConfig::Synopsis(c) => synopsis_cmd(c, dir, &mut r)?,
        RunConfig::Compress(c) => compress_cmd(c, dir, &mut r)?,
        RunConfig::Synth(c) => synth(c, dir, &mut r)?,
    }
    Ok(r)
}

fn dims(width: usize) -> Result<GridDims> {
    ensure!(width >= 2 && width % 2 == 0, "width {width} must be even and at least 2");
    Ok(GridDims::new(width, width / 2)?)
}

fn load_traj(path: &Path) -> Result<Trajectory> {
    read_trajectory(path).with_context(|| format!("reading trajectory {}", path.display()))
}

fn load_trajs(paths: &[PathBuf]) -> Result<Vec<Trajectory>> {
    paths.iter().map(|p| load_traj(p)).collect()
}

fn load_map(path: &Path) -> Result<SaliencyMap> {
    read_saliency(path).with_context(|| format!("reading saliency map {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

/// Artifact path as recorded in reports: relative to the output directory,
/// so replays into another directory report the same text.
fn rel(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).to_string_lossy().into_owned()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn detect(traj: &Trajectory, c: &DetectCfg, path: &Path) -> Result<Vec<Fixation>> {
    let mut params = traj.condition().fixation_params();
    if let Some(v) = c.min_duration_ms {
        params.min_duration_ms = v;
    }
    if let Some(v) = c.max_dispersion_deg {
        params.max_dispersion_deg = v;
    }
    let smoothed;
    let source = match c.desktop_smooth {
        Some(n) if traj.condition() == Condition::Desktop => {
            smoothed = smooth_desktop(traj, n).with_context(|| format!("smoothing {}", path.display()))?;
            &smoothed
        }
        _ => traj,
    };
    let set = detect_fixations(source, &params).with_context(|| format!("detecting fixations in {}", path.display()))?;
    Ok(if c.exclude_start_vicinity {
        filter_start_vicinity(&set.fixations, traj.meta.start_lon, c.vicinity_deg)
    } else {
        set.fixations
    })
}

fn fixation_map(fix: &[Fixation], dims: GridDims, sigma: f64) -> Result<SaliencyMap> {
    let blurred = spherical_blur(&accumulate_fixations(fix, dims), sigma)?;
    normalize(&blurred, Normalization::SumOne).context("no fixations to build a map from")
}

fn fixations(c: &FixationsCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let out = dir.join("fixations");
    fs::create_dir_all(&out)?;
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for path in &c.inputs {
        let name = stem(path);
        ensure!(seen.insert(name.clone()), "two inputs share the file name {name}");
        let traj = load_traj(path)?;
        let fix = detect(&traj, &c.detect, path)?;
        let mut csv = String::from("t_start_ms,duration_ms,lat,lon\n");
        for f in &fix {
            let _ = writeln!(csv, "{},{},{},{}", f.t_start_ms, f.duration_ms, f.centroid.lat, f.centroid.lon);
        }
        write_text(&out.join(format!("{name}.csv")), &csv)?;
        r.field(&format!("n_fix[{name}]"), fix.len());
        rows.push(json!({ "input": path, "n_fix": fix.len() }));
    }
    r.quiet("inputs", rows);
    Ok(())
}

fn salmap(c: &SalmapCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let dims = dims(c.width)?;
    let mut all = Vec::new();
    let mut per = Vec::new();
    for path in &c.inputs {
        let fix = detect(&load_traj(path)?, &c.detect, path)?;
        per.push(json!({ "input": path, "n_fix": fix.len() }));
        all.extend(fix);
    }
    let map = fixation_map(&all, dims, c.blur_sigma_deg)?;
    let pfm = write_saliency(&dir.join("saliency"), &map, "salmap")?;
    r.quiet("inputs", per);
    r.field("n_fix", all.len());
    r.field("entropy", entropy(&map)?);
    r.field("map", rel(dir, &pfm));
    Ok(())
}

fn bias_fit(c: &BiasFitCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let maps = c.maps.iter().map(|p| load_map(p)).collect::<Result<Vec<_>>>()?;
    let mean = mean_map(&maps)?;
    let profile = lat_marginal(&mean)?;
    let fit = fit_laplace(&profile)?;
    write_text(&dir.join("bias.toml"), &fit.bias.to_toml())?;
    let mut csv = String::from("lat,weight\n");
    for (lat, w) in profile.lats.iter().zip(&profile.weights) {
        let _ = writeln!(csv, "{lat},{w}");
    }
    write_text(&dir.join("profile.csv"), &csv)?;
    r.field("mu", fit.bias.mu).field("beta", fit.bias.beta).field("degenerate", fit.degenerate);
    Ok(())
}

fn metrics(c: &MetricsCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let map = load_map(&c.map)?;
    let mask = omnisal::salmap::salient_mask(&map, c.top_percent)?;
    let params = ConvergParams {
        step_s: c.step_s,
        horizon_s: c.horizon_s,
        blur_sigma_deg: c.blur_sigma_deg,
    };
    let mut csv = String::from("input,n_fix,perc_fix_inside,time_to_sr_s,converg_auc,partial\n");
    let mut rows = Vec::new();
    for path in &c.inputs {
        let traj = load_traj(path)?;
        let fix = detect(&traj, &c.detect, path)?;
        let inside = perc_fix_inside(&fix, &mask).ok();
        let ttsr = time_to_sr(&fix, &mask);
        let conv = converg_time(&fix, traj.span_ms(), &map, &params)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            path.display(),
            n_fix(&fix),
            opt(inside),
            opt(ttsr),
            conv.auc,
            conv.partial
        );
        r.field(&format!("converg_auc[{}]", stem(path)), conv.auc);
        rows.push(json!({
            "input": path,
            "n_fix": n_fix(&fix),
            "perc_fix_inside": inside,
            "time_to_sr_s": ttsr,
            "convergence": conv,
        }));
    }
    write_text(&dir.join("metrics.csv"), &csv)?;
    r.quiet("users", rows);
    Ok(())
}

fn congruency(c: &CongruencyCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let dims = dims(c.width)?;
    let thresholds = if c.thresholds.is_empty() { default_thresholds() } else { c.thresholds.clone() };
    let fix = c
        .inputs
        .iter()
        .map(|p| detect(&load_traj(p)?, &c.detect, p))
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    for (i, path) in c.inputs.iter().enumerate() {
        let others: Vec<Fixation> = fix
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let gt = fixation_map(&others, dims, c.blur_sigma_deg)
            .with_context(|| format!("map of the users other than {}", path.display()))?;
        let roc = congruency_roc(&fix[i], &gt, &thresholds).with_context(|| format!("ROC of {}", path.display()))?;
        r.field(&format!("auc[{}]", stem(path)), roc.auc);
        curves.push(roc);
    }
    let mean_auc = curves.iter().map(|c| c.auc).sum::<f64>() / curves.len() as f64;
    let mut csv = String::from("threshold");
    for p in &c.inputs {
        let _ = write!(csv, ",{}", stem(p));
    }
    csv.push_str(",mean\n");
    for (k, t) in curves[0].thresholds.iter().enumerate() {
        let _ = write!(csv, "{t}");
        let mut sum = 0.0;
        for roc in &curves {
            let _ = write!(csv, ",{}", roc.hit_rates[k]);
            sum += roc.hit_rates[k];
        }
        let _ = writeln!(csv, ",{}", sum / curves.len() as f64);
    }
    write_text(&dir.join("roc.csv"), &csv)?;
    r.field("mean_auc", mean_auc);
    r.quiet("curves", curves);
    Ok(())
}

fn entropies(c: &EntropyCfg, r: &mut Report) -> Result<()> {
    let mut rows = Vec::new();
    for path in &c.maps {
        let m = load_map(path)?;
        let h = entropy(&m).with_context(|| format!("entropy of {}", path.display()))?;
        let hw = entropy_weighted(&m, Weighting::SolidAngle)?;
        r.field(&format!("entropy[{}]", stem(path)), h);
        rows.push(json!({ "map": path, "entropy": h, "entropy_solid_angle": hw }));
    }
    r.quiet("maps", rows);
    Ok(())
}

fn explore_curve(c: &ExploreCurveCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let trajs = load_trajs(&c.inputs)?;
    let curve = exploration_curve(&trajs, c.bin_deg)?;
    write_text(&dir.join("curve.json"), &serde_json::to_string_pretty(&curve)?)?;
    let mut csv = String::from("offset_deg,mean_time_s,count\n");
    for ((d, t), n) in curve.offsets_deg.iter().zip(&curve.mean_time_s).zip(&curve.counts) {
        let _ = writeln!(csv, "{d},{},{n}", t.map_or(String::new(), |v| v.to_string()));
    }
    write_text(&dir.join("curve.csv"), &csv)?;
    r.field("full_exploration_s", curve.full_exploration_s());
    r.field("raw_violations", curve.raw_violations);
    Ok(())
}

fn strategy(c: &PredictCfg) -> ProjectionStrategy {
    match c.strategy {
        StrategyKind::Equirect => ProjectionStrategy::Equirect,
        StrategyKind::Cubemap => ProjectionStrategy::Cubemap { face_res: c.face_res },
        StrategyKind::Patch => ProjectionStrategy::Patch {
            fov_deg: c.fov_deg,
            overlap_deg: c.overlap_deg,
            res: c.patch_res,
        },
    }
}

fn predict_cmd(c: &PredictCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let dims = dims(c.width)?;
    let bias = match (&c.bias, c.equator_bias) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(EquatorBias::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        (None, true) => Some(EquatorBias::default()),
        (None, false) => None,
    };
    let map = if let Some(pano_path) = &c.pano {
        let pano = read_equirect(pano_path).with_context(|| format!("reading panorama {}", pano_path.display()))?;
        if c.export_units {
            let units = dir.join("units");
            let manifest = export_units(&pano, strategy(c), &units)?;
            r.field("manifest", rel(dir, &units.join(omnisal::predict::external::MANIFEST_FILE)));
            r.field("units", manifest.units.len());
            return Ok(());
        }
        let predictor = SpectralResidual::default();
        r.field("predictor", "spectral-residual");
        predict(&pano, &predictor, strategy(c), bias.as_ref(), dims)
            .with_context(|| format!("predicting {}", pano_path.display()))?
    } else if let Some(m) = &c.manifest {
        stitch_manifest(m, dims, bias.as_ref()).with_context(|| format!("stitching {}", m.display()))?
    } else if let Some(p) = &c.import {
        let tag = match c.import_tag {
            TagArg::Equirect => ImportTag::Equirect,
            TagArg::CubemapFaces => ImportTag::CubemapFaces,
        };
        let m = import_saliency(p, tag, dims).with_context(|| format!("importing {}", p.display()))?;
        match &bias {
            Some(b) => apply_equator_bias(&m, b)?,
            None => m,
        }
    } else {
        bail!("one of --pano, --manifest or --import is required");
    };
    r.field("strategy", strategy(c).tag());
    r.field("bias", bias);
    let pfm = write_saliency(&dir.join("saliency"), &map, "predict")?;
    r.field("map", rel(dir, &pfm));
    if let Some(gt) = &c.ground_truth {
        let gt = load_map(gt)?.resample(dims);
        r.field("cc", pearson_cc(&map, &gt)?);
    }
    Ok(())
}

fn timedep(c: &TimedepCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let converged = load_map(&c.converged)?;
    let text = fs::read_to_string(&c.curve).with_context(|| format!("reading {}", c.curve.display()))?;
    let curve: ExplorationCurve =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", c.curve.display()))?;
    let mut rows = Vec::new();
    for (i, &t) in c.times.iter().enumerate() {
        let m = time_dependent(&converged, c.start_lon, t, &curve, c.init_half_width_deg)
            .with_context(|| format!("time-dependent map at t = {t} s"))?;
        let pfm = write_saliency(&dir.join(format!("timedep_{i:03}")), &m, "timedep")?;
        let half = c.init_half_width_deg + curve.offset_at(t);
        r.field(&format!("half_width_deg[t={t}]"), half.min(180.0));
        rows.push(json!({ "t_s": t, "map": rel(dir, &pfm) }));
    }
    r.quiet("maps", rows);
    Ok(())
}

fn headsal(c: &HeadsalCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let trajs = load_trajs(&c.inputs)?;
    let params = HeadSalParams {
        speed_thresh_deg_s: c.speed_thresh_deg_s,
        blur_deg: c.blur_deg,
        speed: c.speed.into(),
        exclude_start_vicinity: c.exclude_start_vicinity,
        vicinity_deg: c.vicinity_deg,
        dims: dims(c.width)?,
    };
    let map = head_saliency(&trajs, &params)?;
    let pfm = write_saliency(&dir.join("saliency"), &map, "headsal")?;
    r.field("map", rel(dir, &pfm));
    if let Some(gt) = &c.ground_truth {
        let gt = load_map(gt)?.resample(map.dims());
        r.field("cc", pearson_cc(&map, &gt)?);
    }
    Ok(())
}

fn align(c: &AlignCutCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let before = load_map(&c.before)?;
    let after = load_map(&c.after)?;
    let a = align_cut(&before, &after)?;
    let mut csv = String::from("shift_deg,cc\n");
    for (s, v) in a.shifts_deg.iter().zip(&a.curve) {
        let _ = writeln!(csv, "{s},{v}");
    }
    write_text(&dir.join("curve.csv"), &csv)?;
    r.field("shift_deg", a.shift_deg).field("shift_cols", a.shift_cols).field("cc", a.cc_at_shift);
    Ok(())
}

fn thumb(c: &ThumbnailCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let sal = load_map(&c.sal)?;
    let pano = read_equirect(&c.pano).with_context(|| format!("reading panorama {}", c.pano.display()))?;
    let t = thumbnail(&sal, &pano, &(&c.search).into())?;
    write_raster(&dir.join("thumbnail.png"), &t.patch, false)?;
    r.field("lat", t.window.center.lat).field("lon", t.window.center.lon).field("score", t.score);
    r.quiet("window", t.window);
    Ok(())
}

fn synopsis_cmd(c: &SynopsisCfg, dir: &Path, r: &mut Report) -> Result<()> {
    ensure!(
        c.panos.is_empty() || c.panos.len() == c.frames.len(),
        "{} panoramas given for {} frames",
        c.panos.len(),
        c.frames.len()
    );
    let frames = c.frames.iter().map(|p| load_map(p)).collect::<Result<Vec<_>>>()?;
    let p = SynopsisParams {
        stride: c.stride,
        neighborhood_deg: c.neighborhood_deg,
        thumbnail: (&c.search).into(),
    };
    let path = synopsis(&frames, &p)?;
    write_text(&dir.join("path.json"), &serde_json::to_string_pretty(&path)?)?;
    let mut csv = String::from("frame,lat,lon,score\n");
    for ((k, d), s) in path.keyframes.iter().zip(&path.centers).zip(&path.scores) {
        let _ = writeln!(csv, "{k},{},{},{s}", d.lat, d.lon);
    }
    write_text(&dir.join("path.csv"), &csv)?;
    if !c.panos.is_empty() {
        for (k, w) in path.keyframes.iter().zip(&path.windows) {
            let pano = read_equirect(&c.panos[*k]).with_context(|| format!("reading panorama {}", c.panos[*k].display()))?;
            let view = gnomonic_sample(&pano, w)?;
            write_raster(&dir.join(format!("view_{k:05}.png")), &view.image, false)?;
        }
    }
    r.field("keyframes", path.keyframes.len());
    Ok(())
}

fn compress_cmd(c: &CompressCfg, dir: &Path, r: &mut Report) -> Result<()> {
    let pano = read_equirect(&c.pano).with_context(|| format!("reading panorama {}", c.pano.display()))?;
    let sal = load_map(&c.sal)?;
    let p = CompressParams {
        down_factor: c.down_factor,
        top_percent: c.top_percent,
        feather_deg: c.feather_deg,
    };
    let (out, stats) = compress(&pano, &sal, &p)?;
    write_raster(&dir.join("compressed.png"), out.raster(), c.sixteen_bit)?;
    let d = pano.dims();
    let alpha = blend_alpha(&sal, d, c.top_percent, c.feather_deg)?;
    write_raster(&dir.join("mask.png"), &Raster::new(d.width, d.height, 1, alpha)?, false)?;
    r.field("retention_ratio", stats.retention_ratio);
    r.field("per_area_retention_ratio", stats.per_area_retention_ratio);
    r.field("claimed_retention_ratio", stats.claimed_retention_ratio);
    r.field("note", &stats.note);
    r.quiet("stats", stats);
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlobFile {
    blob: Vec<Blob>,
}

fn synth(c: &SynthCfg, dir: &Path, r: &mut Report) -> Result<()> {
    ensure!(c.users >= 1, "at least one user is required");
    let mut base = match &c.spec {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthSpec::from_toml(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    if base.plan.is_empty() {
        let mut plan = base.random.unwrap_or_default();
        if let Some(n) = c.fixations {
            plan.count = n;
        }
        base.random = Some(plan);
    }
    let seed = c.seed.unwrap_or(base.seed);
    let specs: Vec<SynthSpec> = (0..c.users)
        .map(|i| SynthSpec {
            seed: seed.wrapping_add(i as u64),
            user: format!("u{i}"),
            ..base.clone()
        })
        .collect();
    let generated = gen_trajectories(&specs)?;
    let tdir = dir.join("trajectories");
    let gdir = dir.join("truth");
    fs::create_dir_all(&tdir)?;
    fs::create_dir_all(&gdir)?;
    for (s, g) in specs.iter().zip(&generated) {
        let path = tdir.join(format!("{}.csv", s.user));
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trajectory(&g.trajectory, BufWriter::new(f))?;
        write_text(&gdir.join(format!("{}.json", s.user)), &serde_json::to_string_pretty(&g.truth)?)?;
    }
    r.field("users", c.users);
    r.field("seed", seed);
    r.field("n_fix", generated.iter().map(|g| g.truth.fixations.len()).sum::<usize>());
    if let Some(p) = &c.blobs {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let blobs: BlobFile = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        let (pano, map) = gen_panorama(&blobs.blob, dims(c.width)?)?;
        write_raster(&dir.join("pano.png"), pano.raster(), true)?;
        r.field("map", rel(dir, &write_saliency(&dir.join("saliency"), &map, "synth")?));
    }
    Ok(())
}
