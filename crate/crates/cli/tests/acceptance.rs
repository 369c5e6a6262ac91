//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Criterion 16 runs only when `OMNISAL_DATASET` points at a
//! recorded dataset (see README).

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use omnisal::apps::{align_cut, blend_alpha, compress, down_up, thumbnail, CompressParams, ThumbnailParams};
use omnisal::bias::{fit_laplace, LatProfile};
use omnisal::metrics::{congruency_roc, default_thresholds, pearson_cc, ExplorationCurve};
use omnisal::predict::{head_saliency, time_dependent, ConstantPredictor, HeadSalParams, PlanarPredictor};
use omnisal::predict::{ProjectionStrategy, UnitPlan, DEFAULT_INIT_HALF_WIDTH};
use omnisal::salmap::{entropy, spherical_blur, Normalization, SaliencyMap};
use omnisal::sphere::{angular_distance, equirect_to_cubemap, cubemap_to_equirect, lon_diff, EquirectGrid, GridDims};
use omnisal::sphere::SphericalDir;
use omnisal::synth::{gen_panorama, gen_trajectories, Blob, PlannedFixation, RandomPlan, SynthSpec};
use omnisal::trajectory::{detect_fixations, Condition, Fixation, HeadPose, Sample, Trajectory, TrajectoryMeta};
use omnisal::Error;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn map(dims: GridDims, data: Vec<f64>) -> SaliencyMap {
    SaliencyMap::new(dims, data, Normalization::RawCounts).unwrap()
}

fn blob_map(dims: GridDims, blobs: &[Blob]) -> SaliencyMap {
    gen_panorama(blobs, dims).unwrap().1
}

fn random_blobs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Blob> {
    (0..n)
        .map(|_| Blob {
            lat: rng.random_range(-60.0..60.0),
            lon: rng.random_range(-180.0..180.0),
            sigma_deg: rng.random_range(5.0..15.0),
            mass: rng.random_range(0.5..2.0),
        })
        .collect()
}

// -- 1 ---------------------------------------------------------------------

fn c1_pearson() -> Outcome {
    let start = Instant::now();
    let dims = GridDims::new(512, 256).unwrap();
    assert_eq!(dims.len(), 1 << 17);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>()).collect();
    let neg: Vec<f64> = a.iter().map(|v| 3.0 - 2.0 * v).collect();
    let (a, b, neg) = (map(dims, a), map(dims, b), map(dims, neg));
    let self_cc = pearson_cc(&a, &a).unwrap();
    let neg_cc = pearson_cc(&a, &neg).unwrap();
    let ind = pearson_cc(&a, &b).unwrap();
    let took = start.elapsed();
    check!((self_cc - 1.0).abs() <= 1e-9, "self CC {self_cc}");
    check!((neg_cc + 1.0).abs() <= 1e-9, "negated CC {neg_cc}");
    check!(ind.abs() < 0.02, "independent CC {ind}");
    check!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("self {self_cc:.12}, negated {neg_cc:.12}, independent {ind:.4}, {took:.2?}"))
}

// -- 2 ---------------------------------------------------------------------

type V3 = [f64; 3];

fn unit(d: SphericalDir) -> V3 {
    let (la, lo) = (d.lat.to_radians(), d.lon.to_radians());
    [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
}

fn angle_deg(a: &V3, b: &V3) -> f64 {
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let c = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    c.atan2(d).to_degrees()
}

fn centroid(vs: &[V3]) -> V3 {
    let s = vs.iter().fold([0.0; 3], |acc, v| [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]);
    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    [s[0] / n, s[1] / n, s[2] / n]
}

fn window_ok(t: &[f64], v: &[V3], i: usize, j: usize, max_disp: f64, max_gap: f64) -> bool {
    if (i + 1..=j).any(|k| t[k] - t[k - 1] > max_gap) {
        return false;
    }
    let c = centroid(&v[i..=j]);
    v[i..=j].iter().all(|x| angle_deg(x, &c) <= max_disp)
}

/// Brute-force I-DT: every candidate window is re-evaluated from scratch.
fn idt_oracle(traj: &Trajectory) -> Vec<(f64, f64, V3)> {
    let p = traj.condition().fixation_params();
    let s = traj.samples();
    let t: Vec<f64> = s.iter().map(|x| x.t_ms).collect();
    let v: Vec<V3> = s.iter().map(|x| unit(x.gaze)).collect();
    let max_gap = p.gap_factor * traj.period_ms();
    let mut out = Vec::new();
    let mut i = 0;
    while i < t.len() {
        let Some(j0) = (i..t.len()).find(|&j| t[j] - t[i] >= p.min_duration_ms) else {
            break;
        };
        if !window_ok(&t, &v, i, j0, p.max_dispersion_deg, max_gap) {
            i += 1;
            continue;
        }
        let mut j = j0;
        while j + 1 < t.len() && window_ok(&t, &v, i, j + 1, p.max_dispersion_deg, max_gap) {
            j += 1;
        }
        out.push((t[i], t[j] - t[i], centroid(&v[i..=j])));
        i = j + 1;
    }
    out
}

fn c2_fixations() -> Outcome {
    let start = Instant::now();
    let specs: Vec<SynthSpec> = (0..100)
        .map(|i| SynthSpec {
            seed: 1000 + i,
            random: Some(RandomPlan {
                count: 100,
                ..RandomPlan::default()
            }),
            gaze_noise_deg: 0.05,
            user: format!("u{i}"),
            ..SynthSpec::default()
        })
        .collect();
    let trajs = gen_trajectories(&specs).unwrap();
    let spans: Vec<f64> = trajs.iter().map(|g| g.trajectory.span_ms() / 1000.0).collect();
    let mut total = 0;
    for (k, g) in trajs.iter().enumerate() {
        let got = detect_fixations(&g.trajectory, &Condition::Vr.fixation_params()).unwrap().fixations;
        let want = idt_oracle(&g.trajectory);
        check!(got.len() == want.len(), "trajectory {k}: {} fixations vs oracle {}", got.len(), want.len());
        for (f, (t0, dur, c)) in got.iter().zip(&want) {
            check!(f.t_start_ms == *t0 && f.duration_ms == *dur, "trajectory {k}: window at {} ms differs", f.t_start_ms);
            let err = angle_deg(&unit(f.centroid), c);
            check!(err <= 1e-9, "trajectory {k}: centroid off by {err} deg");
        }
        total += got.len();
    }
    let took = start.elapsed();
    check!(took < Duration::from_secs(30), "took {took:?}");
    let mean_span = spans.iter().sum::<f64>() / spans.len() as f64;
    Ok(format!("100 trajectories (mean {mean_span:.1} s), {total} fixations identical, {took:.2?}"))
}

// -- 3 ---------------------------------------------------------------------

fn laplace_profile(samples: &[f64], bins: usize) -> LatProfile {
    let w = 180.0 / bins as f64;
    let mut counts = vec![0.0; bins];
    for &x in samples {
        let k = (((x + 90.0) / w).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1.0;
    }
    let n = samples.len() as f64;
    LatProfile {
        lats: (0..bins).map(|k| -90.0 + (k as f64 + 0.5) * w).collect(),
        weights: counts.iter().map(|c| c / n).collect(),
    }
}

fn c3_laplace() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let beta = 10.0;
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let u: f64 = rng.random_range(-0.5..0.5);
            -beta * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect();
    let profile = laplace_profile(&samples, 512);
    let fit = fit_laplace(&profile).unwrap().bias;
    check!(fit.mu.abs() <= 0.5, "mu {}", fit.mu);
    check!((fit.beta - beta).abs() <= 0.05 * beta, "beta {}", fit.beta);
    let delta = 7.3;
    let shifted = LatProfile {
        lats: profile.lats.iter().map(|l| l + delta).collect(),
        weights: profile.weights.clone(),
    };
    let moved = fit_laplace(&shifted).unwrap().bias;
    check!((moved.mu - fit.mu - delta).abs() <= 1e-6, "shifted mu {}", moved.mu);
    check!((moved.beta - fit.beta).abs() <= 1e-6, "shifted beta {}", moved.beta);
    Ok(format!("mu {:.3}, beta {:.3}; shift by {delta} exact", fit.mu, fit.beta))
}

// -- 4 ---------------------------------------------------------------------

fn c4_projection() -> Outcome {
    let dims = GridDims::new(512, 256).unwrap();
    for r in 0..dims.height {
        for c in 0..dims.width {
            let d = dims.pixel_to_dir(c, r).unwrap();
            check!(dims.dir_to_pixel(d) == (c, r), "pixel ({c}, {r}) maps back to {:?}", dims.dir_to_pixel(d));
        }
    }
    // band-limited: low-order polynomials in the unit vector
    let img = EquirectGrid::from_fn(dims, |d| {
        let [x, y, z] = unit(d);
        0.5 + 0.2 * x + 0.15 * y * z + 0.1 * (x * x - y * y) + 0.05 * z * z * z
    });
    let cube = equirect_to_cubemap(&img, dims.width / 4).unwrap();
    let back = cubemap_to_equirect(&cube, dims);
    let (lo, hi) = img.raster().min_max();
    let mse = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / dims.len() as f64;
    let rel = mse.sqrt() / (hi - lo);
    check!(rel < 0.02, "cube round-trip RMSE {:.4}% of range", 100.0 * rel);
    Ok(format!("{} pixel centres exact; cube RMSE {:.4}% of range", dims.len(), 100.0 * rel))
}

// -- 5 ---------------------------------------------------------------------

fn c5_blur() -> Outcome {
    let dims = GridDims::new(256, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = map(dims, (0..dims.len()).map(|_| rng.random::<f64>()).collect());
    let mut worst_mass: f64 = 0.0;
    for sigma in [1.0, 5.0, 20.0] {
        let b = spherical_blur(&m, sigma).unwrap();
        worst_mass = worst_mass.max((b.sum() - m.sum()).abs() / m.sum());
    }
    check!(worst_mass <= 1e-6, "mass error {worst_mass}");
    let mut worst: f64 = 0.0;
    for (c, r) in [(127, 63), (128, 64), (40, 30), (200, 100), (3, 22), (77, 21), (9, 0), (250, 127)] {
        for sigma in [1.0, 3.0, 10.0] {
            let mut data = vec![0.0; dims.len()];
            data[dims.index(c, r)] = 1.0;
            let fast = spherical_blur(&map(dims, data), sigma).unwrap();
            let src = unit(dims.pixel_to_dir(c, r).unwrap());
            let raw: Vec<f64> = dims
                .pixel_dirs()
                .map(|d| (-0.5 * (angle_deg(&unit(d), &src) / sigma).powi(2)).exp())
                .collect();
            let total: f64 = raw.iter().sum();
            let peak = raw.iter().cloned().fold(0.0, f64::max) / total;
            for (a, b) in fast.data().iter().zip(&raw) {
                worst = worst.max((a - b / total).abs() / peak);
            }
        }
    }
    check!(worst <= 0.01, "delta response off by {:.3}% of peak", 100.0 * worst);
    Ok(format!(
        "mass error {worst_mass:.1e}; delta response within {:.3}% of peak, pole rows included",
        100.0 * worst
    ))
}

// -- 6 ---------------------------------------------------------------------

fn c6_patches() -> Outcome {
    let pano = EquirectGrid::filled(GridDims::new(512, 256).unwrap(), 3, 0.5);
    let plan = UnitPlan::new(ProjectionStrategy::patch_default(), pano.dims()).unwrap();
    let pred = ConstantPredictor(0.7);
    let outputs: Vec<_> = plan.render(&pano).unwrap().iter().map(|u| pred.predict(u).unwrap()).collect();
    let m = plan.stitch(&outputs, pano.dims()).unwrap();
    let dev = m.data().iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);
    check!(dev <= 1e-6, "max deviation {dev}");
    Ok(format!("{} patches, max deviation {dev:.1e}", plan.units.len()))
}

// -- 7 ---------------------------------------------------------------------

fn linear_curve(deg_per_s: f64) -> ExplorationCurve {
    let offsets: Vec<f64> = (0..=36).map(|k| 5.0 * k as f64).collect();
    let times: Vec<Option<f64>> = offsets.iter().map(|d| Some(d / deg_per_s)).collect();
    ExplorationCurve {
        counts: vec![10; offsets.len()],
        offsets_deg: offsets,
        raw_mean_time_s: times.clone(),
        mean_time_s: times,
        raw_violations: 0,
    }
}

fn c7_time_dependent() -> Outcome {
    let dims = GridDims::new(256, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let converged = blob_map(dims, &random_blobs(&mut rng, 4));
    let curve = linear_curve(20.0);
    let t_full = curve.full_exploration_s().ok_or("curve never reaches 180")?;
    let mut prev: Option<Vec<bool>> = None;
    for k in 0..=24 {
        let t = 0.5 * k as f64;
        let m = time_dependent(&converged, 40.0, t, &curve, DEFAULT_INIT_HALF_WIDTH).unwrap();
        let support: Vec<bool> = m.data().iter().map(|v| *v > 0.0).collect();
        if let Some(p) = &prev {
            check!(p.iter().zip(&support).all(|(a, b)| !a || *b), "support shrinks at t = {t}");
        }
        prev = Some(support);
    }
    let mut worst: f64 = 0.0;
    for t in [t_full, t_full + 0.5, 3.0 * t_full] {
        let m = time_dependent(&converged, 40.0, t, &curve, DEFAULT_INIT_HALF_WIDTH).unwrap();
        worst = worst.max((pearson_cc(&m, &converged).unwrap() - 1.0).abs());
    }
    check!(worst <= 1e-9, "CC off by {worst}");
    Ok(format!("support monotone over 0..12 s; CC at t >= {t_full} s within {worst:.1e} of 1"))
}

// -- 8 ---------------------------------------------------------------------

fn c8_head_saliency() -> Outcome {
    let dwells = [(5.0, 10.0), (-30.0, -90.0), (45.0, 120.0)];
    let spec = SynthSpec {
        seed: 8,
        start_lon: 170.0,
        plan: dwells
            .iter()
            .map(|&(lat, lon)| PlannedFixation {
                lat,
                lon,
                duration_ms: 2000.0,
                start_ms: None,
            })
            .collect(),
        ..SynthSpec::default()
    };
    let traj = gen_trajectories(&[spec]).unwrap().remove(0).trajectory;
    let params = HeadSalParams {
        dims: GridDims::new(360, 180).unwrap(),
        ..HeadSalParams::default()
    };
    let m = head_saliency(&[traj], &params).unwrap();
    let dims = m.dims();
    let mut worst: f64 = 0.0;
    for &(lat, lon) in &dwells {
        let truth = SphericalDir::new(lat, lon);
        // strongest pixel near the dwell, then check it is a local maximum
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for r in 0..dims.height {
            for c in 0..dims.width {
                let d = dims.pixel_to_dir(c, r).unwrap();
                if angular_distance(d, truth) <= 10.0 && m.get(c, r) > best {
                    best = m.get(c, r);
                    at = (c, r);
                }
            }
        }
        let (c, r) = at;
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let rr = r as i64 + dr;
                if rr < 0 || rr >= dims.height as i64 {
                    continue;
                }
                let cc = (c as i64 + dc).rem_euclid(dims.width as i64) as usize;
                check!(m.get(cc, rr as usize) <= best, "peak near ({lat}, {lon}) is not a local maximum");
            }
        }
        worst = worst.max(angular_distance(dims.pixel_to_dir(c, r).unwrap(), truth));
    }
    check!(worst <= 2.0, "a dwell was recovered {worst:.2} deg away");

    let samples: Vec<Sample> = (0..600)
        .map(|k| {
            let t = k as f64 * 1000.0 / 60.0;
            let lon = omnisal::sphere::wrap_lon(90.0 * t / 1000.0);
            Sample::from_gaze(t, HeadPose::new(lon, 0.0, 0.0), SphericalDir::new(0.0, lon))
        })
        .collect();
    let meta = TrajectoryMeta {
        rate_hz: 60.0,
        ..TrajectoryMeta::default()
    };
    let fast = Trajectory::new(meta, samples).unwrap();
    let err = head_saliency(&[fast], &HeadSalParams::default());
    check!(matches!(err, Err(Error::NoQualifyingSamples(_))), "fast rotation gave {err:?}");
    Ok(format!("3 dwells within {worst:.2} deg; fast rotation rejected"))
}

// -- 9 ---------------------------------------------------------------------

fn fixation_at(d: SphericalDir) -> Fixation {
    Fixation {
        t_start_ms: 0.0,
        duration_ms: 200.0,
        centroid: d,
    }
}

fn c9_congruency() -> Outcome {
    let dims = GridDims::new(256, 128).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let gt = blob_map(dims, &random_blobs(&mut rng, 3));
    let th = default_thresholds();
    // every oracle fixation sits on the single most salient pixel
    let top = (0..dims.len()).max_by(|&a, &b| gt.data()[a].total_cmp(&gt.data()[b])).unwrap();
    let d = dims.pixel_to_dir(top % dims.width, top / dims.width).unwrap();
    let oracle = congruency_roc(&vec![fixation_at(d); 20], &gt, &th).unwrap();
    check!((oracle.auc - 1.0).abs() <= 1e-12, "oracle AUC {}", oracle.auc);
    let uniform: Vec<Fixation> = (0..10_000)
        .map(|_| {
            let (c, r) = (rng.random_range(0..dims.width), rng.random_range(0..dims.height));
            fixation_at(dims.pixel_to_dir(c, r).unwrap())
        })
        .collect();
    let roc = congruency_roc(&uniform, &gt, &th).unwrap();
    check!((roc.auc - 0.5).abs() <= 0.05, "uniform AUC {}", roc.auc);
    for c in [&oracle, &roc] {
        check!(c.hit_rates.windows(2).all(|w| w[0] <= w[1]), "hit rates not monotone");
    }
    Ok(format!("oracle AUC {:.3}, uniform AUC {:.4}, hit rates monotone", oracle.auc, roc.auc))
}

// -- 10 --------------------------------------------------------------------

fn c10_align() -> Outcome {
    let dims = GridDims::new(1024, 512).unwrap();
    let col = dims.pixel_deg();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let blobs = random_blobs(&mut rng, 3);
        let shift: f64 = rng.random_range(-179.0..179.0);
        let moved: Vec<Blob> = blobs.iter().map(|b| Blob { lon: b.lon + shift, ..*b }).collect();
        let a = align_cut(&blob_map(dims, &blobs), &blob_map(dims, &moved)).unwrap();
        worst = worst.max(lon_diff(a.shift_deg, shift).abs());
    }
    check!(worst <= col, "shift error {worst:.3} deg exceeds one column ({col:.3})");
    let mut errs = Vec::new();
    for _ in 0..5 {
        let m = blob_map(dims, &random_blobs(&mut rng, 3));
        errs.push(align_cut(&m, &m).unwrap().shift_deg.abs());
    }
    errs.sort_by(f64::total_cmp);
    check!(errs[errs.len() / 2] == 0.0, "median identical-map error {}", errs[errs.len() / 2]);
    Ok(format!("50 shifts within {worst:.3} deg (column {col:.3}); identical maps give 0"))
}

// -- 11 --------------------------------------------------------------------

fn c11_thumbnail() -> Outcome {
    let dims = GridDims::new(256, 128).unwrap();
    let pano = EquirectGrid::filled(dims, 3, 0.5);
    let p = ThumbnailParams {
        render_res: 32,
        ..ThumbnailParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let b = Blob {
            lat: rng.random_range(-60.0..60.0),
            lon: rng.random_range(-180.0..180.0),
            sigma_deg: 6.0,
            mass: 1.0,
        };
        let t = thumbnail(&blob_map(dims, &[b]), &pano, &p).unwrap();
        worst = worst.max(angular_distance(t.window.center, SphericalDir::new(b.lat, b.lon)));
    }
    check!(worst <= p.step_deg, "single blob found {worst:.2} deg away");
    let mut heavier = 0;
    for _ in 0..20 {
        let (heavy, light) = loop {
            let mk = |rng: &mut ChaCha8Rng, mass| Blob {
                lat: rng.random_range(-50.0..50.0),
                lon: rng.random_range(-180.0..180.0),
                sigma_deg: 8.0,
                mass,
            };
            let h = mk(&mut rng, 1.0);
            let l = mk(&mut rng, 0.6);
            if angular_distance(SphericalDir::new(h.lat, h.lon), SphericalDir::new(l.lat, l.lon)) > 100.0 {
                break (h, l);
            }
        };
        let t = thumbnail(&blob_map(dims, &[heavy, light]), &pano, &p).unwrap();
        if angular_distance(t.window.center, SphericalDir::new(heavy.lat, heavy.lon)) <= 10.0 {
            heavier += 1;
        }
    }
    check!(heavier == 20, "heavier blob chosen in {heavier}/20");
    let uniform = map(dims, vec![1.0; dims.len()]);
    let a = thumbnail(&uniform, &pano, &p).unwrap().window.center;
    let b = thumbnail(&uniform, &pano, &p).unwrap().window.center;
    check!(a == b, "uniform tie-break differs between runs");
    check!(a.lat == 0.0 && a.lon == -179.0, "uniform tie-break picked ({}, {})", a.lat, a.lon);
    Ok(format!("blob within {worst:.2} deg; heavier blob 20/20; uniform -> ({}, {})", a.lat, a.lon))
}

// -- 12 --------------------------------------------------------------------

fn c12_compress() -> Outcome {
    let dims = GridDims::new(512, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noise: Vec<f64> = (0..dims.len() * 3).map(|_| rng.random::<f64>()).collect();
    let pano = EquirectGrid::new(omnisal::sphere::Raster::new(dims.width, dims.height, 3, noise).unwrap()).unwrap();
    let sal = blob_map(dims, &random_blobs(&mut rng, 3));
    let p = CompressParams::default();
    let (out, stats) = compress(&pano, &sal, &p).unwrap();
    let low = down_up(&pano, p.down_factor).unwrap();
    let alpha = blend_alpha(&sal, dims, p.top_percent, p.feather_deg).unwrap();
    let (mut inner, mut outer) = (0, 0);
    for (i, a) in alpha.iter().enumerate() {
        let px = &out.data()[3 * i..3 * i + 3];
        if *a == 1.0 {
            inner += 1;
            check!(px == &pano.data()[3 * i..3 * i + 3], "interior pixel {i} differs from the source");
        } else if *a == 0.0 {
            outer += 1;
            check!(px == &low.data()[3 * i..3 * i + 3], "exterior pixel {i} differs from the down/up path");
        }
    }
    let expect = 1.0 / 36.0 + p.top_percent / 100.0;
    let tol = 1.0 / dims.len() as f64;
    check!(
        (stats.retention_ratio - expect).abs() <= tol + 1e-12,
        "retention {} vs {expect}",
        stats.retention_ratio
    );
    Ok(format!(
        "{inner} interior and {outer} exterior pixels exact; retention {:.5} (1/36 + 0.10 = {expect:.5})",
        stats.retention_ratio
    ))
}

// -- 13 --------------------------------------------------------------------

fn c13_entropy() -> Outcome {
    let dims = GridDims::new(256, 128).unwrap();
    let uniform = entropy(&map(dims, vec![1.0; dims.len()])).unwrap();
    let mut delta = vec![0.0; dims.len()];
    delta[1234] = 5.0;
    let zero = entropy(&map(dims, delta.clone())).unwrap();
    delta[20000] = 5.0;
    let two = entropy(&map(dims, delta)).unwrap();
    let ln_n = (dims.len() as f64).ln();
    check!((uniform - ln_n).abs() <= 1e-9, "uniform {uniform} vs ln N {ln_n}");
    check!(zero.abs() <= 1e-9, "delta {zero}");
    check!((two - 2f64.ln()).abs() <= 1e-9, "two peaks {two}");
    Ok(format!("uniform {uniform:.12} (ln N), delta {zero}, two peaks {two:.12}"))
}

// -- 14 --------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn omnisal_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_omnisal"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OMNISAL_OUT")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn c14_replay() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    fs::write(
        root.join("blobs.toml"),
        "[[blob]]\nlat = 12.0\nlon = -40.0\nsigma_deg = 9.0\nmass = 1.0\n\n\
         [[blob]]\nlat = -25.0\nlon = 95.0\nsigma_deg = 14.0\nmass = 0.7\n",
    )
    .unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["synth", "--users", "3", "--seed", "14", "--fixations", "30", "--blobs", "blobs.toml", "--width", "256"],
        vec!["salmap", "run0/trajectories/u0.csv", "run0/trajectories/u1.csv", "run0/trajectories/u2.csv", "--width", "256"],
        vec!["fixations", "run0/trajectories/u0.csv"],
        vec!["explore-curve", "run0/trajectories/u0.csv", "run0/trajectories/u1.csv"],
        vec!["headsal", "run0/trajectories/u0.csv", "--width", "256", "--keep-start-vicinity"],
        vec!["bias-fit", "run1/saliency.pfm"],
        vec!["entropy", "run1/saliency.pfm", "run0/saliency.pfm"],
        vec!["metrics", "--map", "run1/saliency.pfm", "run0/trajectories/u0.csv", "--horizon-s", "5"],
        vec!["congruency", "run0/trajectories/u0.csv", "run0/trajectories/u1.csv", "run0/trajectories/u2.csv", "--width", "256"],
        vec!["predict", "--pano", "run0/pano.png", "--width", "256", "--equator-bias"],
        vec!["predict", "--pano", "run0/pano.png", "--strategy", "cubemap", "--width", "256", "--ground-truth", "run0/saliency.pfm"],
        vec!["align-cut", "--before", "run0/saliency.pfm", "--after", "run1/saliency.pfm"],
        vec!["thumbnail", "--sal", "run0/saliency.pfm", "--pano", "run0/pano.png"],
        vec!["synopsis", "run0/saliency.pfm", "run1/saliency.pfm", "run0/saliency.pfm", "--stride", "1", "--neighborhood-deg", "30"],
        vec!["compress", "--pano", "run0/pano.png", "--sal", "run0/saliency.pfm"],
        vec!["timedep", "--converged", "run1/saliency.pfm", "--curve", "run3/curve.json"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let first = format!("run{i}");
        let again = format!("replay{i}");
        let mut a = args.clone();
        a.extend(["--out", first.as_str()]);
        omnisal_cli(&a, root)?;
        omnisal_cli(&["replay", &format!("{first}/config.toml"), "--out", &again], root)?;
        check!(snapshot(&root.join(&first)) == snapshot(&root.join(&again)), "replay of {} differs", args[0]);
    }
    Ok(format!("{} runs replayed bit-identically", runs.len()))
}

// -- 16 --------------------------------------------------------------------

/// Dataset layout: one directory per scene holding `pano.png` and
/// `trajectories/*.csv`.
fn c16_dataset(root: &Path) -> Outcome {
    use omnisal::bias::EquatorBias;
    use omnisal::io::read_equirect;
    use omnisal::metrics::exploration_curve;
    use omnisal::predict::{predict, SpectralResidual};
    use omnisal::salmap::{accumulate_fixations, normalize};
    use omnisal::trajectory::{filter_start_vicinity, read_trajectory};

    let dims = GridDims::new(512, 256).unwrap();
    let strategies = [
        ProjectionStrategy::Equirect,
        ProjectionStrategy::Cubemap { face_res: None },
        ProjectionStrategy::patch_default(),
    ];
    let mut gains = [(0.0, 0.0); 3];
    let (mut td, mut base, mut scenes) = (0.0, 0.0, 0usize);
    let mut dirs: Vec<PathBuf> = fs::read_dir(root).map_err(|e| e.to_string())?.flatten().map(|e| e.path()).collect();
    dirs.sort();
    for scene in dirs.iter().filter(|d| d.join("pano.png").exists()) {
        let mut logs: Vec<PathBuf> = fs::read_dir(scene.join("trajectories"))
            .map_err(|e| e.to_string())?
            .flatten()
            .map(|e| e.path())
            .collect();
        logs.sort();
        let trajs: Vec<Trajectory> = logs.iter().filter_map(|p| read_trajectory(p).ok()).collect();
        if trajs.len() < 2 {
            continue;
        }
        let fix: Vec<Vec<Fixation>> = trajs
            .iter()
            .map(|t| {
                let f = detect_fixations(t, &t.condition().fixation_params()).unwrap().fixations;
                filter_start_vicinity(&f, t.meta.start_lon, 20.0)
            })
            .collect();
        let fmap = |fs: &[Fixation]| normalize(&spherical_blur(&accumulate_fixations(fs, dims), 1.0).ok()?, Normalization::SumOne).ok();
        let all: Vec<Fixation> = fix.concat();
        let Some(gt) = fmap(&all) else { continue };
        let pano = read_equirect(&scene.join("pano.png")).map_err(|e| e.to_string())?;
        for (k, s) in strategies.iter().enumerate() {
            let plain = predict(&pano, &SpectralResidual::default(), *s, None, dims).map_err(|e| e.to_string())?;
            let biased = predict(&pano, &SpectralResidual::default(), *s, Some(&EquatorBias::default()), dims)
                .map_err(|e| e.to_string())?;
            gains[k].0 += pearson_cc(&plain, &gt).unwrap_or(0.0);
            gains[k].1 += pearson_cc(&biased, &gt).unwrap_or(0.0);
        }
        let curve = exploration_curve(&trajs, 5.0).map_err(|e| e.to_string())?;
        for (t, f) in trajs.iter().zip(&fix) {
            for sec in 1..=6 {
                let seen: Vec<Fixation> = f.iter().filter(|x| x.t_start_ms <= sec as f64 * 1000.0).copied().collect();
                let Some(now) = fmap(&seen) else { continue };
                let tdm = time_dependent(&gt, t.meta.start_lon, sec as f64, &curve, DEFAULT_INIT_HALF_WIDTH)
                    .map_err(|e| e.to_string())?;
                td += pearson_cc(&tdm, &now).unwrap_or(0.0);
                base += pearson_cc(&gt, &now).unwrap_or(0.0);
            }
        }
        scenes += 1;
    }
    check!(scenes > 0, "no scenes found under {}", root.display());
    for (k, (plain, biased)) in gains.iter().enumerate() {
        check!(biased > plain, "bias does not improve strategy {k}: {plain:.3} vs {biased:.3}");
    }
    check!(td > base, "time-dependent CC {td:.3} does not exceed converged {base:.3}");
    Ok(format!("{scenes} scenes; bias improves all strategies; time-dependent beats converged over 6 s"))
}

fn main() -> ExitCode {
    let suite: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "pearson cc", c1_pearson),
        (2, "fixation detection vs brute-force I-DT", c2_fixations),
        (3, "laplace fit", c3_laplace),
        (4, "projection round trips", c4_projection),
        (5, "spherical blur", c5_blur),
        (6, "patch lifting partition of unity", c6_patches),
        (7, "time-dependent model", c7_time_dependent),
        (8, "head saliency", c8_head_saliency),
        (9, "congruency roc", c9_congruency),
        (10, "cut alignment", c10_align),
        (11, "thumbnail", c11_thumbnail),
        (12, "compression", c12_compress),
        (13, "entropy", c13_entropy),
        (14, "cli replay determinism", c14_replay),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (id, name, f) in suite {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{:.2?}]", t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} [{:.2?}]", t.elapsed());
            }
        }
    }
    let total = start.elapsed();
    if total < Duration::from_secs(300) {
        println!("PASS 15 suite runtime: {total:.2?} < 5 min");
    } else {
        failed += 1;
        println!("FAIL 15 suite runtime: {total:.2?} >= 5 min");
    }
    match std::env::var_os("OMNISAL_DATASET") {
        Some(root) => match c16_dataset(Path::new(&root)) {
            Ok(detail) => println!("PASS 16 dataset directions: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL 16 dataset directions: {why}");
            }
        },
        None => println!("SKIP 16 dataset directions: OMNISAL_DATASET not set"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
