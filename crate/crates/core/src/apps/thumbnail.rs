use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::salmap::SaliencyMap;
use crate::sphere::{angular_distance, gnomonic_sample, EquirectGrid, GnomonicWindow, Raster, SphericalDir};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThumbnailParams {
    pub fov_deg: f64,
    /// Gaussian centre weighting, as a fraction of the patch side.
    pub weight_sigma_frac: f64,
    pub step_deg: f64,
    /// Second pass at a quarter of the step around the best coarse centre.
    pub refine: bool,
    /// Side of the planar grid used for scoring.
    pub score_res: usize,
    /// Side of the rendered thumbnail.
    pub render_res: usize,
}

impl Default for ThumbnailParams {
    fn default() -> Self {
        Self {
            fov_deg: 90.0,
            weight_sigma_frac: 0.25,
            step_deg: 2.0,
            refine: false,
            score_res: 32,
            render_res: 256,
        }
    }
}

impl ThumbnailParams {
    fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidParameter(format!("thumbnail fov {} must lie in (0, 180)", self.fov_deg)));
        }
        if !(self.weight_sigma_frac > 0.0) || !(self.step_deg > 0.0 && self.step_deg <= 90.0) {
            return Err(Error::InvalidParameter(
                "thumbnail weight sigma must be positive and the step in (0, 90]".into(),
            ));
        }
        if self.score_res == 0 || self.render_res == 0 {
            return Err(Error::InvalidParameter("thumbnail resolutions must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Thumbnail {
    pub window: GnomonicWindow,
    pub score: f64,
    pub patch: Raster,
}

/// Scores candidate window centres against one saliency map.
struct Scorer {
    grid: EquirectGrid,
    fov: f64,
    res: usize,
    weights: Vec<f64>,
}

impl Scorer {
    fn new(sal: &SaliencyMap, p: &ThumbnailParams) -> Self {
        let n = p.score_res;
        let sigma = p.weight_sigma_frac * n as f64;
        let c = 0.5 * (n as f64 - 1.0);
        let weights = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64 - c, (i / n) as f64 - c);
                (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        Self {
            grid: sal.to_grid(),
            fov: p.fov_deg,
            res: n,
            weights,
        }
    }

    fn score(&self, center: SphericalDir) -> f64 {
        let w = GnomonicWindow::square(center, self.fov, self.res).expect("validated fov");
        let mut v = [0.0];
        let mut acc = 0.0;
        for row in 0..self.res {
            for col in 0..self.res {
                self.grid.sample(SphericalDir::from_vec3(&w.pixel_ray(col, row)), &mut v);
                acc += v[0] * self.weights[row * self.res + col];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    center: SphericalDir,
    score: f64,
    /// Secondary key, smaller wins (distance to the previous centre in a path).
    pull: f64,
}

/// Ordering used everywhere: score, then pull, then nearer the equator, then
/// smaller longitude, then southern first.
fn better(a: &Scored, b: &Scored) -> bool {
    a.score
        .total_cmp(&b.score)
        .then(b.pull.total_cmp(&a.pull))
        .then(b.center.lat.abs().total_cmp(&a.center.lat.abs()))
        .then(b.center.lon.total_cmp(&a.center.lon))
        .then(b.center.lat.total_cmp(&a.center.lat))
        .is_gt()
}

fn best_of(candidates: Vec<Scored>) -> Option<Scored> {
    candidates
        .into_iter()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
}

/// Candidate centres: longitudes at cell centres `-180 + step/2 + i * step`,
/// latitudes at `j * step` strictly inside the poles.
fn coarse_grid(step: f64) -> Vec<SphericalDir> {
    let n_lon = (360.0 / step).floor() as usize;
    let n_lat = ((90.0 - 1e-9) / step).floor() as i64;
    let mut out = Vec::new();
    for j in -n_lat..=n_lat {
        for i in 0..n_lon {
            out.push(SphericalDir::new(j as f64 * step, -180.0 + step * 0.5 + i as f64 * step));
        }
    }
    out
}

fn refine_around(center: SphericalDir, step: f64) -> Vec<SphericalDir> {
    let fine = step / 4.0;
    let mut out = Vec::new();
    for j in -4i32..=4 {
        for i in -4i32..=4 {
            let lat = center.lat + j as f64 * fine;
            if lat.abs() < 90.0 {
                out.push(SphericalDir::new(lat, center.lon + i as f64 * fine));
            }
        }
    }
    out
}

fn search(
    scorer: &Scorer,
    candidates: Vec<SphericalDir>,
    pull: impl Fn(SphericalDir) -> f64 + Sync,
) -> Option<Scored> {
    let scored: Vec<Scored> = candidates
        .into_par_iter()
        .map(|c| Scored {
            center: c,
            score: scorer.score(c),
            pull: pull(c),
        })
        .collect();
    best_of(scored)
}

fn render(pano: &EquirectGrid, center: SphericalDir, p: &ThumbnailParams, score: f64) -> Result<Thumbnail> {
    let window = GnomonicWindow::square(center, p.fov_deg, p.render_res)?;
    let patch = gnomonic_sample(pano, &window)?.image;
    Ok(Thumbnail { window, score, patch })
}

/// Exhaustive search for the window whose gnomonic view holds the most
/// centre-weighted saliency. The search runs in parallel; the result does
/// not depend on scheduling.
pub fn thumbnail(sal: &SaliencyMap, pano: &EquirectGrid, p: &ThumbnailParams) -> Result<Thumbnail> {
    p.validate()?;
    let scorer = Scorer::new(sal, p);
    let mut best = search(&scorer, coarse_grid(p.step_deg), |_| 0.0).expect("grid is never empty");
    if p.refine {
        let fine = search(&scorer, refine_around(best.center, p.step_deg), |_| 0.0).expect("contains the centre");
        if better(&fine, &best) {
            best = fine;
        }
    }
    render(pano, best.center, p, best.score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynopsisParams {
    pub stride: usize,
    pub neighborhood_deg: f64,
    #[serde(default)]
    pub thumbnail: ThumbnailParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportPath {
    pub stride: usize,
    pub neighborhood_deg: f64,
    pub keyframes: Vec<usize>,
    pub centers: Vec<SphericalDir>,
    pub windows: Vec<GnomonicWindow>,
    pub scores: Vec<f64>,
}

/// Viewport path over a frame sequence: a thumbnail search on frame 0, then
/// every `stride`-th frame the best window within `neighborhood_deg` of the
/// previous centre. Among equal scores the path prefers to stay put.
pub fn synopsis(frames: &[SaliencyMap], p: &SynopsisParams) -> Result<ViewportPath> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("synopsis needs at least one frame".into()));
    }
    if p.stride == 0 || !(p.neighborhood_deg > 0.0) {
        return Err(Error::InvalidParameter("synopsis stride and neighborhood must be positive".into()));
    }
    let tp = &p.thumbnail;
    tp.validate()?;
    let grid = coarse_grid(tp.step_deg);
    let mut path = ViewportPath {
        stride: p.stride,
        neighborhood_deg: p.neighborhood_deg,
        keyframes: Vec::new(),
        centers: Vec::new(),
        windows: Vec::new(),
        scores: Vec::new(),
    };
    let mut prev: Option<SphericalDir> = None;
    for k in (0..frames.len()).step_by(p.stride) {
        let scorer = Scorer::new(&frames[k], tp);
        let best = match prev {
            None => {
                let mut best = search(&scorer, grid.clone(), |_| 0.0).expect("grid is never empty");
                if tp.refine {
                    let fine = search(&scorer, refine_around(best.center, tp.step_deg), |_| 0.0).expect("non-empty");
                    if better(&fine, &best) {
                        best = fine;
                    }
                }
                best
            }
            Some(prev) => {
                let near = |c: &SphericalDir| angular_distance(*c, prev) <= p.neighborhood_deg;
                let mut candidates: Vec<SphericalDir> = grid.iter().copied().filter(near).collect();
                if tp.refine {
                    candidates.extend(refine_around(prev, tp.step_deg).into_iter().filter(near));
                }
                candidates.push(prev);
                search(&scorer, candidates, |c| angular_distance(c, prev)).expect("contains the previous centre")
            }
        };
        path.keyframes.push(k);
        path.centers.push(best.center);
        path.windows.push(GnomonicWindow::square(best.center, tp.fov_deg, tp.render_res)?);
        path.scores.push(best.score);
        prev = Some(best.center);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::salmap::{normalize, Normalization};
    use crate::sphere::GridDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims() -> GridDims {
        GridDims::new(256, 128).unwrap()
    }

    fn blob_map(blobs: &[(f64, f64, f64)], sigma: f64) -> SaliencyMap {
        SaliencyMap::from_fn(dims(), |d| {
            blobs
                .iter()
                .map(|&(lat, lon, m)| {
                    let a = angular_distance(d, SphericalDir::new(lat, lon));
                    m * (-(a / sigma).powi(2) * 0.5).exp()
                })
                .sum()
        })
        .unwrap()
    }

    fn pano() -> EquirectGrid {
        EquirectGrid::filled(dims(), 3, 0.5)
    }

    fn fast() -> ThumbnailParams {
        ThumbnailParams {
            fov_deg: 60.0,
            score_res: 16,
            render_res: 32,
            ..ThumbnailParams::default()
        }
    }

    fn near(a: SphericalDir, lat: f64, lon: f64, tol: f64) -> bool {
        (a.lat - lat).abs() <= tol && crate::sphere::lon_diff(a.lon, lon).abs() <= tol
    }

    #[test]
    fn single_blob_is_centred() {
        let m = blob_map(&[(10.0, 40.0, 1.0)], 6.0);
        let t = thumbnail(&m, &pano(), &fast()).unwrap();
        assert!(near(t.window.center, 10.0, 40.0, 2.0), "{:?}", t.window.center);
        assert_eq!((t.patch.width, t.patch.height, t.patch.channels), (32, 32, 3));
    }

    #[test]
    fn refinement_gets_closer() {
        let m = blob_map(&[(11.0, 41.0, 1.0)], 6.0);
        let p = ThumbnailParams { refine: true, ..fast() };
        let t = thumbnail(&m, &pano(), &p).unwrap();
        assert!(near(t.window.center, 11.0, 41.0, 0.5), "{:?}", t.window.center);
    }

    #[test]
    fn uniform_map_breaks_ties_deterministically() {
        let m = SaliencyMap::new(dims(), vec![1.0; dims().len()], Normalization::RawCounts).unwrap();
        let t = thumbnail(&m, &pano(), &fast()).unwrap();
        assert_eq!(t.window.center, SphericalDir::new(0.0, -179.0));
    }

    #[test]
    fn heavier_blob_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = (rng.random_range(-40.0..40.0), rng.random_range(-180.0..180.0));
            let b = (rng.random_range(-40.0..40.0), crate::sphere::wrap_lon(a.1 + rng.random_range(90.0..270.0)));
            let m = blob_map(&[(a.0, a.1, 2.0), (b.0, b.1, 1.0)], 6.0);
            let t = thumbnail(&m, &pano(), &fast()).unwrap();
            assert!(near(t.window.center, a.0, a.1, 2.0), "{:?} vs {a:?}", t.window.center);
        }
    }

    #[test]
    fn result_ignores_positive_scaling() {
        let m = blob_map(&[(-20.0, 100.0, 1.0), (30.0, -60.0, 0.8)], 10.0);
        let a = thumbnail(&m, &pano(), &fast()).unwrap();
        let b = thumbnail(&normalize(&m, Normalization::SumOne).unwrap(), &pano(), &fast()).unwrap();
        assert_eq!(a.window, b.window);
    }

    #[test]
    fn bad_fov_is_rejected() {
        let m = blob_map(&[(0.0, 0.0, 1.0)], 6.0);
        for fov in [0.0, 180.0] {
            let p = ThumbnailParams { fov_deg: fov, ..fast() };
            assert!(thumbnail(&m, &pano(), &p).is_err());
        }
    }

    fn synopsis_params(neighborhood: f64) -> SynopsisParams {
        SynopsisParams {
            stride: 2,
            neighborhood_deg: neighborhood,
            thumbnail: fast(),
        }
    }

    #[test]
    fn static_blob_gives_constant_path() {
        let frames = vec![blob_map(&[(0.0, 20.0, 1.0)], 6.0); 7];
        let path = synopsis(&frames, &synopsis_params(10.0)).unwrap();
        assert_eq!(path.keyframes, vec![0, 2, 4, 6]);
        assert!(path.centers.iter().all(|c| *c == path.centers[0]));
    }

    #[test]
    fn drifting_blob_is_tracked() {
        // blob moves 1 degree east per keyframe
        let frames: Vec<SaliencyMap> = (0..20)
            .map(|f| blob_map(&[(0.0, -30.0 + (f / 2) as f64, 1.0)], 6.0))
            .collect();
        let path = synopsis(&frames, &synopsis_params(10.0)).unwrap();
        for (k, c) in path.keyframes.iter().zip(&path.centers) {
            assert!(near(*c, 0.0, -30.0 + (k / 2) as f64, 2.0), "frame {k}: {c:?}");
        }
    }

    #[test]
    fn teleporting_blob_respects_the_neighborhood() {
        let mut frames = vec![blob_map(&[(0.0, 0.0, 1.0)], 6.0); 2];
        frames.extend(vec![blob_map(&[(0.0, 90.0, 1.0)], 6.0); 6]);
        let path = synopsis(&frames, &synopsis_params(10.0)).unwrap();
        for w in path.centers.windows(2) {
            assert!(angular_distance(w[0], w[1]) <= 10.0 + 1e-9);
        }
        assert!(synopsis(&[], &synopsis_params(10.0)).is_err());
    }
}
