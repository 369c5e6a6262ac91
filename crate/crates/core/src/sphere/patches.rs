//! Tiling of the sphere by overlapping gnomonic windows.
//!
//! Every window has a *core* of `fov` degrees and is widened by `overlap`
//! degrees in total (half on each side), so neighbouring windows share a band
//! of at least `overlap` degrees. Centres depend on `fov` only: the cores are
//! laid out in latitude bands such that the inscribed cap (radius `fov / 2`)
//! of the cores already covers the whole sphere. Widening the windows with a
//! larger overlap therefore only ever adds coverage.

use serde::{Deserialize, Serialize};

use super::{GnomonicWindow, SphericalDir, Vec3};
use crate::error::{Error, Result};

const DEFAULT_PATCH_RES: usize = 256;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchLayout {
    pub core_fov: f64,
    pub overlap: f64,
    pub windows: Vec<GnomonicWindow>,
}

/// Windows covering the full sphere. See the module docs for the layout.
pub fn patch_centers(fov: f64, overlap: f64) -> Result<PatchLayout> {
    if !(fov > 0.0 && fov < 180.0) {
        return Err(Error::InvalidParameter(format!("patch fov {fov} must lie in (0, 180)")));
    }
    if !(overlap >= 0.0 && overlap < fov) {
        return Err(Error::InvalidParameter(format!(
            "patch overlap {overlap} must lie in [0, fov)"
        )));
    }
    let window_fov = fov + overlap;
    if window_fov >= 180.0 {
        return Err(Error::InvalidParameter(format!(
            "infeasible overlap: fov {fov} + overlap {overlap} reaches 180 degrees"
        )));
    }
    let centers = cap_cover(fov * 0.5);
    let windows = centers
        .into_iter()
        .map(|c| GnomonicWindow::square(c, window_fov, DEFAULT_PATCH_RES))
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchLayout {
        core_fov: fov,
        overlap,
        windows,
    })
}

impl PatchLayout {
    pub fn with_resolution(mut self, res: usize) -> Self {
        for w in &mut self.windows {
            *w = w.with_resolution(res, res);
        }
        self
    }

    /// Number of windows containing `v`.
    pub fn cover_count(&self, v: &Vec3) -> usize {
        self.windows.iter().filter(|w| w.contains(v)).count()
    }

    /// Unnormalised blend weight of window `idx` at direction `v`: one over
    /// the core, raised-cosine falloff across the overlap margin, zero at the
    /// window edge and outside.
    pub fn blend_weight(&self, idx: usize, v: &Vec3) -> f64 {
        let w = &self.windows[idx];
        let Some((nx, ny)) = w.project_ndc(v) else {
            return 0.0;
        };
        let (tx, ty) = w.half_extent();
        let core = self.core_fov * 0.5;
        let outer = w.fov_lon * 0.5;
        axis_weight((nx * tx).atan().to_degrees().abs(), core, outer)
            * axis_weight((ny * ty).atan().to_degrees().abs(), core, outer)
    }
}

fn axis_weight(angle: f64, core: f64, outer: f64) -> f64 {
    if angle <= core {
        1.0
    } else if angle >= outer {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (angle - core) / (outer - core)).cos())
    }
}

/// Great-circle distance in degrees between (lat_a, 0) and (lat_b, dlon).
fn band_distance(lat_a: f64, lat_b: f64, dlon: f64) -> f64 {
    let (sa, ca) = lat_a.to_radians().sin_cos();
    let (sb, cb) = lat_b.to_radians().sin_cos();
    (sa * sb + ca * cb * dlon.to_radians().cos()).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Centres whose caps of angular radius `radius` cover the sphere, choosing
/// the band count that needs the fewest centres.
fn cap_cover(radius: f64) -> Vec<SphericalDir> {
    const MARGIN: f64 = 1e-9;
    let min_bands = (90.0 / radius).floor() as usize + 1;
    let mut best: Option<Vec<SphericalDir>> = None;
    for bands in min_bands..min_bands + 8 {
        let h = 180.0 / bands as f64;
        if h * 0.5 >= radius - MARGIN {
            continue;
        }
        let mut centers = Vec::new();
        for k in 0..bands {
            let lo = -90.0 + k as f64 * h;
            let hi = lo + h;
            let polar = k == 0 || k == bands - 1;
            if polar && h <= radius - MARGIN {
                let lat = if k == 0 { -90.0 } else { 90.0 };
                centers.push(SphericalDir::new(lat, 0.0));
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let n = (1..=4096usize)
                .find(|&n| {
                    let half = 180.0 / n as f64;
                    band_distance(mid, lo, half) <= radius - MARGIN
                        && band_distance(mid, hi, half) <= radius - MARGIN
                })
                .expect("band spacing below the cap radius is always coverable");
            for j in 0..n {
                let lon = -180.0 + (j as f64 + 0.5) * 360.0 / n as f64;
                centers.push(SphericalDir::new(mid, lon));
            }
        }
        if best.as_ref().is_none_or(|b| centers.len() < b.len()) {
            best = Some(centers);
        }
    }
    best.expect("at least one band count is feasible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::angular_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vecs(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let lon: f64 = rng.random_range(-180.0..180.0);
                SphericalDir::new(z.asin().to_degrees(), lon).to_vec3()
            })
            .collect()
    }

    #[test]
    fn caps_cover_sphere() {
        for radius in [10.0, 30.0, 45.0, 60.0, 89.5] {
            let centers = cap_cover(radius);
            for v in random_vecs(5_000, 1) {
                let d = SphericalDir::from_vec3(&v);
                assert!(
                    centers.iter().any(|c| angular_distance(*c, d) <= radius),
                    "radius {radius}: {d:?} uncovered"
                );
            }
        }
    }

    #[test]
    fn right_angle_patches_cover_everything() {
        let layout = patch_centers(90.0, 0.0).unwrap();
        for v in random_vecs(100_000, 2) {
            assert!(layout.cover_count(&v) >= 1);
        }
    }

    #[test]
    fn near_hemisphere_fov_needs_several_windows() {
        let layout = patch_centers(179.0, 0.0).unwrap();
        assert!(layout.windows.len() >= 2);
        for v in random_vecs(10_000, 3) {
            assert!(layout.cover_count(&v) >= 1);
        }
    }

    #[test]
    fn overlap_never_reduces_cover_count() {
        let dirs = random_vecs(100_000, 4);
        let layouts: Vec<_> = [0.0, 10.0, 30.0, 60.0]
            .iter()
            .map(|&o| patch_centers(90.0, o).unwrap())
            .collect();
        for v in &dirs {
            let counts: Vec<_> = layouts.iter().map(|l| l.cover_count(v)).collect();
            assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        }
    }

    #[test]
    fn default_layout_is_doubly_covered_away_from_poles() {
        let layout = patch_centers(90.0, 30.0).unwrap();
        for v in random_vecs(20_000, 5) {
            if v.z.abs() < 0.9 {
                assert!(layout.cover_count(&v) >= 2);
            }
        }
    }

    #[test]
    fn blend_weights_reach_one_somewhere_for_every_direction() {
        let layout = patch_centers(90.0, 30.0).unwrap();
        for v in random_vecs(5_000, 6) {
            let best = (0..layout.windows.len())
                .map(|i| layout.blend_weight(i, &v))
                .fold(0.0, f64::max);
            assert_eq!(best, 1.0);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(patch_centers(0.0, 0.0).is_err());
        assert!(patch_centers(180.0, 0.0).is_err());
        assert!(patch_centers(90.0, 90.0).is_err());
        assert!(patch_centers(90.0, -1.0).is_err());
        assert!(patch_centers(120.0, 70.0).is_err());
    }
}
