use serde::{Deserialize, Serialize};

use super::{EquirectGrid, Raster, SphericalDir, Vec3};
use crate::error::{Error, Result};

/// A rectilinear view of the sphere tangent at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnomonicWindow {
    pub center: SphericalDir,
    pub fov_lon: f64,
    pub fov_lat: f64,
    pub width: usize,
    pub height: usize,
}

impl GnomonicWindow {
    pub fn new(center: SphericalDir, fov_lon: f64, fov_lat: f64, width: usize, height: usize) -> Result<Self> {
        for fov in [fov_lon, fov_lat] {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(Error::InvalidParameter(format!(
                    "gnomonic field of view {fov} must lie in (0, 180)"
                )));
            }
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("gnomonic window needs a non-zero resolution".into()));
        }
        Ok(Self {
            center,
            fov_lon,
            fov_lat,
            width,
            height,
        })
    }

    pub fn square(center: SphericalDir, fov: f64, res: usize) -> Result<Self> {
        Self::new(center, fov, fov, res, res)
    }

    /// `(forward, right, up)` at the window centre.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let (east, north) = self.center.tangent_frame();
        (self.center.to_vec3(), east, north)
    }

    /// Tangent-plane half extents `(tan(fov_lon / 2), tan(fov_lat / 2))`.
    pub fn half_extent(&self) -> (f64, f64) {
        (
            (self.fov_lon * 0.5).to_radians().tan(),
            (self.fov_lat * 0.5).to_radians().tan(),
        )
    }

    /// Unit ray at normalised window coordinates, `(-1, -1)` bottom-left to
    /// `(1, 1)` top-right.
    pub fn ray_ndc(&self, nx: f64, ny: f64) -> Vec3 {
        let (f, r, u) = self.basis();
        let (tx, ty) = self.half_extent();
        (f + r * (nx * tx) + u * (ny * ty)).normalize()
    }

    /// Unit ray through the centre of patch pixel `(col, row)`.
    pub fn pixel_ray(&self, col: usize, row: usize) -> Vec3 {
        let nx = 2.0 * (col as f64 + 0.5) / self.width as f64 - 1.0;
        let ny = 1.0 - 2.0 * (row as f64 + 0.5) / self.height as f64;
        self.ray_ndc(nx, ny)
    }

    /// Normalised window coordinates of a direction, or `None` if the
    /// direction lies behind the tangent plane. Values outside `[-1, 1]` mean
    /// the direction is outside the window.
    pub fn project_ndc(&self, v: &Vec3) -> Option<(f64, f64)> {
        let (f, r, u) = self.basis();
        let z = v.dot(&f);
        if z <= 0.0 {
            return None;
        }
        let (tx, ty) = self.half_extent();
        Some((v.dot(&r) / z / tx, v.dot(&u) / z / ty))
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        matches!(self.project_ndc(v), Some((x, y)) if x.abs() <= 1.0 && y.abs() <= 1.0)
    }

    /// Continuous patch-pixel coordinates from normalised coordinates.
    pub fn ndc_to_pixel(&self, nx: f64, ny: f64) -> (f64, f64) {
        (
            (nx + 1.0) * 0.5 * self.width as f64 - 0.5,
            (1.0 - ny) * 0.5 * self.height as f64 - 0.5,
        )
    }

    pub fn with_resolution(&self, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..*self
        }
    }
}

/// A planar image extracted through a gnomonic window, together with the
/// world ray of every pixel (row-major).
#[derive(Debug, Clone)]
pub struct PlanarPatch {
    pub window: GnomonicWindow,
    pub image: Raster,
    pub rays: Vec<Vec3>,
}

/// Renders the gnomonic projection of `src` about the window centre using
/// bilinear resampling.
pub fn gnomonic_sample(src: &EquirectGrid, w: &GnomonicWindow) -> Result<PlanarPatch> {
    // re-validate: windows may be built field by field
    let w = GnomonicWindow::new(w.center, w.fov_lon, w.fov_lat, w.width, w.height)?;
    let ch = src.channels();
    let mut data = vec![0.0; w.width * w.height * ch];
    let mut rays = Vec::with_capacity(w.width * w.height);
    for row in 0..w.height {
        for col in 0..w.width {
            let ray = w.pixel_ray(col, row);
            let i = (row * w.width + col) * ch;
            src.sample(SphericalDir::from_vec3(&ray), &mut data[i..i + ch]);
            rays.push(ray);
        }
    }
    Ok(PlanarPatch {
        window: w,
        image: Raster::new(w.width, w.height, ch, data)?,
        rays,
    })
}
