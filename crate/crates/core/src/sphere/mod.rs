//! Spherical coordinates and the sphere-to-plane projections.
//!
//! Conventions used throughout the crate:
//!
//! * World frame is right-handed: `+X` points at (lat 0, lon 0), `+Y` at
//!   (lat 0, lon +90), `+Z` at the north pole (lat +90).
//! * Equirectangular grids have `width == 2 * height`. Pixel `(col 0, row 0)`
//!   touches the (lat +90, lon -180) corner; pixel centres sit at half-integer
//!   offsets, so pixel `(c, r)` looks at
//!   `lat = 90 - (r + 0.5) * 180 / height`, `lon = -180 + (c + 0.5) * 360 / width`.
//! * Image "right" is always the direction of increasing longitude (east) and
//!   image "up" the direction of increasing latitude, for equirectangular
//!   images, cube faces and gnomonic patches alike.

mod cubemap;
mod gnomonic;
mod patches;
mod raster;

pub use cubemap::{cubemap_to_equirect, equirect_to_cubemap, CubeFace, CubeMap};
pub use gnomonic::{gnomonic_sample, GnomonicWindow, PlanarPatch};
pub use patches::{patch_centers, PatchLayout};
pub use raster::{lerp, EquirectGrid, Raster};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Wraps a longitude into `[-180, 180)`.
pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Shortest signed longitude difference `a - b`, in `[-180, 180)`.
pub fn lon_diff(a: f64, b: f64) -> f64 {
    wrap_lon(a - b)
}

/// A direction on the unit sphere in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDir {
    pub lat: f64,
    pub lon: f64,
}

impl SphericalDir {
    /// Builds a direction, wrapping `lon` and clamping `lat` into `[-90, 90]`.
    pub fn new(lat: f64, lon: f64) -> Self {
        Self {
            lat: lat.clamp(-90.0, 90.0),
            lon: wrap_lon(lon),
        }
    }

    /// Like [`SphericalDir::new`] but rejects latitudes outside `[-90, 90]`
    /// and non-finite values instead of clamping.
    pub fn try_new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite direction ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidParameter(format!(
                "latitude {lat} outside [-90, 90]"
            )));
        }
        Ok(Self::new(lat, lon))
    }

    pub fn to_vec3(self) -> Vec3 {
        let (slat, clat) = self.lat.to_radians().sin_cos();
        let (slon, clon) = self.lon.to_radians().sin_cos();
        Vec3::new(clat * clon, clat * slon, slat)
    }

    /// Direction of a (not necessarily normalised) non-zero vector.
    pub fn from_vec3(v: &Vec3) -> Self {
        let horiz = v.x.hypot(v.y);
        let lat = v.z.atan2(horiz).to_degrees();
        let lon = if horiz == 0.0 {
            0.0
        } else {
            v.y.atan2(v.x).to_degrees()
        };
        Self::new(lat, lon)
    }

    /// Same direction rotated by `delta` degrees of longitude.
    pub fn rotated_lon(self, delta: f64) -> Self {
        Self::new(self.lat, self.lon + delta)
    }

    /// Local east (increasing longitude) and north tangent vectors.
    pub fn tangent_frame(self) -> (Vec3, Vec3) {
        let (slat, clat) = self.lat.to_radians().sin_cos();
        let (slon, clon) = self.lon.to_radians().sin_cos();
        let east = Vec3::new(-slon, clon, 0.0);
        let north = Vec3::new(-slat * clon, -slat * slon, clat);
        (east, north)
    }
}

/// Great-circle angle between two directions, in degrees within `[0, 180]`.
pub fn angular_distance(a: SphericalDir, b: SphericalDir) -> f64 {
    vec_angle(&a.to_vec3(), &b.to_vec3())
}

/// Angle between two vectors in degrees. Uses `atan2(|a x b|, a . b)`, which
/// stays accurate for nearly parallel and nearly antipodal vectors.
pub fn vec_angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// Normalised mean of unit vectors. `None` when the mean vanishes.
pub fn spherical_centroid<'a, I>(dirs: I) -> Option<Vec3>
where
    I: IntoIterator<Item = &'a Vec3>,
{
    let sum = dirs.into_iter().fold(Vec3::zeros(), |acc, v| acc + v);
    let n = sum.norm();
    (n > 1e-12).then(|| sum / n)
}

/// Equirectangular grid dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

impl GridDims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::InvalidGrid(format!(
                "{width}x{height}: width must equal 2 * height and be non-zero"
            )));
        }
        Ok(Self { width, height })
    }

    /// Grid of the given height (width is twice that).
    pub fn with_height(height: usize) -> Result<Self> {
        Self::new(2 * height, height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angular size of one pixel, in degrees (same along both axes).
    pub fn pixel_deg(&self) -> f64 {
        180.0 / self.height as f64
    }

    pub fn row_lat(&self, row: usize) -> f64 {
        90.0 - (row as f64 + 0.5) * self.pixel_deg()
    }

    pub fn col_lon(&self, col: usize) -> f64 {
        -180.0 + (col as f64 + 0.5) * self.pixel_deg()
    }

    /// Direction of a pixel centre.
    pub fn pixel_to_dir(&self, col: usize, row: usize) -> Result<SphericalDir> {
        if col >= self.width || row >= self.height {
            return Err(Error::PixelOutOfRange {
                col,
                row,
                width: self.width,
                height: self.height,
            });
        }
        Ok(SphericalDir::new(self.row_lat(row), self.col_lon(col)))
    }

    /// Pixel containing a direction. Longitudes wrap; latitudes at the poles
    /// fall into the edge rows. Points exactly on a cell boundary belong to
    /// the cell on the lower-index side, so that lon -180 and lon 180 - eps
    /// land in the same (last) column.
    pub fn dir_to_pixel(&self, d: SphericalDir) -> (usize, usize) {
        let u = (d.lon + 180.0) / self.pixel_deg();
        let v = (90.0 - d.lat) / self.pixel_deg();
        let col = (u.ceil() as i64 - 1).rem_euclid(self.width as i64) as usize;
        let row = (v.ceil() as i64 - 1).clamp(0, self.height as i64 - 1) as usize;
        (col, row)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Continuous pixel coordinates of a direction, with pixel centres at
    /// integers: `x` in `[-0.5, width - 0.5)`, `y` in `[-0.5, height - 0.5]`.
    pub fn continuous_coords(&self, d: SphericalDir) -> (f64, f64) {
        let x = (d.lon + 180.0) / self.pixel_deg() - 0.5;
        let y = (90.0 - d.lat) / self.pixel_deg() - 0.5;
        (x, y)
    }

    /// Iterator over the directions of every pixel centre, row-major.
    pub fn pixel_dirs(&self) -> impl Iterator<Item = SphericalDir> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width).map(move |c| SphericalDir::new(self.row_lat(r), self.col_lon(c)))
        })
    }
}
