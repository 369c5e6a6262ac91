//! Cube-map projection.
//!
//! Faces are stored in the order `+X, -X, +Y, -Y, +Z, -Z`. Each face is a
//! square raster seen from the centre of the sphere with "right" pointing
//! toward increasing longitude and "up" toward the north pole; the polar
//! faces continue upward from the `+X` face (the top edge of `+Z` borders
//! `-X`, the bottom edge of `-Z` borders `-X`).
//!
//! | face | forward    | right      | up         |
//! |------|------------|------------|------------|
//! | +X   | ( 1, 0, 0) | ( 0, 1, 0) | ( 0, 0, 1) |
//! | -X   | (-1, 0, 0) | ( 0,-1, 0) | ( 0, 0, 1) |
//! | +Y   | ( 0, 1, 0) | (-1, 0, 0) | ( 0, 0, 1) |
//! | -Y   | ( 0,-1, 0) | ( 1, 0, 0) | ( 0, 0, 1) |
//! | +Z   | ( 0, 0, 1) | ( 0, 1, 0) | (-1, 0, 0) |
//! | -Z   | ( 0, 0,-1) | ( 0, 1, 0) | ( 1, 0, 0) |

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EquirectGrid, GridDims, Raster, SphericalDir, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CubeFace {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [
        CubeFace::PosX,
        CubeFace::NegX,
        CubeFace::PosY,
        CubeFace::NegY,
        CubeFace::PosZ,
        CubeFace::NegZ,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CubeFace::PosX => "px",
            CubeFace::NegX => "nx",
            CubeFace::PosY => "py",
            CubeFace::NegY => "ny",
            CubeFace::PosZ => "pz",
            CubeFace::NegZ => "nz",
        }
    }

    /// `(forward, right, up)` basis of the face.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        let v = Vec3::new;
        match self {
            CubeFace::PosX => (v(1., 0., 0.), v(0., 1., 0.), v(0., 0., 1.)),
            CubeFace::NegX => (v(-1., 0., 0.), v(0., -1., 0.), v(0., 0., 1.)),
            CubeFace::PosY => (v(0., 1., 0.), v(-1., 0., 0.), v(0., 0., 1.)),
            CubeFace::NegY => (v(0., -1., 0.), v(1., 0., 0.), v(0., 0., 1.)),
            CubeFace::PosZ => (v(0., 0., 1.), v(0., 1., 0.), v(-1., 0., 0.)),
            CubeFace::NegZ => (v(0., 0., -1.), v(0., 1., 0.), v(1., 0., 0.)),
        }
    }

    /// Face hit by a direction vector (dominant axis).
    pub fn of(v: &Vec3) -> CubeFace {
        let (ax, ay, az) = (v.x.abs(), v.y.abs(), v.z.abs());
        if ax >= ay && ax >= az {
            if v.x >= 0.0 {
                CubeFace::PosX
            } else {
                CubeFace::NegX
            }
        } else if ay >= az {
            if v.y >= 0.0 {
                CubeFace::PosY
            } else {
                CubeFace::NegY
            }
        } else if v.z >= 0.0 {
            CubeFace::PosZ
        } else {
            CubeFace::NegZ
        }
    }

    /// Ray through continuous face coordinates (pixel centres at integers).
    pub fn ray(self, x: f64, y: f64, face_res: usize) -> Vec3 {
        let (f, r, u) = self.basis();
        let a = 2.0 * (x + 0.5) / face_res as f64 - 1.0;
        let b = 1.0 - 2.0 * (y + 0.5) / face_res as f64;
        f + r * a + u * b
    }

    /// Continuous pixel coordinates of a direction on this face.
    pub fn project(self, v: &Vec3, face_res: usize) -> (f64, f64) {
        let (f, r, u) = self.basis();
        let z = v.dot(&f);
        let a = v.dot(&r) / z;
        let b = v.dot(&u) / z;
        let n = face_res as f64;
        ((a + 1.0) * 0.5 * n - 0.5, (1.0 - b) * 0.5 * n - 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeMap {
    face_res: usize,
    faces: Vec<Raster>,
}

impl CubeMap {
    pub fn new(faces: Vec<Raster>) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::InvalidGrid(format!("cube map needs 6 faces, got {}", faces.len())));
        }
        let res = faces[0].width;
        let ch = faces[0].channels;
        if faces.iter().any(|f| f.width != res || f.height != res || f.channels != ch) {
            return Err(Error::InvalidGrid(
                "cube faces must be square, equal-sized and share a channel count".into(),
            ));
        }
        Ok(Self { face_res: res, faces })
    }

    pub fn face_res(&self) -> usize {
        self.face_res
    }

    pub fn channels(&self) -> usize {
        self.faces[0].channels
    }

    pub fn face(&self, f: CubeFace) -> &Raster {
        &self.faces[f.index()]
    }

    pub fn faces(&self) -> &[Raster] {
        &self.faces
    }

    pub fn into_faces(self) -> Vec<Raster> {
        self.faces
    }

    /// Bilinear sample in a direction (clamped at face borders).
    pub fn sample(&self, d: &Vec3, out: &mut [f64]) {
        let face = CubeFace::of(d);
        let (x, y) = face.project(d, self.face_res);
        self.faces[face.index()].sample_clamped(x, y, out);
    }
}

/// Resamples an equirectangular grid onto six cube faces.
pub fn equirect_to_cubemap(src: &EquirectGrid, face_res: usize) -> Result<CubeMap> {
    if face_res < 1 {
        return Err(Error::InvalidParameter("face resolution must be >= 1".into()));
    }
    let ch = src.channels();
    let faces = CubeFace::ALL
        .par_iter()
        .map(|&face| {
            let mut data = vec![0.0; face_res * face_res * ch];
            for y in 0..face_res {
                for x in 0..face_res {
                    let ray = face.ray(x as f64, y as f64, face_res);
                    let i = (y * face_res + x) * ch;
                    src.sample(SphericalDir::from_vec3(&ray), &mut data[i..i + ch]);
                }
            }
            Raster {
                width: face_res,
                height: face_res,
                channels: ch,
                data,
            }
        })
        .collect();
    CubeMap::new(faces)
}

/// Resamples a cube map back onto an equirectangular grid.
pub fn cubemap_to_equirect(src: &CubeMap, dims: GridDims) -> EquirectGrid {
    let ch = src.channels();
    let mut data = vec![0.0; dims.len() * ch];
    data.par_chunks_mut(dims.width * ch)
        .enumerate()
        .for_each(|(row, out)| {
            let lat = dims.row_lat(row);
            for col in 0..dims.width {
                let d = SphericalDir::new(lat, dims.col_lon(col)).to_vec3();
                src.sample(&d, &mut out[col * ch..(col + 1) * ch]);
            }
        });
    EquirectGrid::new(Raster {
        width: dims.width,
        height: dims.height,
        channels: ch,
        data,
    })
    .expect("dims validated by GridDims")
}
