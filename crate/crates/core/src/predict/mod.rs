//! Lifting planar saliency predictors to the sphere, plus the time-dependent
//! window model and head-orientation saliency.
//!
//! A [`ProjectionStrategy`] expands into projection units (the whole
//! equirectangular image, six cube faces, or a set of gnomonic patches). Each
//! unit is rendered to a planar image, predicted independently and
//! reprojected. External predictors plug into the same path through the
//! file-based manifest in [`external`].

pub mod external;
mod spectral;
mod temporal;

pub use spectral::SpectralResidual;
pub use temporal::{head_saliency, time_dependent, HeadSalParams, HeadSpeed, DEFAULT_INIT_HALF_WIDTH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{apply_equator_bias, EquatorBias};
use crate::error::{Error, Result};
use crate::salmap::{normalize, Normalization, SaliencyMap};
use crate::sphere::{
    cubemap_to_equirect, equirect_to_cubemap, gnomonic_sample, patch_centers, CubeFace, CubeMap, EquirectGrid,
    GridDims, PatchLayout, Raster, SphericalDir,
};

/// Planar image in, same-size non-negative saliency out.
pub trait PlanarPredictor: Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn predict(&self, image: &Raster) -> Result<Raster>;
}

/// Predicts the same value everywhere. Useful for checking the lifting path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPredictor(pub f64);

impl PlanarPredictor for ConstantPredictor {
    fn name(&self) -> &str {
        "constant"
    }

    fn version(&self) -> &str {
        "1"
    }

    fn predict(&self, image: &Raster) -> Result<Raster> {
        Ok(Raster::filled(image.width, image.height, 1, self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProjectionStrategy {
    Equirect,
    Cubemap {
        /// Face side in pixels; a quarter of the panorama width when absent.
        #[serde(default)]
        face_res: Option<usize>,
    },
    Patch {
        #[serde(default = "default_patch_fov")]
        fov_deg: f64,
        #[serde(default = "default_patch_overlap")]
        overlap_deg: f64,
        #[serde(default = "default_patch_res")]
        res: usize,
    },
}

fn default_patch_fov() -> f64 {
    90.0
}

fn default_patch_overlap() -> f64 {
    30.0
}

fn default_patch_res() -> usize {
    256
}

impl ProjectionStrategy {
    pub fn patch_default() -> Self {
        Self::Patch {
            fov_deg: default_patch_fov(),
            overlap_deg: default_patch_overlap(),
            res: default_patch_res(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Equirect => "equirect",
            Self::Cubemap { .. } => "cubemap",
            Self::Patch { .. } => "patch",
        }
    }
}

/// One planar view produced by a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProjectionUnit {
    Equirect { width: usize, height: usize },
    Face { face: usize, res: usize },
    Patch { index: usize, window: crate::sphere::GnomonicWindow },
}

impl ProjectionUnit {
    pub fn size(&self) -> (usize, usize) {
        match self {
            Self::Equirect { width, height } => (*width, *height),
            Self::Face { res, .. } => (*res, *res),
            Self::Patch { window, .. } => (window.width, window.height),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Equirect { .. } => "equirect".into(),
            Self::Face { face, .. } => format!("face-{}", CubeFace::ALL[*face].name()),
            Self::Patch { index, .. } => format!("patch-{index:03}"),
        }
    }
}

/// The units of a strategy for a panorama of the given size, plus the patch
/// layout when blending is needed.
#[derive(Debug, Clone)]
pub struct UnitPlan {
    pub strategy: ProjectionStrategy,
    pub pano_dims: GridDims,
    pub units: Vec<ProjectionUnit>,
    layout: Option<PatchLayout>,
}

impl UnitPlan {
    pub fn new(strategy: ProjectionStrategy, pano_dims: GridDims) -> Result<Self> {
        let (units, layout) = match strategy {
            ProjectionStrategy::Equirect => (
                vec![ProjectionUnit::Equirect {
                    width: pano_dims.width,
                    height: pano_dims.height,
                }],
                None,
            ),
            ProjectionStrategy::Cubemap { face_res } => {
                let res = face_res.unwrap_or(pano_dims.width / 4);
                if res == 0 {
                    return Err(Error::InvalidParameter("cube face resolution must be >= 1".into()));
                }
                ((0..6).map(|face| ProjectionUnit::Face { face, res }).collect(), None)
            }
            ProjectionStrategy::Patch {
                fov_deg,
                overlap_deg,
                res,
            } => {
                if res == 0 {
                    return Err(Error::InvalidParameter("patch resolution must be >= 1".into()));
                }
                let layout = patch_centers(fov_deg, overlap_deg)?.with_resolution(res);
                let units = layout
                    .windows
                    .iter()
                    .enumerate()
                    .map(|(index, w)| ProjectionUnit::Patch { index, window: *w })
                    .collect();
                (units, Some(layout))
            }
        };
        Ok(Self {
            strategy,
            pano_dims,
            units,
            layout,
        })
    }

    /// Planar input images, one per unit.
    pub fn render(&self, pano: &EquirectGrid) -> Result<Vec<Raster>> {
        if pano.dims() != self.pano_dims {
            return Err(Error::DimensionMismatch(format!(
                "plan made for {}x{}, panorama is {}x{}",
                self.pano_dims.width,
                self.pano_dims.height,
                pano.dims().width,
                pano.dims().height
            )));
        }
        match self.strategy {
            ProjectionStrategy::Equirect => Ok(vec![pano.raster().clone()]),
            ProjectionStrategy::Cubemap { .. } => {
                let ProjectionUnit::Face { res, .. } = self.units[0] else {
                    unreachable!("cubemap plans hold faces")
                };
                Ok(equirect_to_cubemap(pano, res)?.into_faces())
            }
            ProjectionStrategy::Patch { .. } => self
                .units
                .par_iter()
                .map(|u| match u {
                    ProjectionUnit::Patch { window, .. } => Ok(gnomonic_sample(pano, window)?.image),
                    _ => unreachable!("patch plans hold patches"),
                })
                .collect(),
        }
    }

    /// Reprojects per-unit planar saliency onto an equirectangular grid.
    /// The result is raw (not normalised).
    pub fn stitch(&self, outputs: &[Raster], dims: GridDims) -> Result<SaliencyMap> {
        if outputs.len() != self.units.len() {
            return Err(Error::PredictorOutput(format!(
                "expected {} unit outputs, got {}",
                self.units.len(),
                outputs.len()
            )));
        }
        for (u, o) in self.units.iter().zip(outputs) {
            check_output(u, o)?;
        }
        let data = match self.strategy {
            ProjectionStrategy::Equirect => {
                let grid = EquirectGrid::new(outputs[0].clone())?;
                let grid = if grid.dims() == dims { grid } else { grid.resample(dims) };
                grid.into_raster().data
            }
            ProjectionStrategy::Cubemap { .. } => {
                let cube = CubeMap::new(outputs.to_vec())?;
                cubemap_to_equirect(&cube, dims).into_raster().data
            }
            ProjectionStrategy::Patch { .. } => {
                let layout = self.layout.as_ref().expect("patch plans carry a layout");
                blend_patches(layout, outputs, dims)?
            }
        };
        SaliencyMap::new(dims, data.into_iter().map(|v| v.max(0.0)).collect(), Normalization::RawCounts)
    }
}

fn check_output(unit: &ProjectionUnit, out: &Raster) -> Result<()> {
    let (w, h) = unit.size();
    if (out.width, out.height, out.channels) != (w, h, 1) {
        return Err(Error::PredictorOutput(format!(
            "{}: expected a {w}x{h} single-channel map, got {}x{}x{}",
            unit.label(),
            out.width,
            out.height,
            out.channels
        )));
    }
    if let Some(v) = out.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::PredictorOutput(format!(
            "{}: saliency values must be finite and non-negative, found {v}",
            unit.label()
        )));
    }
    Ok(())
}

/// Normalised blend of patch outputs at every grid pixel.
fn blend_patches(layout: &PatchLayout, outputs: &[Raster], dims: GridDims) -> Result<Vec<f64>> {
    let mut data = vec![0.0; dims.len()];
    let failed = data
        .par_chunks_mut(dims.width)
        .enumerate()
        .map(|(row, out)| {
            let lat = dims.row_lat(row);
            let mut sample = [0.0];
            for (col, o) in out.iter_mut().enumerate() {
                let v = SphericalDir::new(lat, dims.col_lon(col)).to_vec3();
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (i, win) in layout.windows.iter().enumerate() {
                    let w = layout.blend_weight(i, &v);
                    if w <= 0.0 {
                        continue;
                    }
                    let (nx, ny) = win.project_ndc(&v).expect("positive weight implies in front");
                    let (x, y) = win.ndc_to_pixel(nx, ny);
                    outputs[i].sample_clamped(x, y, &mut sample);
                    acc += w * sample[0];
                    wsum += w;
                }
                if wsum <= 0.0 {
                    return Some((col, row));
                }
                *o = acc / wsum;
            }
            None
        })
        .find_first(Option::is_some)
        .flatten();
    if let Some((col, row)) = failed {
        return Err(Error::InvalidParameter(format!("patch layout leaves pixel ({col}, {row}) uncovered")));
    }
    Ok(data)
}

/// Full prediction: render units, run the predictor on each (concurrently),
/// reproject, optionally apply the equator bias, normalise to sum one.
pub fn predict(
    pano: &EquirectGrid,
    predictor: &dyn PlanarPredictor,
    strategy: ProjectionStrategy,
    bias: Option<&EquatorBias>,
    dims: GridDims,
) -> Result<SaliencyMap> {
    let plan = UnitPlan::new(strategy, pano.dims())?;
    let inputs = plan.render(pano)?;
    let outputs = inputs
        .par_iter()
        .map(|img| predictor.predict(img))
        .collect::<Result<Vec<_>>>()?;
    finish(&plan.stitch(&outputs, dims)?, bias)
}

pub(crate) fn finish(raw: &SaliencyMap, bias: Option<&EquatorBias>) -> Result<SaliencyMap> {
    match bias {
        Some(b) => apply_equator_bias(raw, b),
        None => normalize(raw, Normalization::SumOne),
    }
}
