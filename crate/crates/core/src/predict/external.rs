//! File-based exchange with external planar predictors.
//!
//! [`export_units`] writes one input image per projection unit plus a
//! `manifest.json`. An external tool fills in the listed output maps (PFM or
//! PNG, same size as the input, single channel or colour converted to gray),
//! and [`stitch_manifest`] lifts them back to the sphere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{finish, ProjectionStrategy, ProjectionUnit, UnitPlan};
use crate::bias::EquatorBias;
use crate::error::{Error, Result};
use crate::io::{read_raster, write_raster};
use crate::salmap::{normalize, Normalization, SaliencyMap};
use crate::sphere::{cubemap_to_equirect, CubeMap, EquirectGrid, GridDims, Raster};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    pub unit: ProjectionUnit,
    /// Paths are relative to the manifest directory.
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub strategy: ProjectionStrategy,
    pub pano_width: usize,
    pub pano_height: usize,
    pub units: Vec<UnitEntry>,
}

/// Writes the planar inputs of every unit and the manifest into `dir`.
pub fn export_units(pano: &EquirectGrid, strategy: ProjectionStrategy, dir: &Path) -> Result<Manifest> {
    let plan = UnitPlan::new(strategy, pano.dims())?;
    let inputs = plan.render(pano)?;
    fs::create_dir_all(dir.join("inputs")).map_err(|e| Error::io(dir.join("inputs"), e))?;
    let mut units = Vec::with_capacity(plan.units.len());
    for (unit, img) in plan.units.iter().zip(&inputs) {
        let label = unit.label();
        let input = PathBuf::from("inputs").join(format!("{label}.png"));
        write_raster(&dir.join(&input), img, false)?;
        units.push(UnitEntry {
            unit: unit.clone(),
            input,
            output: PathBuf::from("outputs").join(format!("{label}.pfm")),
        });
    }
    let manifest = Manifest {
        strategy,
        pano_width: pano.dims().width,
        pano_height: pano.dims().height,
        units,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Output paths listed in the manifest that do not exist yet.
pub fn missing_outputs(manifest: &Manifest, dir: &Path) -> Vec<PathBuf> {
    manifest
        .units
        .iter()
        .map(|u| dir.join(&u.output))
        .filter(|p| !p.is_file())
        .collect()
}

/// Loads every external output listed in the manifest and lifts them to a
/// sum-one map on `dims`. Fails before reading anything if an output is
/// missing.
pub fn stitch_manifest(manifest_path: &Path, dims: GridDims, bias: Option<&EquatorBias>) -> Result<SaliencyMap> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let missing = missing_outputs(&manifest, dir);
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::PredictorOutput(format!("missing unit outputs: {}", list.join(", "))));
    }
    let plan = UnitPlan::new(manifest.strategy, GridDims::new(manifest.pano_width, manifest.pano_height)?)?;
    let listed: Vec<&ProjectionUnit> = manifest.units.iter().map(|u| &u.unit).collect();
    if listed != plan.units.iter().collect::<Vec<_>>() {
        return Err(Error::format(manifest_path, "units do not match the declared strategy"));
    }
    let outputs = manifest
        .units
        .iter()
        .map(|u| read_raster(&dir.join(&u.output)).map(|r| r.to_gray()))
        .collect::<Result<Vec<_>>>()?;
    finish(&plan.stitch(&outputs, dims)?, bias)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportTag {
    /// A 2:1 equirectangular map.
    Equirect,
    /// Six square faces side by side in the order +X, -X, +Y, -Y, +Z, -Z.
    CubemapFaces,
}

impl std::str::FromStr for ImportTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equirect" => Ok(Self::Equirect),
            "cubemap-faces" => Ok(Self::CubemapFaces),
            _ => Err(Error::InvalidParameter(format!(
                "unknown projection tag {s:?} (expected equirect or cubemap-faces)"
            ))),
        }
    }
}

/// Reads a precomputed saliency image, reprojects it to `dims` and
/// normalises to sum one.
pub fn import_saliency(path: &Path, tag: ImportTag, dims: GridDims) -> Result<SaliencyMap> {
    let img = read_raster(path)?.to_gray();
    let raw = raster_to_map(&img, tag, dims).map_err(|e| match e {
        Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    normalize(&raw, Normalization::SumOne)
}

/// Reprojection behind [`import_saliency`], on an in-memory gray image.
pub fn raster_to_map(img: &Raster, tag: ImportTag, dims: GridDims) -> Result<SaliencyMap> {
    let data = match tag {
        ImportTag::Equirect => {
            if img.width != 2 * img.height {
                return Err(Error::DimensionMismatch(format!(
                    "equirect map must be 2:1, got {}x{}",
                    img.width, img.height
                )));
            }
            let grid = EquirectGrid::new(img.clone())?;
            if grid.dims() == dims { grid } else { grid.resample(dims) }.into_raster().data
        }
        ImportTag::CubemapFaces => {
            let res = img.height;
            if img.width != 6 * res || res == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "cube-face strip must be 6:1, got {}x{}",
                    img.width, img.height
                )));
            }
            let faces = (0..6)
                .map(|f| {
                    let mut data = Vec::with_capacity(res * res);
                    for y in 0..res {
                        let row = y * img.width + f * res;
                        data.extend_from_slice(&img.data[row..row + res]);
                    }
                    Raster::new(res, res, 1, data)
                })
                .collect::<Result<Vec<_>>>()?;
            cubemap_to_equirect(&CubeMap::new(faces)?, dims).into_raster().data
        }
    };
    SaliencyMap::new(dims, data.into_iter().map(|v| v.max(0.0)).collect(), Normalization::RawCounts)
}
