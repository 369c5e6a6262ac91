//! Image and map files: portable float maps, PNG, and the TOML sidecar that
//! accompanies stored saliency maps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::salmap::{Normalization, SaliencyMap};
use crate::sphere::{EquirectGrid, Raster};

/// Reads a PFM file (`Pf` grayscale or `PF` colour), top row first.
pub fn read_pfm(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|msg| Error::format(path, msg))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<Raster, String> {
    // header: three whitespace-separated tokens then a single whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(format!("not a PFM file (magic `{other}`)")),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad PFM dimension `{s}`"));
    let width = parse(&tokens[1])?;
    let height = parse(&tokens[2])?;
    let scale: f64 = tokens[3].parse().map_err(|_| format!("bad PFM scale `{}`", tokens[3]))?;
    let little = scale < 0.0;
    let n = width * height * channels;
    let body = bytes.get(pos..pos + 4 * n).ok_or("truncated PFM data")?;
    let mut data = vec![0.0; n];
    let row_len = width * channels;
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        // PFM stores the bottom row first
        let (row, off) = (i / row_len, i % row_len);
        data[(height - 1 - row) * row_len + off] = v as f64;
    }
    Raster::new(width, height, channels, data).map_err(|e| e.to_string())
}

/// Writes a 1- or 3-channel raster as little-endian PFM.
pub fn write_pfm(path: &Path, raster: &Raster) -> Result<()> {
    let magic = match raster.channels {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::InvalidParameter(format!("PFM holds 1 or 3 channels, not {c}")));
        }
    };
    let mut out = Vec::with_capacity(raster.data.len() * 4 + 32);
    write!(out, "{magic}\n{} {}\n-1.0\n", raster.width, raster.height).expect("writing to memory");
    let row_len = raster.width * raster.channels;
    for row in (0..raster.height).rev() {
        for v in &raster.data[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Reads PFM as stored, or an 8/16-bit image scaled to `[0, 1]`. Alpha is
/// dropped; grayscale stays single-channel.
pub fn read_raster(path: &Path) -> Result<Raster> {
    if is_pfm(path) {
        return read_pfm(path);
    }
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let buf = img.to_rgb32f();
        Raster::new(w, h, 3, buf.into_raw().into_iter().map(f64::from).collect())
    } else {
        let buf = img.to_luma32f();
        Raster::new(w, h, 1, buf.into_raw().into_iter().map(f64::from).collect())
    }
}

pub fn read_equirect(path: &Path) -> Result<EquirectGrid> {
    EquirectGrid::new(read_raster(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes a raster with values in `[0, 1]` (clamped) as PNG, or as PFM when
/// the extension says so.
pub fn write_raster(path: &Path, raster: &Raster, sixteen_bit: bool) -> Result<()> {
    if is_pfm(path) {
        return write_pfm(path, raster);
    }
    let (w, h) = (raster.width as u32, raster.height as u32);
    let q8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let q16 = |v: f64| (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
    let img: DynamicImage = match (raster.channels, sixteen_bit) {
        (1, false) => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raster.data.iter().map(|&v| q8(v)).collect())
            .map(DynamicImage::ImageLuma8),
        (1, true) => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raster.data.iter().map(|&v| q16(v)).collect())
            .map(DynamicImage::ImageLuma16),
        (3, false) => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raster.data.iter().map(|&v| q8(v)).collect())
            .map(DynamicImage::ImageRgb8),
        (3, true) => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raster.data.iter().map(|&v| q16(v)).collect())
            .map(DynamicImage::ImageRgb16),
        (c, _) => {
            return Err(Error::InvalidParameter(format!("images hold 1 or 3 channels, not {c}")));
        }
    }
    .expect("buffer length matches raster dimensions");
    img.save(path)?;
    Ok(())
}

/// Metadata stored next to a saliency map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub normalization: Normalization,
    pub width: usize,
    pub height: usize,
    pub source: String,
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Stores `<stem>.pfm`, an 8-bit max-normalised `<stem>.png` preview and
/// `<stem>.toml`. Returns the PFM path.
pub fn write_saliency(stem: &Path, map: &SaliencyMap, source: &str) -> Result<PathBuf> {
    let grid = map.to_grid();
    let pfm = with_ext(stem, "pfm");
    write_pfm(&pfm, grid.raster())?;
    let max = map.max();
    let preview = Raster {
        data: grid.data().iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect(),
        ..grid.raster().clone()
    };
    write_raster(&with_ext(stem, "png"), &preview, false)?;
    let sidecar = MapSidecar {
        normalization: map.normalization(),
        width: map.dims().width,
        height: map.dims().height,
        source: source.to_string(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let toml_path = with_ext(stem, "toml");
    fs::write(&toml_path, text).map_err(|e| Error::io(&toml_path, e))?;
    Ok(pfm)
}

/// Loads a map from PFM or PNG. A `.toml` sidecar next to it supplies the
/// normalisation tag; without one the map is tagged raw.
pub fn read_saliency(path: &Path) -> Result<SaliencyMap> {
    let raster = read_raster(path)?.to_gray();
    let grid = EquirectGrid::new(raster).map_err(|e| Error::format(path, e.to_string()))?;
    let sidecar_path = with_ext(path, "toml");
    let norm = if is_pfm(path) && sidecar_path.exists() {
        let text = fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let meta: MapSidecar = toml::from_str(&text).map_err(|e| Error::format(&sidecar_path, e.message()))?;
        if (meta.width, meta.height) != (grid.dims().width, grid.dims().height) {
            return Err(Error::format(&sidecar_path, "sidecar dimensions differ from the map"));
        }
        meta.normalization
    } else {
        Normalization::RawCounts
    };
    // f32 storage loses the exact normalisation; re-establish it
    let raw = SaliencyMap::from_grid(&grid, Normalization::RawCounts).map_err(|e| Error::format(path, e.to_string()))?;
    crate::salmap::normalize(&raw, norm)
}
