//! Map files: an 8-bit portable graymap plus a `key=value` sidecar with the
//! same stem and a `.meta` extension.
//!
//! ```text
//! # maze.meta
//! resolution=0.1
//! inflation_radius=0.35
//! origin_x=0
//! origin_y=0
//! ```
//!
//! `resolution` is required. `inflation_radius` defaults to
//! [`DEFAULT_INFLATION_RADIUS`], the origin to `(0, 0)`.

use std::fs;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use super::{OccupancyGrid, Raster, DEFAULT_INFLATION_RADIUS};
use crate::config::KeyValues;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMeta {
    pub resolution: f64,
    pub inflation_radius: f64,
    pub origin: (f64, f64),
}

impl MapMeta {
    pub fn new(resolution: f64) -> Self {
        Self {
            resolution,
            inflation_radius: DEFAULT_INFLATION_RADIUS,
            origin: (0.0, 0.0),
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let kv = KeyValues::parse(text, source)?;
        kv.reject_unknown(&["resolution", "inflation_radius", "origin_x", "origin_y"])?;
        let resolution = kv
            .f64("resolution")?
            .ok_or_else(|| Error::parse(source, 0, "missing key `resolution`"))?;
        Ok(Self {
            resolution,
            inflation_radius: kv.f64("inflation_radius")?.unwrap_or(DEFAULT_INFLATION_RADIUS),
            origin: (
                kv.f64("origin_x")?.unwrap_or(0.0),
                kv.f64("origin_y")?.unwrap_or(0.0),
            ),
        })
    }

    pub fn render(&self) -> String {
        format!(
            "resolution={}\ninflation_radius={}\norigin_x={}\norigin_y={}\n",
            self.resolution, self.inflation_radius, self.origin.0, self.origin.1
        )
    }
}

pub fn sidecar_path(map: &Path) -> PathBuf {
    map.with_extension("meta")
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_luma8();
    Raster::new(img.width() as usize, img.height() as usize, img.into_raw())
}

/// Loads a graymap and its sidecar into a grid. `inflation_override`
/// replaces the sidecar inflation radius when given.
pub fn load_map(path: &Path, inflation_override: Option<f64>) -> Result<(OccupancyGrid, MapMeta)> {
    let raster = read_raster(path)?;
    let meta_path = sidecar_path(path);
    let text = fs::read_to_string(&meta_path)?;
    let mut meta = MapMeta::parse(&text, &meta_path.display().to_string())?;
    if let Some(r) = inflation_override {
        meta.inflation_radius = r;
    }
    let grid = OccupancyGrid::load_with_origin(&raster, meta.resolution, meta.inflation_radius, meta.origin)?;
    Ok((grid, meta))
}

/// Writes a raster as binary PGM along with its sidecar.
pub fn save_map(path: &Path, raster: &Raster, meta: &MapMeta) -> Result<()> {
    if raster.pixels.len() != raster.width * raster.height {
        return Err(Error::InvalidParameter("raster size mismatch".into()));
    }
    let mut bytes = Vec::new();
    PnmEncoder::new(&mut bytes)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&raster.pixels, raster.width as u32, raster.height as u32, ExtendedColorType::L8)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), meta.render())?;
    Ok(())
}
