//! Grayscale image loading, physical-scale sidecars, intensity normalisation
//! and PGM output.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::DynamicImage;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A grayscale intensity image in `[0, 255]` with a physical pixel size.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pixels: Grid<f64>,
    nm_per_pixel: f64,
}

impl GrayImage {
    pub fn new(pixels: Grid<f64>, nm_per_pixel: f64) -> Result<Self> {
        if pixels.width() < 2 || pixels.height() < 2 {
            return Err(Error::input(format!(
                "image must be at least 2x2, got {}x{}",
                pixels.width(),
                pixels.height()
            )));
        }
        if !(nm_per_pixel.is_finite() && nm_per_pixel > 0.0) {
            return Err(Error::input(format!(
                "nm_per_pixel must be positive, got {nm_per_pixel}"
            )));
        }
        if let Some(v) = pixels
            .as_slice()
            .iter()
            .find(|v| !(0.0..=255.0).contains(*v))
        {
            return Err(Error::input(format!("intensity {v} outside [0, 255]")));
        }
        Ok(GrayImage {
            pixels,
            nm_per_pixel,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        *self.pixels.get(row, col)
    }

    pub fn pixels(&self) -> &Grid<f64> {
        &self.pixels
    }

    pub fn nm_per_pixel(&self) -> f64 {
        self.nm_per_pixel
    }

    /// Rounds intensities to the nearest integer for 8-bit output.
    pub fn quantized(&self) -> Grid<u8> {
        self.pixels.map(|v| v.round().clamp(0.0, 255.0) as u8)
    }
}

/// Raw instrument values (phase angle in degrees), not yet mapped to intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPhaseMatrix {
    pub values: Grid<f64>,
}

/// Physical metadata stored next to each image as JSON.
#[derive(Clone, Debug, Deserialize)]
pub struct Sidecar {
    pub scan_size_nm: Option<f64>,
    /// Groups images taken from the same sample for aggregate statistics.
    #[serde(default)]
    pub sample_id: Option<String>,
}

impl Sidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn scan_size_nm(&self, path: &Path) -> Result<f64> {
        match self.scan_size_nm {
            Some(s) if s.is_finite() && s > 0.0 => Ok(s),
            Some(s) => Err(Error::format(
                path,
                format!("scan_size_nm must be positive, got {s}"),
            )),
            None => Err(Error::format(path, "missing key `scan_size_nm`")),
        }
    }
}

/// Linear min-max map of raw values onto `[0, 255]`. Constant input maps to all zeros.
pub fn normalize_intensity(raw: &RawPhaseMatrix) -> Result<Grid<f64>> {
    let values = &raw.values;
    if values.is_empty() {
        return Err(Error::input("raw phase matrix is empty"));
    }
    values.ensure_finite("raw phase matrix")?;
    let (lo, hi) = values
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi == lo {
        return Ok(values.map(|_| 0.0));
    }
    let span = hi - lo;
    Ok(values.map(|&v| ((v - lo) / span * 255.0).clamp(0.0, 255.0)))
}

/// Decodes an 8- or 16-bit grayscale PNG/PGM into intensities in `[0, 255]`.
pub fn read_gray(path: &Path) -> Result<Grid<f64>> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader
        .decode()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(img) => img
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) * 255.0 / 65535.0)
            .collect(),
        other => {
            return Err(Error::format(
                path,
                format!("expected a grayscale image, found {:?}", other.color()),
            ))
        }
    };
    Grid::from_vec(w, h, data)
}

/// Loads an image and derives its pixel size from the sidecar's `scan_size_nm`.
pub fn load_image(image_path: &Path, sidecar_path: &Path) -> Result<GrayImage> {
    let sidecar = Sidecar::read(sidecar_path)?;
    let scan = sidecar.scan_size_nm(sidecar_path)?;
    let pixels = read_gray(image_path)?;
    let nm_per_pixel = scan / pixels.width() as f64;
    GrayImage::new(pixels, nm_per_pixel).map_err(|e| Error::format(image_path, e.to_string()))
}

/// Encodes an 8-bit binary PGM (P5).
pub fn encode_pgm8(img: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_slice());
    out
}

/// Encodes a 16-bit binary PGM (P5, big-endian samples).
pub fn encode_pgm16(img: &Grid<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    for v in img.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_pgm8(path: &Path, img: &Grid<u8>) -> Result<()> {
    write_bytes(path, &encode_pgm8(img))
}

pub fn write_pgm16(path: &Path, img: &Grid<u16>) -> Result<()> {
    write_bytes(path, &encode_pgm16(img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(values: Vec<f64>) -> RawPhaseMatrix {
        let n = values.len();
        RawPhaseMatrix {
            values: Grid::from_vec(n, 1, values).unwrap(),
        }
    }

    #[test]
    fn normalize_maps_endpoints() {
        let out = normalize_intensity(&raw(vec![-180.0, 0.0, 180.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 127.5, 255.0]);
    }

    #[test]
    fn normalize_constant_is_zero() {
        let out = normalize_intensity(&raw(vec![42.0; 6])).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_in_range_is_identity() {
        let out = normalize_intensity(&raw(vec![0.0, 255.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 255.0]);
    }

    #[test]
    fn normalize_rejects_nan() {
        assert!(normalize_intensity(&raw(vec![1.0, f64::NAN])).is_err());
        assert!(normalize_intensity(&raw(vec![f64::INFINITY, 0.0])).is_err());
    }

    #[test]
    fn gray_image_rejects_bad_scale_and_range() {
        let g = Grid::filled(2, 2, 0.0);
        assert!(GrayImage::new(g.clone(), 0.0).is_err());
        assert!(GrayImage::new(Grid::filled(2, 2, 256.0), 1.0).is_err());
        assert!(GrayImage::new(Grid::filled(1, 2, 0.0), 1.0).is_err());
        assert!(GrayImage::new(g, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn normalize_bounded(values in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let out = normalize_intensity(&raw(values)).unwrap();
            prop_assert!(out.as_slice().iter().all(|v| (0.0..=255.0).contains(v)));
        }

        #[test]
        fn normalize_affine_invariant(
            mut values in prop::collection::vec(0f64..1e3, 0..50),
            a in 0.5f64..4.0,
            b in -1e3f64..1e3,
        ) {
            values.push(0.0);
            values.push(1e3);
            let base = normalize_intensity(&raw(values.clone())).unwrap();
            let shifted = normalize_intensity(&raw(values.iter().map(|v| a * v + b).collect())).unwrap();
            for (x, y) in base.as_slice().iter().zip(shifted.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }
}
