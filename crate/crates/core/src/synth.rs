//! Deterministic two-texture test images with known ground truth.
//!
//! Region A holds uniform noise, region B a smooth product of sinusoids. The
//! default means differ so that the DFT-amplitude variance of small tiles
//! separates the regions by more than an order of magnitude.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::IndexMap;
use crate::error::{Error, Result};
use crate::features::stats4;
use crate::grid::Grid;
use crate::imgio::GrayImage;
use crate::rng;
use crate::transforms::Dft2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layout {
    /// Region A is the left half.
    VerticalSplit,
    /// Region A is the top half.
    HorizontalSplit,
    /// Region A is the disk of `radius` pixels around `(height/2, width/2)`.
    Disk { radius: f64 },
    /// Region A is every other vertical band of `width` pixels, starting at column 0.
    Stripes { width: usize },
}

impl Layout {
    fn in_region_a(&self, row: usize, col: usize, width: usize, height: usize) -> bool {
        match *self {
            Layout::VerticalSplit => col < width / 2,
            Layout::HorizontalSplit => row < height / 2,
            Layout::Disk { radius } => {
                let dy = row as f64 - (height / 2) as f64;
                let dx = col as f64 - (width / 2) as f64;
                dy * dy + dx * dx <= radius * radius
            }
            Layout::Stripes { width: band } => (col / band.max(1)) % 2 == 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTexture {
    pub mean: f64,
    /// Half-width of the uniform distribution around `mean`.
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidTexture {
    pub mean: f64,
    pub amplitude: f64,
    /// Period in pixels along both axes.
    pub period: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub layout: Layout,
    pub noise: NoiseTexture,
    pub sinusoid: SinusoidTexture,
    pub seed: u64,
    pub nm_per_pixel: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            width: 256,
            height: 256,
            layout: Layout::VerticalSplit,
            noise: NoiseTexture {
                mean: 180.0,
                amplitude: 60.0,
            },
            sinusoid: SinusoidTexture {
                mean: 50.0,
                amplitude: 30.0,
                period: 32.0,
            },
            seed: 0,
            nm_per_pixel: 5.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::config("width/height", "image must be at least 2x2"));
        }
        let in_range = |mean: f64, amp: f64| amp >= 0.0 && mean - amp >= 0.0 && mean + amp <= 255.0;
        if !in_range(self.noise.mean, self.noise.amplitude) {
            return Err(Error::config(
                "noise",
                format!(
                    "mean {} ± amplitude {} leaves [0, 255]",
                    self.noise.mean, self.noise.amplitude
                ),
            ));
        }
        if !in_range(self.sinusoid.mean, self.sinusoid.amplitude) {
            return Err(Error::config(
                "sinusoid",
                format!(
                    "mean {} ± amplitude {} leaves [0, 255]",
                    self.sinusoid.mean, self.sinusoid.amplitude
                ),
            ));
        }
        if !(self.sinusoid.period > 0.0) {
            return Err(Error::config("sinusoid.period", "must be positive"));
        }
        if !(self.nm_per_pixel > 0.0) {
            return Err(Error::config("nm_per_pixel", "must be positive"));
        }
        match self.layout {
            Layout::Disk { radius } if !(radius > 0.0) => {
                return Err(Error::config("layout.radius", "must be positive"))
            }
            Layout::Stripes { width: 0 } => return Err(Error::config("layout.width", "must be at least 1")),
            _ => {}
        }
        Ok(())
    }

    /// Pixels belonging to region A (the noise texture).
    pub fn region_a(&self) -> Grid<bool> {
        Grid::from_fn(self.width, self.height, |r, c| {
            self.layout.in_region_a(r, c, self.width, self.height)
        })
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub image: GrayImage,
    /// Pixel-level truth: 1 where the brighter region lies.
    pub truth: IndexMap,
    pub region_a: Grid<bool>,
    /// Ratio of the larger to the smaller mean DFT-amplitude variance of
    /// 12×12 tiles lying wholly inside each region; `None` if a region has no such tile.
    pub dft_variance_ratio: Option<f64>,
}

const PROBE_TILE: usize = 12;

fn probe_variance_ratio(image: &Grid<f64>, region_a: &Grid<bool>) -> Option<f64> {
    let (h, w) = image.dims();
    if h < PROBE_TILE || w < PROBE_TILE {
        return None;
    }
    let mut dft = Dft2::new(PROBE_TILE, PROBE_TILE);
    let (mut tile, mut amp) = (Vec::new(), Vec::new());
    let mut acc = [(0.0, 0usize); 2];
    for top in (0..=h - PROBE_TILE).step_by(PROBE_TILE / 2) {
        for left in (0..=w - PROBE_TILE).step_by(PROBE_TILE / 2) {
            let first = *region_a.get(top, left);
            let uniform = (top..top + PROBE_TILE)
                .all(|r| region_a.row(r)[left..left + PROBE_TILE].iter().all(|&a| a == first));
            if !uniform {
                continue;
            }
            tile.clear();
            for r in top..top + PROBE_TILE {
                tile.extend_from_slice(&image.row(r)[left..left + PROBE_TILE]);
            }
            dft.amplitude_into(&tile, &mut amp).ok()?;
            let var = stats4(&amp).ok()?[1];
            let slot = &mut acc[usize::from(first)];
            slot.0 += var;
            slot.1 += 1;
        }
    }
    if acc[0].1 == 0 || acc[1].1 == 0 {
        return None;
    }
    let (b, a) = (acc[0].0 / acc[0].1 as f64, acc[1].0 / acc[1].1 as f64);
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Generates the image and its ground truth; the same spec always yields the same output.
pub fn synth_texture_image(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let region_a = spec.region_a();
    let count_a = region_a.as_slice().iter().filter(|&&a| a).count();
    if count_a == 0 || count_a == region_a.len() {
        return Err(Error::config("layout", "both textures must cover part of the image"));
    }
    let mut rng = rng::seeded(spec.seed);
    let k = 2.0 * PI / spec.sinusoid.period;
    let pixels = Grid::from_fn(spec.width, spec.height, |r, c| {
        // one draw per pixel keeps the noise field independent of the layout
        let u: f64 = rng.random();
        let v = if *region_a.get(r, c) {
            spec.noise.mean + spec.noise.amplitude * (2.0 * u - 1.0)
        } else {
            spec.sinusoid.mean
                + spec.sinusoid.amplitude * (k * c as f64).sin() * (k * r as f64).sin()
        };
        v.clamp(0.0, 255.0)
    });
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for (&v, &a) in pixels.as_slice().iter().zip(region_a.as_slice()) {
        if a {
            sum_a += v;
        } else {
            sum_b += v;
        }
    }
    let a_is_light = sum_a / count_a as f64 > sum_b / (region_a.len() - count_a) as f64;
    let truth = IndexMap::new(region_a.map(|&a| u8::from(a == a_is_light)), spec.nm_per_pixel)?;
    let dft_variance_ratio = probe_variance_ratio(&pixels, &region_a);
    Ok(SynthOutput {
        image: GrayImage::new(pixels, spec.nm_per_pixel)?,
        truth,
        region_a,
        dft_variance_ratio,
    })
}
