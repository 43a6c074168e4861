//! Multilevel separable 2D wavelet decomposition.
//!
//! Each level filters rows then columns; odd-length signals are first extended
//! by one whole-sample mirror (`x[n] = x[n-2]`) so every subband at a level has
//! `ceil(len / 2)` samples per axis.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAX_DWT_LEVELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    /// Orthonormal Haar pair, `lo = [1, 1]/√2`, `hi = [1, -1]/√2`. The two
    /// 1/√2 factors of a 2D level are applied together as one exact ½.
    Haar,
    /// LeGall 5/3 biorthogonal pair, computed by lifting.
    Cdf53,
}

impl Wavelet {
    pub fn name(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Cdf53 => "cdf53",
        }
    }

    /// Factor applied once per 2D level, after both axes in either direction.
    fn level_scale(self) -> f64 {
        match self {
            Wavelet::Haar => 0.5,
            Wavelet::Cdf53 => 1.0,
        }
    }

    /// In-place analysis of an even-length signal: `low` then `high` halves.
    fn analyze(self, x: &[f64], low: &mut [f64], high: &mut [f64]) {
        let h = x.len() / 2;
        match self {
            Wavelet::Haar => {
                for i in 0..h {
                    low[i] = x[2 * i] + x[2 * i + 1];
                    high[i] = x[2 * i] - x[2 * i + 1];
                }
            }
            Wavelet::Cdf53 => {
                for i in 0..h {
                    let right = if i + 1 < h { x[2 * i + 2] } else { x[2 * i] };
                    high[i] = x[2 * i + 1] - 0.5 * (x[2 * i] + right);
                }
                for i in 0..h {
                    let left = if i > 0 { high[i - 1] } else { high[0] };
                    low[i] = x[2 * i] + 0.25 * (left + high[i]);
                }
            }
        }
    }

    fn synthesize(self, low: &[f64], high: &[f64], x: &mut [f64]) {
        let h = low.len();
        match self {
            Wavelet::Haar => {
                for i in 0..h {
                    x[2 * i] = low[i] + high[i];
                    x[2 * i + 1] = low[i] - high[i];
                }
            }
            Wavelet::Cdf53 => {
                for i in 0..h {
                    let left = if i > 0 { high[i - 1] } else { high[0] };
                    x[2 * i] = low[i] - 0.25 * (left + high[i]);
                }
                for i in 0..h {
                    let right = if i + 1 < h { x[2 * i + 2] } else { x[2 * i] };
                    x[2 * i + 1] = high[i] + 0.5 * (x[2 * i] + right);
                }
            }
        }
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(Wavelet::Haar),
            "cdf53" | "bior" | "bior2.2" | "legall" | "5/3" => Ok(Wavelet::Cdf53),
            other => Err(Error::config(
                "wavelet",
                format!("unknown wavelet `{other}` (expected haar or cdf53)"),
            )),
        }
    }
}

/// The four subbands produced by one decomposition level.
#[derive(Clone, Debug, PartialEq)]
pub struct DwtLevel {
    /// Low-pass along both axes (LL).
    pub lo: Grid<f64>,
    /// High-pass along rows, low-pass along columns (HL); responds to vertical edges.
    pub hi_vr: Grid<f64>,
    /// Low-pass along rows, high-pass along columns (LH); responds to horizontal edges.
    pub hi_hr: Grid<f64>,
    /// High-pass along both axes (HH).
    pub hi_di: Grid<f64>,
    /// `(height, width)` of the signal this level decomposed.
    pub input_dims: (usize, usize),
}

impl DwtLevel {
    /// Subbands in channel order LL, HL, LH, HH.
    pub fn subbands(&self) -> [&Grid<f64>; 4] {
        [&self.lo, &self.hi_vr, &self.hi_hr, &self.hi_di]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveletPyramid {
    pub wavelet: Wavelet,
    /// Finest level first.
    pub levels: Vec<DwtLevel>,
}

fn even_extended(src: &[f64], buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(src);
    if src.len() % 2 == 1 {
        buf.push(src[src.len() - 2]);
    }
}

fn decompose(wavelet: Wavelet, input: &Grid<f64>) -> DwtLevel {
    let (h, w) = input.dims();
    let hw = w.div_ceil(2);
    let hh = h.div_ceil(2);
    let mut row_lo = Grid::filled(hw, h, 0.0);
    let mut row_hi = Grid::filled(hw, h, 0.0);
    let mut ext = Vec::with_capacity(w + 1);
    let mut lo = vec![0.0; hw.max(hh)];
    let mut hi = vec![0.0; hw.max(hh)];
    for r in 0..h {
        even_extended(input.row(r), &mut ext);
        wavelet.analyze(&ext, &mut lo[..hw], &mut hi[..hw]);
        for c in 0..hw {
            *row_lo.get_mut(r, c) = lo[c];
            *row_hi.get_mut(r, c) = hi[c];
        }
    }
    let mut column = Vec::with_capacity(h);
    let mut split_columns = |src: &Grid<f64>| {
        let mut low = Grid::filled(hw, hh, 0.0);
        let mut high = Grid::filled(hw, hh, 0.0);
        for c in 0..hw {
            column.clear();
            column.extend((0..h).map(|r| *src.get(r, c)));
            even_extended(&column.clone(), &mut ext);
            wavelet.analyze(&ext, &mut lo[..hh], &mut hi[..hh]);
            for r in 0..hh {
                *low.get_mut(r, c) = lo[r];
                *high.get_mut(r, c) = hi[r];
            }
        }
        (low, high)
    };
    let (mut ll, mut lh) = split_columns(&row_lo);
    let (mut hl, mut hh_band) = split_columns(&row_hi);
    let scale = wavelet.level_scale();
    if scale != 1.0 {
        for band in [&mut ll, &mut lh, &mut hl, &mut hh_band] {
            band.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
        }
    }
    DwtLevel {
        lo: ll,
        hi_vr: hl,
        hi_hr: lh,
        hi_di: hh_band,
        input_dims: (h, w),
    }
}

fn recompose(wavelet: Wavelet, level: &DwtLevel, lo: &Grid<f64>) -> Grid<f64> {
    let (h, w) = level.input_dims;
    let (hh, hw) = lo.dims();
    let mut ext = vec![0.0; 2 * hh.max(hw)];
    let mut merge_columns = |low: &Grid<f64>, high: &Grid<f64>| {
        let mut out = Grid::filled(hw, h, 0.0);
        let mut l = vec![0.0; hh];
        let mut hi = vec![0.0; hh];
        for c in 0..hw {
            for r in 0..hh {
                l[r] = *low.get(r, c);
                hi[r] = *high.get(r, c);
            }
            wavelet.synthesize(&l, &hi, &mut ext[..2 * hh]);
            for r in 0..h {
                *out.get_mut(r, c) = ext[r];
            }
        }
        out
    };
    let row_lo = merge_columns(lo, &level.hi_hr);
    let row_hi = merge_columns(&level.hi_vr, &level.hi_di);
    let scale = wavelet.level_scale();
    let mut out = Grid::filled(w, h, 0.0);
    for r in 0..h {
        wavelet.synthesize(row_lo.row(r), row_hi.row(r), &mut ext[..2 * hw]);
        for c in 0..w {
            *out.get_mut(r, c) = ext[c] * scale;
        }
    }
    out
}

/// Decomposes `tile` into `levels` wavelet levels; each level splits the previous LL band.
pub fn dwt2_multilevel(tile: &Grid<f64>, wavelet: Wavelet, levels: usize) -> Result<WaveletPyramid> {
    if !(1..=MAX_DWT_LEVELS).contains(&levels) {
        return Err(Error::config(
            "levels",
            format!("must be between 1 and {MAX_DWT_LEVELS}, got {levels}"),
        ));
    }
    tile.ensure_finite("tile")?;
    let mut out = Vec::with_capacity(levels);
    let mut current = tile.clone();
    for level in 0..levels {
        let (h, w) = current.dims();
        if h < 2 || w < 2 {
            return Err(Error::input(format!(
                "tile {}x{} too small for {levels} levels (level {} input is {w}x{h})",
                tile.width(),
                tile.height(),
                level + 1
            )));
        }
        let decomposed = decompose(wavelet, &current);
        current = decomposed.lo.clone();
        out.push(decomposed);
    }
    Ok(WaveletPyramid {
        wavelet,
        levels: out,
    })
}

/// Inverse of [`dwt2_multilevel`].
pub fn idwt2_multilevel(pyramid: &WaveletPyramid) -> Result<Grid<f64>> {
    let deepest = pyramid
        .levels
        .last()
        .ok_or_else(|| Error::input("wavelet pyramid has no levels"))?;
    let mut lo = deepest.lo.clone();
    for level in pyramid.levels.iter().rev() {
        lo = recompose(pyramid.wavelet, level, &lo);
    }
    Ok(lo)
}
