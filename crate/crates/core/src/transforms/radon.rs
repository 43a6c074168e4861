//! Parallel-beam projections of a tile over `[0°, 180°)`.
//!
//! The tile is centred in a square canvas of side `ceil(√(M² + N²))`. At angle
//! θ the centre of pixel `(x, y)` lands on detector coordinate
//! `u = (x - cx)·cosθ + (y - cy)·sinθ + cx + offset`, and detector bin `k`
//! covers `[k - ½, k + ½)`. Each pixel is treated as a unit square, whose
//! shadow on the detector is a trapezoid of width `|cosθ| + |sinθ|`; the
//! pixel value is shared between bins in proportion to the trapezoid area
//! over each bin. Mass is conserved exactly, and at 0° and 90° the projections
//! are plain column and row sums.

use super::check_tile;
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    /// `projection_length × n_angles`; column `a` is the projection at `angles_deg[a]`.
    pub data: Grid<f64>,
    pub angles_deg: Vec<f64>,
}

impl Sinogram {
    pub fn projection(&self, angle: usize) -> Vec<f64> {
        (0..self.data.height())
            .map(|r| *self.data.get(r, angle))
            .collect()
    }
}

/// Precomputed geometry for projecting tiles of a fixed shape.
pub struct Radon {
    rows: usize,
    cols: usize,
    canvas: usize,
    angles_deg: Vec<f64>,
    trig: Vec<(f64, f64)>,
}

impl Radon {
    pub fn new(rows: usize, cols: usize, n_angles: usize) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::config("angles", "need at least one projection angle"));
        }
        let canvas = ((rows * rows + cols * cols) as f64).sqrt().ceil() as usize;
        let angles_deg: Vec<f64> = (0..n_angles)
            .map(|a| a as f64 * 180.0 / n_angles as f64)
            .collect();
        let trig = angles_deg.iter().map(|&deg| exact_trig(deg)).collect();
        Ok(Radon {
            rows,
            cols,
            canvas,
            angles_deg,
            trig,
        })
    }

    pub fn projection_len(&self) -> usize {
        self.canvas
    }

    pub fn n_angles(&self) -> usize {
        self.angles_deg.len()
    }

    /// Writes the sinogram row-major (`projection_len × n_angles`) into `out`.
    pub fn project_into(&self, tile: &[f64], out: &mut Vec<f64>) -> Result<()> {
        check_tile(tile, self.rows, self.cols)?;
        let s = self.canvas;
        let na = self.n_angles();
        out.clear();
        out.resize(s * na, 0.0);
        let cx = (self.cols as f64 - 1.0) / 2.0;
        let cy = (self.rows as f64 - 1.0) / 2.0;
        let offset = ((s - self.cols) / 2) as f64;
        let last = s - 1;
        for (a, &(cos, sin)) in self.trig.iter().enumerate() {
            let shadow = Footprint::new(cos.abs(), sin.abs());
            for y in 0..self.rows {
                let dy = (y as f64 - cy) * sin;
                for x in 0..self.cols {
                    let v = tile[y * self.cols + x];
                    if v == 0.0 {
                        continue;
                    }
                    let u = (x as f64 - cx) * cos + dy + cx + offset;
                    let first = (u - shadow.half + 0.5).floor().max(0.0) as usize;
                    let stop = ((u + shadow.half + 0.5).ceil().max(0.0) as usize).min(s);
                    let mut below = 0.0;
                    for k in first..stop {
                        let upto = if k == last { 1.0 } else { shadow.cdf(k as f64 + 0.5 - u) };
                        out[k * na + a] += v * (upto - below);
                        below = upto;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cosine and sine with exact zeros and ones at multiples of 90°.
fn exact_trig(deg: f64) -> (f64, f64) {
    match deg {
        d if d == 0.0 => (1.0, 0.0),
        d if d == 90.0 => (0.0, 1.0),
        d => (d.to_radians().cos(), d.to_radians().sin()),
    }
}

/// Distribution of a unit square's shadow: the sum of two centred uniforms
/// of widths `wide >= narrow`.
struct Footprint {
    wide: f64,
    narrow: f64,
    half: f64,
}

impl Footprint {
    fn new(a: f64, b: f64) -> Self {
        let (wide, narrow) = if a >= b { (a, b) } else { (b, a) };
        Footprint { wide, narrow, half: (wide + narrow) / 2.0 }
    }

    /// Fraction of the shadow lying below `t`, measured from the pixel centre.
    fn cdf(&self, t: f64) -> f64 {
        let (a, b) = (self.wide, self.narrow);
        if t <= -self.half {
            return 0.0;
        }
        if t >= self.half {
            return 1.0;
        }
        if b < 1e-12 {
            return (t + a / 2.0) / a;
        }
        let ramp = (a - b) / 2.0;
        if t < -ramp {
            (t + self.half).powi(2) / (2.0 * a * b)
        } else if t <= ramp {
            b / (2.0 * a) + (t + ramp) / a
        } else {
            1.0 - (self.half - t).powi(2) / (2.0 * a * b)
        }
    }
}

/// Sinogram with angles `a · 180 / n_angles` degrees, `a = 0..n_angles`.
pub fn radon_sinogram(tile: &Grid<f64>, n_angles: usize) -> Result<Sinogram> {
    let (m, n) = tile.dims();
    let radon = Radon::new(m, n, n_angles)?;
    let mut out = Vec::new();
    radon.project_into(tile.as_slice(), &mut out)?;
    Ok(Sinogram {
        data: Grid::from_vec(radon.n_angles(), radon.projection_len(), out)?,
        angles_deg: radon.angles_deg,
    })
}
