use std::f64::consts::PI;

use super::check_tile;
use crate::error::Result;
use crate::grid::Grid;

/// Separable 2D cosine transform
///
/// `F(k,l) = 2/√(MN) Σ_m Σ_n f(m,n) cos((2m+1)kπ/2M) cos((2n+1)lπ/2N)`
///
/// with no extra weighting of the `k = 0` / `l = 0` rows, so it is not the
/// orthonormal DCT-II found in most libraries.
pub struct Dct2 {
    rows: usize,
    cols: usize,
    /// `cos_rows[k * M + m]`
    cos_rows: Vec<f64>,
    /// `cos_cols[l * N + n]`
    cos_cols: Vec<f64>,
    scale: f64,
    tmp: Vec<f64>,
}

fn cosine_table(len: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(len * len);
    for k in 0..len {
        for m in 0..len {
            t.push(((2 * m + 1) as f64 * k as f64 * PI / (2 * len) as f64).cos());
        }
    }
    t
}

impl Dct2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        Dct2 {
            rows,
            cols,
            cos_rows: cosine_table(rows),
            cos_cols: cosine_table(cols),
            scale: 2.0 / ((rows * cols) as f64).sqrt(),
            tmp: vec![0.0; rows * cols],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transform_into(&mut self, tile: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let (m, n) = (self.rows, self.cols);
        check_tile(tile, m, n)?;
        // along rows: tmp[y][l] = Σ_x f[y][x] cos_cols[l][x]
        for y in 0..m {
            let src = &tile[y * n..(y + 1) * n];
            for l in 0..n {
                let basis = &self.cos_cols[l * n..(l + 1) * n];
                self.tmp[y * n + l] = src.iter().zip(basis).map(|(a, b)| a * b).sum();
            }
        }
        out.clear();
        out.resize(m * n, 0.0);
        for k in 0..m {
            let basis = &self.cos_rows[k * m..(k + 1) * m];
            let dst = &mut out[k * n..(k + 1) * n];
            for (y, &w) in basis.iter().enumerate() {
                let w = w * self.scale;
                for (d, t) in dst.iter_mut().zip(&self.tmp[y * n..(y + 1) * n]) {
                    *d += w * t;
                }
            }
        }
        Ok(())
    }
}

pub fn dct2(tile: &Grid<f64>) -> Result<Grid<f64>> {
    let (m, n) = tile.dims();
    let mut out = Vec::new();
    Dct2::new(m, n).transform_into(tile.as_slice(), &mut out)?;
    Grid::from_vec(n, m, out)
}
