use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::check_tile;
use crate::error::Result;
use crate::grid::Grid;

/// Planned 2D DFT for one tile shape, normalised by `1/(MN)`:
///
/// `F(k,l) = 1/(MN) Σ_m Σ_n f(m,n) exp(-2πi (km/M + ln/N))`
///
/// Holds its scratch buffers so it can be reused across tiles on one thread.
pub struct Dft2 {
    rows: usize,
    cols: usize,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fft = planner.plan_fft_forward(cols);
        let col_fft = planner.plan_fft_forward(rows);
        let scratch_len = row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len());
        Dft2 {
            rows,
            cols,
            row_fft,
            col_fft,
            buf: vec![Complex64::default(); rows * cols],
            transposed: vec![Complex64::default(); rows * cols],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Runs the transform; the result is left column-major in `self.transposed`.
    fn run(&mut self, tile: &[f64]) -> Result<()> {
        let (m, n) = (self.rows, self.cols);
        check_tile(tile, m, n)?;
        for (dst, &src) in self.buf.iter_mut().zip(tile) {
            *dst = Complex64::new(src, 0.0);
        }
        self.row_fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for r in 0..m {
            for c in 0..n {
                self.transposed[c * m + r] = self.buf[r * n + c];
            }
        }
        self.col_fft
            .process_with_scratch(&mut self.transposed, &mut self.scratch);
        Ok(())
    }

    /// Complex coefficients in row-major `(k, l)` order.
    pub fn spectrum(&mut self, tile: &[f64]) -> Result<Vec<Complex64>> {
        self.run(tile)?;
        let (m, n) = (self.rows, self.cols);
        let scale = 1.0 / (m * n) as f64;
        let mut out = vec![Complex64::default(); m * n];
        for k in 0..m {
            for l in 0..n {
                out[k * n + l] = self.transposed[l * m + k] * scale;
            }
        }
        Ok(out)
    }

    /// `|F(k,l)|` in row-major order, written into `out`.
    pub fn amplitude_into(&mut self, tile: &[f64], out: &mut Vec<f64>) -> Result<()> {
        self.run(tile)?;
        let (m, n) = (self.rows, self.cols);
        let scale = 1.0 / (m * n) as f64;
        out.clear();
        out.resize(m * n, 0.0);
        for k in 0..m {
            for l in 0..n {
                out[k * n + l] = self.transposed[l * m + k].norm() * scale;
            }
        }
        Ok(())
    }
}

/// Complex 2D DFT of `tile` with the `1/(MN)` prefactor.
pub fn dft2(tile: &Grid<f64>) -> Result<Grid<Complex64>> {
    let (m, n) = tile.dims();
    let spec = Dft2::new(m, n).spectrum(tile.as_slice())?;
    Grid::from_vec(n, m, spec)
}

/// Amplitude spectrum `|F(k,l)|`, DC term included.
pub fn dft2_amplitude(tile: &Grid<f64>) -> Result<Grid<f64>> {
    let (m, n) = tile.dims();
    let mut out = Vec::new();
    Dft2::new(m, n).amplitude_into(tile.as_slice(), &mut out)?;
    Grid::from_vec(n, m, out)
}
