//! Domain transforms applied to individual tiles.

mod dct;
mod dft;
mod dwt;
mod radon;

pub use dct::{dct2, Dct2};
pub use dft::{dft2, dft2_amplitude, Dft2};
pub use dwt::{dwt2_multilevel, idwt2_multilevel, DwtLevel, Wavelet, WaveletPyramid, MAX_DWT_LEVELS};
pub use radon::{radon_sinogram, Radon, Sinogram};
pub use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) fn check_tile(data: &[f64], rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::input("tile must have at least one row and column"));
    }
    if data.len() != rows * cols {
        return Err(Error::input(format!(
            "tile buffer holds {} values, expected {rows}x{cols}",
            data.len()
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("tile contains NaN or infinite values"));
    }
    Ok(())
}
