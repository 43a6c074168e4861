//! Tile sizing from the win factor and enumeration of pixel-centred tiles.
//!
//! A tile of size `t` centred on pixel `i` covers `[i - t/2, i - t/2 + t)`
//! (integer halves), so centres run from `t/2` to `dim - (t - t/2)` and the
//! boundary band of width `~t/2` is never analysed.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imgio::GrayImage;

/// Tile geometry plus the step between consecutive tile centres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileSpec {
    pub tile_w: usize,
    pub tile_h: usize,
    pub stride: usize,
}

impl TileSpec {
    pub fn new(tile_w: usize, tile_h: usize, stride: usize) -> Result<Self> {
        if tile_w < 2 || tile_h < 2 {
            return Err(Error::input(format!(
                "tile must be at least 2x2, got {tile_w}x{tile_h}"
            )));
        }
        if stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        Ok(TileSpec {
            tile_w,
            tile_h,
            stride,
        })
    }

    pub fn from_win_factor(image_w: usize, image_h: usize, win_factor: f64, stride: usize) -> Result<Self> {
        let (tile_w, tile_h) = tile_dims(image_w, image_h, win_factor)?;
        TileSpec::new(tile_w, tile_h, stride)
    }
}

/// Tile size as `round(dim * win_factor)`, clamped to `[2, dim]`.
pub fn tile_dims(image_w: usize, image_h: usize, win_factor: f64) -> Result<(usize, usize)> {
    if !(win_factor > 0.0 && win_factor < 1.0) {
        return Err(Error::config(
            "win_factor",
            format!("must lie strictly between 0 and 1, got {win_factor}"),
        ));
    }
    if image_w < 2 || image_h < 2 {
        return Err(Error::input(format!(
            "image must be at least 2x2, got {image_w}x{image_h}"
        )));
    }
    // f64::round rounds half away from zero
    let size = |dim: usize| ((dim as f64 * win_factor).round() as usize).clamp(2, dim);
    Ok((size(image_w), size(image_h)))
}

/// The lattice of tile centres for one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileGrid {
    pub grid_h: usize,
    pub grid_w: usize,
    /// Pixel `(row, col)` of the first centre.
    pub offset: (usize, usize),
    pub stride: usize,
    pub tile_w: usize,
    pub tile_h: usize,
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pixel coordinates of grid cell `(r, c)`.
    #[inline]
    pub fn center(&self, r: usize, c: usize) -> (usize, usize) {
        (
            self.offset.0 + r * self.stride,
            self.offset.1 + c * self.stride,
        )
    }

    /// All centres, row-major.
    pub fn centers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.grid_h).flat_map(move |r| (0..self.grid_w).map(move |c| self.center(r, c)))
    }

    /// Borrowed view of the tile at grid cell `(r, c)`.
    pub fn tile<'a>(&self, image: &'a GrayImage, r: usize, c: usize) -> TileView<'a> {
        let (cr, cc) = self.center(r, c);
        TileView {
            pixels: image.pixels(),
            top: cr - self.tile_h / 2,
            left: cc - self.tile_w / 2,
            height: self.tile_h,
            width: self.tile_w,
        }
    }

    /// Grid cell whose centre is nearest to pixel `(row, col)`, clamped to the lattice.
    pub fn nearest_cell(&self, row: usize, col: usize) -> (usize, usize) {
        let axis = |p: usize, off: usize, n: usize| {
            let rel = (p as f64 - off as f64) / self.stride as f64;
            (rel.round().max(0.0) as usize).min(n - 1)
        };
        (
            axis(row, self.offset.0, self.grid_h),
            axis(col, self.offset.1, self.grid_w),
        )
    }

    /// Expands a grid-shaped map to `height × width` pixels by nearest-interior replication.
    pub fn pad_to_image<T: Copy>(&self, cells: &Grid<T>, width: usize, height: usize) -> Grid<T> {
        Grid::from_fn(width, height, |row, col| {
            let (r, c) = self.nearest_cell(row, col);
            *cells.get(r, c)
        })
    }
}

/// A `tile_h × tile_w` window into an image.
#[derive(Clone, Copy, Debug)]
pub struct TileView<'a> {
    pixels: &'a Grid<f64>,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl TileView<'_> {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        *self.pixels.get(self.top + row, self.left + col)
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels.row(self.top + row)[self.left..self.left + self.width]
    }

    /// Copies the tile into `out`, reusing its allocation.
    pub fn copy_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.height {
            out.extend_from_slice(self.row(r));
        }
    }

    pub fn to_grid(&self) -> Grid<f64> {
        let mut data = Vec::with_capacity(self.width * self.height);
        self.copy_into(&mut data);
        Grid::from_vec(self.width, self.height, data).expect("tile dims match data")
    }
}

/// Lays out tile centres over the interior of `image`.
pub fn extract_tiles(image: &GrayImage, spec: &TileSpec) -> Result<TileGrid> {
    if spec.stride == 0 {
        return Err(Error::config("stride", "must be at least 1"));
    }
    if spec.tile_w > image.width() || spec.tile_h > image.height() {
        return Err(Error::input(format!(
            "tile {}x{} does not fit in image {}x{}",
            spec.tile_w,
            spec.tile_h,
            image.width(),
            image.height()
        )));
    }
    Ok(TileGrid {
        grid_h: (image.height() - spec.tile_h) / spec.stride + 1,
        grid_w: (image.width() - spec.tile_w) / spec.stride + 1,
        offset: (spec.tile_h / 2, spec.tile_w / 2),
        stride: spec.stride,
        tile_w: spec.tile_w,
        tile_h: spec.tile_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(w: usize, h: usize) -> GrayImage {
        let g = Grid::from_fn(w, h, |r, c| ((r * 31 + c * 7) % 256) as f64);
        GrayImage::new(g, 1.0).unwrap()
    }

    #[test]
    fn tile_dims_examples() {
        assert_eq!(tile_dims(384, 384, 0.03).unwrap(), (12, 12));
        assert_eq!(tile_dims(100, 100, 0.05).unwrap(), (5, 5));
        assert!(tile_dims(384, 384, 1.0).is_err());
        assert!(tile_dims(384, 384, 0.0).is_err());
        // clamped to the minimum tile size
        assert_eq!(tile_dims(10, 10, 0.01).unwrap(), (2, 2));
    }

    #[test]
    fn center_counts() {
        let img = image(384, 384);
        let g = extract_tiles(&img, &TileSpec::new(12, 12, 1).unwrap()).unwrap();
        assert_eq!((g.grid_h, g.grid_w), (373, 373));
        assert_eq!(g.center(0, 0), (6, 6));
        assert_eq!(g.center(372, 372), (378, 378));
        let g2 = extract_tiles(&img, &TileSpec::new(12, 12, 2).unwrap()).unwrap();
        assert_eq!((g2.grid_h, g2.grid_w), (187, 187));
    }

    #[test]
    fn tile_larger_than_image_fails() {
        let img = image(10, 10);
        assert!(extract_tiles(&img, &TileSpec::new(12, 12, 1).unwrap()).is_err());
    }

    #[test]
    fn odd_tiles_have_exact_size() {
        let img = image(20, 17);
        let g = extract_tiles(&img, &TileSpec::new(5, 7, 1).unwrap()).unwrap();
        assert_eq!((g.grid_h, g.grid_w), (11, 16));
        let t = g.tile(&img, g.grid_h - 1, g.grid_w - 1).to_grid();
        assert_eq!(t.dims(), (7, 5));
        assert_eq!(*t.get(6, 4), img.get(16, 19));
    }

    #[test]
    fn stride_equal_tile_partitions_interior() {
        let img = image(50, 41);
        let spec = TileSpec::new(5, 5, 5).unwrap();
        let g = extract_tiles(&img, &spec).unwrap();
        let mut hits = Grid::filled(50, 41, 0u32);
        for r in 0..g.grid_h {
            for c in 0..g.grid_w {
                let t = g.tile(&img, r, c);
                for y in 0..t.height {
                    for x in 0..t.width {
                        *hits.get_mut(t.top + y, t.left + x) += 1;
                    }
                }
            }
        }
        assert!(hits.as_slice().iter().all(|&h| h <= 1));
        let covered = hits.as_slice().iter().filter(|&&h| h == 1).count();
        assert_eq!(covered, g.len() * 25);
    }

    #[test]
    fn pad_replicates_nearest_interior() {
        let img = image(10, 10);
        let g = extract_tiles(&img, &TileSpec::new(4, 4, 1).unwrap()).unwrap();
        let cells = Grid::from_fn(g.grid_w, g.grid_h, |r, c| (r * 10 + c) as u32);
        let full = g.pad_to_image(&cells, 10, 10);
        assert_eq!(*full.get(0, 0), 0);
        assert_eq!(*full.get(9, 9), *cells.get(6, 6));
        assert_eq!(*full.get(2, 3), *cells.get(0, 1));
    }

    proptest! {
        #[test]
        fn tiles_copy_source_pixels(
            w in 4usize..40, h in 4usize..40,
            tw in 2usize..12, th in 2usize..12, stride in 1usize..5,
            seed in 0u64..1000,
        ) {
            prop_assume!(tw <= w && th <= h);
            let g = Grid::from_fn(w, h, |r, c| ((r as u64 * 7919 + c as u64 * 104729 + seed) % 256) as f64);
            let img = GrayImage::new(g, 1.0).unwrap();
            let grid = extract_tiles(&img, &TileSpec::new(tw, th, stride).unwrap()).unwrap();
            for r in 0..grid.grid_h {
                for c in 0..grid.grid_w {
                    let (cr, cc) = grid.center(r, c);
                    prop_assert!(cr >= th / 2 && cr + (th - th / 2) <= h);
                    prop_assert!(cc >= tw / 2 && cc + (tw - tw / 2) <= w);
                    let t = grid.tile(&img, r, c).to_grid();
                    prop_assert_eq!(t.len(), tw * th);
                    for y in 0..th {
                        for x in 0..tw {
                            prop_assert_eq!(*t.get(y, x), img.get(cr - th / 2 + y, cc - tw / 2 + x));
                        }
                    }
                }
            }
        }

        #[test]
        fn smaller_stride_keeps_centres(w in 8usize..60, tile in 2usize..8, stride in 2usize..6) {
            let img = GrayImage::new(Grid::filled(w, w, 0.0), 1.0).unwrap();
            let coarse = extract_tiles(&img, &TileSpec::new(tile, tile, stride).unwrap()).unwrap();
            let fine = extract_tiles(&img, &TileSpec::new(tile, tile, 1).unwrap()).unwrap();
            let fine_set: std::collections::HashSet<_> = fine.centers().collect();
            prop_assert!(coarse.centers().all(|c| fine_set.contains(&c)));
        }
    }
}
