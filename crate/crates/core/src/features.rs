//! Moment statistics of transformed tiles, assembled into per-image feature cubes.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imgio::GrayImage;
use crate::tiling::{extract_tiles, TileGrid, TileSpec};
use crate::transforms::{dwt2_multilevel, Dct2, Dft2, Radon, Wavelet};

/// Population moments `[mean, variance, skew, kurtosis]`.
///
/// Kurtosis is non-excess (a Gaussian gives 3). When the variance is zero,
/// skew and kurtosis are reported as 0.
pub fn stats4(values: &[f64]) -> Result<[f64; 4]> {
    if values.is_empty() {
        return Err(Error::input("cannot compute statistics of an empty matrix"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Ok([mean, 0.0, 0.0, 0.0]);
    }
    Ok([mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2)])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Mean,
    Variance,
    Skew,
    Kurtosis,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [
        Statistic::Mean,
        Statistic::Variance,
        Statistic::Skew,
        Statistic::Kurtosis,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Variance => "variance",
            Statistic::Skew => "skew",
            Statistic::Kurtosis => "kurtosis",
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Statistic::Mean),
            "variance" | "var" => Ok(Statistic::Variance),
            "skew" | "skewness" => Ok(Statistic::Skew),
            "kurtosis" | "kurt" => Ok(Statistic::Kurtosis),
            other => Err(Error::config(
                "features",
                format!("unknown statistic `{other}` (expected mean, variance, skew or kurtosis)"),
            )),
        }
    }
}

/// Which of the four statistics become feature channels, always in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureMask([bool; 4]);

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask([true; 4]);
    pub const VARIANCE: FeatureMask = FeatureMask([false, true, false, false]);

    pub fn new(stats: &[Statistic]) -> Result<Self> {
        if stats.is_empty() {
            return Err(Error::config("features", "at least one statistic is required"));
        }
        let mut sel = [false; 4];
        for s in stats {
            sel[s.index()] = true;
        }
        Ok(FeatureMask(sel))
    }

    pub fn parse_list(list: &str) -> Result<Self> {
        let stats = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Statistic>>>()?;
        FeatureMask::new(&stats)
    }

    pub fn statistics(&self) -> Vec<Statistic> {
        Statistic::ALL
            .into_iter()
            .filter(|s| self.0[s.index()])
            .collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    fn push_selected(&self, stats: &[f64; 4], out: &mut Vec<f64>) {
        out.extend(stats.iter().zip(self.0).filter(|(_, keep)| *keep).map(|(v, _)| *v));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dft,
    Dct,
    Dwt,
    Radon,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dft => "dft",
            Method::Dct => "dct",
            Method::Dwt => "dwt",
            Method::Radon => "radon",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dft" => Ok(Method::Dft),
            "dct" => Ok(Method::Dct),
            "dwt" => Ok(Method::Dwt),
            "radon" => Ok(Method::Radon),
            other => Err(Error::config(
                "method",
                format!("unsupported method `{other}` (expected dft, dct, dwt or radon)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureOptions {
    pub mask: FeatureMask,
    pub wavelet: Wavelet,
    pub levels: usize,
    pub angles: usize,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            mask: FeatureMask::VARIANCE,
            wavelet: Wavelet::Haar,
            levels: 2,
            angles: 180,
        }
    }
}

/// Channel names in the order [`extract_features`] emits them.
pub fn channel_names(method: Method, options: &FeatureOptions) -> Vec<String> {
    let stats = options.mask.statistics();
    match method {
        Method::Dwt => {
            let mut names = Vec::new();
            for level in 1..=options.levels {
                for band in ["ll", "hl", "lh", "hh"] {
                    for s in &stats {
                        names.push(format!("dwt_l{level}_{band}_{}", s.name()));
                    }
                }
            }
            names
        }
        _ => stats
            .iter()
            .map(|s| format!("{}_{}", method.name(), s.name()))
            .collect(),
    }
}

enum Kernel {
    Dft(Dft2),
    Dct(Dct2),
    Dwt { wavelet: Wavelet, levels: usize },
    Radon(Radon),
}

/// Per-thread feature extractor for tiles of one fixed shape.
pub struct FeatureExtractor {
    kernel: Kernel,
    rows: usize,
    cols: usize,
    mask: FeatureMask,
    scratch: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(method: Method, options: &FeatureOptions, rows: usize, cols: usize) -> Result<Self> {
        let kernel = match method {
            Method::Dft => Kernel::Dft(Dft2::new(rows, cols)),
            Method::Dct => Kernel::Dct(Dct2::new(rows, cols)),
            Method::Dwt => Kernel::Dwt {
                wavelet: options.wavelet,
                levels: options.levels,
            },
            Method::Radon => Kernel::Radon(Radon::new(rows, cols, options.angles)?),
        };
        Ok(FeatureExtractor {
            kernel,
            rows,
            cols,
            mask: options.mask,
            scratch: Vec::new(),
        })
    }

    /// Appends the feature vector of a row-major tile to `out`.
    pub fn extract(&mut self, tile: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match &mut self.kernel {
            Kernel::Dft(dft) => dft.amplitude_into(tile, &mut self.scratch)?,
            Kernel::Dct(dct) => dct.transform_into(tile, &mut self.scratch)?,
            Kernel::Radon(radon) => radon.project_into(tile, &mut self.scratch)?,
            Kernel::Dwt { wavelet, levels } => {
                let grid = Grid::from_vec(self.cols, self.rows, tile.to_vec())?;
                let pyramid = dwt2_multilevel(&grid, *wavelet, *levels)?;
                for level in &pyramid.levels {
                    for band in level.subbands() {
                        self.mask.push_selected(&stats4(band.as_slice())?, out);
                    }
                }
                return Ok(());
            }
        }
        self.mask.push_selected(&stats4(&self.scratch)?, out);
        Ok(())
    }
}

/// Feature vector of a single tile.
pub fn extract_features(tile: &Grid<f64>, method: Method, options: &FeatureOptions) -> Result<Vec<f64>> {
    let (rows, cols) = tile.dims();
    let mut out = Vec::new();
    FeatureExtractor::new(method, options, rows, cols)?.extract(tile.as_slice(), &mut out)?;
    Ok(out)
}

/// `grid_h × grid_w × F` features, one vector per tile centre.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureCube {
    pub grid: TileGrid,
    pub channels: Vec<String>,
    data: Vec<f64>,
}

impl FeatureCube {
    pub fn new(grid: TileGrid, channels: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() * channels.len() {
            return Err(Error::input(format!(
                "cube of {}x{}x{} needs {} values, got {}",
                grid.grid_h,
                grid.grid_w,
                channels.len(),
                grid.len() * channels.len(),
                data.len()
            )));
        }
        Ok(FeatureCube {
            grid,
            channels,
            data,
        })
    }

    pub fn grid_h(&self) -> usize {
        self.grid.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid.grid_w
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn cell(&self, r: usize, c: usize) -> &[f64] {
        let f = self.n_channels();
        let i = (r * self.grid_w() + c) * f;
        &self.data[i..i + f]
    }

    /// Flat cell-major storage: cell `i`, channel `f` at `i * F + f`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, f: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(f).step_by(self.n_channels()).copied()
    }

    /// CSV with header `row,col,<channels>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col");
        for name in &self.channels {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in 0..self.grid_h() {
            for c in 0..self.grid_w() {
                let _ = write!(out, "{r},{c}");
                for v in self.cell(r, c) {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Builds the feature cube of `image`. Rows of the grid are processed in
/// parallel on the current rayon pool; the result does not depend on the
/// number of workers.
pub fn build_feature_cube(
    image: &GrayImage,
    spec: &TileSpec,
    method: Method,
    options: &FeatureOptions,
) -> Result<FeatureCube> {
    if method == Method::Dwt && !(1..=crate::transforms::MAX_DWT_LEVELS).contains(&options.levels) {
        return Err(Error::config("levels", format!("must be between 1 and 3, got {}", options.levels)));
    }
    let grid = extract_tiles(image, spec)?;
    let channels = channel_names(method, options);
    let rows: Vec<Vec<f64>> = (0..grid.grid_h)
        .into_par_iter()
        .map_init(
            || {
                (
                    FeatureExtractor::new(method, options, spec.tile_h, spec.tile_w),
                    Vec::with_capacity(spec.tile_w * spec.tile_h),
                )
            },
            |(extractor, buf), r| {
                let extractor = extractor.as_mut().map_err(|e| Error::input(e.to_string()))?;
                let mut row = Vec::with_capacity(grid.grid_w * channels.len());
                for c in 0..grid.grid_w {
                    grid.tile(image, r, c).copy_into(buf);
                    extractor.extract(buf, &mut row)?;
                }
                Ok(row)
            },
        )
        .collect::<Result<_>>()?;
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    FeatureCube::new(grid, channels, data)
}

fn channel_moments(cube: &FeatureCube, f: usize) -> (f64, f64) {
    let n = cube.n_cells() as f64;
    let mean = cube.channel(f).sum::<f64>() / n;
    let var = cube.channel(f).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-channel z-score with population standard deviation; constant channels become 0.
pub fn zscore_normalize(cube: &FeatureCube) -> Result<FeatureCube> {
    if cube.n_cells() == 0 || cube.n_channels() == 0 {
        return Err(Error::input("cannot normalise an empty feature cube"));
    }
    let f = cube.n_channels();
    let moments: Vec<(f64, f64)> = (0..f).map(|ch| channel_moments(cube, ch)).collect();
    let data = cube
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (mean, std) = moments[i % f];
            if std > 0.0 {
                (v - mean) / std
            } else {
                0.0
            }
        })
        .collect();
    FeatureCube::new(cube.grid, cube.channels.clone(), data)
}

/// Pearson correlation between channels, pooling the cells of every cube given.
///
/// Zero-variance channels get zero correlation with everything except themselves.
pub fn correlation_matrix_of(cubes: &[&FeatureCube]) -> Result<Grid<f64>> {
    let first = cubes
        .first()
        .ok_or_else(|| Error::input("no feature cubes given"))?;
    let f = first.n_channels();
    if cubes.iter().any(|c| c.channels != first.channels) {
        return Err(Error::input("feature cubes have different channels"));
    }
    let n: usize = cubes.iter().map(|c| c.n_cells()).sum();
    if n < 2 {
        return Err(Error::input("correlation needs at least 2 samples"));
    }
    let mut means = vec![0.0; f];
    for cube in cubes {
        for cell in cube.data.chunks_exact(f) {
            for (m, v) in means.iter_mut().zip(cell) {
                *m += v;
            }
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; f * f];
    for cube in cubes {
        for cell in cube.data.chunks_exact(f) {
            for i in 0..f {
                let di = cell[i] - means[i];
                for j in i..f {
                    cov[i * f + j] += di * (cell[j] - means[j]);
                }
            }
        }
    }
    Ok(Grid::from_fn(f, f, |i, j| {
        if i == j {
            return 1.0;
        }
        let (a, b) = (i.min(j), i.max(j));
        let denom = (cov[a * f + a] * cov[b * f + b]).sqrt();
        if denom > 0.0 {
            (cov[a * f + b] / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }))
}

pub fn correlation_matrix(cube: &FeatureCube) -> Result<Grid<f64>> {
    correlation_matrix_of(&[cube])
}

/// CSV of a correlation matrix with channel names as the header row and first column.
pub fn correlation_csv(names: &[String], corr: &Grid<f64>) -> String {
    let mut out = String::from("channel");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, n) in names.iter().enumerate() {
        out.push_str(n);
        for v in corr.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::dft2_amplitude;
    use proptest::prelude::*;

    fn lcg_tile(m: usize, n: usize, seed: u64) -> Grid<f64> {
        let mut s = seed ^ 0x9E37_79B9_7F4A_7C15;
        Grid::from_fn(n, m, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((s >> 33) % 256) as f64
        })
    }

    fn oracle_moments(values: &[f64]) -> [f64; 4] {
        // moments about zero, converted to central moments
        let n = values.len() as f64;
        let raw = |p: i32| values.iter().map(|v| v.powi(p)).sum::<f64>() / n;
        let (r1, r2, r3, r4) = (raw(1), raw(2), raw(3), raw(4));
        let m2 = r2 - r1 * r1;
        let m3 = r3 - 3.0 * r1 * r2 + 2.0 * r1.powi(3);
        let m4 = r4 - 4.0 * r1 * r3 + 6.0 * r1 * r1 * r2 - 3.0 * r1.powi(4);
        [r1, m2, m3 / m2.powf(1.5), m4 / (m2 * m2)]
    }

    #[test]
    fn stats_examples() {
        assert_eq!(stats4(&[5.0; 9]).unwrap(), [5.0, 0.0, 0.0, 0.0]);
        let s = stats4(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s[0] - 2.5).abs() < 1e-15);
        assert!((s[1] - 1.25).abs() < 1e-15);
        assert!(s[2].abs() < 1e-15);
        assert!((s[3] - 1.64).abs() < 1e-12);
        assert!(stats4(&[]).is_err());
    }

    #[test]
    fn stats_match_raw_moment_oracle() {
        for seed in 0..5 {
            let t = lcg_tile(12, 12, seed);
            // rescale to keep the raw-moment oracle well conditioned
            let v: Vec<f64> = t.as_slice().iter().map(|x| x / 255.0 - 0.3).collect();
            let (a, b) = (stats4(&v).unwrap(), oracle_moments(&v));
            for i in 0..4 {
                assert!((a[i] - b[i]).abs() < 1e-10, "stat {i}: {} vs {}", a[i], b[i]);
            }
        }
    }

    #[test]
    fn dft_features() {
        let c = extract_features(&Grid::filled(12, 12, 9.0), Method::Dft, &FeatureOptions {
            mask: FeatureMask::ALL,
            ..Default::default()
        })
        .unwrap();
        // only the DC bin is non-zero: amplitude 9 in one of 144 bins
        let p: f64 = 1.0 / 144.0;
        let m3 = p * (9.0 - 9.0 * p).powi(3) - (1.0 - p) * (9.0 * p).powi(3);
        let m2 = 81.0 * p * (1.0 - p);
        assert!((c[0] - 9.0 * p).abs() < 1e-12);
        assert!((c[1] - m2).abs() < 1e-12);
        assert!((c[2] - m3 / m2.powf(1.5)).abs() < 1e-9);

        let t = lcg_tile(12, 12, 4);
        let v = extract_features(&t, Method::Dft, &FeatureOptions::default()).unwrap();
        let amp = dft2_amplitude(&t).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - stats4(amp.as_slice()).unwrap()[1]).abs() < 1e-12);
    }

    #[test]
    fn dwt_feature_layout() {
        let t = lcg_tile(16, 16, 11);
        let opts = FeatureOptions {
            mask: FeatureMask::ALL,
            wavelet: Wavelet::Haar,
            levels: 2,
            angles: 180,
        };
        let v = extract_features(&t, Method::Dwt, &opts).unwrap();
        assert_eq!(v.len(), 32);
        assert_eq!(channel_names(Method::Dwt, &opts).len(), 32);
        assert_eq!(channel_names(Method::Dwt, &opts)[4], "dwt_l1_hl_mean");
    }

    #[test]
    fn zscore_two_values() {
        let grid = TileGrid { grid_h: 1, grid_w: 2, offset: (0, 0), stride: 1, tile_w: 2, tile_h: 2 };
        let cube = FeatureCube::new(grid, vec!["a".into(), "b".into()], vec![0.0, 3.0, 10.0, 3.0]).unwrap();
        let z = zscore_normalize(&cube).unwrap();
        assert_eq!(z.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
    }

    fn cube_from_channels(channels: &[Vec<f64>]) -> FeatureCube {
        let n = channels[0].len();
        let grid = TileGrid { grid_h: 1, grid_w: n, offset: (0, 0), stride: 1, tile_w: 2, tile_h: 2 };
        let mut data = Vec::with_capacity(n * channels.len());
        for i in 0..n {
            for ch in channels {
                data.push(ch[i]);
            }
        }
        let names = (0..channels.len()).map(|i| format!("c{i}")).collect();
        FeatureCube::new(grid, names, data).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let x: Vec<f64> = (0..20).map(|i| ((i * 7) % 13) as f64).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let corr = correlation_matrix(&cube_from_channels(&[x.clone(), x.clone(), neg, vec![1.0; 20]])).unwrap();
        assert!((corr.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((corr.get(0, 2) + 1.0).abs() < 1e-12);
        assert_eq!(*corr.get(3, 0), 0.0);
        assert_eq!(*corr.get(3, 3), 1.0);
        assert!(correlation_matrix(&cube_from_channels(&[vec![1.0], vec![2.0]])).is_err());
    }

    #[test]
    fn correlation_of_independent_channels_is_small() {
        let mut rng = crate::rng::seeded(5);
        use rand::Rng;
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let corr = correlation_matrix(&cube_from_channels(&[a, b])).unwrap();
        assert!(corr.get(0, 1).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn stats_permutation_invariant(mut v in prop::collection::vec(-100f64..100.0, 2..60), rot in 0usize..60) {
            let a = stats4(&v).unwrap();
            let k = rot % v.len();
            v.rotate_left(k);
            v.reverse();
            let b = stats4(&v).unwrap();
            for i in 0..4 {
                prop_assert!((a[i] - b[i]).abs() <= 1e-9 * (1.0 + a[i].abs()));
            }
        }

        #[test]
        fn variance_shift_and_scale(v in prop::collection::vec(-100f64..100.0, 2..60), shift in -50f64..50.0, scale in 0.1f64..10.0) {
            let base = stats4(&v).unwrap()[1];
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
            prop_assert!((stats4(&shifted).unwrap()[1] - base).abs() <= 1e-9 * (1.0 + base));
            prop_assert!((stats4(&scaled).unwrap()[1] - base * scale * scale).abs() <= 1e-9 * (1.0 + base * scale * scale));
        }

        #[test]
        fn zscore_idempotent(values in prop::collection::vec(-1e3f64..1e3, 3..40)) {
            let cube = cube_from_channels(&[values.clone(), values.iter().map(|v| v * v).collect()]);
            let once = zscore_normalize(&cube).unwrap();
            let twice = zscore_normalize(&once).unwrap();
            for f in 0..2 {
                let (mean, std) = channel_moments(&once, f);
                prop_assert!(mean.abs() <= 1e-9);
                prop_assert!(std == 0.0 || (std - 1.0).abs() <= 1e-9);
            }
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn correlation_symmetric_unit_diagonal(values in prop::collection::vec(-10f64..10.0, 30..31)) {
            let cube = cube_from_channels(&[values[..10].to_vec(), values[10..20].to_vec(), values[20..].to_vec()]);
            let c = correlation_matrix(&cube).unwrap();
            for i in 0..3 {
                prop_assert_eq!(*c.get(i, i), 1.0);
                for j in 0..3 {
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                }
            }
        }
    }
}
