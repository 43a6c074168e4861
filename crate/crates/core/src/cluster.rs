//! k-means over feature vectors and the light/dark index map derived from it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureCube;
use crate::grid::Grid;
use crate::imgio::GrayImage;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 2,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k` centroids of dimension `dim`, flattened.
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub iterations: usize,
    pub inertia: f64,
    /// Inertia after each assignment step, starting with the initial centroids.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid index (ties go to the lowest index) and its squared distance.
#[inline]
fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(data: &[f64], dim: usize, centroids: &[f64]) -> Vec<(usize, f64)> {
    data.par_chunks_exact(dim)
        .with_min_len(1024)
        .map(|p| nearest(p, centroids, dim))
        .collect()
}

fn validate(data: &[f64], dim: usize, k: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::input("feature vectors must have at least one dimension"));
    }
    if data.len() % dim != 0 {
        return Err(Error::input("data length is not a multiple of the dimension"));
    }
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let n = data.len() / dim;
    if n < k {
        return Err(Error::input(format!("need at least k={k} vectors, got {n}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature vectors contain NaN or infinite values"));
    }
    Ok(n)
}

/// k-means++ seeding driven by the ChaCha8 stream for `seed`.
pub fn kmeans_plus_plus(data: &[f64], dim: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    let n = validate(data, dim, k)?;
    let mut rng = rng::seeded(seed);
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(point(rng.random_range(0..n)));
    let mut d2: Vec<f64> = data.chunks_exact(dim).map(|p| sq_dist(p, &centroids)).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(point(pick));
        let newest = &centroids[start..];
        for (d, p) in d2.iter_mut().zip(data.chunks_exact(dim)) {
            *d = d.min(sq_dist(p, newest));
        }
    }
    Ok(centroids)
}

/// Lloyd iterations from k-means++ seeding. Identical inputs and seed give
/// bit-identical results regardless of the rayon pool size.
pub fn kmeans(data: &[f64], dim: usize, params: &KMeansParams) -> Result<KMeansResult> {
    let init = kmeans_plus_plus(data, dim, params.k, params.seed)?;
    kmeans_with_init(data, dim, init, params)
}

/// Lloyd iterations from caller-supplied centroids.
///
/// An emptied cluster is re-seeded at the point farthest from its own centroid
/// (lowest index on ties); the next assignment step decides its members.
pub fn kmeans_with_init(data: &[f64], dim: usize, init: Vec<f64>, params: &KMeansParams) -> Result<KMeansResult> {
    let n = validate(data, dim, params.k)?;
    let k = params.k;
    if init.len() != k * dim {
        return Err(Error::input(format!(
            "expected {k} initial centroids of dimension {dim}"
        )));
    }
    let mut centroids = init;
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        let assigned = assign(data, dim, &centroids);
        history.push(assigned.iter().map(|a| a.1).sum());
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &(j, _)) in data.chunks_exact(dim).zip(&assigned) {
            counts[j] += 1;
            for (s, v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = sums;
        for j in 0..k {
            let c = &mut next[j * dim..(j + 1) * dim];
            if counts[j] > 0 {
                c.iter_mut().for_each(|v| *v /= counts[j] as f64);
            } else {
                let mut far = 0;
                for (i, a) in assigned.iter().enumerate() {
                    if a.1 > assigned[far].1 {
                        far = i;
                    }
                }
                c.copy_from_slice(&data[far * dim..(far + 1) * dim]);
            }
        }
        let shift = next
            .chunks_exact(dim)
            .zip(centroids.chunks_exact(dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < params.tol {
            break;
        }
    }
    let assigned = assign(data, dim, &centroids);
    let inertia = assigned.iter().map(|a| a.1).sum();
    history.push(inertia);
    debug_assert_eq!(assigned.len(), n);
    Ok(KMeansResult {
        assignments: assigned.into_iter().map(|a| a.0).collect(),
        centroids,
        dim,
        iterations,
        inertia,
        inertia_history: history,
    })
}

/// Collapses a k-cluster result onto two domains through `merge[j] ∈ {0, 1}`.
pub fn merge_clusters(result: &KMeansResult, data: &[f64], merge: &[usize]) -> Result<KMeansResult> {
    let k = result.k();
    if merge.len() != k {
        return Err(Error::config(
            "merge",
            format!("needs one entry per cluster ({k}), got {}", merge.len()),
        ));
    }
    if merge.iter().any(|&m| m > 1) {
        return Err(Error::config("merge", "entries must be 0 or 1"));
    }
    let dim = result.dim;
    let assignments: Vec<usize> = result.assignments.iter().map(|&j| merge[j]).collect();
    let mut centroids = vec![0.0; 2 * dim];
    let mut counts = [0usize; 2];
    for (p, &g) in data.chunks_exact(dim).zip(&assignments) {
        counts[g] += 1;
        for (s, v) in centroids[g * dim..(g + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    for g in 0..2 {
        if counts[g] > 0 {
            centroids[g * dim..(g + 1) * dim]
                .iter_mut()
                .for_each(|v| *v /= counts[g] as f64);
        }
    }
    let inertia = data
        .chunks_exact(dim)
        .zip(&assignments)
        .map(|(p, &g)| sq_dist(p, &centroids[g * dim..(g + 1) * dim]))
        .sum();
    Ok(KMeansResult {
        assignments,
        centroids,
        dim,
        iterations: result.iterations,
        inertia,
        inertia_history: result.inertia_history.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Dark = 0,
    Light = 1,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::Dark, Domain::Light];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Dark => "dark",
            Domain::Light => "light",
        }
    }
}

/// Binary domain labels (0 = dark, 1 = light) on a grid of analysis cells.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexMap {
    pub labels: Grid<u8>,
    /// Pixel `(row, col)` of cell `(0, 0)`.
    pub offset: (usize, usize),
    /// Pixels between neighbouring cells.
    pub stride: usize,
    /// Physical size of one cell.
    pub nm_per_pixel: f64,
}

impl IndexMap {
    pub fn new(labels: Grid<u8>, nm_per_pixel: f64) -> Result<Self> {
        if labels.as_slice().iter().any(|&l| l > 1) {
            return Err(Error::input("index map labels must be 0 or 1"));
        }
        Ok(IndexMap {
            labels,
            offset: (0, 0),
            stride: 1,
            nm_per_pixel,
        })
    }

    /// Reads a 0/255 mask; values of 128 and above count as light.
    pub fn from_mask_pixels(pixels: &Grid<f64>, nm_per_pixel: f64) -> Self {
        IndexMap {
            labels: pixels.map(|&v| u8::from(v >= 127.5)),
            offset: (0, 0),
            stride: 1,
            nm_per_pixel,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.labels.dims()
    }

    pub fn mask(&self, domain: Domain) -> Grid<bool> {
        let l = domain.label();
        self.labels.map(|&v| v == l)
    }

    /// 0 for dark, 255 for light.
    pub fn to_pgm_pixels(&self) -> Grid<u8> {
        self.labels.map(|&v| v * 255)
    }

    pub fn flipped(&self) -> Self {
        IndexMap {
            labels: self.labels.map(|&v| 1 - v),
            ..self.clone()
        }
    }
}

/// Labels the cluster whose member tile centres are brighter on average as light.
pub fn label_domains(result: &KMeansResult, cube: &FeatureCube, image: &GrayImage) -> Result<IndexMap> {
    if result.k() != 2 {
        return Err(Error::config(
            "k",
            format!("light/dark labelling needs exactly 2 clusters, got {}", result.k()),
        ));
    }
    let grid = &cube.grid;
    if result.assignments.len() != grid.len() {
        return Err(Error::input(format!(
            "{} assignments for a {}x{} cube",
            result.assignments.len(),
            grid.grid_h,
            grid.grid_w
        )));
    }
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for ((row, col), &j) in grid.centers().zip(&result.assignments) {
        sums[j] += image.get(row, col);
        counts[j] += 1;
    }
    let mean = |j: usize| if counts[j] > 0 { sums[j] / counts[j] as f64 } else { f64::NEG_INFINITY };
    let light_cluster = if mean(1) > mean(0) {
        1
    } else if mean(0) > mean(1) {
        0
    } else {
        1
    };
    let labels = Grid::from_vec(
        grid.grid_w,
        grid.grid_h,
        result
            .assignments
            .iter()
            .map(|&j| u8::from(j == light_cluster))
            .collect(),
    )?;
    Ok(IndexMap {
        labels,
        offset: grid.offset,
        stride: grid.stride,
        nm_per_pixel: image.nm_per_pixel() * grid.stride as f64,
    })
}
