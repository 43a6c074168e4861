//! Local thickness of binary domains and the domain-size statistics built on it.
//!
//! The local thickness of a foreground pixel `p` is the radius of the largest
//! disk that contains `p` and fits inside the domain:
//!
//! `LT(p) = max { EDT(c) : |p - c| ≤ EDT(c) }`
//!
//! where `EDT(c)` is the Euclidean distance from pixel `c` to the nearest
//! background pixel, with everything outside the image counting as background.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

const FAR: i64 = 1 << 40;

/// One-dimensional squared distance transform of sampled function `f`.
fn edt_1d(f: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = (f[q] + (q * q) as i64) as f64;
        let intersect = |p: usize| (fq - (f[p] + (p * p) as i64) as f64) / (2 * q - 2 * p) as f64;
        // z[0] = -inf stops the scan at k = 0
        let mut s = intersect(v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from each pixel to the nearest background
/// pixel; the area outside the grid is background.
pub fn squared_edt(mask: &Grid<bool>) -> Grid<i64> {
    let (h, w) = mask.dims();
    let (ph, pw) = (h + 2, w + 2);
    let mut f = vec![0i64; ph * pw];
    for r in 0..h {
        for c in 0..w {
            if *mask.get(r, c) {
                f[(r + 1) * pw + c + 1] = FAR;
            }
        }
    }
    let n = ph.max(pw);
    let (mut v, mut z) = (vec![0usize; n], vec![0f64; n + 1]);
    let (mut line, mut out) = (vec![0i64; n], vec![0i64; n]);
    for c in 0..pw {
        for r in 0..ph {
            line[r] = f[r * pw + c];
        }
        edt_1d(&line[..ph], &mut out[..ph], &mut v, &mut z);
        for r in 0..ph {
            f[r * pw + c] = out[r];
        }
    }
    for r in 0..ph {
        line[..pw].copy_from_slice(&f[r * pw..(r + 1) * pw]);
        edt_1d(&line[..pw], &mut out[..pw], &mut v, &mut z);
        f[r * pw..(r + 1) * pw].copy_from_slice(&out[..pw]);
    }
    Grid::from_fn(w, h, |r, c| f[(r + 1) * pw + c + 1])
}

fn isqrt(n: i64) -> i64 {
    let mut r = (n as f64).sqrt() as i64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// `true` when the disk of squared radius `outer` centred one step away
/// (`diagonal` → √2, else 1) contains the whole disk of squared radius `inner`.
fn contains(outer: i64, inner: i64, diagonal: bool) -> bool {
    // √outer ≥ √inner + δ  ⇔  outer - inner - δ² ≥ 2δ√inner
    let (d2, four_d2) = if diagonal { (2, 8) } else { (1, 4) };
    let x = outer - inner - d2;
    x >= 0 && x * x >= four_d2 * inner
}

/// Per-pixel local thickness in pixels; background pixels are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ThicknessMap {
    pub values: Grid<f64>,
}

impl ThicknessMap {
    pub fn max(&self) -> f64 {
        self.values.as_slice().iter().copied().fold(0.0, f64::max)
    }

    /// Thickness scaled by 100 and rounded, for 16-bit PGM output.
    pub fn to_u16_centipixels(&self) -> Grid<u16> {
        self.values
            .map(|&v| (v * 100.0).round().clamp(0.0, u16::MAX as f64) as u16)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in 0..self.values.height() {
            let row: Vec<String> = self.values.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Local thickness of every foreground pixel of `mask`.
///
/// Every pixel is a candidate disk centre with radius `EDT(c)`. A centre whose
/// disk lies inside a neighbour's disk cannot raise any value and is skipped;
/// the remaining disks are painted with a running maximum.
pub fn local_thickness(mask: &Grid<bool>) -> ThicknessMap {
    let (h, w) = mask.dims();
    let d2 = squared_edt(mask);
    let mut best = Grid::filled(w, h, 0i64);
    for r in 0..h {
        for c in 0..w {
            let d = *d2.get(r, c);
            if d == 0 {
                continue;
            }
            let mut dominated = false;
            'scan: for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    if contains(*d2.get(nr as usize, nc as usize), d, dr != 0 && dc != 0) {
                        dominated = true;
                        break 'scan;
                    }
                }
            }
            if dominated {
                continue;
            }
            let reach = isqrt(d);
            let r_lo = (r as i64 - reach).max(0) as usize;
            let r_hi = (r as i64 + reach).min(h as i64 - 1) as usize;
            for y in r_lo..=r_hi {
                let dy = y as i64 - r as i64;
                let half = isqrt(d - dy * dy);
                let c_lo = (c as i64 - half).max(0) as usize;
                let c_hi = (c as i64 + half).min(w as i64 - 1) as usize;
                for x in c_lo..=c_hi {
                    let cell = best.get_mut(y, x);
                    if *cell < d {
                        *cell = d;
                    }
                }
            }
        }
    }
    let values = Grid::from_fn(w, h, |r, c| {
        if *mask.get(r, c) {
            (*best.get(r, c) as f64).sqrt()
        } else {
            0.0
        }
    });
    ThicknessMap { values }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeBin {
    pub radius_nm: f64,
    pub probability: f64,
    pub count: usize,
}

/// Distribution of local-thickness radii over the foreground pixels of one mask.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSizeDistribution {
    /// Strictly increasing radii.
    pub bins: Vec<SizeBin>,
    pub nm_per_pixel: Option<f64>,
}

impl DomainSizeDistribution {
    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Probability-weighted mean radius, `None` for an empty distribution.
    pub fn mean_nm(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.bins.iter().map(|b| b.radius_nm * b.probability).sum())
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius_nm,probability,count\n");
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{}", b.radius_nm, b.probability, b.count);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("radius_nm,probability,count") => {}
            other => {
                return Err(Error::input(format!(
                    "expected header `radius_nm,probability,count`, found {other:?}"
                )))
            }
        }
        let mut bins = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.trim().split(',').collect();
            let parsed = match fields.as_slice() {
                [r, p, c] => r
                    .parse::<f64>()
                    .ok()
                    .zip(p.parse::<f64>().ok())
                    .zip(c.parse::<usize>().ok()),
                _ => None,
            };
            let ((radius_nm, probability), count) = parsed
                .ok_or_else(|| Error::input(format!("malformed distribution row {}: `{line}`", i + 2)))?;
            if let Some(prev) = bins.last().map(|b: &SizeBin| b.radius_nm) {
                if radius_nm <= prev {
                    return Err(Error::input("distribution radii must be strictly increasing"));
                }
            }
            bins.push(SizeBin {
                radius_nm,
                probability,
                count,
            });
        }
        Ok(DomainSizeDistribution {
            bins,
            nm_per_pixel: None,
        })
    }
}

/// Histogram of foreground thickness at integer pixel radii; bin `r` holds
/// values in `(r - 1, r]` and is reported at `r · nm_per_pixel`.
pub fn size_distribution(tmap: &ThicknessMap, nm_per_pixel: f64) -> Result<DomainSizeDistribution> {
    if !(nm_per_pixel.is_finite() && nm_per_pixel > 0.0) {
        return Err(Error::input(format!(
            "nm_per_pixel must be positive, got {nm_per_pixel}"
        )));
    }
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &v in tmap.values.as_slice() {
        if v > 0.0 {
            *counts.entry(v.ceil() as u64).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    let bins = counts
        .into_iter()
        .map(|(r, count)| SizeBin {
            radius_nm: r as f64 * nm_per_pixel,
            probability: count as f64 / total as f64,
            count,
        })
        .collect();
    Ok(DomainSizeDistribution {
        bins,
        nm_per_pixel: Some(nm_per_pixel),
    })
}

/// Mean, population standard deviation, maximum and minimum of per-image mean sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSizeSummary {
    pub mean_nm: f64,
    pub std_nm: f64,
    pub max_nm: f64,
    pub min_nm: f64,
    pub n_images: usize,
}

impl DomainSizeSummary {
    pub fn from_means(means: &[f64]) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::input("cannot summarise an empty group"));
        }
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / n;
        Ok(DomainSizeSummary {
            mean_nm: mean,
            std_nm: var.sqrt(),
            max_nm: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_nm: means.iter().copied().fold(f64::INFINITY, f64::min),
            n_images: means.len(),
        })
    }
}

/// One image's distribution tagged with its group.
#[derive(Clone, Debug)]
pub struct GroupedDistribution<'a> {
    pub group: &'a str,
    pub image: &'a str,
    pub distribution: &'a DomainSizeDistribution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateStats {
    pub groups: BTreeMap<String, DomainSizeSummary>,
    pub warnings: Vec<String>,
}

/// Summarises per-image mean domain sizes by group. Empty distributions are
/// left out and reported in `warnings`; a group left with no images is an error.
pub fn aggregate_stats(items: &[GroupedDistribution<'_>]) -> Result<AggregateStats> {
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut warnings = Vec::new();
    for item in items {
        seen.insert(item.group);
        match item.distribution.mean_nm() {
            Some(m) => by_group.entry(item.group.to_string()).or_default().push(m),
            None => warnings.push(format!(
                "{}: empty domain-size distribution excluded from group `{}`",
                item.image, item.group
            )),
        }
    }
    if let Some(empty) = seen.iter().find(|g| !by_group.contains_key(**g)) {
        return Err(Error::input(format!("group `{empty}` has no usable distributions")));
    }
    let groups = by_group
        .into_iter()
        .map(|(g, means)| DomainSizeSummary::from_means(&means).map(|s| (g, s)))
        .collect::<Result<_>>()?;
    Ok(AggregateStats { groups, warnings })
}
