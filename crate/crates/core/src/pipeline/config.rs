use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::KMeansParams;
use crate::error::{Error, Result};
use crate::features::{FeatureMask, FeatureOptions, Method, Statistic};
use crate::transforms::{Wavelet, MAX_DWT_LEVELS};

/// Wavelet settings, the `[dwt]` table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwtSection {
    pub wavelet: Option<String>,
    pub levels: Option<usize>,
}

/// Radon settings, the `[radon]` table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadonSection {
    pub angles: Option<usize>,
}

/// Clustering settings, the `[kmeans]` table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansSection {
    pub k: Option<usize>,
    /// For `k > 2`: the domain (0 = dark, 1 = light) each cluster is merged into.
    pub merge: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

/// Configuration as written in a TOML file or given as flags. Every field is
/// optional; [`ConfigFile::overlay`] layers flag values over file values and
/// [`ConfigFile::resolve`] fills defaults and validates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub method: Option<String>,
    pub win_factor: Option<f64>,
    pub stride: Option<usize>,
    pub features: Option<Vec<String>>,
    pub workers: Option<usize>,
    pub pad_boundary: Option<bool>,
    pub dump_cube: Option<bool>,
    pub inputs: Option<Vec<PathBuf>>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dwt: DwtSection,
    #[serde(default)]
    pub radon: RadonSection,
    #[serde(default)]
    pub kmeans: KMeansSection,
}

macro_rules! take {
    ($dst:expr, $src:expr) => {
        if $src.is_some() {
            $dst = $src;
        }
    };
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let from_span = e.span().and_then(|span| {
                let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                let line = text[line_start..].lines().next()?;
                let (key, _) = line.split_once('=')?;
                Some(key.trim().to_string())
            });
            let field = from_span
                .or_else(|| e.message().split('`').nth(1).map(str::to_string))
                .unwrap_or_else(|| "config".to_string());
            Error::config(field, e.to_string().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::from_toml(&text)
    }

    /// Replaces every field that `over` sets.
    pub fn overlay(mut self, over: ConfigFile) -> Self {
        take!(self.method, over.method);
        take!(self.win_factor, over.win_factor);
        take!(self.stride, over.stride);
        take!(self.features, over.features);
        take!(self.workers, over.workers);
        take!(self.pad_boundary, over.pad_boundary);
        take!(self.dump_cube, over.dump_cube);
        take!(self.inputs, over.inputs);
        take!(self.output_dir, over.output_dir);
        take!(self.dwt.wavelet, over.dwt.wavelet);
        take!(self.dwt.levels, over.dwt.levels);
        take!(self.radon.angles, over.radon.angles);
        take!(self.kmeans.k, over.kmeans.k);
        take!(self.kmeans.merge, over.kmeans.merge);
        take!(self.kmeans.seed, over.kmeans.seed);
        take!(self.kmeans.max_iter, over.kmeans.max_iter);
        take!(self.kmeans.tol, over.kmeans.tol);
        self
    }

    pub fn resolve(&self) -> Result<PipelineConfig> {
        let method = match &self.method {
            Some(m) => m.parse()?,
            None => Method::Dft,
        };
        let win_factor = self.win_factor.unwrap_or(0.03);
        if !(win_factor > 0.0 && win_factor < 1.0) {
            return Err(Error::config(
                "win_factor",
                format!("must lie strictly between 0 and 1, got {win_factor}"),
            ));
        }
        let stride = self.stride.unwrap_or(1);
        if stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        let mask = match &self.features {
            Some(list) => {
                let stats = list
                    .iter()
                    .flat_map(|s| s.split(','))
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<Vec<Statistic>>>()?;
                FeatureMask::new(&stats)?
            }
            None => FeatureMask::VARIANCE,
        };
        let wavelet = match &self.dwt.wavelet {
            Some(w) => w.parse()?,
            None => Wavelet::Haar,
        };
        let levels = self.dwt.levels.unwrap_or(2);
        if !(1..=MAX_DWT_LEVELS).contains(&levels) {
            return Err(Error::config(
                "levels",
                format!("must be between 1 and {MAX_DWT_LEVELS}, got {levels}"),
            ));
        }
        let angles = self.radon.angles.unwrap_or(180);
        if angles == 0 {
            return Err(Error::config("angles", "must be at least 1"));
        }
        let defaults = KMeansParams::default();
        let kmeans = KMeansParams {
            k: self.kmeans.k.unwrap_or(defaults.k),
            seed: self.kmeans.seed.unwrap_or(defaults.seed),
            max_iter: self.kmeans.max_iter.unwrap_or(defaults.max_iter),
            tol: self.kmeans.tol.unwrap_or(defaults.tol),
        };
        if kmeans.k < 2 {
            return Err(Error::config("k", format!("must be at least 2, got {}", kmeans.k)));
        }
        let merge = self.kmeans.merge.clone();
        match &merge {
            None if kmeans.k > 2 => {
                return Err(Error::config(
                    "merge",
                    format!("k = {} needs a merge list mapping each cluster to 0 (dark) or 1 (light)", kmeans.k),
                ))
            }
            Some(m) if m.len() != kmeans.k || m.iter().any(|&d| d > 1) => {
                return Err(Error::config(
                    "merge",
                    format!("needs {} entries, each 0 or 1", kmeans.k),
                ))
            }
            _ => {}
        }
        if kmeans.max_iter == 0 {
            return Err(Error::config("max_iter", "must be at least 1"));
        }
        if !(kmeans.tol.is_finite() && kmeans.tol >= 0.0) {
            return Err(Error::config("tol", "must be a finite non-negative number"));
        }
        Ok(PipelineConfig {
            method,
            win_factor,
            stride,
            features: FeatureOptions {
                mask,
                wavelet,
                levels,
                angles,
            },
            kmeans,
            merge: if kmeans.k > 2 { merge } else { None },
            workers: self.workers.unwrap_or(1),
            pad_boundary: self.pad_boundary.unwrap_or(false),
            dump_cube: self.dump_cube.unwrap_or(false),
            inputs: self.inputs.clone().unwrap_or_default(),
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

/// Validated pipeline settings.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub method: Method,
    pub win_factor: f64,
    pub stride: usize,
    pub features: FeatureOptions,
    pub kmeans: KMeansParams,
    pub merge: Option<Vec<usize>>,
    /// Rayon worker threads; 0 uses one per core. Never changes results.
    pub workers: usize,
    pub pad_boundary: bool,
    pub dump_cube: bool,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        ConfigFile::default().resolve().expect("defaults are valid")
    }
}

impl PipelineConfig {
    /// Fully populated file form, for echoing into reports.
    pub fn echo(&self) -> ConfigFile {
        ConfigFile {
            method: Some(self.method.name().to_string()),
            win_factor: Some(self.win_factor),
            stride: Some(self.stride),
            features: Some(
                self.features
                    .mask
                    .statistics()
                    .iter()
                    .map(|s| s.name().to_string())
                    .collect(),
            ),
            workers: Some(self.workers),
            pad_boundary: Some(self.pad_boundary),
            dump_cube: Some(self.dump_cube),
            inputs: Some(self.inputs.clone()),
            output_dir: Some(self.output_dir.clone()),
            dwt: DwtSection {
                wavelet: Some(self.features.wavelet.name().to_string()),
                levels: Some(self.features.levels),
            },
            radon: RadonSection {
                angles: Some(self.features.angles),
            },
            kmeans: KMeansSection {
                k: Some(self.kmeans.k),
                merge: self.merge.clone(),
                seed: Some(self.kmeans.seed),
                max_iter: Some(self.kmeans.max_iter),
                tol: Some(self.kmeans.tol),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.method, Method::Dft);
        assert_eq!(c.win_factor, 0.03);
        assert_eq!(c.stride, 1);
        assert_eq!(c.features.mask, FeatureMask::VARIANCE);
        assert_eq!(c.kmeans.k, 2);
        assert_eq!(c.kmeans.max_iter, 300);
        assert_eq!(c.kmeans.tol, 1e-6);
    }

    #[test]
    fn parses_sections() {
        let file = ConfigFile::from_toml(
            r#"
            method = "dwt"
            win_factor = 0.05
            features = ["mean", "variance"]
            [dwt]
            wavelet = "cdf53"
            levels = 3
            [kmeans]
            k = 3
            merge = [0, 1, 1]
            seed = 9
            "#,
        )
        .unwrap();
        let c = file.resolve().unwrap();
        assert_eq!(c.method, Method::Dwt);
        assert_eq!(c.features.wavelet, Wavelet::Cdf53);
        assert_eq!(c.features.mask.count(), 2);
        assert_eq!(c.merge, Some(vec![0, 1, 1]));
        assert_eq!(c.echo().resolve().unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = |text: &str| field_of(ConfigFile::from_toml(text).and_then(|f| f.resolve()).unwrap_err());
        assert_eq!(bad("method = \"resnet\""), "method");
        assert_eq!(bad("win_factor = 1.5"), "win_factor");
        assert_eq!(bad("stride = 0"), "stride");
        assert_eq!(bad("features = []"), "features");
        assert_eq!(bad("features = [\"max\"]"), "features");
        assert_eq!(bad("[dwt]\nlevels = 4"), "levels");
        assert_eq!(bad("[dwt]\nwavelet = \"db2\""), "wavelet");
        assert_eq!(bad("[radon]\nangles = 0"), "angles");
        assert_eq!(bad("[kmeans]\nk = 3"), "merge");
        assert_eq!(bad("[kmeans]\nk = 1"), "k");
        assert_eq!(bad("colour = true"), "colour");
        assert_eq!(bad("stride = \"wide\""), "stride");
        assert_eq!(bad("[kmeans]\nseed = -1"), "seed");
    }

    #[test]
    fn overlay_prefers_flags() {
        let file = ConfigFile { method: Some("dct".into()), stride: Some(3), ..Default::default() };
        let flags = ConfigFile { stride: Some(2), ..Default::default() };
        let c = file.overlay(flags).resolve().unwrap();
        assert_eq!((c.method, c.stride), (Method::Dct, 2));
    }
}
