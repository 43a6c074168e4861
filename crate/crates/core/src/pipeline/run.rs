use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ConfigFile, PipelineConfig};
use crate::cluster::{kmeans, label_domains, merge_clusters, Domain, IndexMap, KMeansResult};
use crate::domsize::{local_thickness, size_distribution, DomainSizeDistribution, ThicknessMap};
use crate::error::{Error, Result};
use crate::features::{build_feature_cube, correlation_matrix_of, zscore_normalize, FeatureCube};
use crate::grid::Grid;
use crate::imgio::{self, GrayImage, Sidecar};
use crate::tiling::TileSpec;

/// Everything computed for one image.
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub tile: TileSpec,
    pub cube: FeatureCube,
    pub normalized: FeatureCube,
    pub clusters: KMeansResult,
    pub index_map: IndexMap,
    /// Indexed by [`Domain`] (dark, light).
    pub thickness: [ThicknessMap; 2],
    pub distributions: [DomainSizeDistribution; 2],
    pub timings: Timings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub features_ms: f64,
    pub cluster_ms: f64,
    pub thickness_ms: f64,
    pub total_ms: f64,
}

fn elapsed_ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Full in-memory pipeline for one image.
pub fn segment_image(image: &GrayImage, config: &PipelineConfig) -> Result<Segmentation> {
    let start = Instant::now();
    let tile = TileSpec::from_win_factor(image.width(), image.height(), config.win_factor, config.stride)?;
    let cube = build_feature_cube(image, &tile, config.method, &config.features)?;
    let normalized = zscore_normalize(&cube)?;
    let features_ms = elapsed_ms(start);

    let t = Instant::now();
    let mut clusters = kmeans(normalized.as_slice(), normalized.n_channels(), &config.kmeans)?;
    if let Some(merge) = &config.merge {
        clusters = merge_clusters(&clusters, normalized.as_slice(), merge)?;
    }
    let index_map = label_domains(&clusters, &normalized, image)?;
    let cluster_ms = elapsed_ms(t);

    let t = Instant::now();
    let (dark, light) = rayon::join(
        || local_thickness(&index_map.mask(Domain::Dark)),
        || local_thickness(&index_map.mask(Domain::Light)),
    );
    let distributions = [
        size_distribution(&dark, index_map.nm_per_pixel)?,
        size_distribution(&light, index_map.nm_per_pixel)?,
    ];
    let thickness_ms = elapsed_ms(t);

    Ok(Segmentation {
        tile,
        cube,
        normalized,
        clusters,
        index_map,
        thickness: [dark, light],
        distributions,
        timings: Timings {
            features_ms,
            cluster_ms,
            thickness_ms,
            total_ms: elapsed_ms(start),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageStatus {
    Ok,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: PathBuf,
    pub status: ImageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nm_per_pixel: Option<f64>,
    /// `[height, width]` of the analysis grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    /// `[height, width]` of one tile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile: Option<[usize; 2]>,
    /// Artifact name → file name, relative to the report's directory.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_mean_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_mean_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Timings>,
}

impl ImageReport {
    fn skipped(image: &Path, reason: String) -> Self {
        ImageReport {
            image: image.to_path_buf(),
            status: ImageStatus::Skipped,
            reason: Some(reason),
            sample_id: None,
            nm_per_pixel: None,
            grid: None,
            tile: None,
            artifacts: BTreeMap::new(),
            light_mean_nm: None,
            dark_mean_nm: None,
            timings_ms: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: ConfigFile,
    pub images: Vec<ImageReport>,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

pub const REPORT_FILE: &str = "report.json";

fn is_image_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm")
    )
}

/// Expands directories into their PNG/PGM files, sorted by name.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| Error::io(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_image_file(p))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

/// The sidecar of `image.png` is `image.json` next to it.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("json")
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string())
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    imgio::write_bytes(path, text.as_bytes())
}

fn emit_image(path: &Path, config: &PipelineConfig) -> Result<ImageReport> {
    let sidecar_file = sidecar_path(path);
    let sidecar = Sidecar::read(&sidecar_file)?;
    let image = imgio::load_image(path, &sidecar_file)?;
    let seg = segment_image(&image, config)?;
    let name = stem(path);
    let out = &config.output_dir;
    let mut artifacts = BTreeMap::new();
    let mut emit = |key: &str, file: String, bytes: Vec<u8>| -> Result<()> {
        imgio::write_bytes(&out.join(&file), &bytes)?;
        artifacts.insert(key.to_string(), file);
        Ok(())
    };
    emit("index", format!("{name}_index.pgm"), imgio::encode_pgm8(&seg.index_map.to_pgm_pixels()))?;
    for domain in Domain::BOTH {
        let d = domain.name();
        let mask = seg.index_map.mask(domain).map(|&m| if m { 255u8 } else { 0 });
        emit(&format!("{d}_mask"), format!("{name}_{d}.pgm"), imgio::encode_pgm8(&mask))?;
        let tmap = &seg.thickness[domain as usize];
        emit(
            &format!("{d}_thickness"),
            format!("{name}_{d}_thickness.pgm"),
            imgio::encode_pgm16(&tmap.to_u16_centipixels()),
        )?;
        emit(
            &format!("{d}_sizes"),
            format!("{name}_{d}_sizes.csv"),
            seg.distributions[domain as usize].to_csv().into_bytes(),
        )?;
    }
    if config.pad_boundary {
        let full = seg
            .cube
            .grid
            .pad_to_image(&seg.index_map.to_pgm_pixels(), image.width(), image.height());
        emit("index_full", format!("{name}_index_full.pgm"), imgio::encode_pgm8(&full))?;
    }
    if config.dump_cube {
        emit("features", format!("{name}_features.csv"), seg.cube.to_csv().into_bytes())?;
    }
    Ok(ImageReport {
        image: path.to_path_buf(),
        status: ImageStatus::Ok,
        reason: None,
        sample_id: Some(sidecar.sample_id.unwrap_or_else(|| name.clone())),
        nm_per_pixel: Some(image.nm_per_pixel()),
        grid: Some([seg.index_map.dims().0, seg.index_map.dims().1]),
        tile: Some([seg.tile.tile_h, seg.tile.tile_w]),
        artifacts,
        light_mean_nm: seg.distributions[Domain::Light as usize].mean_nm(),
        dark_mean_nm: seg.distributions[Domain::Dark as usize].mean_nm(),
        timings_ms: Some(seg.timings),
    })
}

/// Segments every input image and writes masks, thickness maps, size
/// distributions and `report.json` into the output directory. Images that
/// cannot be processed are recorded as skipped.
pub fn run_segmentation(config: &PipelineConfig) -> Result<RunReport> {
    let inputs = expand_inputs(&config.inputs)?;
    if inputs.is_empty() {
        return Err(Error::config("inputs", "no input images given"));
    }
    fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let pool = thread_pool(config.workers)?;
    let mut images = Vec::with_capacity(inputs.len());
    for path in &inputs {
        let started = Instant::now();
        let report = match pool.install(|| emit_image(path, config)) {
            Ok(mut r) => {
                if let Some(t) = r.timings_ms.as_mut() {
                    t.total_ms = elapsed_ms(started);
                }
                r
            }
            Err(e @ Error::Invariant(_)) => return Err(e),
            Err(e) => ImageReport::skipped(path, e.to_string()),
        };
        images.push(report);
    }
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.echo(),
        images,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Invariant(e.to_string()))?;
    write_text(&config.output_dir.join(REPORT_FILE), &json)?;
    Ok(report)
}

/// Channel correlation pooled over the z-scored cubes of all inputs, plus the
/// per-image matrices.
pub struct Correlation {
    pub channels: Vec<String>,
    pub pooled: Grid<f64>,
    pub per_image: Vec<(PathBuf, Grid<f64>)>,
}

pub fn correlate_images(config: &PipelineConfig) -> Result<Correlation> {
    let inputs = expand_inputs(&config.inputs)?;
    if inputs.is_empty() {
        return Err(Error::config("inputs", "no input images given"));
    }
    let pool = thread_pool(config.workers)?;
    pool.install(|| {
        let mut cubes = Vec::with_capacity(inputs.len());
        for path in &inputs {
            let image = imgio::load_image(path, &sidecar_path(path))?;
            let tile = TileSpec::from_win_factor(image.width(), image.height(), config.win_factor, config.stride)?;
            let cube = build_feature_cube(&image, &tile, config.method, &config.features)?;
            cubes.push(zscore_normalize(&cube)?);
        }
        let refs: Vec<&FeatureCube> = cubes.iter().collect();
        let pooled = correlation_matrix_of(&refs)?;
        let per_image = inputs
            .iter()
            .zip(&cubes)
            .map(|(p, c)| correlation_matrix_of(&[c]).map(|m| (p.clone(), m)))
            .collect::<Result<_>>()?;
        Ok(Correlation {
            channels: cubes[0].channels.clone(),
            pooled,
            per_image,
        })
    })
}
