//! End-to-end runs: configuration, segmentation of image batches, evaluation
//! against ground truth, and per-sample aggregation.

mod aggregate;
mod config;
mod evaluate;
mod run;

use std::fs;
use std::path::Path;

pub use aggregate::{batch_aggregate, AggregateRow, AggregateTable};
pub use config::{ConfigFile, DwtSection, KMeansSection, PipelineConfig, RadonSection};
pub use evaluate::{evaluate, EvaluationReport, PairScore};
pub use run::{
    correlate_images, expand_inputs, run_segmentation, segment_image, sidecar_path, Correlation,
    ImageReport, ImageStatus, RunReport, Segmentation, Timings, REPORT_FILE,
};

use crate::error::{Error, Result};
use crate::imgio;
use crate::synth::SynthOutput;

/// Writes `images/<name>.pgm`, `images/<name>.json` and `truth/<name>.pgm` under `dir`.
pub fn write_synth(dir: &Path, name: &str, out: &SynthOutput, sample_id: Option<&str>) -> Result<()> {
    let images = dir.join("images");
    let truth = dir.join("truth");
    for d in [&images, &truth] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    imgio::write_pgm8(&images.join(format!("{name}.pgm")), &out.image.quantized())?;
    let scan = out.image.nm_per_pixel() * out.image.width() as f64;
    let mut sidecar = serde_json::json!({ "scan_size_nm": scan });
    if let Some(id) = sample_id {
        sidecar["sample_id"] = serde_json::Value::from(id);
    }
    imgio::write_bytes(&images.join(format!("{name}.json")), format!("{sidecar}\n").as_bytes())?;
    imgio::write_pgm8(&truth.join(format!("{name}.pgm")), &out.truth.to_pgm_pixels())
}
