use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cluster::IndexMap;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::imgio;
use crate::metrics::{score, SegmentationScore};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairScore {
    pub name: String,
    pub prediction: PathBuf,
    pub truth: PathBuf,
    #[serde(flatten)]
    pub score: SegmentationScore,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub pairs: Vec<PairScore>,
    /// Unweighted mean over all scored pairs.
    pub mean: Option<SegmentationScore>,
    pub unmatched_predictions: Vec<PathBuf>,
    pub unmatched_truths: Vec<PathBuf>,
    /// `(name, reason)` for pairs that could not be scored.
    pub errors: Vec<(String, String)>,
}

impl EvaluationReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("name,accuracy,dice,iou,dice_dark,dice_light,iou_dark,iou_light\n");
        let mut row = |name: &str, s: &SegmentationScore| {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{},{}",
                s.accuracy,
                s.dice,
                s.iou,
                s.dice_per_domain[0],
                s.dice_per_domain[1],
                s.iou_per_domain[0],
                s.iou_per_domain[1]
            );
        };
        for p in &self.pairs {
            row(&p.name, &p.score);
        }
        if let Some(m) = &self.mean {
            row("mean", m);
        }
        out
    }
}

/// Prediction files produced by `segment` carry these suffixes after the image stem.
const PREDICTION_SUFFIXES: [&str; 2] = ["_index_full", "_index"];

/// Image stem with any prediction suffix removed, and whether a suffix was present.
fn match_key(path: &Path) -> Option<(String, bool)> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    if ext != "pgm" && ext != "png" {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    Some(match PREDICTION_SUFFIXES.iter().find_map(|s| stem.strip_suffix(s)) {
        Some(base) => (base.to_string(), true),
        None => (stem.to_string(), false),
    })
}

/// Masks in `dir` keyed by image stem. For a prediction directory written by
/// `segment`, only the index maps count; a directory without any index maps is
/// taken as plain masks.
fn list_masks(dir: &Path, predictions: bool) -> Result<BTreeMap<String, PathBuf>> {
    let mut keyed = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            if let Some((key, suffixed)) = match_key(&path) {
                keyed.push((key, suffixed, path));
            }
        }
    }
    let only_suffixed = predictions && keyed.iter().any(|k| k.1);
    keyed.sort_by(|a, b| a.2.cmp(&b.2));
    let mut out = BTreeMap::new();
    for (key, suffixed, path) in keyed {
        if only_suffixed && !suffixed {
            continue;
        }
        {
            // prefer the image-sized `_index_full` map when both variants exist
            let replace = out
                .get(&key)
                .map(|p: &PathBuf| !p.to_string_lossy().contains("_index_full"))
                .unwrap_or(true);
            if replace {
                out.insert(key, path);
            }
        }
    }
    Ok(out)
}

fn load_mask(path: &Path) -> Result<IndexMap> {
    Ok(IndexMap::from_mask_pixels(&imgio::read_gray(path)?, 1.0))
}

/// Centre crop of `truth` to `(h, w)`, matching a stride-1 interior grid whose
/// first centre sits at half the tile size.
fn crop_interior(truth: &IndexMap, h: usize, w: usize) -> Option<IndexMap> {
    let (th, tw) = truth.dims();
    if h > th || w > tw {
        return None;
    }
    let top = (th - h + 1) / 2;
    let left = (tw - w + 1) / 2;
    let labels = Grid::from_fn(w, h, |r, c| *truth.labels.get(top + r, left + c));
    Some(IndexMap {
        labels,
        ..truth.clone()
    })
}

/// Scores every prediction mask against the ground-truth mask with the same
/// image stem. With `crop_truth`, larger truth masks are cropped to the
/// interior region a stride-1 run analyses.
pub fn evaluate(pred_dir: &Path, truth_dir: &Path, crop_truth: bool) -> Result<EvaluationReport> {
    let preds = list_masks(pred_dir, true)?;
    let truths = list_masks(truth_dir, false)?;
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    for (name, pred_path) in &preds {
        let Some(truth_path) = truths.get(name) else { continue };
        let scored = load_mask(pred_path).and_then(|pred| {
            let mut truth = load_mask(truth_path)?;
            if crop_truth && pred.dims() != truth.dims() {
                let (h, w) = pred.dims();
                truth = crop_interior(&truth, h, w).unwrap_or(truth);
            }
            score(&pred, &truth)
        });
        match scored {
            Ok(score) => pairs.push(PairScore {
                name: name.clone(),
                prediction: pred_path.clone(),
                truth: truth_path.clone(),
                score,
            }),
            Err(e) => errors.push((name.clone(), e.to_string())),
        }
    }
    let mean = (!pairs.is_empty()).then(|| {
        let n = pairs.len() as f64;
        let avg = |f: &dyn Fn(&SegmentationScore) -> f64| pairs.iter().map(|p| f(&p.score)).sum::<f64>() / n;
        SegmentationScore {
            accuracy: avg(&|s| s.accuracy),
            dice: avg(&|s| s.dice),
            iou: avg(&|s| s.iou),
            dice_per_domain: [avg(&|s| s.dice_per_domain[0]), avg(&|s| s.dice_per_domain[1])],
            iou_per_domain: [avg(&|s| s.iou_per_domain[0]), avg(&|s| s.iou_per_domain[1])],
        }
    });
    Ok(EvaluationReport {
        pairs,
        mean,
        unmatched_predictions: preds
            .iter()
            .filter(|(k, _)| !truths.contains_key(*k))
            .map(|(_, p)| p.clone())
            .collect(),
        unmatched_truths: truths
            .iter()
            .filter(|(k, _)| !preds.contains_key(*k))
            .map(|(_, p)| p.clone())
            .collect(),
        errors,
    })
}
