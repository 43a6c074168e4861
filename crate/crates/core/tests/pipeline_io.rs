use std::fs;
use std::path::Path;

use afmseg::imgio::{self, load_image, read_gray};
use afmseg::metrics::score;
use afmseg::pipeline::{
    batch_aggregate, evaluate, run_segmentation, write_synth, ImageStatus, PipelineConfig, RunReport, REPORT_FILE,
};
use afmseg::synth::{synth_texture_image, SynthSpec};
use afmseg::{Error, Grid, IndexMap};

fn write_sidecar(path: &Path, json: &str) {
    fs::write(path, json).unwrap();
}

#[test]
fn pgm8_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let px = Grid::from_fn(7, 5, |r, c| (r * 40 + c * 3) as u8);
    let path = dir.path().join("a.pgm");
    imgio::write_pgm8(&path, &px).unwrap();
    let back = read_gray(&path).unwrap();
    assert_eq!(back.dims(), (5, 7));
    for (a, b) in px.as_slice().iter().zip(back.as_slice()) {
        assert_eq!(f64::from(*a), *b);
    }
}

#[test]
fn pgm16_round_trip_scales_to_255() {
    let dir = tempfile::tempdir().unwrap();
    let px = Grid::from_fn(3, 2, |r, c| [0u16, 257, 65535, 1000, 32768, 12][r * 3 + c]);
    let path = dir.path().join("b.pgm");
    imgio::write_pgm16(&path, &px).unwrap();
    let back = read_gray(&path).unwrap();
    for (a, b) in px.as_slice().iter().zip(back.as_slice()) {
        assert!((f64::from(*a) * 255.0 / 65535.0 - b).abs() < 1e-12);
    }
}

#[test]
fn load_image_derives_pixel_size() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("s.pgm");
    imgio::write_pgm8(&img, &Grid::filled(384, 384, 9u8)).unwrap();
    let side = dir.path().join("s.json");
    write_sidecar(&side, r#"{"scan_size_nm": 2000}"#);
    let loaded = load_image(&img, &side).unwrap();
    assert!((loaded.nm_per_pixel() - 2000.0 / 384.0).abs() < 1e-12);

    let tiny = dir.path().join("t.pgm");
    imgio::write_pgm8(&tiny, &Grid::filled(2, 2, 0u8)).unwrap();
    write_sidecar(&side, r#"{"scan_size_nm": 2}"#);
    assert_eq!(load_image(&tiny, &side).unwrap().nm_per_pixel(), 1.0);

    write_sidecar(&side, r#"{"scan_size_nm": -5}"#);
    assert!(matches!(load_image(&img, &side), Err(Error::Format { .. })));
    write_sidecar(&side, r#"{"sample_id": "x"}"#);
    assert!(matches!(load_image(&img, &side), Err(Error::Format { .. })));
    assert!(matches!(
        load_image(&dir.path().join("missing.pgm"), &dir.path().join("missing.json")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn colour_png_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ppm");
    fs::write(&path, b"P6\n2 2\n255\n\x00\x00\x00\x01\x01\x01\x02\x02\x02\x03\x03\x03").unwrap();
    assert!(matches!(read_gray(&path), Err(Error::Format { .. })));
}

fn small_config(inputs: Vec<std::path::PathBuf>, out: &Path) -> PipelineConfig {
    PipelineConfig {
        win_factor: 0.05,
        stride: 2,
        inputs,
        output_dir: out.to_path_buf(),
        ..Default::default()
    }
}

#[test]
fn segment_evaluate_aggregate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    for seed in 0..2 {
        let spec = SynthSpec {
            width: 128,
            height: 128,
            seed,
            ..Default::default()
        };
        write_synth(&data, &format!("img{seed}"), &synth_texture_image(&spec).unwrap(), Some("film")).unwrap();
    }
    // an image without a sidecar is skipped, not fatal
    imgio::write_pgm8(&data.join("images/orphan.pgm"), &Grid::filled(16, 16, 3u8)).unwrap();

    let out = dir.path().join("run");
    let config = PipelineConfig {
        pad_boundary: true,
        ..small_config(vec![data.join("images")], &out)
    };
    let report = run_segmentation(&config).unwrap();
    assert_eq!(report.images.len(), 3);
    let ok: Vec<_> = report.images.iter().filter(|i| i.status == ImageStatus::Ok).collect();
    assert_eq!(ok.len(), 2);
    let skipped = report.images.iter().find(|i| i.status == ImageStatus::Skipped).unwrap();
    assert!(skipped.reason.as_deref().unwrap().contains("orphan.json"));
    for img in &ok {
        for file in img.artifacts.values() {
            assert!(out.join(file).is_file(), "{file}");
        }
        assert_eq!(img.sample_id.as_deref(), Some("film"));
    }
    let sizes = fs::read_to_string(out.join("img0_light_sizes.csv")).unwrap();
    assert!(sizes.starts_with("radius_nm,probability,count\n"));

    let reloaded = RunReport::load(&out.join(REPORT_FILE)).unwrap();
    assert_eq!(reloaded.images.len(), 3);

    let eval = evaluate(&out, &data.join("truth"), false).unwrap();
    assert_eq!(eval.pairs.len(), 2);
    assert!(eval.pairs.iter().all(|p| p.prediction.to_string_lossy().contains("_index_full")));
    assert!(eval.mean.unwrap().dice > 0.95);

    let table = batch_aggregate(&[(out.clone(), reloaded)]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.sample_id == "film" && r.summary.n_images == 2));
}

#[test]
fn identical_directories_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let mask = Grid::from_fn(9, 6, |r, c| if (r + c) % 3 == 0 { 255u8 } else { 0 });
    imgio::write_pgm8(&dir.path().join("m.pgm"), &mask).unwrap();
    let eval = evaluate(dir.path(), dir.path(), false).unwrap();
    let m = eval.mean.unwrap();
    assert_eq!((m.accuracy, m.dice, m.iou), (1.0, 1.0, 1.0));
}

#[test]
fn hand_pair_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&truth).unwrap();
    imgio::write_pgm8(&pred.join("x_index.pgm"), &Grid::from_vec(2, 2, vec![255, 255, 0, 0]).unwrap()).unwrap();
    imgio::write_pgm8(&truth.join("x.pgm"), &Grid::from_vec(2, 2, vec![255, 0, 0, 0]).unwrap()).unwrap();
    let eval = evaluate(&pred, &truth, false).unwrap();
    let s = &eval.pairs[0].score;
    assert_eq!(s.accuracy, 0.75);
    assert_eq!(s.dice, 11.0 / 15.0);
    assert_eq!(s.iou, 7.0 / 12.0);

    let direct = score(
        &IndexMap::new(Grid::from_vec(2, 2, vec![1, 1, 0, 0]).unwrap(), 1.0).unwrap(),
        &IndexMap::new(Grid::from_vec(2, 2, vec![1, 0, 0, 0]).unwrap(), 1.0).unwrap(),
    )
    .unwrap();
    assert_eq!(&direct, s);
}

#[test]
fn dimension_mismatch_is_recorded_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, truth) = (dir.path().join("pred"), dir.path().join("truth"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&truth).unwrap();
    imgio::write_pgm8(&pred.join("a_index.pgm"), &Grid::filled(4, 4, 0u8)).unwrap();
    imgio::write_pgm8(&truth.join("a.pgm"), &Grid::filled(5, 4, 0u8)).unwrap();
    imgio::write_pgm8(&truth.join("b.pgm"), &Grid::filled(5, 4, 0u8)).unwrap();
    let eval = evaluate(&pred, &truth, false).unwrap();
    assert!(eval.pairs.is_empty());
    assert_eq!(eval.errors.len(), 1);
    assert_eq!(eval.unmatched_truths.len(), 1);
}

#[test]
fn missing_inputs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_segmentation(&small_config(vec![], dir.path())).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "inputs"));
}
