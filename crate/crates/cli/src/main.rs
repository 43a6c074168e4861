use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afmseg::features::correlation_csv;
use afmseg::imgio;
use afmseg::pipeline::{
    batch_aggregate, correlate_images, evaluate, run_segmentation, write_synth, ConfigFile, ImageStatus,
    PipelineConfig, RunReport, REPORT_FILE,
};
use afmseg::synth::{synth_texture_image, Layout, SynthSpec};
use afmseg::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "afmseg", version, about = "Texture-based two-phase domain segmentation of grayscale micrographs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment images into light/dark domains and measure domain sizes.
    Segment(SegmentArgs),
    /// Score predicted index maps against ground-truth masks.
    Evaluate(EvaluateArgs),
    /// Write synthetic two-texture images with ground truth.
    Synth(SynthArgs),
    /// Summarise domain sizes per sample over one or more segment runs.
    Aggregate(AggregateArgs),
    /// Correlation matrix of the feature channels.
    Correlate(CorrelateArgs),
}

/// Flags that override the config file.
#[derive(Args)]
struct PipelineArgs {
    /// Image files or directories of PNG/PGM images.
    inputs: Vec<PathBuf>,
    /// TOML config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dft, dct, dwt or radon.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated statistics: mean, variance, skew, kurtosis.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    stride: Option<usize>,
    /// DWT levels (1-3).
    #[arg(long)]
    levels: Option<usize>,
    /// haar or cdf53.
    #[arg(long)]
    wavelet: Option<String>,
    /// Number of Radon projection angles.
    #[arg(long)]
    angles: Option<usize>,
    /// Number of k-means clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated domain (0 dark, 1 light) for each cluster when k > 2.
    #[arg(long)]
    merge: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl PipelineArgs {
    fn file_config(&self) -> Result<ConfigFile, Error> {
        match &self.config {
            Some(path) => ConfigFile::load(path),
            None => Ok(ConfigFile::default()),
        }
    }

    fn overrides(&self) -> Result<ConfigFile, Error> {
        let mut over = ConfigFile {
            method: self.method.clone(),
            stride: self.stride,
            features: self.features.as_ref().map(|f| split_list(f)),
            workers: self.workers,
            output_dir: self.out.clone(),
            ..Default::default()
        };
        if !self.inputs.is_empty() {
            over.inputs = Some(self.inputs.clone());
        }
        over.dwt.levels = self.levels;
        over.dwt.wavelet = self.wavelet.clone();
        over.radon.angles = self.angles;
        over.kmeans.k = self.k;
        over.kmeans.seed = self.seed;
        over.kmeans.max_iter = self.max_iter;
        over.kmeans.tol = self.tol;
        if let Some(m) = &self.merge {
            let parsed = split_list(m)
                .iter()
                .map(|v| v.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| config_error("merge", e.to_string()))?;
            over.kmeans.merge = Some(parsed);
        }
        Ok(over)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// One or more comma-separated win factors; several run a sweep into `<out>/win_<factor>`.
    #[arg(long)]
    win_factor: Option<String>,
    /// Also write image-sized index maps, filling the border from the nearest tile centre.
    #[arg(long)]
    pad_boundary: bool,
    /// Also write the raw feature cube as CSV.
    #[arg(long)]
    dump_cube: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory with predicted `<name>_index.pgm` maps.
    #[arg(long)]
    pred: PathBuf,
    /// Directory with ground-truth `<name>.pgm` masks.
    #[arg(long)]
    truth: PathBuf,
    /// Crop full-size truth masks to the interior grid of stride-1 predictions.
    #[arg(long)]
    crop_truth: bool,
    /// Directory for evaluation.json and evaluation.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutKind {
    VerticalSplit,
    HorizontalSplit,
    Disk,
    Stripes,
}

#[derive(Args)]
struct SynthArgs {
    /// Writes `images/` and `truth/` below this directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Seed of the first image; image i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, value_enum, default_value = "vertical-split")]
    layout: LayoutKind,
    /// Disk radius in pixels.
    #[arg(long, default_value_t = 60.0)]
    radius: f64,
    /// Stripe width in pixels.
    #[arg(long, default_value_t = 64)]
    stripe_width: usize,
    #[arg(long)]
    nm_per_pixel: Option<f64>,
    #[arg(long)]
    sample_id: Option<String>,
    #[arg(long, default_value = "synth")]
    prefix: String,
}

#[derive(Args)]
struct AggregateArgs {
    /// Output directories of `segment` runs.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    win_factor: Option<f64>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .collect()
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidInput(_) => 1,
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::Invariant(_) => 3,
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Invariant(e.to_string()))?;
    imgio::write_bytes(path, format!("{text}\n").as_bytes())
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn segment(args: &SegmentArgs) -> Result<(), Error> {
    let base = args.pipeline.file_config()?.overlay(args.pipeline.overrides()?);
    let factors: Vec<f64> = match &args.win_factor {
        Some(list) => split_list(list)
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| config_error("win_factor", format!("`{v}`: {e}"))))
            .collect::<Result<_, _>>()?,
        None => vec![base.win_factor.unwrap_or(PipelineConfig::default().win_factor)],
    };
    if factors.is_empty() {
        return Err(config_error("win_factor", "no value given"));
    }
    let sweep = factors.len() > 1;
    let mut any_ok = false;
    for wf in factors {
        let mut file = base.clone();
        file.win_factor = Some(wf);
        if args.pad_boundary {
            file.pad_boundary = Some(true);
        }
        if args.dump_cube {
            file.dump_cube = Some(true);
        }
        let mut config = file.resolve()?;
        if sweep {
            config.output_dir = config.output_dir.join(format!("win_{wf}"));
        }
        let report = run_segmentation(&config)?;
        for img in &report.images {
            match img.status {
                ImageStatus::Ok => {
                    any_ok = true;
                    println!(
                        "{}: ok, light mean {} nm, dark mean {} nm",
                        img.image.display(),
                        fmt_nm(img.light_mean_nm),
                        fmt_nm(img.dark_mean_nm)
                    );
                }
                ImageStatus::Skipped => eprintln!(
                    "{}: skipped: {}",
                    img.image.display(),
                    img.reason.as_deref().unwrap_or("unknown reason")
                ),
            }
        }
        println!("wrote {}", config.output_dir.join(REPORT_FILE).display());
    }
    if any_ok {
        Ok(())
    } else {
        Err(Error::Format {
            path: base.inputs.and_then(|i| i.first().cloned()).unwrap_or_default(),
            reason: "no input image could be processed".to_string(),
        })
    }
}

fn fmt_nm(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), Error> {
    let report = evaluate(&args.pred, &args.truth, args.crop_truth)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("evaluation.json"), &report)?;
    imgio::write_bytes(&args.out.join("evaluation.csv"), report.to_csv().as_bytes())?;
    for p in &report.unmatched_predictions {
        eprintln!("no truth for {}", p.display());
    }
    for t in &report.unmatched_truths {
        eprintln!("no prediction for {}", t.display());
    }
    for (name, reason) in &report.errors {
        eprintln!("{name}: {reason}");
    }
    match &report.mean {
        Some(m) => {
            println!(
                "{} pairs: accuracy {:.4}, dice {:.4}, iou {:.4}",
                report.pairs.len(),
                m.accuracy,
                m.dice,
                m.iou
            );
            Ok(())
        }
        None => Err(Error::Format {
            path: args.pred.clone(),
            reason: "no prediction/truth pairs could be scored".to_string(),
        }),
    }
}

fn synth_cmd(args: &SynthArgs) -> Result<(), Error> {
    if args.count == 0 {
        return Err(config_error("count", "must be at least 1"));
    }
    let defaults = SynthSpec::default();
    let layout = match args.layout {
        LayoutKind::VerticalSplit => Layout::VerticalSplit,
        LayoutKind::HorizontalSplit => Layout::HorizontalSplit,
        LayoutKind::Disk => Layout::Disk { radius: args.radius },
        LayoutKind::Stripes => Layout::Stripes {
            width: args.stripe_width,
        },
    };
    for i in 0..args.count {
        let spec = SynthSpec {
            width: args.width,
            height: args.height,
            layout,
            seed: args.seed.wrapping_add(i as u64),
            nm_per_pixel: args.nm_per_pixel.unwrap_or(defaults.nm_per_pixel),
            ..defaults
        };
        let out = synth_texture_image(&spec)?;
        let name = format!("{}_{i:03}", args.prefix);
        write_synth(&args.out, &name, &out, args.sample_id.as_deref())?;
        match out.dft_variance_ratio {
            Some(r) => println!("{name}: seed {}, dft variance ratio {r:.1}", spec.seed),
            None => println!("{name}: seed {}", spec.seed),
        }
    }
    Ok(())
}

fn aggregate_cmd(args: &AggregateArgs) -> Result<(), Error> {
    let reports = args
        .runs
        .iter()
        .map(|dir| RunReport::load(&dir.join(REPORT_FILE)).map(|r| (dir.clone(), r)))
        .collect::<Result<Vec<_>, _>>()?;
    let table = batch_aggregate(&reports)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let csv = table.to_csv();
    match &args.out {
        Some(path) => imgio::write_bytes(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn correlate_cmd(args: &CorrelateArgs) -> Result<(), Error> {
    let mut file = args.pipeline.file_config()?.overlay(args.pipeline.overrides()?);
    if let Some(wf) = args.win_factor {
        file.win_factor = Some(wf);
    }
    if file.features.is_none() {
        file.features = Some(["mean", "variance", "skew", "kurtosis"].map(String::from).to_vec());
    }
    let config = file.resolve()?;
    let corr = correlate_images(&config)?;
    let out = &config.output_dir;
    create_dir(out)?;
    imgio::write_bytes(&out.join("correlation.csv"), correlation_csv(&corr.channels, &corr.pooled).as_bytes())?;
    for (path, m) in &corr.per_image {
        let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
        let file = out.join(format!("{stem}_correlation.csv"));
        imgio::write_bytes(&file, correlation_csv(&corr.channels, m).as_bytes())?;
    }
    print!("{}", correlation_csv(&corr.channels, &corr.pooled));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Segment(a) => segment(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Correlate(a) => correlate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
