use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use terracover::data::{load_dataset, split_dataset, write_skip_report, write_synthetic_dataset, LandCoverClass, SplitRatios};
use terracover::scanner::{default_palette, render_map, scan_image};
use terracover::stats::{class_shares, Region};
use terracover::training::{evaluate, train_with, TrainingConfig};
use terracover::{Checkpoint, ClassificationMatrix};

use crate::server;

pub type CliResult<T = ()> = Result<T, String>;

#[derive(Debug, Parser)]
#[command(name = "terracover", version, about = "Land-cover indicators from satellite imagery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset root and report per-class counts.
    Ingest(IngestArgs),
    /// Write a procedurally generated EuroSAT-style dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset root.
    Train(TrainArgs),
    /// Evaluate a model on a dataset's test split.
    Eval(EvalArgs),
    /// Classify a large image tile by tile.
    Scan(ScanArgs),
    /// Land-cover shares of a classification matrix.
    Stats(StatsArgs),
    /// Render a classification matrix as a colour map.
    Render(RenderArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub root: PathBuf,
    /// Write rejected files, one per line.
    #[arg(long)]
    pub skip_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Comma-separated class names; all ten by default.
    #[arg(long)]
    pub classes: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON training configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, visible_alias = "batch")]
    pub batch_size: Option<usize>,
    /// Seeds the split, initialization, shuffling and augmentation.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_augment: bool,
    /// Per-epoch history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Split seed used at training time.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluate every sample instead of the test split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Class to leave out; repeat or separate with commas.
    #[arg(long)]
    pub exclude: Vec<String>,
    /// Tile rectangle `r0,r1,c0,c1` (half-open).
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub scale: u32,
    /// Legend JSON; defaults to the output path with a `.legend.json` suffix.
    #[arg(long)]
    pub legend: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Bind address; falls back to `TERRACOVER_ADDR`, then 127.0.0.1:8760.
    #[arg(long)]
    pub addr: Option<String>,
    #[arg(long, default_value_t = server::DEFAULT_UPLOAD_LIMIT)]
    pub max_upload_bytes: usize,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_classes(list: &str) -> CliResult<Vec<LandCoverClass>> {
    server::parse_class_list(list)
}

pub fn parse_region(text: &str) -> CliResult<Region> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("region must be four non-negative integers r0,r1,c0,c1, got {text:?}"))?;
    match parts[..] {
        [r0, r1, c0, c1] => Ok(Region { r0, r1, c0, c1 }),
        _ => Err(format!("region must be four non-negative integers r0,r1,c0,c1, got {text:?}")),
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Scan(a) => scan(a),
        Command::Stats(a) => stats(a).map(|out| print!("{out}")),
        Command::Render(a) => render(a),
        Command::Serve(a) => serve(a),
    }
}

fn ingest(a: IngestArgs) -> CliResult {
    let loaded = load_dataset(&a.root).map_err(err)?;
    let counts = loaded.class_counts();
    for c in LandCoverClass::ALL {
        println!("{:<24} {:>6}", c.display_name(), counts[c.index()]);
    }
    println!("{} images, {} skipped", loaded.samples.len(), loaded.skipped.len());
    if let Some(path) = a.skip_report {
        write_skip_report(&path, &loaded.skipped).map_err(err)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let classes = match &a.classes {
        Some(list) => parse_classes(list)?,
        None => LandCoverClass::ALL.to_vec(),
    };
    let n = write_synthetic_dataset(&a.out, a.per_class, &classes, a.seed).map_err(err)?;
    println!("wrote {n} tiles to {}", a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str::<TrainingConfig>(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => TrainingConfig::default(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.no_augment {
        cfg.augment = false;
    }
    cfg.checkpoint_path = Some(a.out.clone());
    cfg.validate().map_err(err)?;

    let loaded = load_dataset(&a.data).map_err(err)?;
    let split = split_dataset(loaded.samples, SplitRatios::default(), cfg.seed).map_err(err)?;
    eprintln!(
        "Adam, learning rate {}, batch size {}, {} epochs, augmentation {}, seed {}",
        cfg.learning_rate,
        cfg.batch_size,
        cfg.epochs,
        if cfg.augment { "on" } else { "off" },
        cfg.seed
    );
    eprintln!("train {} / validation {} / test {}", split.train.len(), split.validation.len(), split.test.len());
    let (ckpt, history) = train_with(&cfg, &split, |r| {
        eprintln!(
            "epoch {:>3}  loss {:.4}  train {:.4}  val {:.4}  {:.1}s",
            r.epoch, r.train_loss, r.train_acc, r.val_acc, r.seconds
        );
        ControlFlow::Continue(())
    })
    .map_err(err)?;
    if let Some(path) = &a.history {
        history.write_csv(path).map_err(err)?;
    }
    if !split.test.is_empty() {
        let report = evaluate(&ckpt, &split.test).map_err(err)?;
        println!("test accuracy {}", report.accuracy_percent());
    }
    println!("saved {}", a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let ckpt = Checkpoint::load(&a.model).map_err(err)?;
    let loaded = load_dataset(&a.data).map_err(err)?;
    let samples = if a.all {
        loaded.samples
    } else {
        split_dataset(loaded.samples, SplitRatios::default(), a.seed).map_err(err)?.test
    };
    let report = evaluate(&ckpt, &samples).map_err(err)?;
    println!("accuracy {} on {} images", report.accuracy_percent(), samples.len());
    println!("confusion (rows = true class, columns = predicted):");
    for c in LandCoverClass::ALL {
        let row: Vec<String> = report.confusion.counts[c.index()].iter().map(|n| format!("{n:>5}")).collect();
        println!("{:<24}{}", c.display_name(), row.join(""));
    }
    Ok(())
}

fn load_rgb(path: &Path) -> CliResult<image::RgbImage> {
    Ok(image::ImageReader::open(path)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .with_guessed_format()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .decode()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .to_rgb8())
}

fn scan(a: ScanArgs) -> CliResult {
    let ckpt = Checkpoint::load(&a.model).map_err(err)?;
    let image = load_rgb(&a.image)?;
    let source = a.image.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let m = scan_image(&ckpt, &image, &source).map_err(err)?;
    m.save(&a.out).map_err(err)?;
    println!("{}x{} matrix written to {}", m.rows(), m.cols(), a.out.display());
    Ok(())
}

/// Renders the report the way `stats` prints it.
pub fn stats(a: StatsArgs) -> CliResult<String> {
    let m = ClassificationMatrix::load(&a.matrix).map_err(err)?;
    let mut exclude = Vec::new();
    for e in &a.exclude {
        exclude.extend(parse_classes(e)?);
    }
    let region = a.region.as_deref().map(parse_region).transpose()?;
    let report = class_shares(&m, region, &exclude).map_err(err)?;
    Ok(match a.format {
        ReportFormat::Table => report.to_table_string(),
        ReportFormat::Json => report.to_json().map_err(err)? + "\n",
        ReportFormat::Csv => report.to_csv(),
    })
}

fn render(a: RenderArgs) -> CliResult {
    let m = ClassificationMatrix::load(&a.matrix).map_err(err)?;
    let (img, legend) = render_map(&m, &default_palette(), a.scale).map_err(err)?;
    img.save(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let legend_path = a.legend.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".legend.json");
        PathBuf::from(p)
    });
    let text = serde_json::to_string_pretty(&legend).map_err(err)?;
    std::fs::write(&legend_path, text).map_err(|e| format!("{}: {e}", legend_path.display()))?;
    println!("{}x{} map written to {}", img.width(), img.height(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let ckpt = Checkpoint::load(&a.model).map_err(err)?;
    let addr = a
        .addr
        .or_else(|| std::env::var("TERRACOVER_ADDR").ok())
        .unwrap_or_else(|| server::DEFAULT_ADDR.to_string());
    let rt = tokio::runtime::Runtime::new().map_err(err)?;
    rt.block_on(server::serve(ckpt, &addr, a.max_upload_bytes)).map_err(|e| format!("{addr}: {e}"))
}
