use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use featurex_core::engine::{self, ExtractionConfig, Profile, TextureOverrides};
use featurex_core::features::texture::Angle;
use featurex_core::features::FeatureGroup;
use featurex_core::imgio::{iter_row_tiles, load_intensity, load_mask, DEFAULT_ROWS_PER_TILE};
use featurex_core::roistore::{accumulate, MemoryBudget, PixelCloud};
use featurex_core::synthbench::{self, BenchConfig, SynthSpec};
use featurex_core::tuner::{self, GlcmCostModel};

/// Marks failures caused by the invocation itself (exit code 2).
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

#[derive(Parser)]
#[command(name = "featurex", version, about = "Per-ROI feature extraction from labelled images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute features for every ROI of every image/mask pair.
    Extract(ExtractArgs),
    /// Grid-search GLCM hyperparameters on a labelled calibration set.
    Tune(TuneArgs),
    /// Write a Siemens-star image and matching blob mask.
    Synth(SynthArgs),
    /// Time extraction over a sweep of ROI sizes and counts.
    Bench(BenchArgs),
}

#[derive(clap::Args)]
struct ExtractArgs {
    #[arg(long = "intDir")]
    int_dir: PathBuf,
    #[arg(long = "segDir")]
    seg_dir: PathBuf,
    /// Comma-separated groups, or *ALL*.
    #[arg(long, default_value = "*ALL*")]
    features: String,
    #[arg(long, default_value = "default")]
    profile: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Resident ROI pixel bytes before spilling to disk.
    #[arg(long)]
    membudget: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "filePattern", default_value = "*")]
    file_pattern: String,
    #[arg(long)]
    ng: Option<usize>,
    #[arg(long)]
    offset: Option<usize>,
    /// Comma-separated subset of 0,45,90,135.
    #[arg(long)]
    angles: Option<String>,
}

#[derive(clap::Args)]
struct TuneArgs {
    /// Directory with int/ and seg/ subdirectories.
    #[arg(long = "calDir")]
    cal_dir: PathBuf,
    /// CSV with columns image,roi_label,class.
    #[arg(long = "calClasses")]
    cal_classes: PathBuf,
    /// e.g. "ng=2,4,8;d=1;angles=0|0,45,90,135"
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated GLCM feature names.
    #[arg(long, default_value = "CONTRAST")]
    feature: String,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip grid points whose cost exceeds this.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    size: Option<usize>,
    #[arg(long = "roiSize")]
    roi_size: usize,
    #[arg(long = "roiCount")]
    roi_count: usize,
    #[arg(long, default_value_t = 8)]
    spokes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "synth.pgm")]
    name: String,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// CSV with columns roi_size,roi_count; one cell per row.
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "intensity,shape")]
    features: String,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 8)]
    spokes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scratch directory for generated data.
    #[arg(long)]
    work: Option<PathBuf>,
}

fn groups(list: &str) -> Result<Vec<FeatureGroup>> {
    let names: Vec<&str> = list.split(',').filter(|s| !s.trim().is_empty()).collect();
    FeatureGroup::parse_list(&names).map_err(config_err)
}

fn extract(a: ExtractArgs) -> Result<i32> {
    let profile: Profile = a.profile.parse().map_err(config_err)?;
    let angles = a
        .angles
        .as_deref()
        .map(|s| s.split(',').map(str::parse).collect::<Result<Vec<Angle>, _>>())
        .transpose()
        .map_err(config_err)?;
    let mut config = ExtractionConfig::new(a.int_dir, a.seg_dir, a.out);
    config.file_pattern = a.file_pattern;
    config.features = groups(&a.features)?;
    config.profile = profile;
    config.threads = a.threads;
    config.memory_budget = a.membudget;
    config.texture_overrides = TextureOverrides {
        ng: a.ng,
        offset: a.offset,
        angles,
        symmetric: None,
    };
    config.validate().map_err(config_err)?;
    let summary = engine::run(&config)?;
    println!(
        "images={} failed={} rois={} rows={} elapsed={:.3}s",
        summary.images,
        summary.failed_pairs,
        summary.rois,
        summary.rows,
        summary.elapsed.as_secs_f64()
    );
    Ok(summary.exit_code())
}

fn read_classes(path: &Path) -> Result<Vec<(String, u32, u32)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            bail!(ConfigError(format!("{}: expected image,roi_label,class", path.display())));
        }
        let label = rec[1].trim().parse().map_err(config_err)?;
        let class = rec[2].trim().parse().map_err(config_err)?;
        out.push((rec[0].trim().to_string(), label, class));
    }
    Ok(out)
}

fn tune(a: TuneArgs) -> Result<i32> {
    let grid = tuner::parse_grid_spec(&a.grid, &["angles"]).map_err(config_err)?;
    let names: Vec<String> = a.feature.split(',').map(str::to_string).collect();
    let evaluate = tuner::glcm_evaluator(&names).map_err(config_err)?;
    if a.threads == 0 {
        return Err(config_err("threads must be at least 1"));
    }
    let entries = read_classes(&a.cal_classes)?;

    let mut clouds: BTreeMap<String, BTreeMap<u32, Arc<PixelCloud>>> = BTreeMap::new();
    for (image, _, _) in &entries {
        if clouds.contains_key(image) {
            continue;
        }
        let img = load_intensity(a.cal_dir.join("int").join(image))?;
        let mask = load_mask(a.cal_dir.join("seg").join(image))?;
        let reg = accumulate(iter_row_tiles(&img, &mask, DEFAULT_ROWS_PER_TILE)?, &MemoryBudget::unlimited())?;
        let mut by_label = BTreeMap::new();
        for l in reg.labels().collect::<Vec<_>>() {
            by_label.insert(l, reg.get(l)?);
        }
        clouds.insert(image.clone(), by_label);
    }
    let full = entries
        .iter()
        .map(|(image, label, class)| {
            clouds[image]
                .get(label)
                .map(|c| (c.clone(), *class))
                .ok_or_else(|| anyhow!("{image} has no ROI {label}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let cal = tuner::sample_calibration(&full, a.fraction, a.seed).map_err(config_err)?;
    let cost = GlcmCostModel::for_calibration(&cal);

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.threads).build()?;
    let result = pool.install(|| tuner::tune(evaluate, &grid, &cost, &cal, a.budget))?;
    let out = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    result.write_report(BufWriter::new(out))?;
    let loss = if result.best_loss.infinite {
        "inf".to_string()
    } else {
        format!("{}", result.best_loss.value)
    };
    println!("best {} loss={loss} cost={}", result.best, result.best_cost);
    Ok(0)
}

fn synth(a: SynthArgs) -> Result<i32> {
    let spec = SynthSpec {
        image_size: a.size.unwrap_or_else(|| synthbench::auto_image_size(a.roi_size, a.roi_count)),
        roi_size: a.roi_size,
        roi_count: a.roi_count,
        spokes: a.spokes,
        seed: a.seed,
    };
    spec.validate().map_err(config_err)?;
    let (int_dir, seg_dir) = synthbench::write_synthetic(&spec, &a.out, &a.name)?;
    println!("wrote {} and {}", int_dir.join(&a.name).display(), seg_dir.join(&a.name).display());
    Ok(0)
}

fn bench(a: BenchArgs) -> Result<i32> {
    let mut r = csv::Reader::from_path(&a.sweep).with_context(|| format!("reading {}", a.sweep.display()))?;
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            bail!(ConfigError(format!("{}: expected roi_size,roi_count", a.sweep.display())));
        }
        cells.push((
            rec[0].trim().parse().map_err(config_err)?,
            rec[1].trim().parse().map_err(config_err)?,
        ));
    }
    let work = match a.work {
        Some(w) => w,
        None => std::env::temp_dir(),
    };
    let cfg = BenchConfig {
        cells,
        groups: groups(&a.features)?,
        threads: a.threads,
        spokes: a.spokes,
        seed: a.seed,
        work_dir: work,
    };
    let report = synthbench::scaling_benchmark(&cfg)?;
    let mut out = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    report.write_csv(&mut out)?;
    out.flush()?;
    if let Some((slope, _, r2)) = report.linear_fit() {
        println!("seconds per ROI pixel={slope:.3e} R2={r2:.4}");
    }
    Ok(if report.rows.iter().any(|r| r.error.is_some()) { 1 } else { 0 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Tune(a) => tune(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
