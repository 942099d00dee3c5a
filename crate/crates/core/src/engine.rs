//! Batch extraction over paired intensity/mask directories.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::features::texture::{Angle, GlcmParams};
use crate::features::{column_names, compute_features, FeatureError, FeatureGroup, FeatureSettings};
use crate::imgio::{iter_row_tiles, load_intensity, load_mask, ImageError, DEFAULT_ROWS_PER_TILE};
use crate::roistore::{accumulate, MemoryBudget, RoiError};

/// Overrides the spill location.
pub const SPILL_DIR_ENV: &str = "FEATUREX_SPILL_DIR";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown profile '{0}' (expected default, performance or ibsi-like)")]
    UnknownProfile(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no intensity image matches mask {0}")]
    Pairing(PathBuf),
    #[error("bad file pattern: {0}")]
    Pattern(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Roi(#[from] RoiError),
    #[error("ROI {label}: {source}")]
    Feature {
        label: u32,
        #[source]
        source: FeatureError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Default,
    Performance,
    IbsiLike,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Default => "default",
            Profile::Performance => "performance",
            Profile::IbsiLike => "ibsi-like",
        }
    }

    pub fn settings(self) -> FeatureSettings {
        let (ng, angles): (usize, &[Angle]) = match self {
            Profile::Default => (64, &Angle::ALL),
            Profile::Performance => (32, &[Angle::Deg0]),
            Profile::IbsiLike => (256, &Angle::ALL),
        };
        FeatureSettings {
            histogram_bins: 256,
            texture: GlcmParams::new(ng, 1, angles.iter().copied(), true).expect("preset is valid"),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "default" => Ok(Profile::Default),
            "performance" => Ok(Profile::Performance),
            "ibsi-like" | "ibsi" => Ok(Profile::IbsiLike),
            _ => Err(EngineError::UnknownProfile(s.to_string())),
        }
    }
}

pub fn resolve_profile(name: &str) -> Result<FeatureSettings, EngineError> {
    Ok(name.parse::<Profile>()?.settings())
}

/// Per-field replacements for the profile's texture parameters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TextureOverrides {
    pub ng: Option<usize>,
    pub offset: Option<usize>,
    pub angles: Option<Vec<Angle>>,
    pub symmetric: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    pub intensity_dir: PathBuf,
    pub mask_dir: PathBuf,
    /// Glob matched against mask file names.
    pub file_pattern: String,
    pub features: Vec<FeatureGroup>,
    pub profile: Profile,
    pub threads: usize,
    /// Resident ROI pixel bytes; `None` never spills.
    pub memory_budget: Option<u64>,
    pub texture_overrides: TextureOverrides,
    pub output_path: PathBuf,
    pub rows_per_tile: usize,
}

impl ExtractionConfig {
    pub fn new(
        intensity_dir: impl Into<PathBuf>,
        mask_dir: impl Into<PathBuf>,
        output_path: impl Into<PathBuf>,
    ) -> Self {
        Self {
            intensity_dir: intensity_dir.into(),
            mask_dir: mask_dir.into(),
            file_pattern: "*".into(),
            features: FeatureGroup::ALL.to_vec(),
            profile: Profile::Default,
            threads: 1,
            memory_budget: None,
            texture_overrides: TextureOverrides::default(),
            output_path: output_path.into(),
            rows_per_tile: DEFAULT_ROWS_PER_TILE,
        }
    }

    /// Profile settings with overrides applied, validated.
    pub fn settings(&self) -> Result<FeatureSettings, EngineError> {
        let mut s = self.profile.settings();
        let o = &self.texture_overrides;
        let t = &mut s.texture;
        if let Some(ng) = o.ng {
            t.ng = ng;
        }
        if let Some(d) = o.offset {
            t.offset = d;
        }
        if let Some(a) = &o.angles {
            t.angles = a.clone();
            t.angles.sort();
            t.angles.dedup();
        }
        if let Some(sym) = o.symmetric {
            t.symmetric = sym;
        }
        t.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<FeatureSettings, EngineError> {
        if self.threads == 0 {
            return Err(EngineError::InvalidConfig("threads must be at least 1".into()));
        }
        if self.features.is_empty() {
            return Err(EngineError::InvalidConfig("no feature groups selected".into()));
        }
        if self.memory_budget == Some(0) {
            return Err(EngineError::InvalidConfig("memory budget must be positive".into()));
        }
        if self.rows_per_tile == 0 {
            return Err(EngineError::InvalidConfig("rows per tile must be positive".into()));
        }
        self.settings()
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub image_name: String,
    pub mask_name: String,
    pub roi_label: u32,
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub images: usize,
    pub failed_pairs: usize,
    pub rois: usize,
    pub rows: usize,
    pub elapsed: Duration,
}

impl RunSummary {
    /// 0 when every pair succeeded, 1 when some were skipped.
    pub fn exit_code(&self) -> i32 {
        if self.failed_pairs == 0 {
            0
        } else {
            1
        }
    }
}

/// A mask path and its intensity image, if one exists.
pub type PairedMask = (PathBuf, Result<PathBuf, EngineError>);

/// Mask files matching the pattern, each with the same-named intensity
/// file. Sorted by name.
pub fn pair_files(config: &ExtractionConfig) -> Result<Vec<PairedMask>, EngineError> {
    let pattern = config.mask_dir.join(&config.file_pattern);
    let pattern = pattern.to_string_lossy();
    let mut masks: Vec<PathBuf> = glob::glob(&pattern)
        .map_err(|e| EngineError::Pattern(e.to_string()))?
        .filter_map(|r| match r {
            Ok(p) if p.is_file() => Some(p),
            Ok(_) => None,
            Err(e) => {
                log::warn!("skipping unreadable path: {e}");
                None
            }
        })
        .collect();
    masks.sort();
    Ok(masks
        .into_iter()
        .map(|m| {
            let image = m.file_name().map(|n| config.intensity_dir.join(n));
            let paired = match image {
                Some(p) if p.is_file() => Ok(p),
                _ => Err(EngineError::Pairing(m.clone())),
            };
            (m, paired)
        })
        .collect())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Features for every ROI of one pair, in label order. Runs on the current
/// rayon pool.
pub fn extract_pair(
    image_path: &Path,
    mask_path: &Path,
    groups: &[FeatureGroup],
    settings: &FeatureSettings,
    budget: &MemoryBudget,
    rows_per_tile: usize,
) -> Result<Vec<FeatureVector>, EngineError> {
    let image = load_intensity(image_path)?;
    let mask = load_mask(mask_path)?;
    let registry = accumulate(iter_row_tiles(&image, &mask, rows_per_tile)?, budget)?;
    drop((image, mask));
    let labels: Vec<u32> = registry.labels().collect();
    let (image_name, mask_name) = (file_name(image_path), file_name(mask_path));
    labels
        .par_iter()
        .map(|&label| {
            let cloud = registry.get(label)?;
            let values = compute_features(&cloud, groups, settings)
                .map_err(|source| EngineError::Feature { label, source })?;
            Ok(FeatureVector {
                image_name: image_name.clone(),
                mask_name: mask_name.clone(),
                roi_label: label,
                values,
            })
        })
        .collect()
}

pub fn run(config: &ExtractionConfig) -> Result<RunSummary, EngineError> {
    let start = Instant::now();
    let settings = config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| EngineError::ThreadPool(e.to_string()))?;

    let spill_base = std::env::var_os(SPILL_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&spill_base).map_err(|source| EngineError::Io {
        path: spill_base.clone(),
        source,
    })?;
    let spill_dir = tempfile::Builder::new()
        .prefix("featurex-spill-")
        .tempdir_in(&spill_base)
        .map_err(|source| EngineError::Io {
            path: spill_base.clone(),
            source,
        })?;
    let budget = match config.memory_budget {
        Some(b) => MemoryBudget::new(b, spill_dir.path())?,
        None => MemoryBudget::unlimited(),
    };

    let mut rows = Vec::new();
    let mut summary = RunSummary {
        images: 0,
        failed_pairs: 0,
        rois: 0,
        rows: 0,
        elapsed: Duration::ZERO,
    };
    for (mask, image) in pair_files(config)? {
        let result = image.and_then(|image| {
            pool.install(|| {
                extract_pair(&image, &mask, &config.features, &settings, &budget, config.rows_per_tile)
            })
        });
        match result {
            Ok(r) => {
                log::info!("{}: {} ROIs", mask.display(), r.len());
                summary.images += 1;
                summary.rois += r.len();
                rows.extend(r);
            }
            Err(e) => {
                log::error!("skipping {}: {e}", mask.display());
                summary.failed_pairs += 1;
            }
        }
    }
    let columns = column_names(&config.features, &settings);
    summary.rows = write_csv(&mut rows, &columns, &config.output_path)?;
    summary.elapsed = start.elapsed();
    Ok(summary)
}

/// C `%.10g`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..10).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{v:.*}", (9 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Sort rows by `(image_name, roi_label)` and write them under a fixed
/// header. Returns the number of data rows.
pub fn write_csv(rows: &mut [FeatureVector], columns: &[String], path: &Path) -> Result<usize, EngineError> {
    let io = |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    };
    rows.sort_by(|a, b| {
        (&a.image_name, a.roi_label, &a.mask_name).cmp(&(&b.image_name, b.roi_label, &b.mask_name))
    });
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| EngineError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut header = vec!["image_name".to_string(), "mask_name".into(), "roi_label".into()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows.iter() {
        if r.values.len() != columns.len() || r.values.iter().zip(columns).any(|((n, _), c)| n != c) {
            return Err(EngineError::InvalidConfig(format!(
                "row for ROI {} of {} does not match the header",
                r.roi_label, r.image_name
            )));
        }
        let mut rec = vec![r.image_name.clone(), r.mask_name.clone(), r.roi_label.to_string()];
        rec.extend(r.values.iter().map(|(_, v)| format_real(*v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| io(e.into_error()))?;
    inner.flush().map_err(io)?;
    Ok(rows.len())
}
