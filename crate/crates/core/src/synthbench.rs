//! Synthetic Siemens-star images with tiled cat-head masks, and the
//! ROI-size scaling benchmark.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{self, EngineError, ExtractionConfig};
use crate::features::FeatureGroup;
use crate::imgio::{write_intensity, write_mask, ImageError, IntensityImage, LabelMask};

pub const HIGH: u16 = 65535;
pub const LOW: u16 = 0;
/// Ear apex distance from the blob centre, in radii.
const EAR_REACH: f64 = 1.6;
const EAR_HALF_ANGLE: f64 = 20.0 * PI / 180.0;
const EAR_TILT: f64 = 40.0 * PI / 180.0;
const GAP: usize = 2;
const REPEATS: usize = 3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("cannot pack {count} ROIs of {size} px into a {image}x{image} image")]
    Packing { count: usize, size: usize, image: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub image_size: usize,
    pub roi_size: usize,
    pub roi_count: usize,
    pub spokes: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.image_size < 16 {
            return Err(SynthError::InvalidSpec(format!("image size {} < 16", self.image_size)));
        }
        if self.spokes < 2 || !self.spokes.is_multiple_of(2) {
            return Err(SynthError::InvalidSpec(format!("spokes must be even and >= 2, got {}", self.spokes)));
        }
        if self.roi_size == 0 || self.roi_count == 0 {
            return Err(SynthError::InvalidSpec("ROI size and count must be positive".into()));
        }
        if (self.roi_count * self.roi_size) as f64 > 0.9 * (self.image_size * self.image_size) as f64 {
            return Err(self.packing_error());
        }
        Ok(())
    }

    fn packing_error(&self) -> SynthError {
        SynthError::Packing {
            count: self.roi_count,
            size: self.roi_size,
            image: self.image_size,
        }
    }
}

/// Alternating sectors about the image centre: high where
/// `floor(spokes · θ / 2π)` is even.
pub fn siemens_star(size: usize, spokes: usize) -> IntensityImage {
    let c = (size as f64 - 1.0) / 2.0;
    let mut px = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let theta = (y as f64 - c).atan2(x as f64 - c).rem_euclid(TAU);
            let sector = (spokes as f64 * theta / TAU).floor() as usize;
            px.push(if sector.is_multiple_of(2) { HIGH } else { LOW });
        }
    }
    IntensityImage::new(size, size, 16, px).expect("dimensions match")
}

/// Disk of radius `r` with two triangular ears, centred on the origin,
/// ears pointing towards negative y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatHead {
    pub radius: f64,
}

impl CatHead {
    fn ears(&self) -> [[(f64, f64); 3]; 2] {
        let r = self.radius;
        let at = |a: f64, d: f64| (d * a.cos(), -d * a.sin());
        [-1.0, 1.0].map(|s| {
            let axis = FRAC_PI_2 + s * EAR_TILT;
            [at(axis - EAR_HALF_ANGLE, r), at(axis, EAR_REACH * r), at(axis + EAR_HALF_ANGLE, r)]
        })
    }

    pub fn contains(&self, dx: f64, dy: f64) -> bool {
        if dx * dx + dy * dy <= self.radius * self.radius {
            return true;
        }
        self.ears().iter().any(|t| in_triangle(t, dx, dy))
    }

    /// Half-extents: (left/right, up, down).
    fn extent(&self) -> (usize, usize, usize) {
        let mut half_w = self.radius;
        let mut up = self.radius;
        for t in self.ears() {
            for (x, y) in t {
                half_w = half_w.max(x.abs());
                up = up.max(-y);
            }
        }
        (half_w.ceil() as usize, up.ceil() as usize, self.radius.ceil() as usize)
    }

    /// Offsets of covered lattice points.
    pub fn raster(&self) -> Vec<(i64, i64)> {
        let (hw, up, down) = self.extent();
        let mut out = Vec::new();
        for dy in -(up as i64)..=down as i64 {
            for dx in -(hw as i64)..=hw as i64 {
                if self.contains(dx as f64, dy as f64) {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    /// Radius whose raster is closest to `area` pixels.
    pub fn with_area(area: usize) -> CatHead {
        let count = |r: f64| CatHead { radius: r }.raster().len();
        let (mut lo, mut hi) = (0.0, 1.0);
        while count(hi) < area {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if count(mid) < area {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let best = if area.abs_diff(count(lo)) < area.abs_diff(count(hi)) { lo } else { hi };
        CatHead { radius: best }
    }

    /// Cell footprint including a gap: (width, height).
    fn cell(&self) -> (usize, usize) {
        let (hw, up, down) = self.extent();
        (2 * hw + 1 + GAP, up + down + 1 + GAP)
    }
}

fn in_triangle(t: &[(f64, f64); 3], x: f64, y: f64) -> bool {
    let side = |(ax, ay): (f64, f64), (bx, by): (f64, f64)| (bx - ax) * (y - ay) - (by - ay) * (x - ax);
    let d = [side(t[0], t[1]), side(t[1], t[2]), side(t[2], t[0])];
    d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
}

/// Columns and rows of a fitting grid, preferring the squarest layout.
fn layout(count: usize, cell: (usize, usize), image: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for cols in 1..=count {
        let rows = count.div_ceil(cols);
        if cols * cell.0 <= image && rows * cell.1 <= image {
            let score = |(c, r): (usize, usize)| (c * cell.0).max(r * cell.1);
            if best.is_none_or(|b| score((cols, rows)) < score(b)) {
                best = Some((cols, rows));
            }
        }
    }
    best
}

/// `roi_count` cat heads with labels `1..=roi_count` in raster order, each
/// jittered inside its own grid cell.
pub fn blob_mask_grid(spec: &SynthSpec) -> Result<LabelMask, SynthError> {
    spec.validate()?;
    let head = CatHead::with_area(spec.roi_size);
    let cell = head.cell();
    let n = spec.image_size;
    let (cols, rows) = layout(spec.roi_count, cell, n).ok_or_else(|| spec.packing_error())?;
    let (hw, up, _) = head.extent();
    let shape = head.raster();
    let slack_x = (n / cols - cell.0) / 2;
    let slack_y = (n / rows - cell.1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels = vec![0u32; n * n];
    for k in 0..spec.roi_count {
        let (col, row) = (k % cols, k / cols);
        let jx = rng.random_range(-(slack_x as i64)..=slack_x as i64);
        let jy = rng.random_range(-(slack_y as i64)..=slack_y as i64);
        let cx = (col * n / cols + (n / cols) / 2) as i64 + jx;
        let cy = (row * n / rows + (n / rows - cell.1) / 2 + up + GAP / 2) as i64 + jy;
        debug_assert!(cx >= hw as i64 && cy >= up as i64);
        for &(dx, dy) in &shape {
            let (x, y) = ((cx + dx) as usize, (cy + dy) as usize);
            debug_assert_eq!(labels[y * n + x], 0);
            labels[y * n + x] = k as u32 + 1;
        }
    }
    Ok(LabelMask::new(n, n, labels)?)
}

/// Smallest square image that fits the grid, at least 16 px.
pub fn auto_image_size(roi_size: usize, roi_count: usize) -> usize {
    let cell = CatHead::with_area(roi_size).cell();
    let mut n = ((roi_size * roi_count) as f64 / 0.9).sqrt().ceil() as usize;
    n = n.max(16);
    while layout(roi_count, cell, n).is_none() {
        n += 1;
    }
    n
}

/// Writes `<dir>/int/<name>` and `<dir>/seg/<name>`.
pub fn write_synthetic(spec: &SynthSpec, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf), SynthError> {
    let mask = blob_mask_grid(spec)?;
    let image = siemens_star(spec.image_size, spec.spokes);
    let (int_dir, seg_dir) = (dir.join("int"), dir.join("seg"));
    for d in [&int_dir, &seg_dir] {
        std::fs::create_dir_all(d).map_err(|source| SynthError::Io {
            path: d.clone(),
            source,
        })?;
    }
    write_intensity(int_dir.join(name), &image)?;
    write_mask(seg_dir.join(name), &mask)?;
    Ok((int_dir, seg_dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub roi_size: usize,
    pub roi_count: usize,
    pub total_roi_pixels: usize,
    pub elapsed_seconds: f64,
    pub feature_group: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["roi_size", "roi_count", "total_roi_pixels", "elapsed_seconds", "feature_group", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.roi_size.to_string(),
                r.roi_count.to_string(),
                r.total_roi_pixels.to_string(),
                format!("{:.6}", r.elapsed_seconds),
                r.feature_group.clone(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Least-squares fit of elapsed seconds on total ROI pixels over
    /// successful rows: (slope, intercept, R²).
    pub fn linear_fit(&self) -> Option<(f64, f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.error.is_none())
            .map(|r| (r.total_roi_pixels as f64, r.elapsed_seconds))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
        Some((slope, my - slope * mx, r2))
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub cells: Vec<(usize, usize)>,
    pub groups: Vec<FeatureGroup>,
    pub threads: usize,
    pub spokes: usize,
    pub seed: u64,
    pub work_dir: PathBuf,
}

/// Every `(size, count)` pair, sizes outermost.
pub fn sweep(sizes: &[usize], counts: &[usize]) -> Vec<(usize, usize)> {
    sizes.iter().flat_map(|&s| counts.iter().map(move |&c| (s, c))).collect()
}

/// Time the engine on freshly generated data for each cell, one cell at a
/// time. Each time is the median of three runs.
pub fn scaling_benchmark(cfg: &BenchConfig) -> Result<ScalingReport, SynthError> {
    if cfg.cells.is_empty() || cfg.groups.is_empty() {
        return Err(SynthError::InvalidSpec("empty sweep".into()));
    }
    let group_name = cfg.groups.iter().map(|g| g.name()).collect::<Vec<_>>().join("+");
    let mut report = ScalingReport::default();
    for &(roi_size, roi_count) in &cfg.cells {
        let mut row = ScalingRow {
            roi_size,
            roi_count,
            total_roi_pixels: 0,
            elapsed_seconds: 0.0,
            feature_group: group_name.clone(),
            error: None,
        };
        match bench_cell(cfg, roi_size, roi_count) {
            Ok((pixels, t)) => {
                row.total_roi_pixels = pixels;
                row.elapsed_seconds = t.as_secs_f64();
            }
            Err(e) => {
                log::error!("bench cell ({roi_size}, {roi_count}) failed: {e}");
                row.error = Some(e.to_string());
            }
        }
        report.rows.push(row);
    }
    Ok(report)
}

fn bench_cell(cfg: &BenchConfig, roi_size: usize, roi_count: usize) -> Result<(usize, Duration), SynthError> {
    let spec = SynthSpec {
        image_size: auto_image_size(roi_size, roi_count),
        roi_size,
        roi_count,
        spokes: cfg.spokes,
        seed: cfg.seed,
    };
    std::fs::create_dir_all(&cfg.work_dir).map_err(|source| SynthError::Io {
        path: cfg.work_dir.clone(),
        source,
    })?;
    let dir = tempfile::Builder::new()
        .prefix("bench-")
        .tempdir_in(&cfg.work_dir)
        .map_err(|source| SynthError::Io {
            path: cfg.work_dir.clone(),
            source,
        })?;
    let (int_dir, seg_dir) = write_synthetic(&spec, dir.path(), "synth.pgm")?;
    let pixels = crate::imgio::load_mask(seg_dir.join("synth.pgm"))?
        .labels()
        .iter()
        .filter(|&&l| l != 0)
        .count();
    let mut config = ExtractionConfig::new(int_dir, seg_dir, dir.path().join("features.csv"));
    config.features = cfg.groups.clone();
    config.threads = cfg.threads;
    let mut times = Vec::with_capacity(REPEATS);
    for _ in 0..REPEATS {
        let summary = engine::run(&config)?;
        if summary.failed_pairs > 0 {
            return Err(SynthError::InvalidSpec("engine skipped the synthetic pair".into()));
        }
        times.push(summary.elapsed);
    }
    times.sort();
    Ok((pixels, times[REPEATS / 2]))
}
