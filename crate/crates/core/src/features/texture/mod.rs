//! Grey-level texture matrices.
//!
//! Raw intensities are first reduced to `ng` levels with a fixed bin count
//! over the ROI's own `[min, max]` range. Out-of-ROI neighbours are skipped,
//! never padded. All feature formulas use 1-based grey levels.

mod glcm;
mod glrlm;
mod glszm;
mod ngtdm;

pub use glcm::{glcm, glcm_features, GlcmFeatures, GlcmMatrix, GLCM_FEATURE_NAMES};
pub use glrlm::{glrlm, RunLengthMatrix, GLRLM_FEATURE_NAMES};
pub use glszm::{glszm, SizeZoneMatrix, GLSZM_FEATURE_NAMES};
pub use ngtdm::{ngtdm, Ngtdm, NgtdmFeatures, NGTDM_FEATURE_NAMES};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::roistore::PixelCloud;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextureError {
    #[error("grey level count must be in 2..=65535, got {0}")]
    InvalidLevels(usize),
    #[error("offset must be at least 1")]
    ZeroOffset,
    #[error("angle set is empty")]
    NoAngles,
    #[error("unknown angle '{0}' (expected 0, 45, 90 or 135)")]
    UnknownAngle(String),
}

/// Scan direction. Image rows grow downwards, so 45° steps up and right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Angle {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Deg0, Angle::Deg45, Angle::Deg90, Angle::Deg135];

    pub fn degrees(self) -> u32 {
        match self {
            Angle::Deg0 => 0,
            Angle::Deg45 => 45,
            Angle::Deg90 => 90,
            Angle::Deg135 => 135,
        }
    }

    /// Unit lattice step `(dx, dy)`.
    pub fn step(self) -> (i64, i64) {
        match self {
            Angle::Deg0 => (1, 0),
            Angle::Deg45 => (1, -1),
            Angle::Deg90 => (0, -1),
            Angle::Deg135 => (-1, -1),
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

impl FromStr for Angle {
    type Err = TextureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(Angle::Deg0),
            "45" => Ok(Angle::Deg45),
            "90" => Ok(Angle::Deg90),
            "135" => Ok(Angle::Deg135),
            other => Err(TextureError::UnknownAngle(other.to_string())),
        }
    }
}

/// Co-occurrence parameters; `ng` and `angles` are shared by the other
/// texture families.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlcmParams {
    pub ng: usize,
    pub offset: usize,
    pub angles: Vec<Angle>,
    pub symmetric: bool,
}

impl GlcmParams {
    pub fn new(
        ng: usize,
        offset: usize,
        angles: impl IntoIterator<Item = Angle>,
        symmetric: bool,
    ) -> Result<Self, TextureError> {
        let mut angles: Vec<Angle> = angles.into_iter().collect();
        angles.sort();
        angles.dedup();
        let p = Self {
            ng,
            offset,
            angles,
            symmetric,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TextureError> {
        if !(2..=65535).contains(&self.ng) {
            return Err(TextureError::InvalidLevels(self.ng));
        }
        if self.offset == 0 {
            return Err(TextureError::ZeroOffset);
        }
        if self.angles.is_empty() {
            return Err(TextureError::NoAngles);
        }
        Ok(())
    }
}

/// Marker for bbox cells outside the ROI.
pub const OUTSIDE: u16 = u16::MAX;

/// Bbox-shaped lattice of grey levels in `[0, ng)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretizedRoi {
    width: usize,
    height: usize,
    ng: usize,
    cells: Vec<u16>,
}

impl DiscretizedRoi {
    /// Build directly from a level grid; `None` marks out-of-ROI cells.
    pub fn from_levels(
        width: usize,
        height: usize,
        ng: usize,
        levels: &[Option<u16>],
    ) -> Result<Self, TextureError> {
        if !(2..=65535).contains(&ng) || levels.iter().flatten().any(|&l| l as usize >= ng) {
            return Err(TextureError::InvalidLevels(ng));
        }
        assert_eq!(levels.len(), width * height, "level grid size mismatch");
        Ok(Self {
            width,
            height,
            ng,
            cells: levels.iter().map(|l| l.unwrap_or(OUTSIDE)).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ng(&self) -> usize {
        self.ng
    }

    pub fn level(&self, x: i64, y: i64) -> Option<u16> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        let v = self.cells[y as usize * self.width + x as usize];
        (v != OUTSIDE).then_some(v)
    }

    pub fn pixel_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != OUTSIDE).count()
    }

    /// In-ROI cells as `(x, y, level)` in raster order.
    pub fn iter_levels(&self) -> impl Iterator<Item = (i64, i64, u16)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != OUTSIDE)
            .map(move |(i, &c)| ((i % self.width) as i64, (i / self.width) as i64, c))
    }
}

/// Fixed-bin-number reduction: `level = min(ng - 1, floor(ng (v - min) / (max - min)))`,
/// evaluated in integer arithmetic. A constant ROI maps to level 0.
pub fn discretize(cloud: &PixelCloud, ng: usize) -> Result<DiscretizedRoi, TextureError> {
    if !(2..=65535).contains(&ng) {
        return Err(TextureError::InvalidLevels(ng));
    }
    let bb = cloud.bbox();
    let (w, h) = (bb.width(), bb.height());
    let (lo, hi) = cloud
        .pixels()
        .iter()
        .fold((u16::MAX, 0u16), |(lo, hi), p| (lo.min(p.intensity), hi.max(p.intensity)));
    let span = (hi - lo) as u64;
    let mut cells = vec![OUTSIDE; w * h];
    for p in cloud.pixels() {
        let level = (ng as u64 * (p.intensity - lo) as u64)
            .checked_div(span)
            .map_or(0, |l| l.min(ng as u64 - 1));
        let idx = (p.y - bb.y_min) as usize * w + (p.x - bb.x_min) as usize;
        cells[idx] = level as u16;
    }
    Ok(DiscretizedRoi {
        width: w,
        height: h,
        ng,
        cells,
    })
}

/// Shared statistics of a (grey level × size) count matrix, used for both
/// run lengths and zone sizes. `counts[g * max_size + (s - 1)]`.
pub(crate) fn size_matrix_features(
    counts: &[u64],
    ng: usize,
    max_size: usize,
    n_pixels: usize,
) -> [f64; 16] {
    let total: u64 = counts.iter().sum();
    if total == 0 || n_pixels == 0 {
        return [0.0; 16];
    }
    let nz = total as f64;
    let mut f = [0.0; 16];
    let mut per_level = vec![0.0; ng];
    let mut per_size = vec![0.0; max_size];
    let (mut mu_g, mut mu_s) = (0.0, 0.0);
    for g in 0..ng {
        for s in 0..max_size {
            let c = counts[g * max_size + s];
            if c == 0 {
                continue;
            }
            let c = c as f64;
            let i = (g + 1) as f64;
            let l = (s + 1) as f64;
            let (i2, l2) = (i * i, l * l);
            per_level[g] += c;
            per_size[s] += c;
            f[0] += c / l2;
            f[1] += c * l2;
            f[10] += c / i2;
            f[11] += c * i2;
            f[12] += c / (i2 * l2);
            f[13] += c * i2 / l2;
            f[14] += c * l2 / i2;
            f[15] += c * i2 * l2;
            let p = c / nz;
            mu_g += i * p;
            mu_s += l * p;
            f[9] -= p * p.log2();
        }
    }
    for k in [0, 1, 10, 11, 12, 13, 14, 15] {
        f[k] /= nz;
    }
    let gln: f64 = per_level.iter().map(|v| v * v).sum();
    let sln: f64 = per_size.iter().map(|v| v * v).sum();
    f[2] = gln / nz;
    f[3] = gln / (nz * nz);
    f[4] = sln / nz;
    f[5] = sln / (nz * nz);
    f[6] = nz / n_pixels as f64;
    for g in 0..ng {
        for s in 0..max_size {
            let c = counts[g * max_size + s];
            if c == 0 {
                continue;
            }
            let p = c as f64 / nz;
            f[7] += p * ((g + 1) as f64 - mu_g).powi(2);
            f[8] += p * ((s + 1) as f64 - mu_s).powi(2);
        }
    }
    f
}
