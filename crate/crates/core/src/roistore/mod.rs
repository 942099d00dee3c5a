//! Sparse per-label pixel clouds.
//!
//! One pass over row tiles collects every foreground pixel into the cloud of
//! its label. When the resident pixel bytes exceed the [`MemoryBudget`], the
//! largest resident cloud is appended to `<spill_dir>/roi_<label>.bin` and
//! its in-memory buffer released. Spilled clouds are reloaded on demand; the
//! pixel order after reload is the original raster order, so features
//! computed from a reloaded cloud are bit-identical.

mod contour;
mod hull;

pub use contour::{trace_contour, ContourPath};
pub use hull::{convex_hull, ConvexHull};

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::imgio::RowTile;

#[derive(Debug, Error)]
pub enum RoiError {
    #[error("spill I/O on {path}: {source}")]
    SpillIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("spill file {0} is corrupt")]
    CorruptSpill(String),
    #[error("pixel cloud must contain at least one pixel")]
    EmptyCloud,
    #[error("duplicate pixel ({0}, {1}) in cloud")]
    DuplicatePixel(u32, u32),
    #[error("label 0 is background and cannot form an ROI")]
    BackgroundLabel,
    #[error("memory budget must be positive")]
    InvalidBudget,
    #[error("no ROI with label {0}")]
    UnknownLabel(u32),
}

/// Integer lattice point at a pixel centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
    pub intensity: u16,
}

impl Pixel {
    pub const fn new(x: u32, y: u32, intensity: u16) -> Self {
        Self { x, y, intensity }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x as i64, self.y as i64)
    }
}

/// Inclusive, tight bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    fn at(x: u32, y: u32) -> Self {
        Self {
            x_min: x,
            y_min: y,
            x_max: x,
            y_max: y,
        }
    }

    fn include(&mut self, x: u32, y: u32) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min) as usize + 1
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min) as usize + 1
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelCloud {
    label: u32,
    pixels: Vec<Pixel>,
    bbox: BBox,
}

impl PixelCloud {
    /// Build a cloud from arbitrary pixels, checking the cloud invariants.
    pub fn from_pixels(label: u32, pixels: Vec<Pixel>) -> Result<Self, RoiError> {
        if label == 0 {
            return Err(RoiError::BackgroundLabel);
        }
        let first = pixels.first().ok_or(RoiError::EmptyCloud)?;
        let mut bbox = BBox::at(first.x, first.y);
        let mut seen = HashSet::with_capacity(pixels.len());
        for p in &pixels {
            if !seen.insert((p.x, p.y)) {
                return Err(RoiError::DuplicatePixel(p.x, p.y));
            }
            bbox.include(p.x, p.y);
        }
        Ok(Self {
            label,
            pixels,
            bbox,
        })
    }

    /// Convenience for tests and synthetic data: `(x, y, intensity)` triples.
    pub fn from_triples(label: u32, triples: &[(u32, u32, u16)]) -> Result<Self, RoiError> {
        Self::from_pixels(
            label,
            triples.iter().map(|&(x, y, i)| Pixel::new(x, y, i)).collect(),
        )
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn count(&self) -> usize {
        self.pixels.len()
    }

    /// Dense bbox-shaped raster with one cell of background padding on every
    /// side. Cell `(x - x_min + 1, y - y_min + 1)` holds the pixel.
    pub(crate) fn padded_occupancy(&self) -> Occupancy {
        let w = self.bbox.width() + 2;
        let h = self.bbox.height() + 2;
        let mut cells = vec![false; w * h];
        for p in &self.pixels {
            let cx = (p.x - self.bbox.x_min) as usize + 1;
            let cy = (p.y - self.bbox.y_min) as usize + 1;
            cells[cy * w + cx] = true;
        }
        Occupancy {
            width: w,
            height: h,
            origin: Point::new(self.bbox.x_min as i64 - 1, self.bbox.y_min as i64 - 1),
            cells,
        }
    }
}

/// Boolean raster used by the contour tracer and topology counts.
pub(crate) struct Occupancy {
    pub width: usize,
    pub height: usize,
    /// Image coordinates of cell (0, 0).
    pub origin: Point,
    pub cells: Vec<bool>,
}

impl Occupancy {
    pub fn get(&self, cx: i64, cy: i64) -> bool {
        if cx < 0 || cy < 0 || cx as usize >= self.width || cy as usize >= self.height {
            return false;
        }
        self.cells[cy as usize * self.width + cx as usize]
    }

    /// Label 8-connected foreground components; returns (labels, count).
    /// Labels are 1-based in raster order of first encounter, 0 = background.
    pub fn components8(&self) -> (Vec<u32>, u32) {
        self.flood(true, &NEIGHBOURS_8)
    }

    /// Label 4-connected background components.
    pub fn background_components4(&self) -> (Vec<u32>, u32) {
        self.flood(false, &NEIGHBOURS_4)
    }

    fn flood(&self, value: bool, nbrs: &[(i64, i64)]) -> (Vec<u32>, u32) {
        let mut labels = vec![0u32; self.cells.len()];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if self.cells[start] != value || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                for &(dx, dy) in nbrs {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height
                    {
                        continue;
                    }
                    let j = ny as usize * self.width + nx as usize;
                    if self.get(nx, ny) == value && labels[j] == 0 {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        (labels, next)
    }
}

pub(crate) const NEIGHBOURS_4: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
pub(crate) const NEIGHBOURS_8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Accounting size of one resident pixel record.
pub const RESIDENT_PIXEL_BYTES: usize = std::mem::size_of::<Pixel>();
/// On-disk record: x:u32, y:u32, intensity:u16, little-endian.
pub const SPILL_RECORD_BYTES: usize = 10;

#[derive(Debug, Clone)]
pub struct MemoryBudget {
    max_resident_bytes: u64,
    spill_dir: PathBuf,
}

impl MemoryBudget {
    pub fn new(max_resident_bytes: u64, spill_dir: impl Into<PathBuf>) -> Result<Self, RoiError> {
        if max_resident_bytes == 0 {
            return Err(RoiError::InvalidBudget);
        }
        Ok(Self {
            max_resident_bytes,
            spill_dir: spill_dir.into(),
        })
    }

    pub fn unlimited() -> Self {
        Self {
            max_resident_bytes: u64::MAX,
            spill_dir: std::env::temp_dir(),
        }
    }

    pub fn max_resident_bytes(&self) -> u64 {
        self.max_resident_bytes
    }

    pub fn spill_dir(&self) -> &Path {
        &self.spill_dir
    }
}

pub fn spill_path(dir: &Path, label: u32) -> PathBuf {
    dir.join(format!("roi_{label}.bin"))
}

fn spill_err(path: &Path) -> impl FnOnce(std::io::Error) -> RoiError + '_ {
    move |source| RoiError::SpillIo {
        path: path.display().to_string(),
        source,
    }
}

fn append_records(path: &Path, pixels: &[Pixel]) -> Result<(), RoiError> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(spill_err(path))?;
    let mut w = BufWriter::new(file);
    for p in pixels {
        let mut rec = [0u8; SPILL_RECORD_BYTES];
        rec[0..4].copy_from_slice(&p.x.to_le_bytes());
        rec[4..8].copy_from_slice(&p.y.to_le_bytes());
        rec[8..10].copy_from_slice(&p.intensity.to_le_bytes());
        w.write_all(&rec).map_err(spill_err(path))?;
    }
    w.flush().map_err(spill_err(path))
}

fn read_records(path: &Path, expected: usize) -> Result<Vec<Pixel>, RoiError> {
    let bytes = fs::read(path).map_err(spill_err(path))?;
    if bytes.len() != expected * SPILL_RECORD_BYTES {
        return Err(RoiError::CorruptSpill(path.display().to_string()));
    }
    Ok(bytes
        .chunks_exact(SPILL_RECORD_BYTES)
        .map(|r| {
            Pixel::new(
                u32::from_le_bytes([r[0], r[1], r[2], r[3]]),
                u32::from_le_bytes([r[4], r[5], r[6], r[7]]),
                u16::from_le_bytes([r[8], r[9]]),
            )
        })
        .collect())
}

struct CloudBuilder {
    pixels: Vec<Pixel>,
    bbox: BBox,
    count: usize,
    spilled: bool,
}

#[derive(Debug)]
enum RoiHandle {
    Resident(Arc<PixelCloud>),
    Spilled {
        path: PathBuf,
        count: usize,
        bbox: BBox,
    },
}

/// Finished label → cloud mapping. Spill files are removed on drop.
#[derive(Debug)]
pub struct RoiRegistry {
    entries: BTreeMap<u32, RoiHandle>,
    peak_resident_bytes: u64,
}

impl RoiRegistry {
    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pixel_count(&self, label: u32) -> Option<usize> {
        self.entries.get(&label).map(|h| match h {
            RoiHandle::Resident(c) => c.count(),
            RoiHandle::Spilled { count, .. } => *count,
        })
    }

    pub fn is_spilled(&self, label: u32) -> bool {
        matches!(self.entries.get(&label), Some(RoiHandle::Spilled { .. }))
    }

    /// Largest number of resident pixel bytes observed during accumulation,
    /// measured at tile boundaries before eviction.
    pub fn peak_resident_bytes(&self) -> u64 {
        self.peak_resident_bytes
    }

    /// Fetch a cloud, reading it back from disk if it was spilled. Reads do
    /// not mutate the registry, so concurrent callers are safe.
    pub fn get(&self, label: u32) -> Result<Arc<PixelCloud>, RoiError> {
        match self.entries.get(&label) {
            None => Err(RoiError::UnknownLabel(label)),
            Some(RoiHandle::Resident(c)) => Ok(Arc::clone(c)),
            Some(RoiHandle::Spilled { path, count, bbox }) => {
                let pixels = read_records(path, *count)?;
                Ok(Arc::new(PixelCloud {
                    label,
                    pixels,
                    bbox: *bbox,
                }))
            }
        }
    }

    pub fn spill_files(&self) -> Vec<PathBuf> {
        self.entries
            .values()
            .filter_map(|h| match h {
                RoiHandle::Spilled { path, .. } => Some(path.clone()),
                RoiHandle::Resident(_) => None,
            })
            .collect()
    }
}

impl Drop for RoiRegistry {
    fn drop(&mut self) {
        for path in self.spill_files() {
            if let Err(e) = fs::remove_file(&path) {
                log::warn!("could not remove spill file {}: {e}", path.display());
            }
        }
    }
}

/// Collect every labelled pixel of the tiles into per-label clouds.
pub fn accumulate<'a>(
    tiles: impl IntoIterator<Item = RowTile<'a>>,
    budget: &MemoryBudget,
) -> Result<RoiRegistry, RoiError> {
    let mut builders: BTreeMap<u32, CloudBuilder> = BTreeMap::new();
    let mut resident: u64 = 0;
    let mut peak: u64 = 0;
    let limit = budget.max_resident_bytes;

    for tile in tiles {
        for r in 0..tile.rows {
            let y = (tile.y0 + r) as u32;
            let row = r * tile.width..(r + 1) * tile.width;
            for (x, (&label, &intensity)) in tile.labels[row.clone()]
                .iter()
                .zip(&tile.intensity[row])
                .enumerate()
            {
                if label == 0 {
                    continue;
                }
                let x = x as u32;
                let b = builders.entry(label).or_insert_with(|| CloudBuilder {
                    pixels: Vec::new(),
                    bbox: BBox::at(x, y),
                    count: 0,
                    spilled: false,
                });
                b.pixels.push(Pixel::new(x, y, intensity));
                b.bbox.include(x, y);
                b.count += 1;
                resident += RESIDENT_PIXEL_BYTES as u64;
            }
        }
        peak = peak.max(resident);
        while resident > limit {
            let (&label, victim) = builders
                .iter_mut()
                .filter(|(_, b)| !b.pixels.is_empty())
                .max_by(|(la, a), (lb, b)| a.pixels.len().cmp(&b.pixels.len()).then(lb.cmp(la)))
                .expect("resident bytes imply a resident cloud");
            let path = spill_path(&budget.spill_dir, label);
            if !victim.spilled {
                fs::create_dir_all(&budget.spill_dir).map_err(spill_err(&budget.spill_dir))?;
                // a stale file from an earlier run would corrupt the append
                let _ = fs::remove_file(&path);
            }
            append_records(&path, &victim.pixels)?;
            resident -= (victim.pixels.len() * RESIDENT_PIXEL_BYTES) as u64;
            victim.pixels = Vec::new();
            victim.spilled = true;
            log::debug!("spilled ROI {label} ({} px so far)", victim.count);
        }
    }

    let mut entries = BTreeMap::new();
    for (label, b) in builders {
        let handle = if b.spilled {
            let path = spill_path(&budget.spill_dir, label);
            append_records(&path, &b.pixels)?;
            RoiHandle::Spilled {
                path,
                count: b.count,
                bbox: b.bbox,
            }
        } else {
            RoiHandle::Resident(Arc::new(PixelCloud {
                label,
                pixels: b.pixels,
                bbox: b.bbox,
            }))
        };
        entries.insert(label, handle);
    }
    Ok(RoiRegistry {
        entries,
        peak_resident_bytes: peak,
    })
}

/// Shoelace signed area of a closed polygon (positive for the x→y turning
/// direction).
pub fn signed_area(points: &[Point]) -> f64 {
    twice_signed_area(points) as f64 / 2.0
}

pub(crate) fn twice_signed_area(points: &[Point]) -> i64 {
    let n = points.len();
    if n < 3 {
        return 0;
    }
    (0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::{iter_row_tiles, IntensityImage, LabelMask};

    fn registry(
        w: usize,
        h: usize,
        intensity: Vec<u16>,
        labels: Vec<u32>,
        budget: &MemoryBudget,
        rows: usize,
    ) -> RoiRegistry {
        let img = IntensityImage::new(w, h, 16, intensity).unwrap();
        let mask = LabelMask::new(w, h, labels).unwrap();
        accumulate(iter_row_tiles(&img, &mask, rows).unwrap(), budget).unwrap()
    }

    #[test]
    fn direct_read_off() {
        let reg = registry(
            2,
            2,
            vec![9, 8, 7, 6],
            vec![0, 1, 1, 2],
            &MemoryBudget::unlimited(),
            256,
        );
        assert_eq!(reg.labels().collect::<Vec<_>>(), vec![1, 2]);
        let one = reg.get(1).unwrap();
        assert_eq!(one.pixels(), &[Pixel::new(1, 0, 8), Pixel::new(0, 1, 7)]);
        assert_eq!(
            one.bbox(),
            BBox {
                x_min: 0,
                y_min: 0,
                x_max: 1,
                y_max: 1
            }
        );
        let two = reg.get(2).unwrap();
        assert_eq!(two.pixels(), &[Pixel::new(1, 1, 6)]);
        assert_eq!(two.bbox(), BBox::at(1, 1));
    }

    #[test]
    fn all_background_is_empty() {
        let reg = registry(3, 1, vec![1, 2, 3], vec![0; 3], &MemoryBudget::unlimited(), 1);
        assert!(reg.is_empty());
    }

    #[test]
    fn spill_round_trip_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (40, 30);
        let intensity: Vec<u16> = (0..w * h).map(|i| (i * 37 % 1000) as u16).collect();
        let labels: Vec<u32> = (0..w * h).map(|i| ((i % w) / 10 + 1) as u32).collect();
        let mem = registry(w, h, intensity.clone(), labels.clone(), &MemoryBudget::unlimited(), 4);
        let budget = MemoryBudget::new(256, dir.path()).unwrap();
        let spilled = registry(w, h, intensity, labels, &budget, 4);
        assert_eq!(spilled.labels().count(), 4);
        assert!(spilled.labels().all(|l| spilled.is_spilled(l)));
        for l in mem.labels() {
            assert_eq!(*mem.get(l).unwrap(), *spilled.get(l).unwrap());
        }
        let files = spilled.spill_files();
        assert!(files.iter().all(|f| f.exists()));
        drop(spilled);
        assert!(files.iter().all(|f| !f.exists()));
    }

    #[test]
    fn peak_bounded_by_budget_plus_tile() {
        let dir = tempfile::tempdir().unwrap();
        let (w, h) = (64, 64);
        let labels: Vec<u32> = (0..w * h).map(|i| ((i / w) / 8 * 8 + (i % w) / 8 + 1) as u32).collect();
        let budget_bytes = 2048;
        let budget = MemoryBudget::new(budget_bytes, dir.path()).unwrap();
        let reg = registry(w, h, vec![1; w * h], labels, &budget, 2);
        let tile_bytes = (2 * w * RESIDENT_PIXEL_BYTES) as u64;
        assert!(reg.peak_resident_bytes() <= budget_bytes + tile_bytes);
    }

    #[test]
    fn unwritable_spill_dir() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let budget = MemoryBudget::new(1, blocker.join("sub")).unwrap();
        let img = IntensityImage::new(2, 1, 8, vec![1, 2]).unwrap();
        let mask = LabelMask::new(2, 1, vec![1, 1]).unwrap();
        let err = accumulate(iter_row_tiles(&img, &mask, 1).unwrap(), &budget).unwrap_err();
        assert!(matches!(err, RoiError::SpillIo { .. }));
    }

    #[test]
    fn registry_is_shareable() {
        fn check<T: Send + Sync>() {}
        check::<RoiRegistry>();
    }

    #[test]
    fn cloud_invariants_checked() {
        assert!(matches!(
            PixelCloud::from_pixels(1, vec![]),
            Err(RoiError::EmptyCloud)
        ));
        assert!(matches!(
            PixelCloud::from_triples(1, &[(0, 0, 1), (0, 0, 2)]),
            Err(RoiError::DuplicatePixel(0, 0))
        ));
        assert!(matches!(
            PixelCloud::from_triples(0, &[(0, 0, 1)]),
            Err(RoiError::BackgroundLabel)
        ));
    }
}
