//! Kept in its own binary: it sets a process-wide environment variable.

use std::path::Path;

use featurex_core::engine::{self, ExtractionConfig, SPILL_DIR_ENV};
use featurex_core::features::FeatureGroup;
use featurex_core::imgio::{write_intensity, write_mask, IntensityImage, LabelMask};

fn write_pair(dir: &Path, name: &str, w: usize, h: usize, px: Vec<u16>, labels: Vec<u32>) {
    std::fs::create_dir_all(dir.join("int")).unwrap();
    std::fs::create_dir_all(dir.join("seg")).unwrap();
    write_intensity(dir.join("int").join(name), &IntensityImage::new(w, h, 8, px).unwrap()).unwrap();
    write_mask(dir.join("seg").join(name), &LabelMask::new(w, h, labels).unwrap()).unwrap();
}

fn config(dir: &Path, groups: &[FeatureGroup]) -> ExtractionConfig {
    let mut c = ExtractionConfig::new(dir.join("int"), dir.join("seg"), dir.join("out.csv"));
    c.features = groups.to_vec();
    c
}

#[test]
fn rerun_is_identical_and_spill_dir_is_cleaned() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (12, 12);
    let px: Vec<u16> = (0..w * h).map(|i| (i * 37 % 251) as u16).collect();
    let labels: Vec<u32> = (0..w * h).map(|i| ((i % w) / 4 + 3 * ((i / w) / 4)) as u32 + 1).collect();
    write_pair(dir.path(), "g.pgm", w, h, px, labels);
    let spill = dir.path().join("spill");
    std::env::set_var(SPILL_DIR_ENV, &spill);
    let mut c = config(dir.path(), &FeatureGroup::ALL);
    c.memory_budget = Some(64);
    c.rows_per_tile = 2;
    engine::run(&c).unwrap();
    let first = std::fs::read(dir.path().join("out.csv")).unwrap();
    engine::run(&c).unwrap();
    assert_eq!(std::fs::read(dir.path().join("out.csv")).unwrap(), first);
    std::env::remove_var(SPILL_DIR_ENV);
    assert_eq!(std::fs::read_dir(&spill).unwrap().count(), 0);
}
