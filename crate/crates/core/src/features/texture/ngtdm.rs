use super::DiscretizedRoi;
use crate::roistore::NEIGHBOURS_8;

pub const COARSENESS_CAP: f64 = 1e6;

/// Per-level neighbourhood grey-tone differences over valid pixels, those
/// with at least one in-ROI 8-neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct Ngtdm {
    pub ng: usize,
    pub n: Vec<u64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub n_valid: u64,
}

pub const NGTDM_FEATURE_NAMES: [&str; 5] =
    ["COARSENESS", "CONTRAST", "BUSYNESS", "COMPLEXITY", "STRENGTH"];

/// Values in [`NGTDM_FEATURE_NAMES`] order.
pub type NgtdmFeatures = [f64; 5];

pub fn ngtdm(roi: &DiscretizedRoi) -> Ngtdm {
    let ng = roi.ng();
    let mut n = vec![0u64; ng];
    let mut s = vec![0.0; ng];
    let mut n_valid = 0;
    for (x, y, g) in roi.iter_levels() {
        let (mut sum, mut k) = (0u64, 0u64);
        for (dx, dy) in NEIGHBOURS_8 {
            if let Some(l) = roi.level(x + dx, y + dy) {
                sum += l as u64;
                k += 1;
            }
        }
        if k == 0 {
            continue;
        }
        let g = g as usize;
        n[g] += 1;
        s[g] += (g as f64 - sum as f64 / k as f64).abs();
        n_valid += 1;
    }
    let p = if n_valid == 0 {
        vec![0.0; ng]
    } else {
        n.iter().map(|&c| c as f64 / n_valid as f64).collect()
    };
    Ngtdm {
        ng,
        n,
        p,
        s,
        n_valid,
    }
}

impl Ngtdm {
    pub fn features(&self) -> NgtdmFeatures {
        if self.n_valid == 0 {
            return [0.0; 5];
        }
        let levels: Vec<(f64, f64, f64)> = (0..self.ng)
            .filter(|&g| self.n[g] > 0)
            .map(|g| ((g + 1) as f64, self.p[g], self.s[g]))
            .collect();
        let ngp = levels.len() as f64;
        let nvp = self.n_valid as f64;
        let ps: f64 = levels.iter().map(|&(_, p, s)| p * s).sum();
        let s_total: f64 = levels.iter().map(|&(_, _, s)| s).sum();

        let coarseness = if ps > 0.0 {
            (1.0 / ps).min(COARSENESS_CAP)
        } else {
            COARSENESS_CAP
        };
        let (mut sq, mut busy_den, mut complexity, mut strength) = (0.0, 0.0, 0.0, 0.0);
        for &(i, pi, si) in &levels {
            for &(j, pj, sj) in &levels {
                let d = i - j;
                sq += pi * pj * d * d;
                busy_den += (i * pi - j * pj).abs();
                complexity += d.abs() * (pi * si + pj * sj) / (pi + pj);
                strength += (pi + pj) * d * d;
            }
        }
        let contrast = if ngp > 1.0 {
            sq / (ngp * (ngp - 1.0)) * s_total / nvp
        } else {
            0.0
        };
        let busyness = if busy_den > 0.0 { ps / busy_den } else { 0.0 };
        let strength = if s_total > 0.0 { strength / s_total } else { 0.0 };
        [coarseness, contrast, busyness, complexity / nvp, strength]
    }
}
