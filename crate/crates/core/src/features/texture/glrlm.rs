use super::{size_matrix_features, Angle, DiscretizedRoi};

/// Run-length counts for one direction, `counts[g * max_run + (len - 1)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLengthMatrix {
    pub angle: Angle,
    pub ng: usize,
    pub max_run: usize,
    pub counts: Vec<u64>,
    pub n_pixels: usize,
}

impl RunLengthMatrix {
    pub fn run_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, level: usize, len: usize) -> u64 {
        self.counts[level * self.max_run + len - 1]
    }

    /// Values in [`GLRLM_FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; 16] {
        size_matrix_features(&self.counts, self.ng, self.max_run, self.n_pixels)
    }
}

pub const GLRLM_FEATURE_NAMES: [&str; 16] = [
    "SRE", "LRE", "GLNU", "GLNUN", "RLNU", "RLNUN", "RP", "GLV", "RV", "RE", "LGLRE", "HGLRE",
    "SRLGLE", "SRHGLE", "LRLGLE", "LRHGLE",
];

/// One matrix per angle. A run is a maximal line of equal-level in-ROI pixels
/// along the direction.
pub fn glrlm(roi: &DiscretizedRoi, angles: &[Angle]) -> Vec<RunLengthMatrix> {
    let ng = roi.ng();
    let max_run = roi.width().max(roi.height()).max(1);
    let n_pixels = roi.pixel_count();
    angles
        .iter()
        .map(|&angle| {
            let (dx, dy) = angle.step();
            let mut counts = vec![0u64; ng * max_run];
            for (x, y, g) in roi.iter_levels() {
                if roi.level(x - dx, y - dy) == Some(g) {
                    continue;
                }
                let mut len = 1;
                while roi.level(x + len as i64 * dx, y + len as i64 * dy) == Some(g) {
                    len += 1;
                }
                counts[g as usize * max_run + len - 1] += 1;
            }
            RunLengthMatrix {
                angle,
                ng,
                max_run,
                counts,
                n_pixels,
            }
        })
        .collect()
}
