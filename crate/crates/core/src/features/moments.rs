//! Geometric moments up to order 3 and the Hu invariants.
//!
//! Raw moments are taken about the image origin. Central moments are
//! accumulated in bbox-local integer coordinates, which makes them (and
//! everything derived from them) bit-identical under integer translation.

use crate::roistore::PixelCloud;

use super::intensity::IntensityError;

pub const ORDER: usize = 4;

/// `m[p][q]` indexing throughout; entries with `p + q > 3` are left at 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentSet {
    pub raw: [[f64; ORDER]; ORDER],
    pub central: [[f64; ORDER]; ORDER],
    pub normalized: [[f64; ORDER]; ORDER],
    pub hu: [f64; 7],
    pub centroid: (f64, f64),
}

/// `(p, q)` pairs emitted for raw moments.
pub const RAW_ORDERS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (0, 2),
    (2, 0),
    (1, 2),
    (2, 1),
    (0, 3),
    (3, 0),
];

/// `(p, q)` pairs emitted for central and normalised moments (order ≥ 2).
pub const CENTRAL_ORDERS: [(usize, usize); 7] =
    [(1, 1), (0, 2), (2, 0), (1, 2), (2, 1), (0, 3), (3, 0)];

/// Hu's seven invariants from normalised central moments `eta[p][q]`.
pub fn hu_invariants(eta: &[[f64; ORDER]; ORDER]) -> [f64; 7] {
    let (n20, n02, n11) = (eta[2][0], eta[0][2], eta[1][1]);
    let (n30, n03, n21, n12) = (eta[3][0], eta[0][3], eta[2][1], eta[1][2]);
    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;
    [
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ]
}

/// Moments with unit mass per pixel, or intensity as mass when `weighted`.
pub fn moments(cloud: &PixelCloud, weighted: bool) -> Result<MomentSet, IntensityError> {
    let mass = |i: u16| if weighted { i as f64 } else { 1.0 };
    let mut raw = [[0.0; ORDER]; ORDER];
    let mut local = [[0.0; 2]; 2];
    let mut m00 = 0.0;
    let bb = cloud.bbox();
    for p in cloud.pixels() {
        let w = mass(p.intensity);
        let (x, y) = (p.x as f64, p.y as f64);
        for (i, row) in raw.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate().take(ORDER - i) {
                *cell += w * x.powi(i as i32) * y.powi(j as i32);
            }
        }
        m00 += w;
        local[1][0] += w * (p.x - bb.x_min) as f64;
        local[0][1] += w * (p.y - bb.y_min) as f64;
    }
    if m00 == 0.0 {
        return Err(IntensityError::ZeroMass);
    }
    let cx = local[1][0] / m00;
    let cy = local[0][1] / m00;

    let mut central = [[0.0; ORDER]; ORDER];
    for p in cloud.pixels() {
        let w = mass(p.intensity);
        let dx = (p.x - bb.x_min) as f64 - cx;
        let dy = (p.y - bb.y_min) as f64 - cy;
        for (i, row) in central.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate().take(ORDER - i) {
                *cell += w * dx.powi(i as i32) * dy.powi(j as i32);
            }
        }
    }
    // first-order central moments vanish by definition
    central[1][0] = 0.0;
    central[0][1] = 0.0;

    let mu00 = central[0][0];
    let mut normalized = [[0.0; ORDER]; ORDER];
    for p in 0..ORDER {
        for q in 0..ORDER - p {
            let gamma = 1.0 + (p + q) as f64 / 2.0;
            normalized[p][q] = central[p][q] / mu00.powf(gamma);
        }
    }
    let hu = hu_invariants(&normalized);
    Ok(MomentSet {
        raw,
        central,
        normalized,
        hu,
        centroid: (cx + bb.x_min as f64, cy + bb.y_min as f64),
    })
}

impl MomentSet {
    /// Column names for a moment set, optionally prefixed.
    pub fn names(prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (p, q) in RAW_ORDERS {
            out.push(format!("{prefix}RAW_M{p}{q}"));
        }
        for (p, q) in CENTRAL_ORDERS {
            out.push(format!("{prefix}CENTRAL_MU{p}{q}"));
        }
        for (p, q) in CENTRAL_ORDERS {
            out.push(format!("{prefix}NORM_ETA{p}{q}"));
        }
        for k in 1..=7 {
            out.push(format!("{prefix}HU_M{k}"));
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(31);
        out.extend(RAW_ORDERS.iter().map(|&(p, q)| self.raw[p][q]));
        out.extend(CENTRAL_ORDERS.iter().map(|&(p, q)| self.central[p][q]));
        out.extend(CENTRAL_ORDERS.iter().map(|&(p, q)| self.normalized[p][q]));
        out.extend(self.hu);
        out
    }
}
