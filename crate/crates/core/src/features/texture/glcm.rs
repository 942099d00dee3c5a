use super::{Angle, DiscretizedRoi, GlcmParams};

/// Co-occurrence counts for one direction. `counts[i * ng + j]` counts pairs
/// whose first pixel has level `i` and whose partner, `offset` steps along
/// the angle, has level `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlcmMatrix {
    pub angle: Angle,
    pub ng: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl GlcmMatrix {
    /// No in-ROI pair exists at this angle.
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn probabilities(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

pub fn glcm(roi: &DiscretizedRoi, params: &GlcmParams) -> Vec<GlcmMatrix> {
    let ng = roi.ng();
    let d = params.offset as i64;
    params
        .angles
        .iter()
        .map(|&angle| {
            let (dx, dy) = angle.step();
            let mut counts = vec![0u64; ng * ng];
            let mut total = 0;
            for (x, y, i) in roi.iter_levels() {
                if let Some(j) = roi.level(x + d * dx, y + d * dy) {
                    let (i, j) = (i as usize, j as usize);
                    counts[i * ng + j] += 1;
                    total += 1;
                    if params.symmetric {
                        counts[j * ng + i] += 1;
                        total += 1;
                    }
                }
            }
            GlcmMatrix {
                angle,
                ng,
                counts,
                total,
            }
        })
        .collect()
}

pub const GLCM_FEATURE_NAMES: [&str; 29] = [
    "ASM",
    "ACOR",
    "CLUPROM",
    "CLUSHADE",
    "CLUTEND",
    "CONTRAST",
    "CORRELATION",
    "DIFAVE",
    "DIFENTRO",
    "DIFVAR",
    "DIS",
    "ENERGY",
    "ENTROPY",
    "HOM1",
    "HOM2",
    "ID",
    "IDN",
    "IDM",
    "IDMN",
    "INFOMEAS1",
    "INFOMEAS2",
    "IV",
    "JAVE",
    "JE",
    "JMAX",
    "JVAR",
    "SUMAVE",
    "SUMENT",
    "SUMVAR",
];

/// Values in [`GLCM_FEATURE_NAMES`] order.
pub type GlcmFeatures = [f64; 29];

fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter()
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.log2())
        .sum()
}

/// Haralick/IBSI co-occurrence statistics. HOM1 is the inverse difference
/// and HOM2 the inverse difference moment. An empty matrix yields zeros.
pub fn glcm_features(m: &GlcmMatrix) -> GlcmFeatures {
    let mut out = [0.0; 29];
    if m.is_empty() {
        return out;
    }
    let ng = m.ng;
    let p = m.probabilities();
    let ngf = ng as f64;

    let mut px = vec![0.0; ng];
    let mut py = vec![0.0; ng];
    let mut p_sum = vec![0.0; 2 * ng + 1];
    let mut p_diff = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i * ng + j];
            if v == 0.0 {
                continue;
            }
            px[i] += v;
            py[j] += v;
            p_sum[i + j + 2] += v;
            p_diff[i.abs_diff(j)] += v;
        }
    }
    let level = |i: usize| (i + 1) as f64;
    let mu_x: f64 = (0..ng).map(|i| level(i) * px[i]).sum();
    let mu_y: f64 = (0..ng).map(|j| level(j) * py[j]).sum();
    let sd_x = (0..ng).map(|i| (level(i) - mu_x).powi(2) * px[i]).sum::<f64>().sqrt();
    let sd_y = (0..ng).map(|j| (level(j) - mu_y).powi(2) * py[j]).sum::<f64>().sqrt();

    let (mut asm, mut acor, mut cluprom, mut clushade, mut clutend) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut contrast, mut corr, mut dis, mut id, mut idn, mut idm, mut idmn, mut iv) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut jmax, mut jvar, mut hxy1, mut hxy2) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..ng {
        for j in 0..ng {
            let v = p[i * ng + j];
            let (a, b) = (level(i), level(j));
            let pxy = px[i] * py[j];
            if pxy > 0.0 {
                hxy2 -= pxy * pxy.log2();
                if v > 0.0 {
                    hxy1 -= v * pxy.log2();
                }
            }
            if v == 0.0 {
                continue;
            }
            let diff = a - b;
            let adiff = diff.abs();
            let cluster = a + b - mu_x - mu_y;
            asm += v * v;
            acor += a * b * v;
            clutend += cluster.powi(2) * v;
            clushade += cluster.powi(3) * v;
            cluprom += cluster.powi(4) * v;
            contrast += diff * diff * v;
            corr += (a - mu_x) * (b - mu_y) * v;
            dis += adiff * v;
            id += v / (1.0 + adiff);
            idn += v / (1.0 + adiff / ngf);
            idm += v / (1.0 + diff * diff);
            idmn += v / (1.0 + diff * diff / (ngf * ngf));
            if i != j {
                iv += v / (diff * diff);
            }
            jmax = jmax.max(v);
            jvar += (a - mu_x).powi(2) * v;
        }
    }
    let correlation = if sd_x > 0.0 && sd_y > 0.0 {
        corr / (sd_x * sd_y)
    } else {
        0.0
    };
    let je = entropy(p.iter().copied());
    let hx = entropy(px.iter().copied());
    let hy = entropy(py.iter().copied());
    let hmax = hx.max(hy);
    let infomeas1 = if hmax > 0.0 { (je - hxy1) / hmax } else { 0.0 };
    let infomeas2 = (1.0 - (-2.0 * (hxy2 - je)).exp()).max(0.0).sqrt();

    let sumave: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sument = entropy(p_sum.iter().copied());
    let sumvar: f64 = p_sum
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - sumave).powi(2) * v)
        .sum();
    let difave: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let difentro = entropy(p_diff.iter().copied());
    let difvar: f64 = p_diff
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64 - difave).powi(2) * v)
        .sum();

    out = [
        asm,
        acor,
        cluprom,
        clushade,
        clutend,
        contrast,
        correlation,
        difave,
        difentro,
        difvar,
        dis,
        asm.sqrt(),
        je,
        id,
        idm,
        id,
        idn,
        idm,
        idmn,
        infomeas1,
        infomeas2,
        iv,
        mu_x,
        je,
        jmax,
        jvar,
        sumave,
        sument,
        sumvar,
    ];
    out
}
