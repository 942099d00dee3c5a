//! First-order intensity statistics.
//!
//! Moments are population moments `m_k = (1/n) Σ (I - μ)^k`. Ratio statistics
//! whose denominator vanishes (constant ROIs) are reported as 0. Percentiles
//! interpolate linearly between closest ranks: `h = (n - 1) p`.

use std::collections::HashSet;

use thiserror::Error;

use crate::roistore::{ContourPath, PixelCloud, Point};

pub const DEFAULT_HISTOGRAM_BINS: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum IntensityError {
    #[error("total intensity is zero; weighted centroid undefined")]
    ZeroMass,
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("no intensity samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Percentiles {
    pub p1: f64,
    pub p10: f64,
    pub p25: f64,
    pub p75: f64,
    pub p90: f64,
    pub p99: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntensityFeatureSet {
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// Sample variance, `n - 1` denominator (0 for a single pixel).
    pub variance: f64,
    /// Population variance, `n` denominator.
    pub variance_biased: f64,
    pub std: f64,
    pub std_biased: f64,
    pub mad: f64,
    pub median_ad: f64,
    pub rmad: f64,
    pub iqr: f64,
    pub percentiles: Percentiles,
    pub skewness: f64,
    pub kurtosis: f64,
    pub excess_kurtosis: f64,
    pub hyperskewness: f64,
    pub hyperflatness: f64,
    pub energy: f64,
    pub rms: f64,
    pub entropy: f64,
    pub uniformity: f64,
    pub qcod: f64,
    pub cov: f64,
    pub integrated_intensity: f64,
    pub edge_mean: f64,
    pub edge_min: f64,
    pub edge_max: f64,
    pub edge_std: f64,
    pub edge_integrated: f64,
    pub weighted_centroid_x: f64,
    pub weighted_centroid_y: f64,
}

impl IntensityFeatureSet {
    pub const NAMES: [&'static str; 39] = [
        "MEAN",
        "MEDIAN",
        "MODE",
        "MIN",
        "MAX",
        "RANGE",
        "VARIANCE",
        "VARIANCE_BIASED",
        "STDDEV",
        "STDDEV_BIASED",
        "MEAN_ABSOLUTE_DEVIATION",
        "MEDIAN_ABSOLUTE_DEVIATION",
        "ROBUST_MEAN_ABSOLUTE_DEVIATION",
        "INTERQUARTILE_RANGE",
        "P01",
        "P10",
        "P25",
        "P75",
        "P90",
        "P99",
        "SKEWNESS",
        "KURTOSIS",
        "EXCESS_KURTOSIS",
        "HYPERSKEWNESS",
        "HYPERFLATNESS",
        "ENERGY",
        "ROOT_MEAN_SQUARED",
        "ENTROPY",
        "UNIFORMITY",
        "QCOD",
        "COV",
        "INTEGRATED_INTENSITY",
        "EDGE_MEAN_INTENSITY",
        "EDGE_MIN_INTENSITY",
        "EDGE_MAX_INTENSITY",
        "EDGE_STDDEV_INTENSITY",
        "EDGE_INTEGRATED_INTENSITY",
        "WEIGHTED_CENTROID_X",
        "WEIGHTED_CENTROID_Y",
    ];

    /// Values in [`Self::NAMES`] order.
    pub fn values(&self) -> [f64; 39] {
        let p = &self.percentiles;
        [
            self.mean,
            self.median,
            self.mode,
            self.min,
            self.max,
            self.range,
            self.variance,
            self.variance_biased,
            self.std,
            self.std_biased,
            self.mad,
            self.median_ad,
            self.rmad,
            self.iqr,
            p.p1,
            p.p10,
            p.p25,
            p.p75,
            p.p90,
            p.p99,
            self.skewness,
            self.kurtosis,
            self.excess_kurtosis,
            self.hyperskewness,
            self.hyperflatness,
            self.energy,
            self.rms,
            self.entropy,
            self.uniformity,
            self.qcod,
            self.cov,
            self.integrated_intensity,
            self.edge_mean,
            self.edge_min,
            self.edge_max,
            self.edge_std,
            self.edge_integrated,
            self.weighted_centroid_x,
            self.weighted_centroid_y,
        ]
    }
}

/// Linear interpolation between closest ranks on a sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    percentile(sorted, 0.5)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Shannon entropy (bits) and uniformity of a `bins`-bin histogram over
/// `[min, max]`. A constant sample lands entirely in bin 0.
pub fn histogram_entropy_uniformity(values: &[f64], bins: usize) -> (f64, f64) {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mut hist = vec![0usize; bins];
    let span = max - min;
    for &v in values {
        let b = if span > 0.0 {
            ((bins as f64 * (v - min) / span).floor() as usize).min(bins - 1)
        } else {
            0
        };
        hist[b] += 1;
    }
    let n = values.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / n)
        .fold((0.0, 0.0), |(e, u), p| (e - p * p.log2(), u + p * p))
}

/// Statistics of a raw value sample; edge and centroid fields are left at 0.
pub fn first_order_stats(values: &[f64], bins: usize) -> Result<IntensityFeatureSet, IntensityError> {
    if bins < 2 {
        return Err(IntensityError::TooFewBins(bins));
    }
    if values.is_empty() {
        return Err(IntensityError::Empty);
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let sum: f64 = values.iter().sum();
    let mean = sum / n;

    let (mut m2, mut m3, mut m4, mut m5, mut m6, mut abs_dev) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        m5 += d2 * d2 * d;
        m6 += d2 * d2 * d2;
        abs_dev += d.abs();
    }
    let (m2, m3, m4, m5, m6) = (m2 / n, m3 / n, m4 / n, m5 / n, m6 / n);
    let degenerate = m2 == 0.0;
    let moment_ratio = |mk: f64, power: f64| if degenerate { 0.0 } else { mk / m2.powf(power) };
    let kurtosis = moment_ratio(m4, 2.0);

    let variance_biased = m2;
    let variance = if values.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };

    let percentiles = Percentiles {
        p1: percentile(&sorted, 0.01),
        p10: percentile(&sorted, 0.10),
        p25: percentile(&sorted, 0.25),
        p75: percentile(&sorted, 0.75),
        p90: percentile(&sorted, 0.90),
        p99: percentile(&sorted, 0.99),
    };
    let median = median_of_sorted(&sorted);

    let mut abs_from_median: Vec<f64> = values.iter().map(|v| (v - median).abs()).collect();
    abs_from_median.sort_by(f64::total_cmp);

    let robust: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v >= percentiles.p10 && v <= percentiles.p90)
        .collect();
    let rmad = if robust.is_empty() {
        0.0
    } else {
        let rmean = robust.iter().sum::<f64>() / robust.len() as f64;
        robust.iter().map(|v| (v - rmean).abs()).sum::<f64>() / robust.len() as f64
    };

    // most frequent value, smallest on ties
    let mut mode = sorted[0];
    let mut best_run = 0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best_run {
            best_run = j;
            mode = sorted[i];
        }
        i += j;
    }

    let energy: f64 = values.iter().map(|v| v * v).sum();
    let (entropy, uniformity) = histogram_entropy_uniformity(values, bins);
    let std_biased = variance_biased.sqrt();

    Ok(IntensityFeatureSet {
        mean,
        median,
        mode,
        min,
        max,
        range: max - min,
        variance,
        variance_biased,
        std: variance.sqrt(),
        std_biased,
        mad: abs_dev / n,
        median_ad: median_of_sorted(&abs_from_median),
        rmad,
        iqr: percentiles.p75 - percentiles.p25,
        percentiles,
        skewness: moment_ratio(m3, 1.5),
        kurtosis,
        excess_kurtosis: if degenerate { 0.0 } else { kurtosis - 3.0 },
        hyperskewness: moment_ratio(m5, 2.5),
        hyperflatness: moment_ratio(m6, 3.0),
        energy,
        rms: (energy / n).sqrt(),
        entropy,
        uniformity,
        qcod: ratio(
            percentiles.p75 - percentiles.p25,
            percentiles.p75 + percentiles.p25,
        ),
        cov: ratio(std_biased, mean),
        integrated_intensity: sum,
        ..Default::default()
    })
}

pub fn weighted_centroid(cloud: &PixelCloud) -> Result<(f64, f64), IntensityError> {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for p in cloud.pixels() {
        let w = p.intensity as f64;
        sx += p.x as f64 * w;
        sy += p.y as f64 * w;
        s += w;
    }
    if s == 0.0 {
        return Err(IntensityError::ZeroMass);
    }
    Ok((sx / s, sy / s))
}

fn plain_centroid(cloud: &PixelCloud) -> (f64, f64) {
    let n = cloud.count() as f64;
    let (sx, sy) = cloud
        .pixels()
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x as f64, sy + p.y as f64));
    (sx / n, sy / n)
}

/// Full intensity feature set. Edge statistics run over the distinct contour
/// pixels. A zero-mass ROI reports its geometric centroid as the weighted
/// centroid.
pub fn intensity_features(
    cloud: &PixelCloud,
    contour: &ContourPath,
    bins: usize,
) -> Result<IntensityFeatureSet, IntensityError> {
    let values: Vec<f64> = cloud.pixels().iter().map(|p| p.intensity as f64).collect();
    let mut f = first_order_stats(&values, bins)?;

    let edge: HashSet<Point> = contour.points.iter().copied().collect();
    let edge_values: Vec<f64> = cloud
        .pixels()
        .iter()
        .filter(|p| edge.contains(&p.point()))
        .map(|p| p.intensity as f64)
        .collect();
    if !edge_values.is_empty() {
        let n = edge_values.len() as f64;
        let sum: f64 = edge_values.iter().sum();
        let mean = sum / n;
        f.edge_mean = mean;
        f.edge_integrated = sum;
        f.edge_min = edge_values.iter().copied().fold(f64::INFINITY, f64::min);
        f.edge_max = edge_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        f.edge_std = (edge_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    }

    let (wx, wy) = weighted_centroid(cloud).unwrap_or_else(|_| plain_centroid(cloud));
    f.weighted_centroid_x = wx;
    f.weighted_centroid_y = wy;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roistore::trace_contour;

    fn row_cloud(values: &[u16]) -> PixelCloud {
        let t: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, 0, v))
            .collect();
        PixelCloud::from_triples(1, &t).unwrap()
    }

    fn features(values: &[u16], bins: usize) -> IntensityFeatureSet {
        let c = row_cloud(values);
        intensity_features(&c, &trace_contour(&c), bins).unwrap()
    }

    #[test]
    fn constant_roi() {
        let f = features(&[5, 5, 5, 5], 256);
        assert_eq!(f.mean, 5.0);
        assert_eq!(f.variance, 0.0);
        assert_eq!(f.variance_biased, 0.0);
        assert_eq!(f.std, 0.0);
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.uniformity, 1.0);
        assert_eq!(f.energy, 100.0);
        assert_eq!(f.range, 0.0);
        assert_eq!(f.skewness, 0.0);
        assert_eq!(f.kurtosis, 0.0);
        assert_eq!(f.excess_kurtosis, 0.0);
    }

    // Oracle: hand evaluation on the sorted array [0, 1, 2, 3].
    #[test]
    fn zero_to_three() {
        let f = features(&[3, 0, 2, 1], 256);
        assert_eq!(f.mean, 1.5);
        assert_eq!(f.variance_biased, 1.25);
        assert!((f.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.median, 1.5);
        assert_eq!(f.percentiles.p25, 0.75);
        assert_eq!(f.percentiles.p75, 2.25);
        assert_eq!(f.iqr, 1.5);
        assert_eq!(f.energy, 14.0);
        assert_eq!(f.integrated_intensity, 6.0);
        assert_eq!(f.mad, 1.0);
        assert_eq!(f.skewness, 0.0);
    }

    #[test]
    fn two_bin_entropy() {
        let f = features(&[2, 4], 2);
        assert_eq!(f.entropy, 1.0);
        assert_eq!(f.uniformity, 0.5);
    }

    #[test]
    fn too_few_bins() {
        let c = row_cloud(&[1, 2]);
        assert_eq!(
            intensity_features(&c, &trace_contour(&c), 1),
            Err(IntensityError::TooFewBins(1))
        );
    }

    #[test]
    fn centroids() {
        let one = PixelCloud::from_triples(1, &[(3, 4, 9)]).unwrap();
        assert_eq!(weighted_centroid(&one).unwrap(), (3.0, 4.0));
        let sym = PixelCloud::from_triples(1, &[(0, 0, 1), (2, 0, 1)]).unwrap();
        assert_eq!(weighted_centroid(&sym).unwrap(), (1.0, 0.0));
        // (0*1 + 2*3) / 4
        let skew = PixelCloud::from_triples(1, &[(0, 0, 1), (2, 0, 3)]).unwrap();
        assert_eq!(weighted_centroid(&skew).unwrap(), (1.5, 0.0));
        let dark = PixelCloud::from_triples(1, &[(0, 0, 0), (2, 0, 0)]).unwrap();
        assert_eq!(weighted_centroid(&dark), Err(IntensityError::ZeroMass));
        let f = intensity_features(&dark, &trace_contour(&dark), 8).unwrap();
        assert_eq!((f.weighted_centroid_x, f.weighted_centroid_y), (1.0, 0.0));
    }

    #[test]
    fn ring_edge_equals_full_roi() {
        // 1-pixel thick square ring: every pixel is on the contour
        let mut t = Vec::new();
        let mut v = 10u16;
        for y in 0..5u32 {
            for x in 0..5u32 {
                if x == 0 || y == 0 || x == 4 || y == 4 {
                    t.push((x, y, v));
                    v += 7;
                }
            }
        }
        let c = PixelCloud::from_triples(1, &t).unwrap();
        let f = intensity_features(&c, &trace_contour(&c), 64).unwrap();
        assert_eq!(f.edge_integrated, f.integrated_intensity);
        assert_eq!(f.edge_min, f.min);
        assert_eq!(f.edge_max, f.max);
        assert!((f.edge_mean - f.mean).abs() < 1e-12);
        assert!((f.edge_std - f.std_biased).abs() < 1e-9);
    }

    #[test]
    fn percentile_order() {
        let f = features(&[9, 1, 400, 3, 3, 70, 12, 5, 5, 5, 1000], 16);
        let p = f.percentiles;
        let chain = [f.min, p.p1, p.p10, p.p25, p.p75, p.p90, p.p99, f.max];
        assert!(chain.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(f.mode, 5.0);
    }
}
