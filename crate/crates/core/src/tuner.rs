//! Soft-feature hyperparameter search.
//!
//! A grid of ordered parameter values is scored by the class-unbiased
//! between/within variance ratio on a labelled calibration sample. The best
//! point wins; ties go to the cheaper point under an analytic cost model,
//! then to the earlier grid point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::texture::{discretize, glcm, glcm_features, Angle, GlcmParams, GLCM_FEATURE_NAMES};
use crate::roistore::PixelCloud;

/// Within-class and between-class sums below this are treated as zero.
pub const LOSS_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("need at least 2 classes, got {0}")]
    ClassCount(usize),
    #[error("class {class} has {count} items; at least 2 are required")]
    InsufficientClassItems { class: u32, count: usize },
    #[error("sampling fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("no grid point fits within cost budget {0}")]
    NoFeasiblePoint(f64),
    #[error("feature evaluation failed at {point}: {message}")]
    Evaluation { point: String, message: String },
    #[error("report write failed: {0}")]
    Report(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    Set(Vec<String>),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Set(_) => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ParamValue::Real(_) => "real",
            ParamValue::Int(_) => "integer",
            ParamValue::Set(_) => "set",
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Set(s) => write!(f, "{}", s.join(",")),
        }
    }
}

/// One point of the grid: named components in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub components: Vec<(String, ParamValue)>,
}

impl ParamVector {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|(n, v)| format!("{n}={v}")).collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamAxis {
    pub name: String,
    pub values: Vec<ParamValue>,
}

/// Product lattice of ordered axes. Points enumerate with the last axis
/// varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    axes: Vec<ParamAxis>,
}

impl ParamGrid {
    pub fn axes(&self) -> &[ParamAxis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index tuple of the `k`-th point.
    pub fn coordinates(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            idx[a] = k % axis.values.len();
            k /= axis.values.len();
        }
        idx
    }

    pub fn point(&self, k: usize) -> ParamVector {
        let idx = self.coordinates(k);
        ParamVector {
            components: self
                .axes
                .iter()
                .zip(idx)
                .map(|(a, i)| (a.name.clone(), a.values[i].clone()))
                .collect(),
        }
    }

    pub fn points(&self) -> Vec<ParamVector> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// Validate axes: numeric axes strictly increasing and of one kind, set axes
/// strict chains under inclusion.
pub fn build_grid(axes: Vec<ParamAxis>) -> Result<ParamGrid, TunerError> {
    let mut names = BTreeSet::new();
    for axis in &axes {
        if !names.insert(axis.name.as_str()) {
            return Err(TunerError::Grid(format!("duplicate axis '{}'", axis.name)));
        }
        let Some(first) = axis.values.first() else {
            return Err(TunerError::Grid(format!("axis '{}' has no values", axis.name)));
        };
        for pair in axis.values.windows(2) {
            let ordered = match (&pair[0], &pair[1]) {
                (ParamValue::Int(a), ParamValue::Int(b)) => a < b,
                (ParamValue::Real(a), ParamValue::Real(b)) => a < b,
                (ParamValue::Set(a), ParamValue::Set(b)) => {
                    let a: BTreeSet<_> = a.iter().collect();
                    let b: BTreeSet<_> = b.iter().collect();
                    a.is_subset(&b) && a.len() < b.len()
                }
                (a, b) => {
                    return Err(TunerError::Grid(format!(
                        "axis '{}' mixes {} and {} values",
                        axis.name,
                        a.kind(),
                        b.kind()
                    )))
                }
            };
            if !ordered {
                let what = if matches!(first, ParamValue::Set(_)) {
                    "a strict chain of nested sets"
                } else {
                    "strictly increasing"
                };
                return Err(TunerError::Grid(format!("axis '{}' is not {what}", axis.name)));
            }
        }
    }
    Ok(ParamGrid { axes })
}

/// Parse `name=v1,v2;name2=...`. Axes listed in `set_axes` take `|`-separated
/// chain members whose elements are comma-separated, e.g.
/// `angles=0|0,45,90,135`.
pub fn parse_grid_spec(spec: &str, set_axes: &[&str]) -> Result<ParamGrid, TunerError> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, raw) = part
            .split_once('=')
            .ok_or_else(|| TunerError::Grid(format!("expected name=values, got '{part}'")))?;
        let name = name.trim().to_string();
        let values = if set_axes.contains(&name.as_str()) {
            raw.split('|')
                .map(|m| {
                    ParamValue::Set(m.split(',').map(|e| e.trim().to_string()).filter(|e| !e.is_empty()).collect())
                })
                .collect()
        } else {
            raw.split(',')
                .map(|v| {
                    let v = v.trim();
                    v.parse::<i64>()
                        .map(ParamValue::Int)
                        .or_else(|_| v.parse::<f64>().map(ParamValue::Real))
                        .map_err(|_| TunerError::Grid(format!("axis '{name}': bad value '{v}'")))
                })
                .collect::<Result<_, _>>()?
        };
        axes.push(ParamAxis { name, values });
    }
    build_grid(axes)
}

pub trait CostModel: Sync {
    fn cost(&self, p: &ParamVector) -> f64;
}

/// GLCM operation count for a `roi_w × roi_h` ROI:
/// `|A| · ((w + 2d)(h + 2d) + c · ng²)`. The first term is the scan window
/// padded by the offset, the second the per-angle feature summation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmCostModel {
    pub roi_w: usize,
    pub roi_h: usize,
    pub c: f64,
}

impl GlcmCostModel {
    pub fn new(roi_w: usize, roi_h: usize) -> Self {
        Self { roi_w, roi_h, c: 1.0 }
    }

    pub fn cost_of(&self, params: &GlcmParams) -> f64 {
        let d = params.offset as f64;
        let window = (self.roi_w as f64 + 2.0 * d) * (self.roi_h as f64 + 2.0 * d);
        let ng = params.ng as f64;
        params.angles.len() as f64 * (window + self.c * ng * ng)
    }

    /// Sized to the largest calibration bounding box.
    pub fn for_calibration(cal: &CalibrationSet) -> Self {
        let (w, h) = cal.items.iter().fold((1, 1), |(w, h), (c, _)| {
            (w.max(c.bbox().width()), h.max(c.bbox().height()))
        });
        Self::new(w, h)
    }
}

impl CostModel for GlcmCostModel {
    fn cost(&self, p: &ParamVector) -> f64 {
        match glcm_params(p) {
            Ok(params) => self.cost_of(&params),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Read `ng`, `d` and `angles` from a grid point, defaulting to 64, 1 and
/// all four directions; the matrix is always symmetric.
pub fn glcm_params(p: &ParamVector) -> Result<GlcmParams, TunerError> {
    let int = |name: &str, default: usize| -> Result<usize, TunerError> {
        match p.get(name) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v > 0 => Ok(*v as usize),
            Some(v) => Err(TunerError::Grid(format!("'{name}' must be a positive integer, got {v}"))),
        }
    };
    let angles = match p.get("angles") {
        None => Angle::ALL.to_vec(),
        Some(ParamValue::Set(s)) => s
            .iter()
            .map(|a| a.parse())
            .collect::<Result<_, _>>()
            .map_err(|e| TunerError::Grid(format!("{e}")))?,
        Some(v) => return Err(TunerError::Grid(format!("'angles' must be a set, got {v}"))),
    };
    GlcmParams::new(int("ng", 64)?, int("d", 1)?, angles, true)
        .map_err(|e| TunerError::Grid(e.to_string()))
}

/// Angle-averaged GLCM statistics, one value per requested feature name.
pub fn glcm_evaluator(
    names: &[String],
) -> Result<impl Fn(&ParamVector, &PixelCloud) -> Result<Vec<f64>, String> + Sync, TunerError> {
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            let n = n.trim().to_ascii_uppercase();
            let n = n.strip_prefix("GLCM_").unwrap_or(&n).to_string();
            GLCM_FEATURE_NAMES
                .iter()
                .position(|&f| f == n)
                .ok_or_else(|| TunerError::Grid(format!("unknown GLCM feature '{n}'")))
        })
        .collect::<Result<_, _>>()?;
    Ok(move |p: &ParamVector, cloud: &PixelCloud| {
        let params = glcm_params(p).map_err(|e| e.to_string())?;
        let roi = discretize(cloud, params.ng).map_err(|e| e.to_string())?;
        let feats: Vec<_> = glcm(&roi, &params)
            .iter()
            .filter(|m| !m.is_empty())
            .map(glcm_features)
            .collect();
        Ok(idx
            .iter()
            .map(|&k| {
                if feats.is_empty() {
                    0.0
                } else {
                    feats.iter().map(|f| f[k]).sum::<f64>() / feats.len() as f64
                }
            })
            .collect())
    })
}

/// Non-negative loss; `infinite` marks perfect separation, stored as
/// `f64::MAX` so reports stay numeric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub infinite: bool,
}

impl LossValue {
    pub const INFINITE: LossValue = LossValue {
        value: f64::MAX,
        infinite: true,
    };

    pub fn finite(value: f64) -> Self {
        Self {
            value,
            infinite: false,
        }
    }

    fn rank(&self) -> (bool, f64) {
        (self.infinite, if self.infinite { 0.0 } else { self.value })
    }
}

/// `(N − K) Σ n_i (f̄_i − f̄)² / ((K − 1) Σ_i Σ_j (f_ij − f̄_i)²)`.
pub fn separability_loss(values: &[f64], classes: &[u32]) -> Result<LossValue, TunerError> {
    if values.len() != classes.len() {
        return Err(TunerError::Shape {
            expected: classes.len(),
            got: values.len(),
        });
    }
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (&v, &c) in values.iter().zip(classes) {
        groups.entry(c).or_default().push(v);
    }
    let k = groups.len();
    if k < 2 {
        return Err(TunerError::ClassCount(k));
    }
    let n = values.len() as f64;
    let grand = values.iter().sum::<f64>() / n;
    let (mut between, mut within) = (0.0, 0.0);
    for g in groups.values() {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let k = k as f64;
    if within < LOSS_EPSILON {
        return Ok(if between > LOSS_EPSILON {
            LossValue::INFINITE
        } else {
            LossValue::finite(0.0)
        });
    }
    Ok(LossValue::finite((n - k) * between / ((k - 1.0) * within)))
}

/// Labelled calibration ROIs.
#[derive(Debug, Clone)]
pub struct CalibrationSet {
    pub items: Vec<(Arc<PixelCloud>, u32)>,
}

impl CalibrationSet {
    pub fn new(items: Vec<(Arc<PixelCloud>, u32)>) -> Result<Self, TunerError> {
        let counts = class_counts(&items);
        if counts.len() < 2 {
            return Err(TunerError::ClassCount(counts.len()));
        }
        if let Some((&class, &count)) = counts.iter().find(|(_, &c)| c < 2) {
            return Err(TunerError::InsufficientClassItems { class, count });
        }
        Ok(Self { items })
    }

    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        class_counts(&self.items)
    }

    pub fn classes(&self) -> Vec<u32> {
        self.items.iter().map(|(_, c)| *c).collect()
    }
}

fn class_counts(items: &[(Arc<PixelCloud>, u32)]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for (_, c) in items {
        *m.entry(*c).or_insert(0) += 1;
    }
    m
}

/// Stratified sample of `max(2, round(n_i · fraction))` items per class,
/// keeping the input order.
pub fn sample_calibration(
    full: &[(Arc<PixelCloud>, u32)],
    fraction: f64,
    seed: u64,
) -> Result<CalibrationSet, TunerError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(TunerError::InvalidFraction(fraction));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, (_, c)) in full.iter().enumerate() {
        by_class.entry(*c).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(TunerError::ClassCount(by_class.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (&class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(TunerError::InsufficientClassItems {
                class,
                count: idx.len(),
            });
        }
        let want = ((idx.len() as f64 * fraction).round() as usize).clamp(2, idx.len());
        chosen.extend(sample(&mut rng, idx.len(), want).into_iter().map(|k| idx[k]));
    }
    chosen.sort_unstable();
    CalibrationSet::new(chosen.into_iter().map(|i| full[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point: ParamVector,
    pub cost: f64,
    pub loss: LossValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: ParamVector,
    pub best_loss: LossValue,
    pub best_cost: f64,
    /// Every evaluated point, in grid order.
    pub report: Vec<ReportRow>,
}

impl TuneResult {
    /// CSV with one column per grid axis, then `cost`, `loss`, `is_infinite`.
    pub fn write_report<W: Write>(&self, out: W) -> Result<(), TunerError> {
        let mut w = csv::Writer::from_writer(out);
        if let Some(first) = self.report.first() {
            let mut header: Vec<&str> = first.point.components.iter().map(|(n, _)| n.as_str()).collect();
            header.extend(["cost", "loss", "is_infinite"]);
            w.write_record(&header)?;
        }
        for row in &self.report {
            let mut rec: Vec<String> = row.point.components.iter().map(|(_, v)| v.to_string()).collect();
            rec.push(format!("{}", row.cost));
            rec.push(format!("{:e}", row.loss.value));
            rec.push(if row.loss.infinite { "1" } else { "0" }.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Evaluate every in-budget grid point on the calibration set and pick the
/// highest loss. A vector-valued feature is scored by the mean of its
/// per-component losses.
pub fn tune<F, E>(
    evaluate: F,
    grid: &ParamGrid,
    cost: &dyn CostModel,
    cal: &CalibrationSet,
    budget: Option<f64>,
) -> Result<TuneResult, TunerError>
where
    F: Fn(&ParamVector, &PixelCloud) -> Result<Vec<f64>, E> + Sync,
    E: fmt::Display,
{
    let classes = cal.classes();
    let feasible: Vec<(ParamVector, f64)> = grid
        .points()
        .into_iter()
        .map(|p| {
            let c = cost.cost(&p);
            (p, c)
        })
        .filter(|(_, c)| budget.is_none_or(|b| *c <= b))
        .collect();
    if feasible.is_empty() {
        return Err(TunerError::NoFeasiblePoint(budget.unwrap_or(f64::INFINITY)));
    }

    let report: Vec<ReportRow> = feasible
        .into_par_iter()
        .map(|(point, cost)| {
            let fail = |message: String| TunerError::Evaluation {
                point: point.to_string(),
                message,
            };
            let mut columns: Vec<Vec<f64>> = Vec::new();
            for (cloud, _) in &cal.items {
                let v = evaluate(&point, cloud).map_err(|e| fail(e.to_string()))?;
                if columns.is_empty() {
                    columns = vec![Vec::with_capacity(cal.items.len()); v.len()];
                }
                if v.len() != columns.len() {
                    return Err(fail(format!("feature width changed to {}", v.len())));
                }
                for (col, x) in columns.iter_mut().zip(v) {
                    col.push(x);
                }
            }
            let losses = columns
                .iter()
                .map(|col| separability_loss(col, &classes))
                .collect::<Result<Vec<_>, _>>()?;
            let loss = if losses.is_empty() {
                LossValue::finite(0.0)
            } else if losses.iter().any(|l| l.infinite) {
                LossValue::INFINITE
            } else {
                LossValue::finite(losses.iter().map(|l| l.value).sum::<f64>() / losses.len() as f64)
            };
            Ok(ReportRow { point, cost, loss })
        })
        .collect::<Result<_, _>>()?;

    let mut best = 0;
    for (i, row) in report.iter().enumerate().skip(1) {
        let b = &report[best];
        let better = match row.loss.rank().partial_cmp(&b.loss.rank()) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Equal) => row.cost < b.cost,
            _ => false,
        };
        if better {
            best = i;
        }
    }
    let b = &report[best];
    Ok(TuneResult {
        best: b.point.clone(),
        best_loss: b.loss,
        best_cost: b.cost,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(name: &str, v: &[i64]) -> ParamAxis {
        ParamAxis {
            name: name.into(),
            values: v.iter().map(|&x| ParamValue::Int(x)).collect(),
        }
    }

    fn sets(name: &str, v: &[&[&str]]) -> ParamAxis {
        ParamAxis {
            name: name.into(),
            values: v
                .iter()
                .map(|s| ParamValue::Set(s.iter().map(|e| e.to_string()).collect()))
                .collect(),
        }
    }

    /// Eq-free restatement of the loss for the oracle: sums over explicit
    /// class partitions written out by hand.
    fn oracle(groups: &[&[f64]]) -> f64 {
        let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        let n = all.len() as f64;
        let k = groups.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let grand = mean(&all);
        let mut b = 0.0;
        let mut w = 0.0;
        for g in groups {
            let m = mean(g);
            b += g.len() as f64 * (m - grand) * (m - grand);
            for x in *g {
                w += (x - m) * (x - m);
            }
        }
        (n - k) * b / ((k - 1.0) * w)
    }

    #[test]
    fn loss_examples() {
        let l = separability_loss(&[0.0, 1.0, 2.0, 3.0], &[1, 1, 2, 2]).unwrap();
        assert_eq!(l, LossValue::finite(8.0));
        assert_eq!(oracle(&[&[0.0, 1.0], &[2.0, 3.0]]), 8.0);
        let l = separability_loss(&[0.0, 0.0, 1.0, 1.0], &[1, 1, 2, 2]).unwrap();
        assert_eq!(l, LossValue::INFINITE);
        let l = separability_loss(&[5.0; 4], &[1, 1, 2, 2]).unwrap();
        assert_eq!(l, LossValue::finite(0.0));
    }

    #[test]
    fn loss_errors() {
        assert!(matches!(
            separability_loss(&[1.0], &[1, 2]),
            Err(TunerError::Shape { expected: 2, got: 1 })
        ));
        assert!(matches!(
            separability_loss(&[1.0, 2.0], &[1, 1]),
            Err(TunerError::ClassCount(1))
        ));
    }

    #[test]
    fn three_class_loss_matches_oracle() {
        let g: [&[f64]; 3] = [&[1.0, 2.5, 0.5], &[4.0, 3.0], &[9.0, 7.5, 8.0, 6.0]];
        let vals: Vec<f64> = g.iter().flat_map(|x| x.iter().copied()).collect();
        let cls = [1, 1, 1, 2, 2, 3, 3, 3, 3];
        let l = separability_loss(&vals, &cls).unwrap();
        assert!((l.value - oracle(&g)).abs() < 1e-12 * l.value);
    }

    #[test]
    fn grid_order_and_chains() {
        let g = build_grid(vec![ints("ng", &[8, 16]), sets("angles", &[&["0"], &["0", "45", "90", "135"]])])
            .unwrap();
        assert_eq!(g.len(), 4);
        let cm = GlcmCostModel::new(32, 32);
        let c: Vec<f64> = g.points().iter().map(|p| cm.cost(p)).collect();
        assert!(c[0] < c[1] && c[0] < c[2] && c[1] < c[3] && c[2] < c[3]);

        assert!(build_grid(vec![sets("angles", &[&["0"], &["45", "90"]])]).is_err());
        assert!(build_grid(vec![ints("ng", &[8, 8])]).is_err());
        assert!(build_grid(vec![ints("ng", &[])]).is_err());
    }

    #[test]
    fn six_point_cost_table() {
        let g = build_grid(vec![ints("ng", &[4, 8, 16]), ints("d", &[1, 2])]).unwrap();
        let cm = GlcmCostModel::new(20, 12);
        for p in 0..3 {
            for q in 0..2 {
                let at = |a: usize, b: usize| cm.cost(&g.point(a * 2 + b));
                if p + 1 < 3 {
                    assert!(at(p, q) < at(p + 1, q));
                }
                if q + 1 < 2 {
                    assert!(at(p, q) < at(p, q + 1));
                }
            }
        }
    }

    #[test]
    fn grid_spec_parsing() {
        let g = parse_grid_spec("ng=2,4,8; d=1; angles=0|0,45,90,135", &["angles"]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(1).to_string(), "ng=2;d=1;angles=0,45,90,135");
        assert!(parse_grid_spec("ng=4,2", &[]).is_err());
        assert!(parse_grid_spec("ng", &[]).is_err());
        assert!(parse_grid_spec("angles=0,45|90", &["angles"]).is_err());
    }

    fn cloud(v: u16) -> Arc<PixelCloud> {
        Arc::new(PixelCloud::from_triples(1, &[(0, 0, v)]).unwrap())
    }

    #[test]
    fn stratified_sampling() {
        let mut full = Vec::new();
        for i in 0..50 {
            full.push((cloud(i), 1));
        }
        for i in 0..5 {
            full.push((cloud(100 + i), 2));
        }
        let a = sample_calibration(&full, 0.2, 7).unwrap();
        let b = sample_calibration(&full, 0.2, 7).unwrap();
        assert_eq!(a.class_counts(), BTreeMap::from([(1, 10), (2, 2)]));
        let ids = |s: &CalibrationSet| -> Vec<u16> { s.items.iter().map(|(c, _)| c.pixels()[0].intensity).collect() };
        assert_eq!(ids(&a), ids(&b));

        let all = sample_calibration(&full, 1.0, 3).unwrap();
        assert_eq!(ids(&all), (0..50).chain(100..105).collect::<Vec<u16>>());

        assert!(matches!(sample_calibration(&full, 0.0, 1), Err(TunerError::InvalidFraction(_))));
        full.push((cloud(9), 3));
        assert!(matches!(
            sample_calibration(&full, 0.5, 1),
            Err(TunerError::InsufficientClassItems { class: 3, count: 1 })
        ));
    }

    #[test]
    fn hundred_per_class_tenth() {
        let full: Vec<_> = (0..200).map(|i| (cloud(i), (i % 2) as u32)).collect();
        let s = sample_calibration(&full, 0.1, 11).unwrap();
        assert_eq!(s.class_counts(), BTreeMap::from([(0, 10), (1, 10)]));
    }

    #[test]
    fn single_point_and_budget() {
        let g = build_grid(vec![ints("ng", &[4])]).unwrap();
        let cal = CalibrationSet::new(vec![(cloud(1), 1), (cloud(2), 1), (cloud(5), 2), (cloud(7), 2)]).unwrap();
        let eval = |_: &ParamVector, c: &PixelCloud| Ok::<_, String>(vec![c.pixels()[0].intensity as f64]);
        let cm = GlcmCostModel::new(1, 1);
        let r = tune(eval, &g, &cm, &cal, None).unwrap();
        assert_eq!(r.best, g.point(0));
        assert_eq!(r.best_loss, separability_loss(&[1.0, 2.0, 5.0, 7.0], &[1, 1, 2, 2]).unwrap());
        assert!(matches!(tune(eval, &g, &cm, &cal, Some(1.0)), Err(TunerError::NoFeasiblePoint(_))));
    }

    #[test]
    fn picks_highest_loss() {
        // the feature is only informative at ng=8
        let g = build_grid(vec![ints("ng", &[2, 4, 8])]).unwrap();
        let cal = CalibrationSet::new(vec![(cloud(1), 1), (cloud(2), 1), (cloud(5), 2), (cloud(7), 2)]).unwrap();
        let eval = |p: &ParamVector, c: &PixelCloud| {
            let ng = p.get("ng").unwrap().as_f64().unwrap();
            let v = c.pixels()[0].intensity as f64;
            Ok::<_, String>(vec![if ng == 8.0 { v } else { (v as u32 % 2) as f64 }])
        };
        let r = tune(eval, &g, &GlcmCostModel::new(4, 4), &cal, None).unwrap();
        assert_eq!(r.best.get("ng"), Some(&ParamValue::Int(8)));
        assert!(r.report.iter().all(|row| row.loss.rank() <= r.best_loss.rank()));
        let mut buf = Vec::new();
        r.write_report(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("ng,cost,loss,is_infinite"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn vector_loss_is_mean() {
        let g = build_grid(vec![ints("ng", &[2])]).unwrap();
        let cal = CalibrationSet::new(vec![(cloud(0), 1), (cloud(1), 1), (cloud(2), 2), (cloud(3), 2)]).unwrap();
        let eval = |_: &ParamVector, c: &PixelCloud| {
            let v = c.pixels()[0].intensity as f64;
            Ok::<_, String>(vec![v, v * v])
        };
        let r = tune(eval, &g, &GlcmCostModel::new(1, 1), &cal, None).unwrap();
        let second = separability_loss(&[0.0, 1.0, 4.0, 9.0], &[1, 1, 2, 2]).unwrap().value;
        assert_eq!(r.best_loss.value, (8.0 + second) / 2.0);
    }
}
