//! Region shape descriptors.
//!
//! Geometry uses pixel centres on the integer lattice. Perimeter is the
//! length of the 8-connected contour chain with unit axis steps and sqrt(2)
//! diagonal steps. Ellipse axes come from the central second-moment matrix
//! with the 1/12 per-pixel variance of a unit square added to each
//! diagonal term, giving `axis = 4 sqrt(lambda)`.

use std::f64::consts::PI;

use crate::roistore::{ContourPath, ConvexHull, PixelCloud};

use super::moments::moments;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeFeatureSet {
    pub area: f64,
    pub perimeter: f64,
    pub bbox_x: f64,
    pub bbox_y: f64,
    pub bbox_w: f64,
    pub bbox_h: f64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub circularity: f64,
    pub extent: f64,
    pub aspect_ratio: f64,
    pub convex_area: f64,
    pub solidity: f64,
    pub equivalent_diameter: f64,
    pub major_axis_len: f64,
    pub minor_axis_len: f64,
    pub eccentricity: f64,
    pub elongation: f64,
    pub orientation: f64,
    pub euler_number: i64,
    pub feret_max: f64,
    pub feret_min: f64,
    /// top-left, top-right, right-top, right-bottom, bottom-right,
    /// bottom-left, left-bottom, left-top
    pub extrema: [(f64, f64); 8],
}

const EXTREMA_TAGS: [&str; 8] = ["TL", "TR", "RT", "RB", "BR", "BL", "LB", "LT"];

impl ShapeFeatureSet {
    pub fn names() -> Vec<String> {
        let mut out: Vec<String> = [
            "AREA_PIXELS_COUNT",
            "PERIMETER",
            "BBOX_XMIN",
            "BBOX_YMIN",
            "BBOX_WIDTH",
            "BBOX_HEIGHT",
            "CENTROID_X",
            "CENTROID_Y",
            "CIRCULARITY",
            "FORMFACTOR",
            "EXTENT",
            "ASPECT_RATIO",
            "CONVEX_HULL_AREA",
            "SOLIDITY",
            "EQUIVALENT_DIAMETER",
            "MAJOR_AXIS_LENGTH",
            "MINOR_AXIS_LENGTH",
            "ECCENTRICITY",
            "ELONGATION",
            "ORIENTATION",
            "EULER_NUMBER",
            "MAX_FERET_DIAMETER",
            "MIN_FERET_DIAMETER",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for tag in EXTREMA_TAGS {
            out.push(format!("EXTREMA_{tag}_X"));
            out.push(format!("EXTREMA_{tag}_Y"));
        }
        out
    }

    /// Values in [`Self::names`] order; circularity is emitted twice, once
    /// under its form-factor alias.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![
            self.area,
            self.perimeter,
            self.bbox_x,
            self.bbox_y,
            self.bbox_w,
            self.bbox_h,
            self.centroid_x,
            self.centroid_y,
            self.circularity,
            self.circularity,
            self.extent,
            self.aspect_ratio,
            self.convex_area,
            self.solidity,
            self.equivalent_diameter,
            self.major_axis_len,
            self.minor_axis_len,
            self.eccentricity,
            self.elongation,
            self.orientation,
            self.euler_number as f64,
            self.feret_max,
            self.feret_min,
        ];
        for (x, y) in self.extrema {
            out.push(x);
            out.push(y);
        }
        out
    }
}

/// Eigenvalues (descending) of the symmetric matrix [[a, b], [b, c]].
pub fn symmetric_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = (a + c) / 2.0;
    let r = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    (mean + r, mean - r)
}

/// Components (8-connected foreground) minus holes (4-connected background
/// regions not reaching the padded border).
pub fn euler_number(cloud: &PixelCloud) -> i64 {
    let occ = cloud.padded_occupancy();
    let (_, components) = occ.components8();
    let (bg, bg_count) = occ.background_components4();
    // padding guarantees cell 0 belongs to the outer background
    let outer = bg[0];
    debug_assert!(outer != 0);
    let holes = (1..=bg_count).filter(|&l| l != outer).count() as i64;
    components as i64 - holes
}

fn extrema(cloud: &PixelCloud) -> [(f64, f64); 8] {
    let bb = cloud.bbox();
    let px = cloud.pixels();
    let pick = |on: &dyn Fn(u32, u32) -> bool, key: &dyn Fn(u32, u32) -> i64| {
        px.iter()
            .filter(|p| on(p.x, p.y))
            .min_by_key(|p| key(p.x, p.y))
            .map(|p| (p.x as f64, p.y as f64))
            .expect("bbox extremes are attained")
    };
    let top = |_x: u32, y: u32| y == bb.y_min;
    let bottom = |_x: u32, y: u32| y == bb.y_max;
    let left = |x: u32, _y: u32| x == bb.x_min;
    let right = |x: u32, _y: u32| x == bb.x_max;
    [
        pick(&top, &|x, _| x as i64),
        pick(&top, &|x, _| -(x as i64)),
        pick(&right, &|_, y| y as i64),
        pick(&right, &|_, y| -(y as i64)),
        pick(&bottom, &|x, _| -(x as i64)),
        pick(&bottom, &|x, _| x as i64),
        pick(&left, &|_, y| -(y as i64)),
        pick(&left, &|_, y| y as i64),
    ]
}

pub fn shape_features(cloud: &PixelCloud, contour: &ContourPath, hull: &ConvexHull) -> ShapeFeatureSet {
    let area = cloud.count() as f64;
    let bb = cloud.bbox();
    let (bw, bh) = (bb.width() as f64, bb.height() as f64);

    let (perimeter, circularity) = if cloud.count() == 1 {
        (4.0, 1.0)
    } else {
        let p = contour.chain_length();
        // chain lengths between pixel centres undershoot on small shapes
        (p, (4.0 * PI * area / (p * p)).min(1.0))
    };

    let m = moments(cloud, false).expect("unit mass is never zero");
    let (cx, cy) = m.centroid;
    let a = m.central[2][0] / area + 1.0 / 12.0;
    let c = m.central[0][2] / area + 1.0 / 12.0;
    let b = m.central[1][1] / area;
    let (l1, l2) = symmetric_eigenvalues(a, b, c);
    let l2 = l2.max(0.0);
    let major = 4.0 * l1.sqrt();
    let minor = 4.0 * l2.sqrt();
    let eccentricity = if l1 > 0.0 { (1.0 - l2 / l1).max(0.0).sqrt() } else { 0.0 };
    let orientation = {
        let t = 0.5 * (2.0 * b).atan2(a - c);
        // atan2 yields (-pi, pi]; halving maps onto (-pi/2, pi/2]
        if t <= -PI / 2.0 {
            t + PI
        } else {
            t
        }
    };

    let convex_area = hull.lattice_area() as f64;
    let solidity = if convex_area > 0.0 { area / convex_area } else { 0.0 };
    let (feret_max, feret_min) = hull.feret();

    ShapeFeatureSet {
        area,
        perimeter,
        bbox_x: bb.x_min as f64,
        bbox_y: bb.y_min as f64,
        bbox_w: bw,
        bbox_h: bh,
        centroid_x: cx,
        centroid_y: cy,
        circularity,
        extent: area / (bw * bh),
        aspect_ratio: bw / bh,
        convex_area,
        solidity,
        equivalent_diameter: (4.0 * area / PI).sqrt(),
        major_axis_len: major,
        minor_axis_len: minor,
        eccentricity,
        elongation: if major > 0.0 { minor / major } else { 0.0 },
        orientation,
        euler_number: euler_number(cloud),
        feret_max,
        feret_min,
        extrema: extrema(cloud),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roistore::{convex_hull, trace_contour};

    fn cloud(cells: &[(u32, u32)]) -> PixelCloud {
        let t: Vec<_> = cells.iter().map(|&(x, y)| (x, y, 1)).collect();
        PixelCloud::from_triples(1, &t).unwrap()
    }

    fn shape(cells: &[(u32, u32)]) -> ShapeFeatureSet {
        let c = cloud(cells);
        shape_features(&c, &trace_contour(&c), &convex_hull(&c))
    }

    fn rect(w: u32, h: u32) -> Vec<(u32, u32)> {
        (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect()
    }

    #[test]
    fn solid_square() {
        let s = shape(&rect(10, 10));
        assert_eq!(s.area, 100.0);
        assert_eq!((s.bbox_w, s.bbox_h), (10.0, 10.0));
        assert_eq!(s.extent, 1.0);
        assert_eq!(s.euler_number, 1);
        assert!((s.feret_max - 9.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(s.feret_min, 9.0);
        assert_eq!(s.convex_area, 100.0);
        assert_eq!(s.solidity, 1.0);
        assert_eq!(s.perimeter, 36.0);
        assert!((s.major_axis_len - s.minor_axis_len).abs() < 1e-12);
        assert!(s.circularity <= 1.0);
    }

    #[test]
    fn ring_has_one_hole() {
        let cells: Vec<_> = rect(3, 3).into_iter().filter(|&c| c != (1, 1)).collect();
        assert_eq!(shape(&cells).euler_number, 0);
    }

    #[test]
    fn two_pieces_two_holes() {
        let mut cells: Vec<_> = rect(3, 3).into_iter().filter(|&c| c != (1, 1)).collect();
        cells.extend(rect(3, 3).into_iter().map(|(x, y)| (x + 5, y)).filter(|&c| c != (6, 1)));
        cells.push((10, 10));
        assert_eq!(shape(&cells).euler_number, 3 - 2);
    }

    // Oracle: covariance of the pixel centres solved with the quadratic
    // formula on the characteristic polynomial, independent of the shape code.
    #[test]
    fn line_axes_match_eigen_oracle() {
        let cells = rect(10, 1);
        let s = shape(&cells);
        let n = cells.len() as f64;
        let mx = cells.iter().map(|c| c.0 as f64).sum::<f64>() / n;
        let sxx = cells.iter().map(|c| (c.0 as f64 - mx).powi(2)).sum::<f64>() / n + 1.0 / 12.0;
        let syy = 1.0 / 12.0;
        // diagonal matrix: eigenvalues are the diagonal entries
        let trace = sxx + syy;
        let det = sxx * syy;
        let disc = (trace * trace - 4.0 * det).sqrt();
        let (l1, l2) = ((trace + disc) / 2.0, (trace - disc) / 2.0);
        assert!((s.major_axis_len - 4.0 * l1.sqrt()).abs() < 1e-12);
        assert!((s.minor_axis_len - 4.0 * l2.sqrt()).abs() < 1e-12);
        assert!((s.eccentricity - (1.0 - l2 / l1).sqrt()).abs() < 1e-12);
        assert!(s.major_axis_len > 5.0 * s.minor_axis_len);
        assert!(s.eccentricity < 1.0);
        assert_eq!(s.orientation, 0.0);
        assert_eq!(s.convex_area, 0.0);
        assert_eq!(s.solidity, 0.0);
    }

    #[test]
    fn vertical_line_orientation() {
        let s = shape(&rect(1, 10));
        assert!((s.orientation - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_conventions() {
        let s = shape(&[(4, 4)]);
        assert_eq!(s.perimeter, 4.0);
        assert_eq!(s.circularity, 1.0);
        assert_eq!(s.feret_max, 0.0);
        assert_eq!(s.euler_number, 1);
    }

    #[test]
    fn extrema_of_plus() {
        let s = shape(&[(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)]);
        assert_eq!(s.extrema[0], (1.0, 0.0));
        assert_eq!(s.extrema[2], (2.0, 1.0));
        assert_eq!(s.extrema[4], (1.0, 2.0));
        assert_eq!(s.extrema[6], (0.0, 1.0));
    }

    #[test]
    fn names_match_values() {
        let s = shape(&rect(3, 2));
        assert_eq!(ShapeFeatureSet::names().len(), s.values().len());
    }
}
