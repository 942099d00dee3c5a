use super::{twice_signed_area, PixelCloud, Point};

/// Convex hull of the pixel centres, vertices counter-clockwise in raw
/// `(x, y)` coordinates (positive shoelace area), collinear points removed.
/// One or two vertices denote a degenerate (point or segment) hull.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvexHull {
    pub vertices: Vec<Point>,
}

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn dist2(a: Point, b: Point) -> i64 {
    (a.x - b.x).pow(2) + (a.y - b.y).pow(2)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Andrew's monotone chain.
pub fn hull_of_points(points: &[Point]) -> ConvexHull {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return ConvexHull { vertices: pts };
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    ConvexHull { vertices: lower }
}

pub fn convex_hull(cloud: &PixelCloud) -> ConvexHull {
    let pts: Vec<Point> = cloud.pixels().iter().map(|p| p.point()).collect();
    hull_of_points(&pts)
}

impl ConvexHull {
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Polygon area through the pixel centres; 0 for degenerate hulls.
    pub fn area(&self) -> f64 {
        twice_signed_area(&self.vertices) as f64 / 2.0
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        match n {
            0 | 1 => 0.0,
            2 => 2.0 * (dist2(self.vertices[0], self.vertices[1]) as f64).sqrt(),
            _ => (0..n)
                .map(|i| (dist2(self.vertices[i], self.vertices[(i + 1) % n]) as f64).sqrt())
                .sum(),
        }
    }

    /// Number of lattice points inside or on the hull (Pick's theorem):
    /// the pixel area of the filled hull. Degenerate hulls count 0.
    pub fn lattice_area(&self) -> u64 {
        if self.is_degenerate() {
            return 0;
        }
        let n = self.vertices.len();
        let twice_a = twice_signed_area(&self.vertices);
        let boundary: i64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                gcd(b.x - a.x, b.y - a.y)
            })
            .sum();
        // I + B = A + B/2 + 1
        ((twice_a + boundary) / 2 + 1) as u64
    }

    /// Inside-or-on test for a lattice point.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => v[0] == p,
            2 => {
                cross(v[0], v[1], p) == 0
                    && p.x >= v[0].x.min(v[1].x)
                    && p.x <= v[0].x.max(v[1].x)
                    && p.y >= v[0].y.min(v[1].y)
                    && p.y <= v[0].y.max(v[1].y)
            }
            n => (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= 0),
        }
    }

    /// Maximum and minimum caliper widths (Feret diameters) by rotating
    /// calipers. The minimum is attained with one caliper flush against an
    /// edge; the maximum is the largest antipodal vertex distance.
    pub fn feret(&self) -> (f64, f64) {
        let v = &self.vertices;
        let n = v.len();
        match n {
            0 | 1 => return (0.0, 0.0),
            2 => return ((dist2(v[0], v[1]) as f64).sqrt(), 0.0),
            _ => {}
        }
        let mut max_d2 = 0i64;
        let mut min_width = f64::INFINITY;
        let mut j = 1;
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            // advance the antipodal pointer while the triangle area grows
            while cross(a, b, v[(j + 1) % n]).abs() > cross(a, b, v[j]).abs() {
                j = (j + 1) % n;
            }
            max_d2 = max_d2.max(dist2(a, v[j])).max(dist2(b, v[j]));
            let edge = (dist2(a, b) as f64).sqrt();
            min_width = min_width.min(cross(a, b, v[j]).abs() as f64 / edge);
        }
        ((max_d2 as f64).sqrt(), min_width)
    }
}
