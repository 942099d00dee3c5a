use super::{Point, PixelCloud};

/// Closed boundary chain. Consecutive points (cyclically) are 8-adjacent and
/// a pixel may repeat where the shape is one pixel thick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContourPath {
    pub points: Vec<Point>,
}

impl ContourPath {
    /// Sum of step lengths around the closed chain: 1 for axis steps,
    /// sqrt(2) for diagonal steps.
    pub fn chain_length(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                if a.x != b.x && a.y != b.y {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                }
            })
            .sum()
    }

    /// Distinct contour pixels in order of first visit.
    pub fn unique_points(&self) -> Vec<Point> {
        let mut seen = std::collections::HashSet::new();
        self.points
            .iter()
            .copied()
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

// Moore neighbourhood ordered by increasing angle in raw (x, y) coordinates,
// starting west.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: i64, dy: i64) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is an 8-neighbour")
}

/// Outer boundary of the largest 8-connected component, found by Moore
/// neighbour tracing with Jacob's stopping rule. The chain starts at the
/// component's first pixel in raster order and runs with positive shoelace
/// area in image coordinates (east along the top edge first).
pub fn trace_contour(cloud: &PixelCloud) -> ContourPath {
    let occ = cloud.padded_occupancy();
    let (labels, n) = occ.components8();
    if n == 0 {
        return ContourPath { points: Vec::new() };
    }
    let mut sizes = vec![0usize; n as usize + 1];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    // first-encountered component wins ties
    let keep = (1..=n)
        .max_by(|&a, &b| sizes[a as usize].cmp(&sizes[b as usize]).then(b.cmp(&a)))
        .unwrap();
    let inside = |cx: i64, cy: i64| {
        cx >= 0
            && cy >= 0
            && (cx as usize) < occ.width
            && (cy as usize) < occ.height
            && labels[cy as usize * occ.width + cx as usize] == keep
    };
    let start_idx = labels.iter().position(|&l| l == keep).unwrap();
    let start = ((start_idx % occ.width) as i64, (start_idx / occ.width) as i64);
    let to_image = |(cx, cy): (i64, i64)| Point::new(cx + occ.origin.x, cy + occ.origin.y);

    // From `c` with background neighbour at ring index `back`, sweep the ring
    // and return the first foreground neighbour plus its new backtrack index.
    let step = |c: (i64, i64), back: usize| -> Option<((i64, i64), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let n = (c.0 + RING[d].0, c.1 + RING[d].1);
            if inside(n.0, n.1) {
                let pd = (d + 7) % 8;
                let prev = (c.0 + RING[pd].0, c.1 + RING[pd].1);
                return Some((n, ring_index(prev.0 - n.0, prev.1 - n.1)));
            }
        }
        None
    };

    let mut points = vec![to_image(start)];
    // the raster-first pixel always has a background west neighbour
    let Some((first, mut back)) = step(start, 0) else {
        return ContourPath { points };
    };
    let mut cur = first;
    points.push(to_image(cur));
    loop {
        let (next, nb) = step(cur, back).expect("a connected pixel has a neighbour");
        if cur == start && next == first {
            points.pop();
            break;
        }
        points.push(to_image(next));
        cur = next;
        back = nb;
    }
    ContourPath { points }
}

#[cfg(test)]
mod tests {
    use super::super::{signed_area, PixelCloud};
    use super::*;
    use std::collections::HashSet;

    fn cloud(cells: &[(u32, u32)]) -> PixelCloud {
        PixelCloud::from_pixels(
            1,
            cells
                .iter()
                .map(|&(x, y)| super::super::Pixel::new(x, y, 1))
                .collect(),
        )
        .unwrap()
    }

    fn adjacent8(a: Point, b: Point) -> bool {
        a != b && (a.x - b.x).abs() <= 1 && (a.y - b.y).abs() <= 1
    }

    // Independent oracle: pixels of the cloud with a 4-neighbour outside it.
    fn boundary_scan(cells: &[(u32, u32)]) -> HashSet<Point> {
        let set: HashSet<(i64, i64)> = cells.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        set.iter()
            .filter(|&&(x, y)| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dx, dy)| !set.contains(&(x + dx, y + dy)))
            })
            .map(|&(x, y)| Point::new(x, y))
            .collect()
    }

    #[test]
    fn single_pixel() {
        let c = trace_contour(&cloud(&[(3, 4)]));
        assert_eq!(c.points, vec![Point::new(3, 4)]);
    }

    #[test]
    fn solid_square_excludes_centre() {
        let cells: Vec<_> = (0..3).flat_map(|y| (0..3).map(move |x| (x, y))).collect();
        let c = trace_contour(&cloud(&cells));
        assert_eq!(c.points.len(), 8);
        assert!(!c.points.contains(&Point::new(1, 1)));
        assert_eq!(c.points[0], Point::new(0, 0));
        assert_eq!(c.points[1], Point::new(1, 0));
        assert!(signed_area(&c.points) > 0.0);
        assert!((c.chain_length() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn two_pixels() {
        let c = trace_contour(&cloud(&[(0, 0), (1, 0)]));
        assert_eq!(c.points, vec![Point::new(0, 0), Point::new(1, 0)]);
        assert!((c.chain_length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l_pentomino_matches_boundary_scan() {
        let cells = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 3)];
        let c = trace_contour(&cloud(&cells));
        let traced: HashSet<Point> = c.points.iter().copied().collect();
        assert_eq!(traced, boundary_scan(&cells));
        let n = c.points.len();
        for i in 0..n {
            assert!(adjacent8(c.points[i], c.points[(i + 1) % n]));
        }
        // walks down the long arm, round the foot, and back up
        assert_eq!(
            c.points,
            vec![
                Point::new(0, 0),
                Point::new(0, 1),
                Point::new(0, 2),
                Point::new(1, 3),
                Point::new(0, 3),
                Point::new(0, 2),
                Point::new(0, 1),
            ]
        );
    }

    #[test]
    fn largest_component_is_traced() {
        let cells = [(0, 0), (5, 5), (6, 5), (5, 6), (6, 6)];
        let c = trace_contour(&cloud(&cells));
        assert_eq!(c.unique_points().len(), 4);
        assert!(!c.points.contains(&Point::new(0, 0)));
    }

    #[test]
    fn random_blobs_trace_boundary() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            // random-walk blob: 8-connected by construction
            let mut set = HashSet::new();
            let (mut x, mut y) = (200i64, 200i64);
            set.insert((x, y));
            for _ in 0..rng.random_range(1..120) {
                x += rng.random_range(-1..=1);
                y += rng.random_range(-1..=1);
                set.insert((x, y));
            }
            let cells: Vec<(u32, u32)> = set.iter().map(|&(x, y)| (x as u32, y as u32)).collect();
            let cl = cloud(&cells);
            let c = trace_contour(&cl);
            let n = c.points.len();
            if n > 1 {
                for i in 0..n {
                    assert!(adjacent8(c.points[i], c.points[(i + 1) % n]));
                }
            }
            let scan = boundary_scan(&cells);
            for p in &c.points {
                assert!(set.contains(&(p.x, p.y)));
                assert!(scan.contains(p), "{p:?} has no outside 4-neighbour");
            }
            assert!(signed_area(&c.points) >= 0.0);
        }
    }
}
