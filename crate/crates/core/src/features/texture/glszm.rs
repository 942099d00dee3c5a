use super::{size_matrix_features, DiscretizedRoi};
use crate::roistore::NEIGHBOURS_8;

/// Zone counts, `counts[g * max_size + (size - 1)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeZoneMatrix {
    pub ng: usize,
    pub max_size: usize,
    pub counts: Vec<u64>,
    pub n_pixels: usize,
}

impl SizeZoneMatrix {
    pub fn zone_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, level: usize, size: usize) -> u64 {
        self.counts[level * self.max_size + size - 1]
    }

    /// Values in [`GLSZM_FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; 16] {
        size_matrix_features(&self.counts, self.ng, self.max_size, self.n_pixels)
    }
}

pub const GLSZM_FEATURE_NAMES: [&str; 16] = [
    "SAE", "LAE", "GLNU", "GLNUN", "SZNU", "SZNUN", "ZP", "GLV", "ZV", "ZE", "LGLZE", "HGLZE",
    "SALGLE", "SAHGLE", "LALGLE", "LAHGLE",
];

/// Zones are 8-connected sets of in-ROI pixels sharing a level.
pub fn glszm(roi: &DiscretizedRoi) -> SizeZoneMatrix {
    let ng = roi.ng();
    let (w, h) = (roi.width(), roi.height());
    let n_pixels = roi.pixel_count();
    let max_size = n_pixels.max(1);
    let mut counts = vec![0u64; ng * max_size];
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    for (x, y, g) in roi.iter_levels() {
        let idx = y as usize * w + x as usize;
        if seen[idx] {
            continue;
        }
        seen[idx] = true;
        stack.push((x, y));
        let mut size = 0;
        while let Some((cx, cy)) = stack.pop() {
            size += 1;
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (cx + dx, cy + dy);
                if roi.level(nx, ny) == Some(g) {
                    let n = ny as usize * w + nx as usize;
                    if !seen[n] {
                        seen[n] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        counts[g as usize * max_size + size - 1] += 1;
    }
    SizeZoneMatrix {
        ng,
        max_size,
        counts,
        n_pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(w: usize, h: usize, ng: usize, levels: &[u16]) -> DiscretizedRoi {
        let l: Vec<Option<u16>> = levels.iter().map(|&v| Some(v)).collect();
        DiscretizedRoi::from_levels(w, h, ng, &l).unwrap()
    }

    /// Union-find over the 8-neighbour graph, independent of the stack fill.
    fn oracle_zone_sizes(roi: &DiscretizedRoi) -> Vec<(u16, usize)> {
        let (w, h) = (roi.width(), roi.height());
        let mut parent: Vec<usize> = (0..w * h).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let Some(g) = roi.level(x, y) else { continue };
                for (dx, dy) in [(1, 0), (0, 1), (1, 1), (-1, 1)] {
                    if roi.level(x + dx, y + dy) == Some(g) {
                        let a = find(&mut parent, y as usize * w + x as usize);
                        let b = find(&mut parent, (y + dy) as usize * w + (x + dx) as usize);
                        parent[a] = b;
                    }
                }
            }
        }
        let mut sizes = std::collections::BTreeMap::new();
        for (x, y, g) in roi.iter_levels() {
            let r = find(&mut parent, y as usize * w + x as usize);
            sizes.entry(r).or_insert((g, 0)).1 += 1;
        }
        let mut out: Vec<_> = sizes.into_values().collect();
        out.sort();
        out
    }

    fn zone_list(m: &SizeZoneMatrix) -> Vec<(u16, usize)> {
        let mut out = Vec::new();
        for g in 0..m.ng {
            for s in 1..=m.max_size {
                for _ in 0..m.get(g, s) {
                    out.push((g as u16, s));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn constant_grid_is_one_zone() {
        let m = glszm(&grid(3, 3, 4, &[2; 9]));
        assert_eq!(m.zone_count(), 1);
        assert_eq!(m.get(2, 9), 1);
        assert_eq!(m.features()[6], 1.0 / 9.0);
    }

    #[test]
    fn diagonal_touch_joins() {
        let m = glszm(&grid(2, 2, 2, &[1, 0, 0, 1]));
        assert_eq!(zone_list(&m), vec![(0, 2), (1, 2)]);
    }

    proptest! {
        #[test]
        fn matches_union_find(
            (w, h, cells) in (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(proptest::option::weighted(0.8, 0u16..3), w * h))
            })
        ) {
            let roi = DiscretizedRoi::from_levels(w, h, 3, &cells).unwrap();
            let m = glszm(&roi);
            prop_assert_eq!(zone_list(&m), oracle_zone_sizes(&roi));
            let covered: usize = zone_list(&m).iter().map(|z| z.1).sum();
            prop_assert_eq!(covered, roi.pixel_count());
        }
    }
}
