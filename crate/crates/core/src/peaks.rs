//! Peak regions: connected components of the heatmap above a threshold.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::Heatmap;
use crate::error::Error;
use crate::Pixel;

/// Detection threshold on accumulated votes.
pub const DEFAULT_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "4" | "four" => Ok(Self::Four),
            "8" | "eight" => Ok(Self::Eight),
            _ => Err(Error::InvalidArgument(format!(
                "unknown connectivity `{s}`"
            ))),
        }
    }
}

/// One instance hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakRegion {
    /// Member pixels in raster order.
    pub pixels: Vec<Pixel>,
    pub total_vote: f64,
    /// Inclusive bounding box `(row0, col0, row1, col1)`.
    pub bbox: (usize, usize, usize, usize),
}

impl PeakRegion {
    pub fn bbox_center(&self) -> (f64, f64) {
        let (r0, c0, r1, c1) = self.bbox;
        ((r0 + r1) as f64 / 2.0, (c0 + c1) as f64 / 2.0)
    }

    pub fn contains(&self, p: Pixel) -> bool {
        self.pixels.binary_search(&p).is_ok()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Maximal connected components of `{q : h(q) > threshold}`.
///
/// Regions are ordered by their first pixel in raster order, i.e. by minimum
/// row and then by minimum column within that row.
pub fn find_peaks(h: &Heatmap, threshold: f64, connectivity: Connectivity) -> Vec<PeakRegion> {
    let (rows, cols) = h.dim();
    let above = |r: usize, c: usize| h.votes[(r, c)] > threshold;
    let mut sets = DisjointSet::new(rows * cols);

    for r in 0..rows {
        for c in 0..cols {
            if !above(r, c) {
                continue;
            }
            let i = (r * cols + c) as u32;
            if c > 0 && above(r, c - 1) {
                sets.union(i, i - 1);
            }
            if r > 0 {
                let up = i - cols as u32;
                if above(r - 1, c) {
                    sets.union(i, up);
                }
                if connectivity == Connectivity::Eight {
                    if c > 0 && above(r - 1, c - 1) {
                        sets.union(i, up - 1);
                    }
                    if c + 1 < cols && above(r - 1, c + 1) {
                        sets.union(i, up + 1);
                    }
                }
            }
        }
    }

    let mut slot_of_root = vec![u32::MAX; rows * cols];
    let mut regions: Vec<PeakRegion> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !above(r, c) {
                continue;
            }
            let root = sets.find((r * cols + c) as u32) as usize;
            if slot_of_root[root] == u32::MAX {
                slot_of_root[root] = regions.len() as u32;
                regions.push(PeakRegion {
                    pixels: Vec::new(),
                    total_vote: 0.0,
                    bbox: (r, c, r, c),
                });
            }
            let region = &mut regions[slot_of_root[root] as usize];
            region.pixels.push((r, c));
            region.total_vote += h.votes[(r, c)];
            let b = &mut region.bbox;
            b.0 = b.0.min(r);
            b.1 = b.1.min(c);
            b.2 = b.2.max(r);
            b.3 = b.3.max(c);
        }
    }
    regions
}
