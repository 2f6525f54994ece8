//! Voting-filter and query-filter lookup tables.
//!
//! A [`GridSpec`] describes a square `M x M` neighborhood split into nested
//! square rings. Ring `l` spans the odd extent `e_l` and is tiled by square
//! cells of odd side `s_l`; the area already covered by ring `l - 1` is cut
//! out. The innermost ring is a full square.
//!
//! Cell indices are assigned ring by ring from the center outward, and
//! row-major (by the cell's top-left offset) within a ring.
//!
//! The default layout has extents `(3, 27, 81, 243)` with cell sizes
//! `(1, 3, 9, 27)`. It is the only nested radial layout that reaches
//! `M = 243` with exactly 233 cells drawn from those four sizes:
//! `9 + (9^2 - 1^2) + (9^2 - 3^2) + (9^2 - 3^2) = 9 + 80 + 72 + 72`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ring of a radial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    /// Side length of the square this ring reaches out to, in pixels.
    pub extent: u32,
    /// Side length of the cells tiling this ring.
    pub cell_size: u32,
}

impl Ring {
    pub const fn new(extent: u32, cell_size: u32) -> Self {
        Self { extent, cell_size }
    }
}

/// Radial discretization of an `M x M` neighborhood into `K` cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rings: Vec<Ring>,
}

impl GridSpec {
    pub fn new(rings: Vec<Ring>) -> Self {
        Self { rings }
    }

    /// 233 cells over 243 x 243, sizes 1, 3, 9, 27.
    pub fn default_scheme() -> Self {
        Self::new(vec![
            Ring::new(3, 1),
            Ring::new(27, 3),
            Ring::new(81, 9),
            Ring::new(243, 27),
        ])
    }

    /// 41 cells over 243 x 243: one 3 x 3 shell of cells per ring.
    pub fn simple_scheme() -> Self {
        Self::new(vec![
            Ring::new(3, 1),
            Ring::new(9, 3),
            Ring::new(27, 9),
            Ring::new(81, 27),
            Ring::new(243, 81),
        ])
    }

    /// 225 evenly sized cells of side 15 over 225 x 225.
    pub fn uniform_scheme() -> Self {
        Self::new(vec![Ring::new(225, 15)])
    }

    /// 17 cells over 9 x 9.
    pub fn toy_scheme() -> Self {
        Self::new(vec![Ring::new(3, 1), Ring::new(9, 3)])
    }

    /// Filter side length `M`, or 0 for an empty spec.
    pub fn side(&self) -> u32 {
        self.rings.last().map_or(0, |r| r.extent)
    }

    /// Cell count from the closed form, without building the table.
    pub fn cell_count(&self) -> usize {
        let mut k = 0usize;
        let mut inner = 0u32;
        for ring in &self.rings {
            let outer_n = (ring.extent / ring.cell_size) as usize;
            let inner_n = (inner / ring.cell_size) as usize;
            k += outer_n * outer_n - inner_n * inner_n;
            inner = ring.extent;
        }
        k
    }

    pub fn validate(&self) -> Result<()> {
        if self.rings.is_empty() {
            return Err(Error::InvalidGrid {
                ring: 0,
                reason: "grid has no rings".into(),
            });
        }
        let mut inner = 0u32;
        for (i, ring) in self.rings.iter().enumerate() {
            let bad = |reason: String| Error::InvalidGrid { ring: i, reason };
            if ring.extent == 0 || ring.extent % 2 == 0 {
                return Err(bad(format!(
                    "extent {} must be odd and positive",
                    ring.extent
                )));
            }
            if ring.cell_size == 0 || ring.cell_size % 2 == 0 {
                return Err(bad(format!(
                    "cell size {} must be odd and positive",
                    ring.cell_size
                )));
            }
            if ring.extent <= inner {
                return Err(bad(format!(
                    "extent {} must exceed the previous extent {}",
                    ring.extent, inner
                )));
            }
            if i == 0 {
                if ring.extent % ring.cell_size != 0 {
                    return Err(bad(format!(
                        "extent {} is not divisible by cell size {}",
                        ring.extent, ring.cell_size
                    )));
                }
            } else {
                let width = (ring.extent - inner) / 2;
                if !width.is_multiple_of(ring.cell_size) {
                    return Err(bad(format!(
                        "annulus width {} is not divisible by cell size {}",
                        width, ring.cell_size
                    )));
                }
                if !inner.is_multiple_of(ring.cell_size) {
                    return Err(bad(format!(
                        "inner extent {} is not divisible by cell size {}",
                        inner, ring.cell_size
                    )));
                }
            }
            inner = ring.extent;
        }
        Ok(())
    }
}

/// Named grid layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    Default,
    Simple,
    Uniform,
    Toy,
}

impl GridScheme {
    pub const ALL: [GridScheme; 4] = [Self::Default, Self::Simple, Self::Uniform, Self::Toy];

    pub fn spec(self) -> GridSpec {
        match self {
            Self::Default => GridSpec::default_scheme(),
            Self::Simple => GridSpec::simple_scheme(),
            Self::Uniform => GridSpec::uniform_scheme(),
            Self::Toy => GridSpec::toy_scheme(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::Simple => "simple",
            Self::Uniform => "uniform",
            Self::Toy => "toy",
        }
    }
}

impl fmt::Display for GridScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GridScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grid scheme `{s}`")))
    }
}

/// Translation-invariant `M x M` lookup table from offsets to cell indices.
///
/// Offsets are `(dy, dx)` with both components in `[-r, r]`, `r = (M - 1) / 2`.
/// For a voting filter the offset points from a pixel to a candidate centroid.
/// For a query filter (see [`invert_grid`]) it points from a centroid to a pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellTable {
    spec: GridSpec,
    side: usize,
    radius: i32,
    index: Vec<u32>,
    centers: Vec<(i32, i32)>,
    sizes: Vec<u32>,
    by_size: Vec<(u32, Vec<usize>)>,
}

impl CellTable {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Filter side length `M`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Largest offset magnitude covered per axis, `(M - 1) / 2`.
    pub fn radius(&self) -> i32 {
        self.radius
    }

    /// Number of cells `K`; the abstention class is `K`.
    pub fn num_cells(&self) -> usize {
        self.sizes.len()
    }

    /// Cell containing `offset`, or `None` when it lies outside the window.
    #[inline]
    pub fn lookup(&self, offset: (i64, i64)) -> Option<usize> {
        let r = self.radius as i64;
        let (dy, dx) = offset;
        if dy < -r || dy > r || dx < -r || dx > r {
            return None;
        }
        let row = (dy + r) as usize;
        let col = (dx + r) as usize;
        Some(self.index[row * self.side + col] as usize)
    }

    /// Offset of the center pixel of `cell`.
    pub fn cell_center(&self, cell: usize) -> (i32, i32) {
        self.centers[cell]
    }

    pub fn cell_size(&self, cell: usize) -> u32 {
        self.sizes[cell]
    }

    /// Inclusive offset bounds `(dy0, dx0, dy1, dx1)` of `cell`.
    pub fn cell_bounds(&self, cell: usize) -> (i32, i32, i32, i32) {
        let (cy, cx) = self.centers[cell];
        let h = (self.sizes[cell] / 2) as i32;
        (cy - h, cx - h, cy + h, cx + h)
    }

    /// Cell indices grouped by side length, ascending.
    pub fn cells_by_size(&self) -> &[(u32, Vec<usize>)] {
        &self.by_size
    }

    /// Iterates over every `(offset, cell)` pair of the window in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = ((i32, i32), usize)> + '_ {
        let r = self.radius;
        let side = self.side;
        self.index.iter().enumerate().map(move |(i, &k)| {
            let dy = (i / side) as i32 - r;
            let dx = (i % side) as i32 - r;
            ((dy, dx), k as usize)
        })
    }
}

/// Builds the voting-filter table for `spec`.
pub fn build_grid(spec: &GridSpec) -> Result<CellTable> {
    spec.validate()?;
    let side = spec.side() as usize;
    let radius = (side as i32 - 1) / 2;
    let mut index = vec![u32::MAX; side * side];
    let mut centers = Vec::with_capacity(spec.cell_count());
    let mut sizes = Vec::with_capacity(spec.cell_count());

    let mut inner_half: Option<i32> = None;
    for ring in &spec.rings {
        let s = ring.cell_size as i32;
        let n = (ring.extent / ring.cell_size) as i32;
        let half = (ring.extent as i32 - 1) / 2;
        for i in 0..n {
            for j in 0..n {
                let top = -half + i * s;
                let left = -half + j * s;
                let cy = top + s / 2;
                let cx = left + s / 2;
                if let Some(ih) = inner_half {
                    if cy.abs() <= ih && cx.abs() <= ih {
                        continue;
                    }
                }
                let cell = centers.len() as u32;
                for dy in top..top + s {
                    let row = (dy + radius) as usize * side;
                    for dx in left..left + s {
                        index[row + (dx + radius) as usize] = cell;
                    }
                }
                centers.push((cy, cx));
                sizes.push(ring.cell_size);
            }
        }
        inner_half = Some(half);
    }
    debug_assert!(index.iter().all(|&k| k != u32::MAX));
    debug_assert_eq!(centers.len(), spec.cell_count());

    Ok(CellTable {
        spec: spec.clone(),
        side,
        radius,
        index,
        by_size: group_by_size(&sizes),
        centers,
        sizes,
    })
}

fn group_by_size(sizes: &[u32]) -> Vec<(u32, Vec<usize>)> {
    let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
    for (cell, &s) in sizes.iter().enumerate() {
        match groups.iter_mut().find(|(size, _)| *size == s) {
            Some((_, cells)) => cells.push(cell),
            None => groups.push((s, vec![cell])),
        }
    }
    groups.sort_by_key(|(s, _)| *s);
    groups
}

/// Point reflection of a table about the window center.
///
/// Cell `k` of the result is the mirror image of cell `k` of the input, so
/// `invert_grid(vf).lookup(o) == vf.lookup(-o)`.
pub fn invert_grid(table: &CellTable) -> CellTable {
    let mut index = table.index.clone();
    index.reverse();
    CellTable {
        spec: table.spec.clone(),
        side: table.side,
        radius: table.radius,
        index,
        centers: table.centers.iter().map(|&(y, x)| (-y, -x)).collect(),
        sizes: table.sizes.clone(),
        by_size: table.by_size.clone(),
    }
}
