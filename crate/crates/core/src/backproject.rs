//! Backprojection of peak regions into instance masks.
//!
//! A pixel `p` supports peak region `R` when some `q` in `R` falls into one of
//! `p`'s top-ranked voting cells, i.e. `qf(p - q)` is among `p`'s top votes.
//! Contested pixels go to the claimant with the highest total vote. Claimants
//! that sit in the same cell relative to the pixel are first narrowed to the
//! one whose bounding-box center is nearest to the pixel.
//!
//! Instead of sliding the query filter over each region, every pixel tests its
//! own top cells (as rectangles in image space) against each region through a
//! per-region prefix-sum membership table.

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::aggregate::VoteTensor;
use crate::grid::CellTable;
use crate::peaks::PeakRegion;
use crate::Pixel;

/// Default number of ranked votes compared during backprojection.
pub const DEFAULT_TOP_K: usize = 3;

/// Marks an unused top-vote slot.
pub const NO_VOTE: u32 = u32::MAX;

/// Top-ranked cell indices per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopVotes {
    /// `H x W x T`, best first, padded with [`NO_VOTE`].
    pub indices: Array3<u32>,
    /// Pixels whose argmax is abstention (or that are ignored); they vote for nothing.
    pub abstaining: Array2<bool>,
}

impl TopVotes {
    pub fn depth(&self) -> usize {
        self.indices.dim().2
    }

    pub fn dim(&self) -> (usize, usize) {
        self.abstaining.dim()
    }

    /// Valid cells voted by `p`, empty for abstainers.
    pub fn cells(&self, p: Pixel) -> impl Iterator<Item = usize> + '_ {
        let abstain = self.abstaining[p];
        (0..self.depth())
            .map(move |t| self.indices[(p.0, p.1, t)])
            .filter(move |&k| !abstain && k != NO_VOTE)
            .map(|k| k as usize)
    }

    pub fn contains(&self, p: Pixel, cell: usize) -> bool {
        self.cells(p).any(|k| k == cell)
    }
}

/// Ranks each pixel's cells by probability (ties to the lower index).
///
/// Abstention is skipped when ranking and never takes a slot; zero-probability
/// cells are left out.
pub fn top_votes(v: &VoteTensor, depth: usize) -> TopVotes {
    assert!(depth >= 1, "top-k depth must be at least 1");
    let (h, w) = (v.height(), v.width());
    let k = v.channels() - 1;
    let probs = v.probs();
    let mut indices = Array3::from_elem((h, w, depth), NO_VOTE);
    let mut abstaining = Array2::from_elem((h, w), false);
    let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(k);

    for r in 0..h {
        for c in 0..w {
            if v.ignore()[(r, c)] {
                abstaining[(r, c)] = true;
                continue;
            }
            let mut argmax = 0;
            for ch in 1..=k {
                if probs[(r, c, ch)] > probs[(r, c, argmax)] {
                    argmax = ch;
                }
            }
            if argmax == k {
                abstaining[(r, c)] = true;
                continue;
            }
            ranked.clear();
            ranked.extend((0..k).filter_map(|ch| {
                let p = probs[(r, c, ch)];
                (p > 0.0).then_some((p, ch))
            }));
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (t, &(_, ch)) in ranked.iter().take(depth).enumerate() {
                indices[(r, c, t)] = ch as u32;
            }
        }
    }
    TopVotes {
        indices,
        abstaining,
    }
}

/// Pixels collected for one peak region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    /// Index of the source region in the peak list.
    pub peak: usize,
    /// Member pixels in raster order.
    pub pixels: Vec<Pixel>,
}

/// A peak region supported by one of a pixel's top cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Claim {
    pub peak: usize,
    pub cell: usize,
}

struct Membership {
    bbox: (i64, i64, i64, i64),
    stride: usize,
    prefix: Vec<u32>,
}

impl Membership {
    fn new(region: &PeakRegion) -> Self {
        let (r0, c0, r1, c1) = region.bbox;
        let (bh, bw) = (r1 - r0 + 1, c1 - c0 + 1);
        let stride = bw + 1;
        let mut prefix = vec![0u32; (bh + 1) * stride];
        for &(r, c) in &region.pixels {
            prefix[(r - r0 + 1) * stride + (c - c0 + 1)] = 1;
        }
        for i in 1..=bh {
            for j in 1..=bw {
                prefix[i * stride + j] += prefix[(i - 1) * stride + j] + prefix[i * stride + j - 1]
                    - prefix[(i - 1) * stride + j - 1];
            }
        }
        Self {
            bbox: (r0 as i64, c0 as i64, r1 as i64, c1 as i64),
            stride,
            prefix,
        }
    }

    /// Whether any member lies in the inclusive rectangle.
    fn intersects(&self, rect: (i64, i64, i64, i64)) -> bool {
        let (r0, c0, r1, c1) = self.bbox;
        let top = rect.0.max(r0);
        let left = rect.1.max(c0);
        let bottom = rect.2.min(r1);
        let right = rect.3.min(c1);
        if top > bottom || left > right {
            return false;
        }
        let at = |r: i64, c: i64| self.prefix[(r - r0) as usize * self.stride + (c - c0) as usize];
        let count =
            at(bottom + 1, right + 1) + at(top, left) - at(top, right + 1) - at(bottom + 1, left);
        count > 0
    }
}

/// Every claim made by every pixel, in raster order of pixels with at least one claim.
pub fn claims(peaks: &[PeakRegion], tv: &TopVotes, qf: &CellTable) -> Vec<(Pixel, Vec<Claim>)> {
    let members: Vec<Membership> = peaks.iter().map(Membership::new).collect();
    let (h, w) = tv.dim();
    (0..h)
        .into_par_iter()
        .flat_map_iter(|r| {
            let members = &members;
            (0..w).filter_map(move |c| {
                let mut found = Vec::new();
                for cell in tv.cells((r, c)) {
                    // qf cell k is the mirror of vf cell k, so the candidate
                    // centroids form the reflected rectangle around p
                    let (y0, x0, y1, x1) = qf.cell_bounds(cell);
                    let rect = (
                        r as i64 - y1 as i64,
                        c as i64 - x1 as i64,
                        r as i64 - y0 as i64,
                        c as i64 - x0 as i64,
                    );
                    for (peak, m) in members.iter().enumerate() {
                        if m.intersects(rect) {
                            found.push(Claim { peak, cell });
                        }
                    }
                }
                (!found.is_empty()).then_some(((r, c), found))
            })
        })
        .collect()
}

/// Picks the winning peak among a pixel's claims.
pub fn resolve(pixel: Pixel, claims: &[Claim], peaks: &[PeakRegion]) -> usize {
    let dist2 = |peak: usize| {
        let (y, x) = peaks[peak].bbox_center();
        let (dy, dx) = (y - pixel.0 as f64, x - pixel.1 as f64);
        dy * dy + dx * dx
    };

    let mut cells: Vec<usize> = claims.iter().map(|c| c.cell).collect();
    cells.sort_unstable();
    cells.dedup();

    let representatives = cells.iter().map(|&cell| {
        claims
            .iter()
            .filter(|c| c.cell == cell)
            .map(|c| c.peak)
            .min_by(|&a, &b| dist2(a).total_cmp(&dist2(b)).then(a.cmp(&b)))
            .expect("cell has at least one claimant")
    });

    representatives
        .max_by(|&a, &b| {
            peaks[a]
                .total_vote
                .total_cmp(&peaks[b].total_vote)
                .then(b.cmp(&a))
        })
        .expect("pixel has at least one claim")
}

/// One mask per peak region (possibly empty); masks are pairwise disjoint.
pub fn backproject(peaks: &[PeakRegion], tv: &TopVotes, qf: &CellTable) -> Vec<InstanceMask> {
    let mut masks: Vec<InstanceMask> = (0..peaks.len())
        .map(|peak| InstanceMask {
            peak,
            pixels: Vec::new(),
        })
        .collect();
    for (pixel, claimed) in claims(peaks, tv, qf) {
        let winner = resolve(pixel, &claimed, peaks);
        masks[winner].pixels.push(pixel);
    }
    masks
}
