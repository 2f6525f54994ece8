//! Per-pixel training targets derived from a panoptic annotation.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::CellTable;
use crate::panoptic::{PanopticAnnotation, VOID_SEGMENT};
use crate::Pixel;

/// Voting target of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoteTarget {
    /// Index of the voting-filter cell holding the instance centroid.
    Cell(u32),
    /// Stuff or unlabeled pixel; the extra class `K`.
    Abstain,
    /// Thing pixel whose centroid lies outside the filter window.
    Ignore,
}

impl VoteTarget {
    /// Class index in `0..=K`, `None` for [`VoteTarget::Ignore`].
    pub fn class(self, num_cells: usize) -> Option<usize> {
        match self {
            VoteTarget::Cell(k) => Some(k as usize),
            VoteTarget::Abstain => Some(num_cells),
            VoteTarget::Ignore => None,
        }
    }
}

/// Targets a perfect network would emit at working resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    /// Category per pixel, [`crate::panoptic::VOID`] where unlabeled.
    pub semantic: Array2<u32>,
    pub vote: Array2<VoteTarget>,
    /// Real-valued centroid `(row, col)` of every thing segment.
    pub centroids: BTreeMap<u32, (f64, f64)>,
    pub num_cells: usize,
}

/// Mean pixel coordinate of a mask.
pub fn centroid(mask: &[Pixel]) -> Result<(f64, f64)> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (sr, sc) = mask.iter().fold((0.0f64, 0.0f64), |(sr, sc), &(r, c)| {
        (sr + r as f64, sc + c as f64)
    });
    let n = mask.len() as f64;
    Ok((sr / n, sc / n))
}

/// Rounds a real centroid to the nearest pixel, halves away from zero.
pub fn round_centroid(c: (f64, f64)) -> (i64, i64) {
    (c.0.round() as i64, c.1.round() as i64)
}

pub(crate) fn thing_centroids(ann: &PanopticAnnotation) -> BTreeMap<u32, (f64, f64)> {
    let mut sums: BTreeMap<u32, (f64, f64, u64)> = BTreeMap::new();
    for ((r, c), &id) in ann.ids.indexed_iter() {
        if id == VOID_SEGMENT || !ann.segments[&id].is_thing {
            continue;
        }
        let e = sums.entry(id).or_insert((0.0, 0.0, 0));
        e.0 += r as f64;
        e.1 += c as f64;
        e.2 += 1;
    }
    sums.into_iter()
        .map(|(id, (sr, sc, n))| (id, (sr / n as f64, sc / n as f64)))
        .collect()
}

/// Reads each thing pixel's target cell off the voting filter placed on it.
pub fn encode_labels(ann: &PanopticAnnotation, vf: &CellTable) -> LabelField {
    let centroids = thing_centroids(ann);
    let rounded: BTreeMap<u32, (i64, i64)> = centroids
        .iter()
        .map(|(&id, &c)| (id, round_centroid(c)))
        .collect();

    let vote = Array2::from_shape_fn(ann.ids.dim(), |(r, c)| {
        let id = ann.ids[(r, c)];
        match rounded.get(&id) {
            Some(&(cy, cx)) => match vf.lookup((cy - r as i64, cx - c as i64)) {
                Some(k) => VoteTarget::Cell(k as u32),
                None => VoteTarget::Ignore,
            },
            None => VoteTarget::Abstain,
        }
    });

    LabelField {
        semantic: ann.semantic(),
        vote,
        centroids,
        num_cells: vf.num_cells(),
    }
}
