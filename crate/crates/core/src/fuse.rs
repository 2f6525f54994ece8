//! Panoptic fusion of class-agnostic instance masks with a semantic map.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::backproject::InstanceMask;
use crate::error::{Error, Result};
use crate::panoptic::{CategoryTable, PanopticMap, Segment, VOID_SEGMENT};
use crate::Pixel;

/// Minimum full-resolution stuff area used for COCO.
pub const COCO_MIN_STUFF_AREA: u64 = 4096;
/// Minimum full-resolution stuff area used for Cityscapes.
pub const CITYSCAPES_MIN_STUFF_AREA: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuseConfig {
    /// Stuff segments smaller than this many full-resolution pixels become void.
    pub min_stuff_area: u64,
    /// Full-resolution pixels per working-resolution pixel along one axis.
    pub scale: u64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            min_stuff_area: COCO_MIN_STUFF_AREA,
            scale: 4,
        }
    }
}

/// Most frequent thing category under the mask; ties go to the lower id.
///
/// Returns `None` when no mask pixel carries a thing category.
pub fn assign_category(
    mask: &[Pixel],
    semantic: &Array2<u32>,
    thing_ids: &BTreeSet<u32>,
) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &p in mask {
        let cat = semantic[p];
        if thing_ids.contains(&cat) {
            *counts.entry(cat).or_insert(0) += 1;
        }
    }
    let mut best: Option<(u32, usize)> = None;
    for (cat, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((cat, n));
        }
    }
    best.map(|(cat, _)| cat)
}

/// Merges masks and semantics into a panoptic map.
///
/// Thing segments take ids `1..` in mask order; stuff segments follow in
/// ascending category order. Thing-labeled pixels outside every mask, unknown
/// categories, unlabeled pixels and small stuff all end up void.
pub fn fuse(
    masks: &[InstanceMask],
    semantic: &Array2<u32>,
    categories: &CategoryTable,
    cfg: &FuseConfig,
) -> Result<PanopticMap> {
    let thing_ids = categories.thing_ids();
    let mut segment_ids = Array2::from_elem(semantic.dim(), VOID_SEGMENT);
    let mut segments = Vec::new();
    let mut next_id = 1u32;

    for mask in masks {
        if mask.pixels.is_empty() {
            continue;
        }
        let Some(category) = assign_category(&mask.pixels, semantic, &thing_ids) else {
            continue;
        };
        for &p in &mask.pixels {
            if segment_ids[p] != VOID_SEGMENT {
                return Err(Error::InvalidArgument(format!(
                    "instance masks overlap at {p:?}"
                )));
            }
            segment_ids[p] = next_id;
        }
        segments.push(Segment {
            id: next_id,
            category,
            area: mask.pixels.len() as u64,
            is_thing: true,
        });
        next_id += 1;
    }

    let mut stuff: BTreeMap<u32, Vec<Pixel>> = BTreeMap::new();
    for (p, &cat) in semantic.indexed_iter() {
        if segment_ids[p] == VOID_SEGMENT && categories.is_thing(cat) == Some(false) {
            stuff.entry(cat).or_default().push(p);
        }
    }
    let scale2 = cfg.scale * cfg.scale;
    for (category, pixels) in stuff {
        let area = pixels.len() as u64;
        if area * scale2 < cfg.min_stuff_area {
            continue;
        }
        for &p in &pixels {
            segment_ids[p] = next_id;
        }
        segments.push(Segment {
            id: next_id,
            category,
            area,
            is_thing: false,
        });
        next_id += 1;
    }

    Ok(PanopticMap {
        segment_ids,
        segments,
    })
}
