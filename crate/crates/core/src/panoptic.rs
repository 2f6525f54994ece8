//! Panoptic label maps: ground-truth annotations and pipeline outputs.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category id written into semantic maps for unlabeled pixels.
pub const VOID: u32 = u32::MAX;

/// Segment id reserved for void pixels in segment maps.
pub const VOID_SEGMENT: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub name: String,
    pub is_thing: bool,
}

/// Category vocabulary keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<Category>", into = "Vec<Category>")]
pub struct CategoryTable {
    categories: BTreeMap<u32, Category>,
}

impl From<Vec<Category>> for CategoryTable {
    fn from(list: Vec<Category>) -> Self {
        Self {
            categories: list.into_iter().map(|c| (c.id, c)).collect(),
        }
    }
}

impl From<CategoryTable> for Vec<Category> {
    fn from(table: CategoryTable) -> Self {
        table.categories.into_values().collect()
    }
}

impl CategoryTable {
    pub fn new(list: Vec<Category>) -> Self {
        list.into()
    }

    pub fn get(&self, id: u32) -> Option<&Category> {
        self.categories.get(&id)
    }

    pub fn is_thing(&self, id: u32) -> Option<bool> {
        self.categories.get(&id).map(|c| c.is_thing)
    }

    pub fn thing_ids(&self) -> BTreeSet<u32> {
        self.iter().filter(|c| c.is_thing).map(|c| c.id).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Per-segment record of an annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub category: u32,
    pub is_thing: bool,
}

/// Ground-truth panoptic annotation: a segment id per pixel plus a record per id.
///
/// Id 0 marks unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticAnnotation {
    pub ids: Array2<u32>,
    pub segments: BTreeMap<u32, SegmentInfo>,
}

impl PanopticAnnotation {
    pub fn new(ids: Array2<u32>, segments: BTreeMap<u32, SegmentInfo>) -> Result<Self> {
        let ann = Self { ids, segments };
        ann.validate()?;
        Ok(ann)
    }

    pub fn height(&self) -> usize {
        self.ids.nrows()
    }

    pub fn width(&self) -> usize {
        self.ids.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let areas = self.areas();
        for &id in areas.keys() {
            if !self.segments.contains_key(&id) {
                return Err(Error::InvalidArgument(format!(
                    "segment id {id} has no segment record"
                )));
            }
        }
        for (&id, info) in &self.segments {
            if id == VOID_SEGMENT {
                return Err(Error::InvalidArgument("segment id 0 is reserved".into()));
            }
            if info.is_thing && !areas.contains_key(&id) {
                return Err(Error::InvalidArgument(format!(
                    "thing segment {id} is empty"
                )));
            }
        }
        Ok(())
    }

    /// Pixel count of every nonzero id present in the map.
    pub fn areas(&self) -> BTreeMap<u32, u64> {
        let mut areas = BTreeMap::new();
        for &id in self.ids.iter() {
            if id != VOID_SEGMENT {
                *areas.entry(id).or_insert(0u64) += 1;
            }
        }
        areas
    }

    /// Semantic category per pixel, [`VOID`] where unlabeled.
    pub fn semantic(&self) -> Array2<u32> {
        self.ids.mapv(|id| {
            if id == VOID_SEGMENT {
                VOID
            } else {
                self.segments[&id].category
            }
        })
    }

    /// Nearest-neighbor downsampling by an integer factor.
    ///
    /// Output pixel `(r, c)` takes input pixel `(f r + f / 2, f c + f / 2)`,
    /// clamped to the image. Segments that vanish are dropped.
    pub fn downsample(&self, factor: usize) -> Self {
        let ids = downsample_nearest(&self.ids, factor);
        let present: BTreeSet<u32> = ids.iter().copied().collect();
        let segments = self
            .segments
            .iter()
            .filter(|(id, _)| present.contains(id))
            .map(|(&id, &info)| (id, info))
            .collect();
        Self { ids, segments }
    }
}

pub fn downsample_nearest<T: Copy>(map: &Array2<T>, factor: usize) -> Array2<T> {
    assert!(factor >= 1);
    let (h, w) = map.dim();
    let (oh, ow) = (h.div_ceil(factor), w.div_ceil(factor));
    Array2::from_shape_fn((oh, ow), |(r, c)| {
        let sr = (r * factor + factor / 2).min(h - 1);
        let sc = (c * factor + factor / 2).min(w - 1);
        map[(sr, sc)]
    })
}

/// Replicates each pixel into a `factor x factor` block, cropped to `(height, width)`.
pub fn upsample_nearest<T: Copy>(map: &Array2<T>, factor: usize, dim: (usize, usize)) -> Array2<T> {
    assert!(factor >= 1);
    let (h, w) = map.dim();
    Array2::from_shape_fn(dim, |(r, c)| {
        map[((r / factor).min(h - 1), (c / factor).min(w - 1))]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: u32,
    pub category: u32,
    pub area: u64,
    pub is_thing: bool,
}

/// Panoptic output: segment id per pixel and the segment list.
///
/// Id 0 is void. For things the segment id doubles as the instance id;
/// [`PanopticMap::instance_id_at`] reports 0 for stuff and void.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    pub segment_ids: Array2<u32>,
    pub segments: Vec<Segment>,
}

impl PanopticMap {
    pub fn height(&self) -> usize {
        self.segment_ids.nrows()
    }

    pub fn width(&self) -> usize {
        self.segment_ids.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.segment_ids.dim()
    }

    pub fn segment(&self, id: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }

    /// Category at a pixel, `None` for void.
    pub fn category_at(&self, pixel: (usize, usize)) -> Option<u32> {
        match self.segment_ids[pixel] {
            VOID_SEGMENT => None,
            id => self.segment(id).map(|s| s.category),
        }
    }

    pub fn instance_id_at(&self, pixel: (usize, usize)) -> u32 {
        match self.segment_ids[pixel] {
            VOID_SEGMENT => 0,
            id => match self.segment(id) {
                Some(s) if s.is_thing => id,
                _ => 0,
            },
        }
    }

    /// Per-pixel category, [`VOID`] for void pixels.
    pub fn category_map(&self) -> Array2<u32> {
        let lut: BTreeMap<u32, u32> = self.segments.iter().map(|s| (s.id, s.category)).collect();
        self.segment_ids
            .mapv(|id| lut.get(&id).copied().unwrap_or(VOID))
    }

    /// Builds a map from an annotation, computing areas and dropping empty segments.
    pub fn from_annotation(ann: &PanopticAnnotation) -> Self {
        let areas = ann.areas();
        let segments = ann
            .segments
            .iter()
            .filter_map(|(&id, info)| {
                areas.get(&id).map(|&area| Segment {
                    id,
                    category: info.category,
                    area,
                    is_thing: info.is_thing,
                })
            })
            .collect();
        Self {
            segment_ids: ann.ids.clone(),
            segments,
        }
    }

    pub fn to_annotation(&self) -> PanopticAnnotation {
        PanopticAnnotation {
            ids: self.segment_ids.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| {
                    (
                        s.id,
                        SegmentInfo {
                            category: s.category,
                            is_thing: s.is_thing,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Recomputes segment areas from the id map, keeping the listed order.
    pub fn rederive_segments(&self) -> Vec<Segment> {
        let mut areas: BTreeMap<u32, u64> = BTreeMap::new();
        for &id in self.segment_ids.iter() {
            if id != VOID_SEGMENT {
                *areas.entry(id).or_insert(0) += 1;
            }
        }
        self.segments
            .iter()
            .filter_map(|s| areas.get(&s.id).map(|&area| Segment { area, ..*s }))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.segments {
            if s.id == VOID_SEGMENT || !seen.insert(s.id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate or reserved segment id {}",
                    s.id
                )));
            }
        }
        if self.rederive_segments() != self.segments {
            return Err(Error::InvalidArgument(
                "segment list does not match the id map".into(),
            ));
        }
        Ok(())
    }

    /// Nearest-neighbor upsampling with areas recomputed.
    pub fn upsample(&self, factor: usize, dim: (usize, usize)) -> Self {
        let mut out = Self {
            segment_ids: upsample_nearest(&self.segment_ids, factor, dim),
            segments: self.segments.clone(),
        };
        out.segments = out.rederive_segments();
        out
    }
}
