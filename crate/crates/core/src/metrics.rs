//! Panoptic quality.
//!
//! Per category, a predicted and a ground-truth segment match when their IoU
//! exceeds 0.5; such a match is necessarily unique. With matched pairs `TP`,
//! unmatched predictions `FP` and unmatched ground truth `FN`:
//!
//! ```text
//! PQ = sum_TP IoU / (|TP| + |FP| / 2 + |FN| / 2)
//! SQ = sum_TP IoU / |TP|
//! RQ = |TP| / (|TP| + |FP| / 2 + |FN| / 2)
//! ```
//!
//! Void follows the usual protocol: ground-truth void pixels (id 0) are
//! removed from the union of a pair, and an unmatched prediction that is more
//! than half void is not counted as a false positive. Predictions whose
//! category is not in the vocabulary are false positives of that unknown
//! category, which then counts toward the overall average only.
//!
//! Scores are averaged over categories with at least one segment and reported
//! as percentages.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panoptic::{CategoryTable, PanopticMap, VOID_SEGMENT};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl CategoryStats {
    fn merge(&mut self, other: &CategoryStats) {
        self.iou_sum += other.iou_sum;
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn is_empty(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    /// `(PQ, SQ, RQ)` as fractions; zero for an empty category.
    pub fn quality(&self) -> (f64, f64, f64) {
        if self.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let denom = self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        let sq = if self.tp > 0 {
            self.iou_sum / self.tp as f64
        } else {
            0.0
        };
        (self.iou_sum / denom, sq, self.tp as f64 / denom)
    }
}

/// Raw matching statistics; accumulate across images with [`PqStats::merge`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PqStats {
    pub per_category: BTreeMap<u32, CategoryStats>,
}

impl PqStats {
    pub fn merge(&mut self, other: &PqStats) {
        for (cat, s) in &other.per_category {
            self.per_category.entry(*cat).or_default().merge(s);
        }
    }

    pub fn merged<'a>(all: impl IntoIterator<Item = &'a PqStats>) -> PqStats {
        let mut out = PqStats::default();
        for s in all {
            out.merge(s);
        }
        out
    }

    pub fn summary(&self, categories: &CategoryTable) -> PqSummary {
        let mut all = Averager::default();
        let mut things = Averager::default();
        let mut stuff = Averager::default();
        let mut per_category = BTreeMap::new();
        for (&cat, s) in &self.per_category {
            if s.is_empty() {
                continue;
            }
            let q = s.quality();
            per_category.insert(cat, Quality::from_fractions(q, 1));
            all.add(q);
            match categories.is_thing(cat) {
                Some(true) => things.add(q),
                Some(false) => stuff.add(q),
                None => {}
            }
        }
        PqSummary {
            all: all.finish(),
            things: things.finish(),
            stuff: stuff.finish(),
            per_category,
        }
    }
}

#[derive(Default)]
struct Averager {
    sum: (f64, f64, f64),
    n: usize,
}

impl Averager {
    fn add(&mut self, q: (f64, f64, f64)) {
        self.sum.0 += q.0;
        self.sum.1 += q.1;
        self.sum.2 += q.2;
        self.n += 1;
    }

    fn finish(&self) -> Quality {
        if self.n == 0 {
            return Quality::default();
        }
        let n = self.n as f64;
        Quality::from_fractions((self.sum.0 / n, self.sum.1 / n, self.sum.2 / n), self.n)
    }
}

/// PQ, SQ and RQ in percent over `n` categories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub n: usize,
}

impl Quality {
    fn from_fractions(q: (f64, f64, f64), n: usize) -> Self {
        Self {
            pq: 100.0 * q.0,
            sq: 100.0 * q.1,
            rq: 100.0 * q.2,
            n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PqSummary {
    pub all: Quality,
    pub things: Quality,
    pub stuff: Quality,
    pub per_category: BTreeMap<u32, Quality>,
}

/// Renders rows in the usual `PQ SQ RQ | things | stuff` column layout.
pub fn format_table(rows: &[(String, PqSummary)]) -> String {
    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = write!(out, "{:label_width$}", "");
    for h in [
        "PQ", "SQ", "RQ", "PQ_th", "SQ_th", "RQ_th", "PQ_st", "SQ_st", "RQ_st",
    ] {
        let _ = write!(out, " {h:>6}");
    }
    out.push('\n');
    for (label, s) in rows {
        let _ = write!(out, "{label:label_width$}");
        for q in [s.all, s.things, s.stuff] {
            for v in [q.pq, q.sq, q.rq] {
                let _ = write!(out, " {v:>6.1}");
            }
        }
        out.push('\n');
    }
    out
}

/// Matches segments of one image and returns its raw statistics.
pub fn evaluate(
    pred: &PanopticMap,
    gt: &PanopticMap,
    categories: &CategoryTable,
) -> Result<PqStats> {
    if pred.dim() != gt.dim() {
        return Err(Error::shape(
            format!("{:?}", gt.dim()),
            format!("{:?}", pred.dim()),
        ));
    }
    for s in &gt.segments {
        match categories.is_thing(s.category) {
            None => {
                return Err(Error::VocabularyMismatch(format!(
                    "ground-truth category {} is not in the vocabulary",
                    s.category
                )))
            }
            Some(t) if t != s.is_thing => {
                return Err(Error::VocabularyMismatch(format!(
                    "ground-truth category {} has a conflicting thing flag",
                    s.category
                )))
            }
            _ => {}
        }
    }
    for s in &pred.segments {
        if matches!(categories.is_thing(s.category), Some(t) if t != s.is_thing) {
            return Err(Error::VocabularyMismatch(format!(
                "predicted category {} has a conflicting thing flag",
                s.category
            )));
        }
    }

    let mut intersections: HashMap<(u32, u32), u64> = HashMap::new();
    let mut gt_area: HashMap<u32, u64> = HashMap::new();
    let mut pred_area: HashMap<u32, u64> = HashMap::new();
    for (&g, &p) in gt.segment_ids.iter().zip(pred.segment_ids.iter()) {
        *intersections.entry((g, p)).or_insert(0) += 1;
        *gt_area.entry(g).or_insert(0) += 1;
        *pred_area.entry(p).or_insert(0) += 1;
    }

    let gt_cat: HashMap<u32, u32> = gt.segments.iter().map(|s| (s.id, s.category)).collect();
    let pred_cat: HashMap<u32, u32> = pred.segments.iter().map(|s| (s.id, s.category)).collect();
    for (&id, &area) in &gt_area {
        if id != VOID_SEGMENT && !gt_cat.contains_key(&id) {
            return Err(Error::IdMismatch {
                image_id: 0,
                detail: format!("ground-truth id {id} ({area} px) has no segment"),
            });
        }
    }
    for &id in pred_area.keys() {
        if id != VOID_SEGMENT && !pred_cat.contains_key(&id) {
            return Err(Error::IdMismatch {
                image_id: 0,
                detail: format!("predicted id {id} has no segment"),
            });
        }
    }

    let mut stats = PqStats::default();
    for s in gt.segments.iter().chain(pred.segments.iter()) {
        stats.per_category.entry(s.category).or_default();
    }

    let mut gt_matched: BTreeMap<u32, u32> = BTreeMap::new();
    let mut pred_matched: BTreeMap<u32, u32> = BTreeMap::new();
    let mut pairs: Vec<(&(u32, u32), &u64)> = intersections.iter().collect();
    pairs.sort_unstable();
    for (&(g, p), &inter) in pairs {
        if g == VOID_SEGMENT || p == VOID_SEGMENT {
            continue;
        }
        let category = gt_cat[&g];
        if pred_cat[&p] != category {
            continue;
        }
        let void_overlap = intersections.get(&(VOID_SEGMENT, p)).copied().unwrap_or(0);
        let union = pred_area[&p] + gt_area[&g] - inter - void_overlap;
        let iou = inter as f64 / union as f64;
        if iou > 0.5 {
            assert!(
                gt_matched.insert(g, p).is_none() && pred_matched.insert(p, g).is_none(),
                "IoU > 0.5 matched a segment twice"
            );
            let e = stats
                .per_category
                .get_mut(&category)
                .expect("category registered");
            e.tp += 1;
            e.iou_sum += iou;
        }
    }

    for s in &gt.segments {
        if gt_area.contains_key(&s.id) && !gt_matched.contains_key(&s.id) {
            stats
                .per_category
                .get_mut(&s.category)
                .expect("category registered")
                .fn_ += 1;
        }
    }
    for s in &pred.segments {
        let Some(&area) = pred_area.get(&s.id) else {
            continue;
        };
        if pred_matched.contains_key(&s.id) {
            continue;
        }
        let void_overlap = intersections
            .get(&(VOID_SEGMENT, s.id))
            .copied()
            .unwrap_or(0);
        if void_overlap as f64 / area as f64 > 0.5 {
            continue;
        }
        stats
            .per_category
            .get_mut(&s.category)
            .expect("category registered")
            .fp += 1;
    }
    Ok(stats)
}
