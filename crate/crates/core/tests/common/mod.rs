#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Array3};
use pcv_core::grid::{GridSpec, Ring};
use pcv_core::panoptic::{CategoryTable, PanopticMap, Segment, VOID_SEGMENT};
use pcv_core::{CellTable, PeakRegion, TopVotes, VoteTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Valid radial grids with up to three rings and small extents.
pub fn grid_spec() -> impl Strategy<Value = GridSpec> {
    (
        prop::sample::select(vec![1u32, 3]),
        prop::sample::select(vec![1u32, 3, 5]),
        prop::collection::vec((0usize..4, 1u32..=2), 0..=2),
    )
        .prop_map(|(s0, m0, outer)| {
            let mut rings = vec![Ring::new(s0 * m0, s0)];
            for (pick, steps) in outer {
                let inner = rings.last().unwrap().extent;
                let divisors: Vec<u32> = (1..=inner)
                    .filter(|d| d % 2 == 1 && inner % d == 0)
                    .collect();
                let s = divisors[pick % divisors.len()];
                rings.push(Ring::new(inner + 2 * s * steps, s));
            }
            GridSpec::new(rings)
        })
}

/// Random normalized vote tensor: each pixel spreads over a few random classes.
pub fn random_votes(seed: u64, h: usize, w: usize, k: usize) -> VoteTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = Array3::zeros((h, w, k + 1));
    for r in 0..h {
        for c in 0..w {
            let n = rng.random_range(1..=4);
            let mut total = 0.0;
            for _ in 0..n {
                let ch = rng.random_range(0..=k);
                let v: f64 = rng.random_range(0.01..1.0);
                probs[(r, c, ch)] += v;
                total += v;
            }
            for ch in 0..=k {
                probs[(r, c, ch)] /= total;
            }
        }
    }
    VoteTensor::new(probs, Array2::from_elem((h, w), false)).unwrap()
}

/// Claims by direct search: peak `j` is claimed by `p` through cell `k` when
/// some member `q` of region `j` satisfies `qf(p - q) = k` with `k` in `p`'s top votes.
pub fn brute_claims(
    peaks: &[PeakRegion],
    tv: &TopVotes,
    qf: &CellTable,
) -> BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> {
    let (h, w) = tv.dim();
    let mut out: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for r in 0..h {
        for c in 0..w {
            let top: BTreeSet<usize> = tv.cells((r, c)).collect();
            if top.is_empty() {
                continue;
            }
            for (j, region) in peaks.iter().enumerate() {
                for &(qr, qc) in &region.pixels {
                    if let Some(k) = qf.lookup((r as i64 - qr as i64, c as i64 - qc as i64)) {
                        if top.contains(&k) {
                            out.entry((r, c)).or_default().insert((j, k));
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NaiveCounts {
    pub iou_sum: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// Straightforward PQ bookkeeping from pixel lists, with no shared code.
pub fn naive_pq(pred: &PanopticMap, gt: &PanopticMap) -> BTreeMap<u32, NaiveCounts> {
    let pixels = |m: &PanopticMap, id: u32| -> BTreeSet<(usize, usize)> {
        m.segment_ids
            .indexed_iter()
            .filter(|(_, &v)| v == id)
            .map(|(p, _)| p)
            .collect()
    };
    let void: BTreeSet<(usize, usize)> = pixels(gt, VOID_SEGMENT);
    let mut out: BTreeMap<u32, NaiveCounts> = BTreeMap::new();
    let mut matched_pred = BTreeSet::new();
    for g in &gt.segments {
        let gp = pixels(gt, g.id);
        if gp.is_empty() {
            continue;
        }
        let e = out.entry(g.category).or_default();
        let mut hit = false;
        for p in &pred.segments {
            if p.category != g.category {
                continue;
            }
            let pp = pixels(pred, p.id);
            let inter = gp.intersection(&pp).count() as f64;
            let pred_in_void = pp.intersection(&void).count() as f64;
            let union = gp.union(&pp).count() as f64 - pred_in_void;
            if inter / union > 0.5 {
                e.tp += 1;
                e.iou_sum += inter / union;
                matched_pred.insert(p.id);
                hit = true;
            }
        }
        if !hit {
            e.fn_ += 1;
        }
    }
    for p in &pred.segments {
        let pp = pixels(pred, p.id);
        let e = out.entry(p.category).or_default();
        if pp.is_empty() || matched_pred.contains(&p.id) {
            continue;
        }
        if pp.intersection(&void).count() * 2 > pp.len() {
            continue;
        }
        e.fp += 1;
    }
    out
}

/// Mean PQ over categories with any counts, as a fraction.
pub fn naive_mean_pq(counts: &BTreeMap<u32, NaiveCounts>, keep: impl Fn(u32) -> bool) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for (&cat, c) in counts {
        if !keep(cat) || c.tp + c.fp + c.fn_ == 0 {
            continue;
        }
        sum += c.iou_sum / (c.tp as f64 + 0.5 * c.fp as f64 + 0.5 * c.fn_ as f64);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Random panoptic map over `categories` painted with random rectangles.
pub fn random_map(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    categories: &CategoryTable,
    void_ok: bool,
) -> PanopticMap {
    let cats: Vec<_> = categories.iter().cloned().collect();
    let mut ids = Array2::zeros((h, w));
    let n = rng.random_range(1..=6);
    let mut segs: BTreeMap<u32, (u32, bool)> = BTreeMap::new();
    if !void_ok {
        let c = &cats[rng.random_range(0..cats.len())];
        ids.fill(1);
        segs.insert(1, (c.id, c.is_thing));
    }
    for i in 0..n {
        let id = 2 + i as u32;
        let c = &cats[rng.random_range(0..cats.len())];
        let r0 = rng.random_range(0..h);
        let c0 = rng.random_range(0..w);
        let r1 = rng.random_range(r0..h);
        let c1 = rng.random_range(c0..w);
        for r in r0..=r1 {
            for cc in c0..=c1 {
                ids[(r, cc)] = id;
            }
        }
        segs.insert(id, (c.id, c.is_thing));
    }
    let mut map = PanopticMap {
        segment_ids: ids,
        segments: segs
            .into_iter()
            .map(|(id, (category, is_thing))| Segment {
                id,
                category,
                area: 0,
                is_thing,
            })
            .collect(),
    };
    map.segments = map.rederive_segments();
    map
}
