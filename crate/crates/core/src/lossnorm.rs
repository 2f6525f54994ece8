//! Segment-normalized cross-entropy.
//!
//! Each pixel's loss is weighted by `a^-lambda`, where `a` is the area of the
//! segment it belongs to, and the weighted sum is divided by the total weight.
//! `lambda = 0` is the plain pixel average; `lambda = 1` gives every segment
//! the same total weight. Stuff and thing segments are treated alike.
//!
//! The loss is reported with the usual negative sign, so a perfect
//! prediction scores 0.

use ndarray::{Array2, Array3};

use crate::encode::{LabelField, VoteTarget};
use crate::error::{Error, Result};
use crate::panoptic::{PanopticAnnotation, VOID_SEGMENT};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWeights {
    pub w: Array2<f64>,
    pub lambda: f64,
}

impl SegmentWeights {
    pub fn total(&self) -> f64 {
        self.w.sum()
    }

    /// Zeroes the weight wherever `excluded` is set.
    pub fn excluding(mut self, excluded: &Array2<bool>) -> Self {
        self.w.zip_mut_with(excluded, |w, &x| {
            if x {
                *w = 0.0;
            }
        });
        self
    }
}

/// Per-pixel weights `a^-lambda`; unlabeled pixels weigh 0.
pub fn segment_weights(ann: &PanopticAnnotation, lambda: f64) -> Result<SegmentWeights> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let areas = ann.areas();
    let w = ann.ids.mapv(|id| {
        if id == VOID_SEGMENT {
            0.0
        } else {
            (areas[&id] as f64).powf(-lambda)
        }
    });
    Ok(SegmentWeights { w, lambda })
}

/// Weights for the voting loss: segment weights with ignored pixels removed.
pub fn vote_weights(
    ann: &PanopticAnnotation,
    labels: &LabelField,
    lambda: f64,
) -> Result<SegmentWeights> {
    let ignored = labels.vote.mapv(|v| v == VoteTarget::Ignore);
    Ok(segment_weights(ann, lambda)?.excluding(&ignored))
}

/// Probability each pixel assigns to its target class; `None` targets yield 1.
pub fn target_probs(probs: &Array3<f64>, targets: &Array2<Option<usize>>) -> Result<Array2<f64>> {
    let (h, w, ch) = probs.dim();
    if targets.dim() != (h, w) {
        return Err(Error::shape(
            format!("{:?}", (h, w)),
            format!("{:?}", targets.dim()),
        ));
    }
    let mut out = Array2::ones((h, w));
    for ((r, c), t) in targets.indexed_iter() {
        if let Some(k) = *t {
            if k >= ch {
                return Err(Error::InvalidArgument(format!(
                    "target class {k} out of {ch}"
                )));
            }
            out[(r, c)] = probs[(r, c, k)];
        }
    }
    Ok(out)
}

/// Weighted mean of `-ln p` over pixels with positive weight.
pub fn normalized_loss(probs: &Array2<f64>, weights: &SegmentWeights) -> Result<f64> {
    if probs.dim() != weights.w.dim() {
        return Err(Error::shape(
            format!("{:?}", weights.w.dim()),
            format!("{:?}", probs.dim()),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &w) in probs.iter().zip(weights.w.iter()) {
        if w == 0.0 {
            continue;
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability {p} outside (0, 1]"
            )));
        }
        num -= w * p.ln();
        den += w;
    }
    if den == 0.0 {
        return Err(Error::ZeroWeight);
    }
    Ok(num / den)
}
