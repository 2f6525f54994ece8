//! Vote aggregation into the Hough accumulator.
//!
//! Each pixel spreads the probability of every cell uniformly over the pixels
//! of that cell placed relative to itself; the abstention channel is discarded
//! and votes landing outside the image are dropped.
//!
//! [`aggregate_votes`] follows the two-kernel decomposition: per cell size `s`
//! it first scatters every probability onto the cell center (a transposed
//! convolution with a one-hot kernel dilated by `s`) and then spreads it with
//! an `s x s` box filter (average pooling). [`brute_force_aggregate`] walks
//! every target pixel directly and serves as the reference.

use ndarray::{s, Array2, Array3};
use rayon::prelude::*;

use crate::encode::LabelField;
use crate::error::{Error, Result};
use crate::grid::CellTable;

/// Tolerance on per-pixel probability sums.
pub const NORMALIZATION_EPS: f64 = 1e-5;

/// Per-pixel distribution over `K` cells plus abstention (channel `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTensor {
    probs: Array3<f64>,
    ignore: Array2<bool>,
}

impl VoteTensor {
    /// Validates that every non-ignored pixel sums to one within [`NORMALIZATION_EPS`].
    pub fn new(probs: Array3<f64>, ignore: Array2<bool>) -> Result<Self> {
        let v = Self::new_unnormalized(probs, ignore)?;
        for ((r, c), &ignored) in v.ignore.indexed_iter() {
            if ignored {
                continue;
            }
            let sum: f64 = v.probs.slice(s![r, c, ..]).sum();
            if (sum - 1.0).abs() > NORMALIZATION_EPS {
                return Err(Error::InvalidArgument(format!(
                    "probabilities at ({r}, {c}) sum to {sum}"
                )));
            }
        }
        Ok(v)
    }

    /// Skips the normalization check; entries must still be finite and nonnegative.
    pub fn new_unnormalized(probs: Array3<f64>, ignore: Array2<bool>) -> Result<Self> {
        let (h, w, _) = probs.dim();
        if ignore.dim() != (h, w) {
            return Err(Error::shape(
                format!("{:?}", (h, w)),
                format!("{:?}", ignore.dim()),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { probs, ignore })
    }

    /// Probability 1 on each pixel's target class; ignored pixels abstain.
    pub fn one_hot(labels: &LabelField) -> Self {
        let k = labels.num_cells;
        let (h, w) = labels.vote.dim();
        let mut probs = Array3::zeros((h, w, k + 1));
        for ((r, c), v) in labels.vote.indexed_iter() {
            let class = v.class(k).unwrap_or(k);
            probs[(r, c, class)] = 1.0;
        }
        Self {
            probs,
            ignore: Array2::from_elem((h, w), false),
        }
    }

    pub fn probs(&self) -> &Array3<f64> {
        &self.probs
    }

    pub fn ignore(&self) -> &Array2<bool> {
        &self.ignore
    }

    pub fn height(&self) -> usize {
        self.probs.dim().0
    }

    pub fn width(&self) -> usize {
        self.probs.dim().1
    }

    /// Number of channels, `K + 1`.
    pub fn channels(&self) -> usize {
        self.probs.dim().2
    }

    fn check_grid(&self, vf: &CellTable) -> Result<()> {
        if self.channels() != vf.num_cells() + 1 {
            return Err(Error::shape(
                format!("{} channels", vf.num_cells() + 1),
                format!("{} channels", self.channels()),
            ));
        }
        if self.height() == 0 || self.width() == 0 {
            return Err(Error::InvalidArgument("empty vote tensor".into()));
        }
        Ok(())
    }
}

/// Accumulated votes per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub votes: Array2<f64>,
}

impl Heatmap {
    pub fn new(votes: Array2<f64>) -> Self {
        Self { votes }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.votes.dim()
    }

    pub fn total(&self) -> f64 {
        self.votes.sum()
    }

    pub fn max(&self) -> f64 {
        self.votes.iter().copied().fold(0.0, f64::max)
    }
}

/// Grouped scatter-then-pool aggregation.
pub fn aggregate_votes(v: &VoteTensor, vf: &CellTable) -> Result<Heatmap> {
    v.check_grid(vf)?;
    let (h, w) = (v.height(), v.width());
    let partials: Vec<Array2<f64>> = vf
        .cells_by_size()
        .par_iter()
        .map(|(size, cells)| aggregate_size_class(v, vf, *size as usize, cells))
        .collect();
    let mut votes = Array2::zeros((h, w));
    for p in &partials {
        votes += p;
    }
    Ok(Heatmap { votes })
}

fn aggregate_size_class(
    v: &VoteTensor,
    vf: &CellTable,
    size: usize,
    cells: &[usize],
) -> Array2<f64> {
    let (h, w) = (v.height(), v.width());
    let pad = size / 2;
    let (ch, cw) = (h + 2 * pad, w + 2 * pad);
    let centers: Vec<(i64, i64)> = cells
        .iter()
        .map(|&k| {
            let (y, x) = vf.cell_center(k);
            (y as i64 + pad as i64, x as i64 + pad as i64)
        })
        .collect();

    // dilated one-hot scatter onto cell centers, in padded canvas coordinates
    let mut canvas = Array2::<f64>::zeros((ch, cw));
    for r in 0..h {
        for c in 0..w {
            if v.ignore[(r, c)] {
                continue;
            }
            for (&k, &(cy, cx)) in cells.iter().zip(&centers) {
                let p = v.probs[(r, c, k)];
                if p == 0.0 {
                    continue;
                }
                let tr = r as i64 + cy;
                let tc = c as i64 + cx;
                if tr < 0 || tc < 0 || tr >= ch as i64 || tc >= cw as i64 {
                    continue;
                }
                canvas[(tr as usize, tc as usize)] += p;
            }
        }
    }
    if size == 1 {
        return canvas;
    }

    // separable s x s box average back to image coordinates
    let mut rows = Array2::<f64>::zeros((ch, w));
    for r in 0..ch {
        for c in 0..w {
            rows[(r, c)] = (c..c + size).map(|u| canvas[(r, u)]).sum();
        }
    }
    let norm = (size * size) as f64;
    Array2::from_shape_fn((h, w), |(r, c)| {
        (r..r + size).map(|u| rows[(u, c)]).sum::<f64>() / norm
    })
}

/// Reference aggregation by direct enumeration of every target pixel.
pub fn brute_force_aggregate(v: &VoteTensor, vf: &CellTable) -> Result<Heatmap> {
    v.check_grid(vf)?;
    let (h, w) = (v.height() as i64, v.width() as i64);
    let mut votes = Array2::<f64>::zeros((h as usize, w as usize));
    for r in 0..h {
        for c in 0..w {
            if v.ignore[(r as usize, c as usize)] {
                continue;
            }
            for k in 0..vf.num_cells() {
                let p = v.probs[(r as usize, c as usize, k)];
                if p == 0.0 {
                    continue;
                }
                let s = vf.cell_size(k) as f64;
                let share = p / (s * s);
                let (y0, x0, y1, x1) = vf.cell_bounds(k);
                for dy in y0..=y1 {
                    for dx in x0..=x1 {
                        let (tr, tc) = (r + dy as i64, c + dx as i64);
                        if (0..h).contains(&tr) && (0..w).contains(&tc) {
                            votes[(tr as usize, tc as usize)] += share;
                        }
                    }
                }
            }
        }
    }
    Ok(Heatmap { votes })
}
