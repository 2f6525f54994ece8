//! End-to-end inference from per-pixel votes and semantics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_votes, Heatmap, VoteTensor};
use crate::backproject::{backproject, top_votes, InstanceMask, DEFAULT_TOP_K};
use crate::error::{Error, Result};
use crate::fuse::{fuse, FuseConfig};
use crate::grid::{build_grid, invert_grid, CellTable, GridSpec};
use crate::panoptic::{CategoryTable, PanopticMap};
use crate::peaks::{find_peaks, Connectivity, PeakRegion, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub grid: GridSpec,
    pub threshold: f64,
    pub top_k: usize,
    pub connectivity: Connectivity,
    pub fuse: FuseConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default_scheme(),
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
            connectivity: Connectivity::Eight,
            fuse: FuseConfig::default(),
        }
    }
}

/// Voting and query filters built once for a configuration.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: InferenceConfig,
    pub vf: CellTable,
    pub qf: CellTable,
}

impl Pipeline {
    pub fn new(config: InferenceConfig) -> Result<Self> {
        if config.threshold.is_nan() || config.threshold <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "threshold must be positive, got {}",
                config.threshold
            )));
        }
        if config.top_k == 0 {
            return Err(Error::InvalidArgument("top-k must be at least 1".into()));
        }
        if config.fuse.scale == 0 {
            return Err(Error::InvalidArgument("scale must be at least 1".into()));
        }
        let vf = build_grid(&config.grid)?;
        let qf = invert_grid(&vf);
        Ok(Self { config, vf, qf })
    }
}

#[derive(Debug, Clone)]
pub struct InferenceOutput {
    pub heatmap: Heatmap,
    pub peaks: Vec<PeakRegion>,
    pub masks: Vec<InstanceMask>,
    pub panoptic: PanopticMap,
}

/// Aggregate, detect peaks, backproject, and fuse with `semantic`.
pub fn infer(
    votes: &VoteTensor,
    semantic: &Array2<u32>,
    categories: &CategoryTable,
    pipeline: &Pipeline,
) -> Result<InferenceOutput> {
    if semantic.dim() != (votes.height(), votes.width()) {
        return Err(Error::shape(
            format!("{:?}", (votes.height(), votes.width())),
            format!("{:?}", semantic.dim()),
        ));
    }
    let cfg = &pipeline.config;
    let heatmap = aggregate_votes(votes, &pipeline.vf)?;
    let peaks = find_peaks(&heatmap, cfg.threshold, cfg.connectivity);
    let tv = top_votes(votes, cfg.top_k);
    let masks = backproject(&peaks, &tv, &pipeline.qf);
    let panoptic = fuse(&masks, semantic, categories, &cfg.fuse)?;
    Ok(InferenceOutput {
        heatmap,
        peaks,
        masks,
        panoptic,
    })
}
