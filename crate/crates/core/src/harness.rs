//! Oracle experiments over a seeded corpus of synthetic scenes.
//!
//! Scenes are generated and evaluated in parallel, but statistics are merged
//! in scene order, so reports do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{PqStats, PqSummary};
use crate::panoptic::{CategoryTable, PanopticAnnotation};
use crate::pipeline::{InferenceConfig, Pipeline};
use crate::synth::{generate, oracle_run, resolution_ceiling, SceneSpec};

/// Seed of scene `index` in a corpus seeded with `seed`.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_corpus(
    template: &SceneSpec,
    seed: u64,
    scenes: usize,
) -> Result<Vec<PanopticAnnotation>> {
    (0..scenes)
        .into_par_iter()
        .map(|i| generate(&template.with_seed(scene_seed(seed, i))))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Against the working-resolution ground truth.
    pub working: PqStats,
    /// Upsampled prediction against full-resolution ground truth.
    pub full: PqStats,
    pub detections: usize,
    pub gt_instances: usize,
}

pub fn run_oracle(
    corpus: &[PanopticAnnotation],
    categories: &CategoryTable,
    pipeline: &Pipeline,
) -> Result<CorpusStats> {
    let per_scene = corpus
        .par_iter()
        .map(|ann| {
            let out = oracle_run(ann, categories, pipeline)?;
            let instances = ann.segments.values().filter(|s| s.is_thing).count();
            Ok((out.working, out.full, out.output.peaks.len(), instances))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = CorpusStats::default();
    for (working, full, detections, instances) in &per_scene {
        total.working.merge(working);
        total.full.merge(full);
        total.detections += detections;
        total.gt_instances += instances;
    }
    Ok(total)
}

/// Stats of the resolution ceiling: downsampled ground truth upsampled back.
pub fn ceiling(
    corpus: &[PanopticAnnotation],
    categories: &CategoryTable,
    scale: usize,
) -> Result<PqStats> {
    let per_scene = corpus
        .par_iter()
        .map(|ann| resolution_ceiling(ann, categories, scale))
        .collect::<Result<Vec<_>>>()?;
    Ok(PqStats::merged(&per_scene))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeReport {
    pub scheme: String,
    pub config: InferenceConfig,
    pub detections: usize,
    pub gt_instances: usize,
    pub working: PqSummary,
    pub full: PqSummary,
    pub working_stats: PqStats,
    pub full_stats: PqStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub scenes: usize,
    pub scene: SceneSpec,
    pub ceiling: PqSummary,
    pub ceiling_stats: PqStats,
    pub schemes: Vec<SchemeReport>,
}

/// Runs every `(name, config)` on one corpus. All configs must share a scale.
pub fn oracle_report(
    template: &SceneSpec,
    seed: u64,
    scenes: usize,
    categories: &CategoryTable,
    configs: &[(String, InferenceConfig)],
) -> Result<OracleReport> {
    let corpus = generate_corpus(template, seed, scenes)?;
    let scale = configs
        .first()
        .map_or(InferenceConfig::default().fuse.scale, |(_, c)| c.fuse.scale)
        as usize;
    let ceiling_stats = ceiling(&corpus, categories, scale)?;
    let mut schemes = Vec::with_capacity(configs.len());
    for (name, config) in configs {
        let pipeline = Pipeline::new(config.clone())?;
        let stats = run_oracle(&corpus, categories, &pipeline)?;
        schemes.push(SchemeReport {
            scheme: name.clone(),
            config: config.clone(),
            detections: stats.detections,
            gt_instances: stats.gt_instances,
            working: stats.working.summary(categories),
            full: stats.full.summary(categories),
            working_stats: stats.working,
            full_stats: stats.full,
        });
    }
    Ok(OracleReport {
        seed,
        scenes,
        scene: template.with_seed(seed),
        ceiling: ceiling_stats.summary(categories),
        ceiling_stats,
        schemes,
    })
}
