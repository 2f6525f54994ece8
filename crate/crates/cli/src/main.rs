//! `pcv`: grid inspection, oracle experiments, PQ evaluation, rendering and
//! inference from externally supplied vote tensors.

mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use pcv_core::harness::oracle_report;
use pcv_core::metrics::format_table;
use pcv_core::panoptic_io::{ArchiveWriter, CategoryRecord, PanopticArchive};
use pcv_core::synth::synthetic_categories;
use pcv_core::{
    aggregate_votes, backproject, encode_labels, evaluate, find_peaks, generate, infer, tensor_io,
    top_votes, CategoryTable, Connectivity, FuseConfig, GridScheme, GridSpec, InferenceConfig,
    PanopticMap, Pipeline, PqStats, PqSummary, Ring, SceneSpec, VoteTensor,
};

#[derive(Parser)]
#[command(
    name = "pcv",
    version,
    about = "Pixel consensus voting for panoptic segmentation"
)]
struct Cli {
    /// Worker threads; 0 uses every core. Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cell layout of a grid and optionally draw it.
    Gridinfo {
        #[command(flatten)]
        grid: GridArgs,
        /// PNG of the voting filter, one color per cell.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Oracle inference on a seeded synthetic corpus.
    Oracle(OracleArgs),
    /// Panoptic quality of a prediction archive against ground truth.
    EvalPq {
        /// Prediction index JSON; PNGs are read from the folder named after its stem.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        #[arg(long)]
        gt_dir: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw intermediate stages for a vote tensor or a synthetic oracle scene.
    Render(RenderArgs),
    /// Run inference on a vote tensor and semantic map and write a panoptic archive.
    Infer(InferArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// default, simple, uniform or toy.
    #[arg(long, default_value = "default")]
    scheme: String,
    /// Custom rings as `extent:cell_size,...`, innermost first; overrides --scheme.
    #[arg(long)]
    rings: Option<String>,
}

impl GridArgs {
    fn resolve(&self) -> Result<(String, GridSpec)> {
        match &self.rings {
            Some(text) => Ok(("custom".into(), parse_rings(text)?)),
            None => {
                let scheme: GridScheme = self.scheme.parse()?;
                Ok((scheme.name().into(), scheme.spec()))
            }
        }
    }
}

fn parse_rings(text: &str) -> Result<GridSpec> {
    let rings = text
        .split(',')
        .map(|part| {
            let (e, s) = part
                .trim()
                .split_once(':')
                .with_context(|| format!("ring `{part}` is not extent:cell_size"))?;
            Ok(Ring::new(e.trim().parse()?, s.trim().parse()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = GridSpec::new(rings);
    spec.validate()?;
    Ok(spec)
}

#[derive(Args, Clone)]
struct InferenceArgs {
    /// Minimum summed vote for a peak pixel.
    #[arg(long, default_value_t = 4.0)]
    threshold: f64,
    /// Votes per pixel considered during backprojection.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
    /// 4 or 8.
    #[arg(long, default_value = "8")]
    connectivity: Connectivity,
    /// Stuff segments smaller than this (full-resolution pixels) become void.
    #[arg(long, default_value_t = 4096)]
    min_stuff_area: u64,
    /// Ratio of full to working resolution.
    #[arg(long, default_value_t = 4)]
    scale: u64,
}

impl InferenceArgs {
    fn config(&self, grid: GridSpec) -> InferenceConfig {
        InferenceConfig {
            grid,
            threshold: self.threshold,
            top_k: self.top_k,
            connectivity: self.connectivity,
            fuse: FuseConfig {
                min_stuff_area: self.min_stuff_area,
                scale: self.scale,
            },
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    /// Grid schemes to compare; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', default_value = "default")]
    scheme: Vec<String>,
    /// Custom rings, run in addition to --scheme.
    #[arg(long)]
    rings: Option<String>,
    #[arg(long, default_value_t = 200)]
    scenes: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Full-resolution scene height and width.
    #[arg(long, default_value_t = 320)]
    size: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceArgs,
}

#[derive(Args)]
struct RenderArgs {
    /// Vote tensor file; without it a synthetic scene is rendered.
    #[arg(long, requires = "semantic")]
    votes: Option<PathBuf>,
    /// Semantic map file, used with --votes for the panoptic output.
    #[arg(long)]
    semantic: Option<PathBuf>,
    /// Category JSON for --panoptic with --votes.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Seed of the synthetic scene.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 320)]
    size: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    inference: InferenceArgs,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    peaks: Option<PathBuf>,
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    panoptic: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    votes: PathBuf,
    #[arg(long)]
    semantic: PathBuf,
    /// JSON list of {id, name, isthing} records, or a panoptic index holding one.
    #[arg(long)]
    categories: PathBuf,
    /// Output index JSON; PNGs go to the folder named after its stem.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    image_id: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    inference: InferenceArgs,
}

/// Settings echoed beside each report.
#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    #[serde(flatten)]
    settings: T,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `out.json` -> `out.config.json`
fn config_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    report.with_file_name(format!("{stem}.config.json"))
}

fn write_report(
    command: &str,
    report_path: &Path,
    report: &impl Serialize,
    settings: impl Serialize,
) -> Result<()> {
    write_json(report_path, report)?;
    write_json(
        &config_path(report_path),
        &RunConfig {
            command,
            version: env!("CARGO_PKG_VERSION"),
            settings,
        },
    )
}

fn load_categories(path: &Path) -> Result<CategoryTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let list = match value {
        serde_json::Value::Object(mut obj) => obj
            .remove("categories")
            .with_context(|| format!("{} has no `categories` field", path.display()))?,
        other => other,
    };
    let records: Vec<CategoryRecord> = serde_json::from_value(list)?;
    Ok(CategoryTable::new(
        records
            .into_iter()
            .map(|c| pcv_core::Category {
                id: c.id,
                name: c.name,
                is_thing: c.isthing != 0,
            })
            .collect(),
    ))
}

fn gridinfo(grid: &GridArgs, png: Option<&Path>) -> Result<()> {
    let (name, spec) = grid.resolve()?;
    let table = pcv_core::build_grid(&spec)?;
    println!("scheme {name}");
    println!("M = {}", table.side());
    println!("K = {}", table.num_cells());
    println!("{:>6} {:>6} {:>6}", "extent", "cell", "cells");
    let mut inner = 0u32;
    for ring in &spec.rings {
        let cells = (ring.extent / ring.cell_size).pow(2) - (inner / ring.cell_size).pow(2);
        println!("{:>6} {:>6} {:>6}", ring.extent, ring.cell_size, cells);
        inner = ring.extent;
    }
    if let Some(path) = png {
        render::grid(&table, path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleSettings<'a> {
    schemes: Vec<(String, InferenceConfig)>,
    scenes: usize,
    seed: u64,
    scene: &'a SceneSpec,
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let mut configs = Vec::new();
    for name in &args.scheme {
        let scheme: GridScheme = name.parse()?;
        configs.push((
            scheme.name().to_string(),
            args.inference.config(scheme.spec()),
        ));
    }
    if let Some(text) = &args.rings {
        configs.push((
            "custom".to_string(),
            args.inference.config(parse_rings(text)?),
        ));
    }
    for (_, c) in &configs {
        Pipeline::new(c.clone())?;
    }
    let template = SceneSpec {
        height: args.size,
        width: args.size,
        ..SceneSpec::oracle_corpus_scene(0)
    };
    let categories = synthetic_categories();
    let report = oracle_report(&template, args.seed, args.scenes, &categories, &configs)?;

    let mut rows = vec![("1/4 gt".to_string(), report.ceiling.clone())];
    for s in &report.schemes {
        rows.push((format!("{} @full", s.scheme), s.full.clone()));
        rows.push((format!("{} @work", s.scheme), s.working.clone()));
    }
    print!("{}", format_table(&rows));
    for s in &report.schemes {
        println!(
            "{}: {} detections for {} instances",
            s.scheme, s.detections, s.gt_instances
        );
    }
    if let Some(path) = &args.report {
        let settings = OracleSettings {
            schemes: configs,
            scenes: args.scenes,
            seed: args.seed,
            scene: &template,
        };
        write_report("oracle", path, &report, settings)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    images: usize,
    summary: PqSummary,
    stats: PqStats,
}

#[derive(Serialize)]
struct EvalSettings<'a> {
    pred: &'a Path,
    pred_dir: &'a Path,
    gt: &'a Path,
    gt_dir: &'a Path,
}

fn eval_pq(
    pred: &Path,
    gt: &Path,
    pred_dir: Option<&Path>,
    gt_dir: Option<&Path>,
    report: Option<&Path>,
) -> Result<()> {
    let pred = PanopticArchive::open(pred, pred_dir)?;
    let gt = PanopticArchive::open(gt, gt_dir)?;
    let categories = gt.categories();
    let ids = gt.image_ids();
    let per_image = ids
        .par_iter()
        .map(|&id| {
            let g = PanopticMap::from_annotation(&gt.read_annotation(id, None)?);
            let p = PanopticMap::from_annotation(&pred.read_annotation(id, None)?);
            evaluate(&p, &g, &categories)
        })
        .collect::<pcv_core::Result<Vec<_>>>()?;
    let stats = PqStats::merged(&per_image);
    let summary = stats.summary(&categories);
    print!("{}", format_table(&[("pq".to_string(), summary.clone())]));
    if let Some(path) = report {
        let settings = EvalSettings {
            pred: &pred.json_path,
            pred_dir: &pred.png_dir,
            gt: &gt.json_path,
            gt_dir: &gt.png_dir,
        };
        let out = EvalReport {
            images: ids.len(),
            summary,
            stats,
        };
        write_report("eval-pq", path, &out, settings)?;
    }
    Ok(())
}

fn render_cmd(args: &RenderArgs) -> Result<()> {
    let (_, spec) = args.grid.resolve()?;
    let pipeline = Pipeline::new(args.inference.config(spec))?;
    let (votes, semantic, categories) = match &args.votes {
        Some(path) => {
            let votes = tensor_io::read_votes(path, pipeline.vf.num_cells())?;
            let semantic = tensor_io::read_semantic(
                args.semantic.as_deref().context("--semantic is required")?,
            )?;
            let categories = match &args.categories {
                Some(p) => Some(load_categories(p)?),
                None => None,
            };
            (votes, semantic, categories)
        }
        None => {
            let scene = SceneSpec {
                height: args.size,
                width: args.size,
                ..SceneSpec::oracle_corpus_scene(args.seed)
            };
            let working = generate(&scene)?.downsample(pipeline.config.fuse.scale as usize);
            let labels = encode_labels(&working, &pipeline.vf);
            (
                VoteTensor::one_hot(&labels),
                labels.semantic,
                Some(synthetic_categories()),
            )
        }
    };
    let cfg = &pipeline.config;
    let heat = aggregate_votes(&votes, &pipeline.vf)?;
    let regions = find_peaks(&heat, cfg.threshold, cfg.connectivity);
    let masks = backproject(&regions, &top_votes(&votes, cfg.top_k), &pipeline.qf);
    if let Some(p) = &args.heatmap {
        render::heatmap(&heat, p)?;
    }
    if let Some(p) = &args.peaks {
        render::peaks(&heat, &regions, p)?;
    }
    if let Some(p) = &args.masks {
        render::masks(heat.dim(), &masks, p)?;
    }
    if let Some(p) = &args.panoptic {
        let Some(categories) = categories else {
            bail!("--panoptic with --votes needs --categories");
        };
        let map = pcv_core::fuse(&masks, &semantic, &categories, &cfg.fuse)?;
        render::panoptic(&map, p)?;
    }
    println!("{} peaks, {} masks", regions.len(), masks.len());
    Ok(())
}

#[derive(Serialize)]
struct InferReport {
    image_id: u64,
    height: usize,
    width: usize,
    peaks: usize,
    masks: usize,
    segments: usize,
}

#[derive(Serialize)]
struct InferSettings<'a> {
    votes: &'a Path,
    semantic: &'a Path,
    categories: &'a Path,
    out: &'a Path,
    inference: &'a InferenceConfig,
}

fn infer_cmd(args: &InferArgs) -> Result<()> {
    let (_, spec) = args.grid.resolve()?;
    let pipeline = Pipeline::new(args.inference.config(spec))?;
    let categories = load_categories(&args.categories)?;
    let votes = tensor_io::read_votes(&args.votes, pipeline.vf.num_cells())?;
    let semantic = tensor_io::read_semantic(&args.semantic)?;
    let output = infer(&votes, &semantic, &categories, &pipeline)?;
    let mut writer = ArchiveWriter::new(&args.out, &categories);
    writer.add(args.image_id, &output.panoptic)?;
    writer.finish()?;
    let report = InferReport {
        image_id: args.image_id,
        height: votes.height(),
        width: votes.width(),
        peaks: output.peaks.len(),
        masks: output.masks.len(),
        segments: output.panoptic.segments.len(),
    };
    println!(
        "{} peaks, {} masks, {} segments -> {}",
        report.peaks,
        report.masks,
        report.segments,
        args.out.display()
    );
    let report_path = args.report.clone().unwrap_or_else(|| {
        let stem = args
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        args.out.with_file_name(format!("{stem}.report.json"))
    });
    let settings = InferSettings {
        votes: &args.votes,
        semantic: &args.semantic,
        categories: &args.categories,
        out: &args.out,
        inference: &pipeline.config,
    };
    write_report("infer", &report_path, &report, settings)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gridinfo { grid, png } => gridinfo(grid, png.as_deref()),
        Command::Oracle(args) => oracle(args),
        Command::EvalPq {
            pred,
            gt,
            pred_dir,
            gt_dir,
            report,
        } => eval_pq(
            pred,
            gt,
            pred_dir.as_deref(),
            gt_dir.as_deref(),
            report.as_deref(),
        ),
        Command::Render(args) => render_cmd(args),
        Command::Infer(args) => infer_cmd(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(anyhow::Error::from)
        .and_then(|pool| pool.install(|| run(cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
