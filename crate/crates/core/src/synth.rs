//! Synthetic panoptic scenes and oracle inference on them.
//!
//! Scenes are painted at full resolution: horizontal stuff bands first, then
//! thing instances in z-order, later instances hiding earlier ones. Oracle
//! inference encodes the working-resolution ground truth into one-hot votes
//! and runs the regular pipeline on them, so any loss against ground truth
//! comes from the voting scheme itself.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::VoteTensor;
use crate::encode::encode_labels;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, PqStats};
use crate::panoptic::{
    Category, CategoryTable, PanopticAnnotation, PanopticMap, SegmentInfo, VOID_SEGMENT,
};
use crate::pipeline::{infer, InferenceOutput, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Rectangle,
    Ellipse,
    Blob,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Occlusion {
    /// Instances never overlap.
    None,
    /// Later instances may cover earlier ones; a placement is rejected when it
    /// would hide more than `max_hidden` of any existing instance's visible area.
    Stacked { max_hidden: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    /// Inclusive range of requested instances.
    pub instances: (usize, usize),
    pub shapes: Vec<ShapeFamily>,
    /// Inclusive range of instance sizes in pixels, sampled log-uniformly.
    pub scale: (f64, f64),
    pub occlusion: Occlusion,
    /// One horizontal band per category, top to bottom.
    pub stuff_categories: Vec<u32>,
    pub thing_categories: Vec<u32>,
    pub seed: u64,
}

impl SceneSpec {
    /// The scene family used for oracle experiments: 320 x 320 scenes with
    /// two to eight instances of 20 to 160 pixels and mild occlusion.
    pub fn oracle_corpus_scene(seed: u64) -> Self {
        Self {
            height: 320,
            width: 320,
            instances: (2, 8),
            shapes: vec![
                ShapeFamily::Rectangle,
                ShapeFamily::Ellipse,
                ShapeFamily::Blob,
            ],
            scale: (20.0, 160.0),
            occlusion: Occlusion::Stacked { max_hidden: 0.3 },
            stuff_categories: vec![SKY, WALL, GROUND],
            thing_categories: vec![PERSON, VEHICLE, ANIMAL],
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("scene has zero size".into()));
        }
        if self.instances.0 > self.instances.1 {
            return Err(Error::InvalidArgument("instance range is reversed".into()));
        }
        if self.instances.1 > 0 && (self.shapes.is_empty() || self.thing_categories.is_empty()) {
            return Err(Error::InvalidArgument(
                "instances need at least one shape family and thing category".into(),
            ));
        }
        if self.stuff_categories.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one stuff category is required".into(),
            ));
        }
        if !(self.scale.0 >= 1.0 && self.scale.0 <= self.scale.1) {
            return Err(Error::InvalidArgument(format!(
                "bad scale range {:?}",
                self.scale
            )));
        }
        Ok(())
    }
}

pub const PERSON: u32 = 1;
pub const VEHICLE: u32 = 2;
pub const ANIMAL: u32 = 3;
pub const SKY: u32 = 101;
pub const WALL: u32 = 102;
pub const GROUND: u32 = 103;

/// Vocabulary of the synthetic scenes.
pub fn synthetic_categories() -> CategoryTable {
    let cat = |id, name: &str, is_thing| Category {
        id,
        name: name.to_string(),
        is_thing,
    };
    CategoryTable::new(vec![
        cat(PERSON, "person", true),
        cat(VEHICLE, "vehicle", true),
        cat(ANIMAL, "animal", true),
        cat(SKY, "sky", false),
        cat(WALL, "wall", false),
        cat(GROUND, "ground", false),
    ])
}

/// A filled shape in pixel coordinates `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect {
        top: i64,
        left: i64,
        height: i64,
        width: i64,
    },
    Ellipse {
        center: (f64, f64),
        radii: (f64, f64),
    },
    /// Star-shaped outline `r(t) = radius (1 + sum a_j cos(j t + phase_j))`, `j = 2, 3, 4`.
    Blob {
        center: (f64, f64),
        radius: f64,
        harmonics: [(f64, f64); 3],
    },
}

impl Shape {
    pub fn contains(&self, r: i64, c: i64) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => r >= top && r < top + height && c >= left && c < left + width,
            Shape::Ellipse { center, radii } => {
                let dy = (r as f64 - center.0) / radii.0;
                let dx = (c as f64 - center.1) / radii.1;
                dy * dy + dx * dx <= 1.0
            }
            Shape::Blob {
                center,
                radius,
                harmonics,
            } => {
                let dy = r as f64 - center.0;
                let dx = c as f64 - center.1;
                let t = dy.atan2(dx);
                let wobble: f64 = harmonics
                    .iter()
                    .enumerate()
                    .map(|(j, (a, phase))| a * ((j as f64 + 2.0) * t + phase).cos())
                    .sum();
                (dy * dy + dx * dx).sqrt() <= radius * (1.0 + wobble)
            }
        }
    }

    /// Inclusive bounding box `(r0, c0, r1, c1)`, possibly outside the image.
    pub fn bbox(&self) -> (i64, i64, i64, i64) {
        match *self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => (top, left, top + height - 1, left + width - 1),
            Shape::Ellipse { center, radii } => (
                (center.0 - radii.0).floor() as i64,
                (center.1 - radii.1).floor() as i64,
                (center.0 + radii.0).ceil() as i64,
                (center.1 + radii.1).ceil() as i64,
            ),
            Shape::Blob {
                center,
                radius,
                harmonics,
            } => {
                let reach = radius * (1.0 + harmonics.iter().map(|h| h.0.abs()).sum::<f64>());
                (
                    (center.0 - reach).floor() as i64,
                    (center.1 - reach).floor() as i64,
                    (center.0 + reach).ceil() as i64,
                    (center.1 + reach).ceil() as i64,
                )
            }
        }
    }

    /// In-image pixels covered by the shape.
    pub fn pixels(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        let (r0, c0, r1, c1) = self.bbox();
        let mut out = Vec::new();
        for r in r0.max(0)..=r1.min(height as i64 - 1) {
            for c in c0.max(0)..=c1.min(width as i64 - 1) {
                if self.contains(r, c) {
                    out.push((r as usize, c as usize));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub shape: Shape,
    pub category: u32,
}

/// Paints instances in order over a stuff-category background.
///
/// Stuff segments get ids `1..` in ascending category order, instances follow
/// in placement order; instances hidden entirely are dropped.
pub fn compose(background: &Array2<u32>, placements: &[Placement]) -> PanopticAnnotation {
    let (h, w) = background.dim();
    let mut stuff_cats: Vec<u32> = background.iter().copied().collect();
    stuff_cats.sort_unstable();
    stuff_cats.dedup();
    let stuff_id: BTreeMap<u32, u32> = stuff_cats
        .iter()
        .enumerate()
        .map(|(i, &cat)| (cat, i as u32 + 1))
        .collect();
    let mut ids = background.mapv(|cat| stuff_id[&cat]);
    let mut segments: BTreeMap<u32, SegmentInfo> = stuff_id
        .iter()
        .map(|(&category, &id)| {
            (
                id,
                SegmentInfo {
                    category,
                    is_thing: false,
                },
            )
        })
        .collect();

    let first_thing = stuff_cats.len() as u32 + 1;
    for (i, p) in placements.iter().enumerate() {
        let id = first_thing + i as u32;
        for px in p.shape.pixels(h, w) {
            ids[px] = id;
        }
        segments.insert(
            id,
            SegmentInfo {
                category: p.category,
                is_thing: true,
            },
        );
    }

    let mut present = vec![false; placements.len()];
    for &id in ids.iter() {
        if id >= first_thing {
            present[(id - first_thing) as usize] = true;
        }
    }
    for (i, seen) in present.into_iter().enumerate() {
        if !seen {
            segments.remove(&(first_thing + i as u32));
        }
    }
    // stuff fully covered by things has no pixels left
    let areas: BTreeMap<u32, u64> = {
        let mut a = BTreeMap::new();
        for &id in ids.iter() {
            *a.entry(id).or_insert(0u64) += 1;
        }
        a
    };
    segments.retain(|id, _| areas.contains_key(id));
    PanopticAnnotation { ids, segments }
}

const PLACEMENT_ATTEMPTS: usize = 60;

/// Draws a scene from `spec`; identical specs give identical scenes.
pub fn generate(spec: &SceneSpec) -> Result<PanopticAnnotation> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    if spec.instances.0 > 0 && spec.scale.0 > h.min(w) as f64 {
        return Err(Error::Unplaceable(format!(
            "smallest instance size {} exceeds the {h} x {w} image",
            spec.scale.0
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let bands = spec.stuff_categories.len();
    let mut cuts: Vec<usize> = (1..bands)
        .map(|i| {
            let nominal = i as f64 * h as f64 / bands as f64;
            let jitter = rng.random_range(-0.25..=0.25) * h as f64 / bands as f64;
            (nominal + jitter).round().clamp(1.0, h as f64 - 1.0) as usize
        })
        .collect();
    cuts.sort_unstable();
    let background = Array2::from_shape_fn((h, w), |(r, _)| {
        spec.stuff_categories[cuts.iter().filter(|&&cut| r >= cut).count()]
    });

    let target = rng.random_range(spec.instances.0..=spec.instances.1);
    let mut owner: Array2<u32> = Array2::zeros((h, w));
    let mut visible: Vec<usize> = Vec::new();
    let mut placements: Vec<Placement> = Vec::new();

    for _ in 0..target {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let shape = sample_shape(spec, &mut rng);
            let pixels = shape.pixels(h, w);
            if pixels.is_empty() {
                continue;
            }
            let mut hidden = vec![0usize; placements.len()];
            for &p in &pixels {
                if owner[p] != 0 {
                    hidden[owner[p] as usize - 1] += 1;
                }
            }
            let acceptable = match spec.occlusion {
                Occlusion::None => hidden.iter().all(|&n| n == 0),
                Occlusion::Stacked { max_hidden } => hidden
                    .iter()
                    .zip(&visible)
                    .all(|(&n, &vis)| vis == 0 || n as f64 <= max_hidden * vis as f64),
            };
            if !acceptable {
                continue;
            }
            let slot = placements.len() as u32 + 1;
            for &p in &pixels {
                if owner[p] != 0 {
                    visible[owner[p] as usize - 1] -= 1;
                }
                owner[p] = slot;
            }
            visible.push(pixels.len());
            let category = spec.thing_categories[rng.random_range(0..spec.thing_categories.len())];
            placements.push(Placement { shape, category });
            break;
        }
    }

    if placements.len() < spec.instances.0.min(1) {
        return Err(Error::Unplaceable(format!(
            "no instance fits after {PLACEMENT_ATTEMPTS} attempts"
        )));
    }
    Ok(compose(&background, &placements))
}

fn sample_shape(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Shape {
    let (h, w) = (spec.height as f64, spec.width as f64);
    let size = if spec.scale.0 == spec.scale.1 {
        spec.scale.0
    } else {
        (rng.random_range(spec.scale.0.ln()..=spec.scale.1.ln())).exp()
    };
    let aspect: f64 = rng.random_range(0.6..=1.6);
    let sy = (size * aspect.sqrt()).min(h).max(1.0);
    let sx = (size / aspect.sqrt()).min(w).max(1.0);
    let cy = rng.random_range(sy / 2.0..=(h - sy / 2.0).max(sy / 2.0));
    let cx = rng.random_range(sx / 2.0..=(w - sx / 2.0).max(sx / 2.0));
    match spec.shapes[rng.random_range(0..spec.shapes.len())] {
        ShapeFamily::Rectangle => Shape::Rect {
            top: (cy - sy / 2.0).round() as i64,
            left: (cx - sx / 2.0).round() as i64,
            height: sy.round().max(1.0) as i64,
            width: sx.round().max(1.0) as i64,
        },
        ShapeFamily::Ellipse => Shape::Ellipse {
            center: (cy, cx),
            radii: ((sy / 2.0).max(0.5), (sx / 2.0).max(0.5)),
        },
        ShapeFamily::Blob => {
            let mut harmonics = [(0.0, 0.0); 3];
            for hm in &mut harmonics {
                *hm = (rng.random_range(0.0..=0.12), rng.random_range(0.0..TAU));
            }
            Shape::Blob {
                center: (cy, cx),
                radius: (sy.min(sx) / 2.0 / 1.36).max(0.5),
                harmonics,
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub output: InferenceOutput,
    /// Prediction at working resolution.
    pub prediction: PanopticMap,
    /// Prediction against the downsampled ground truth.
    pub working: PqStats,
    /// Upsampled prediction against the full-resolution ground truth.
    pub full: PqStats,
}

/// Runs inference on labels derived from `ann` (full resolution).
pub fn oracle_run(
    ann: &PanopticAnnotation,
    categories: &CategoryTable,
    pipeline: &Pipeline,
) -> Result<OracleOutcome> {
    let scale = pipeline.config.fuse.scale as usize;
    let working_gt = ann.downsample(scale);
    let labels = encode_labels(&working_gt, &pipeline.vf);
    let votes = VoteTensor::one_hot(&labels);
    let output = infer(&votes, &labels.semantic, categories, pipeline)?;
    let prediction = output.panoptic.clone();
    let working = evaluate(
        &prediction,
        &PanopticMap::from_annotation(&working_gt),
        categories,
    )?;
    let upsampled = prediction.upsample(scale, ann.ids.dim());
    let full = evaluate(&upsampled, &PanopticMap::from_annotation(ann), categories)?;
    Ok(OracleOutcome {
        output,
        prediction,
        working,
        full,
    })
}

/// Scores the downsampled-then-upsampled ground truth against itself at full resolution.
pub fn resolution_ceiling(
    ann: &PanopticAnnotation,
    categories: &CategoryTable,
    scale: usize,
) -> Result<PqStats> {
    let gt = PanopticMap::from_annotation(ann);
    let coarse = PanopticMap::from_annotation(&ann.downsample(scale));
    let restored = coarse.upsample(scale, ann.ids.dim());
    evaluate(&restored, &gt, categories)
}

/// Working-resolution spacing of [`separated_scene`] instances, beyond the default grid's reach.
pub const SEPARATED_SLOT: usize = 170;

/// Full-resolution scene with `instances` convex things in a row, each in its
/// own slot far enough from the others that no vote can reach a neighbor.
pub fn separated_scene(seed: u64, instances: usize, scale: usize) -> PanopticAnnotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = scale as f64;
    let (h, w) = (64 * scale, SEPARATED_SLOT * instances.max(1) * scale);
    let split = rng.random_range(20..44) * scale;
    let background = Array2::from_shape_fn((h, w), |(r, _)| if r < split { SKY } else { GROUND });
    let things = [PERSON, VEHICLE, ANIMAL];
    let placements: Vec<Placement> = (0..instances)
        .map(|i| {
            let cy = 32.0 * s + rng.random_range(-8.0..8.0) * s;
            let cx =
                (i as f64 + 0.5) * SEPARATED_SLOT as f64 * s + rng.random_range(-10.0..10.0) * s;
            let (sy, sx) = (
                rng.random_range(8.0..32.0) * s,
                rng.random_range(8.0..32.0) * s,
            );
            let shape = if rng.random_bool(0.5) {
                Shape::Rect {
                    top: (cy - sy / 2.0).round() as i64,
                    left: (cx - sx / 2.0).round() as i64,
                    height: sy.round() as i64,
                    width: sx.round() as i64,
                }
            } else {
                Shape::Ellipse {
                    center: (cy, cx),
                    radii: (sy / 2.0, sx / 2.0),
                }
            };
            Placement {
                shape,
                category: things[rng.random_range(0..things.len())],
            }
        })
        .collect();
    compose(&background, &placements)
}

/// Full-resolution scene whose two instances share a centroid: a square
/// with a smaller square painted over its center.
pub fn colliding_scene(scale: usize) -> PanopticAnnotation {
    let s = scale as i64;
    let (h, w) = (64 * scale, 64 * scale);
    let background = Array2::from_shape_fn((h, w), |(r, _)| if r < h / 2 { SKY } else { GROUND });
    let square = |side: i64, category| Placement {
        shape: Shape::Rect {
            top: (32 - side / 2) * s,
            left: (32 - side / 2) * s,
            height: side * s,
            width: side * s,
        },
        category,
    };
    compose(&background, &[square(30, VEHICLE), square(10, PERSON)])
}

/// Thing segment ids of an annotation with their visible pixels.
pub fn thing_supports(ann: &PanopticAnnotation) -> BTreeMap<u32, Vec<(usize, usize)>> {
    let mut out: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for (p, &id) in ann.ids.indexed_iter() {
        if id != VOID_SEGMENT && ann.segments[&id].is_thing {
            out.entry(id).or_default().push(p);
        }
    }
    out
}
