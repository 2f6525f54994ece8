//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use pcv_core::backproject::{backproject, resolve, Claim};
use pcv_core::harness::oracle_report;
use pcv_core::lossnorm::{normalized_loss, segment_weights};
use pcv_core::panoptic::{
    Category, CategoryTable, PanopticAnnotation, PanopticMap, Segment, SegmentInfo,
};
use pcv_core::panoptic_io::{category_records, ArchiveWriter};
use pcv_core::synth::{colliding_scene, separated_scene, synthetic_categories, thing_supports};
use pcv_core::tensor_io::{self, DType};
use pcv_core::{
    aggregate_votes, brute_force_aggregate, build_grid, encode_labels, evaluate, infer,
    invert_grid, oracle_run, top_votes, FuseConfig, GridScheme, InferenceConfig, PeakRegion,
    Pipeline, SceneSpec, VoteTensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let got: Vec<(GridScheme, usize)> = [GridScheme::Default, GridScheme::Toy, GridScheme::Uniform]
        .into_iter()
        .map(|s| (s, build_grid(&s.spec()).unwrap().num_cells()))
        .collect();
    within(Duration::from_secs(1), start.elapsed())?;
    let want = [233, 17, 225];
    check(
        got.iter().map(|g| g.1).eq(want),
        format!(
            "K default/toy/uniform = {:?} in {:.2?}",
            got.iter().map(|g| g.1).collect::<Vec<_>>(),
            start.elapsed()
        ),
    )
}

/// Random distribution per pixel; `spread` classes get mass.
fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, k: usize, spread: usize) -> VoteTensor {
    let mut probs = Array3::zeros((h, w, k + 1));
    for r in 0..h {
        for c in 0..w {
            let mut total = 0.0;
            for _ in 0..spread {
                let ch = rng.random_range(0..=k);
                let v: f64 = rng.random_range(0.0..1.0);
                probs[(r, c, ch)] += v;
                total += v;
            }
            if total == 0.0 {
                probs[(r, c, k)] = 1.0;
                continue;
            }
            for ch in 0..=k {
                probs[(r, c, ch)] /= total;
            }
        }
    }
    VoteTensor::new(probs, Array2::from_elem((h, w), false)).unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let grids = [
        build_grid(&GridScheme::Toy.spec()).unwrap(),
        build_grid(&GridScheme::Default.spec()).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let vf = &grids[i % 2];
        let (h, w) = (rng.random_range(1..=64), rng.random_range(1..=64));
        // dense on the toy grid, a handful of cells per pixel on the default grid
        let spread = if i % 2 == 0 {
            vf.num_cells() + 1
        } else {
            rng.random_range(1..=6)
        };
        let v = random_tensor(&mut rng, h, w, vf.num_cells(), spread);
        let fast = aggregate_votes(&v, vf).unwrap();
        let slow = brute_force_aggregate(&v, vf).unwrap();
        let diff = fast
            .votes
            .iter()
            .zip(slow.votes.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    within(Duration::from_secs(60), start.elapsed())?;
    check(
        worst <= 1e-6,
        format!(
            "100 tensors, max |fast - brute| = {worst:.2e} in {:.2?}",
            start.elapsed()
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for scheme in [GridScheme::Toy, GridScheme::Simple, GridScheme::Default] {
        let vf = build_grid(&scheme.spec()).unwrap();
        let k = vf.num_cells();
        let pad = vf.radius() as usize;
        let n = 20;
        let (h, w) = (n + 2 * pad, n + 2 * pad);
        let mut probs = Array3::zeros((h, w, k + 1));
        let mut cast = 0.0;
        for r in 0..h {
            for c in 0..w {
                if (pad..pad + n).contains(&r) && (pad..pad + n).contains(&c) {
                    let a: f64 = rng.random_range(0.0..1.0);
                    let b: f64 = rng.random_range(0.0..1.0 - a);
                    probs[(r, c, rng.random_range(0..k))] += a;
                    probs[(r, c, rng.random_range(0..k))] += b;
                    probs[(r, c, k)] = 1.0 - a - b;
                    cast += a + b;
                } else {
                    probs[(r, c, k)] = 1.0;
                }
            }
        }
        let v = VoteTensor::new(probs, Array2::from_elem((h, w), false)).unwrap();
        let total = aggregate_votes(&v, &vf).unwrap().total();
        worst = worst.max((total - cast).abs() / cast);
    }
    check(
        worst <= 1e-5,
        format!("toy/simple/default interior scenes, max relative mass error {worst:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let configs: Vec<(String, InferenceConfig)> =
        [GridScheme::Default, GridScheme::Simple, GridScheme::Uniform]
            .into_iter()
            .map(|s| {
                (
                    s.name().to_string(),
                    InferenceConfig {
                        grid: s.spec(),
                        ..InferenceConfig::default()
                    },
                )
            })
            .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let report = pool
        .install(|| {
            oracle_report(
                &SceneSpec::oracle_corpus_scene(0),
                7,
                200,
                &synthetic_categories(),
                &configs,
            )
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(Duration::from_secs(600), elapsed)?;
    let ceiling = report.ceiling.all.pq;
    let pq = |name: &str| {
        report
            .schemes
            .iter()
            .find(|s| s.scheme == name)
            .unwrap()
            .full
            .clone()
    };
    let (d, s, u) = (pq("default"), pq("simple"), pq("uniform"));
    let detail = format!(
        "200 scenes: ceiling PQ {ceiling:.2}, default PQ {:.2}; PQ_th default {:.2} > simple {:.2} > uniform {:.2} in {elapsed:.2?}",
        d.all.pq, d.things.pq, s.things.pq, u.things.pq
    );
    check(
        d.all.pq >= ceiling - 3.0 && d.things.pq > s.things.pq && s.things.pq > u.things.pq,
        detail,
    )
}

fn criterion_5() -> Outcome {
    let categories = synthetic_categories();
    let pipeline = Pipeline::new(InferenceConfig {
        fuse: FuseConfig {
            min_stuff_area: 0,
            scale: 4,
        },
        ..InferenceConfig::default()
    })
    .unwrap();
    let mut exact = 0;
    let scenes = 20;
    for seed in 0..scenes {
        let ann = separated_scene(seed, 3, 4);
        let working = ann.downsample(4);
        let labels = encode_labels(&working, &pipeline.vf);
        let out = infer(
            &VoteTensor::one_hot(&labels),
            &labels.semantic,
            &categories,
            &pipeline,
        )
        .unwrap();
        let want: BTreeSet<Vec<(usize, usize)>> = thing_supports(&working).into_values().collect();
        let got: BTreeSet<Vec<(usize, usize)>> =
            out.masks.iter().map(|m| m.pixels.clone()).collect();
        if got == want {
            exact += 1;
        }
    }
    let merged = oracle_run(&colliding_scene(4), &categories, &pipeline).unwrap();
    let pq = merged.working.summary(&categories).things.pq;
    check(
        exact == scenes && merged.output.peaks.len() == 1 && pq < 100.0,
        format!(
            "{exact}/{scenes} separated scenes exact; colliding centroids give {} detection, PQ_th {pq:.1}",
            merged.output.peaks.len()
        ),
    )
}

fn region(pixels: Vec<(usize, usize)>, total_vote: f64) -> PeakRegion {
    let r0 = pixels.iter().map(|p| p.0).min().unwrap();
    let r1 = pixels.iter().map(|p| p.0).max().unwrap();
    let c0 = pixels.iter().map(|p| p.1).min().unwrap();
    let c1 = pixels.iter().map(|p| p.1).max().unwrap();
    PeakRegion {
        pixels,
        total_vote,
        bbox: (r0, c0, r1, c1),
    }
}

/// Winner for pixel (5, 5) of a 12 x 12 toy-grid scene voting `cells` in order.
fn toy_winner(cells: &[(i64, i64)], peaks: &[PeakRegion]) -> Option<usize> {
    let vf = build_grid(&GridScheme::Toy.spec()).unwrap();
    let qf = invert_grid(&vf);
    let k = vf.num_cells();
    let mut probs = Array3::zeros((12, 12, k + 1));
    for r in 0..12 {
        for c in 0..12 {
            probs[(r, c, k)] = 1.0;
        }
    }
    probs[(5, 5, k)] = 1.0;
    for (i, &off) in cells.iter().enumerate() {
        let p = 0.6 - 0.2 * i as f64;
        probs[(5, 5, vf.lookup(off).unwrap())] = p;
        probs[(5, 5, k)] -= p;
    }
    let v = VoteTensor::new(probs, Array2::from_elem((12, 12), false)).unwrap();
    let masks = backproject(peaks, &top_votes(&v, 3), &qf);
    masks.iter().find(|m| m.pixels == [(5, 5)]).map(|m| m.peak)
}

fn criterion_6() -> Outcome {
    // two cells of size 3 above and below the pixel, one peak in each
    let above = region(vec![(2, 5)], 7.5);
    let below = region(vec![(8, 5)], 12.0);
    let highest = toy_winner(&[(-3, 0), (3, 0)], &[above.clone(), below.clone()]) == Some(1);
    let swapped = toy_winner(
        &[(-3, 0), (3, 0)],
        &[region(vec![(2, 5)], 12.0), region(vec![(8, 5)], 7.5)],
    ) == Some(0);

    // both peaks in the cell above; the nearer bbox center wins over the larger vote
    let near = region(vec![(3, 5)], 5.0);
    let far = region(vec![(2, 6)], 50.0);
    let nearest = toy_winner(&[(-3, 0)], &[far.clone(), near.clone()]) == Some(1)
        && toy_winner(&[(-3, 0)], &[near, far]) == Some(0);

    // equal distances fall back to the lower index, then the larger vote across cells
    let tie = resolve(
        (5, 5),
        &[Claim { peak: 0, cell: 3 }, Claim { peak: 1, cell: 3 }],
        &[region(vec![(3, 4)], 1.0), region(vec![(3, 6)], 9.0)],
    ) == 0;
    check(
        highest && swapped && nearest && tie,
        format!("highest-vote {highest}/{swapped}, nearest-center {nearest}, equal-distance {tie}"),
    )
}

fn vocabulary() -> CategoryTable {
    CategoryTable::new(vec![
        Category {
            id: 1,
            name: "thing-a".into(),
            is_thing: true,
        },
        Category {
            id: 2,
            name: "thing-b".into(),
            is_thing: true,
        },
        Category {
            id: 7,
            name: "stuff-a".into(),
            is_thing: false,
        },
        Category {
            id: 8,
            name: "stuff-b".into(),
            is_thing: false,
        },
    ])
}

fn map_from(ids: Vec<u32>, w: usize, cats: &[(u32, u32)], vocab: &CategoryTable) -> PanopticMap {
    let h = ids.len() / w;
    let segments: BTreeMap<u32, SegmentInfo> = cats
        .iter()
        .map(|&(id, category)| {
            (
                id,
                SegmentInfo {
                    category,
                    is_thing: vocab.is_thing(category).unwrap(),
                },
            )
        })
        .collect();
    PanopticMap::from_annotation(
        &PanopticAnnotation::new(Array2::from_shape_vec((h, w), ids).unwrap(), segments).unwrap(),
    )
}

fn random_scene(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    vocab: &CategoryTable,
    void: bool,
) -> PanopticMap {
    let cats: Vec<u32> = vocab.iter().map(|c| c.id).collect();
    let mut ids = Array2::from_elem((h, w), if void { 0u32 } else { 1 });
    let mut segs = BTreeMap::new();
    if !void {
        segs.insert(1u32, cats[rng.random_range(0..cats.len())]);
    }
    for id in 2..rng.random_range(3..8u32) {
        let (r0, c0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (r1, c1) = (rng.random_range(r0..h), rng.random_range(c0..w));
        for r in r0..=r1 {
            for c in c0..=c1 {
                ids[(r, c)] = id;
            }
        }
        segs.insert(id, cats[rng.random_range(0..cats.len())]);
    }
    let mut m = PanopticMap {
        segment_ids: ids,
        segments: segs
            .into_iter()
            .map(|(id, category)| Segment {
                id,
                category,
                area: 0,
                is_thing: vocab.is_thing(category).unwrap(),
            })
            .collect(),
    };
    m.segments = m.rederive_segments();
    m
}

/// Per-category (iou_sum, tp, fp, fn) by exhaustive pixel-set comparison.
fn naive_stats(pred: &PanopticMap, gt: &PanopticMap) -> BTreeMap<u32, (f64, u64, u64, u64)> {
    let set = |m: &PanopticMap, id: u32| -> BTreeSet<(usize, usize)> {
        m.segment_ids
            .indexed_iter()
            .filter(|(_, &v)| v == id)
            .map(|(p, _)| p)
            .collect()
    };
    let void = set(gt, 0);
    let mut out: BTreeMap<u32, (f64, u64, u64, u64)> = BTreeMap::new();
    let mut matched = BTreeSet::new();
    for g in &gt.segments {
        let gp = set(gt, g.id);
        let e = out.entry(g.category).or_default();
        let mut hit = false;
        for p in pred.segments.iter().filter(|p| p.category == g.category) {
            let pp = set(pred, p.id);
            let inter = gp.intersection(&pp).count() as f64;
            let union = gp.union(&pp).count() as f64 - pp.intersection(&void).count() as f64;
            if inter / union > 0.5 {
                e.0 += inter / union;
                e.1 += 1;
                matched.insert(p.id);
                hit = true;
            }
        }
        if !hit {
            e.3 += 1;
        }
    }
    for p in &pred.segments {
        let pp = set(pred, p.id);
        let e = out.entry(p.category).or_default();
        if !matched.contains(&p.id) && pp.intersection(&void).count() * 2 <= pp.len() {
            e.2 += 1;
        }
    }
    out
}

fn naive_pq(stats: &BTreeMap<u32, (f64, u64, u64, u64)>) -> f64 {
    let per: Vec<f64> = stats
        .values()
        .filter(|s| s.1 + s.2 + s.3 > 0)
        .map(|s| s.0 / (s.1 as f64 + 0.5 * s.2 as f64 + 0.5 * s.3 as f64))
        .collect();
    100.0 * per.iter().sum::<f64>() / per.len() as f64
}

fn criterion_7() -> Outcome {
    let vocab = vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (h, w) = (rng.random_range(4..16), rng.random_range(4..16));
        let gt = random_scene(&mut rng, h, w, &vocab, i % 2 == 0);
        let pred = random_scene(&mut rng, h, w, &vocab, i % 3 == 0);
        let ours = evaluate(&pred, &gt, &vocab).unwrap().summary(&vocab).all.pq;
        let theirs = naive_pq(&naive_stats(&pred, &gt));
        worst = worst.max((ours - theirs).abs() / theirs.abs().max(1e-12));
    }

    let perfect_gt = map_from(vec![1, 1, 2, 2, 3, 3], 3, &[(1, 1), (2, 7), (3, 2)], &vocab);
    let perfect = evaluate(&perfect_gt, &perfect_gt, &vocab)
        .unwrap()
        .summary(&vocab)
        .all
        .pq;

    // thing of 10 pixels matched by 8 of them (IoU 0.8) plus a 4-pixel false positive on stuff
    let gt = map_from(
        [vec![1; 10], vec![2; 10]].concat(),
        20,
        &[(1, 1), (2, 7)],
        &vocab,
    );
    let pred = map_from(
        [vec![5; 8], vec![0; 2], vec![6; 4], vec![9; 6]].concat(),
        20,
        &[(5, 1), (6, 1), (9, 7)],
        &vocab,
    );
    let s = evaluate(&pred, &gt, &vocab).unwrap();
    let things = s.summary(&vocab).things.pq;
    let hand = 100.0 * 0.8 / 1.5;
    let hand_ok = (things - hand).abs() <= 1e-9 * hand
        && s.per_category[&1].tp == 1
        && s.per_category[&1].fp == 1;
    check(
        worst <= 1e-9 && perfect == 100.0 && hand_ok,
        format!("20 random scenes max relative gap {worst:.1e}; perfect PQ {perfect}; hand case PQ_th {things:.4}"),
    )
}

fn strip(areas: &[usize]) -> PanopticAnnotation {
    let ids: Vec<u32> = areas
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| std::iter::repeat_n(i as u32 + 1, a))
        .collect();
    let segments = (0..areas.len())
        .map(|i| {
            (
                i as u32 + 1,
                SegmentInfo {
                    category: 1,
                    is_thing: true,
                },
            )
        })
        .collect();
    PanopticAnnotation::new(
        Array2::from_shape_vec((1, ids.len()), ids).unwrap(),
        segments,
    )
    .unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let areas = [3usize, 17, 120, 1];
    let ann = strip(&areas);
    let n: usize = areas.iter().sum();
    let p = Array2::from_shape_fn((1, n), |_| rng.random_range(0.01..1.0f64));
    let mean = p.iter().map(|x| -x.ln()).sum::<f64>() / n as f64;
    let l0 = normalized_loss(&p, &segment_weights(&ann, 0.0).unwrap()).unwrap();
    let zero_ok = (l0 - mean).abs() <= 1e-12;

    // each segment has mean -ln p = 1 but its own area; all contribute equally
    let mut q = Array2::zeros((1, n));
    let mut start = 0;
    let mut means = Vec::new();
    for (i, &a) in areas.iter().enumerate() {
        let m = 0.5 + i as f64;
        means.push(m);
        for j in 0..a {
            q[(0, start + j)] = (-m).exp();
        }
        start += a;
    }
    let l1 = normalized_loss(&q, &segment_weights(&ann, 1.0).unwrap()).unwrap();
    let want = means.iter().sum::<f64>() / means.len() as f64;
    let one_ok = (l1 - want).abs() <= 1e-12;

    let hand = strip(&[1, 3]);
    let hp = Array2::from_shape_vec(
        (1, 4),
        vec![
            (-1.0f64).exp(),
            (-2.0f64).exp(),
            (-2.0f64).exp(),
            (-2.0f64).exp(),
        ],
    )
    .unwrap();
    let lh = normalized_loss(&hp, &segment_weights(&hand, 1.0).unwrap()).unwrap();
    check(
        zero_ok && one_ok && lh == 1.5,
        format!(
            "lambda 0 gap {:.1e}; lambda 1 gap {:.1e}; hand case {lh}",
            (l0 - mean).abs(),
            (l1 - want).abs()
        ),
    )
}

/// Every file under `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn run_pcv(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pcv"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "pcv {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn criterion_9() -> Outcome {
    let inputs = tempfile::tempdir().unwrap();
    let at = |name: &str| inputs.path().join(name).to_string_lossy().into_owned();

    // inputs for infer and eval-pq
    let pipeline = Pipeline::new(InferenceConfig::default()).unwrap();
    let scene = SceneSpec {
        height: 192,
        width: 192,
        ..SceneSpec::oracle_corpus_scene(5)
    };
    let working = pcv_core::generate(&scene).unwrap().downsample(4);
    let labels = encode_labels(&working, &pipeline.vf);
    tensor_io::write_votes(
        Path::new(&at("votes.pcvt")),
        &VoteTensor::one_hot(&labels),
        DType::F32,
    )
    .unwrap();
    tensor_io::write_semantic(Path::new(&at("semantic.pcvt")), &labels.semantic).unwrap();
    let cats = synthetic_categories();
    std::fs::write(
        at("categories.json"),
        serde_json::to_string(&category_records(&cats)).unwrap(),
    )
    .unwrap();
    let mut gt = ArchiveWriter::new(Path::new(&at("gt.json")), &cats);
    gt.add(1, &PanopticMap::from_annotation(&working)).unwrap();
    gt.finish().unwrap();

    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "gridinfo",
            vec![
                "gridinfo".into(),
                "--scheme".into(),
                "default".into(),
                "--png".into(),
                "OUT/grid.png".into(),
            ],
        ),
        (
            "oracle",
            [
                "oracle",
                "--scheme",
                "default,simple",
                "--scenes",
                "6",
                "--size",
                "160",
                "--seed",
                "1",
                "--report",
                "OUT/oracle.json",
            ]
            .map(String::from)
            .to_vec(),
        ),
        (
            "infer",
            vec![
                "infer".into(),
                "--votes".into(),
                at("votes.pcvt"),
                "--semantic".into(),
                at("semantic.pcvt"),
                "--categories".into(),
                at("categories.json"),
                "--out".into(),
                "OUT/pred.json".into(),
            ],
        ),
        (
            "eval-pq",
            vec![
                "eval-pq".into(),
                "--pred".into(),
                at("gt.json"),
                "--gt".into(),
                at("gt.json"),
                "--report".into(),
                "OUT/pq.json".into(),
            ],
        ),
        (
            "render",
            [
                "render",
                "--seed",
                "3",
                "--size",
                "160",
                "--heatmap",
                "OUT/h.png",
                "--peaks",
                "OUT/p.png",
                "--masks",
                "OUT/m.png",
                "--panoptic",
                "OUT/s.png",
            ]
            .map(String::from)
            .to_vec(),
        ),
    ];

    let work = tempfile::tempdir().unwrap();
    let out_dir = work.path().join("out");
    let mut identical = Vec::new();
    for (name, args) in &runs {
        let mut results = Vec::new();
        for jobs in ["1", "8"] {
            if out_dir.exists() {
                std::fs::remove_dir_all(&out_dir).unwrap();
            }
            std::fs::create_dir_all(&out_dir).unwrap();
            let mut argv: Vec<String> = vec!["--jobs".into(), jobs.into()];
            argv.extend(
                args.iter()
                    .map(|a| a.replace("OUT", &out_dir.to_string_lossy())),
            );
            let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
            let stdout = run_pcv(&argv)?;
            results.push((stdout, snapshot(&out_dir)));
        }
        if results[0].1.is_empty() {
            return Err(format!("{name} produced no artifacts"));
        }
        identical.push((*name, results[0] == results[1]));
    }
    let all = identical.iter().all(|x| x.1);
    check(
        all,
        format!(
            "--jobs 1 vs 8 byte-identical: {}",
            identical
                .iter()
                .map(|(n, ok)| format!("{n}={ok}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("grid cardinalities", criterion_1),
        ("aggregation equivalence", criterion_2),
        ("mass conservation", criterion_3),
        ("synthetic oracle vs ceiling and grid ordering", criterion_4),
        ("backprojection exactness", criterion_5),
        ("tie-break rules", criterion_6),
        ("PQ evaluator", criterion_7),
        ("loss normalization", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        writeln!(stdout, "criterion {}: {tag} {name}: {detail}", i + 1).unwrap();
        if outcome.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
