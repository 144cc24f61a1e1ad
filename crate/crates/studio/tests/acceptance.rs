//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use common::{call, call_raw, corpus_dir, decode_op, flood_fill_hole_pixels, square_element};
use jianzhi_core::cutout::{extract_cutouts, DEFAULT_MIN_AREA};
use jianzhi_core::descriptor::{approx_eq, descriptors};
use jianzhi_core::ideation::{build_ideation_prompt, DesignIntent, DEFAULT_EXEMPLARS, ITEM_SEPARATOR};
use jianzhi_core::moodboard::{BoardOp, Canvas, Element, ElementKind, Fill, Provenance, SceneGraph, Source, TransformOp};
use jianzhi_core::raster::{BinaryImage, Pixel, PixelRegion};
use jianzhi_core::retrieval::{
    build_index, evaluate_recall, search, LookupEmbedder, MockEmbedder, RetrievalIndex, DEFAULT_K, DEFAULT_RECALL_KS,
};
use jianzhi_core::segment::segment_by_points;
use jianzhi_core::synth::{fill_convex_polygon, fill_disk, fill_rect, fill_ring, fill_sawtooth_strip};
use jianzhi_core::taxonomy::{PatternCategory, PatternSubcategory};
use jianzhi_core::vectorize::{mismatch, vectorize, DEFAULT_TOLERANCE, MAX_MISMATCH_FRACTION};
use jianzhi_core::{Affine, Point, VectorPath};
use jianzhi_studio::corpus::{index_items, load_corpus, load_eval_pairs, load_exemplars, load_taxonomy};
use jianzhi_studio::fixtures::{cut_unit, UnitShape};
use jianzhi_studio::gateway::{
    build_generation_prompt, write_cache_record, Gateway, GatewayConfig, GenerationRequest, HttpResponse, ProviderKind,
    SegmentSource, Transport, TransportError, DEFAULT_EMBED_DIM, DEFAULT_MOCK_SEED,
};
use jianzhi_studio::imaging::{binary_to_gray, encode_gray_png, encode_mask_pbm, load_gray, sha256_hex};
use jianzhi_studio::pipeline::{binarize_default, extract_patterns, PatternManifest};
use jianzhi_studio::service::{router, ServiceConfig, Studio};
use jianzhi_studio::session::{load_session, save_session, Session};
use jianzhi_studio::svg::{export_svg, import_svg, subpath_counts, ExportOptions};
use proptest::prelude::RngExt;
use proptest::test_runner::{RngAlgorithm, TestRng};
use serde_json::{json, Value};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

// `!(a <= b)` on purpose: a NaN must fail the check.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let failed = !$cond;
        if failed {
            return Err(format!($($msg)+));
        }
    }};
}

fn rng(seed: u8) -> TestRng {
    TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32])
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// Taxonomy

fn taxonomy_fidelity() -> Check {
    let path = corpus_dir().join("taxonomy.json");
    let t = Instant::now();
    let (factors, patterns) = load_taxonomy(&path).map_err(err)?;
    let elapsed = t.elapsed();

    ensure!(factors.factors.len() == 4, "{} factors", factors.factors.len());
    ensure!(factors.type_count() == 18, "{} types", factors.type_count());
    let subs: BTreeSet<PatternSubcategory> = patterns.lexicon.iter().map(|e| e.subcategory).collect();
    let cats: BTreeSet<PatternCategory> = subs.iter().map(|s| s.category()).collect();
    ensure!(subs.len() == 5 && cats.len() == 2, "{} subcategories, {} categories", subs.len(), cats.len());
    let unit = patterns.count(PatternCategory::Unit);
    let composite = patterns.count(PatternCategory::Composite);
    ensure!((unit, composite) == (25, 42), "lexicon {unit} unit + {composite} composite");

    // Any deviation from the counts must be a load error.
    let original: Value = serde_json::from_str(&std::fs::read_to_string(&path).map_err(err)?).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut deviations: Vec<(&str, Value)> = Vec::new();
    let mut v = original.clone();
    v["factors"][0]["types"].as_array_mut().unwrap().pop();
    deviations.push(("type removed", v));
    let mut v = original.clone();
    let mut extra = v["factors"][1]["types"][0].clone();
    extra["name"] = json!("Extra Type");
    v["factors"][1]["types"].as_array_mut().unwrap().push(extra);
    deviations.push(("type added", v));
    let mut v = original.clone();
    v["factors"].as_array_mut().unwrap().pop();
    deviations.push(("factor removed", v));
    let mut v = original.clone();
    v["lexicon"].as_array_mut().unwrap().remove(0);
    deviations.push(("lexicon entry removed", v));
    let mut v = original.clone();
    let mut dup = v["lexicon"][30].clone();
    dup["name"] = json!("extra motif");
    v["lexicon"].as_array_mut().unwrap().push(dup);
    deviations.push(("lexicon entry added", v));
    for (what, v) in deviations {
        let p = tmp.path().join("taxonomy.json");
        std::fs::write(&p, v.to_string()).map_err(err)?;
        ensure!(load_taxonomy(&p).is_err(), "{what}: loaded without error");
    }
    ensure!(elapsed < Duration::from_secs(1), "load took {elapsed:?}");
    Ok(format!("4 factors, 18 types, 5 subcategories, 25+42 lexicon, 5 deviations rejected, load {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// Retrieval

/// Full sort over every entry: score descending, then id ascending.
fn brute_force(raw: &[(String, Vec<f64>)], q: &[f64], k: usize) -> Vec<(String, f64)> {
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let qn = unit(q);
    let mut all: Vec<(String, f64)> = raw
        .iter()
        .map(|(id, v)| {
            let vn = unit(v);
            let mut s = 0.0;
            for i in 0..vn.len() {
                s += qn[i] * vn[i];
            }
            (id.clone(), s)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn retrieval_oracle() -> Check {
    let mut r = rng(1);
    let d = 64;
    let mut raw: Vec<(String, Vec<f64>)> = Vec::new();
    for i in 0..200 {
        // Every tenth vector repeats an earlier one so ties are common.
        let v = if i % 10 == 9 {
            raw[r.random_range(0..raw.len())].1.clone()
        } else {
            (0..d).map(|_| r.random_range(-1.0..1.0)).collect()
        };
        raw.push((format!("v{:03}", r.random_range(0..1000) * 1000 + i), v));
    }
    let t = Instant::now();
    let index = RetrievalIndex::from_vectors(d, raw.iter().map(|(id, v)| (id.clone(), v.clone(), BTreeMap::new())))
        .map_err(err)?;
    let mut queries: Vec<Vec<f64>> = (0..20).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    for i in 0..20 {
        queries.push(raw[i * 10 + 9].1.clone());
    }
    let mut compared = 0;
    let mut tied = 0;
    for q in &queries {
        for k in [1, 5, 20] {
            let got: Vec<(String, f64)> = search(&index, q, k)
                .map_err(err)?
                .into_iter()
                .enumerate()
                .map(|(i, x)| {
                    assert_eq!(x.rank, i + 1);
                    (x.work_id, x.score)
                })
                .collect();
            let want = brute_force(&raw, q, k);
            ensure!(got == want, "k={k}: {got:?} != {want:?}");
            tied += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
            compared += 1;
        }
    }
    let elapsed = t.elapsed();
    ensure!(tied > 0, "the fixture produced no ties");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{compared} searches equal the full sort, {tied} tied neighbours, {elapsed:.2?}"))
}

fn recall_harness() -> Check {
    let data = corpus_dir();
    let kb = load_corpus(&data).map_err(err)?;
    let mock = MockEmbedder::new(DEFAULT_EMBED_DIM, DEFAULT_MOCK_SEED);
    let index = build_index(&index_items(&kb), &mock).map_err(err)?;
    let pairs: Vec<(String, String)> = load_eval_pairs(&data.join("eval_pairs.jsonl"))
        .map_err(err)?
        .into_iter()
        .map(|p| (p.query, p.gt))
        .collect();
    let identity = LookupEmbedder {
        dim: index.dim,
        table: pairs.iter().map(|(q, gt)| (q.clone(), index.vector(gt).unwrap().to_vec())).collect(),
        default: None,
    };
    let r = evaluate_recall(&index, &pairs, &identity, &DEFAULT_RECALL_KS).map_err(err)?;
    for k in DEFAULT_RECALL_KS {
        ensure!(r.recall_at[&k] == 1.0, "identity recall@{k} = {}", r.recall_at[&k]);
    }

    // Ten works equally similar to one fixed query vector. The tie rule
    // ranks them by id, so every query sees w00..w09 in that order and
    // only the query whose answer is w00 hits at rank 1: 1/10.
    let dim = 16;
    let works = (0..10).map(|i| {
        let mut v = vec![0.0; dim];
        v[0] = 1.0;
        v[i + 1] = 1.0;
        (format!("w{i:02}"), v, BTreeMap::new())
    });
    let adv_index = RetrievalIndex::from_vectors(dim, works).map_err(err)?;
    let mut fixed = vec![0.0; dim];
    fixed[0] = 1.0;
    let adversarial = LookupEmbedder {
        dim,
        table: BTreeMap::new(),
        default: Some(fixed),
    };
    let adv_pairs: Vec<(String, String)> = (0..10).map(|i| (format!("query {i}"), format!("w{i:02}"))).collect();
    let a = evaluate_recall(&adv_index, &adv_pairs, &adversarial, &DEFAULT_RECALL_KS).map_err(err)?;
    ensure!(a.recall_at[&1] == 0.1, "adversarial recall@1 = {}", a.recall_at[&1]);
    ensure!(a.recall_at[&5] == 0.5 && a.recall_at[&10] == 1.0, "adversarial {:?}", a.recall_at);
    Ok(format!(
        "identity recall@1/5/10 = 1.0 over {} queries; adversarial recall@1/5/10 = 0.1/0.5/1.0",
        pairs.len()
    ))
}

// ---------------------------------------------------------------------------
// Cut-outs and vectorization

fn sheet(w: u32, h: u32, margin: u32) -> BinaryImage {
    let mut img = BinaryImage::blank(w, h).unwrap();
    fill_rect(&mut img, margin, margin, w - 2 * margin, h - 2 * margin, true);
    img
}

/// Ten synthetic paper-cuttings, each stressing one part of hole finding.
fn cutout_suite() -> Vec<(&'static str, BinaryImage)> {
    let mut out = Vec::new();

    let mut img = sheet(64, 64, 4);
    fill_rect(&mut img, 20, 20, 16, 12, false);
    out.push(("single rectangle", img));

    // Hole, island of paper inside it, hole inside the island.
    let mut img = sheet(96, 96, 4);
    fill_disk(&mut img, 48.0, 48.0, 36.0, false);
    fill_disk(&mut img, 48.0, 48.0, 24.0, true);
    fill_rect(&mut img, 40, 40, 16, 16, false);
    out.push(("nested island", img));

    // A notch open to the outside is not a cut-out.
    let mut img = sheet(80, 80, 6);
    fill_rect(&mut img, 0, 30, 30, 10, false);
    fill_rect(&mut img, 45, 45, 12, 12, false);
    out.push(("open notch", img));

    // Two holes touching only at a corner stay separate.
    let mut img = sheet(60, 60, 5);
    fill_rect(&mut img, 15, 15, 10, 10, false);
    fill_rect(&mut img, 25, 25, 10, 10, false);
    out.push(("diagonal neighbours", img));

    // Holes of area 1..=8, around the minimum-area cut.
    let mut img = sheet(120, 30, 3);
    for a in 1..=8u32 {
        fill_rect(&mut img, 8 + (a - 1) * 13, 10, a, 1, false);
    }
    out.push(("tiny holes", img));

    let mut img = sheet(120, 120, 6);
    for i in 0..6 {
        for j in 0..6 {
            fill_rect(&mut img, 12 + i * 17, 12 + j * 17, 9 + (i + j) % 4, 9, false);
        }
    }
    out.push(("grid of 36", img));

    let mut img = sheet(140, 60, 6);
    fill_sawtooth_strip(&mut img, 20.0, 20.0, 6.0, 6.0, 8.0, 15, false);
    out.push(("sawtooth strip", img));

    let mut img = sheet(100, 100, 6);
    cut_unit(&mut img, UnitShape::Crescent, 35.0, 50.0, 20.0, 0.7);
    cut_unit(&mut img, UnitShape::CopperCoin, 72.0, 50.0, 14.0, 0.0);
    out.push(("crescent and coin", img));

    // Walls one pixel thick.
    let mut img = sheet(70, 40, 4);
    for i in 0..5 {
        fill_rect(&mut img, 10 + i * 10, 10, 9, 20, false);
    }
    out.push(("thin walls", img));

    let mut r = rng(7);
    let mut img = sheet(160, 160, 8);
    for _ in 0..40 {
        let (x, y) = (r.random_range(12.0..148.0), r.random_range(12.0..148.0));
        match r.random_range(0..3) {
            0 => fill_disk(&mut img, x, y, r.random_range(2.0..9.0), false),
            1 => fill_ring(&mut img, x, y, r.random_range(5.0..10.0), r.random_range(1.0..4.0), false),
            _ => fill_disk(&mut img, x, y, r.random_range(1.0..6.0), true),
        }
    }
    out.push(("random blobs", img));
    out
}

fn cutout_extraction() -> Check {
    let mut holes = 0;
    for (name, img) in cutout_suite() {
        for min_area in [1, DEFAULT_MIN_AREA] {
            let mut got: Vec<Vec<(u32, u32)>> = extract_cutouts(&img, min_area)
                .iter()
                .map(|c| c.region.pixels().iter().map(|p| (p.x, p.y)).collect())
                .collect();
            let mut want = flood_fill_hole_pixels(&img, min_area);
            ensure!(got.len() == want.len(), "{name} (min area {min_area}): {} cut-outs, oracle {}", got.len(), want.len());
            got.sort();
            want.sort();
            ensure!(got == want, "{name} (min area {min_area}): cut-out pixels differ from the oracle");
            holes += want.len();
        }
    }

    // The corpus extraction, run twice, must produce identical bytes.
    let run = || -> Result<String, String> {
        let data = corpus_dir();
        let kb = load_corpus(&data).map_err(err)?;
        let exemplars = load_exemplars(&data).map_err(err)?;
        let mut all = Vec::new();
        for w in kb.works() {
            let mask = binarize_default(&load_gray(&data.join(&w.image_ref)).map_err(err)?);
            let (manifest, cutouts) = extract_patterns(&w.work_id, &mask, DEFAULT_MIN_AREA, &exemplars, 5);
            all.extend(serde_json::to_vec_pretty(&manifest).map_err(err)?);
            for c in &cutouts {
                all.extend(encode_mask_pbm(&c.region.to_local_bitmap(0).unwrap().0));
            }
        }
        Ok(sha256_hex(&all))
    };
    let (a, b) = (run()?, run()?);
    ensure!(a == b, "corpus extraction differs between runs: {a} vs {b}");
    Ok(format!("10 images, {holes} holes equal the flood fill; corpus digest {} stable", &a[..12]))
}

/// Even-odd fill sampled at pixel centres, by scanline crossings.
fn scanline_fill(path: &VectorPath, x0: u32, y0: u32, w: u32, h: u32) -> Vec<bool> {
    let mut out = vec![false; (w * h) as usize];
    for row in 0..h {
        let yc = (y0 + row) as f64 + 0.5;
        let mut xs = Vec::new();
        for sp in &path.subpaths {
            for seg in sp.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                if (a.y <= yc) != (b.y <= yc) {
                    xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks(2) {
            if let [l, r] = pair {
                for col in 0..w {
                    let xc = (x0 + col) as f64 + 0.5;
                    if xc >= *l && xc < *r {
                        out[(row * w + col) as usize] = true;
                    }
                }
            }
        }
    }
    out
}

fn oracle_mismatch(region: &PixelRegion, path: &VectorPath) -> (usize, u64) {
    let bb = region.bbox().unwrap();
    let fill = scanline_fill(path, bb.x, bb.y, bb.width, bb.height);
    let mut n = 0;
    for row in 0..bb.height {
        for col in 0..bb.width {
            if fill[(row * bb.width + col) as usize] != region.contains(bb.x + col, bb.y + row) {
                n += 1;
            }
        }
    }
    (n, bb.area())
}

fn large_masks() -> Vec<(&'static str, PixelRegion)> {
    let mut out = Vec::new();
    let mut img = BinaryImage::blank(512, 512).unwrap();
    fill_disk(&mut img, 256.0, 256.0, 250.0, true);
    out.push(("disk", img.foreground_region()));

    let mut r = rng(11);
    let mut img = sheet(512, 512, 6);
    for _ in 0..150 {
        let (x, y) = (r.random_range(20.0..492.0), r.random_range(20.0..492.0));
        let shape = UnitShape::ALL[r.random_range(0..UnitShape::ALL.len())];
        cut_unit(&mut img, shape, x, y, r.random_range(6.0..16.0), r.random_range(0.0..3.0));
    }
    let labels = segment_by_points(&img, &[Pixel { x: 8, y: 8 }], &[]).map_err(err).unwrap();
    out.push(("perforated sheet", labels));

    let mut img = BinaryImage::blank(512, 512).unwrap();
    let star: Vec<Point> = (0..5)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / 5.0;
            Point::new(256.0 + 240.0 * a.cos(), 256.0 + 240.0 * a.sin())
        })
        .collect();
    fill_convex_polygon(&mut img, &star, true);
    fill_sawtooth_strip(&mut img, 100.0, 240.0, 7.0, 9.0, 20.0, 44, false);
    out.push(("toothed pentagon", img.foreground_region()));
    out
}

fn vectorization_round_trip() -> Check {
    let mut regions: Vec<(String, PixelRegion)> = Vec::new();
    for (name, img) in cutout_suite() {
        for c in extract_cutouts(&img, 1) {
            regions.push((format!("{name} #{}", c.cutout_id), c.region));
        }
    }
    let data = corpus_dir();
    for n in 1..=20 {
        let img = binarize_default(&load_gray(&data.join(format!("images/w{n:02}.png"))).map_err(err)?);
        regions.push((format!("w{n:02} sheet"), img.foreground_region()));
        for c in extract_cutouts(&img, DEFAULT_MIN_AREA) {
            regions.push((format!("w{n:02} #{}", c.cutout_id), c.region));
        }
    }
    let mut worst = 0.0f64;
    for (name, region) in &regions {
        let path = vectorize(region, DEFAULT_TOLERANCE).map_err(|e| format!("{name}: {e}"))?;
        let (bad, area) = oracle_mismatch(region, &path);
        ensure!(bad == mismatch(region, &path), "{name}: scanline oracle and library mismatch disagree");
        let frac = bad as f64 / area as f64;
        ensure!(frac <= MAX_MISMATCH_FRACTION, "{name}: {bad} of {area} pixels ({:.2}%)", frac * 100.0);
        worst = worst.max(frac);
    }
    let mut slowest = Duration::ZERO;
    for (name, region) in large_masks() {
        let t = Instant::now();
        let path = vectorize(&region, DEFAULT_TOLERANCE).map_err(err)?;
        let elapsed = t.elapsed();
        let (bad, area) = oracle_mismatch(&region, &path);
        let frac = bad as f64 / area as f64;
        ensure!(frac <= MAX_MISMATCH_FRACTION, "512px {name}: {:.2}% mismatch", frac * 100.0);
        ensure!(elapsed < Duration::from_secs(1), "512px {name}: {elapsed:?}");
        worst = worst.max(frac);
        slowest = slowest.max(elapsed);
    }
    Ok(format!(
        "{} masks, worst mismatch {:.3}%, slowest 512x512 {slowest:.2?}",
        regions.len() + 3,
        worst * 100.0
    ))
}

// ---------------------------------------------------------------------------
// Descriptors

fn unit_region(shape: UnitShape) -> PixelRegion {
    let mut img = sheet(96, 96, 0);
    cut_unit(&mut img, shape, 48.0, 48.0, 20.0, 0.3);
    extract_cutouts(&img, 1).remove(0).region
}

fn map_region(region: &PixelRegion, f: impl Fn(u32, u32) -> Vec<(u32, u32)>) -> PixelRegion {
    PixelRegion::from_pixels(
        region
            .pixels()
            .iter()
            .flat_map(|p| f(p.x, p.y))
            .map(|(x, y)| Pixel { x, y })
            .collect(),
    )
}

fn descriptor_invariance() -> Check {
    let mut worst = 0.0f64;
    for shape in UnitShape::ALL {
        let base = unit_region(shape);
        let d0 = descriptors(&base).map_err(err)?;
        let moved = descriptors(&base.translated(37, 11)).map_err(err)?;
        ensure!(moved == d0, "{}: translation changed the descriptor", shape.name());

        let doubled = map_region(&base, |x, y| vec![(2 * x, 2 * y), (2 * x + 1, 2 * y), (2 * x, 2 * y + 1), (2 * x + 1, 2 * y + 1)]);
        let turned = map_region(&base, |x, y| vec![(200 - y, x)]);
        for (what, region) in [("2x scale", doubled), ("90° rotation", turned)] {
            let d = descriptors(&region).map_err(err)?;
            for (i, (a, b)) in d0.features().iter().zip(d.features()).enumerate() {
                ensure!(
                    approx_eq(*a, b, 1e-2, 1e-9),
                    "{} {what}: feature {i} {a} vs {b}",
                    shape.name()
                );
                if a.abs().max(b.abs()) > 1e-9 {
                    worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
                }
            }
        }
    }
    Ok(format!("{} shapes, translation exact, worst relative change {worst:.2e}", UnitShape::ALL.len()))
}

// ---------------------------------------------------------------------------
// Segmentation

/// Union of the 8-connected ink components under `fg`.
fn selection_oracle(img: &BinaryImage, fg: &[Pixel]) -> Vec<bool> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut sel = vec![false; (w * h) as usize];
    let mut queue: VecDeque<(i64, i64)> = VecDeque::new();
    for p in fg {
        let i = (p.y as i64 * w + p.x as i64) as usize;
        if !sel[i] {
            sel[i] = true;
            queue.push_back((p.x as i64, p.y as i64));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    let j = (ny * w + nx) as usize;
                    if !sel[j] && img.get(nx as u32, ny as u32) {
                        sel[j] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
        }
    }
    sel
}

/// Fails every call in one of several ways, chosen at random.
struct FaultyProvider {
    rng: Mutex<TestRng>,
    blank: Vec<u8>,
    tiny: Vec<u8>,
}

impl Transport for FaultyProvider {
    fn post_json(&self, _: &str, _: Option<&str>, _: &[u8], _: Duration) -> Result<HttpResponse, TransportError> {
        let body = |v: Value| HttpResponse { status: 200, body: v.to_string().into_bytes() };
        let pick = self.rng.lock().unwrap().random_range(0..8);
        match pick {
            0 => Err(TransportError::Timeout),
            1 => Err(TransportError::Io("connection reset".into())),
            2 => Ok(HttpResponse { status: 503, body: vec![] }),
            3 => Ok(HttpResponse { status: 401, body: vec![] }),
            4 => Ok(HttpResponse { status: 200, body: b"not json".to_vec() }),
            5 => Ok(body(json!({ "mask_pbm_b64": "***" }))),
            6 => Ok(body(json!({ "mask_pbm_b64": B64.encode(&self.tiny) }))),
            _ => Ok(body(json!({ "mask_pbm_b64": B64.encode(&self.blank) }))),
        }
    }
}

fn segmentation_fallback() -> Check {
    const SIZE: u32 = 48;
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut cfg = GatewayConfig::with_cache(tmp.path());
    let seg = cfg.provider_mut(ProviderKind::Segment);
    seg.endpoint = Some("http://segmenter.invalid/v1".into());
    seg.max_retries = 1;
    let transport = FaultyProvider {
        rng: Mutex::new(rng(3)),
        blank: encode_mask_pbm(&BinaryImage::blank(SIZE, SIZE).unwrap()),
        tiny: encode_mask_pbm(&BinaryImage::blank(4, 4).unwrap()),
    };
    let gateway = Gateway::with_transport(cfg, std::sync::Arc::new(transport)).with_sleep(std::sync::Arc::new(|_| {}));

    let mut r = rng(5);
    let mut with_bg = 0;
    for case in 0..500 {
        let mut img = BinaryImage::blank(SIZE, SIZE).unwrap();
        for _ in 0..r.random_range(1..6) {
            let (x, y) = (r.random_range(0.0..SIZE as f64), r.random_range(0.0..SIZE as f64));
            if r.random_bool(0.5) {
                fill_disk(&mut img, x, y, r.random_range(2.0..12.0), true);
            } else {
                let (w, h) = (r.random_range(1..20), r.random_range(1..20));
                fill_rect(&mut img, x as u32, y as u32, w.min(SIZE - x as u32), h.min(SIZE - y as u32), true);
            }
            if r.random_bool(0.3) {
                fill_disk(&mut img, x, y, r.random_range(1.0..4.0), false);
            }
        }
        let ink: Vec<Pixel> = img.foreground_region().pixels().to_vec();
        if ink.is_empty() {
            img.set(SIZE / 2, SIZE / 2, true);
        }
        let ink: Vec<Pixel> = if ink.is_empty() { img.foreground_region().pixels().to_vec() } else { ink };
        let fg: Vec<Pixel> = (0..r.random_range(1..4)).map(|_| ink[r.random_range(0..ink.len())]).collect();
        let oracle = selection_oracle(&img, &fg);
        let outside: Vec<Pixel> = (0..SIZE * SIZE)
            .filter(|i| !oracle[*i as usize])
            .map(|i| Pixel { x: i % SIZE, y: i / SIZE })
            .collect();
        let bg: Vec<Pixel> = if outside.is_empty() {
            Vec::new()
        } else {
            (0..r.random_range(0..4)).map(|_| outside[r.random_range(0..outside.len())]).collect()
        };
        with_bg += usize::from(!bg.is_empty());

        let direct = segment_by_points(&img, &fg, &bg).map_err(|e| format!("case {case}: {e}"))?;
        let png = encode_gray_png(&binary_to_gray(&img));
        let routed = gateway
            .segment(&png, &img, &fg, &bg)
            .map_err(|e| format!("case {case}: fault surfaced as {e}"))?;
        ensure!(routed.source == SegmentSource::Fallback && routed.fault.is_some(), "case {case}: not routed to fallback");
        for (route, mask) in [("direct", &direct), ("gateway", &routed.mask)] {
            ensure!(fg.iter().all(|p| mask.contains(p.x, p.y)), "case {case} {route}: a fg point is outside the mask");
            ensure!(bg.iter().all(|p| !mask.contains(p.x, p.y)), "case {case} {route}: a bg point is inside the mask");
            let same = (0..SIZE * SIZE).all(|i| mask.contains(i % SIZE, i / SIZE) == oracle[i as usize]);
            ensure!(same, "case {case} {route}: mask differs from the flood-fill selection");
        }
    }
    Ok(format!("500 cases ({with_bg} with bg points) hold on both routes; every injected fault fell back"))
}

// ---------------------------------------------------------------------------
// Mood board

fn moodboard_algebra() -> Check {
    let mut r = rng(9);

    for _ in 0..200 {
        let a = Affine::new(
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-5.0..5.0),
            r.random_range(-500.0..500.0),
            r.random_range(-500.0..500.0),
        );
        let mut board = SceneGraph::new(Canvas::default());
        let mut e = square_element("e".into(), false, 0.0, 0.0, 10.0);
        e.transform = a;
        if board.add_element(e).is_err() {
            continue;
        }
        for flip in [TransformOp::FlipH, TransformOp::FlipV] {
            board.apply_transform("e", flip).map_err(err)?;
            board.apply_transform("e", flip).map_err(err)?;
            let t = board.node("e").unwrap().transform();
            ensure!(t == a, "{flip:?} twice: {t:?} != {a:?}");
        }
    }

    let mut worst = 0.0f64;
    for trial in 0..200 {
        let mut board = SceneGraph::new(Canvas::default());
        let n = r.random_range(2..6);
        let ids: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        for id in &ids {
            board.add_element(square_element(id.clone(), false, 0.0, 0.0, 5.0)).map_err(err)?;
            board
                .apply_transform(id, TransformOp::Translate { dx: r.random_range(-300.0..300.0), dy: r.random_range(-300.0..300.0) })
                .map_err(err)?;
            board.apply_transform(id, TransformOp::Rotate { degrees: r.random_range(-180.0..180.0) }).map_err(err)?;
        }
        let g = board.group(&ids, None).map_err(err)?;
        board.apply_transform(&g, TransformOp::Rotate { degrees: r.random_range(-360.0..360.0) }).map_err(err)?;
        board.apply_transform(&g, TransformOp::Scale { sx: r.random_range(0.2..3.0), sy: r.random_range(0.2..3.0) }).map_err(err)?;
        board.apply_transform(&g, TransformOp::Translate { dx: r.random_range(-100.0..100.0), dy: 7.5 }).map_err(err)?;
        let before: Vec<Affine> = ids.iter().map(|id| board.world_transform(id).unwrap()).collect();
        board.ungroup(&g).map_err(err)?;
        for (id, b) in ids.iter().zip(before) {
            let a = board.world_transform(id).unwrap();
            let diff = [a.a - b.a, a.b - b.b, a.c - b.c, a.d - b.d, a.e - b.e, a.f - b.f]
                .iter()
                .fold(0.0f64, |m, d| m.max(d.abs()));
            ensure!(diff <= 1e-9, "trial {trial}: {id} moved by {diff:e} on ungroup");
            worst = worst.max(diff);
        }
    }

    let mut applied_total = 0;
    for seq in 0..10u8 {
        let mut r = rng(100 + seq);
        let mut board = SceneGraph::new(Canvas::default());
        for step in 0..1000 {
            let code = (r.random(), r.random(), r.random(), r.random());
            let op = decode_op(&board, step, code);
            let before = board.clone();
            match board.apply(&op) {
                Ok(_) => applied_total += 1,
                Err(_) => ensure!(board == before, "sequence {seq} step {step}: failed op changed the board"),
            }
            board.check_invariants().map_err(|e| format!("sequence {seq} step {step}: {e}"))?;
        }
        for opts in [ExportOptions::default(), ExportOptions { mm_per_unit: Some(0.1) }] {
            let first = export_svg(&board, opts);
            let back = import_svg(first.as_bytes()).map_err(|e| format!("sequence {seq}: {e}"))?;
            ensure!(back == board, "sequence {seq}: import differs from the board");
            ensure!(export_svg(&back, opts) == first, "sequence {seq}: export is not byte-stable");
        }
    }
    Ok(format!(
        "flip² exact, ungroup drift ≤ {worst:.1e}, 10×1000 ops ({applied_total} applied) keep the forest, SVG byte-stable"
    ))
}

// ---------------------------------------------------------------------------
// End to end

fn offline_end_to_end() -> Check {
    let cache = tempfile::tempdir().map_err(err)?;
    let env: BTreeMap<&str, String> = [
        ("HC_OFFLINE", "1".to_string()),
        ("HC_CACHE_DIR", cache.path().display().to_string()),
        ("HC_DATA_DIR", corpus_dir().display().to_string()),
    ]
    .into_iter()
    .collect();
    let config = ServiceConfig::from_env(|k| env.get(k).cloned());
    ensure!(config.k_retrieve == DEFAULT_K && DEFAULT_K == 20, "default k is {}", config.k_retrieve);
    ensure!(config.gateway.text.offline && config.gateway.embed.endpoint.is_none(), "gateway is not offline/mock");

    // Warm the replay caches for the text and generation providers.
    let kb = load_corpus(&config.data_dir).map_err(err)?;
    let intent: DesignIntent = serde_json::from_value(json!({
        "intent_text": "a magpie on a plum branch for the spring festival",
        "selections": { "Function": "Festive Atmosphere Evoking", "Subject Matter": "Flora and Fauna" }
    }))
    .map_err(err)?;
    let bundle = build_ideation_prompt(&intent, &kb, DEFAULT_EXEMPLARS).map_err(err)?;
    let reply = format!(
        "OBJECTS:\n- magpie{s}joy arriving\n- plum blossom{s}endurance in winter\nPATTERNS:\n- crescent{s}a soft moon\n- fine sawtooth{s}feather texture\n",
        s = ITEM_SEPARATOR
    );
    write_cache_record(cache.path(), ProviderKind::Text, json!({ "bundle": bundle }), json!({ "text": reply })).map_err(err)?;
    let idea_text = "magpie perched on plum blossom, crescent cut-outs";
    let gen = GenerationRequest::new(build_generation_prompt(idea_text, "").map_err(err)?);
    let generated_png = encode_gray_png(&binary_to_gray(&jianzhi_studio::fixtures::render_work(3)));
    write_cache_record(
        cache.path(),
        ProviderKind::Generate,
        json!({ "prompt": gen.prompt, "n": 2, "size": [gen.width, gen.height] }),
        json!({ "images": [B64.encode(&generated_png), B64.encode(encode_gray_png(&binary_to_gray(&jianzhi_studio::fixtures::render_work(4))))] }),
    )
    .map_err(err)?;

    let t = Instant::now();
    let studio = Studio::open(config).map_err(err)?;
    let app = router(std::sync::Arc::new(studio));
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(err)?;
    let summary = rt.block_on(async {
        let (status, s) = call(&app, "POST", "/session", None).await;
        ensure!(status == StatusCode::CREATED, "create session: {status}");
        let sid = s["session_id"].as_str().unwrap().to_string();
        let at = |p: &str| format!("/session/{sid}{p}");

        let (status, sugg) = call(&app, "POST", &at("/intent"), Some(serde_json::to_value(&intent).unwrap())).await;
        ensure!(status == StatusCode::OK, "intent: {sugg}");
        ensure!(sugg["source"] == "provider", "suggestions did not come from the replay cache: {sugg}");

        let accept = json!({ "accepted": [
            { "kind": "object", "index": 0, "name": "magpie" },
            { "kind": "pattern", "index": 0, "name": "crescent" }
        ], "text": idea_text });
        let (status, idea) = call(&app, "POST", &at("/idea"), Some(accept)).await;
        ensure!(status == StatusCode::OK, "idea: {idea}");

        let (status, refs) = call(&app, "GET", &at("/references?mode=both&count=2"), None).await;
        ensure!(status == StatusCode::OK, "references: {refs}");
        let retrieved = refs["retrieved"].as_array().unwrap();
        ensure!(retrieved.len() == 20, "{} retrieved references", retrieved.len());
        ensure!(refs["generated"].as_array().unwrap().len() == 2, "generated: {refs}");

        let top = retrieved[0]["work_id"].as_str().unwrap().to_string();
        let (status, seg) = call(
            &app,
            "POST",
            &at("/segment"),
            Some(json!({ "image_ref": retrieved[0]["image_ref"], "fg": [{ "x": 20, "y": 20 }], "bg": [{ "x": 2, "y": 2 }] })),
        )
        .await;
        ensure!(status == StatusCode::OK, "segment: {seg}");
        let (status, seg_gen) = call(
            &app,
            "POST",
            &at("/segment"),
            Some(json!({ "image_ref": refs["generated"][0]["image_ref"], "fg": [{ "x": 20, "y": 20 }] })),
        )
        .await;
        ensure!(status == StatusCode::OK, "segment generated: {seg_gen}");

        let (status, manifest) = call(&app, "GET", &format!("/works/{top}/patterns"), None).await;
        ensure!(status == StatusCode::OK, "patterns: {manifest}");
        let manifest: PatternManifest = serde_json::from_value(manifest).unwrap();
        let cut = &manifest.cutouts[0];

        let outline: VectorPath = serde_json::from_value(seg["path"].clone()).unwrap();
        let outline_subpaths = outline.subpaths.len();
        let ops = [
            BoardOp::AddElement {
                element: Element {
                    id: "sheet".into(),
                    path: outline,
                    transform: Affine::IDENTITY,
                    kind: ElementKind::Contour,
                    fill: Fill::Foreground,
                    provenance: Provenance { source: Source::Retrieved, work_id: Some(top.clone()), cutout_id: None },
                    holes: vec![],
                },
            },
            BoardOp::AddElement {
                element: Element {
                    id: "moon".into(),
                    path: cut.path.clone(),
                    transform: Affine::IDENTITY,
                    kind: ElementKind::Cutout,
                    fill: Fill::Hole,
                    provenance: Provenance { source: Source::Extracted, work_id: Some(top.clone()), cutout_id: Some(cut.cutout_id) },
                    holes: vec![],
                },
            },
            BoardOp::Transform { id: "moon".into(), transform: TransformOp::Translate { dx: 3.0, dy: 2.0 } },
            BoardOp::ApplyCutout { cutout_id: "moon".into(), target_id: "sheet".into() },
        ];
        for (v, op) in ops.iter().enumerate() {
            let (status, reply) = call(&app, "POST", &at("/board/ops"), Some(json!({ "version": v, "op": op }))).await;
            ensure!(status == StatusCode::OK, "op {v}: {reply}");
        }
        let (status, svg) = call_raw(&app, "GET", &at("/export.svg"), None).await;
        ensure!(status == StatusCode::OK, "export: {status}");
        let svg = String::from_utf8(svg).unwrap();
        let counts = subpath_counts(&svg);
        let want = outline_subpaths + cut.path.subpaths.len();
        ensure!(counts.get("sheet") == Some(&want), "export subpaths {counts:?}, expected sheet = {want}");
        Ok(format!("top work {top}, export {} bytes", svg.len()))
    })?;
    let elapsed = t.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "workflow took {elapsed:?}");
    Ok(format!("{summary}, k = 20, {elapsed:.2?}"))
}

fn session_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut total_ops = 0;
    for n in 0..50u8 {
        let mut r = rng(200 + n);
        let mut s = Session::new(format!("s{n}"), Canvas::default());
        for step in 0..r.random_range(10..300) {
            let op = decode_op(&s.board, step, (r.random(), r.random(), r.random(), r.random()));
            let _ = s.apply_op(op, s.board_version);
            if r.random_bool(0.05) && !s.op_log.is_empty() {
                s.undo(s.board_version).map_err(err)?;
            }
        }
        total_ops += s.op_log.len();
        let opts = ExportOptions { mm_per_unit: if n % 2 == 0 { None } else { Some(0.2) } };
        let direct = export_svg(&s.board, opts);

        let path = tmp.path().join(format!("s{n}.json"));
        save_session(&s, &path).map_err(err)?;
        let loaded = load_session(&path).map_err(err)?;
        ensure!(export_svg(&loaded.board, opts) == direct, "session {n}: export after save/load differs");
        let replayed = SceneGraph::replay(s.board.canvas, &s.op_log).map_err(|(i, e)| format!("session {n} op {i}: {e}"))?;
        ensure!(export_svg(&replayed, opts) == direct, "session {n}: export after replay differs");
        let again = tmp.path().join(format!("s{n}-again.json"));
        save_session(&loaded, &again).map_err(err)?;
        ensure!(
            std::fs::read(&path).map_err(err)? == std::fs::read(&again).map_err(err)?,
            "session {n}: save is not byte-stable"
        );
    }
    Ok(format!("50 sessions, {total_ops} logged ops, exports identical after save/load and replay"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("taxonomy fidelity", taxonomy_fidelity),
        ("retrieval oracle equivalence", retrieval_oracle),
        ("recall-harness correctness", recall_harness),
        ("cut-out extraction", cutout_extraction),
        ("vectorization round-trip", vectorization_round_trip),
        ("descriptor invariance", descriptor_invariance),
        ("segmentation fallback contract", segmentation_fallback),
        ("mood board algebra", moodboard_algebra),
        ("offline end-to-end", offline_end_to_end),
        ("session determinism", session_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.2?}]", t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.2?}]", t.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
