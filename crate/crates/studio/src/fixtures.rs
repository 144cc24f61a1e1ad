//! Synthetic paper-cuttings for the bundled corpus and the test suites.
//!
//! A work is a square sheet of paper with a 3×3 grid of cut-out unit
//! patterns. Which shape goes in which cell is a pure function of the work
//! number, so images, pattern labels and exemplars can be regenerated
//! byte for byte.

use core::f64::consts::PI;

use jianzhi_core::classify::Exemplar;
use jianzhi_core::cutout::{extract_cutouts, DEFAULT_MIN_AREA};
use jianzhi_core::descriptor::descriptors;
use jianzhi_core::knowledge::PatternAnnotation;
use jianzhi_core::raster::BinaryImage;
use jianzhi_core::synth::{fill_convex_polygon, fill_disk, fill_rect, fill_sawtooth_strip};
use jianzhi_core::taxonomy::PatternSubcategory;
use jianzhi_core::Point;

pub const WORK_SIZE: u32 = 240;
pub const SHEET_MARGIN: u32 = 12;
pub const CELL_CENTRES: [f64; 3] = [48.0, 120.0, 192.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnitShape {
    Circle,
    Square,
    Triangle,
    Rhombus,
    Hexagon,
    Rectangle,
    Crescent,
    CopperCoin,
    FineSawtooth,
    CoarseSawtooth,
}

impl UnitShape {
    pub const ALL: [UnitShape; 10] = [
        UnitShape::Circle,
        UnitShape::Square,
        UnitShape::Triangle,
        UnitShape::Rhombus,
        UnitShape::Hexagon,
        UnitShape::Rectangle,
        UnitShape::Crescent,
        UnitShape::CopperCoin,
        UnitShape::FineSawtooth,
        UnitShape::CoarseSawtooth,
    ];

    /// Lexicon name of the pattern.
    pub fn name(self) -> &'static str {
        match self {
            UnitShape::Circle => "circle",
            UnitShape::Square => "square",
            UnitShape::Triangle => "triangle",
            UnitShape::Rhombus => "rhombus",
            UnitShape::Hexagon => "hexagon",
            UnitShape::Rectangle => "rectangle",
            UnitShape::Crescent => "crescent",
            UnitShape::CopperCoin => "copper coin",
            UnitShape::FineSawtooth => "fine sawtooth",
            UnitShape::CoarseSawtooth => "coarse sawtooth",
        }
    }

    pub fn subcategory(self) -> PatternSubcategory {
        match self {
            UnitShape::Crescent | UnitShape::CopperCoin => PatternSubcategory::SemanticUnit,
            UnitShape::FineSawtooth | UnitShape::CoarseSawtooth => PatternSubcategory::Sawtooth,
            _ => PatternSubcategory::GeometricUnit,
        }
    }
}

fn regular_polygon(cx: f64, cy: f64, r: f64, sides: usize, phase: f64) -> Vec<Point> {
    (0..sides)
        .map(|i| {
            let a = phase + 2.0 * PI * i as f64 / sides as f64;
            Point::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

/// Cut `shape` out of the paper around `(cx, cy)`. `r` is roughly the
/// shape's half-extent and `turn` a rotation in radians for the polygons.
pub fn cut_unit(img: &mut BinaryImage, shape: UnitShape, cx: f64, cy: f64, r: f64, turn: f64) {
    match shape {
        UnitShape::Circle => fill_disk(img, cx, cy, r, false),
        UnitShape::Square => fill_convex_polygon(img, &regular_polygon(cx, cy, r * 0.95, 4, PI / 4.0 + turn), false),
        UnitShape::Triangle => fill_convex_polygon(img, &regular_polygon(cx, cy, r, 3, -PI / 2.0 + turn), false),
        UnitShape::Rhombus => {
            let (c, s) = (turn.cos(), turn.sin());
            let pts: Vec<Point> = [(r, 0.0), (0.0, r * 0.6), (-r, 0.0), (0.0, -r * 0.6)]
                .iter()
                .map(|(x, y)| Point::new(cx + x * c - y * s, cy + x * s + y * c))
                .collect();
            fill_convex_polygon(img, &pts, false);
        }
        UnitShape::Hexagon => fill_convex_polygon(img, &regular_polygon(cx, cy, r, 6, turn), false),
        UnitShape::Rectangle => {
            let (c, s) = (turn.cos(), turn.sin());
            let pts: Vec<Point> = [(r, r * 0.4), (-r, r * 0.4), (-r, -r * 0.4), (r, -r * 0.4)]
                .iter()
                .map(|(x, y)| Point::new(cx + x * c - y * s, cy + x * s + y * c))
                .collect();
            fill_convex_polygon(img, &pts, false);
        }
        UnitShape::Crescent => {
            fill_disk(img, cx, cy, r, false);
            fill_disk(img, cx + r * 0.45 * turn.cos(), cy + r * 0.45 * turn.sin(), r * 0.8, true);
        }
        UnitShape::CopperCoin => {
            fill_disk(img, cx, cy, r, false);
            fill_convex_polygon(img, &regular_polygon(cx, cy, r * 0.45, 4, PI / 4.0), true);
        }
        UnitShape::FineSawtooth | UnitShape::CoarseSawtooth => {
            let (tw, th) = if shape == UnitShape::FineSawtooth { (5.0, 5.0) } else { (8.0, 7.0) };
            let teeth = ((3.0 * r) / tw).floor().max(2.0) as u32;
            let w = tw * teeth as f64;
            fill_sawtooth_strip(img, cx - w / 2.0, cy - r * 0.5, tw, th, r * 0.5, teeth, false);
        }
    }
}

/// Shapes of work `n` (1-based) in row-major cell order.
pub fn work_layout(n: u32) -> [UnitShape; 9] {
    let mut out = [UnitShape::Circle; 9];
    for (cell, slot) in out.iter_mut().enumerate() {
        *slot = UnitShape::ALL[(n as usize * 3 + cell * 7) % UnitShape::ALL.len()];
    }
    out
}

/// Half-extent used for work `n`, so works differ in scale.
pub fn work_radius(n: u32) -> f64 {
    18.0 + (n % 5) as f64
}

pub fn render_work(n: u32) -> BinaryImage {
    let mut img = BinaryImage::blank(WORK_SIZE, WORK_SIZE).expect("non-empty");
    let side = WORK_SIZE - 2 * SHEET_MARGIN;
    fill_rect(&mut img, SHEET_MARGIN, SHEET_MARGIN, side, side, true);
    let r = work_radius(n);
    for (cell, shape) in work_layout(n).into_iter().enumerate() {
        let cx = CELL_CENTRES[cell % 3];
        let cy = CELL_CENTRES[cell / 3];
        cut_unit(&mut img, shape, cx, cy, r, (n as f64) * 0.1);
    }
    img
}

pub fn work_id(n: u32) -> String {
    format!("w{n:02}")
}

/// Pattern labels for work `n`, keyed by the ids the extractor assigns.
pub fn work_patterns(n: u32) -> Vec<PatternAnnotation> {
    let img = render_work(n);
    let layout = work_layout(n);
    extract_cutouts(&img, DEFAULT_MIN_AREA)
        .into_iter()
        .map(|c| {
            let col = c.bbox.x + c.bbox.width / 2;
            let row = c.bbox.y + c.bbox.height / 2;
            let cell = (row / 80) as usize * 3 + (col / 80) as usize;
            let shape = layout[cell];
            PatternAnnotation {
                cutout_id: c.cutout_id,
                work_id: work_id(n),
                subcategory: shape.subcategory(),
                pattern_name: shape.name().into(),
                geometry_ref: format!("images/{}.png#cutout={}", work_id(n), c.cutout_id),
            }
        })
        .collect()
}

/// Labelled descriptors: every shape at four sizes and four rotations, each
/// cut alone from a small sheet.
pub fn exemplars() -> Vec<Exemplar> {
    let mut out = Vec::new();
    for shape in UnitShape::ALL {
        for r in [14.0, 18.0, 22.0, 26.0] {
            for turn in [0.0, 0.4, 0.8, 1.2] {
                let mut img = BinaryImage::blank(96, 96).expect("non-empty");
                fill_rect(&mut img, 0, 0, 96, 96, true);
                cut_unit(&mut img, shape, 48.0, 48.0, r, turn);
                let cut = extract_cutouts(&img, DEFAULT_MIN_AREA);
                let d = descriptors(&cut[0].region).expect("cut-outs are non-empty");
                out.push(Exemplar {
                    subcategory: shape.subcategory().as_str().into(),
                    pattern_name: shape.name().into(),
                    features: d.features(),
                });
            }
        }
    }
    out
}
