//! Per-image cut-out extraction, as used by `extract-patterns` and the
//! work pattern endpoint.

use jianzhi_core::classify::{classify_unit_pattern, Classification, Exemplar};
use jianzhi_core::cutout::{extract_cutouts, CutoutMask};
use jianzhi_core::descriptor::descriptors;
use jianzhi_core::raster::{binarize, BinaryImage, GrayImage, PixelBox, ThresholdMethod};
use jianzhi_core::sawtooth::{detect_sawtooth, is_sawtooth};
use jianzhi_core::vectorize::{mismatch, vectorize, DEFAULT_TOLERANCE};
use jianzhi_core::VectorPath;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub cutout_id: u32,
    pub bbox: PixelBox,
    pub area: usize,
    pub parent_component: u32,
    /// Absent when there are fewer exemplars than `k`.
    pub classification: Option<Classification>,
    pub sawtooth_score: f64,
    pub sawtooth: bool,
    /// Outline in image pixel coordinates.
    pub path: VectorPath,
    pub mismatch_px: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternManifest {
    pub work_id: String,
    pub width: u32,
    pub height: u32,
    pub min_area: usize,
    pub cutouts: Vec<PatternEntry>,
}

pub fn binarize_default(img: &GrayImage) -> BinaryImage {
    binarize(img, ThresholdMethod::Otsu, false).expect("GrayImage is never empty")
}

pub fn describe_cutout(c: &CutoutMask, exemplars: &[Exemplar], k: usize) -> PatternEntry {
    let classification = descriptors(&c.region)
        .ok()
        .and_then(|d| classify_unit_pattern(&d.features(), exemplars, k).ok());
    let sawtooth_score = detect_sawtooth(&c.region).unwrap_or(0.0);
    let path = vectorize(&c.region, DEFAULT_TOLERANCE).expect("cut-outs are non-empty");
    PatternEntry {
        cutout_id: c.cutout_id,
        bbox: c.bbox,
        area: c.area,
        parent_component: c.parent_component,
        classification,
        sawtooth_score,
        sawtooth: is_sawtooth(sawtooth_score),
        mismatch_px: mismatch(&c.region, &path),
        path,
    }
}

pub fn extract_patterns(
    work_id: &str,
    mask: &BinaryImage,
    min_area: usize,
    exemplars: &[Exemplar],
    k: usize,
) -> (PatternManifest, Vec<CutoutMask>) {
    let cutouts = extract_cutouts(mask, min_area);
    let entries = cutouts.iter().map(|c| describe_cutout(c, exemplars, k)).collect();
    (
        PatternManifest {
            work_id: work_id.into(),
            width: mask.width(),
            height: mask.height(),
            min_area,
            cutouts: entries,
        },
        cutouts,
    )
}
