//! Point-prompted segmentation on a binary image.
//!
//! The selection is the union of the 8-connected foreground components
//! under the foreground clicks. A background click that lands on one of
//! those components would contradict a foreground click, so it is reported
//! rather than silently dropping the component.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{label_components, BinaryImage, Connectivity, Pixel, PixelRegion};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SegmentError {
    #[error("at least one foreground point is required")]
    NoForegroundPoint,
    #[error("point ({x}, {y}) is outside the image")]
    OutOfBounds { x: u32, y: u32 },
    #[error("point ({x}, {y}) lies on the opposite class")]
    PointOnOppositeClass { x: u32, y: u32 },
    #[error("selection is empty")]
    EmptyResult,
}

pub fn segment_by_points(
    img: &BinaryImage,
    fg_points: &[Pixel],
    bg_points: &[Pixel],
) -> Result<PixelRegion, SegmentError> {
    if fg_points.is_empty() {
        return Err(SegmentError::NoForegroundPoint);
    }
    for p in fg_points.iter().chain(bg_points) {
        if p.x >= img.width() || p.y >= img.height() {
            return Err(SegmentError::OutOfBounds { x: p.x, y: p.y });
        }
    }
    if let Some(p) = fg_points.iter().find(|p| !img.get(p.x, p.y)) {
        return Err(SegmentError::PointOnOppositeClass { x: p.x, y: p.y });
    }

    let labels = label_components(img, true, Connectivity::Eight);
    let mut selected = vec![false; labels.count as usize + 1];
    for p in fg_points {
        selected[labels.at(p.x, p.y) as usize] = true;
    }
    if let Some(p) = bg_points.iter().find(|p| selected[labels.at(p.x, p.y) as usize]) {
        return Err(SegmentError::PointOnOppositeClass { x: p.x, y: p.y });
    }

    let mut pixels = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if selected[labels.at(x, y) as usize] {
                pixels.push(Pixel { x, y });
            }
        }
    }
    if pixels.is_empty() {
        return Err(SegmentError::EmptyResult);
    }
    Ok(PixelRegion::from_pixels(pixels))
}
