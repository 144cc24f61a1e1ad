//! Cut-out (hole) extraction.
//!
//! Background is 4-connected and foreground 8-connected, so a hole is a
//! background component that cannot reach the image border.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::raster::{label_components, BinaryImage, Connectivity, Pixel, PixelBox, PixelRegion};

pub const DEFAULT_MIN_AREA: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutoutMask {
    /// Rank of the hole among all holes of the image in raster order of
    /// their first pixel, starting at 1. Stable under `min_area` changes.
    pub cutout_id: u32,
    pub region: PixelRegion,
    pub bbox: PixelBox,
    pub area: usize,
    /// Label of the enclosing 8-connected foreground component.
    pub parent_component: u32,
}

pub fn extract_cutouts(img: &BinaryImage, min_area: usize) -> Vec<CutoutMask> {
    let w = img.width();
    let h = img.height();
    let bg = label_components(img, false, Connectivity::Four);
    let fg = label_components(img, true, Connectivity::Eight);

    let n = bg.count as usize;
    let mut touches_border = alloc::vec![false; n + 1];
    for x in 0..w {
        touches_border[bg.at(x, 0) as usize] = true;
        touches_border[bg.at(x, h - 1) as usize] = true;
    }
    for y in 0..h {
        touches_border[bg.at(0, y) as usize] = true;
        touches_border[bg.at(w - 1, y) as usize] = true;
    }

    let mut pixels: Vec<Vec<Pixel>> = alloc::vec![Vec::new(); n + 1];
    for y in 0..h {
        for x in 0..w {
            let l = bg.at(x, y) as usize;
            if l != 0 && !touches_border[l] {
                pixels[l].push(Pixel { x, y });
            }
        }
    }

    let mut out = Vec::new();
    let mut hole_rank = 0u32;
    for (label, px) in pixels.into_iter().enumerate() {
        if label == 0 || touches_border[label] {
            continue;
        }
        hole_rank += 1;
        if px.len() < min_area.max(1) {
            continue;
        }
        // The pixel above a hole's first pixel cannot be background (it
        // would be 4-adjacent), and it exists because holes avoid row 0.
        let first = px[0];
        let parent_component = fg.at(first.x, first.y - 1);
        let region = PixelRegion::from_pixels(px);
        let bbox = region.bbox().expect("non-empty");
        out.push(CutoutMask {
            cutout_id: hole_rank,
            area: region.area(),
            bbox,
            region,
            parent_component,
        });
    }
    out.sort_by_key(|c| (c.bbox.y, c.bbox.x, c.cutout_id));
    out
}
