//! Grayscale and binary rasters, pixel regions, Otsu binarization and
//! connected-component labelling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("buffer holds {got} pixels, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(RasterError::SizeMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Foreground mask; `true` is paper.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(RasterError::SizeMismatch {
                expected,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn blank(width: u32, height: u32) -> Result<Self, RasterError> {
        Self::new(width, height, vec![false; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[self.index(x, y)]
    }

    /// Out-of-bounds reads return `false`.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        self.in_bounds(x, y) && self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = self.index(x, y);
        self.bits[i] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn inverted(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// All `true` pixels as a region.
    pub fn foreground_region(&self) -> PixelRegion {
        let mut pixels = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    pixels.push(Pixel { x, y });
                }
            }
        }
        PixelRegion { pixels }
    }

    pub fn from_region(width: u32, height: u32, region: &PixelRegion) -> Result<Self, RasterError> {
        let mut img = Self::blank(width, height)?;
        for p in &region.pixels {
            if p.x < width && p.y < height {
                img.set(p.x, p.y, true);
            }
        }
        Ok(img)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

/// Integer pixel box with its top-left corner at `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl PixelBox {
    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// A set of pixels kept in row-major order without duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRegion {
    pixels: Vec<Pixel>,
}

impl PixelRegion {
    pub fn from_pixels(mut pixels: Vec<Pixel>) -> Self {
        pixels.sort_by_key(|p| (p.y, p.x));
        pixels.dedup();
        Self { pixels }
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.pixels
            .binary_search_by_key(&(y, x), |p| (p.y, p.x))
            .is_ok()
    }

    pub fn bbox(&self) -> Option<PixelBox> {
        let first = self.pixels.first()?;
        let (mut x0, mut x1) = (first.x, first.x);
        let y0 = first.y;
        let y1 = self.pixels.last()?.y;
        for p in &self.pixels {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
        }
        Some(PixelBox {
            x: x0,
            y: y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        })
    }

    /// Rasterize into a bitmap covering the bbox plus `pad` pixels on each
    /// side. Returns the bitmap and the image coordinate of its origin.
    pub fn to_local_bitmap(&self, pad: u32) -> Option<(BinaryImage, i64, i64)> {
        let bb = self.bbox()?;
        let w = bb.width + 2 * pad;
        let h = bb.height + 2 * pad;
        let mut img = BinaryImage::blank(w, h).ok()?;
        for p in &self.pixels {
            img.set(p.x - bb.x + pad, p.y - bb.y + pad, true);
        }
        Some((img, i64::from(bb.x) - i64::from(pad), i64::from(bb.y) - i64::from(pad)))
    }

    pub fn translated(&self, dx: u32, dy: u32) -> PixelRegion {
        PixelRegion {
            pixels: self
                .pixels
                .iter()
                .map(|p| Pixel {
                    x: p.x + dx,
                    y: p.y + dy,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMethod {
    #[default]
    Otsu,
    Fixed(u8),
}

/// Otsu threshold: pixels `<= t` form the dark class.
///
/// Between-class variance is constant over a run of empty histogram bins,
/// so the midpoint of the maximizing run is returned. A uniform image
/// yields `127`, making dark uniform images foreground and light ones
/// background.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for v in img.data() {
        hist[*v as usize] += 1;
    }
    let total = img.data().len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, c)| i as f64 * *c as f64)
        .sum();

    let mut best = -1.0f64;
    let mut best_lo = 127usize;
    let mut best_hi = 127usize;
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    for (t, &count) in hist.iter().enumerate().take(255) {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_lo = t;
            best_hi = t;
        } else if between == best && best_hi + 1 == t {
            best_hi = t;
        }
    }
    ((best_lo + best_hi) / 2) as u8
}

/// Threshold a grayscale image. Foreground is the darker class unless
/// `invert` is set.
pub fn binarize(
    img: &GrayImage,
    method: ThresholdMethod,
    invert: bool,
) -> Result<BinaryImage, RasterError> {
    if img.width() == 0 || img.height() == 0 {
        return Err(RasterError::EmptyImage);
    }
    let t = match method {
        ThresholdMethod::Otsu => otsu_threshold(img),
        ThresholdMethod::Fixed(t) => t,
    };
    let bits = img.data().iter().map(|v| (*v <= t) != invert).collect();
    BinaryImage::new(img.width(), img.height(), bits)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Label image from [`label_components`]; `0` marks pixels of the other
/// value. Labels start at 1 and follow the raster order of each
/// component's first pixel.
#[derive(Clone, Debug)]
pub struct Labels {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl Labels {
    pub fn at(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

fn uf_find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn uf_union(parent: &mut [u32], a: u32, b: u32) {
    let ra = uf_find(parent, a);
    let rb = uf_find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labelling of the pixels equal to `value`.
pub fn label_components(img: &BinaryImage, value: bool, conn: Connectivity) -> Labels {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if img.bits()[y * w + x] != value {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if x > 0 && labels[y * w + x - 1] != 0 {
                neighbours[n] = labels[y * w + x - 1];
                n += 1;
            }
            if y > 0 {
                if labels[(y - 1) * w + x] != 0 {
                    neighbours[n] = labels[(y - 1) * w + x];
                    n += 1;
                }
                if conn == Connectivity::Eight {
                    if x > 0 && labels[(y - 1) * w + x - 1] != 0 {
                        neighbours[n] = labels[(y - 1) * w + x - 1];
                        n += 1;
                    }
                    if x + 1 < w && labels[(y - 1) * w + x + 1] != 0 {
                        neighbours[n] = labels[(y - 1) * w + x + 1];
                        n += 1;
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let m = *neighbours[..n].iter().min().unwrap();
                for nb in &neighbours[..n] {
                    uf_union(&mut parent, m, *nb);
                }
                m
            };
            labels[y * w + x] = label;
        }
    }

    // Resolve to roots, then renumber by first appearance.
    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = uf_find(&mut parent, *l);
        if remap[root as usize] == 0 {
            next += 1;
            remap[root as usize] = next;
        }
        *l = remap[root as usize];
    }

    Labels {
        width: img.width(),
        height: img.height(),
        labels,
        count: next,
    }
}
