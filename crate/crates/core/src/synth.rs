//! Deterministic drawing primitives for synthetic paper-cuttings.
//!
//! Shapes are sampled at pixel centres `(x + 0.5, y + 0.5)`.

use crate::geometry::Point;
use crate::raster::BinaryImage;

pub fn fill_rect(img: &mut BinaryImage, x: u32, y: u32, w: u32, h: u32, value: bool) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.set(xx, yy, value);
        }
    }
}

pub fn fill_disk(img: &mut BinaryImage, cx: f64, cy: f64, r: f64, value: bool) {
    fill_where(img, |px, py| {
        let dx = px - cx;
        let dy = py - cy;
        dx * dx + dy * dy <= r * r
    }, value);
}

pub fn fill_ring(img: &mut BinaryImage, cx: f64, cy: f64, r_outer: f64, r_inner: f64, value: bool) {
    fill_where(img, |px, py| {
        let d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
        d2 <= r_outer * r_outer && d2 > r_inner * r_inner
    }, value);
}

/// Fill a convex polygon given in counter-clockwise or clockwise order.
pub fn fill_convex_polygon(img: &mut BinaryImage, vertices: &[Point], value: bool) {
    if vertices.len() < 3 {
        return;
    }
    let orientation = signed_area(vertices).signum();
    fill_where(img, |px, py| {
        (0..vertices.len()).all(|i| {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            let cross = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
            cross * orientation >= 0.0
        })
    }, value);
}

/// Horizontal strip whose top edge is a triangle wave with `teeth` peaks.
#[allow(clippy::too_many_arguments)]
pub fn fill_sawtooth_strip(
    img: &mut BinaryImage,
    x: f64,
    y: f64,
    tooth_width: f64,
    tooth_height: f64,
    base_height: f64,
    teeth: u32,
    value: bool,
) {
    let total = tooth_width * teeth as f64;
    let base_top = y + tooth_height;
    fill_where(img, |px, py| {
        if px < x || px >= x + total || py >= base_top + base_height {
            return false;
        }
        if py >= base_top {
            return true;
        }
        let phase = ((px - x) % tooth_width) / tooth_width;
        let rise = 1.0 - (2.0 * phase - 1.0).abs();
        py >= base_top - rise * tooth_height
    }, value);
}

fn fill_where(img: &mut BinaryImage, inside: impl Fn(f64, f64) -> bool, value: bool) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            if inside(x as f64 + 0.5, y as f64 + 0.5) {
                img.set(x, y, value);
            }
        }
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let mut acc = 0.0;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_is_close_to_pi_r_squared() {
        let mut img = BinaryImage::blank(50, 50).unwrap();
        fill_disk(&mut img, 25.0, 25.0, 20.0, true);
        let area = img.count_ones() as f64;
        let exact = core::f64::consts::PI * 400.0;
        assert!((area - exact).abs() / exact < 0.01);
    }

    #[test]
    fn sawtooth_strip_has_requested_extent() {
        let mut img = BinaryImage::blank(80, 30).unwrap();
        fill_sawtooth_strip(&mut img, 4.0, 4.0, 8.0, 6.0, 5.0, 8, true);
        // Every column inside the strip reaches the base.
        for x in 4..68 {
            assert!(img.get(x, 12));
        }
        assert!(!img.get(3, 12));
        assert!(!img.get(68, 12));
    }
}
