//! Bitmap-to-vector conversion and the even-odd rasterizer used to check
//! it.
//!
//! Each boundary loop is reduced with perpendicular-distance
//! (Ramer–Douglas–Peucker) simplification. A chord is also rejected when a
//! mask pixel along the stretch it replaces would fall outside it, which
//! keeps thin strokes from collapsing. If the result still mismatches the
//! mask on more than [`MAX_MISMATCH_FRACTION`] of its bbox, the tolerance is
//! halved until it does not; below half a pixel the exact pixel-edge
//! outline is used.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::contour::{boundary_loops, BoundaryLoop};
use crate::geometry::Point;
use crate::path::VectorPath;
use crate::raster::{BinaryImage, PixelBox, PixelRegion};

pub const DEFAULT_TOLERANCE: f64 = 1.0;
pub const MAX_MISMATCH_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorizeError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("tolerance must be finite and non-negative")]
    BadTolerance,
}

pub fn vectorize(region: &PixelRegion, tolerance: f64) -> Result<VectorPath, VectorizeError> {
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(VectorizeError::BadTolerance);
    }
    let bbox = region.bbox().ok_or(VectorizeError::EmptyMask)?;
    let loops = boundary_loops(region);
    let budget = libm::floor(MAX_MISMATCH_FRACTION * bbox.area() as f64) as usize;

    let mut tol = tolerance;
    loop {
        let rings: Vec<Vec<Point>> = if tol < 0.5 {
            loops.iter().map(BoundaryLoop::corners).collect()
        } else {
            loops.iter().map(|l| simplify_loop(l, tol)).collect()
        };
        let path = VectorPath::from_rings(rings).expect("simplified rings stay closed");
        if tol < 0.5 || mismatch(region, &path) <= budget {
            return Ok(path);
        }
        tol *= 0.5;
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return crate::fmath::hypot(p.x - a.x, p.y - a.y);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    crate::fmath::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy))
}

/// Simplify one closed loop, returning its kept vertices (not closed).
fn simplify_loop(l: &BoundaryLoop, tol: f64) -> Vec<Point> {
    let n = l.len();
    let pts: Vec<Point> = (0..=n)
        .map(|i| {
            let (x, y) = l.vertices[i % n];
            Point::new(x as f64, y as f64)
        })
        .collect();

    // Anchor at vertex 0 and the vertex farthest from it.
    let far = (1..n)
        .max_by(|a, b| {
            let da = crate::fmath::hypot(pts[*a].x - pts[0].x, pts[*a].y - pts[0].y);
            let db = crate::fmath::hypot(pts[*b].x - pts[0].x, pts[*b].y - pts[0].y);
            da.total_cmp(&db).then(b.cmp(a))
        })
        .unwrap_or(0);

    let mut keep = vec![false; n + 1];
    keep[0] = true;
    keep[far] = true;
    keep[n] = true;
    let mut stack = vec![(0usize, far), (far, n)];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let (a, b) = (pts[i], pts[j]);
        let mut worst = i + 1;
        let mut worst_d = -1.0f64;
        for (k, p) in pts.iter().enumerate().take(j).skip(i + 1) {
            let d = segment_distance(*p, a, b);
            if d > worst_d {
                worst_d = d;
                worst = k;
            }
        }
        let uncovers = (i..j).any(|k| cross(a, b, l.inner_pixel_centre(k % n)) <= 0.0);
        if worst_d > tol || uncovers {
            keep[worst] = true;
            stack.push((i, worst));
            stack.push((worst, j));
        }
    }

    let mut out: Vec<Point> = (0..n).filter(|i| keep[*i]).map(|i| pts[i]).collect();
    // A small hole can collapse onto its chord; keep it as traced.
    if out.len() < 3 {
        return l.corners();
    }
    // Drop vertices that ended up collinear with their neighbours.
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        let m = out.len();
        for i in 0..m {
            let prev = out[(i + m - 1) % m];
            let next = out[(i + 1) % m];
            if cross(prev, out[i], next) == 0.0 {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

/// Even-odd rasterization sampled at pixel centres over `window`.
pub fn rasterize_evenodd(path: &VectorPath, window: PixelBox) -> BinaryImage {
    let mut img = BinaryImage::blank(window.width.max(1), window.height.max(1))
        .expect("window has positive size");
    let edges: Vec<(Point, Point)> = path
        .subpaths
        .iter()
        .flat_map(|sp| sp.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a.y != b.y)
        .collect();
    let mut xs: Vec<f64> = Vec::new();
    for row in 0..window.height {
        let yc = f64::from(window.y) + f64::from(row) + 0.5;
        xs.clear();
        for (a, b) in &edges {
            let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
            if yc >= lo.y && yc < hi.y {
                let t = (yc - lo.y) / (hi.y - lo.y);
                xs.push(lo.x + t * (hi.x - lo.x));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            for col in 0..window.width {
                let xc = f64::from(window.x) + f64::from(col) + 0.5;
                if xc >= span[0] && xc < span[1] {
                    let v = !img.get(col, row);
                    img.set(col, row, v);
                }
            }
        }
    }
    img
}

/// Pixels of the region's bbox where the rasterized path and the region
/// disagree.
pub fn mismatch(region: &PixelRegion, path: &VectorPath) -> usize {
    let Some(bb) = region.bbox() else {
        return 0;
    };
    let raster = rasterize_evenodd(path, bb);
    let mut count = 0;
    for row in 0..bb.height {
        for col in 0..bb.width {
            if raster.get(col, row) != region.contains(bb.x + col, bb.y + row) {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Pixel;
    use crate::synth;

    #[test]
    fn rectangle_simplifies_to_four_vertices() {
        let mut img = BinaryImage::blank(30, 20).unwrap();
        synth::fill_rect(&mut img, 3, 4, 17, 9, true);
        let region = img.foreground_region();
        let p = vectorize(&region, 1.0).unwrap();
        assert_eq!(p.vertex_counts(), vec![4]);
        assert_eq!(mismatch(&region, &p), 0);
    }

    #[test]
    fn disk_round_trip_within_two_percent() {
        let mut img = BinaryImage::blank(48, 48).unwrap();
        synth::fill_disk(&mut img, 24.0, 24.0, 20.0, true);
        let region = img.foreground_region();
        let p = vectorize(&region, 1.0).unwrap();
        let bb = region.bbox().unwrap();
        let m = mismatch(&region, &p);
        assert!((m as f64) <= 0.02 * bb.area() as f64, "mismatch {m} of {}", bb.area());
        // Simplification actually happened.
        let raw: usize = boundary_loops(&region).iter().map(|l| l.corners().len()).sum();
        assert!(p.vertex_counts()[0] < raw / 2);
    }

    #[test]
    fn thin_diagonal_keeps_every_pixel() {
        let px: Vec<Pixel> = (0..60).map(|i| Pixel { x: i + 2, y: i + 1 }).collect();
        let region = PixelRegion::from_pixels(px);
        let p = vectorize(&region, 1.0).unwrap();
        let bb = region.bbox().unwrap();
        let raster = rasterize_evenodd(&p, bb);
        for q in region.pixels() {
            assert!(raster.get(q.x - bb.x, q.y - bb.y), "pixel {q:?} lost");
        }
    }

    #[test]
    fn exact_outline_reproduces_the_mask() {
        let mut img = BinaryImage::blank(40, 40).unwrap();
        synth::fill_ring(&mut img, 20.0, 20.0, 17.0, 9.0, true);
        synth::fill_rect(&mut img, 2, 2, 3, 30, true);
        let region = img.foreground_region();
        let p = vectorize(&region, 0.0).unwrap();
        assert_eq!(mismatch(&region, &p), 0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert_eq!(
            vectorize(&PixelRegion::default(), 1.0),
            Err(VectorizeError::EmptyMask)
        );
        let r = PixelRegion::from_pixels(vec![Pixel { x: 0, y: 0 }]);
        assert_eq!(vectorize(&r, f64::NAN), Err(VectorizeError::BadTolerance));
    }
}
