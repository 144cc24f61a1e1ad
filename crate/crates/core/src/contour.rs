//! Boundary following on the pixel-edge grid.
//!
//! Boundaries run along pixel sides, so a 1×1 mask traces to its unit
//! square. Loops keep the mask on their right-hand side in image
//! coordinates (y down): outer boundaries run clockwise on screen and holes
//! counter-clockwise. Where two mask pixels touch only at a corner the
//! walk turns so that they stay on one loop, matching 8-connected
//! foreground.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::Point;
use crate::path::VectorPath;
use crate::raster::{label_components, Connectivity, PixelRegion};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContourError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("mask has {0} 8-connected components, expected 1")]
    DisconnectedMask(u32),
}

// Headings on screen: east, south, west, north.
pub(crate) const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// One closed boundary as a sequence of unit steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryLoop {
    /// Lattice vertices in image coordinates; the loop closes back to the
    /// first entry, which is not repeated.
    pub vertices: Vec<(i64, i64)>,
    /// Heading index (into east/south/west/north) of the step leaving each
    /// vertex.
    pub headings: Vec<u8>,
    pub is_hole: bool,
}

impl BoundaryLoop {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Centre of the mask pixel to the right of step `i`.
    pub fn inner_pixel_centre(&self, i: usize) -> Point {
        let (x, y) = self.vertices[i];
        let (dx, dy) = DIRS[self.headings[i] as usize];
        Point::new(
            x as f64 + 0.5 * dx as f64 - 0.5 * dy as f64,
            y as f64 + 0.5 * dy as f64 + 0.5 * dx as f64,
        )
    }

    /// Vertices where the heading changes, starting from a corner.
    pub fn corners(&self) -> Vec<Point> {
        let n = self.vertices.len();
        let mut out = Vec::new();
        for i in 0..n {
            let prev = self.headings[(i + n - 1) % n];
            if prev != self.headings[i] {
                let (x, y) = self.vertices[i];
                out.push(Point::new(x as f64, y as f64));
            }
        }
        out
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut acc = 0i64;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc as f64 * 0.5
    }
}

/// Every boundary loop of `region`, in raster order of each loop's first
/// vertex. For each component its outer loop precedes its holes.
pub fn boundary_loops(region: &PixelRegion) -> Vec<BoundaryLoop> {
    let Some((bitmap, ox, oy)) = region.to_local_bitmap(1) else {
        return Vec::new();
    };
    let w = bitmap.width() as i64;
    let h = bitmap.height() as i64;
    let vw = (w + 1) as usize;
    let vidx = |x: i64, y: i64| y as usize * vw + x as usize;
    let mut out_edges = vec![0u8; vw * (h + 1) as usize];

    for y in 0..h {
        for x in 0..w {
            if !bitmap.get_signed(x, y) {
                continue;
            }
            if !bitmap.get_signed(x, y - 1) {
                out_edges[vidx(x, y)] |= 1 << 0;
            }
            if !bitmap.get_signed(x + 1, y) {
                out_edges[vidx(x + 1, y)] |= 1 << 1;
            }
            if !bitmap.get_signed(x, y + 1) {
                out_edges[vidx(x + 1, y + 1)] |= 1 << 2;
            }
            if !bitmap.get_signed(x - 1, y) {
                out_edges[vidx(x, y + 1)] |= 1 << 3;
            }
        }
    }

    let mut loops = Vec::new();
    for sy in 0..=h {
        for sx in 0..=w {
            while out_edges[vidx(sx, sy)] != 0 {
                let bits = out_edges[vidx(sx, sy)];
                let d0 = bits.trailing_zeros() as u8;
                out_edges[vidx(sx, sy)] &= !(1 << d0);

                let mut vertices = vec![(sx + ox, sy + oy)];
                let mut headings = vec![d0];
                let (mut x, mut y, mut heading) = (sx, sy, d0);
                loop {
                    x += DIRS[heading as usize].0;
                    y += DIRS[heading as usize].1;
                    let at_start = x == sx && y == sy;
                    let mut avail = out_edges[vidx(x, y)];
                    if at_start {
                        avail |= 1 << d0;
                    }
                    // Prefer left, then straight, then right.
                    let left = (heading + 3) % 4;
                    let right = (heading + 1) % 4;
                    let next = [left, heading, right]
                        .into_iter()
                        .find(|d| avail & (1 << d) != 0)
                        .expect("boundary edges always continue");
                    if at_start && next == d0 {
                        break;
                    }
                    out_edges[vidx(x, y)] &= !(1 << next);
                    vertices.push((x + ox, y + oy));
                    headings.push(next);
                    heading = next;
                }
                let mut l = BoundaryLoop {
                    vertices,
                    headings,
                    is_hole: false,
                };
                l.is_hole = l.signed_area() < 0.0;
                loops.push(l);
            }
        }
    }
    loops
}

/// Trace a connected mask: subpath 0 is the outer boundary, followed by
/// one subpath per hole. Collinear runs are merged to their corners.
pub fn trace_contour(region: &PixelRegion) -> Result<VectorPath, ContourError> {
    if region.is_empty() {
        return Err(ContourError::EmptyMask);
    }
    let (bitmap, _, _) = region.to_local_bitmap(0).ok_or(ContourError::EmptyMask)?;
    let components = label_components(&bitmap, true, Connectivity::Eight).count;
    if components != 1 {
        return Err(ContourError::DisconnectedMask(components));
    }
    let loops = boundary_loops(region);
    let mut rings: Vec<Vec<Point>> = Vec::with_capacity(loops.len());
    let (outer, holes): (Vec<_>, Vec<_>) = loops.iter().partition(|l| !l.is_hole);
    for l in outer.into_iter().chain(holes) {
        rings.push(l.corners());
    }
    Ok(VectorPath::from_rings(rings).expect("traced rings have at least four corners"))
}
