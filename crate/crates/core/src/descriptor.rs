//! Shape descriptors for unit-pattern masks.
//!
//! All quantities are computed on the exact pixel-union shape in
//! bbox-local integer coordinates, which makes them bit-identical under
//! translation. Moments integrate over unit squares, so integer rescaling
//! and quarter turns of a mask are exact transformations of the underlying
//! shape.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::boundary_loops;
use crate::fmath;
use crate::geometry::Point;
use crate::raster::PixelRegion;

/// Harmonics kept, as signed indices relative to the fundamental.
pub const FOURIER_HARMONICS: [i32; 10] = [-1, 2, -2, 3, -3, 4, -4, 5, -5, 6];
/// Harmonic cut-off of the smoothed outline used for circularity.
pub const CIRCULARITY_HARMONICS: i32 = 8;
const PERIMETER_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("mask is empty")]
    EmptyMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptor {
    /// Mask area over bbox area.
    pub area_norm: f64,
    /// Boundary length (all loops, along pixel edges) over sqrt(area).
    pub perimeter_norm: f64,
    /// 4πA/P² of the outer boundary smoothed to its first
    /// [`CIRCULARITY_HARMONICS`] harmonics.
    pub circularity: f64,
    /// Hu's seven moment invariants.
    pub moment_invariants: [f64; 7],
    /// |c_k| / |c_1| of the outer boundary for k in [`FOURIER_HARMONICS`].
    pub boundary_fourier: [f64; 10],
}

impl ShapeDescriptor {
    pub const DIM: usize = 20;

    /// Flat feature vector used for nearest-neighbour classification.
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::DIM);
        v.push(self.area_norm);
        v.push(self.perimeter_norm);
        v.push(self.circularity);
        v.extend_from_slice(&self.moment_invariants);
        v.extend_from_slice(&self.boundary_fourier);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.features().iter().all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }
    fn cis(theta: f64) -> Self {
        C64::new(fmath::cos(theta), fmath::sin(theta))
    }
    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
    fn scale(self, s: f64) -> C64 {
        C64::new(self.re * s, self.im * s)
    }
    fn abs(self) -> f64 {
        fmath::hypot(self.re, self.im)
    }
}

pub fn descriptors(region: &PixelRegion) -> Result<ShapeDescriptor, DescriptorError> {
    let bb = region.bbox().ok_or(DescriptorError::EmptyMask)?;
    let (ox, oy) = (i64::from(bb.x), i64::from(bb.y));
    let area = region.area() as f64;

    let local: Vec<(f64, f64)> = region
        .pixels()
        .iter()
        .map(|p| (f64::from(p.x - bb.x), f64::from(p.y - bb.y)))
        .collect();
    let moment_invariants = hu_moments(&local, area);

    let loops = boundary_loops(region);
    let perimeter: f64 = loops.iter().map(|l| l.len() as f64).sum();
    let outer = loops
        .iter()
        .find(|l| !l.is_hole)
        .expect("a non-empty mask has an outer loop");
    let corners: Vec<Point> = outer
        .corners()
        .into_iter()
        .map(|p| Point::new(p.x - ox as f64, p.y - oy as f64))
        .collect();

    let coeffs = fourier_coefficients(&corners, CIRCULARITY_HARMONICS);
    let c = |k: i32| coeffs[(k + CIRCULARITY_HARMONICS) as usize];
    let c1 = c(1).abs();
    let mut boundary_fourier = [0.0; 10];
    for (slot, k) in boundary_fourier.iter_mut().zip(FOURIER_HARMONICS) {
        *slot = if c1 > 0.0 { c(k).abs() / c1 } else { 0.0 };
    }

    Ok(ShapeDescriptor {
        area_norm: area / bb.area() as f64,
        perimeter_norm: perimeter / fmath::sqrt(area),
        circularity: smoothed_circularity(&coeffs),
        moment_invariants,
        boundary_fourier,
    })
}

/// Central moment μ_pq of the union of unit squares with lower-left
/// corners at `px`, about (cx, cy).
fn central_moment(px: &[(f64, f64)], cx: f64, cy: f64, p: i32, q: i32) -> f64 {
    // ∫_a^{a+1} u^n du
    let seg = |a: f64, n: i32| (fmath::powi(a + 1.0, n + 1) - fmath::powi(a, n + 1)) / f64::from(n + 1);
    px.iter()
        .map(|&(x, y)| seg(x - cx, p) * seg(y - cy, q))
        .sum()
}

fn hu_moments(px: &[(f64, f64)], area: f64) -> [f64; 7] {
    let cx = px.iter().map(|p| p.0 + 0.5).sum::<f64>() / area;
    let cy = px.iter().map(|p| p.1 + 0.5).sum::<f64>() / area;
    let eta = |p: i32, q: i32| {
        let mu = central_moment(px, cx, cy, p, q);
        mu / fmath::pow(area, 1.0 + f64::from(p + q) / 2.0)
    };
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));

    let a = n30 + n12;
    let b = n21 + n03;
    [
        n20 + n02,
        (n20 - n02) * (n20 - n02) + 4.0 * n11 * n11,
        (n30 - 3.0 * n12) * (n30 - 3.0 * n12) + (3.0 * n21 - n03) * (3.0 * n21 - n03),
        a * a + b * b,
        (n30 - 3.0 * n12) * a * (a * a - 3.0 * b * b)
            + (3.0 * n21 - n03) * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        (3.0 * n21 - n03) * a * (a * a - 3.0 * b * b)
            - (n30 - 3.0 * n12) * b * (3.0 * a * a - b * b),
    ]
}

/// Arc-length Fourier coefficients c_{-K..=K} of a closed polygon, indexed
/// by k + K and oriented so that the enclosed area is positive.
fn fourier_coefficients(ring: &[Point], max_k: i32) -> Vec<C64> {
    let n = ring.len();
    let mut s = Vec::with_capacity(n + 1);
    let mut dirs = Vec::with_capacity(n);
    let mut acc = 0.0;
    s.push(0.0);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let len = fmath::hypot(b.x - a.x, b.y - a.y);
        dirs.push(C64::new((b.x - a.x) / len, (b.y - a.y) / len));
        acc += len;
        s.push(acc);
    }
    let total = acc;

    let mut coeffs: Vec<C64> = (-max_k..=max_k)
        .map(|k| {
            if k == 0 {
                return C64::new(0.0, 0.0);
            }
            let w = 2.0 * core::f64::consts::PI * f64::from(k) / total;
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..n {
                let d = C64::cis(-w * s[j + 1]).sub(C64::cis(-w * s[j]));
                sum = sum.add(dirs[j].mul(d));
            }
            sum.scale(1.0 / (w * w * total))
        })
        .collect();

    let orientation: f64 = (-max_k..=max_k)
        .map(|k| f64::from(k) * fmath::powi(coeffs[(k + max_k) as usize].abs(), 2))
        .sum();
    if orientation < 0.0 {
        coeffs.reverse();
    }
    coeffs
}

fn smoothed_circularity(coeffs: &[C64]) -> f64 {
    let max_k = (coeffs.len() / 2) as i32;
    let area: f64 = core::f64::consts::PI
        * (-max_k..=max_k)
            .map(|k| f64::from(k) * fmath::powi(coeffs[(k + max_k) as usize].abs(), 2))
            .sum::<f64>();
    let tau = 2.0 * core::f64::consts::PI;
    let mut perimeter = 0.0;
    for m in 0..PERIMETER_SAMPLES {
        let t = m as f64 / PERIMETER_SAMPLES as f64;
        let mut dz = C64::new(0.0, 0.0);
        for k in -max_k..=max_k {
            let ck = coeffs[(k + max_k) as usize];
            let rot = C64::cis(tau * f64::from(k) * t).mul(C64::new(0.0, tau * f64::from(k)));
            dz = dz.add(ck.mul(rot));
        }
        perimeter += dz.abs();
    }
    perimeter /= PERIMETER_SAMPLES as f64;
    if perimeter <= 0.0 {
        return 0.0;
    }
    4.0 * core::f64::consts::PI * area / (perimeter * perimeter)
}

/// Relative comparison used for invariance checks: `|a − b| ≤ rel·max(|a|,
/// |b|) + abs_floor`.
pub fn approx_eq(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + abs_floor
}
