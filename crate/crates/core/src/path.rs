use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmath;
use crate::geometry::{Affine, Bbox, Point};

/// Grid every stored board coordinate snaps to, so that serialized paths
/// round-trip exactly.
pub const COORD_QUANTUM: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path has no subpaths")]
    Empty,
    #[error("subpath {0} has fewer than 3 distinct points")]
    DegenerateSubpath(usize),
    #[error("subpath {0} is not closed")]
    OpenSubpath(usize),
    #[error("subpath {0} contains a non-finite coordinate")]
    NonFinite(usize),
}

/// A set of closed polylines rendered with the even-odd fill rule.
///
/// Each subpath repeats its first point at the end.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VectorPath {
    pub subpaths: Vec<Vec<Point>>,
}

impl VectorPath {
    pub fn new(subpaths: Vec<Vec<Point>>) -> Result<Self, PathError> {
        let p = Self { subpaths };
        p.validate()?;
        Ok(p)
    }

    /// Closes each ring by appending its first point when needed.
    pub fn from_rings(rings: Vec<Vec<Point>>) -> Result<Self, PathError> {
        let subpaths = rings
            .into_iter()
            .map(|mut r| {
                if let (Some(first), Some(last)) = (r.first().copied(), r.last().copied()) {
                    if first != last {
                        r.push(first);
                    }
                }
                r
            })
            .collect();
        Self::new(subpaths)
    }

    pub fn validate(&self) -> Result<(), PathError> {
        if self.subpaths.is_empty() {
            return Err(PathError::Empty);
        }
        for (i, sp) in self.subpaths.iter().enumerate() {
            if sp.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(PathError::NonFinite(i));
            }
            if sp.len() < 4 {
                return Err(PathError::DegenerateSubpath(i));
            }
            if sp.first() != sp.last() {
                return Err(PathError::OpenSubpath(i));
            }
        }
        Ok(())
    }

    pub fn bbox(&self) -> Option<Bbox> {
        Bbox::from_points(self.subpaths.iter().flatten())
    }

    pub fn transformed(&self, t: &Affine) -> VectorPath {
        VectorPath {
            subpaths: self
                .subpaths
                .iter()
                .map(|sp| sp.iter().map(|p| t.apply(*p)).collect())
                .collect(),
        }
    }

    /// Snap every coordinate to [`COORD_QUANTUM`].
    pub fn quantized(&self) -> VectorPath {
        VectorPath {
            subpaths: self
                .subpaths
                .iter()
                .map(|sp| {
                    sp.iter()
                        .map(|p| Point::new(quantize(p.x), quantize(p.y)))
                        .collect()
                })
                .collect(),
        }
    }

    /// Number of vertices per subpath, excluding the closing repeat.
    pub fn vertex_counts(&self) -> Vec<usize> {
        self.subpaths
            .iter()
            .map(|sp| sp.len().saturating_sub(1))
            .collect()
    }

    /// Shoelace area of one subpath (sign follows orientation).
    pub fn signed_area(subpath: &[Point]) -> f64 {
        let mut acc = 0.0;
        for w in subpath.windows(2) {
            acc += w[0].x * w[1].y - w[1].x * w[0].y;
        }
        acc * 0.5
    }
}

pub fn quantize(v: f64) -> f64 {
    // k / 10⁴ is the double nearest the decimal, so printing four decimals
    // and parsing back yields the same bits.
    let snapped = fmath::round(v / COORD_QUANTUM) / 10_000.0;
    if snapped == 0.0 {
        0.0
    } else {
        snapped
    }
}
