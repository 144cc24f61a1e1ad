//! Nearest-neighbour unit-pattern classification over descriptor vectors.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub subcategory: String,
    pub pattern_name: String,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub subcategory: String,
    pub pattern_name: String,
    /// Fraction of the k nearest exemplars that voted for the label.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("need at least {needed} exemplars, have {available}")]
    TooFewExemplars { needed: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("exemplar {index} has {found} features, query has {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// Majority vote over the `k` nearest exemplars by Euclidean distance.
///
/// Equidistant neighbours are taken in exemplar order. A tied vote goes to
/// the label with the smallest mean distance among its voters, then to the
/// smaller (subcategory, pattern_name).
pub fn classify_unit_pattern(
    query: &[f64],
    exemplars: &[Exemplar],
    k: usize,
) -> Result<Classification, ClassifyError> {
    if k == 0 {
        return Err(ClassifyError::ZeroK);
    }
    if exemplars.len() < k {
        return Err(ClassifyError::TooFewExemplars {
            needed: k,
            available: exemplars.len(),
        });
    }
    let mut dists = Vec::with_capacity(exemplars.len());
    for (i, e) in exemplars.iter().enumerate() {
        if e.features.len() != query.len() {
            return Err(ClassifyError::DimensionMismatch {
                index: i,
                expected: query.len(),
                found: e.features.len(),
            });
        }
        let d2: f64 = e
            .features
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        dists.push((crate::fmath::sqrt(d2), i));
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // (label, votes, distance sum)
    let mut tally: Vec<((&str, &str), usize, f64)> = Vec::new();
    for &(d, i) in &dists[..k] {
        let label = (
            exemplars[i].subcategory.as_str(),
            exemplars[i].pattern_name.as_str(),
        );
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((label, 1, d)),
        }
    }
    let best = tally
        .iter()
        .min_by(|a, b| {
            b.1.cmp(&a.1)
                .then((a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64)))
                .then(a.0.cmp(&b.0))
        })
        .expect("k ≥ 1");
    Ok(Classification {
        subcategory: best.0 .0.into(),
        pattern_name: best.0 .1.into(),
        confidence: best.1 as f64 / k as f64,
    })
}
