//! Sawtooth detection from the turning-angle signal of a mask's outline.
//!
//! The outer boundary is sampled every [`SAMPLE_SPACING`] pixel edges. At
//! each sample the turning angle between the incoming and outgoing chords
//! (each [`CHORD_SAMPLES`] samples long) is taken; angles below
//! [`MIN_TURN`] count as straight. Consecutive same-sign samples form runs,
//! and a run alternates when the next run of the same sign starts at most
//! [`PERIOD`] samples later. The score is the share of turning samples that
//! sit in alternating runs.

use alloc::vec::Vec;

use crate::contour::boundary_loops;
use crate::fmath;
use crate::raster::PixelRegion;

pub const SAMPLE_SPACING: usize = 2;
pub const CHORD_SAMPLES: usize = 3;
pub const MIN_TURN: f64 = 0.35;
pub const PERIOD: usize = 12;
pub const THRESHOLD: f64 = 0.5;

/// Score in [0, 1]; `None` for an empty mask.
pub fn detect_sawtooth(region: &PixelRegion) -> Option<f64> {
    let loops = boundary_loops(region);
    let outer = loops.iter().find(|l| !l.is_hole)?;
    let samples: Vec<(f64, f64)> = outer
        .vertices
        .iter()
        .step_by(SAMPLE_SPACING)
        .map(|&(x, y)| (x as f64, y as f64))
        .collect();
    let n = samples.len();
    if n < 2 * CHORD_SAMPLES + 1 {
        return Some(0.0);
    }

    let signs: Vec<i8> = (0..n)
        .map(|i| {
            let p = samples[(i + n - CHORD_SAMPLES) % n];
            let q = samples[i];
            let r = samples[(i + CHORD_SAMPLES) % n];
            let (ax, ay) = (q.0 - p.0, q.1 - p.1);
            let (bx, by) = (r.0 - q.0, r.1 - q.1);
            let theta = fmath::atan2(ax * by - ay * bx, ax * bx + ay * by);
            if theta >= MIN_TURN {
                1
            } else if theta <= -MIN_TURN {
                -1
            } else {
                0
            }
        })
        .collect();

    // Runs of equal sign over the turning samples, as (sign, start, length).
    let turning: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
    if turning.is_empty() {
        return Some(0.0);
    }
    let mut runs: Vec<(i8, usize, usize)> = Vec::new();
    for &i in &turning {
        match runs.last_mut() {
            Some(r) if r.0 == signs[i] => r.2 += 1,
            _ => runs.push((signs[i], i, 1)),
        }
    }
    // The outline is cyclic: merge a wrap-around run.
    if runs.len() > 1 && runs[0].0 == runs[runs.len() - 1].0 {
        let last = runs.pop().expect("len > 1");
        runs[0] = (last.0, last.1, last.2 + runs[0].2);
    }

    let m = runs.len();
    let alternating: usize = if m < 2 {
        0
    } else {
        (0..m)
            .filter(|&j| {
                let start = runs[j].1;
                let next = runs[(j + 2) % m].1;
                let gap = (next + n - start) % n;
                let gap = if gap == 0 { n } else { gap };
                gap <= PERIOD
            })
            .map(|j| runs[j].2)
            .sum()
    };
    Some(alternating as f64 / turning.len() as f64)
}

pub fn is_sawtooth(score: f64) -> bool {
    score > THRESHOLD
}
