//! Euclidean projection onto the probability simplex and convex
//! interpolation between simplex points.

use crate::error::{Error, Result};
use crate::types::{RoutingWeights, SUM_TOLERANCE};

/// Projects an arbitrary real vector onto the probability simplex in
/// Euclidean distance.
///
/// Uses the sort-and-threshold algorithm: with entries sorted in
/// decreasing order, find the largest prefix whose running mean leaves
/// every prefix entry above the threshold `tau = (prefix_sum - 1) / j`,
/// then clip each entry to `max(v_i - tau, 0)`. Entries outside the
/// support come out exactly 0.
///
/// A vector that already satisfies the [`RoutingWeights`] invariants is
/// returned unchanged, which also makes the projection exactly
/// idempotent: the output always satisfies those invariants, so a second
/// call takes the same early return.
///
/// # Errors
///
/// Rejects vectors with fewer than two entries or non-finite entries.
pub fn project(v: &[f64]) -> Result<RoutingWeights> {
    if v.len() < 2 {
        return Err(Error::invalid(format!(
            "projection needs at least 2 entries, got {}",
            v.len()
        )));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::invalid(format!("entry {i} is not finite: {x}")));
        }
    }

    let sum: f64 = v.iter().sum();
    if v.iter().all(|&x| x >= 0.0) && (sum - 1.0).abs() <= SUM_TOLERANCE {
        return RoutingWeights::new(v.to_vec());
    }

    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("entries are finite"));

    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let candidate = (prefix - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }

    let w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    RoutingWeights::new(w)
}

/// Convex combination `alpha * a + (1 - alpha) * b`.
///
/// `alpha = 1` returns `a` exactly and `alpha = 0` returns `b` exactly;
/// the result satisfies the simplex invariants without re-projection.
///
/// # Errors
///
/// Rejects `alpha` outside `[0, 1]` and length mismatches.
pub fn interpolate(a: &RoutingWeights, b: &RoutingWeights, alpha: f64) -> Result<RoutingWeights> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "interpolation length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if alpha == 1.0 {
        return Ok(a.clone());
    }
    if alpha == 0.0 {
        return Ok(b.clone());
    }
    let w: Vec<f64> = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| alpha * x + (1.0 - alpha) * y)
        .collect();
    RoutingWeights::new(w)
}
