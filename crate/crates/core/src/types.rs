//! Domain types shared by every module.

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a routing weight vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex over experts: entries are
/// non-negative and sum to one within [`SUM_TOLERANCE`]. At least two
/// experts are required.
///
/// The invariant is established at construction and never broken
/// afterwards; operations that move weights (projection, interpolation,
/// strategy steps) always return a freshly validated value.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingWeights(Vec<f64>);

impl RoutingWeights {
    /// Validates and wraps a weight vector.
    ///
    /// # Errors
    ///
    /// Rejects vectors with fewer than two entries, non-finite or
    /// negative entries, or a sum farther than [`SUM_TOLERANCE`] from 1.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid(format!(
                "routing weights need at least 2 experts, got {}",
                weights.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::invalid(format!("weight {i} is not finite: {w}")));
            }
            if w < 0.0 {
                return Err(Error::invalid(format!("weight {i} is negative: {w}")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "routing weights sum to {sum}, expected 1 within {SUM_TOLERANCE}"
            )));
        }
        Ok(RoutingWeights(weights))
    }

    /// Uniform weights over `n` experts.
    pub fn uniform(n: usize) -> Result<Self> {
        RoutingWeights::new(vec![1.0 / n as f64; n])
    }

    /// One-hot weights putting all mass on `expert`.
    pub fn one_hot(n: usize, expert: usize) -> Result<Self> {
        if expert >= n {
            return Err(Error::invalid(format!(
                "one-hot expert {expert} out of range for {n} experts"
            )));
        }
        let mut w = vec![0.0; n];
        w[expert] = 1.0;
        RoutingWeights::new(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the highest-weight expert; ties break toward the lower index.
    pub fn top_expert(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate().skip(1) {
            if w > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for RoutingWeights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Embedding of a model input in the task space used for neighbor lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEmbedding(pub Vec<f64>);

impl TaskEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Class label produced by the model or attached to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Label(pub usize);

/// One model input: a feature vector plus the task type that generated it.
///
/// `task_type` is generator metadata. It feeds the synthetic benchmark and
/// per-type reporting; re-routing strategies never read it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub features: Vec<f64>,
    pub task_type: usize,
}

impl ModelInput {
    pub fn new(features: Vec<f64>, task_type: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("model input needs at least one feature"));
        }
        for (i, &f) in features.iter().enumerate() {
            if !f.is_finite() {
                return Err(Error::invalid(format!("feature {i} is not finite: {f}")));
            }
        }
        Ok(ModelInput {
            features,
            task_type,
        })
    }
}
