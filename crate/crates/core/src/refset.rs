//! The sealed reference set and neighborhood resolution.
//!
//! Neighbor lookup is an exhaustive linear scan: reference sets stay in the
//! low thousands of entries, where exactness and simplicity beat an
//! approximate index. Queries run either over task embeddings or over
//! routing-weight space, selected by [`QuerySpace`].

use crate::error::{Error, Result};
use crate::kernels::{self, BandwidthPolicy, KernelSpec};
use crate::moe::ExpertBank;
use crate::types::{Label, ModelInput, RoutingWeights, TaskEmbedding};

/// One stored sample: input, its task embedding, the routing weights the
/// router produced for it, and its verified label.
///
/// Construction re-runs the model: an entry only exists if
/// `predict(input, routing) == label`, so every stored routing is one that
/// actually worked for its sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    input: ModelInput,
    embedding: TaskEmbedding,
    routing: RoutingWeights,
    label: Label,
}

impl ReferenceEntry {
    /// # Errors
    ///
    /// Rejects entries whose stored routing does not reproduce the stored
    /// label on the given bank, and any dimension mismatch.
    pub fn new(
        bank: &ExpertBank,
        input: ModelInput,
        embedding: TaskEmbedding,
        routing: RoutingWeights,
        label: Label,
    ) -> Result<Self> {
        let predicted = bank.predict(&input, &routing)?;
        if predicted != label {
            return Err(Error::invalid(format!(
                "reference entry is inconsistent: stored label {} but model predicts {}",
                label.0, predicted.0
            )));
        }
        Ok(ReferenceEntry {
            input,
            embedding,
            routing,
            label,
        })
    }

    pub fn input(&self) -> &ModelInput {
        &self.input
    }

    pub fn embedding(&self) -> &TaskEmbedding {
        &self.embedding
    }

    pub fn routing(&self) -> &RoutingWeights {
        &self.routing
    }

    pub fn label(&self) -> Label {
        self.label
    }
}

/// Immutable, insertion-ordered collection of reference entries.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    entries: Vec<ReferenceEntry>,
    feature_dim: usize,
    embedding_dim: usize,
    expert_count: usize,
}

impl ReferenceSet {
    /// Seals a list of entries into an immutable set.
    ///
    /// # Errors
    ///
    /// Rejects an empty list and any dimensional inconsistency between
    /// entries.
    pub fn seal(entries: Vec<ReferenceEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::invalid("reference set must not be empty"))?;
        let feature_dim = first.input.features.len();
        let embedding_dim = first.embedding.len();
        let expert_count = first.routing.len();
        for (i, e) in entries.iter().enumerate() {
            if e.input.features.len() != feature_dim {
                return Err(Error::invalid(format!("entry {i}: feature dim mismatch")));
            }
            if e.embedding.len() != embedding_dim {
                return Err(Error::invalid(format!("entry {i}: embedding dim mismatch")));
            }
            if e.routing.len() != expert_count {
                return Err(Error::invalid(format!("entry {i}: routing dim mismatch")));
            }
        }
        Ok(ReferenceSet {
            entries,
            feature_dim,
            embedding_dim,
            expert_count,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &ReferenceEntry {
        &self.entries[i]
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn expert_count(&self) -> usize {
        self.expert_count
    }

    /// Resolves the neighborhood of `query` under `spec`, weighting
    /// members with `kernel`.
    ///
    /// kNN returns exactly `min(k, n)` members; distance ties break toward
    /// the lower entry index. The ε-ball returns every member within the
    /// radius and signals [`Error::EmptyNeighborhood`] when none qualifies.
    ///
    /// With the median bandwidth policy the bandwidth is recomputed per
    /// query from the resolved members' strictly positive distances; when
    /// every distance is zero the members are indistinguishable and the
    /// kernel weights come out uniform.
    pub fn resolve(
        &self,
        query: &[f64],
        spec: &NeighborhoodSpec,
        kernel: &KernelSpec,
    ) -> Result<Neighborhood> {
        spec.validate()?;
        kernel.validate()?;
        let expected = match spec.space {
            QuerySpace::Embedding => self.embedding_dim,
            QuerySpace::RoutingWeight => self.expert_count,
        };
        if query.len() != expected {
            return Err(Error::invalid(format!(
                "query has dimension {}, space expects {expected}",
                query.len()
            )));
        }

        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            let point = match spec.space {
                QuerySpace::Embedding => e.embedding.as_slice(),
                QuerySpace::RoutingWeight => e.routing.as_slice(),
            };
            scored.push((i, kernels::distance(point, query)?));
        }
        scored.sort_unstable_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("distances are finite")
                .then(a.0.cmp(&b.0))
        });

        let selected: Vec<(usize, f64)> = match spec.mode {
            NeighborhoodMode::Knn { k } => {
                scored.into_iter().take(k.min(self.entries.len())).collect()
            }
            NeighborhoodMode::EpsilonBall { epsilon } => {
                let members: Vec<(usize, f64)> = scored
                    .into_iter()
                    .take_while(|&(_, d)| d <= epsilon)
                    .collect();
                if members.is_empty() {
                    return Err(Error::EmptyNeighborhood { epsilon });
                }
                members
            }
        };

        let distances: Vec<f64> = selected.iter().map(|&(_, d)| d).collect();
        let bandwidth = match kernel.bandwidth {
            BandwidthPolicy::Fixed(v) => v,
            BandwidthPolicy::MedianHeuristic => match kernels::median_bandwidth(&distances) {
                Ok(m) => m,
                // All members coincide with the query; any bandwidth gives
                // equal kernel values, hence uniform weights.
                Err(Error::DegenerateDistances) => 1.0,
                Err(e) => return Err(e),
            },
        };

        let mut raw = Vec::with_capacity(selected.len());
        for &(i, _) in &selected {
            let point = match spec.space {
                QuerySpace::Embedding => self.entries[i].embedding.as_slice(),
                QuerySpace::RoutingWeight => self.entries[i].routing.as_slice(),
            };
            raw.push(kernels::kernel_value(
                kernel.family,
                point,
                query,
                bandwidth,
            )?);
        }
        let kernel_weights = kernels::normalized_weights(kernel.family, &raw)?;

        Ok(Neighborhood {
            indices: selected.into_iter().map(|(i, _)| i).collect(),
            distances,
            kernel_weights,
        })
    }
}

/// Neighborhood selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborhoodMode {
    Knn { k: usize },
    EpsilonBall { epsilon: f64 },
}

/// Which stored vector the query is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySpace {
    Embedding,
    RoutingWeight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodSpec {
    pub mode: NeighborhoodMode,
    pub space: QuerySpace,
}

impl NeighborhoodSpec {
    pub fn knn(k: usize, space: QuerySpace) -> Self {
        NeighborhoodSpec {
            mode: NeighborhoodMode::Knn { k },
            space,
        }
    }

    pub fn epsilon_ball(epsilon: f64, space: QuerySpace) -> Self {
        NeighborhoodSpec {
            mode: NeighborhoodMode::EpsilonBall { epsilon },
            space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            NeighborhoodMode::Knn { k } => {
                if k == 0 {
                    return Err(Error::invalid("knn requires k >= 1"));
                }
            }
            NeighborhoodMode::EpsilonBall { epsilon } => {
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(Error::invalid(format!(
                        "epsilon ball requires a positive radius, got {epsilon}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A resolved neighborhood: member indices into the reference set, their
/// distances to the query (non-decreasing), and normalized kernel weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub kernel_weights: Vec<f64>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
