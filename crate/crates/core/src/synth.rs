//! Synthetic benchmark: task types with ground-truth expert mixtures, a
//! deliberately miscalibrated router, and the pools to evaluate against.
//!
//! Labels are produced BY the ground-truth mixtures (`y = predict(bank, x,
//! w*_t)`), so each mixture scores 100% on its own task type and an oracle
//! gap exists by construction. Features are type-blind standard normals:
//! a linear router cannot recover the task type from them, while the task
//! embedding carries it, which is exactly the asymmetry the neighborhood
//! strategies exploit. Each expert carries a large bias toward a signature
//! class, so correctness on a type hinges mostly on how much routing mass
//! reaches that type's expert; corrections learned from neighbors then
//! carry over to the query instead of fitting neighbor-specific noise.
//! Miscalibration is injected as a training bonus for routing mass on one
//! designated expert. The default skew target also serves ground-truth
//! mixtures, so the types it serves are routed well even by the skewed
//! router; that keeps base accuracy above chance in every realization
//! without touching the geometry the re-routing strategies exploit.
//!
//! Generation and training are single-threaded and bit-deterministic given
//! the seed; all randomness flows through fixed stream ids.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::moe::{dot, softmax, Expert, ExpertBank, Router};
use crate::refset::{ReferenceEntry, ReferenceSet};
use crate::rng::{rng_stream, RngStream, Seed};
use crate::types::{Label, ModelInput, RoutingWeights, TaskEmbedding};

const STREAM_BANK: u64 = 0;
const STREAM_MIXTURES: u64 = 1;
const STREAM_FEATURES: u64 = 2;
const STREAM_EMBEDDINGS: u64 = 3;
const STREAM_ROUTER: u64 = 4;
const STREAM_SUBSAMPLE: u64 = 5;

/// Scale of each expert's own logit contribution: weight entries are drawn
/// N(0, gain²/D) so a standard-normal feature vector yields logits of
/// roughly this magnitude. Large enough that routing errors flip
/// predictions, which is what gives re-routing something to recover.
const LOGIT_GAIN: f64 = 8.0;

/// Bias an expert adds to its signature class. Dominating the per-sample
/// logit noise, it ties each sample's correction threshold to routing mass
/// on the right expert rather than to that sample's own draw, which is what
/// lets a correction fitted on neighbors transfer to the query.
const SIGNATURE_BIAS: f64 = 40.0;

const ROUTER_INIT_SCALE: f64 = 0.01;
const ROUTER_LR: f64 = 0.25;
const ROUTER_EPOCHS: usize = 300;

/// Per-type cap applied when sealing reference sets from a pool.
pub const DEFAULT_REFERENCE_CAP: usize = 5000;

/// Full description of one benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub task_type_count: usize,
    pub reference_per_type: usize,
    pub test_per_type: usize,
    pub feature_dim: usize,
    pub expert_count: usize,
    pub class_count: usize,
    pub embedding_noise_sigma: f64,
    /// Expert index rewarded during router training.
    pub skew_target: usize,
    /// Weight of the reward; 0 disables miscalibration.
    pub skew_strength: f64,
    pub seed: Seed,
}

impl BenchSpec {
    /// The default instance: 8 task types over 6 experts, 4 classes,
    /// 16 features, 400 reference and 200 test samples per type.
    pub fn default_with_seed(seed: Seed) -> Self {
        BenchSpec {
            task_type_count: 8,
            reference_per_type: 400,
            test_per_type: 200,
            feature_dim: 16,
            expert_count: 6,
            class_count: 4,
            embedding_noise_sigma: 0.05,
            skew_target: 0,
            skew_strength: 8.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_type_count == 0 {
            return Err(Error::invalid("task_type_count must be >= 1"));
        }
        if self.reference_per_type == 0 || self.test_per_type == 0 {
            return Err(Error::invalid("samples per type must be >= 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be >= 1"));
        }
        if self.expert_count < 2 {
            return Err(Error::invalid("expert_count must be >= 2"));
        }
        if self.class_count < 2 {
            return Err(Error::invalid("class_count must be >= 2"));
        }
        if !(self.embedding_noise_sigma.is_finite() && self.embedding_noise_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "embedding_noise_sigma must be >= 0, got {}",
                self.embedding_noise_sigma
            )));
        }
        if self.skew_target >= self.expert_count {
            return Err(Error::invalid(format!(
                "skew_target {} out of range for {} experts",
                self.skew_target, self.expert_count
            )));
        }
        if !(self.skew_strength.is_finite() && self.skew_strength >= 0.0) {
            return Err(Error::invalid(format!(
                "skew_strength must be >= 0, got {}",
                self.skew_strength
            )));
        }
        Ok(())
    }
}

/// Per task type, the routing weights that define its labels.
///
/// Each mixture sits on a single expert; a seeded permutation headed by
/// expert 0 assigns experts to types, cycling when there are more types
/// than experts, so every expert serves at least one type and supports
/// differ across types.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMixtures {
    weights: Vec<RoutingWeights>,
}

impl GroundTruthMixtures {
    fn build(spec: &BenchSpec) -> Result<Self> {
        let e = spec.expert_count;
        let mut rng = rng_stream(spec.seed, STREAM_MIXTURES);
        // Expert 0 heads the cycle so the overlap between ground-truth usage
        // and the default skew target is the same for every seed; only the
        // rest of the assignment varies with the draw.
        let mut perm: Vec<usize> = (1..e).collect();
        perm.shuffle(&mut rng);
        perm.insert(0, 0);
        let mut weights = Vec::with_capacity(spec.task_type_count);
        for t in 0..spec.task_type_count {
            let mut w = vec![0.0; e];
            w[perm[t % e]] = 1.0;
            weights.push(RoutingWeights::new(w)?);
        }
        Ok(GroundTruthMixtures { weights })
    }

    pub fn for_type(&self, task_type: usize) -> &RoutingWeights {
        &self.weights[task_type]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// One labeled benchmark sample with its task embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: ModelInput,
    pub label: Label,
    pub embedding: TaskEmbedding,
}

/// A generated benchmark instance: frozen experts, ground-truth mixtures,
/// and type-major reference and test pools.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchSpec,
    pub bank: ExpertBank,
    pub mixtures: GroundTruthMixtures,
    pub reference_pool: Vec<Sample>,
    pub test_pool: Vec<Sample>,
}

impl Benchmark {
    /// Trains the miscalibrated base router on the reference pool.
    pub fn train_base_router(&self) -> Result<Router> {
        train_router(&self.reference_pool, &self.bank, &self.spec)
    }

    /// Seals the reference set of the router's correct predictions on the
    /// reference pool, capped at [`DEFAULT_REFERENCE_CAP`] per type.
    pub fn reference_set(&self, router: &Router) -> Result<ReferenceSet> {
        build_reference_set(
            &self.reference_pool,
            &self.bank,
            |s| router.route(&s.input),
            DEFAULT_REFERENCE_CAP,
            self.spec.seed,
        )
    }
}

/// Generates a benchmark instance deterministically from the spec's seed.
pub fn generate(spec: &BenchSpec) -> Result<Benchmark> {
    spec.validate()?;
    let bank = build_bank(spec);
    let mixtures = GroundTruthMixtures::build(spec)?;
    let mut feature_rng = rng_stream(spec.seed, STREAM_FEATURES);
    let mut embedding_rng = rng_stream(spec.seed, STREAM_EMBEDDINGS);
    let reference_pool = draw_pool(
        spec,
        &bank,
        &mixtures,
        spec.reference_per_type,
        &mut feature_rng,
        &mut embedding_rng,
    )?;
    let test_pool = draw_pool(
        spec,
        &bank,
        &mixtures,
        spec.test_per_type,
        &mut feature_rng,
        &mut embedding_rng,
    )?;
    Ok(Benchmark {
        spec: spec.clone(),
        bank,
        mixtures,
        reference_pool,
        test_pool,
    })
}

fn build_bank(spec: &BenchSpec) -> ExpertBank {
    let mut rng = rng_stream(spec.seed, STREAM_BANK);
    let d = spec.feature_dim;
    // Signature classes cycle through 0..C and are shuffled across experts,
    // so class coverage stays as even as the expert count allows.
    let mut signatures: Vec<usize> = (0..spec.expert_count)
        .map(|e| e % spec.class_count)
        .collect();
    signatures.shuffle(&mut rng);
    let scale = LOGIT_GAIN / (d as f64).sqrt();
    let experts: Vec<Expert> = (0..spec.expert_count)
        .map(|e| {
            let weight: Vec<f64> = (0..spec.class_count * d)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut bias = vec![0.0; spec.class_count];
            bias[signatures[e]] = SIGNATURE_BIAS;
            Expert::new(weight, bias, spec.feature_dim)
                .expect("generated expert dims are consistent")
        })
        .collect();
    ExpertBank::new(experts, spec.feature_dim).expect("generated bank dims are consistent")
}

fn draw_pool(
    spec: &BenchSpec,
    bank: &ExpertBank,
    mixtures: &GroundTruthMixtures,
    per_type: usize,
    feature_rng: &mut RngStream,
    embedding_rng: &mut RngStream,
) -> Result<Vec<Sample>> {
    let mut pool = Vec::with_capacity(spec.task_type_count * per_type);
    for t in 0..spec.task_type_count {
        for _ in 0..per_type {
            let features: Vec<f64> = (0..spec.feature_dim)
                .map(|_| feature_rng.sample::<f64, _>(StandardNormal))
                .collect();
            let input = ModelInput::new(features, t)?;
            let label = bank.predict(&input, mixtures.for_type(t))?;
            let embedding = embed(&input, spec, embedding_rng);
            pool.push(Sample {
                input,
                label,
                embedding,
            });
        }
    }
    Ok(pool)
}

/// Synthetic task embedding: one-hot task type plus isotropic Gaussian
/// noise of the spec's sigma. Dimension equals the task type count.
pub fn embed(input: &ModelInput, spec: &BenchSpec, rng: &mut RngStream) -> TaskEmbedding {
    let mut v = vec![0.0; spec.task_type_count];
    v[input.task_type] = 1.0;
    for x in &mut v {
        *x += spec.embedding_noise_sigma * rng.sample::<f64, _>(StandardNormal);
    }
    TaskEmbedding(v)
}

/// Trains the base router by seeded full-batch gradient descent on
/// cross-entropy through `forward(x, route(x))`, plus a bonus of
/// `skew_strength` per unit of routing mass on the spec's skew target.
///
/// # Errors
///
/// Rejects an empty pool and a degenerate pool whose samples all share one
/// label.
pub fn train_router(pool: &[Sample], bank: &ExpertBank, spec: &BenchSpec) -> Result<Router> {
    if pool.is_empty() {
        return Err(Error::invalid("cannot train a router on an empty pool"));
    }
    let first = pool[0].label;
    if pool.iter().all(|s| s.label == first) {
        return Err(Error::invalid(
            "degenerate pool: every sample shares one label, training cannot distinguish classes",
        ));
    }
    let d = bank.feature_dim();
    let e = bank.expert_count();
    let mut rng = rng_stream(spec.seed, STREAM_ROUTER);
    let mut weight: Vec<f64> = (0..e * d)
        .map(|_| ROUTER_INIT_SCALE * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut bias = vec![0.0; e];

    let n = pool.len() as f64;
    let sk = spec.skew_target;
    let beta = spec.skew_strength;
    for _ in 0..ROUTER_EPOCHS {
        let mut grad_w = vec![0.0; e * d];
        let mut grad_b = vec![0.0; e];
        for s in pool {
            let x = &s.input.features;
            let logits: Vec<f64> = (0..e)
                .map(|i| dot(&weight[i * d..(i + 1) * d], x) + bias[i])
                .collect();
            let r = softmax(&logits);
            let routing = RoutingWeights::new(r.clone())?;
            let g = bank.loss_grad_r(&s.input, &routing, s.label)?;
            let rg: f64 = r.iter().zip(&g).map(|(ri, gi)| ri * gi).sum();
            for i in 0..e {
                let indicator = if i == sk { 1.0 } else { 0.0 };
                // Chain rule through softmax for the data term, plus the
                // derivative of the bonus -beta * r[sk].
                let gu = r[i] * (g[i] - rg) - beta * r[sk] * (indicator - r[i]);
                grad_b[i] += gu;
                for (gw, xd) in grad_w[i * d..(i + 1) * d].iter_mut().zip(x) {
                    *gw += gu * xd;
                }
            }
        }
        let step = ROUTER_LR / n;
        for (w, gw) in weight.iter_mut().zip(&grad_w) {
            *w -= step * gw;
        }
        for (b, gb) in bias.iter_mut().zip(&grad_b) {
            *b -= step * gb;
        }
    }
    Router::new(weight, bias, d)
}

/// Filters the pool to samples the given routing predicts correctly, caps
/// each task type at `cap_per_type` by seeded subsampling, and seals the
/// survivors into a reference set.
///
/// # Errors
///
/// Fails when no sample survives the correctness filter, and propagates
/// routing or prediction failures.
pub fn build_reference_set(
    pool: &[Sample],
    bank: &ExpertBank,
    mut route: impl FnMut(&Sample) -> Result<RoutingWeights>,
    cap_per_type: usize,
    seed: Seed,
) -> Result<ReferenceSet> {
    if cap_per_type == 0 {
        return Err(Error::invalid("cap_per_type must be >= 1"));
    }
    let mut by_type: BTreeMap<usize, Vec<(usize, RoutingWeights)>> = BTreeMap::new();
    for (idx, s) in pool.iter().enumerate() {
        let r = route(s)?;
        if bank.predict(&s.input, &r)? == s.label {
            by_type.entry(s.input.task_type).or_default().push((idx, r));
        }
    }
    if by_type.is_empty() {
        return Err(Error::invalid(
            "no correct predictions in the pool: reference set would be empty",
        ));
    }
    let mut rng = rng_stream(seed, STREAM_SUBSAMPLE);
    let mut selected: Vec<(usize, RoutingWeights)> = Vec::new();
    for (_, mut candidates) in by_type {
        if candidates.len() > cap_per_type {
            let mut keep =
                rand::seq::index::sample(&mut rng, candidates.len(), cap_per_type).into_vec();
            keep.sort_unstable();
            let mut it = keep.into_iter().peekable();
            candidates = candidates
                .into_iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    if it.peek() == Some(&i) {
                        it.next();
                        Some(c)
                    } else {
                        None
                    }
                })
                .collect();
        }
        selected.extend(candidates);
    }
    selected.sort_unstable_by_key(|&(idx, _)| idx);
    let entries: Result<Vec<ReferenceEntry>> = selected
        .into_iter()
        .map(|(idx, r)| {
            let s = &pool[idx];
            ReferenceEntry::new(bank, s.input.clone(), s.embedding.clone(), r, s.label)
        })
        .collect();
    ReferenceSet::seal(entries?)
}
