//! Test-time re-routing strategies.
//!
//! All four strategies adjust only the routing weights of a frozen model:
//!
//! * `oracle_gd` — projected gradient descent on the true-label loss;
//!   an upper-bound diagnostic, since it peeks at the label.
//! * `ngd` — projected gradient descent on a label-free surrogate: the
//!   kernel-weighted average loss of the test point's nearest reference
//!   neighbors in embedding space, neighbor set frozen at step 0.
//! * `kernel_regression` — one-shot guess r̂ (kernel-weighted average of
//!   neighbor routings) refined by an interval-halving line search between
//!   the router's weights and r̂ under the same surrogate.
//! * `mode_finding` — repeated contraction toward the kernel-weighted
//!   mean of neighbors in routing-weight space; label-free and model-free.
//!
//! Each run returns a [`Trajectory`] whose step 0 holds the router's
//! initial weights and whose counters record how many surrogate/oracle
//! loss and gradient evaluations the strategy spent.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::moe::ExpertBank;
use crate::refset::{Neighborhood, NeighborhoodSpec, QuerySpace, ReferenceSet};
use crate::schedule::ScheduleSpec;
use crate::simplex;
use crate::types::{Label, ModelInput, RoutingWeights, TaskEmbedding};

/// Which strategy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    OracleGd,
    Ngd,
    KernelRegression,
    ModeFinding,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::OracleGd,
        StrategyKind::Ngd,
        StrategyKind::KernelRegression,
        StrategyKind::ModeFinding,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::OracleGd => "oracle_gd",
            StrategyKind::Ngd => "ngd",
            StrategyKind::KernelRegression => "kernel_regression",
            StrategyKind::ModeFinding => "mode_finding",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle_gd" => Ok(StrategyKind::OracleGd),
            "ngd" => Ok(StrategyKind::Ngd),
            "kernel_regression" => Ok(StrategyKind::KernelRegression),
            "mode_finding" => Ok(StrategyKind::ModeFinding),
            other => Err(Error::invalid(format!("unknown strategy kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Full parameterization of one strategy run.
///
/// `step_count` of 0 is allowed and turns the gradient strategies into the
/// identity, which is useful as a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub neighborhood: NeighborhoodSpec,
    pub kernel: KernelSpec,
    pub schedule: ScheduleSpec,
    pub step_count: usize,
    pub linesearch_iters: usize,
    pub mode_alpha: f64,
    pub mode_max_steps: usize,
    pub mode_tol: f64,
}

impl StrategySpec {
    /// Standard settings: 5 nearest neighbors, Gaussian kernel with median
    /// bandwidth, 10 cosine-annealed steps from 1e-2 to 1e-5, 20 line
    /// search iterations, mode contraction 0.5 for up to 10 steps.
    pub fn defaults(kind: StrategyKind) -> Self {
        let space = match kind {
            StrategyKind::ModeFinding => QuerySpace::RoutingWeight,
            _ => QuerySpace::Embedding,
        };
        StrategySpec {
            kind,
            neighborhood: NeighborhoodSpec::knn(5, space),
            kernel: KernelSpec::gaussian_median(),
            schedule: ScheduleSpec::default_cosine(),
            step_count: 10,
            linesearch_iters: 20,
            mode_alpha: 0.5,
            mode_max_steps: 10,
            mode_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neighborhood.validate()?;
        self.kernel.validate()?;
        match self.kind {
            StrategyKind::OracleGd => {
                self.schedule.validate()?;
            }
            StrategyKind::Ngd => {
                self.schedule.validate()?;
                if self.neighborhood.space != QuerySpace::Embedding {
                    return Err(Error::invalid("ngd resolves neighbors in embedding space"));
                }
            }
            StrategyKind::KernelRegression => {
                if self.neighborhood.space != QuerySpace::Embedding {
                    return Err(Error::invalid(
                        "kernel_regression resolves neighbors in embedding space",
                    ));
                }
                if self.linesearch_iters == 0 {
                    return Err(Error::invalid("linesearch_iters must be >= 1"));
                }
            }
            StrategyKind::ModeFinding => {
                if self.neighborhood.space != QuerySpace::RoutingWeight {
                    return Err(Error::invalid(
                        "mode_finding resolves neighbors in routing-weight space",
                    ));
                }
                if !(self.mode_alpha > 0.0 && self.mode_alpha < 1.0) {
                    return Err(Error::invalid(format!(
                        "mode_alpha must lie strictly inside (0, 1), got {}",
                        self.mode_alpha
                    )));
                }
                if self.mode_max_steps == 0 {
                    return Err(Error::invalid("mode_max_steps must be >= 1"));
                }
                if !(self.mode_tol.is_finite() && self.mode_tol > 0.0) {
                    return Err(Error::invalid(format!(
                        "mode_tol must be positive, got {}",
                        self.mode_tol
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One visited point: its weights, the (surrogate or oracle) loss
/// evaluated there if the strategy computed one, and the model's
/// prediction at those weights when filled in by [`apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub weights: RoutingWeights,
    pub loss: Option<f64>,
    pub prediction: Option<Label>,
}

/// The full record of one strategy run.
///
/// `forward_evals` counts loss-only model evaluations and `grad_evals`
/// counts loss-plus-gradient evaluations performed by the optimization
/// itself; the per-step predictions filled in afterwards are diagnostics
/// and are not counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub forward_evals: usize,
    pub grad_evals: usize,
    pub empty_neighborhood: bool,
}

impl Trajectory {
    fn noop(r0: &RoutingWeights) -> Self {
        Trajectory {
            steps: vec![TrajectoryStep {
                weights: r0.clone(),
                loss: None,
                prediction: None,
            }],
            forward_evals: 0,
            grad_evals: 0,
            empty_neighborhood: true,
        }
    }

    pub fn initial_weights(&self) -> &RoutingWeights {
        &self.steps[0].weights
    }

    pub fn final_weights(&self) -> &RoutingWeights {
        &self.steps[self.steps.len() - 1].weights
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Projected gradient descent on the true-label loss `l(x, r, y)`.
pub fn oracle_gd(
    bank: &ExpertBank,
    x: &ModelInput,
    y: Label,
    r0: &RoutingWeights,
    spec: &StrategySpec,
) -> Result<Trajectory> {
    spec.validate()?;
    let mut steps = Vec::with_capacity(spec.step_count + 1);
    let mut r = r0.clone();
    let mut grad_evals = 0;
    for step in 0..spec.step_count {
        let (loss, grad) = bank.loss_and_grad_raw(x, r.as_slice(), y)?;
        grad_evals += 1;
        steps.push(TrajectoryStep {
            weights: r.clone(),
            loss: Some(loss),
            prediction: None,
        });
        let lr = spec.schedule.rate(step, spec.step_count);
        let moved: Vec<f64> = r
            .as_slice()
            .iter()
            .zip(&grad)
            .map(|(ri, gi)| ri - lr * gi)
            .collect();
        r = simplex::project(&moved)?;
    }
    steps.push(TrajectoryStep {
        weights: r,
        loss: None,
        prediction: None,
    });
    Ok(Trajectory {
        steps,
        forward_evals: 0,
        grad_evals,
        empty_neighborhood: false,
    })
}

fn resolve_or_noop(
    set: &ReferenceSet,
    query: &[f64],
    spec: &StrategySpec,
) -> Result<Option<Neighborhood>> {
    match set.resolve(query, &spec.neighborhood, &spec.kernel) {
        Ok(nb) => Ok(Some(nb)),
        Err(Error::EmptyNeighborhood { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Projected gradient descent on the neighborhood surrogate loss
/// `L(r) = sum_i w_i * l(x_i, r, y_i)` over the test point's embedding
/// neighbors, with `w_i` the normalized kernel weights. Neighbors are
/// resolved once and frozen; the test label is never read.
pub fn ngd(
    bank: &ExpertBank,
    set: &ReferenceSet,
    embedding: &TaskEmbedding,
    r0: &RoutingWeights,
    spec: &StrategySpec,
) -> Result<Trajectory> {
    spec.validate()?;
    if r0.len() != set.expert_count() {
        return Err(Error::invalid(format!(
            "routing has {} experts, reference set stores {}",
            r0.len(),
            set.expert_count()
        )));
    }
    let Some(nb) = resolve_or_noop(set, embedding.as_slice(), spec)? else {
        return Ok(Trajectory::noop(r0));
    };
    let mut steps = Vec::with_capacity(spec.step_count + 1);
    let mut r = r0.clone();
    let mut grad_evals = 0;
    for step in 0..spec.step_count {
        let (loss, grad) = surrogate_loss_grad(bank, set, &nb, r.as_slice(), &mut grad_evals)?;
        steps.push(TrajectoryStep {
            weights: r.clone(),
            loss: Some(loss),
            prediction: None,
        });
        let lr = spec.schedule.rate(step, spec.step_count);
        let moved: Vec<f64> = r
            .as_slice()
            .iter()
            .zip(&grad)
            .map(|(ri, gi)| ri - lr * gi)
            .collect();
        r = simplex::project(&moved)?;
    }
    steps.push(TrajectoryStep {
        weights: r,
        loss: None,
        prediction: None,
    });
    Ok(Trajectory {
        steps,
        forward_evals: 0,
        grad_evals,
        empty_neighborhood: false,
    })
}

fn surrogate_loss_grad(
    bank: &ExpertBank,
    set: &ReferenceSet,
    nb: &Neighborhood,
    r: &[f64],
    grad_evals: &mut usize,
) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; r.len()];
    for (&idx, &w) in nb.indices.iter().zip(&nb.kernel_weights) {
        let e = set.get(idx);
        let (l, g) = bank.loss_and_grad_raw(e.input(), r, e.label())?;
        *grad_evals += 1;
        loss += w * l;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += w * gi;
        }
    }
    Ok((loss, grad))
}

fn surrogate_loss(
    bank: &ExpertBank,
    set: &ReferenceSet,
    nb: &Neighborhood,
    r: &[f64],
    forward_evals: &mut usize,
) -> Result<f64> {
    let mut loss = 0.0;
    for (&idx, &w) in nb.indices.iter().zip(&nb.kernel_weights) {
        let e = set.get(idx);
        loss += w * bank.loss_raw(e.input(), r, e.label())?;
        *forward_evals += 1;
    }
    Ok(loss)
}

/// One-shot kernel regression of the routing weights, refined by a line
/// search.
///
/// The guess is `r̂ = sum_i w_i * r_i` over the embedding neighbors. The
/// surrogate loss is then evaluated along `alpha*r0 + (1-alpha)*r̂` at
/// alpha = 1, 0, 0.5 followed by `linesearch_iters` rounds of interval
/// halving (two midpoint probes per round, bracket re-centered on the best
/// point seen). The best evaluated candidate wins, so the endpoints are
/// never beaten silently; alpha = 1 reproduces `r0` exactly and alpha = 0
/// reproduces `r̂` exactly. The test label is never read.
pub fn kernel_regression(
    bank: &ExpertBank,
    set: &ReferenceSet,
    embedding: &TaskEmbedding,
    r0: &RoutingWeights,
    spec: &StrategySpec,
) -> Result<Trajectory> {
    spec.validate()?;
    if r0.len() != set.expert_count() {
        return Err(Error::invalid(format!(
            "routing has {} experts, reference set stores {}",
            r0.len(),
            set.expert_count()
        )));
    }
    let Some(nb) = resolve_or_noop(set, embedding.as_slice(), spec)? else {
        return Ok(Trajectory::noop(r0));
    };
    let mut rhat = vec![0.0; set.expert_count()];
    for (&idx, &w) in nb.indices.iter().zip(&nb.kernel_weights) {
        for (acc, ri) in rhat.iter_mut().zip(set.get(idx).routing().as_slice()) {
            *acc += w * ri;
        }
    }
    let rhat = RoutingWeights::new(rhat)?;

    let mut steps: Vec<TrajectoryStep> = Vec::with_capacity(2 * spec.linesearch_iters + 4);
    let mut evaluated: Vec<(f64, f64)> = Vec::with_capacity(2 * spec.linesearch_iters + 3);
    let mut forward_evals = 0;
    let eval = |alpha: f64,
                steps: &mut Vec<TrajectoryStep>,
                evaluated: &mut Vec<(f64, f64)>,
                forward_evals: &mut usize|
     -> Result<f64> {
        let w = simplex::interpolate(r0, &rhat, alpha)?;
        let loss = surrogate_loss(bank, set, &nb, w.as_slice(), forward_evals)?;
        steps.push(TrajectoryStep {
            weights: w,
            loss: Some(loss),
            prediction: None,
        });
        evaluated.push((alpha, loss));
        Ok(loss)
    };

    // alpha = 1 first so step 0 holds the router's initial weights.
    let mut fhi = eval(1.0, &mut steps, &mut evaluated, &mut forward_evals)?;
    let mut flo = eval(0.0, &mut steps, &mut evaluated, &mut forward_evals)?;
    let mut fmid = eval(0.5, &mut steps, &mut evaluated, &mut forward_evals)?;
    let (mut lo, mut mid, mut hi) = (0.0f64, 0.5f64, 1.0f64);
    for _ in 0..spec.linesearch_iters {
        let m1 = 0.5 * (lo + mid);
        let m2 = 0.5 * (mid + hi);
        let f1 = eval(m1, &mut steps, &mut evaluated, &mut forward_evals)?;
        let f2 = eval(m2, &mut steps, &mut evaluated, &mut forward_evals)?;
        let fs = [flo, f1, fmid, f2, fhi];
        let mut best = 0;
        for (i, &f) in fs.iter().enumerate() {
            if f < fs[best] {
                best = i;
            }
        }
        (lo, mid, hi, flo, fmid, fhi) = match best {
            0 | 1 => (lo, m1, mid, flo, f1, fmid),
            2 => (m1, mid, m2, f1, fmid, f2),
            _ => (mid, m2, hi, fmid, f2, fhi),
        };
    }

    let (mut best_alpha, mut best_loss) = evaluated[0];
    for &(a, l) in &evaluated[1..] {
        if l < best_loss {
            best_alpha = a;
            best_loss = l;
        }
    }
    let chosen = simplex::interpolate(r0, &rhat, best_alpha)?;
    steps.push(TrajectoryStep {
        weights: chosen,
        loss: Some(best_loss),
        prediction: None,
    });
    Ok(Trajectory {
        steps,
        forward_evals,
        grad_evals: 0,
        empty_neighborhood: false,
    })
}

/// Moves the routing weights toward the local mode of the reference
/// routing distribution: repeatedly contract toward the kernel-weighted
/// mean of the current point's neighbors in routing-weight space.
///
/// Stops after `mode_max_steps` contractions or as soon as a contraction
/// displaces the point by less than `mode_tol` in max-norm. Performs no
/// model evaluations and reads no labels.
pub fn mode_finding(
    set: &ReferenceSet,
    r0: &RoutingWeights,
    spec: &StrategySpec,
) -> Result<Trajectory> {
    spec.validate()?;
    if r0.len() != set.expert_count() {
        return Err(Error::invalid(format!(
            "routing has {} experts, reference set stores {}",
            r0.len(),
            set.expert_count()
        )));
    }
    let mut steps = vec![TrajectoryStep {
        weights: r0.clone(),
        loss: None,
        prediction: None,
    }];
    let mut r = r0.clone();
    let mut empty = false;
    for _ in 0..spec.mode_max_steps {
        let Some(nb) = resolve_or_noop(set, r.as_slice(), spec)? else {
            empty = true;
            break;
        };
        let mut rbar = vec![0.0; set.expert_count()];
        for (&idx, &w) in nb.indices.iter().zip(&nb.kernel_weights) {
            for (acc, ri) in rbar.iter_mut().zip(set.get(idx).routing().as_slice()) {
                *acc += w * ri;
            }
        }
        let rbar = RoutingWeights::new(rbar)?;
        let next = simplex::interpolate(&r, &rbar, spec.mode_alpha)?;
        let displacement = next
            .as_slice()
            .iter()
            .zip(r.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        r = next;
        steps.push(TrajectoryStep {
            weights: r.clone(),
            loss: None,
            prediction: None,
        });
        if displacement < spec.mode_tol {
            break;
        }
    }
    Ok(Trajectory {
        steps,
        forward_evals: 0,
        grad_evals: 0,
        empty_neighborhood: empty,
    })
}

/// Dispatches to the spec's strategy and annotates every trajectory step
/// with the model's prediction at that step's weights.
///
/// `label` is consumed only by `oracle_gd`; the label-free strategies never
/// see it.
///
/// # Errors
///
/// `oracle_gd` without a label is an invalid-input error.
pub fn apply(
    spec: &StrategySpec,
    bank: &ExpertBank,
    set: &ReferenceSet,
    r0: &RoutingWeights,
    input: &ModelInput,
    embedding: &TaskEmbedding,
    label: Option<Label>,
) -> Result<Trajectory> {
    let mut trajectory = match spec.kind {
        StrategyKind::OracleGd => {
            let y = label.ok_or_else(|| Error::invalid("oracle_gd requires the true label"))?;
            oracle_gd(bank, input, y, r0, spec)?
        }
        StrategyKind::Ngd => ngd(bank, set, embedding, r0, spec)?,
        StrategyKind::KernelRegression => kernel_regression(bank, set, embedding, r0, spec)?,
        StrategyKind::ModeFinding => mode_finding(set, r0, spec)?,
    };
    for step in &mut trajectory.steps {
        step.prediction = Some(bank.predict(input, &step.weights)?);
    }
    Ok(trajectory)
}
