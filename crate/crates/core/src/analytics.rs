//! Benchmark evaluation and the accounting built on top of it: correctness
//! transitions, top-1 expert shift, cost summaries, and one-axis ablation
//! sweeps.

use rayon::prelude::*;
use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::moe::{ExpertBank, Router};
use crate::refset::{NeighborhoodMode, ReferenceSet};
use crate::rerouting::{self, StrategySpec, Trajectory};
use crate::schedule::ScheduleSpec;
use crate::synth::Sample;
use crate::types::{Label, RoutingWeights};

/// Everything recorded about one evaluated test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub index: usize,
    pub task_type: usize,
    pub label: Label,
    pub base_prediction: Label,
    pub base_correct: bool,
    pub final_prediction: Label,
    pub final_correct: bool,
    pub initial_top_expert: usize,
    pub final_top_expert: usize,
    pub base_weights: RoutingWeights,
    pub final_weights: RoutingWeights,
    pub forward_evals: usize,
    pub grad_evals: usize,
    pub steps_taken: usize,
    pub empty_neighborhood: bool,
}

/// The outcome of evaluating one strategy over a test split.
///
/// `accuracy` is exactly the fraction of samples whose final prediction is
/// correct; `trajectories` (index-aligned with `outcomes`) are kept only
/// when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub outcomes: Vec<SampleOutcome>,
    pub trajectories: Option<Vec<Trajectory>>,
    pub accuracy: f64,
    pub base_accuracy: f64,
    pub per_type_accuracy: BTreeMap<usize, f64>,
}

/// Runs `strategy` on every test sample against the frozen model, base
/// router, and reference set.
///
/// Per-sample work runs in parallel; results are collected in sample order
/// and aggregated in a single left-to-right pass, so the outcome is
/// bit-deterministic.
///
/// # Errors
///
/// Rejects an empty test split and any test sample whose features
/// duplicate a reference entry (the splits must be disjoint).
pub fn evaluate(
    bank: &ExpertBank,
    router: &Router,
    set: &ReferenceSet,
    test_split: &[Sample],
    strategy: &StrategySpec,
    retain_trajectories: bool,
) -> Result<EvalResult> {
    strategy.validate()?;
    if test_split.is_empty() {
        return Err(Error::invalid("test split is empty"));
    }
    let reference_keys: HashSet<Vec<u64>> = set
        .entries()
        .iter()
        .map(|e| e.input().features.iter().map(|f| f.to_bits()).collect())
        .collect();
    for (i, s) in test_split.iter().enumerate() {
        let key: Vec<u64> = s.input.features.iter().map(|f| f.to_bits()).collect();
        if reference_keys.contains(&key) {
            return Err(Error::invalid(format!(
                "test sample {i} duplicates a reference entry; splits must be disjoint"
            )));
        }
    }

    let per_sample: Result<Vec<(SampleOutcome, Trajectory)>> = test_split
        .par_iter()
        .enumerate()
        .map(|(index, sample)| {
            let r0 = router.route(&sample.input)?;
            let trajectory = rerouting::apply(
                strategy,
                bank,
                set,
                &r0,
                &sample.input,
                &sample.embedding,
                Some(sample.label),
            )?;
            let first = &trajectory.steps[0];
            let last = &trajectory.steps[trajectory.steps.len() - 1];
            let base_prediction = first.prediction.expect("apply fills predictions");
            let final_prediction = last.prediction.expect("apply fills predictions");
            let outcome = SampleOutcome {
                index,
                task_type: sample.input.task_type,
                label: sample.label,
                base_prediction,
                base_correct: base_prediction == sample.label,
                final_prediction,
                final_correct: final_prediction == sample.label,
                initial_top_expert: first.weights.top_expert(),
                final_top_expert: last.weights.top_expert(),
                base_weights: first.weights.clone(),
                final_weights: last.weights.clone(),
                forward_evals: trajectory.forward_evals,
                grad_evals: trajectory.grad_evals,
                steps_taken: trajectory.steps.len() - 1,
                empty_neighborhood: trajectory.empty_neighborhood,
            };
            Ok((outcome, trajectory))
        })
        .collect();
    let per_sample = per_sample?;

    let n = per_sample.len();
    let mut outcomes = Vec::with_capacity(n);
    let mut trajectories = Vec::with_capacity(if retain_trajectories { n } else { 0 });
    let mut final_correct = 0usize;
    let mut base_correct = 0usize;
    let mut per_type: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (outcome, trajectory) in per_sample {
        final_correct += outcome.final_correct as usize;
        base_correct += outcome.base_correct as usize;
        let slot = per_type.entry(outcome.task_type).or_insert((0, 0));
        slot.0 += outcome.final_correct as usize;
        slot.1 += 1;
        outcomes.push(outcome);
        if retain_trajectories {
            trajectories.push(trajectory);
        }
    }
    Ok(EvalResult {
        accuracy: final_correct as f64 / n as f64,
        base_accuracy: base_correct as f64 / n as f64,
        per_type_accuracy: per_type
            .into_iter()
            .map(|(t, (c, total))| (t, c as f64 / total as f64))
            .collect(),
        outcomes,
        trajectories: if retain_trajectories {
            Some(trajectories)
        } else {
            None
        },
    })
}

/// Counts of the four (base correctness, re-routed correctness) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransitionCounts {
    pub incorrect_to_correct: usize,
    pub correct_to_incorrect: usize,
    pub correct_to_correct: usize,
    pub incorrect_to_incorrect: usize,
}

impl TransitionCounts {
    fn record(&mut self, before: bool, after: bool) {
        match (before, after) {
            (false, true) => self.incorrect_to_correct += 1,
            (true, false) => self.correct_to_incorrect += 1,
            (true, true) => self.correct_to_correct += 1,
            (false, false) => self.incorrect_to_incorrect += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.incorrect_to_correct
            + self.correct_to_incorrect
            + self.correct_to_correct
            + self.incorrect_to_incorrect
    }

    /// Percentages in the same cell order as the fields; sums to 100
    /// within 1e-9 for a non-empty table.
    pub fn percentages(&self) -> [f64; 4] {
        let t = self.total() as f64;
        [
            100.0 * self.incorrect_to_correct as f64 / t,
            100.0 * self.correct_to_incorrect as f64 / t,
            100.0 * self.correct_to_correct as f64 / t,
            100.0 * self.incorrect_to_incorrect as f64 / t,
        ]
    }
}

/// Correctness transitions, overall and (when trajectories were retained)
/// per optimization step, each step compared against step 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub overall: TransitionCounts,
    pub per_step: Option<Vec<TransitionCounts>>,
}

/// # Errors
///
/// `per_step` requires retained trajectories with recorded predictions.
pub fn transitions(result: &EvalResult, per_step: bool) -> Result<TransitionTable> {
    let mut overall = TransitionCounts::default();
    for o in &result.outcomes {
        overall.record(o.base_correct, o.final_correct);
    }
    let per_step_tables = if per_step {
        let trajectories = result.trajectories.as_ref().ok_or_else(|| {
            Error::invalid(
                "per-step transitions need retained trajectories; re-run with them enabled",
            )
        })?;
        let max_len = trajectories
            .iter()
            .map(|t| t.steps.len())
            .max()
            .unwrap_or(0);
        let mut tables = Vec::with_capacity(max_len);
        for step in 0..max_len {
            let mut counts = TransitionCounts::default();
            for (t, o) in trajectories.iter().zip(&result.outcomes) {
                // Converged trajectories hold their final prediction.
                let s = &t.steps[step.min(t.steps.len() - 1)];
                let prediction = s
                    .prediction
                    .ok_or_else(|| Error::invalid("trajectory step lacks a recorded prediction"))?;
                counts.record(o.base_correct, prediction == o.label);
            }
            tables.push(counts);
        }
        Some(tables)
    } else {
        None
    };
    Ok(TransitionTable {
        overall,
        per_step: per_step_tables,
    })
}

/// Top-1 expert movement, split by final correctness. Rows index the
/// initial top-1 expert, columns the final one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertShiftMatrix {
    pub expert_count: usize,
    pub to_correct: Vec<usize>,
    pub to_incorrect: Vec<usize>,
    pub initial_top_entropy: f64,
    pub final_top_entropy: f64,
}

impl ExpertShiftMatrix {
    pub fn total(&self) -> usize {
        self.to_correct.iter().sum::<usize>() + self.to_incorrect.iter().sum::<usize>()
    }

    pub fn at(&self, correct: bool, initial: usize, fin: usize) -> usize {
        let m = if correct {
            &self.to_correct
        } else {
            &self.to_incorrect
        };
        m[initial * self.expert_count + fin]
    }
}

fn entropy(counts: &[usize], total: usize) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}

pub fn expert_shift(result: &EvalResult) -> Result<ExpertShiftMatrix> {
    let first = result
        .outcomes
        .first()
        .ok_or_else(|| Error::invalid("no outcomes to analyze"))?;
    let e = first.base_weights.len();
    let mut to_correct = vec![0usize; e * e];
    let mut to_incorrect = vec![0usize; e * e];
    let mut initial_counts = vec![0usize; e];
    let mut final_counts = vec![0usize; e];
    for o in &result.outcomes {
        let cell = o.initial_top_expert * e + o.final_top_expert;
        if o.final_correct {
            to_correct[cell] += 1;
        } else {
            to_incorrect[cell] += 1;
        }
        initial_counts[o.initial_top_expert] += 1;
        final_counts[o.final_top_expert] += 1;
    }
    let n = result.outcomes.len();
    Ok(ExpertShiftMatrix {
        expert_count: e,
        to_correct,
        to_incorrect,
        initial_top_entropy: entropy(&initial_counts, n),
        final_top_entropy: entropy(&final_counts, n),
    })
}

/// Mean evaluation counts per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub strategy: String,
    pub mean_forward_evals: f64,
    pub mean_grad_evals: f64,
    pub mean_steps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    pub rows: Vec<CostRow>,
}

pub fn cost_summary(entries: &[(&str, &EvalResult)]) -> CostSummary {
    let rows = entries
        .iter()
        .map(|(name, result)| {
            let n = result.outcomes.len() as f64;
            CostRow {
                strategy: (*name).to_string(),
                mean_forward_evals: result
                    .outcomes
                    .iter()
                    .map(|o| o.forward_evals as f64)
                    .sum::<f64>()
                    / n,
                mean_grad_evals: result
                    .outcomes
                    .iter()
                    .map(|o| o.grad_evals as f64)
                    .sum::<f64>()
                    / n,
                mean_steps: result
                    .outcomes
                    .iter()
                    .map(|o| o.steps_taken as f64)
                    .sum::<f64>()
                    / n,
            }
        })
        .collect();
    CostSummary { rows }
}

/// One ablation axis: each value patches a single field of the base
/// strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepValue {
    K(usize),
    Epsilon(f64),
    Kernel(KernelFamily),
    Steps(usize),
    Schedule(ScheduleSpec),
}

impl SweepValue {
    pub fn axis_name(&self) -> &'static str {
        match self {
            SweepValue::K(_) => "k",
            SweepValue::Epsilon(_) => "epsilon",
            SweepValue::Kernel(_) => "kernel",
            SweepValue::Steps(_) => "steps",
            SweepValue::Schedule(_) => "schedule",
        }
    }

    pub fn label(&self) -> String {
        match self {
            SweepValue::K(k) => format!("k={k}"),
            SweepValue::Epsilon(eps) => format!("epsilon={eps}"),
            SweepValue::Kernel(f) => format!("kernel={f}"),
            SweepValue::Steps(s) => format!("steps={s}"),
            SweepValue::Schedule(s) => format!("schedule={s}"),
        }
    }

    fn patch(&self, spec: &mut StrategySpec) {
        match self {
            SweepValue::K(k) => spec.neighborhood.mode = NeighborhoodMode::Knn { k: *k },
            SweepValue::Epsilon(eps) => {
                spec.neighborhood.mode = NeighborhoodMode::EpsilonBall { epsilon: *eps }
            }
            SweepValue::Kernel(f) => spec.kernel.family = *f,
            SweepValue::Steps(s) => spec.step_count = *s,
            SweepValue::Schedule(s) => spec.schedule = *s,
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub accuracy: f64,
    pub mean_forward_evals: f64,
    pub mean_grad_evals: f64,
}

/// Evaluates the base strategy once per value, all else fixed, and returns
/// rows ranked by accuracy (descending; ties keep value order).
///
/// # Errors
///
/// Values must be non-empty and all on the same axis.
pub fn sweep(
    base: &StrategySpec,
    values: &[SweepValue],
    bank: &ExpertBank,
    router: &Router,
    set: &ReferenceSet,
    test_split: &[Sample],
) -> Result<Vec<SweepRow>> {
    let first = values
        .first()
        .ok_or_else(|| Error::invalid("sweep requires at least one value"))?;
    if values.iter().any(|v| v.axis_name() != first.axis_name()) {
        return Err(Error::invalid("sweep values mix axes; one axis per sweep"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut spec = base.clone();
        value.patch(&mut spec);
        let result = evaluate(bank, router, set, test_split, &spec, false)?;
        let cost = cost_summary(&[("", &result)]);
        rows.push(SweepRow {
            label: value.label(),
            accuracy: result.accuracy,
            mean_forward_evals: cost.rows[0].mean_forward_evals,
            mean_grad_evals: cost.rows[0].mean_grad_evals,
        });
    }
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerouting::StrategyKind;
    use crate::rng::Seed;
    use crate::synth::{self, BenchSpec};

    struct Fixture {
        bank: ExpertBank,
        router: Router,
        set: ReferenceSet,
        test: Vec<Sample>,
    }

    fn fixture(seed: u64) -> Fixture {
        let spec = BenchSpec {
            task_type_count: 4,
            reference_per_type: 50,
            test_per_type: 25,
            feature_dim: 8,
            expert_count: 4,
            class_count: 3,
            embedding_noise_sigma: 0.05,
            skew_target: 0,
            skew_strength: 3.0,
            seed: Seed(seed),
        };
        let bench = synth::generate(&spec).unwrap();
        let router = bench.train_base_router().unwrap();
        let set = bench.reference_set(&router).unwrap();
        Fixture {
            bank: bench.bank,
            router,
            set,
            test: bench.test_pool,
        }
    }

    fn identity_strategy() -> StrategySpec {
        let mut s = StrategySpec::defaults(StrategyKind::Ngd);
        s.step_count = 0;
        s
    }

    #[test]
    fn identity_strategy_preserves_base_accuracy_exactly() {
        let f = fixture(101);
        let r = evaluate(
            &f.bank,
            &f.router,
            &f.set,
            &f.test,
            &identity_strategy(),
            false,
        )
        .unwrap();
        assert_eq!(r.accuracy, r.base_accuracy);
        for o in &r.outcomes {
            assert_eq!(o.base_prediction, o.final_prediction);
            assert_eq!(o.base_weights, o.final_weights);
        }
    }

    #[test]
    fn accuracy_is_exactly_the_mean_of_correctness() {
        let f = fixture(102);
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let r = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, false).unwrap();
        let count = r.outcomes.iter().filter(|o| o.final_correct).count();
        assert_eq!(r.accuracy, count as f64 / r.outcomes.len() as f64);
        for (&t, &acc) in &r.per_type_accuracy {
            let of_type: Vec<_> = r.outcomes.iter().filter(|o| o.task_type == t).collect();
            let correct = of_type.iter().filter(|o| o.final_correct).count();
            assert_eq!(acc, correct as f64 / of_type.len() as f64);
        }
    }

    #[test]
    fn evaluate_is_bit_deterministic() {
        let f = fixture(103);
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let a = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, true).unwrap();
        let b = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_overlap_is_rejected() {
        let f = fixture(104);
        let mut test = f.test.clone();
        let e = f.set.get(0);
        test[3] = Sample {
            input: e.input().clone(),
            label: e.label(),
            embedding: e.embedding().clone(),
        };
        let err = evaluate(
            &f.bank,
            &f.router,
            &f.set,
            &test,
            &identity_strategy(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn empty_test_split_is_rejected() {
        let f = fixture(105);
        assert!(evaluate(&f.bank, &f.router, &f.set, &[], &identity_strategy(), false).is_err());
    }

    fn outcome(base: bool, fin: bool) -> SampleOutcome {
        SampleOutcome {
            index: 0,
            task_type: 0,
            label: Label(0),
            base_prediction: Label(if base { 0 } else { 1 }),
            base_correct: base,
            final_prediction: Label(if fin { 0 } else { 1 }),
            final_correct: fin,
            initial_top_expert: 0,
            final_top_expert: 0,
            base_weights: RoutingWeights::uniform(2).unwrap(),
            final_weights: RoutingWeights::uniform(2).unwrap(),
            forward_evals: 0,
            grad_evals: 0,
            steps_taken: 0,
            empty_neighborhood: false,
        }
    }

    #[test]
    fn transition_cells_enumerate_known_pairs() {
        let result = EvalResult {
            outcomes: vec![
                outcome(true, true),
                outcome(true, false),
                outcome(false, true),
                outcome(false, false),
            ],
            trajectories: None,
            accuracy: 0.5,
            base_accuracy: 0.5,
            per_type_accuracy: BTreeMap::new(),
        };
        let t = transitions(&result, false).unwrap();
        assert_eq!(t.overall.correct_to_correct, 1);
        assert_eq!(t.overall.correct_to_incorrect, 1);
        assert_eq!(t.overall.incorrect_to_correct, 1);
        assert_eq!(t.overall.incorrect_to_incorrect, 1);
        assert_eq!(t.overall.total(), 4);
        let sum: f64 = t.overall.percentages().iter().sum();
        assert!((sum - 100.0).abs() <= 1e-9);
    }

    #[test]
    fn identity_strategy_has_no_off_diagonal_transitions() {
        let f = fixture(106);
        let r = evaluate(
            &f.bank,
            &f.router,
            &f.set,
            &f.test,
            &identity_strategy(),
            false,
        )
        .unwrap();
        let t = transitions(&r, false).unwrap();
        assert_eq!(t.overall.incorrect_to_correct, 0);
        assert_eq!(t.overall.correct_to_incorrect, 0);
        assert_eq!(t.overall.total(), f.test.len());
    }

    #[test]
    fn per_step_transitions_need_trajectories_and_partition_each_step() {
        let f = fixture(107);
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let without = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, false).unwrap();
        assert!(transitions(&without, true).is_err());

        let with = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, true).unwrap();
        let t = transitions(&with, true).unwrap();
        let per_step = t.per_step.unwrap();
        assert_eq!(per_step.len(), 11);
        for counts in &per_step {
            assert_eq!(counts.total(), f.test.len());
        }
        // Step 0 compares base against base.
        assert_eq!(per_step[0].incorrect_to_correct, 0);
        assert_eq!(per_step[0].correct_to_incorrect, 0);
        // The last per-step table is the overall table.
        assert_eq!(per_step[10], t.overall);
    }

    #[test]
    fn expert_shift_is_diagonal_for_identity() {
        let f = fixture(108);
        let r = evaluate(
            &f.bank,
            &f.router,
            &f.set,
            &f.test,
            &identity_strategy(),
            false,
        )
        .unwrap();
        let m = expert_shift(&r).unwrap();
        assert_eq!(m.total(), f.test.len());
        for i in 0..m.expert_count {
            for j in 0..m.expert_count {
                if i != j {
                    assert_eq!(m.at(true, i, j) + m.at(false, i, j), 0);
                }
            }
        }
        assert_eq!(m.initial_top_entropy, m.final_top_entropy);
    }

    #[test]
    fn expert_shift_counts_reconcile_with_transitions() {
        let f = fixture(109);
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let r = evaluate(&f.bank, &f.router, &f.set, &f.test, &spec, false).unwrap();
        let m = expert_shift(&r).unwrap();
        let t = transitions(&r, false).unwrap();
        assert_eq!(m.total(), t.overall.total());
        let to_correct: usize = m.to_correct.iter().sum();
        assert_eq!(
            to_correct,
            t.overall.incorrect_to_correct + t.overall.correct_to_correct
        );
    }

    #[test]
    fn entropy_is_zero_when_concentrated_and_maximal_when_uniform() {
        assert_eq!(entropy(&[10, 0, 0], 10), 0.0);
        let h = entropy(&[5, 5, 5, 5], 20);
        assert!((h - (4.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn cost_summary_reports_exact_counter_means() {
        let f = fixture(110);
        let ngd = StrategySpec::defaults(StrategyKind::Ngd);
        let r = evaluate(&f.bank, &f.router, &f.set, &f.test, &ngd, false).unwrap();
        let c = cost_summary(&[("ngd", &r)]);
        assert_eq!(c.rows[0].mean_grad_evals, 50.0);
        assert_eq!(c.rows[0].mean_forward_evals, 0.0);
        assert_eq!(c.rows[0].mean_steps, 10.0);

        let mode = StrategySpec::defaults(StrategyKind::ModeFinding);
        let rm = evaluate(&f.bank, &f.router, &f.set, &f.test, &mode, false).unwrap();
        let cm = cost_summary(&[("mode_finding", &rm)]);
        assert_eq!(cm.rows[0].mean_forward_evals, 0.0);
        assert_eq!(cm.rows[0].mean_grad_evals, 0.0);
    }

    #[test]
    fn sweep_single_value_matches_direct_evaluation() {
        let f = fixture(111);
        let base = StrategySpec::defaults(StrategyKind::Ngd);
        let rows = sweep(
            &base,
            &[SweepValue::Steps(10)],
            &f.bank,
            &f.router,
            &f.set,
            &f.test,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let direct = evaluate(&f.bank, &f.router, &f.set, &f.test, &base, false).unwrap();
        assert_eq!(rows[0].accuracy, direct.accuracy);
        assert_eq!(rows[0].label, "steps=10");
    }

    #[test]
    fn sweep_k_axis_scales_gradient_cost_monotonically() {
        let f = fixture(112);
        let base = StrategySpec::defaults(StrategyKind::Ngd);
        let ks = [3usize, 5, 10, 20];
        let values: Vec<SweepValue> = ks.iter().map(|&k| SweepValue::K(k)).collect();
        let rows = sweep(&base, &values, &f.bank, &f.router, &f.set, &f.test).unwrap();
        assert_eq!(rows.len(), 4);
        for (&k, label) in ks.iter().zip(["k=3", "k=5", "k=10", "k=20"]) {
            let row = rows.iter().find(|r| r.label == label).unwrap();
            assert_eq!(row.mean_grad_evals, (10 * k) as f64);
        }
    }

    #[test]
    fn sweep_rows_are_ranked_by_accuracy() {
        let f = fixture(113);
        let base = StrategySpec::defaults(StrategyKind::Ngd);
        let values = vec![
            SweepValue::Steps(0),
            SweepValue::Steps(10),
            SweepValue::Steps(5),
        ];
        let rows = sweep(&base, &values, &f.bank, &f.router, &f.set, &f.test).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[0].accuracy >= pair[1].accuracy);
        }
    }

    #[test]
    fn sweep_rejects_empty_and_mixed_axes() {
        let f = fixture(114);
        let base = StrategySpec::defaults(StrategyKind::Ngd);
        assert!(sweep(&base, &[], &f.bank, &f.router, &f.set, &f.test).is_err());
        let mixed = vec![SweepValue::Steps(5), SweepValue::K(5)];
        assert!(sweep(&base, &mixed, &f.bank, &f.router, &f.set, &f.test).is_err());
    }

    #[test]
    fn epsilon_sweep_tolerates_empty_neighborhoods() {
        let f = fixture(115);
        let base = StrategySpec::defaults(StrategyKind::Ngd);
        let values = vec![SweepValue::Epsilon(1e-6), SweepValue::Epsilon(10.0)];
        let rows = sweep(&base, &values, &f.bank, &f.router, &f.set, &f.test).unwrap();
        assert_eq!(rows.len(), 2);
        // A vanishing radius leaves every sample unadjusted.
        let tiny = rows.iter().find(|r| r.label == "epsilon=0.000001").unwrap();
        let identity = evaluate(
            &f.bank,
            &f.router,
            &f.set,
            &f.test,
            &identity_strategy(),
            false,
        )
        .unwrap();
        assert_eq!(tiny.accuracy, identity.accuracy);
    }
}
