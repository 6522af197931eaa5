//! Experiment configuration: a TOML file plus command-line overrides,
//! resolved with flag > file > default precedence.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest as _, Sha256};

use crate::analytics::SweepValue;
use crate::error::{Error, Result};
use crate::kernels::{BandwidthPolicy, KernelFamily};
use crate::refset::NeighborhoodMode;
use crate::rerouting::{StrategyKind, StrategySpec};
use crate::rng::Seed;
use crate::schedule::ScheduleSpec;
use crate::synth::BenchSpec;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT_DIR: &str = "out";

/// A fully resolved experiment: every field has its final value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub bench: BenchSpec,
    pub strategies: Vec<StrategySpec>,
    pub sweeps: Vec<SweepConfig>,
    pub out_dir: PathBuf,
    pub seed: Seed,
    pub retain_trajectories: bool,
    /// Include per-step transition tables in summaries. Defaults to
    /// `retain_trajectories`; requesting it without retained trajectories
    /// is a configuration error.
    pub per_step_transitions: bool,
}

/// One ablation: vary a single axis of one strategy kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub strategy: StrategyKind,
    pub axis: String,
    pub values: Vec<SweepValue>,
}

/// Scalar fields the CLI may override.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub retain_trajectories: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    retain_trajectories: Option<bool>,
    per_step_transitions: Option<bool>,
    bench: Option<RawBench>,
    strategy: Option<Vec<RawStrategy>>,
    sweep: Option<Vec<RawSweep>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBench {
    task_type_count: Option<usize>,
    reference_per_type: Option<usize>,
    test_per_type: Option<usize>,
    feature_dim: Option<usize>,
    expert_count: Option<usize>,
    class_count: Option<usize>,
    embedding_noise_sigma: Option<f64>,
    skew_target: Option<usize>,
    skew_strength: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrategy {
    kind: String,
    k: Option<usize>,
    epsilon: Option<f64>,
    kernel: Option<String>,
    bandwidth: Option<toml::Value>,
    schedule: Option<String>,
    steps: Option<usize>,
    linesearch_iters: Option<usize>,
    alpha: Option<f64>,
    max_steps: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    strategy: String,
    axis: String,
    values: Vec<toml::Value>,
}

/// Reads and resolves a configuration. `path` of `None` means "defaults
/// only"; overrides win over the file in either case.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let raw = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<RawConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => RawConfig {
            seed: None,
            out_dir: None,
            retain_trajectories: None,
            per_step_transitions: None,
            bench: None,
            strategy: None,
            sweep: None,
        },
    };
    resolve(raw, overrides)
}

/// The strategy list a configuration without `[[strategy]]` sections runs:
/// every re-routing strategy plus the oracle, each at its defaults.
pub fn default_strategies() -> Vec<StrategySpec> {
    [
        StrategyKind::ModeFinding,
        StrategyKind::KernelRegression,
        StrategyKind::Ngd,
        StrategyKind::OracleGd,
    ]
    .into_iter()
    .map(StrategySpec::defaults)
    .collect()
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<ExperimentConfig> {
    let seed = Seed(overrides.seed.or(raw.seed).unwrap_or(DEFAULT_SEED));
    let out_dir = overrides
        .out_dir
        .clone()
        .or(raw.out_dir)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let retain_trajectories = overrides
        .retain_trajectories
        .or(raw.retain_trajectories)
        .unwrap_or(false);
    let per_step_transitions = raw.per_step_transitions.unwrap_or(retain_trajectories);
    if per_step_transitions && !retain_trajectories {
        return Err(Error::Config(
            "per_step_transitions needs retained trajectories; enable retain_trajectories"
                .to_string(),
        ));
    }

    let mut bench = BenchSpec::default_with_seed(seed);
    if let Some(b) = raw.bench {
        if let Some(v) = b.task_type_count {
            bench.task_type_count = v;
        }
        if let Some(v) = b.reference_per_type {
            bench.reference_per_type = v;
        }
        if let Some(v) = b.test_per_type {
            bench.test_per_type = v;
        }
        if let Some(v) = b.feature_dim {
            bench.feature_dim = v;
        }
        if let Some(v) = b.expert_count {
            bench.expert_count = v;
        }
        if let Some(v) = b.class_count {
            bench.class_count = v;
        }
        if let Some(v) = b.embedding_noise_sigma {
            bench.embedding_noise_sigma = v;
        }
        if let Some(v) = b.skew_target {
            bench.skew_target = v;
        }
        if let Some(v) = b.skew_strength {
            bench.skew_strength = v;
        }
    }
    bench.seed = seed;
    bench
        .validate()
        .map_err(|e| Error::Config(format!("[bench]: {e}")))?;

    let strategies = match raw.strategy {
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, s)| resolve_strategy(s, i))
            .collect::<Result<Vec<_>>>()?,
        None => default_strategies(),
    };
    let mut seen = BTreeSet::new();
    for s in &strategies {
        if !seen.insert(s.kind) {
            return Err(Error::Config(format!(
                "strategy kind '{}' appears more than once; outputs are keyed by kind",
                s.kind
            )));
        }
    }

    let sweeps = raw
        .sweep
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(i, s)| resolve_sweep(s, i))
        .collect::<Result<Vec<_>>>()?;
    let mut seen_sweeps = BTreeSet::new();
    for s in &sweeps {
        if !seen_sweeps.insert((s.strategy, s.axis.clone())) {
            return Err(Error::Config(format!(
                "sweep ({}, {}) appears more than once; outputs are keyed by strategy and axis",
                s.strategy, s.axis
            )));
        }
    }

    Ok(ExperimentConfig {
        bench,
        strategies,
        sweeps,
        out_dir,
        seed,
        retain_trajectories,
        per_step_transitions,
    })
}

fn config_err(ctx: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{ctx}: {msg}"))
}

fn resolve_strategy(raw: &RawStrategy, index: usize) -> Result<StrategySpec> {
    let kind: StrategyKind = raw
        .kind
        .parse()
        .map_err(|e| config_err(&format!("strategy {index}"), e))?;
    let ctx = format!("strategy {index} ({kind})");
    let reject = |key: &str, present: bool| {
        if present {
            Err(config_err(
                &ctx,
                format!("'{key}' does not apply to {kind}"),
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        StrategyKind::OracleGd => {
            reject("k", raw.k.is_some())?;
            reject("epsilon", raw.epsilon.is_some())?;
            reject("kernel", raw.kernel.is_some())?;
            reject("bandwidth", raw.bandwidth.is_some())?;
            reject("linesearch_iters", raw.linesearch_iters.is_some())?;
            reject("alpha", raw.alpha.is_some())?;
            reject("max_steps", raw.max_steps.is_some())?;
            reject("tol", raw.tol.is_some())?;
        }
        StrategyKind::Ngd => {
            reject("linesearch_iters", raw.linesearch_iters.is_some())?;
            reject("alpha", raw.alpha.is_some())?;
            reject("max_steps", raw.max_steps.is_some())?;
            reject("tol", raw.tol.is_some())?;
        }
        StrategyKind::KernelRegression => {
            reject("schedule", raw.schedule.is_some())?;
            reject("steps", raw.steps.is_some())?;
            reject("alpha", raw.alpha.is_some())?;
            reject("max_steps", raw.max_steps.is_some())?;
            reject("tol", raw.tol.is_some())?;
        }
        StrategyKind::ModeFinding => {
            reject("schedule", raw.schedule.is_some())?;
            reject("steps", raw.steps.is_some())?;
            reject("linesearch_iters", raw.linesearch_iters.is_some())?;
        }
    }

    let mut spec = StrategySpec::defaults(kind);
    if raw.k.is_some() && raw.epsilon.is_some() {
        return Err(config_err(&ctx, "choose one of 'k' or 'epsilon', not both"));
    }
    if let Some(k) = raw.k {
        spec.neighborhood.mode = NeighborhoodMode::Knn { k };
    }
    if let Some(epsilon) = raw.epsilon {
        spec.neighborhood.mode = NeighborhoodMode::EpsilonBall { epsilon };
    }
    if let Some(kernel) = &raw.kernel {
        spec.kernel.family = kernel
            .parse::<KernelFamily>()
            .map_err(|e| config_err(&ctx, e))?;
    }
    if let Some(bandwidth) = &raw.bandwidth {
        spec.kernel.bandwidth = parse_bandwidth(bandwidth).map_err(|e| config_err(&ctx, e))?;
    }
    if let Some(schedule) = &raw.schedule {
        spec.schedule = schedule
            .parse::<ScheduleSpec>()
            .map_err(|e| config_err(&ctx, e))?;
    }
    if let Some(steps) = raw.steps {
        spec.step_count = steps;
    }
    if let Some(iters) = raw.linesearch_iters {
        spec.linesearch_iters = iters;
    }
    if let Some(alpha) = raw.alpha {
        spec.mode_alpha = alpha;
    }
    if let Some(max_steps) = raw.max_steps {
        spec.mode_max_steps = max_steps;
    }
    if let Some(tol) = raw.tol {
        spec.mode_tol = tol;
    }
    spec.validate().map_err(|e| config_err(&ctx, e))?;
    Ok(spec)
}

fn parse_bandwidth(value: &toml::Value) -> Result<BandwidthPolicy> {
    match value {
        toml::Value::String(s) if s == "median" => Ok(BandwidthPolicy::MedianHeuristic),
        toml::Value::String(s) => Err(Error::invalid(format!(
            "bandwidth must be 'median' or a positive number, got '{s}'"
        ))),
        toml::Value::Float(v) => Ok(BandwidthPolicy::Fixed(*v)),
        toml::Value::Integer(v) => Ok(BandwidthPolicy::Fixed(*v as f64)),
        other => Err(Error::invalid(format!(
            "bandwidth must be 'median' or a positive number, got {other}"
        ))),
    }
}

const SWEEP_AXES: [&str; 5] = ["k", "epsilon", "kernel", "steps", "schedule"];

fn resolve_sweep(raw: &RawSweep, index: usize) -> Result<SweepConfig> {
    let ctx = format!("sweep {index}");
    let kind: StrategyKind = raw.strategy.parse().map_err(|e| config_err(&ctx, e))?;
    let axis = raw.axis.as_str();
    if !SWEEP_AXES.contains(&axis) {
        return Err(config_err(
            &ctx,
            format!(
                "unknown axis '{axis}'; expected one of {}",
                SWEEP_AXES.join(", ")
            ),
        ));
    }
    let applicable = match kind {
        StrategyKind::OracleGd => matches!(axis, "steps" | "schedule"),
        StrategyKind::Ngd => true,
        StrategyKind::KernelRegression | StrategyKind::ModeFinding => {
            matches!(axis, "k" | "epsilon" | "kernel")
        }
    };
    if !applicable {
        return Err(config_err(
            &ctx,
            format!("axis '{axis}' does not apply to {kind}"),
        ));
    }
    if raw.values.is_empty() {
        return Err(config_err(&ctx, "values must not be empty"));
    }
    let values = raw
        .values
        .iter()
        .map(|v| sweep_value(axis, v))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| config_err(&ctx, e))?;
    Ok(SweepConfig {
        strategy: kind,
        axis: axis.to_string(),
        values,
    })
}

fn sweep_value(axis: &str, value: &toml::Value) -> Result<SweepValue> {
    let want_usize = || -> Result<usize> {
        match value {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            other => Err(Error::invalid(format!(
                "axis '{axis}' takes non-negative integers, got {other}"
            ))),
        }
    };
    match axis {
        "k" => Ok(SweepValue::K(want_usize()?)),
        "steps" => Ok(SweepValue::Steps(want_usize()?)),
        "epsilon" => match value {
            toml::Value::Float(v) => Ok(SweepValue::Epsilon(*v)),
            toml::Value::Integer(i) => Ok(SweepValue::Epsilon(*i as f64)),
            other => Err(Error::invalid(format!(
                "axis 'epsilon' takes numbers, got {other}"
            ))),
        },
        "kernel" => match value {
            toml::Value::String(s) => Ok(SweepValue::Kernel(s.parse()?)),
            other => Err(Error::invalid(format!(
                "axis 'kernel' takes strings, got {other}"
            ))),
        },
        "schedule" => match value {
            toml::Value::String(s) => Ok(SweepValue::Schedule(s.parse()?)),
            other => Err(Error::invalid(format!(
                "axis 'schedule' takes strings, got {other}"
            ))),
        },
        _ => unreachable!("axis validated by resolve_sweep"),
    }
}

impl ExperimentConfig {
    /// Canonical text form covering every resolved field. Two configs with
    /// the same canonical text behave identically.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        let b = &self.bench;
        writeln!(out, "seed = {}", self.seed.0).expect("write to string");
        writeln!(out, "out_dir = {:?}", self.out_dir).expect("write to string");
        writeln!(out, "retain_trajectories = {}", self.retain_trajectories)
            .expect("write to string");
        writeln!(out, "per_step_transitions = {}", self.per_step_transitions)
            .expect("write to string");
        writeln!(
            out,
            "bench = types({}) ref({}) test({}) dim({}) experts({}) classes({}) sigma({}) skew({},{})",
            b.task_type_count,
            b.reference_per_type,
            b.test_per_type,
            b.feature_dim,
            b.expert_count,
            b.class_count,
            b.embedding_noise_sigma,
            b.skew_target,
            b.skew_strength
        )
        .expect("write to string");
        for s in &self.strategies {
            writeln!(out, "strategy = {}", canonical_strategy(s)).expect("write to string");
        }
        for sweep in &self.sweeps {
            let values: Vec<String> = sweep.values.iter().map(|v| v.label()).collect();
            writeln!(
                out,
                "sweep = {} axis({}) values({})",
                sweep.strategy,
                sweep.axis,
                values.join(";")
            )
            .expect("write to string");
        }
        out
    }

    /// Hex SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

fn canonical_strategy(s: &StrategySpec) -> String {
    let mode = match s.neighborhood.mode {
        NeighborhoodMode::Knn { k } => format!("knn({k})"),
        NeighborhoodMode::EpsilonBall { epsilon } => format!("epsilon_ball({epsilon})"),
    };
    let space = match s.neighborhood.space {
        crate::refset::QuerySpace::Embedding => "embedding",
        crate::refset::QuerySpace::RoutingWeight => "routing",
    };
    let bandwidth = match s.kernel.bandwidth {
        BandwidthPolicy::MedianHeuristic => "median".to_string(),
        BandwidthPolicy::Fixed(v) => format!("{v}"),
    };
    format!(
        "{} {mode}@{space} kernel({}) bandwidth({bandwidth}) schedule({}) steps({}) linesearch({}) mode({},{},{})",
        s.kind, s.kernel.family, s.schedule, s.step_count, s.linesearch_iters, s.mode_alpha, s.mode_max_steps, s.mode_tol
    )
}
