//! Command implementations behind the CLI: benchmark generation, strategy
//! execution with per-strategy failure isolation, and report
//! consolidation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analytics::{self, EvalResult};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::moe::{ExpertBank, Router};
use crate::records::{self, SamplesHeader, StrategySummary, SweepSummary};
use crate::refset::ReferenceSet;
use crate::rerouting::{StrategyKind, StrategySpec};
use crate::synth::{self, Sample};

pub const MODEL_FILE: &str = "model.txt";
pub const REFSET_FILE: &str = "refset.txt";
pub const TEST_FILE: &str = "test.txt";

/// Name under which the unadjusted router's results are reported.
pub const BASE_NAME: &str = "base";

pub fn summary_file(name: &str) -> String {
    format!("summary_{name}.json")
}

pub fn sweep_file(kind: StrategyKind, axis: &str) -> String {
    format!("sweep_{kind}_{axis}.json")
}

pub fn trajectories_file(kind: StrategyKind) -> String {
    format!("trajectories_{kind}.txt")
}

/// What a `run` did: which files it wrote and which configured units
/// (strategies or sweeps) failed.
#[derive(Debug)]
pub struct RunReport {
    pub written: Vec<String>,
    pub failures: Vec<(String, String)>,
    pub succeeded_units: usize,
}

struct Materialized {
    bank: ExpertBank,
    router: Router,
    set: ReferenceSet,
    test: Vec<Sample>,
}

fn build_inline(cfg: &ExperimentConfig) -> Result<Materialized> {
    let bench = synth::generate(&cfg.bench)?;
    let router = bench.train_base_router()?;
    let set = bench.reference_set(&router)?;
    Ok(Materialized {
        bank: bench.bank,
        router,
        set,
        test: bench.test_pool,
    })
}

fn benchmark_files_present(dir: &Path) -> bool {
    [MODEL_FILE, REFSET_FILE, TEST_FILE]
        .iter()
        .all(|name| dir.join(name).is_file())
}

fn load_from_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<Materialized> {
    let (bank, router) = records::read_model(&dir.join(MODEL_FILE))?;
    if bank.feature_dim() != cfg.bench.feature_dim
        || bank.expert_count() != cfg.bench.expert_count
        || bank.class_count() != cfg.bench.class_count
    {
        return Err(Error::invalid(format!(
            "benchmark files in {} do not match the configured benchmark dimensions",
            dir.display()
        )));
    }
    let set = records::read_reference_set(&dir.join(REFSET_FILE), &bank)?;
    let (test, header) = records::read_samples(&dir.join(TEST_FILE))?;
    if header.feature_dim != bank.feature_dim()
        || header.class_count != bank.class_count()
        || header.embedding_dim != set.embedding_dim()
        || header.task_type_count != cfg.bench.task_type_count
    {
        return Err(Error::invalid(format!(
            "test split in {} does not match the model and reference set",
            dir.display()
        )));
    }
    Ok(Materialized {
        bank,
        router,
        set,
        test,
    })
}

fn write_benchmark_files(
    dir: &Path,
    m: &Materialized,
    cfg: &ExperimentConfig,
) -> Result<Vec<String>> {
    records::write_model(&dir.join(MODEL_FILE), &m.bank, &m.router)?;
    records::write_reference_set(
        &dir.join(REFSET_FILE),
        &m.set,
        m.bank.class_count(),
        cfg.bench.task_type_count,
    )?;
    records::write_samples(
        &dir.join(TEST_FILE),
        &m.test,
        SamplesHeader {
            feature_dim: m.bank.feature_dim(),
            embedding_dim: m.set.embedding_dim(),
            class_count: m.bank.class_count(),
            task_type_count: cfg.bench.task_type_count,
        },
    )?;
    Ok(vec![
        MODEL_FILE.into(),
        REFSET_FILE.into(),
        TEST_FILE.into(),
    ])
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generates the benchmark declared by the config and writes its files
/// plus a manifest. Returns the names of the files written.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let m = build_inline(cfg)?;
    let mut written = write_benchmark_files(dir, &m, cfg)?;
    let mut manifest = RunManifest::new(cfg.digest(), cfg.seed.0);
    for name in &written {
        manifest.record_output(dir, name)?;
    }
    manifest.write(dir)?;
    written.push(crate::manifest::MANIFEST_FILE.into());
    Ok(written)
}

/// The identity strategy used to report the unadjusted router.
fn base_spec() -> StrategySpec {
    let mut spec = StrategySpec::defaults(StrategyKind::Ngd);
    spec.step_count = 0;
    spec
}

fn build_summary(name: &str, result: &EvalResult, per_step: bool) -> Result<StrategySummary> {
    let table = analytics::transitions(result, per_step)?;
    let shift = analytics::expert_shift(result)?;
    let cost = analytics::cost_summary(&[(name, result)]);
    Ok(StrategySummary::build(
        name,
        result,
        &table,
        &shift,
        &cost.rows[0],
    ))
}

/// Runs every configured strategy and sweep against the benchmark,
/// loading benchmark files from the output directory when all are present
/// and generating them inline (and writing them) otherwise.
///
/// A strategy or sweep that fails is reported and noted in the manifest
/// without aborting the rest of the batch.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let dir = &cfg.out_dir;
    ensure_dir(dir)?;
    let loaded = benchmark_files_present(dir);
    let m = if loaded {
        load_from_dir(dir, cfg)?
    } else {
        build_inline(cfg)?
    };
    let mut written = Vec::new();
    if !loaded {
        written.extend(write_benchmark_files(dir, &m, cfg)?);
    }
    let mut manifest = RunManifest::new(cfg.digest(), cfg.seed.0);
    for name in [MODEL_FILE, REFSET_FILE, TEST_FILE] {
        manifest.record_output(dir, name)?;
    }

    let mut failures: Vec<(String, String)> = Vec::new();
    let mut succeeded_units = 0usize;

    let base = analytics::evaluate(&m.bank, &m.router, &m.set, &m.test, &base_spec(), false)?;
    let base_summary = build_summary(BASE_NAME, &base, false)?;
    let base_file = summary_file(BASE_NAME);
    records::write_json(&dir.join(&base_file), &base_summary)?;
    manifest.record_output(dir, &base_file)?;
    written.push(base_file);

    for spec in &cfg.strategies {
        let name = spec.kind.name();
        let outcome = analytics::evaluate(
            &m.bank,
            &m.router,
            &m.set,
            &m.test,
            spec,
            cfg.retain_trajectories,
        )
        .and_then(|result| {
            let summary = build_summary(name, &result, cfg.per_step_transitions)?;
            let file = summary_file(name);
            records::write_json(&dir.join(&file), &summary)?;
            manifest.record_output(dir, &file)?;
            written.push(file);
            if let Some(trajectories) = &result.trajectories {
                let file = trajectories_file(spec.kind);
                records::write_trajectories(&dir.join(&file), trajectories, m.set.expert_count())?;
                manifest.record_output(dir, &file)?;
                written.push(file);
            }
            Ok(())
        });
        match outcome {
            Ok(()) => succeeded_units += 1,
            Err(e) => {
                let note = format!("strategy {name} failed: {e}");
                eprintln!("{note}");
                manifest.notes.push(note);
                failures.push((name.to_string(), e.to_string()));
            }
        }
    }

    for sweep in &cfg.sweeps {
        let unit = format!("sweep {} {}", sweep.strategy, sweep.axis);
        let spec = cfg
            .strategies
            .iter()
            .find(|s| s.kind == sweep.strategy)
            .cloned()
            .unwrap_or_else(|| StrategySpec::defaults(sweep.strategy));
        let outcome = analytics::sweep(&spec, &sweep.values, &m.bank, &m.router, &m.set, &m.test)
            .and_then(|rows| {
                let doc = SweepSummary::build(sweep.strategy.name(), &sweep.axis, &rows);
                let file = sweep_file(sweep.strategy, &sweep.axis);
                records::write_json(&dir.join(&file), &doc)?;
                manifest.record_output(dir, &file)?;
                written.push(file);
                Ok(())
            });
        match outcome {
            Ok(()) => succeeded_units += 1,
            Err(e) => {
                let note = format!("{unit} failed: {e}");
                eprintln!("{note}");
                manifest.notes.push(note);
                failures.push((unit, e.to_string()));
            }
        }
    }

    manifest.write(dir)?;
    written.push(crate::manifest::MANIFEST_FILE.into());
    Ok(RunReport {
        written,
        failures,
        succeeded_units,
    })
}

/// Verifies the manifest in `dir` and renders every strategy summary it
/// lists as one table, ordered by accuracy (descending; ties by name).
pub fn cmd_report(dir: &Path) -> Result<String> {
    let manifest = RunManifest::read(dir)?;
    manifest.verify(dir)?;
    let mut summaries: Vec<StrategySummary> = Vec::new();
    for record in &manifest.outputs {
        if record.name.starts_with("summary_") && record.name.ends_with(".json") {
            summaries.push(records::read_json(&dir.join(&record.name))?);
        }
    }
    if summaries.is_empty() {
        return Err(Error::invalid(format!(
            "no strategy summaries listed in the manifest at {}",
            dir.display()
        )));
    }
    summaries.sort_by(|a, b| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then_with(|| a.strategy.cmp(&b.strategy))
    });
    Ok(render_table(&summaries))
}

fn render_table(rows: &[StrategySummary]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>9} {:>9} {:>6} {:>6} {:>12} {:>12}",
        "strategy", "accuracy", "base_acc", "i->c", "c->i", "fwd/sample", "grad/sample"
    )
    .expect("write to string");
    for s in rows {
        writeln!(
            out,
            "{:<20} {:>9.4} {:>9.4} {:>6} {:>6} {:>12.2} {:>12.2}",
            s.strategy,
            s.accuracy,
            s.base_accuracy,
            s.transitions.incorrect_to_correct,
            s.transitions.correct_to_incorrect,
            s.cost.mean_forward_evals,
            s.cost.mean_grad_evals
        )
        .expect("write to string");
    }
    out
}
