//! Serialization for benchmark artifacts.
//!
//! Numeric tables (model, reference set, sample splits, trajectories) use
//! line-delimited decimal text: every float is printed with 17 significant
//! digits, which round-trips `f64` bit-faithfully. Analytics summaries use
//! JSON. All writes are atomic (write to a temp file, then rename).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::SplitWhitespace;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    CostRow, EvalResult, ExpertShiftMatrix, SweepRow, TransitionCounts, TransitionTable,
};
use crate::error::{Error, Result};
use crate::moe::{Expert, ExpertBank, Router};
use crate::refset::{ReferenceEntry, ReferenceSet};
use crate::rerouting::{Trajectory, TrajectoryStep};
use crate::synth::Sample;
use crate::types::{Label, ModelInput, RoutingWeights, TaskEmbedding};

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write as _;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn push_f64(line: &mut String, v: f64) {
    write!(line, " {v:.16e}").expect("write to string");
}

struct Reader<'a> {
    path: &'a Path,
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Reader {
            path,
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_row(&mut self) -> Result<Row<'a>> {
        self.line_no += 1;
        match self.lines.next() {
            Some(text) => Ok(Row {
                path: self.path,
                line_no: self.line_no,
                tokens: text.split_whitespace(),
            }),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn expect_eof(&mut self) -> Result<()> {
        self.line_no += 1;
        match self.lines.next() {
            None => Ok(()),
            Some(_) => Err(self.err("trailing content after last expected record")),
        }
    }
}

struct Row<'a> {
    path: &'a Path,
    line_no: usize,
    tokens: SplitWhitespace<'a>,
}

impl<'a> Row<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn next_token(&mut self, what: &str) -> Result<&'a str> {
        self.tokens
            .next()
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn expect_tag(&mut self, tag: &str) -> Result<()> {
        let got = self.next_token("record tag")?;
        if got == tag {
            Ok(())
        } else {
            Err(self.err(format!("expected record tag '{tag}', got '{got}'")))
        }
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.next_token(what)?;
        tok.parse()
            .map_err(|_| self.err(format!("{what}: '{tok}' is not a non-negative integer")))
    }

    fn next_f64(&mut self, what: &str) -> Result<f64> {
        let tok = self.next_token(what)?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.err(format!("{what}: '{tok}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{what}: '{tok}' is not finite")));
        }
        Ok(v)
    }

    fn next_f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n)
            .map(|i| self.next_f64(&format!("{what}[{i}]")))
            .collect()
    }

    fn finish(mut self) -> Result<()> {
        match self.tokens.next() {
            None => Ok(()),
            Some(tok) => Err(self.err(format!("unexpected trailing token '{tok}'"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

const REFSET_TAG: &str = "refset";
const MODEL_TAG: &str = "moemodel";
const SAMPLES_TAG: &str = "samples";
const TRAJECTORIES_TAG: &str = "trajectories";

/// Writes a reference set. The header pins every dimension, including the
/// class and task-type counts the entries must respect.
pub fn write_reference_set(
    path: &Path,
    set: &ReferenceSet,
    class_count: usize,
    task_type_count: usize,
) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{REFSET_TAG} {} {} {} {class_count} {task_type_count}",
        set.feature_dim(),
        set.embedding_dim(),
        set.expert_count()
    )
    .expect("write to string");
    for (i, e) in set.entries().iter().enumerate() {
        if e.label().0 >= class_count {
            return Err(Error::invalid(format!(
                "entry {i}: label {} out of range for {class_count} classes",
                e.label().0
            )));
        }
        if e.input().task_type >= task_type_count {
            return Err(Error::invalid(format!(
                "entry {i}: task type {} out of range for {task_type_count} types",
                e.input().task_type
            )));
        }
        let mut line = String::new();
        for &v in &e.input().features {
            push_f64(&mut line, v);
        }
        for &v in e.embedding().as_slice() {
            push_f64(&mut line, v);
        }
        for &v in e.routing().as_slice() {
            push_f64(&mut line, v);
        }
        write!(line, " {} {}", e.label().0, e.input().task_type).expect("write to string");
        writeln!(out, "{}", line.trim_start()).expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a reference set and re-verifies every entry against the bank:
/// dimensions, label range, and the stored routing reproducing the stored
/// label.
pub fn read_reference_set(path: &Path, bank: &ExpertBank) -> Result<ReferenceSet> {
    let text = read_text(path)?;
    let mut reader = Reader::new(path, &text);
    let mut header = reader.next_row()?;
    header.expect_tag(REFSET_TAG)?;
    let d = header.next_usize("feature dim")?;
    let de = header.next_usize("embedding dim")?;
    let e = header.next_usize("expert count")?;
    let c = header.next_usize("class count")?;
    let t = header.next_usize("task type count")?;
    header.finish()?;
    if d != bank.feature_dim() || e != bank.expert_count() || c != bank.class_count() {
        return Err(reader.err(format!(
            "header ({d} features, {e} experts, {c} classes) does not match the model \
             ({} features, {} experts, {} classes)",
            bank.feature_dim(),
            bank.expert_count(),
            bank.class_count()
        )));
    }
    let mut entries = Vec::new();
    while let Ok(mut row) = reader.next_row() {
        let features = row.next_f64s(d, "feature")?;
        let embedding = row.next_f64s(de, "embedding")?;
        let routing = row.next_f64s(e, "routing weight")?;
        let label = row.next_usize("label")?;
        let task_type = row.next_usize("task type")?;
        let line_no = row.line_no;
        row.finish()?;
        let line_err = |source: Error| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: source.to_string(),
        };
        if label >= c {
            return Err(reader.err(format!("label {label} out of range for {c} classes")));
        }
        if task_type >= t {
            return Err(reader.err(format!("task type {task_type} out of range for {t} types")));
        }
        let entry = ReferenceEntry::new(
            bank,
            ModelInput::new(features, task_type).map_err(line_err)?,
            TaskEmbedding(embedding),
            RoutingWeights::new(routing).map_err(line_err)?,
            Label(label),
        )
        .map_err(line_err)?;
        entries.push(entry);
    }
    ReferenceSet::seal(entries)
}

/// Writes the expert bank and router: one line per expert (classifier
/// weights row-major, then biases), then one router line (routing weights
/// row-major, then biases).
pub fn write_model(path: &Path, bank: &ExpertBank, router: &Router) -> Result<()> {
    if router.expert_count() != bank.expert_count() || router.feature_dim() != bank.feature_dim() {
        return Err(Error::invalid(
            "router dimensions do not match the expert bank",
        ));
    }
    let mut out = String::new();
    writeln!(
        out,
        "{MODEL_TAG} {} {} {}",
        bank.feature_dim(),
        bank.expert_count(),
        bank.class_count()
    )
    .expect("write to string");
    for expert in bank.experts() {
        let mut line = String::new();
        for &v in expert.weight() {
            push_f64(&mut line, v);
        }
        for &v in expert.bias() {
            push_f64(&mut line, v);
        }
        writeln!(out, "{}", line.trim_start()).expect("write to string");
    }
    let mut line = String::new();
    for &v in router.weight() {
        push_f64(&mut line, v);
    }
    for &v in router.bias() {
        push_f64(&mut line, v);
    }
    writeln!(out, "{}", line.trim_start()).expect("write to string");
    write_atomic(path, out.as_bytes())
}

pub fn read_model(path: &Path) -> Result<(ExpertBank, Router)> {
    let text = read_text(path)?;
    let mut reader = Reader::new(path, &text);
    let mut header = reader.next_row()?;
    header.expect_tag(MODEL_TAG)?;
    let d = header.next_usize("feature dim")?;
    let e = header.next_usize("expert count")?;
    let c = header.next_usize("class count")?;
    header.finish()?;
    let mut experts = Vec::with_capacity(e);
    for i in 0..e {
        let mut row = reader.next_row()?;
        let weight = row.next_f64s(c * d, &format!("expert {i} weight"))?;
        let bias = row.next_f64s(c, &format!("expert {i} bias"))?;
        let line_no = row.line_no;
        row.finish()?;
        let line_err = |source: Error| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: source.to_string(),
        };
        experts.push(Expert::new(weight, bias, d).map_err(line_err)?);
    }
    let mut row = reader.next_row()?;
    let weight = row.next_f64s(e * d, "router weight")?;
    let bias = row.next_f64s(e, "router bias")?;
    let line_no = row.line_no;
    row.finish()?;
    let line_err = |source: Error| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg: source.to_string(),
    };
    reader.expect_eof()?;
    let bank = ExpertBank::new(experts, d).map_err(line_err)?;
    let router = Router::new(weight, bias, d).map_err(line_err)?;
    Ok((bank, router))
}

/// Dimensions recorded in a sample-split header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplesHeader {
    pub feature_dim: usize,
    pub embedding_dim: usize,
    pub class_count: usize,
    pub task_type_count: usize,
}

pub fn write_samples(path: &Path, samples: &[Sample], header: SamplesHeader) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{SAMPLES_TAG} {} {} {} {}",
        header.feature_dim, header.embedding_dim, header.class_count, header.task_type_count
    )
    .expect("write to string");
    for (i, s) in samples.iter().enumerate() {
        if s.input.features.len() != header.feature_dim
            || s.embedding.len() != header.embedding_dim
            || s.label.0 >= header.class_count
            || s.input.task_type >= header.task_type_count
        {
            return Err(Error::invalid(format!(
                "sample {i} does not match the split header"
            )));
        }
        let mut line = String::new();
        for &v in &s.input.features {
            push_f64(&mut line, v);
        }
        for &v in s.embedding.as_slice() {
            push_f64(&mut line, v);
        }
        write!(line, " {} {}", s.label.0, s.input.task_type).expect("write to string");
        writeln!(out, "{}", line.trim_start()).expect("write to string");
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_samples(path: &Path) -> Result<(Vec<Sample>, SamplesHeader)> {
    let text = read_text(path)?;
    let mut reader = Reader::new(path, &text);
    let mut row = reader.next_row()?;
    row.expect_tag(SAMPLES_TAG)?;
    let header = SamplesHeader {
        feature_dim: row.next_usize("feature dim")?,
        embedding_dim: row.next_usize("embedding dim")?,
        class_count: row.next_usize("class count")?,
        task_type_count: row.next_usize("task type count")?,
    };
    row.finish()?;
    let mut samples = Vec::new();
    while let Ok(mut row) = reader.next_row() {
        let features = row.next_f64s(header.feature_dim, "feature")?;
        let embedding = row.next_f64s(header.embedding_dim, "embedding")?;
        let label = row.next_usize("label")?;
        let task_type = row.next_usize("task type")?;
        let line_no = row.line_no;
        row.finish()?;
        let line_err = |source: Error| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: source.to_string(),
        };
        if label >= header.class_count {
            return Err(reader.err(format!(
                "label {label} out of range for {} classes",
                header.class_count
            )));
        }
        if task_type >= header.task_type_count {
            return Err(reader.err(format!(
                "task type {task_type} out of range for {} types",
                header.task_type_count
            )));
        }
        samples.push(Sample {
            input: ModelInput::new(features, task_type).map_err(line_err)?,
            label: Label(label),
            embedding: TaskEmbedding(embedding),
        });
    }
    Ok((samples, header))
}

/// Writes retained trajectories, one `traj` line per sample followed by
/// its `step` lines. Missing losses and predictions are written as `-`.
pub fn write_trajectories(
    path: &Path,
    trajectories: &[Trajectory],
    expert_count: usize,
) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{TRAJECTORIES_TAG} {expert_count} {}",
        trajectories.len()
    )
    .expect("write to string");
    for (i, t) in trajectories.iter().enumerate() {
        writeln!(
            out,
            "traj {i} {} {} {} {}",
            t.steps.len(),
            t.forward_evals,
            t.grad_evals,
            t.empty_neighborhood as u8
        )
        .expect("write to string");
        for step in &t.steps {
            if step.weights.len() != expert_count {
                return Err(Error::invalid(format!(
                    "trajectory {i} has a step of the wrong width"
                )));
            }
            let mut line = String::from("step");
            match step.loss {
                Some(l) => push_f64(&mut line, l),
                None => line.push_str(" -"),
            }
            match step.prediction {
                Some(p) => write!(line, " {}", p.0).expect("write to string"),
                None => line.push_str(" -"),
            }
            for &v in step.weights.as_slice() {
                push_f64(&mut line, v);
            }
            writeln!(out, "{line}").expect("write to string");
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = read_text(path)?;
    let mut reader = Reader::new(path, &text);
    let mut header = reader.next_row()?;
    header.expect_tag(TRAJECTORIES_TAG)?;
    let e = header.next_usize("expert count")?;
    let n = header.next_usize("trajectory count")?;
    header.finish()?;
    let mut trajectories = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = reader.next_row()?;
        row.expect_tag("traj")?;
        let index = row.next_usize("trajectory index")?;
        if index != i {
            return Err(row.err(format!("expected trajectory index {i}, got {index}")));
        }
        let len = row.next_usize("step count")?;
        let forward_evals = row.next_usize("forward eval count")?;
        let grad_evals = row.next_usize("grad eval count")?;
        let empty = match row.next_usize("empty-neighborhood flag")? {
            0 => false,
            1 => true,
            other => {
                return Err(row.err(format!(
                    "empty-neighborhood flag must be 0 or 1, got {other}"
                )))
            }
        };
        row.finish()?;
        if len == 0 {
            return Err(reader.err(format!("trajectory {i} has no steps")));
        }
        let mut steps = Vec::with_capacity(len);
        for _ in 0..len {
            let mut row = reader.next_row()?;
            row.expect_tag("step")?;
            let loss = match row.next_token("loss")? {
                "-" => None,
                tok => {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| row.err(format!("loss: '{tok}' is not a number")))?;
                    if !v.is_finite() {
                        return Err(row.err(format!("loss: '{tok}' is not finite")));
                    }
                    Some(v)
                }
            };
            let prediction = match row.next_token("prediction")? {
                "-" => None,
                tok => Some(Label(tok.parse().map_err(|_| {
                    row.err(format!("prediction: '{tok}' is not a non-negative integer"))
                })?)),
            };
            let weights = row.next_f64s(e, "routing weight")?;
            let line_no = row.line_no;
            row.finish()?;
            let line_err = |source: Error| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: source.to_string(),
            };
            steps.push(TrajectoryStep {
                weights: RoutingWeights::new(weights).map_err(line_err)?,
                loss,
                prediction,
            });
        }
        trajectories.push(Trajectory {
            steps,
            forward_evals,
            grad_evals,
            empty_neighborhood: empty,
        });
    }
    reader.expect_eof()?;
    Ok(trajectories)
}

/// Per-strategy summary document exported by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySummary {
    pub strategy: String,
    pub accuracy: f64,
    pub base_accuracy: f64,
    pub per_type_accuracy: BTreeMap<String, f64>,
    pub transitions: TransitionsDoc,
    pub expert_shift: ExpertShiftDoc,
    pub cost: CostDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsDoc {
    pub incorrect_to_correct: usize,
    pub correct_to_incorrect: usize,
    pub correct_to_correct: usize,
    pub incorrect_to_incorrect: usize,
    pub percentages: [f64; 4],
    pub per_step: Option<Vec<[usize; 4]>>,
}

impl TransitionsDoc {
    fn counts_to_cells(c: &TransitionCounts) -> [usize; 4] {
        [
            c.incorrect_to_correct,
            c.correct_to_incorrect,
            c.correct_to_correct,
            c.incorrect_to_incorrect,
        ]
    }

    pub fn from_table(table: &TransitionTable) -> Self {
        TransitionsDoc {
            incorrect_to_correct: table.overall.incorrect_to_correct,
            correct_to_incorrect: table.overall.correct_to_incorrect,
            correct_to_correct: table.overall.correct_to_correct,
            incorrect_to_incorrect: table.overall.incorrect_to_incorrect,
            percentages: table.overall.percentages(),
            per_step: table
                .per_step
                .as_ref()
                .map(|steps| steps.iter().map(Self::counts_to_cells).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertShiftDoc {
    pub expert_count: usize,
    pub to_correct: Vec<Vec<usize>>,
    pub to_incorrect: Vec<Vec<usize>>,
    pub initial_top_entropy: f64,
    pub final_top_entropy: f64,
}

impl ExpertShiftDoc {
    pub fn from_matrix(m: &ExpertShiftMatrix) -> Self {
        let rows = |flat: &[usize]| {
            flat.chunks(m.expert_count)
                .map(|row| row.to_vec())
                .collect::<Vec<_>>()
        };
        ExpertShiftDoc {
            expert_count: m.expert_count,
            to_correct: rows(&m.to_correct),
            to_incorrect: rows(&m.to_incorrect),
            initial_top_entropy: m.initial_top_entropy,
            final_top_entropy: m.final_top_entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostDoc {
    pub mean_forward_evals: f64,
    pub mean_grad_evals: f64,
    pub mean_steps: f64,
}

impl StrategySummary {
    pub fn build(
        strategy: &str,
        result: &EvalResult,
        table: &TransitionTable,
        shift: &ExpertShiftMatrix,
        cost: &CostRow,
    ) -> Self {
        StrategySummary {
            strategy: strategy.to_string(),
            accuracy: result.accuracy,
            base_accuracy: result.base_accuracy,
            per_type_accuracy: result
                .per_type_accuracy
                .iter()
                .map(|(t, acc)| (t.to_string(), *acc))
                .collect(),
            transitions: TransitionsDoc::from_table(table),
            expert_shift: ExpertShiftDoc::from_matrix(shift),
            cost: CostDoc {
                mean_forward_evals: cost.mean_forward_evals,
                mean_grad_evals: cost.mean_grad_evals,
                mean_steps: cost.mean_steps,
            },
        }
    }
}

/// One-axis sweep table exported by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSummary {
    pub strategy: String,
    pub axis: String,
    pub rows: Vec<SweepRowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRowDoc {
    pub value: String,
    pub accuracy: f64,
    pub mean_forward_evals: f64,
    pub mean_grad_evals: f64,
}

impl SweepSummary {
    pub fn build(strategy: &str, axis: &str, rows: &[SweepRow]) -> Self {
        SweepSummary {
            strategy: strategy.to_string(),
            axis: axis.to_string(),
            rows: rows
                .iter()
                .map(|r| SweepRowDoc {
                    value: r.label.clone(),
                    accuracy: r.accuracy,
                    mean_forward_evals: r.mean_forward_evals,
                    mean_grad_evals: r.mean_grad_evals,
                })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(doc)
        .map_err(|e| Error::invalid(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::synth::{self, BenchSpec};
    use tempfile::TempDir;

    fn bits(values: &[f64]) -> Vec<u64> {
        values.iter().map(|v| v.to_bits()).collect()
    }

    fn small_bench() -> (synth::Benchmark, Router, ReferenceSet) {
        let spec = BenchSpec {
            task_type_count: 3,
            reference_per_type: 20,
            test_per_type: 10,
            feature_dim: 6,
            expert_count: 3,
            class_count: 3,
            embedding_noise_sigma: 0.05,
            skew_target: 0,
            skew_strength: 3.0,
            seed: Seed(7),
        };
        let bench = synth::generate(&spec).unwrap();
        let router = bench.train_base_router().unwrap();
        let set = bench.reference_set(&router).unwrap();
        (bench, router, set)
    }

    #[test]
    fn reference_set_round_trips_bitwise() {
        let (bench, _router, set) = small_bench();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("refset.txt");
        write_reference_set(&path, &set, 3, 3).unwrap();
        let back = read_reference_set(&path, &bench.bank).unwrap();
        assert_eq!(back.len(), set.len());
        for (a, b) in set.entries().iter().zip(back.entries()) {
            assert_eq!(bits(&a.input().features), bits(&b.input().features));
            assert_eq!(
                bits(a.embedding().as_slice()),
                bits(b.embedding().as_slice())
            );
            assert_eq!(bits(a.routing().as_slice()), bits(b.routing().as_slice()));
            assert_eq!(a.label(), b.label());
            assert_eq!(a.input().task_type, b.input().task_type);
        }
    }

    #[test]
    fn model_round_trips_bitwise() {
        let (bench, router, _set) = small_bench();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.txt");
        write_model(&path, &bench.bank, &router).unwrap();
        let (bank2, router2) = read_model(&path).unwrap();
        assert_eq!(bank2, bench.bank);
        assert_eq!(router2, router);
    }

    #[test]
    fn samples_round_trip_bitwise() {
        let (bench, _router, _set) = small_bench();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("test.txt");
        let header = SamplesHeader {
            feature_dim: 6,
            embedding_dim: 3,
            class_count: 3,
            task_type_count: 3,
        };
        write_samples(&path, &bench.test_pool, header).unwrap();
        let (back, header2) = read_samples(&path).unwrap();
        assert_eq!(header2, header);
        assert_eq!(back, bench.test_pool);
    }

    #[test]
    fn trajectories_round_trip_bitwise() {
        use crate::rerouting::{self, StrategyKind, StrategySpec};
        let (bench, router, set) = small_bench();
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let mut trajectories = Vec::new();
        for sample in bench.test_pool.iter().take(5) {
            let r0 = router.route(&sample.input).unwrap();
            trajectories.push(
                rerouting::apply(
                    &spec,
                    &bench.bank,
                    &set,
                    &r0,
                    &sample.input,
                    &sample.embedding,
                    None,
                )
                .unwrap(),
            );
        }
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("traj.txt");
        write_trajectories(&path, &trajectories, 3).unwrap();
        let back = read_trajectories(&path).unwrap();
        assert_eq!(back, trajectories);
    }

    #[test]
    fn seventeen_digit_text_preserves_awkward_values() {
        let values = [
            0.1,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            -f64::MIN_POSITIVE / 4.0,
            1e300,
            -0.0,
            5e-324,
        ];
        for &v in &values {
            let text = format!("{v:.16e}");
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn reference_set_read_rejects_tampered_label() {
        let (bench, _router, set) = small_bench();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("refset.txt");
        write_reference_set(&path, &set, 3, 3).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[1].split_whitespace().map(String::from).collect();
        let label_pos = fields.len() - 2;
        let old: usize = fields[label_pos].parse().unwrap();
        fields[label_pos] = ((old + 1) % 3).to_string();
        lines[1] = fields.join(" ");
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = read_reference_set(&path, &bench.bank).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_model_file_reports_the_line() {
        let (bench, router, _set) = small_bench();
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.txt");
        write_model(&path, &bench.bank, &router).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        std::fs::write(&path, lines[..2].join("\n")).unwrap();
        let err = read_model(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_float_names_path_and_line() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("model.txt");
        std::fs::write(&path, "moemodel 1 1 1\n5.0e-1 not_a_number\n0.0 0.0\n").unwrap();
        let err = read_model(&path).unwrap_err();
        match &err {
            Error::Parse { path: p, line, msg } => {
                assert!(p.ends_with("model.txt"), "{p:?}");
                assert_eq!(*line, 2);
                assert!(msg.contains("not_a_number"), "{msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn strategy_summary_round_trips_as_json() {
        use crate::analytics::{self, SweepRow};
        use crate::rerouting::{StrategyKind, StrategySpec};
        let (bench, router, set) = small_bench();
        let spec = StrategySpec::defaults(StrategyKind::Ngd);
        let result =
            analytics::evaluate(&bench.bank, &router, &set, &bench.test_pool, &spec, true).unwrap();
        let table = analytics::transitions(&result, true).unwrap();
        let shift = analytics::expert_shift(&result).unwrap();
        let cost = analytics::cost_summary(&[("ngd", &result)]);
        let doc = StrategySummary::build("ngd", &result, &table, &shift, &cost.rows[0]);
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("summary_ngd.json");
        write_json(&path, &doc).unwrap();
        let back: StrategySummary = read_json(&path).unwrap();
        assert_eq!(back, doc);
        assert!(back.transitions.per_step.is_some());

        let sweep_doc = SweepSummary::build(
            "ngd",
            "steps",
            &[SweepRow {
                label: "steps=5".into(),
                accuracy: 0.5,
                mean_forward_evals: 0.0,
                mean_grad_evals: 25.0,
            }],
        );
        let sweep_path = dir.path().join("sweep_steps.json");
        write_json(&sweep_path, &sweep_doc).unwrap();
        let sweep_back: SweepSummary = read_json(&sweep_path).unwrap();
        assert_eq!(sweep_back, sweep_doc);
    }

    #[test]
    fn unknown_json_field_is_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cost.json");
        std::fs::write(
            &path,
            "{\"mean_forward_evals\": 1.0, \"mean_grad_evals\": 2.0, \"mean_steps\": 3.0, \"extra\": 4}",
        )
        .unwrap();
        let err = read_json::<CostDoc>(&path).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name() != "out.txt")
            .collect();
        assert!(
            leftovers.is_empty(),
            "temp files left behind: {leftovers:?}"
        );
    }
}
