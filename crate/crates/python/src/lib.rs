//! Python bindings: build a synthetic benchmark in-process and drive the
//! re-routing strategies against it without going through the CLI or its
//! file formats.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rert::analytics;
use rert::kernels::BandwidthPolicy;
use rert::moe::{ExpertBank, Router};
use rert::refset::{NeighborhoodSpec, ReferenceSet};
use rert::rerouting::{self, StrategyKind, StrategySpec};
use rert::rng::Seed;
use rert::synth::{self, BenchSpec, Sample};

fn to_py(e: rert::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Keyword arguments accepted wherever a strategy can be configured.
/// Unset fields keep the strategy's defaults.
#[allow(clippy::too_many_arguments)]
fn build_spec(
    kind: &str,
    steps: Option<usize>,
    k: Option<usize>,
    epsilon: Option<f64>,
    kernel: Option<&str>,
    bandwidth: Option<f64>,
    schedule: Option<&str>,
    linesearch_iters: Option<usize>,
    alpha: Option<f64>,
    max_steps: Option<usize>,
    tol: Option<f64>,
) -> PyResult<StrategySpec> {
    let kind: StrategyKind = kind.parse().map_err(to_py)?;
    let mut spec = StrategySpec::defaults(kind);
    if k.is_some() && epsilon.is_some() {
        return Err(PyValueError::new_err(
            "pass either k (nearest neighbors) or epsilon (ball radius), not both",
        ));
    }
    if let Some(n) = steps {
        spec.step_count = n;
    }
    if let Some(k) = k {
        spec.neighborhood = NeighborhoodSpec::knn(k, spec.neighborhood.space);
    }
    if let Some(eps) = epsilon {
        spec.neighborhood = NeighborhoodSpec::epsilon_ball(eps, spec.neighborhood.space);
    }
    if let Some(s) = kernel {
        spec.kernel.family = s.parse().map_err(to_py)?;
    }
    if let Some(h) = bandwidth {
        spec.kernel.bandwidth = BandwidthPolicy::Fixed(h);
    }
    if let Some(s) = schedule {
        spec.schedule = s.parse().map_err(to_py)?;
    }
    if let Some(n) = linesearch_iters {
        spec.linesearch_iters = n;
    }
    if let Some(a) = alpha {
        spec.mode_alpha = a;
    }
    if let Some(n) = max_steps {
        spec.mode_max_steps = n;
    }
    if let Some(t) = tol {
        spec.mode_tol = t;
    }
    spec.validate().map_err(to_py)?;
    Ok(spec)
}

fn identity_spec() -> StrategySpec {
    let mut spec = StrategySpec::defaults(StrategyKind::Ngd);
    spec.step_count = 0;
    spec
}

/// One generated benchmark: frozen expert bank, trained (skewed) router,
/// correctness-filtered reference set, and the test split.
#[pyclass]
struct Experiment {
    bank: ExpertBank,
    router: Router,
    set: ReferenceSet,
    test: Vec<Sample>,
}

#[pymethods]
impl Experiment {
    #[new]
    #[pyo3(signature = (seed=42, *, task_type_count=None, reference_per_type=None,
        test_per_type=None, feature_dim=None, expert_count=None, class_count=None,
        embedding_noise_sigma=None, skew_target=None, skew_strength=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        seed: u64,
        task_type_count: Option<usize>,
        reference_per_type: Option<usize>,
        test_per_type: Option<usize>,
        feature_dim: Option<usize>,
        expert_count: Option<usize>,
        class_count: Option<usize>,
        embedding_noise_sigma: Option<f64>,
        skew_target: Option<usize>,
        skew_strength: Option<f64>,
    ) -> PyResult<Self> {
        let mut spec = BenchSpec::default_with_seed(Seed(seed));
        if let Some(v) = task_type_count {
            spec.task_type_count = v;
        }
        if let Some(v) = reference_per_type {
            spec.reference_per_type = v;
        }
        if let Some(v) = test_per_type {
            spec.test_per_type = v;
        }
        if let Some(v) = feature_dim {
            spec.feature_dim = v;
        }
        if let Some(v) = expert_count {
            spec.expert_count = v;
        }
        if let Some(v) = class_count {
            spec.class_count = v;
        }
        if let Some(v) = embedding_noise_sigma {
            spec.embedding_noise_sigma = v;
        }
        if let Some(v) = skew_target {
            spec.skew_target = v;
        }
        if let Some(v) = skew_strength {
            spec.skew_strength = v;
        }
        let bench = synth::generate(&spec).map_err(to_py)?;
        let router = bench.train_base_router().map_err(to_py)?;
        let set = bench.reference_set(&router).map_err(to_py)?;
        Ok(Experiment {
            bank: bench.bank,
            router,
            set,
            test: bench.test_pool,
        })
    }

    #[getter]
    fn expert_count(&self) -> usize {
        self.bank.expert_count()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.bank.class_count()
    }

    #[getter]
    fn test_count(&self) -> usize {
        self.test.len()
    }

    #[getter]
    fn reference_count(&self) -> usize {
        self.set.len()
    }

    /// Test accuracy of the router as-is, with no re-routing.
    fn base_accuracy(&self) -> PyResult<f64> {
        let result = analytics::evaluate(
            &self.bank,
            &self.router,
            &self.set,
            &self.test,
            &identity_spec(),
            false,
        )
        .map_err(to_py)?;
        Ok(result.accuracy)
    }

    /// Router output for one test sample, before any re-routing.
    fn routing(&self, index: usize) -> PyResult<Vec<f64>> {
        let sample = self.sample(index)?;
        Ok(self.router.route(&sample.input).map_err(to_py)?.into_vec())
    }

    /// Runs one strategy over the whole test split and returns its scores:
    /// accuracy, base accuracy, fix/break transition counts, mean model
    /// evaluations per sample, and per-task-type accuracy.
    #[pyo3(signature = (kind, *, steps=None, k=None, epsilon=None, kernel=None,
        bandwidth=None, schedule=None, linesearch_iters=None, alpha=None,
        max_steps=None, tol=None))]
    #[allow(clippy::too_many_arguments)]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        kind: &str,
        steps: Option<usize>,
        k: Option<usize>,
        epsilon: Option<f64>,
        kernel: Option<&str>,
        bandwidth: Option<f64>,
        schedule: Option<&str>,
        linesearch_iters: Option<usize>,
        alpha: Option<f64>,
        max_steps: Option<usize>,
        tol: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let spec = build_spec(
            kind,
            steps,
            k,
            epsilon,
            kernel,
            bandwidth,
            schedule,
            linesearch_iters,
            alpha,
            max_steps,
            tol,
        )?;
        let result = analytics::evaluate(
            &self.bank,
            &self.router,
            &self.set,
            &self.test,
            &spec,
            false,
        )
        .map_err(to_py)?;
        let n = result.outcomes.len() as f64;
        let fixed = result
            .outcomes
            .iter()
            .filter(|o| !o.base_correct && o.final_correct)
            .count();
        let broken = result
            .outcomes
            .iter()
            .filter(|o| o.base_correct && !o.final_correct)
            .count();
        let forward: usize = result.outcomes.iter().map(|o| o.forward_evals).sum();
        let grad: usize = result.outcomes.iter().map(|o| o.grad_evals).sum();
        let d = PyDict::new(py);
        d.set_item("strategy", spec.kind.name())?;
        d.set_item("accuracy", result.accuracy)?;
        d.set_item("base_accuracy", result.base_accuracy)?;
        d.set_item("incorrect_to_correct", fixed)?;
        d.set_item("correct_to_incorrect", broken)?;
        d.set_item("mean_forward_evals", forward as f64 / n)?;
        d.set_item("mean_grad_evals", grad as f64 / n)?;
        d.set_item("per_type_accuracy", result.per_type_accuracy)?;
        Ok(d)
    }

    /// Re-routes one test sample and returns the endpoints of its
    /// trajectory along with predictions and evaluation counts.
    #[pyo3(signature = (kind, index, *, steps=None, k=None, epsilon=None, kernel=None,
        bandwidth=None, schedule=None, linesearch_iters=None, alpha=None,
        max_steps=None, tol=None))]
    #[allow(clippy::too_many_arguments)]
    fn reroute<'py>(
        &self,
        py: Python<'py>,
        kind: &str,
        index: usize,
        steps: Option<usize>,
        k: Option<usize>,
        epsilon: Option<f64>,
        kernel: Option<&str>,
        bandwidth: Option<f64>,
        schedule: Option<&str>,
        linesearch_iters: Option<usize>,
        alpha: Option<f64>,
        max_steps: Option<usize>,
        tol: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let spec = build_spec(
            kind,
            steps,
            k,
            epsilon,
            kernel,
            bandwidth,
            schedule,
            linesearch_iters,
            alpha,
            max_steps,
            tol,
        )?;
        let sample = self.sample(index)?;
        let r0 = self.router.route(&sample.input).map_err(to_py)?;
        let trajectory = rerouting::apply(
            &spec,
            &self.bank,
            &self.set,
            &r0,
            &sample.input,
            &sample.embedding,
            Some(sample.label),
        )
        .map_err(to_py)?;
        let first = trajectory.steps.first().expect("trajectory is never empty");
        let last = trajectory.steps.last().expect("trajectory is never empty");
        let d = PyDict::new(py);
        d.set_item("strategy", spec.kind.name())?;
        d.set_item("initial", first.weights.as_slice().to_vec())?;
        d.set_item("final", last.weights.as_slice().to_vec())?;
        d.set_item("base_prediction", first.prediction.map(|l| l.0))?;
        d.set_item("prediction", last.prediction.map(|l| l.0))?;
        d.set_item("label", sample.label.0)?;
        d.set_item("task_type", sample.input.task_type)?;
        d.set_item("steps", trajectory.steps.len() - 1)?;
        d.set_item("forward_evals", trajectory.forward_evals)?;
        d.set_item("grad_evals", trajectory.grad_evals)?;
        d.set_item("empty_neighborhood", trajectory.empty_neighborhood)?;
        Ok(d)
    }
}

impl Experiment {
    fn sample(&self, index: usize) -> PyResult<&Sample> {
        self.test.get(index).ok_or_else(|| {
            PyValueError::new_err(format!(
                "test index {index} out of range for {} samples",
                self.test.len()
            ))
        })
    }
}

/// Names accepted by `Experiment.evaluate` and `Experiment.reroute`.
#[pyfunction]
fn strategies() -> Vec<&'static str> {
    StrategyKind::ALL.iter().map(|k| k.name()).collect()
}

#[pymodule]
fn rert_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(strategies, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
