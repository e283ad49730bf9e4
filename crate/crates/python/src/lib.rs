//! Python bindings. Matrices cross the boundary as lists of rows.

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use transda_core::datamodel::{self, SynthConfig};
use transda_core::features::ArchKind;
use transda_core::graph::KnnGraph;
use transda_core::metric::{self, MetricMatrix};
use transda_core::trainer::{self, EvalMode};
use transda_core::transduction::{self, EnergyModel, PairwiseTerm};
use transda_core::{Error, SourceDataset, TargetDataset};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("row {bad} has {} columns, expected {d}", rows[bad].len())));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn source(points: Vec<Vec<f64>>, labels: Vec<usize>, class_count: Option<usize>) -> PyResult<SourceDataset> {
    let k = class_count.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    SourceDataset::new(matrix(points)?, labels, k).map_err(to_py)
}

fn eval_mode(mode: &str) -> PyResult<EvalMode> {
    match mode {
        "nn" => Ok(EvalMode::Nn),
        "propagated" => Ok(EvalMode::Propagated),
        _ => Err(PyValueError::new_err(format!("unknown mode {mode:?}; use 'nn' or 'propagated'"))),
    }
}

/// Training hyperparameters; keyword arguments override the defaults.
#[pyclass(name = "TrainConfig", from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: trainer::TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = trainer::TrainConfig::default();
        if let Some(kw) = kwargs {
            for (key, value) in kw.iter() {
                let key: String = key.extract()?;
                match key.as_str() {
                    "batch_size" => cfg.batch_size = value.extract()?,
                    "margin" => cfg.margin = value.extract()?,
                    "lambda_" | "lambda" => cfg.lambda = value.extract()?,
                    "knn_k" => cfg.knn_k = value.extract()?,
                    "learning_rate" | "lr" => cfg.learning_rate = value.extract()?,
                    "max_iters" | "iters" => cfg.max_iters = value.extract()?,
                    "seed" => cfg.seed = value.extract()?,
                    "arch" => {
                        let tag: String = value.extract()?;
                        cfg.arch = tag.parse::<ArchKind>().map_err(to_py)?;
                    }
                    "d_out" => cfg.d_out = value.extract()?,
                    "d_hidden" => cfg.d_hidden = value.extract()?,
                    "lambda_w" => cfg.lambda_w = value.extract()?,
                    "label_propagation" => cfg.label_propagation = value.extract()?,
                    "feature_learning" => cfg.feature_learning = value.extract()?,
                    "adagrad_epsilon" => cfg.adagrad_epsilon = value.extract()?,
                    other => return Err(PyValueError::new_err(format!("unknown option {other:?}"))),
                }
            }
        }
        cfg.validate().map_err(to_py)?;
        Ok(Self { inner: cfg })
    }

    /// Resolved settings as a dict of strings.
    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.describe() {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    #[getter]
    fn max_iters(&self) -> usize {
        self.inner.max_iters
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn arch(&self) -> String {
        self.inner.arch.to_string()
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self.inner.describe().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("TrainConfig({})", parts.join(", "))
    }
}

/// Trained model state: features, metric, optimizer accumulators.
#[pyclass(name = "Checkpoint")]
struct PyCheckpoint {
    inner: datamodel::Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    fn save(&self, path: &str) -> PyResult<()> {
        datamodel::save_checkpoint(&self.inner, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: datamodel::load_checkpoint(path).map_err(to_py)?,
        })
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.inner.to_bytes().map_err(to_py)?))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: datamodel::Checkpoint::from_bytes(data).map_err(to_py)?,
        })
    }

    #[getter]
    fn iteration(&self) -> u64 {
        self.inner.iteration
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn metric(&self) -> Vec<Vec<f64>> {
        rows(self.inner.metric.as_array())
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.features.params().to_vec()
    }

    /// Architecture and dimensions, as printed by `transda inspect`.
    fn metadata<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let arch = self.inner.features.arch();
        let d = PyDict::new(py);
        d.set_item("arch", arch.kind().to_string())?;
        d.set_item("d_in", arch.d_in())?;
        d.set_item("d_hidden", arch.d_hidden())?;
        d.set_item("d_out", arch.d_out())?;
        d.set_item("params", arch.param_count())?;
        d.set_item("iteration", self.inner.iteration)?;
        d.set_item("seed", self.inner.seed())?;
        Ok(d)
    }

    /// Feature map applied to each row.
    fn features(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let f = self.inner.features.forward_batch(&matrix(points)?).map_err(to_py)?;
        Ok(rows(&f))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Rotated-blobs benchmark. Returns
/// `(source_points, source_labels, target_points, target_labels)`.
#[pyfunction]
#[pyo3(signature = (classes=3, per_class=200, rotate=30.0, shift=(0.0, 0.0), noise=1.0, seed=7))]
#[allow(clippy::type_complexity)]
fn synth_blobs(
    classes: usize,
    per_class: usize,
    rotate: f64,
    shift: (f64, f64),
    noise: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>, Vec<usize>)> {
    let (s, t) = datamodel::synth_blobs(&SynthConfig {
        class_count: classes,
        per_class,
        rotation_deg: rotate,
        shift: [shift.0, shift.1],
        noise_sd: noise,
        seed,
    })
    .map_err(to_py)?;
    let truth = t.evaluation_labels().unwrap_or_default().to_vec();
    Ok((rows(s.points()), s.labels().to_vec(), rows(t.points()), truth))
}

/// Trains on labeled source and unlabeled target points. Target labels,
/// when given, only feed the final accuracy in the report.
#[pyfunction]
#[pyo3(signature = (source_points, source_labels, target_points, config=None, target_labels=None, class_count=None))]
fn train<'py>(
    py: Python<'py>,
    source_points: Vec<Vec<f64>>,
    source_labels: Vec<usize>,
    target_points: Vec<Vec<f64>>,
    config: Option<PyTrainConfig>,
    target_labels: Option<Vec<usize>>,
    class_count: Option<usize>,
) -> PyResult<(PyCheckpoint, Bound<'py, PyDict>)> {
    let s = source(source_points, source_labels, class_count)?;
    let tp = matrix(target_points)?;
    let t = match target_labels {
        Some(l) => TargetDataset::with_ground_truth(tp, l, s.class_count()),
        None => TargetDataset::new(tp),
    }
    .map_err(to_py)?;
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let (ckpt, report) = py.detach(|| trainer::train(&s, &t, &cfg)).map_err(to_py)?;

    let d = PyDict::new(py);
    let recs = &report.records;
    d.set_item("loss", recs.iter().map(|r| r.loss).collect::<Vec<_>>())?;
    d.set_item("energy", recs.iter().map(|r| r.energy).collect::<Vec<_>>())?;
    d.set_item("nn_energy", recs.iter().map(|r| r.nn_energy).collect::<Vec<_>>())?;
    d.set_item("active_triplets", recs.iter().map(|r| r.active_triplets).collect::<Vec<_>>())?;
    d.set_item("skipped_sources", recs.iter().map(|r| r.skipped_sources).collect::<Vec<_>>())?;
    d.set_item("warnings", report.warnings)?;
    d.set_item("converged_at", report.converged_at)?;
    d.set_item("final_accuracy", report.final_accuracy)?;
    Ok((PyCheckpoint { inner: ckpt }, d))
}

/// Labels target points with the full source set. Returns `(labels, energy)`.
#[pyfunction]
#[pyo3(signature = (ckpt, source_points, source_labels, target_points, mode="propagated", class_count=None))]
fn label(
    ckpt: &PyCheckpoint,
    source_points: Vec<Vec<f64>>,
    source_labels: Vec<usize>,
    target_points: Vec<Vec<f64>>,
    mode: &str,
    class_count: Option<usize>,
) -> PyResult<(Vec<usize>, f64)> {
    let s = source(source_points, source_labels, class_count)?;
    let a = trainer::label_targets(&ckpt.inner, &s, &matrix(target_points)?, eval_mode(mode)?).map_err(to_py)?;
    Ok((a.labels, a.energy))
}

#[pyfunction]
#[pyo3(signature = (ckpt, source_points, source_labels, target_points, target_labels, mode="propagated", class_count=None))]
fn evaluate(
    ckpt: &PyCheckpoint,
    source_points: Vec<Vec<f64>>,
    source_labels: Vec<usize>,
    target_points: Vec<Vec<f64>>,
    target_labels: Vec<usize>,
    mode: &str,
    class_count: Option<usize>,
) -> PyResult<f64> {
    let s = source(source_points, source_labels, class_count)?;
    let t = TargetDataset::with_ground_truth(matrix(target_points)?, target_labels, s.class_count()).map_err(to_py)?;
    trainer::evaluate(&ckpt.inner, &s, &t, eval_mode(mode)?).map_err(to_py)
}

/// `aᵀ W b`.
#[pyfunction]
fn similarity(w: Vec<Vec<f64>>, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    MetricMatrix::from_rows(&w).and_then(|w| w.similarity(&a, &b)).map_err(to_py)
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(metric::cosine(&a, &b))
}

/// Undirected cosine k-NN edges `(a, b, weight)` with `a < b`.
#[pyfunction]
fn knn_graph(points: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<(usize, usize, f64)>> {
    let g = KnnGraph::build(&matrix(points)?, k).map_err(to_py)?;
    Ok(g.edges().iter().map(|e| (e.a, e.b, e.weight)).collect())
}

/// Minimizes a Potts energy from `init` by alpha-beta swap moves.
/// `pairwise` holds `(a, b, coefficient)` triples. Returns `(labels, energy)`.
#[pyfunction]
fn alpha_beta_swap(
    unary: Vec<Vec<f64>>,
    pairwise: Vec<(usize, usize, f64)>,
    init: Vec<usize>,
) -> PyResult<(Vec<usize>, f64)> {
    let u = matrix(unary)?;
    let k = u.ncols();
    let terms = pairwise
        .into_iter()
        .map(|(a, b, coefficient)| PairwiseTerm { a, b, coefficient })
        .collect();
    let model = EnergyModel::new(u, vec![true; k], terms).map_err(to_py)?;
    let start = model.assign(init).map_err(to_py)?;
    let out = transduction::alpha_beta_swap(&model, &start).map_err(to_py)?;
    Ok((out.labels, out.energy))
}

#[pymodule]
fn pytransda(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(synth_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(label, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(knn_graph, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_beta_swap, m)?)?;
    Ok(())
}
