//! Python bindings: datasets, caches, filters, the sampler, training,
//! scoring, metrics and the CSBM laboratory.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::Value;

use sagad::cheb::{build_cheb_basis_with, read_cache, write_cache, ChebBasisCache};
use sagad::config::{parse_config, RunConfig};
use sagad::csbm::{generate_gad_dataset, separability_experiment, CsbmParams, ExperimentOptions};
use sagad::dataset::{load_dataset, write_dataset, GraphDataset, Label, SplitSet};
use sagad::eval;
use sagad::graph::SparseAdjacency;
use sagad::homophily::homophily_report;
use sagad::model::checkpoint::{read_checkpoint, write_checkpoint};
use sagad::model::{filter, ModelInputs, ModelState};
use sagad::rq::{self, build_context_cache, build_khop_context, read_context_cache, write_context_cache};
use sagad::train::{score_all, train as train_model};
use sagad::Error;

type SplitTriple = (Vec<usize>, Vec<usize>, Vec<usize>);
type History = Vec<(usize, f64, f64)>;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::MissingFile(_) | Error::MissingPrerequisite { .. } => PyFileNotFoundError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Resolves a run configuration from a JSON object of overrides.
fn resolve(config: Option<&str>) -> PyResult<RunConfig> {
    let overrides = match config {
        None => Vec::new(),
        Some(text) => match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(map)) => map.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
            Ok(_) => return Err(PyValueError::new_err("config must be a JSON object")),
            Err(e) => return Err(PyValueError::new_err(format!("config is not valid JSON: {e}"))),
        },
    };
    parse_config(None, &overrides).map_err(to_py)
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn rows<T: Copy>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

fn label_code(l: Label) -> i8 {
    match l {
        Label::Anomaly => 1,
        Label::Normal => 0,
        Label::Unknown => -1,
    }
}

#[pyclass(name = "Dataset", module = "sagad_py")]
pub struct PyDataset {
    inner: GraphDataset,
}

#[pymethods]
impl PyDataset {
    /// Builds a dataset from an edge list, feature rows and labels
    /// (1 anomaly, 0 normal, -1 unknown). Splits are `(train, val, test)`.
    #[staticmethod]
    #[pyo3(signature = (num_nodes, edges, features, labels, splits=None, name="dataset"))]
    fn from_edges(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
        labels: Vec<i64>,
        splits: Option<Vec<SplitTriple>>,
        name: &str,
    ) -> PyResult<Self> {
        let d = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("feature rows must share one width"));
        }
        let x = Array2::from_shape_vec((features.len(), d), features.concat())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let labels = labels
            .into_iter()
            .map(|l| match l {
                1 => Ok(Label::Anomaly),
                0 => Ok(Label::Normal),
                -1 => Ok(Label::Unknown),
                other => Err(PyValueError::new_err(format!("label {other} is not 1, 0 or -1"))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        let splits = splits
            .unwrap_or_default()
            .into_iter()
            .map(|(train, val, test)| SplitSet { train, val, test })
            .collect();
        let adj = SparseAdjacency::from_edges(num_nodes, edges).map_err(to_py)?;
        let inner = GraphDataset::new(name, adj, x, labels, splits).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = load_dataset(path).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_dataset(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.adjacency.num_edges()
    }

    fn labels(&self) -> Vec<i8> {
        self.inner.labels.iter().map(|&l| label_code(l)).collect()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.features)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.adjacency.edges().collect()
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        if node >= self.inner.num_nodes() {
            return Err(to_py(Error::NodeOutOfRange {
                id: node,
                num_nodes: self.inner.num_nodes(),
            }));
        }
        Ok(self.inner.adjacency.neighbors(node).to_vec())
    }

    fn splits(&self) -> Vec<SplitTriple> {
        self.inner
            .splits
            .iter()
            .map(|s| (s.train.clone(), s.val.clone(), s.test.clone()))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, nodes={}, edges={}, features={}, splits={})",
            self.inner.name,
            self.inner.num_nodes(),
            self.inner.adjacency.num_edges(),
            self.inner.num_features(),
            self.inner.splits.len()
        )
    }
}

#[pyclass(name = "ChebCache", module = "sagad_py")]
pub struct PyChebCache {
    inner: ChebBasisCache,
}

#[pymethods]
impl PyChebCache {
    /// Chebyshev basis blocks `T_k(L̂)X` for `k = 0..=order`.
    #[staticmethod]
    #[pyo3(signature = (dataset, order, self_loops=false))]
    fn build(py: Python<'_>, dataset: &PyDataset, order: usize, self_loops: bool) -> PyResult<Self> {
        let inner = py
            .detach(|| build_cheb_basis_with(&dataset.inner, order, self_loops))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        read_cache(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_cache(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn payload_bytes(&self) -> u64 {
        self.inner.payload_bytes()
    }

    fn block(&self, k: usize) -> PyResult<Vec<Vec<f32>>> {
        if k > self.inner.order() {
            return Err(PyValueError::new_err(format!(
                "block {k} requested, cache holds 0..={}",
                self.inner.order()
            )));
        }
        Ok(rows(&self.inner.block(k).to_owned()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ChebCache(K={}, nodes={}, dim={})",
            self.inner.order(),
            self.inner.num_nodes(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "ContextCache", module = "sagad_py")]
pub struct PyContextCache {
    inner: rq::ContextCache,
}

#[pymethods]
impl PyContextCache {
    /// Context rows for `mode` `"rq"` (Rayleigh-quotient subgraphs) or
    /// `"full_khop"` (closed 1-hop mean).
    #[staticmethod]
    #[pyo3(signature = (dataset, mode="rq", candidate_cap=64, seed=0, search="auto"))]
    fn build(
        py: Python<'_>,
        dataset: &PyDataset,
        mode: &str,
        candidate_cap: usize,
        seed: u64,
        search: &str,
    ) -> PyResult<Self> {
        let config = resolve(Some(
            &serde_json::json!({ "candidate_cap": candidate_cap, "seed": seed, "search": search }).to_string(),
        ))?;
        let sampler = config.sampler_config();
        let inner = match mode {
            "rq" => py
                .detach(|| build_context_cache(&dataset.inner, &sampler))
                .map_err(to_py)?,
            "full_khop" => py.detach(|| build_khop_context(&dataset.inner)),
            other => return Err(PyValueError::new_err(format!("unknown context mode {other:?}"))),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        read_context_cache(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_context_cache(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn context(&self) -> Vec<Vec<f32>> {
        rows(&self.inner.context)
    }

    fn subgraph_size(&self) -> Vec<u32> {
        self.inner.subgraph_size.clone()
    }
}

#[pyclass(name = "Model", module = "sagad_py")]
pub struct PyModel {
    inner: ModelState,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        read_checkpoint(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_checkpoint(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    /// Model configuration as a JSON string.
    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.config).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Chebyshev weights of the low- and high-pass filters.
    fn filter_weights(&self) -> (Vec<f64>, Vec<f64>) {
        self.inner.filter.weights()
    }

    /// Anomaly probability of every node.
    #[pyo3(signature = (basis, context=None, batch_size=8192))]
    fn score(
        &self,
        py: Python<'_>,
        basis: &PyChebCache,
        context: Option<&PyContextCache>,
        batch_size: usize,
    ) -> PyResult<Vec<f64>> {
        let inputs = ModelInputs {
            basis: &basis.inner,
            context: context.map(|c| &c.inner),
        };
        py.detach(|| score_all(&self.inner, &inputs, batch_size)).map_err(to_py)
    }
}

/// Trains on split `split` of `dataset`. `config` is a JSON object of run
/// configuration keys. Returns the best model, the per-epoch history
/// `(epoch, train_loss, val_auprc)` and the best epoch.
#[pyfunction]
#[pyo3(signature = (dataset, basis, context=None, split=0, config=None))]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    basis: &PyChebCache,
    context: Option<&PyContextCache>,
    split: usize,
    config: Option<&str>,
) -> PyResult<(PyModel, History, usize)> {
    let config = resolve(config)?;
    let split_set = dataset
        .inner
        .splits
        .get(split)
        .ok_or_else(|| PyValueError::new_err(format!("dataset has {} splits", dataset.inner.splits.len())))?;
    let inputs = ModelInputs {
        basis: &basis.inner,
        context: context.map(|c| &c.inner),
    };
    let out = py
        .detach(|| {
            train_model(
                &inputs,
                &dataset.inner.labels,
                &config.model_config(),
                &config.train_config(),
                split_set,
            )
        })
        .map_err(to_py)?;
    let history = out
        .history
        .iter()
        .map(|r| (r.epoch, r.train_loss, r.val_auprc))
        .collect();
    Ok((PyModel { inner: out.state }, history, out.best_epoch))
}

#[pyfunction]
fn chebyshev_nodes(k: usize) -> Vec<f64> {
    filter::chebyshev_nodes(k)
}

/// Chebyshev weights interpolating `values` at the ascending nodes.
#[pyfunction]
fn cheb_weights(values: Vec<f64>) -> PyResult<Vec<f64>> {
    if values.len() < 2 {
        return Err(PyValueError::new_err("need at least two filter values"));
    }
    Ok(filter::cheb_weights(&values))
}

#[pyfunction]
fn filter_response(weights: Vec<f64>, t: f64) -> f64 {
    filter::filter_response(&weights, t)
}

/// `(low, high)` filter values from non-negative `gamma`.
#[pyfunction]
fn reparam_filter_values(gamma: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    filter::reparam_filter_values(&gamma)
}

#[pyfunction]
fn rayleigh_quotient(dataset: &PyDataset, nodes: Vec<usize>) -> PyResult<f64> {
    rq::rayleigh_quotient(&dataset.inner, &nodes).map_err(to_py)
}

/// `(nodes, rq)` of the maximum-quotient subset of `node`'s closed
/// neighborhood.
#[pyfunction]
#[pyo3(signature = (dataset, node, candidate_cap=64, seed=0, search="auto"))]
fn max_rq_subgraph(
    dataset: &PyDataset,
    node: usize,
    candidate_cap: usize,
    seed: u64,
    search: &str,
) -> PyResult<(Vec<usize>, f64)> {
    let config = resolve(Some(
        &serde_json::json!({ "candidate_cap": candidate_cap, "seed": seed, "search": search }).to_string(),
    ))?;
    let sub = rq::max_rq_subgraph(&dataset.inner, node, &config.sampler_config()).map_err(to_py)?;
    Ok((sub.nodes, sub.rq))
}

#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::auroc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::average_precision(&scores, &labels).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, k=None))]
fn rec_at_k(scores: Vec<f64>, labels: Vec<bool>, k: Option<usize>) -> PyResult<f64> {
    eval::rec_at_k(&scores, &labels, k).map_err(to_py)
}

#[pyfunction]
fn evaluate<'py>(py: Python<'py>, scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Bound<'py, PyDict>> {
    let r = eval::evaluate(&scores, &labels).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("auroc", r.auroc)?;
    d.set_item("auprc", r.auprc)?;
    d.set_item("rec_at_k", r.rec_at_k)?;
    d.set_item("k_used", r.k_used)?;
    Ok(d)
}

/// Edge, class and node homophily; undefined node values are `None`.
#[pyfunction]
fn homophily<'py>(py: Python<'py>, dataset: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
    let r = homophily_report(&dataset.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("edge", r.edge_homophily)?;
    d.set_item("anomaly", r.class_homophily_abnormal)?;
    d.set_item("normal", r.class_homophily_normal)?;
    d.set_item("node", r.node_homophily)?;
    Ok(d)
}

/// A CSBM anomaly detection dataset with labeled splits. `config` takes the
/// same keys as the command line (`csbm_n`, `pi_a`, `seed`, ...).
#[pyfunction]
#[pyo3(signature = (config=None))]
fn generate_dataset(py: Python<'_>, config: Option<&str>) -> PyResult<PyDataset> {
    let config = resolve(config)?;
    let sample = py
        .detach(|| generate_gad_dataset(&config.gad_params()))
        .map_err(to_py)?;
    Ok(PyDataset { inner: sample.dataset })
}

/// Separator accuracy on a strong-separation CSBM sample.
#[pyfunction]
#[pyo3(signature = (d=64, n=4000, pi_a=0.1, seed=0, correction="lda", assignment="node_adaptive"))]
fn separability<'py>(
    py: Python<'py>,
    d: usize,
    n: usize,
    pi_a: f64,
    seed: u64,
    correction: &str,
    assignment: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let options = ExperimentOptions {
        r: 1.0,
        correction: parse_enum("prior correction", correction)?,
        assignment: parse_enum("filter assignment", assignment)?,
    };
    let params = CsbmParams::strong_separation(d, n, pi_a, seed);
    let r = py
        .detach(|| separability_experiment(&params, &options))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("accuracy", r.accuracy)?;
    out.set_item("acc_anomaly", r.acc_anomaly)?;
    out.set_item("acc_normal", r.acc_normal)?;
    out.set_item("kappa_eff", r.kappa_eff)?;
    out.set_item("margin_value", r.margin_value)?;
    out.set_item("empirical_margin", r.empirical_margin)?;
    out.set_item("tau_pi", r.tau_pi)?;
    Ok(out)
}

/// Runs a command-line invocation, e.g. `["preprocess", "--dataset=d"]`.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> PyResult<()> {
    py.detach(|| sagad::cli::run(args)).map_err(to_py)
}

#[pymodule]
pub fn sagad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyChebCache>()?;
    m.add_class::<PyContextCache>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(cheb_weights, m)?)?;
    m.add_function(wrap_pyfunction!(filter_response, m)?)?;
    m.add_function(wrap_pyfunction!(reparam_filter_values, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_quotient, m)?)?;
    m.add_function(wrap_pyfunction!(max_rq_subgraph, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(rec_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(homophily, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(separability, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
