//! Python bindings. Matrices cross the boundary as lists of row lists.

use std::path::PathBuf;

use hyperneo::eval::{self, Grid};
use hyperneo::hypergraph::{self, load_attributes, load_hypergraph};
use hyperneo::model::{self, Hyperparams};
use hyperneo::represent::{self, BundleData, MatrixKind, NodePairMatrix};
use hyperneo::synth::{self, PlantedConfig, PlantedInstance, SubsetSampler};
use hyperneo::{AttributeMatrix, EdgeFormat, Error, Hypergraph, LatentParams, MembershipRule};
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

#[pyclass(name = "Hypergraph", module = "pyhyperneo", frozen)]
struct PyHypergraph {
    inner: Hypergraph,
}

#[pymethods]
impl PyHypergraph {
    /// `edges` is a list of (node indices, weight); identical sets merge.
    #[new]
    fn new(labels: Vec<String>, edges: Vec<(Vec<usize>, u64)>) -> PyResult<Self> {
        Ok(PyHypergraph {
            inner: Hypergraph::from_edges(labels, edges).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, format = "raw"))]
    fn load(path: PathBuf, format: &str) -> PyResult<Self> {
        let format: EdgeFormat = parse(format)?;
        Ok(PyHypergraph {
            inner: load_hypergraph(&path, format).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_aggregated(&path).map_err(err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn max_size(&self) -> usize {
        self.inner.max_size()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn edges(&self) -> Vec<(Vec<usize>, u64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.nodes().to_vec(), e.weight()))
            .collect()
    }

    fn degree(&self, i: usize) -> PyResult<usize> {
        self.inner.node_degree(i).map_err(err)
    }

    fn mean_degree(&self) -> f64 {
        self.inner.mean_degree()
    }

    fn sparsity_constant(&self) -> f64 {
        self.inner.sparsity_constant()
    }

    fn __repr__(&self) -> String {
        format!(
            "Hypergraph(num_nodes={}, num_edges={}, max_size={})",
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.max_size()
        )
    }
}

#[pyclass(name = "AttributeMatrix", module = "pyhyperneo", frozen)]
struct PyAttributes {
    inner: AttributeMatrix,
}

#[pymethods]
impl PyAttributes {
    /// `assignment[i]` indexes into `categories`.
    #[new]
    fn new(categories: Vec<String>, assignment: Vec<usize>) -> PyResult<Self> {
        Ok(PyAttributes {
            inner: AttributeMatrix::new(categories, assignment).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf, hg: &PyHypergraph) -> PyResult<Self> {
        Ok(PyAttributes {
            inner: load_attributes(&path, &hg.inner).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf, hg: &PyHypergraph) -> PyResult<()> {
        self.inner.write(hg.inner.labels(), &path).map_err(err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_categories(&self) -> usize {
        self.inner.num_categories()
    }

    #[getter]
    fn categories(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.inner.assignment().to_vec()
    }

    fn one_hot(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.one_hot())
    }
}

#[pyclass(name = "Params", module = "pyhyperneo", frozen)]
struct PyParams {
    inner: LatentParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(u: Vec<Vec<f64>>, w: Vec<Vec<f64>>, beta: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = LatentParams::new(matrix(u)?, matrix(w)?, matrix(beta)?).map_err(err)?;
        Ok(PyParams { inner })
    }

    /// Reads `U.csv`, `W.csv` and `beta.csv`; returns the parameters and the
    /// category labels.
    #[staticmethod]
    fn read(dir: PathBuf, hg: &PyHypergraph) -> PyResult<(Self, Vec<String>)> {
        let (inner, cats) = hyperneo::io::read_params(&dir, &hg.inner).map_err(err)?;
        Ok((PyParams { inner }, cats))
    }

    fn write(&self, dir: PathBuf, hg: &PyHypergraph, categories: Vec<String>) -> PyResult<()> {
        hyperneo::io::write_params(&self.inner, hg.inner.labels(), &categories, &dir).map_err(err)
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.u)
    }

    #[getter]
    fn w(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.w)
    }

    #[getter]
    fn beta(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.beta)
    }

    #[getter]
    fn num_communities(&self) -> usize {
        self.inner.num_communities()
    }

    /// U with unit row sums and W scaled to a maximum of one.
    fn viz_normalized(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (u, w) = represent::viz_normalize(&self.inner);
        (rows(&u), rows(&w))
    }
}

#[pyclass(name = "FitResult", module = "pyhyperneo", frozen)]
struct PyFitResult {
    #[pyo3(get)]
    params: Py<PyParams>,
    #[pyo3(get)]
    best_loglik: f64,
    #[pyo3(get)]
    best_restart: usize,
    #[pyo3(get)]
    per_restart_logliks: Vec<f64>,
    #[pyo3(get)]
    loglik_trace: Vec<f64>,
}

#[pyclass(name = "PlantedInstance", module = "pyhyperneo", frozen)]
struct PyPlanted {
    inner: PlantedInstance,
}

#[pymethods]
impl PyPlanted {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyPlanted {
            inner: PlantedInstance::load(&dir).map_err(err)?,
        })
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write(&dir).map_err(err)
    }

    #[getter]
    fn hypergraph(&self) -> PyHypergraph {
        PyHypergraph {
            inner: self.inner.hg.clone(),
        }
    }

    #[getter]
    fn attributes(&self) -> PyAttributes {
        PyAttributes {
            inner: self.inner.x.clone(),
        }
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.u)
    }

    #[getter]
    fn w(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.w)
    }

    #[getter]
    fn beta(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.beta)
    }
}

#[pyclass(name = "PairMatrix", module = "pyhyperneo", frozen)]
struct PyPairMatrix {
    inner: NodePairMatrix,
}

#[pymethods]
impl PyPairMatrix {
    #[staticmethod]
    fn read(path: PathBuf, num_nodes: usize, kind: &str) -> PyResult<Self> {
        Ok(PyPairMatrix {
            inner: NodePairMatrix::read(&path, num_nodes, parse(kind)?).map_err(err)?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    /// Nonzero (i, j, value) entries with i < j.
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.inner.upper_entries().collect()
    }

    fn to_dense(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.to_dense())
    }
}

#[allow(clippy::too_many_arguments)]
fn hyperparams(
    k: usize,
    gamma: f64,
    n_iter: usize,
    n_restarts: usize,
    seed: u64,
    floor: f64,
    rule: &str,
    early_stop: Option<f64>,
) -> PyResult<Hyperparams> {
    let rule: MembershipRule = parse(rule)?;
    let hp = Hyperparams {
        k,
        gamma,
        n_iter,
        n_restarts,
        seed,
        floor,
        early_stop,
        rule,
    };
    hp.validate().map_err(err)?;
    Ok(hp)
}

#[pyfunction]
#[pyo3(signature = (
    hg, x = None, k = 2, gamma = 0.0, n_iter = 20, n_restarts = 10, seed = 0,
    floor = model::DEFAULT_FLOOR, rule = "standard", early_stop = None,
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    hg: &PyHypergraph,
    x: Option<&PyAttributes>,
    k: usize,
    gamma: f64,
    n_iter: usize,
    n_restarts: usize,
    seed: u64,
    floor: f64,
    rule: &str,
    early_stop: Option<f64>,
) -> PyResult<PyFitResult> {
    let hp = hyperparams(k, gamma, n_iter, n_restarts, seed, floor, rule, early_stop)?;
    let x = x.map(|x| &x.inner);
    let report = py.detach(|| model::fit(&hg.inner, x, &hp)).map_err(err)?;
    Ok(PyFitResult {
        params: Py::new(
            py,
            PyParams {
                inner: report.params,
            },
        )?,
        best_loglik: report.best_loglik,
        best_restart: report.best_restart,
        per_restart_logliks: report.per_restart_logliks,
        loglik_trace: report.loglik_trace,
    })
}

/// (1−γ)·structural + γ·attribute log-likelihood.
#[pyfunction]
#[pyo3(signature = (hg, params, x = None, gamma = 0.0))]
fn loglik(
    hg: &PyHypergraph,
    params: &PyParams,
    x: Option<&PyAttributes>,
    gamma: f64,
) -> PyResult<f64> {
    model::total_loglik(&hg.inner, x.map(|x| &x.inner), &params.inner, gamma).map_err(err)
}

/// P(A_e > 0) for a node set under fitted parameters.
#[pyfunction]
fn existence_prob(
    nodes: Vec<usize>,
    params: &PyParams,
    num_nodes: usize,
    max_size: usize,
) -> PyResult<f64> {
    model::existence_prob(&nodes, &params.inner, num_nodes, max_size).map_err(err)
}

#[pyfunction]
fn kappa(s: usize, n: usize) -> PyResult<f64> {
    hypergraph::kappa(s, n).map_err(err)
}

#[pyfunction]
fn sparsity_constant(n: usize, max_size: usize) -> PyResult<f64> {
    hypergraph::sparsity_constant(n, max_size).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n = 1000, p_u = 0.8, w_in = 10.0, max_size = 10, edges_per_node = 10.0, seed = 0))]
fn generate_instance(
    py: Python<'_>,
    n: usize,
    p_u: f64,
    w_in: f64,
    max_size: usize,
    edges_per_node: f64,
    seed: u64,
) -> PyResult<PyPlanted> {
    let cfg = PlantedConfig {
        n,
        p_u,
        w_in,
        max_size,
        edges_per_node,
        seed,
    };
    let inner = py.detach(|| synth::generate_instance(&cfg)).map_err(err)?;
    Ok(PyPlanted { inner })
}

/// `count` node sets of `size` drawn with probability proportional to λ_e.
#[pyfunction]
fn sample_subsets(
    u: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    size: usize,
    count: usize,
    seed: u64,
) -> PyResult<Vec<Vec<usize>>> {
    let (u, w) = (matrix(u)?, matrix(w)?);
    Ok(SubsetSampler::new(&u, &w, size, seed)
        .map_err(err)?
        .sample(count))
}

#[pyfunction]
fn auc_from_scores(pairs: Vec<(f64, f64)>) -> PyResult<f64> {
    eval::auc_from_scores(&pairs).map_err(err)
}

/// Mean row cosine, maximized over community permutations.
#[pyfunction]
fn cosine_similarity(truth: Vec<Vec<f64>>, inferred: Vec<Vec<f64>>) -> PyResult<f64> {
    eval::membership_cosine_similarity(&matrix(truth)?, &matrix(inferred)?).map_err(err)
}

/// Five-fold cross-validated AUC; returns (fold AUCs, mean AUC).
#[pyfunction]
#[pyo3(signature = (
    hg, x = None, k = 2, gamma = 0.0, n_iter = 20, n_restarts = 10, seed = 0,
    floor = model::DEFAULT_FLOOR, rule = "standard",
))]
#[allow(clippy::too_many_arguments)]
fn cross_validate(
    py: Python<'_>,
    hg: &PyHypergraph,
    x: Option<&PyAttributes>,
    k: usize,
    gamma: f64,
    n_iter: usize,
    n_restarts: usize,
    seed: u64,
    floor: f64,
    rule: &str,
) -> PyResult<(Vec<f64>, f64)> {
    let hp = hyperparams(k, gamma, n_iter, n_restarts, seed, floor, rule, None)?;
    let x = x.map(|x| &x.inner);
    let cv = py
        .detach(|| {
            let folds = eval::make_folds(&hg.inner, seed)?;
            eval::cross_validate(&hg.inner, x, &hp, &folds, seed)
        })
        .map_err(err)?;
    Ok((cv.fold_aucs, cv.mean_auc))
}

/// Grid search over (K, γ); returns a dict with the selected pair and the
/// per-candidate results.
#[pyfunction]
#[pyo3(signature = (
    hg, x = None, ks = None, gammas = None, n_iter = 20, n_restarts = 10, seed = 0,
    rule = "standard",
))]
#[allow(clippy::too_many_arguments)]
fn grid_search<'py>(
    py: Python<'py>,
    hg: &PyHypergraph,
    x: Option<&PyAttributes>,
    ks: Option<Vec<usize>>,
    gammas: Option<Vec<f64>>,
    n_iter: usize,
    n_restarts: usize,
    seed: u64,
    rule: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let z = x.map_or(0, |x| x.inner.num_categories());
    let mut grid = Grid::standard(z.max(2), x.is_none());
    if let Some(ks) = ks {
        grid.ks = ks;
    }
    if let Some(gammas) = gammas {
        grid.gammas = gammas;
    }
    let hp = hyperparams(
        2,
        0.0,
        n_iter,
        n_restarts,
        seed,
        model::DEFAULT_FLOOR,
        rule,
        None,
    )?;
    let x = x.map(|x| &x.inner);
    let report = py
        .detach(|| eval::grid_search(&hg.inner, x, &hp, &grid, seed))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("k", report.selected_k)?;
    out.set_item("gamma", report.selected_gamma)?;
    let candidates: Vec<(usize, f64, Vec<f64>, f64)> = report
        .candidates
        .into_iter()
        .map(|c| (c.k, c.gamma, c.fold_aucs, c.mean_auc))
        .collect();
    out.set_item("candidates", candidates)?;
    Ok(out)
}

#[pyfunction]
fn learned_representation(hg: &PyHypergraph, params: &PyParams) -> PyResult<PyPairMatrix> {
    Ok(PyPairMatrix {
        inner: represent::learned_representation(&hg.inner, &params.inner).map_err(err)?,
    })
}

/// `kind` is "raw" or "size-weighted".
#[pyfunction]
#[pyo3(signature = (hg, kind = "raw"))]
fn projected_adjacency(hg: &PyHypergraph, kind: &str) -> PyResult<PyPairMatrix> {
    Ok(PyPairMatrix {
        inner: represent::projected_adjacency(&hg.inner, parse(kind)?).map_err(err)?,
    })
}

/// Writes an embedding bundle and returns its manifest as a dict.
#[pyfunction]
#[pyo3(signature = (hg, kind, out_dir, x = None, params = None))]
fn export_bundle<'py>(
    py: Python<'py>,
    hg: &PyHypergraph,
    kind: &str,
    out_dir: PathBuf,
    x: Option<&PyAttributes>,
    params: Option<&PyParams>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: MatrixKind = parse(kind)?;
    let x = x.map(|x| &x.inner);
    let manifest = match kind {
        MatrixKind::Learned => {
            let params =
                params.ok_or_else(|| PyValueError::new_err("learned bundles need params"))?;
            let m = represent::learned_representation(&hg.inner, &params.inner).map_err(err)?;
            represent::export_embedding_bundle(BundleData::Pairs(&m), &hg.inner, x, &out_dir)
        }
        MatrixKind::Raw | MatrixKind::SizeWeighted => {
            let m = represent::projected_adjacency(&hg.inner, kind).map_err(err)?;
            represent::export_embedding_bundle(BundleData::Pairs(&m), &hg.inner, x, &out_dir)
        }
        MatrixKind::Attributes => {
            represent::export_embedding_bundle(BundleData::Attributes, &hg.inner, x, &out_dir)
        }
    }
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("kind", manifest.kind.name())?;
    out.set_item("num_nodes", manifest.num_nodes)?;
    out.set_item("num_categories", manifest.num_categories)?;
    out.set_item("avg_degree", manifest.avg_degree)?;
    out.set_item("matrix_file", manifest.matrix_file)?;
    out.set_item("attribute_file", manifest.attribute_file)?;
    out.set_item("nodes_file", manifest.nodes_file)?;
    Ok(out)
}

#[pymodule]
pub fn pyhyperneo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHypergraph>()?;
    m.add_class::<PyAttributes>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyFitResult>()?;
    m.add_class::<PyPlanted>()?;
    m.add_class::<PyPairMatrix>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(loglik, m)?)?;
    m.add_function(wrap_pyfunction!(existence_prob, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(sparsity_constant, m)?)?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_subsets, m)?)?;
    m.add_function(wrap_pyfunction!(auc_from_scores, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(learned_representation, m)?)?;
    m.add_function(wrap_pyfunction!(projected_adjacency, m)?)?;
    m.add_function(wrap_pyfunction!(export_bundle, m)?)?;
    Ok(())
}
