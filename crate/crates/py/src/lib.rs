//! Python bindings for the smoothing-graphon models: relational matrices,
//! prior sampling and generation, MCMC fitting, predictive scoring,
//! link-prediction metrics and intensity grids.
//!
//! Build with `cargo build -p smoothgraph-py --release` and import the
//! produced `libsmoothgraph_py.so` as `smoothgraph_py` (see
//! `python/smoke_test.py`).

use ndarray::Array2;
use numpy::{PyArray2, PyReadonlyArray2, PyUntypedArrayMethods};
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use smoothgraph::graphon::{
    self, BlockIntensities, GridMode, Partition, SegmentDistribution, SmoothingParameter,
};
use smoothgraph::inference::{
    posterior_mean_grid, posterior_predictive, run_isg_sampler, run_lfsg_sampler,
    run_mmsb_sampler, run_sbm_sampler, SamplerConfig, Trace,
};
use smoothgraph::metrics::{self, LabelDimension, ScoredCells};
use smoothgraph::models::{
    self, read_state, write_state, Hyperparameters, ModelKind, StateSnapshot,
};
use smoothgraph::relational;
use smoothgraph::rng::{phase, substream};

fn py_err(e: smoothgraph::Error) -> PyErr {
    use smoothgraph::Error;
    match e {
        Error::Invalid { .. } | Error::Data(_) | Error::DataLine { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
    }
}

fn parse_model(model: &str) -> PyResult<ModelKind> {
    model.parse().map_err(py_err)
}

fn array_to_py<'py>(py: Python<'py>, a: &Array2<f64>) -> Bound<'py, PyArray2<f64>> {
    let rows: Vec<Vec<f64>> = a.outer_iter().map(|r| r.to_vec()).collect();
    PyArray2::from_vec2(py, &rows).expect("rectangular rows")
}

fn blocks_from_py(b: PyReadonlyArray2<f64>) -> PyResult<BlockIntensities> {
    let shape = b.shape().to_vec();
    let data = b
        .as_slice()
        .map_err(|_| PyValueError::new_err("block matrix must be contiguous"))?
        .to_vec();
    let arr = Array2::from_shape_vec((shape[0], shape[1]), data)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    BlockIntensities::new(arr).map_err(py_err)
}

fn partition_from_theta(theta1: Vec<f64>, theta2: Vec<f64>) -> PyResult<Partition> {
    Partition::new(
        SegmentDistribution::new(theta1).map_err(py_err)?,
        SegmentDistribution::new(theta2).map_err(py_err)?,
    )
    .map_err(py_err)
}

/// Directed binary relation matrix with a train/test/excluded mask.
#[pyclass(name = "RelationalMatrix", skip_from_py_object)]
#[derive(Clone)]
struct PyRelationalMatrix {
    inner: relational::RelationalMatrix,
}

#[pymethods]
impl PyRelationalMatrix {
    /// Parse "src dst" lines; `#` starts a comment.
    #[staticmethod]
    #[pyo3(signature = (text, n, self_loops = false))]
    fn from_edge_list(text: &str, n: usize, self_loops: bool) -> PyResult<Self> {
        relational::RelationalMatrix::load_edge_list(std::io::Cursor::new(text), n, self_loops)
            .map(|inner| PyRelationalMatrix { inner })
            .map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (entries, self_loops = false))]
    fn from_dense(entries: PyReadonlyArray2<u8>, self_loops: bool) -> PyResult<Self> {
        let shape = entries.shape().to_vec();
        let data = entries
            .as_slice()
            .map_err(|_| PyValueError::new_err("entries must be contiguous"))?
            .to_vec();
        let arr = Array2::from_shape_vec((shape[0], shape[1]), data)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        relational::RelationalMatrix::from_entries(arr, self_loops)
            .map(|inner| PyRelationalMatrix { inner })
            .map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// `(positive_links, sparsity)`.
    fn summarize(&self) -> (u64, f64) {
        let s = self.inner.summarize();
        (s.positive_links, s.sparsity)
    }

    fn row_wise_split(&self, train_ratio: f64, seed: u64) -> PyResult<Self> {
        self.inner
            .row_wise_split(train_ratio, &mut ChaCha12Rng::seed_from_u64(seed))
            .map(|inner| PyRelationalMatrix { inner })
            .map_err(py_err)
    }

    fn entries<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<u8>> {
        let rows: Vec<Vec<u8>> = (0..self.inner.n())
            .map(|i| (0..self.inner.n()).map(|j| self.inner.entry(i, j)).collect())
            .collect();
        PyArray2::from_vec2(py, &rows).expect("rectangular rows")
    }

    /// Mask codes: 0 = excluded, 1 = train, 2 = test.
    fn mask<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<u8>> {
        let rows: Vec<Vec<u8>> = (0..self.inner.n())
            .map(|i| (0..self.inner.n()).map(|j| self.inner.mask(i, j).code()).collect())
            .collect();
        PyArray2::from_vec2(py, &rows).expect("rectangular rows")
    }

    fn train_pairs(&self) -> Vec<(usize, usize)> {
        self.inner.train_pairs()
    }

    fn test_pairs(&self) -> Vec<(usize, usize)> {
        self.inner.test_pairs()
    }

    fn to_edge_list(&self) -> String {
        let mut buf = Vec::new();
        self.inner.write_edge_list(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("ascii edge list")
    }

    fn __repr__(&self) -> String {
        let s = self.inner.summarize();
        format!(
            "RelationalMatrix(n={}, positive_links={}, sparsity={:.4})",
            self.inner.n(),
            s.positive_links,
            s.sparsity
        )
    }
}

/// A model state drawn from the prior (or parsed from a snapshot), able to
/// generate synthetic relations and evaluate intensities.
#[pyclass(name = "ModelState")]
struct PyModelState {
    inner: StateSnapshot,
}

#[pymethods]
impl PyModelState {
    /// Draw a state from the prior of the given model. `lam` fixes the
    /// smoothing parameter instead of drawing it from Gamma(1, 1).
    #[staticmethod]
    #[pyo3(signature = (model, n, k, seed, alpha0 = 1.0, beta0 = 1.0, lam = None))]
    fn sample_prior(
        model: &str,
        n: usize,
        k: usize,
        seed: u64,
        alpha0: f64,
        beta0: f64,
        lam: Option<f64>,
    ) -> PyResult<Self> {
        let kind = parse_model(model)?;
        let h = Hyperparameters::new(alpha0, beta0, vec![1.0; k], 1.0, 1.0).map_err(py_err)?;
        let mut rng = substream(seed, &[phase::PRIOR]);
        let inner = if kind == ModelKind::Mmsb {
            StateSnapshot::Mmsb(models::sample_mmsb_prior(&h, n, &mut rng).map_err(py_err)?)
        } else {
            let mut state = models::sample_prior(&h, n, kind, &mut rng).map_err(py_err)?;
            if let Some(l) = lam {
                state.lambda = SmoothingParameter::new(l).map_err(py_err)?;
            }
            StateSnapshot::Latent(state)
        };
        Ok(PyModelState { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        read_state(std::io::Cursor::new(text))
            .map(|inner| PyModelState { inner })
            .map_err(py_err)
    }

    fn to_text(&self) -> String {
        let mut buf = Vec::new();
        write_state(&self.inner, &mut buf).expect("write to vec");
        String::from_utf8(buf).expect("ascii snapshot")
    }

    #[getter]
    fn model(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        match &self.inner {
            StateSnapshot::Latent(s) => s.n(),
            StateSnapshot::Mmsb(s) => s.n(),
        }
    }

    #[getter]
    fn k(&self) -> usize {
        match &self.inner {
            StateSnapshot::Latent(s) => s.k(),
            StateSnapshot::Mmsb(s) => s.k(),
        }
    }

    /// Smoothing parameter (named `lam` because `lambda` is reserved in
    /// Python).
    #[getter]
    fn lam(&self) -> Option<f64> {
        match &self.inner {
            StateSnapshot::Latent(s) => Some(s.lambda.value()),
            StateSnapshot::Mmsb(_) => None,
        }
    }

    #[getter]
    fn theta1(&self) -> Option<Vec<f64>> {
        match &self.inner {
            StateSnapshot::Latent(s) => Some(s.partition.dim1().theta().to_vec()),
            StateSnapshot::Mmsb(_) => None,
        }
    }

    #[getter]
    fn theta2(&self) -> Option<Vec<f64>> {
        match &self.inner {
            StateSnapshot::Latent(s) => Some(s.partition.dim2().theta().to_vec()),
            StateSnapshot::Mmsb(_) => None,
        }
    }

    #[getter]
    fn u1(&self) -> Option<Vec<f64>> {
        match &self.inner {
            StateSnapshot::Latent(s) => Some(s.u1.clone()),
            StateSnapshot::Mmsb(_) => None,
        }
    }

    #[getter]
    fn u2(&self) -> Option<Vec<f64>> {
        match &self.inner {
            StateSnapshot::Latent(s) => Some(s.u2.clone()),
            StateSnapshot::Mmsb(_) => None,
        }
    }

    fn b<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        let b = match &self.inner {
            StateSnapshot::Latent(s) => s.b.as_array(),
            StateSnapshot::Mmsb(s) => s.b.as_array(),
        };
        array_to_py(py, b)
    }

    fn memberships<'py>(&self, py: Python<'py>) -> Option<Bound<'py, PyArray2<f64>>> {
        match &self.inner {
            StateSnapshot::Latent(_) => None,
            StateSnapshot::Mmsb(s) => Some(array_to_py(py, &s.f)),
        }
    }

    /// Generate a relation matrix from this state.
    fn generate(&mut self, seed: u64) -> PyResult<PyRelationalMatrix> {
        let mut rng = substream(seed, &[phase::GENERATE]);
        let inner = match &mut self.inner {
            StateSnapshot::Latent(state) => match state.kind {
                ModelKind::Sbm => models::generate_sbm(state, &mut rng),
                ModelKind::Isg => models::generate_isg(state, &mut rng),
                ModelKind::Lfsg => models::generate_lfsg(state, &mut rng),
                ModelKind::Mmsb => unreachable!("latent snapshots are never mmsb"),
            },
            StateSnapshot::Mmsb(state) => models::generate_mmsb(state, &mut rng),
        }
        .map_err(py_err)?;
        Ok(PyRelationalMatrix { inner })
    }

    /// Smoothed intensity at a coordinate pair (latent models only).
    fn mixture(&self, u1: f64, u2: f64) -> PyResult<f64> {
        match &self.inner {
            StateSnapshot::Latent(s) => Ok(graphon::mixture_intensity(
                u1,
                u2,
                &s.partition,
                &s.b,
                s.lambda,
            )),
            StateSnapshot::Mmsb(_) => Err(PyValueError::new_err(
                "mmsb states have no graphon intensity",
            )),
        }
    }

    /// Intensity grid over the unit square (latent models only).
    #[pyo3(signature = (resolution, mode = "smooth"))]
    fn grid<'py>(&self, py: Python<'py>, resolution: usize, mode: &str) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let state = match &self.inner {
            StateSnapshot::Latent(s) => s,
            StateSnapshot::Mmsb(_) => {
                return Err(PyValueError::new_err("mmsb states have no graphon grid"))
            }
        };
        let mode = match mode {
            "smooth" => GridMode::Smooth,
            "piecewise" => GridMode::Piecewise,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown grid mode {other:?}; expected smooth or piecewise"
                )))
            }
        };
        let grid = graphon::intensity_grid(&state.partition, &state.b, state.lambda, resolution, mode)
            .map_err(py_err)?;
        Ok(array_to_py(py, &grid))
    }

    fn __repr__(&self) -> String {
        format!("ModelState(model={}, n={}, k={})", self.model(), self.n(), self.k())
    }
}

/// Retained posterior samples plus predictive scoring.
#[pyclass(name = "FitResult")]
struct PyFitResult {
    trace: Trace,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn model(&self) -> String {
        self.trace.model.to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.trace.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.trace.k
    }

    #[getter]
    fn num_samples(&self) -> usize {
        self.trace.len()
    }

    fn test_pairs(&self) -> Vec<(usize, usize)> {
        self.trace.test_pairs.clone()
    }

    /// Posterior-mean edge score for each `(i, j)` pair.
    fn predictive(&self, pairs: Vec<(usize, usize)>) -> PyResult<Vec<f64>> {
        posterior_predictive(&self.trace, &pairs).map_err(py_err)
    }

    fn lambdas(&self) -> Vec<f64> {
        self.trace.samples.iter().map(|s| s.lambda).collect()
    }

    fn log_likelihoods(&self) -> Vec<f64> {
        self.trace.samples.iter().map(|s| s.log_likelihood).collect()
    }

    fn posterior_mean_b<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        if self.trace.is_empty() {
            return Err(PyValueError::new_err("trace has no retained samples"));
        }
        let mut acc = Array2::zeros((self.trace.k, self.trace.k));
        for s in &self.trace.samples {
            acc += &s.b;
        }
        acc /= self.trace.len() as f64;
        Ok(array_to_py(py, &acc))
    }

    /// Acceptance rate per Metropolis update family.
    fn acceptance(&self) -> std::collections::BTreeMap<String, f64> {
        self.trace
            .acceptance
            .families()
            .map(|(name, proposed, accepted)| (name.to_owned(), accepted as f64 / proposed as f64))
            .collect()
    }

    /// Pooled per-node label proportions ("sender" or "receiver").
    fn label_proportions<'py>(&self, py: Python<'py>, dimension: &str) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let dim = match dimension {
            "sender" => LabelDimension::Sender,
            "receiver" => LabelDimension::Receiver,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown dimension {other:?}; expected sender or receiver"
                )))
            }
        };
        let props = metrics::label_proportions(&self.trace, dim).map_err(py_err)?;
        Ok(array_to_py(py, &props))
    }

    /// Posterior-mean intensity grid (ISG/LFSG traces).
    fn mean_intensity_grid<'py>(&self, py: Python<'py>, resolution: usize) -> PyResult<Bound<'py, PyArray2<f64>>> {
        if !matches!(self.trace.model, ModelKind::Isg | ModelKind::Lfsg) {
            return Err(PyValueError::new_err(format!(
                "trace of model {} has no smoothing graphon",
                self.trace.model
            )));
        }
        let grid = posterior_mean_grid(&self.trace, resolution).map_err(py_err)?;
        Ok(array_to_py(py, &grid))
    }

    fn trace_csv(&self) -> String {
        let mut buf = Vec::new();
        self.trace.write_csv(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("ascii csv")
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(model={}, n={}, k={}, samples={})",
            self.model(),
            self.trace.n,
            self.trace.k,
            self.trace.len()
        )
    }
}

/// Run the MCMC sampler for the given model on a (typically pre-split)
/// relation matrix.
#[pyfunction]
#[pyo3(signature = (
    matrix, model, k, seed,
    iters = 2000, burnin = 1000, thin = 5,
    alpha0 = None, beta0 = None,
    alpha_u = 1.0, beta_u = 1.0, sigma_b = 0.2,
))]
#[allow(clippy::too_many_arguments)]
fn fit(
    matrix: &PyRelationalMatrix,
    model: &str,
    k: usize,
    seed: u64,
    iters: usize,
    burnin: usize,
    thin: usize,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    alpha_u: f64,
    beta_u: f64,
    sigma_b: f64,
) -> PyResult<PyFitResult> {
    let kind = parse_model(model)?;
    let (a0, b0) = match (alpha0, beta0) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => {
            // default block prior matched to the training sparsity
            let train = matrix.inner.train_pairs();
            let pos: u64 = train.iter().map(|&(i, j)| matrix.inner.entry(i, j) as u64).sum();
            let s = pos as f64 / train.len().max(1) as f64;
            if s <= 0.0 || s >= 1.0 {
                (1.0, 1.0)
            } else {
                (s, 1.0 - s)
            }
        }
        _ => {
            return Err(PyValueError::new_err(
                "set both alpha0 and beta0, or neither",
            ))
        }
    };
    let h = Hyperparameters::new(a0, b0, vec![1.0; k], 1.0, 1.0).map_err(py_err)?;
    let cfg = SamplerConfig {
        iterations: iters,
        burn_in: burnin,
        thin,
        alpha_u,
        beta_u,
        sigma_b,
        ..SamplerConfig::new(kind, seed)
    };
    let trace = match kind {
        ModelKind::Sbm => run_sbm_sampler(&matrix.inner, &h, &cfg),
        ModelKind::Isg => run_isg_sampler(&matrix.inner, &h, &cfg),
        ModelKind::Lfsg => run_lfsg_sampler(&matrix.inner, &h, &cfg),
        ModelKind::Mmsb => run_mmsb_sampler(&matrix.inner, &h, &cfg),
    }
    .map_err(py_err)?;
    Ok(PyFitResult { trace })
}

/// Laplace CDF with location 0 and scale `1/lam`.
#[pyfunction]
fn laplace_cdf(x: f64, lam: f64) -> PyResult<f64> {
    Ok(graphon::laplace_cdf(x, SmoothingParameter::new(lam).map_err(py_err)?))
}

/// Normalised segment weights of a coordinate under Laplace smoothing.
#[pyfunction]
fn segment_weights(u: f64, theta: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    let seg = SegmentDistribution::new(theta).map_err(py_err)?;
    Ok(seg.weights(u, SmoothingParameter::new(lam).map_err(py_err)?))
}

/// Smoothed graphon intensity at a coordinate pair.
#[pyfunction]
fn mixture_intensity(
    u1: f64,
    u2: f64,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    b: PyReadonlyArray2<f64>,
    lam: f64,
) -> PyResult<f64> {
    let p = partition_from_theta(theta1, theta2)?;
    let b = blocks_from_py(b)?;
    Ok(graphon::mixture_intensity(
        u1,
        u2,
        &p,
        &b,
        SmoothingParameter::new(lam).map_err(py_err)?,
    ))
}

/// Piecewise-constant graphon intensity at a coordinate pair.
#[pyfunction]
fn piecewise_intensity(
    u1: f64,
    u2: f64,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    b: PyReadonlyArray2<f64>,
) -> PyResult<f64> {
    let p = partition_from_theta(theta1, theta2)?;
    let b = blocks_from_py(b)?;
    Ok(graphon::piecewise_intensity(u1, u2, &p, &b))
}

/// Intensity grid over the unit square.
#[pyfunction]
#[pyo3(signature = (theta1, theta2, b, lam, resolution, mode = "smooth"))]
fn intensity_grid<'py>(
    py: Python<'py>,
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    b: PyReadonlyArray2<f64>,
    lam: f64,
    resolution: usize,
    mode: &str,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let p = partition_from_theta(theta1, theta2)?;
    let b = blocks_from_py(b)?;
    let mode = match mode {
        "smooth" => GridMode::Smooth,
        "piecewise" => GridMode::Piecewise,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown grid mode {other:?}; expected smooth or piecewise"
            )))
        }
    };
    let grid = graphon::intensity_grid(&p, &b, SmoothingParameter::new(lam).map_err(py_err)?, resolution, mode)
        .map_err(py_err)?;
    Ok(array_to_py(py, &grid))
}

/// Probability that a random positive cell outranks a random negative one.
#[pyfunction]
fn auc_roc(scores: Vec<f64>, truths: Vec<u8>) -> PyResult<f64> {
    let sc = ScoredCells::new(scores, truths).map_err(py_err)?;
    metrics::auc_roc(&sc).map_err(py_err)
}

/// Area under the precision-recall curve with tie-block averaging.
#[pyfunction]
fn average_precision(scores: Vec<f64>, truths: Vec<u8>) -> PyResult<f64> {
    let sc = ScoredCells::new(scores, truths).map_err(py_err)?;
    metrics::average_precision(&sc).map_err(py_err)
}

/// Expected precision among the top-k scores.
#[pyfunction]
fn precision_at_k(scores: Vec<f64>, truths: Vec<u8>, k: usize) -> PyResult<f64> {
    let sc = ScoredCells::new(scores, truths).map_err(py_err)?;
    metrics::precision_at_k(&sc, k).map_err(py_err)
}

/// Uniformly sample `sample` ids from the `pool` most active nodes.
#[pyfunction]
fn top_active_subsample(
    edges: Vec<(usize, usize)>,
    pool: usize,
    sample: usize,
    seed: u64,
) -> PyResult<Vec<usize>> {
    relational::top_active_subsample(&edges, pool, sample, &mut ChaCha12Rng::seed_from_u64(seed))
        .map_err(py_err)
}

#[pymodule]
fn smoothgraph_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRelationalMatrix>()?;
    m.add_class::<PyModelState>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(segment_weights, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(piecewise_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(intensity_grid, m)?)?;
    m.add_function(wrap_pyfunction!(auc_roc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(top_active_subsample, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
