//! Python bindings for the stegokey workbench.

// `create_exception!` probes a pyo3 feature this crate does not declare.
#![allow(unexpected_cfgs)]

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use stegokey::attack::{self, AttackOptions, KeySpace};
use stegokey::codec::{self, EmbedConfig, EmbedOperation, KeyCandidate};
use stegokey::error::Error;
use stegokey::image::GrayImage;
use stegokey::noise;
use stegokey::rng::RngKind;
use stegokey::stats;
use stegokey::theory;
use stegokey::workbench::{pgm, synth};

create_exception!(stegokey_py, AttackInfeasible, PyException);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Infeasible(msg) => AttackInfeasible::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "GrayImage", module = "stegokey_py")]
#[derive(Clone)]
struct PyGrayImage {
    inner: GrayImage,
}

#[pymethods]
impl PyGrayImage {
    #[new]
    fn new(width: usize, height: usize, pixels: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: GrayImage::new(width, height, pixels).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_pgm(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pgm::read_pgm(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (width, height, texture_sigma, gen_seed, base = 128.0))]
    fn synthetic(width: usize, height: usize, texture_sigma: f64, gen_seed: u64, base: f64) -> PyResult<Self> {
        Ok(Self {
            inner: synth::try_synth_cover(width, height, base, texture_sigma, gen_seed).map_err(to_py)?,
        })
    }

    fn write_pgm(&self, path: &str) -> PyResult<()> {
        pgm::write_pgm(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new_bound(py, self.inner.pixels())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("GrayImage({}x{})", self.inner.width(), self.inner.height())
    }
}

#[pyclass(name = "EmbedConfig", module = "stegokey_py")]
#[derive(Clone)]
struct PyEmbedConfig {
    inner: EmbedConfig,
}

#[pymethods]
impl PyEmbedConfig {
    #[new]
    #[pyo3(signature = (operation = "replace", rng = "borland_lcg", reserve_header = true))]
    fn new(operation: &str, rng: &str, reserve_header: bool) -> PyResult<Self> {
        let operation: EmbedOperation = operation
            .parse()
            .map_err(|e| PyValueError::new_err(format!("{e}")))?;
        let rng: RngKind = rng.parse().map_err(|e| PyValueError::new_err(format!("{e}")))?;
        let mut inner = EmbedConfig::default().with_operation(operation).with_rng(rng);
        if !reserve_header {
            inner = inner.without_header();
        }
        Ok(Self { inner })
    }

    fn capacity_bits(&self, image_size: usize) -> usize {
        self.inner.capacity_bits(image_size)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn config_or_default(config: Option<&PyEmbedConfig>) -> EmbedConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (cover, message, seed, config = None))]
fn embed(cover: &PyGrayImage, message: &[u8], seed: u16, config: Option<&PyEmbedConfig>) -> PyResult<PyGrayImage> {
    let key = KeyCandidate::new(seed, message.len() as u32);
    let inner = codec::embed(&cover.inner, &codec::bytes_to_bits(message), key, &config_or_default(config))
        .map_err(to_py)?;
    Ok(PyGrayImage { inner })
}

#[pyfunction]
#[pyo3(signature = (stego, seed, length, config = None))]
fn extract<'py>(
    py: Python<'py>,
    stego: &PyGrayImage,
    seed: u16,
    length: u32,
    config: Option<&PyEmbedConfig>,
) -> PyResult<Bound<'py, PyBytes>> {
    let bits = codec::extract(&stego.inner, KeyCandidate::new(seed, length), &config_or_default(config))
        .map_err(to_py)?;
    Ok(PyBytes::new_bound(py, &codec::bits_to_bytes(&bits)))
}

#[pyfunction]
#[pyo3(signature = (seed, length, image_size, config = None))]
fn keyed_path(seed: u16, length: u32, image_size: usize, config: Option<&PyEmbedConfig>) -> PyResult<Vec<usize>> {
    codec::keyed_path(KeyCandidate::new(seed, length), &config_or_default(config), image_size).map_err(to_py)
}

#[pyfunction]
fn hamming_distortion(cover: &PyGrayImage, stego: &PyGrayImage) -> PyResult<f64> {
    codec::hamming_distortion(&cover.inner, &stego.inner).map_err(to_py)
}

/// Returns `(residuals, r_hat, sigma2_hat)`.
#[pyfunction]
#[pyo3(signature = (stego, radius = 1, skip_header = 64))]
fn residuals(stego: &PyGrayImage, radius: usize, skip_header: usize) -> PyResult<(Vec<f64>, f64, f64)> {
    let field = noise::compute_noise(&stego.inner, radius, skip_header).map_err(to_py)?;
    let rate = noise::estimate_rate(&field).rate;
    let sigma2 = noise::estimate_sigma2(&field, rate).sigma2;
    Ok((field.values().to_vec(), rate, sigma2))
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    stats::q_function(x)
}

#[pyfunction]
fn inverse_q(p: f64) -> PyResult<f64> {
    stats::inverse_q(p).map_err(to_py)
}

#[pyclass(name = "AttackPlan", module = "stegokey_py", get_all, frozen)]
struct PyAttackPlan {
    alpha0: f64,
    alpha1: f64,
    p0: f64,
    p1: f64,
    delta_p: f64,
    n: u64,
    threshold: f64,
    n_star: f64,
    w_f: f64,
    w_m: f64,
}

#[pymethods]
impl PyAttackPlan {
    fn __repr__(&self) -> String {
        format!("AttackPlan(n={}, threshold={:.4})", self.n, self.threshold)
    }
}

#[pyfunction]
#[pyo3(signature = (rate, sigma, keyspace_size, p_m = 0.01, threshold = 0.5))]
fn plan_attack(rate: f64, sigma: f64, keyspace_size: u64, p_m: f64, threshold: f64) -> PyResult<PyAttackPlan> {
    let model = stats::build_mixture(rate, sigma, threshold).map_err(to_py)?;
    let plan = stats::plan_attack(&model, keyspace_size, p_m).map_err(to_py)?;
    Ok(PyAttackPlan {
        alpha0: model.alpha0,
        alpha1: model.alpha1,
        p0: model.p0,
        p1: model.p1,
        delta_p: model.delta_p,
        n: plan.n,
        threshold: plan.threshold,
        n_star: plan.n_star,
        w_f: plan.w_f,
        w_m: plan.w_m,
    })
}

#[pyclass(name = "AttackResult", module = "stegokey_py", get_all, frozen)]
struct PyAttackResult {
    outcome: String,
    /// `(seed, length)` when the key was recovered uniquely.
    recovered: Option<(u16, u32)>,
    best_guess: Option<(u16, u32)>,
    survivor_count: u64,
    stage: Option<String>,
    /// Full report, identical to the CLI's `--report` output.
    report_json: String,
}

#[pymethods]
impl PyAttackResult {
    fn __repr__(&self) -> String {
        format!("AttackResult(outcome={:?}, recovered={:?})", self.outcome, self.recovered)
    }
}

fn pair(key: KeyCandidate) -> (u16, u32) {
    (key.seed, key.message_len_bytes)
}

#[pyfunction]
#[pyo3(signature = (
    stego, seed_bits, min_len, max_len, config = None, rate = None, sigma = None,
    p_m = 0.01, expected_false_alarms = 1.0, threads = None
))]
#[allow(clippy::too_many_arguments)]
fn correlation_attack(
    py: Python<'_>,
    stego: &PyGrayImage,
    seed_bits: u32,
    min_len: u32,
    max_len: u32,
    config: Option<&PyEmbedConfig>,
    rate: Option<f64>,
    sigma: Option<f64>,
    p_m: f64,
    expected_false_alarms: f64,
    threads: Option<usize>,
) -> PyResult<PyAttackResult> {
    let keyspace = KeySpace::seeds(seed_bits, min_len..=max_len).map_err(to_py)?;
    let options = AttackOptions {
        rate,
        sigma,
        p_m,
        expected_false_alarms,
        threads,
        ..AttackOptions::default()
    };
    let config = config_or_default(config);
    let image = stego.inner.clone();
    let report = py
        .allow_threads(|| attack::correlation_attack(&image, &keyspace, &config, &options))
        .map_err(to_py)?;
    let result = &report.result;
    let outcome = serde_json::to_value(result.outcome).expect("outcome serializes");
    let stage = result
        .stage
        .map(|s| serde_json::to_value(s).expect("stage serializes"));
    Ok(PyAttackResult {
        outcome: outcome.as_str().unwrap_or_default().to_owned(),
        recovered: result.recovered.map(pair),
        best_guess: result.best_guess.map(pair),
        survivor_count: result.survivor_count,
        stage: stage.and_then(|s| s.as_str().map(str::to_owned)),
        report_json: report.to_json(),
    })
}

#[pyfunction]
fn hiding_redundancy(r: f64) -> PyResult<f64> {
    theory::hiding_redundancy(r).map_err(to_py)
}

/// `None` when the bound is vacuous.
#[pyfunction]
#[pyo3(signature = (pixels, rate, key_bits = 16.0))]
fn unicity_lower_bound(pixels: usize, rate: f64, key_bits: f64) -> PyResult<Option<f64>> {
    let bound = theory::unicity_lower_bound(&theory::TheoryParams::lsb_replacement(pixels, rate, key_bits))
        .map_err(to_py)?;
    Ok(match bound {
        theory::UnicityBound::Finite(v) => Some(v),
        theory::UnicityBound::Unbounded => None,
    })
}

#[pymodule]
fn stegokey_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AttackInfeasible", m.py().get_type_bound::<AttackInfeasible>())?;
    m.add_class::<PyGrayImage>()?;
    m.add_class::<PyEmbedConfig>()?;
    m.add_class::<PyAttackPlan>()?;
    m.add_class::<PyAttackResult>()?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(keyed_path, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_distortion, m)?)?;
    m.add_function(wrap_pyfunction!(residuals, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_q, m)?)?;
    m.add_function(wrap_pyfunction!(plan_attack, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_attack, m)?)?;
    m.add_function(wrap_pyfunction!(hiding_redundancy, m)?)?;
    m.add_function(wrap_pyfunction!(unicity_lower_bound, m)?)?;
    Ok(())
}
