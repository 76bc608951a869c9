//! Python bindings: surrogate generation, weighted POD, bias-free
//! autoencoder training, decoder decomposition (sensitivities, ranking,
//! filtering) and spectral diagnostics.
//!
//! Matrices cross the boundary as lists of rows; configs as JSON strings
//! matching the CLI's formats. Indices on the Python side are 0-based.

use latentlens::autonet::{self, build, Network, NetworkConfig};
use latentlens::cli::presets;
use latentlens::data;
use latentlens::decomp;
use latentlens::error::Error;
use latentlens::numerics::{Matrix, SeededRng};
use latentlens::pod;
use latentlens::spectral;
use latentlens::training;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) => PyIOError::new_err(e.to_string()),
        Error::Numerical(_) | Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Contract(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i)).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("matrix needs at least one row"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have unequal lengths"));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// A snapshot dataset: one snapshot per column, with grid metadata,
/// sampling interval and POD weights.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: pod::SnapshotMatrix,
}

#[pymethods]
impl Dataset {
    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn n_snapshots(&self) -> usize {
        self.inner.n_snapshots()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    /// Per-entry variance of the (mean-free) field.
    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    /// Time series at one grid point.
    fn point_series(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.n_points() {
            return Err(PyValueError::new_err(format!("point {index} out of range")));
        }
        Ok(self.inner.values.row(index))
    }

    /// One snapshot (a column of the field).
    fn snapshot(&self, t: usize) -> PyResult<Vec<f64>> {
        if t >= self.inner.n_snapshots() {
            return Err(PyValueError::new_err(format!("snapshot {t} out of range")));
        }
        Ok(self.inner.values.col(t).to_vec())
    }

    /// The full field as a list of rows.
    fn values(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.values)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::io::save(&self.inner, &path).map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Dataset> {
        let mut q = data::io::load(&path).map_err(to_py_err)?;
        data::remove_mean(&mut q);
        Ok(Dataset { inner: q })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} points x {} snapshots, dt={})",
            self.inner.n_points(),
            self.inner.n_snapshots(),
            self.inner.dt
        )
    }
}

/// POD modes, eigenvalues and time coefficients.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Basis {
    inner: pod::PodBasis,
}

#[pymethods]
impl Basis {
    #[getter]
    fn n_retained(&self) -> usize {
        self.inner.n_retained()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    /// Mode shape (0-based).
    fn mode(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.n_retained() {
            return Err(PyValueError::new_err(format!("mode {index} out of range")));
        }
        Ok(self.inner.modes.col(index).to_vec())
    }

    /// Time coefficient series of a mode (0-based).
    fn coefficient(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.n_retained() {
            return Err(PyValueError::new_err(format!("mode {index} out of range")));
        }
        Ok(self.inner.coeffs.row(index))
    }

    /// (percent, cumulative percent) energy per mode.
    fn energy_spectrum(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        pod::energy_spectrum(&self.inner).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("Basis({} retained modes)", self.inner.n_retained())
    }
}

/// A bias-free autoencoder (or bare decoder) with its architecture config.
#[pyclass]
struct Autoencoder {
    net: Network,
    config: NetworkConfig,
}

#[pymethods]
impl Autoencoder {
    /// Build from an architecture config JSON (same schema as the CLI).
    #[new]
    #[pyo3(signature = (network_json, seed = 7))]
    fn new(network_json: &str, seed: u64) -> PyResult<Self> {
        let config = NetworkConfig::from_json(network_json).map_err(to_py_err)?;
        let net = build(&config, &mut SeededRng::derive(seed, "init")).map_err(to_py_err)?;
        Ok(Autoencoder { net, config })
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.net.latent_dim
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.net.param_count()
    }

    /// Train against a dataset; returns the training report as JSON.
    /// `training_json` matches the CLI's training section.
    fn train(&mut self, dataset: &Dataset, training_json: &str) -> PyResult<String> {
        let cfg: training::TrainConfig =
            serde_json::from_str(training_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let report = training::train(&mut self.net, &dataset.inner.values, &dataset.inner.values, &cfg)
            .map_err(to_py_err)?;
        serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Latent series of a dataset, one list per latent variable.
    fn encode(&self, dataset: &Dataset) -> PyResult<Vec<Vec<f64>>> {
        let (z, _) = self.net.eval(&dataset.inner.values).map_err(to_py_err)?;
        Ok(matrix_to_rows(&z))
    }

    /// Decode a latent matrix (one list per latent variable).
    fn decode(&self, latents: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let z = rows_to_matrix(&latents)?;
        let out = self.net.decode(&z).map_err(to_py_err)?;
        Ok(matrix_to_rows(&out))
    }

    /// Reconstruction of the dataset (encode then decode).
    fn reconstruct(&self, dataset: &Dataset) -> PyResult<Vec<Vec<f64>>> {
        let (_, out) = self.net.eval(&dataset.inner.values).map_err(to_py_err)?;
        Ok(matrix_to_rows(&out))
    }

    fn reconstruction_mse(&self, dataset: &Dataset) -> PyResult<f64> {
        let (_, out) = self.net.eval(&dataset.inner.values).map_err(to_py_err)?;
        training::mse(&dataset.inner.values, &out).map_err(to_py_err)
    }

    /// Jacobian of the decoder at one latent point (rows = outputs).
    fn decoder_jacobian(&self, z: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let jac = autonet::decoder_jacobian(&self.net, &z).map_err(to_py_err)?;
        Ok(matrix_to_rows(&jac))
    }

    fn save_checkpoint(&self, path: PathBuf) -> PyResult<()> {
        autonet::save_checkpoint(&self.net, &self.config, &path).map_err(to_py_err)
    }

    fn load_checkpoint(&mut self, path: PathBuf) -> PyResult<()> {
        autonet::load_checkpoint(&mut self.net, &self.config, &path).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Autoencoder({} -> {} -> {}, {} parameters)",
            self.net.input_dim(),
            self.net.latent_dim,
            self.net.output_dim(),
            self.net.param_count()
        )
    }
}

/// Generate the laminar-wake surrogate. `config_json` overrides the
/// defaults; `seed`/`n_t` override the config.
#[pyfunction]
#[pyo3(signature = (config_json = None, seed = None, n_t = None))]
fn generate_laminar(config_json: Option<&str>, seed: Option<u64>, n_t: Option<usize>) -> PyResult<Dataset> {
    let mut cfg: data::LaminarSurrogateConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => Default::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n_t {
        cfg.n_t = n;
    }
    Ok(Dataset { inner: data::generate_laminar(&cfg).map_err(to_py_err)? })
}

/// Generate the turbulent-wake pressure surrogate.
#[pyfunction]
#[pyo3(signature = (config_json = None, seed = None, n_t = None))]
fn generate_turbulent(config_json: Option<&str>, seed: Option<u64>, n_t: Option<usize>) -> PyResult<Dataset> {
    let mut cfg: data::TurbulentSurrogateConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => Default::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n_t {
        cfg.n_t = n;
    }
    Ok(Dataset { inner: data::generate_turbulent(&cfg).map_err(to_py_err)? })
}

/// Weighted POD of a dataset.
#[pyfunction]
fn compute_pod(dataset: &Dataset) -> PyResult<Basis> {
    Ok(Basis { inner: pod::compute_pod(&dataset.inner).map_err(to_py_err)? })
}

/// Rank-n reconstruction from a basis, as a list of rows.
#[pyfunction]
fn reconstruct(basis: &Basis, n_modes: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_to_rows(&pod::reconstruct(&basis.inner, n_modes).map_err(to_py_err)?))
}

/// A shipped experiment recipe as JSON (dataset, network and training
/// sections).
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    let cfg = presets::preset(name).map_err(to_py_err)?;
    serde_json::to_string_pretty(&cfg).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn preset_names() -> Vec<String> {
    presets::PRESET_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Average rate of change of the decoder coefficients with respect to each
/// latent variable (rows = latents, columns = `target_modes`, 0-based).
/// `method` is `"reverse"` or `"central"`.
#[pyfunction]
#[pyo3(signature = (ae, dataset, basis, target_modes = None, method = "reverse", dz_rel = 1e-4))]
fn average_rate_of_change(
    ae: &Autoencoder,
    dataset: &Dataset,
    basis: &Basis,
    target_modes: Option<Vec<usize>>,
    method: &str,
    dz_rel: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let latents = decomp::LatentSeries::from_network(&ae.net, &dataset.inner.values, "python")
        .map_err(to_py_err)?;
    let m = match method {
        "reverse" => decomp::SensitivityMethod::ReverseMode,
        "central" => decomp::SensitivityMethod::CentralDifference { dz_rel },
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let report = decomp::sensitivities(&ae.net, &latents, &basis.inner, m, target_modes.as_deref())
        .map_err(to_py_err)?;
    Ok(matrix_to_rows(&report.epsilon))
}

/// Latent indices (0-based) sorted by their summed average rate of change
/// over `target_modes` columns of `epsilon`.
#[pyfunction]
fn rank_latents(epsilon: Vec<Vec<f64>>, target_columns: Vec<usize>) -> PyResult<Vec<usize>> {
    let eps = rows_to_matrix(&epsilon)?;
    if target_columns.iter().any(|&c| c >= eps.cols()) {
        return Err(PyValueError::new_err("target column out of range"));
    }
    if target_columns.is_empty() {
        return Err(PyValueError::new_err("target column set is empty"));
    }
    let mut scored: Vec<(usize, f64)> = (0..eps.rows())
        .map(|i| (i, target_columns.iter().map(|&c| eps.get(i, c)).sum()))
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Zero all latents except `keep` (0-based) and decode; returns the
/// filtered output as a Dataset on the input's grid.
#[pyfunction]
fn filter_latents(ae: &Autoencoder, dataset: &Dataset, keep: Vec<usize>) -> PyResult<Dataset> {
    let (z, _) = ae.net.eval(&dataset.inner.values).map_err(to_py_err)?;
    let (_, yf) = decomp::filter_latents(&ae.net, &z, &keep).map_err(to_py_err)?;
    let mut snap = pod::SnapshotMatrix::new(yf, dataset.inner.grid.clone(), dataset.inner.dt)
        .map_err(to_py_err)?;
    data::remove_mean(&mut snap);
    Ok(Dataset { inner: snap })
}

/// One-sided FFT magnitude spectrum summed over the given signals;
/// returns (frequencies, magnitudes).
#[pyfunction]
#[pyo3(signature = (signals, dt, normalize_by_std = false))]
fn fft_magnitude(signals: Vec<Vec<f64>>, dt: f64, normalize_by_std: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec = spectral::fft_magnitude(&signals, dt, normalize_by_std).map_err(to_py_err)?;
    Ok((spec.frequencies, spec.values))
}

/// Welch power spectral density (Hann window); returns (frequencies, psd).
#[pyfunction]
#[pyo3(signature = (signal, fs, segment_length, overlap = 0.5))]
fn welch_psd(signal: Vec<f64>, fs: f64, segment_length: usize, overlap: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec = spectral::welch_psd(&signal, fs, segment_length, overlap).map_err(to_py_err)?;
    Ok((spec.frequencies, spec.values))
}

/// Pointwise premultiplied spectrum: frequency times value.
#[pyfunction]
fn premultiply(frequencies: Vec<f64>, values: Vec<f64>) -> PyResult<Vec<f64>> {
    if frequencies.len() != values.len() {
        return Err(PyValueError::new_err("frequency and value lengths differ"));
    }
    Ok(frequencies.iter().zip(&values).map(|(f, v)| f * v).collect())
}

#[pymodule]
fn latentlens_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Basis>()?;
    m.add_class::<Autoencoder>()?;
    m.add_function(wrap_pyfunction!(generate_laminar, m)?)?;
    m.add_function(wrap_pyfunction!(generate_turbulent, m)?)?;
    m.add_function(wrap_pyfunction!(compute_pod, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(average_rate_of_change, m)?)?;
    m.add_function(wrap_pyfunction!(rank_latents, m)?)?;
    m.add_function(wrap_pyfunction!(filter_latents, m)?)?;
    m.add_function(wrap_pyfunction!(fft_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(welch_psd, m)?)?;
    m.add_function(wrap_pyfunction!(premultiply, m)?)?;
    Ok(())
}
