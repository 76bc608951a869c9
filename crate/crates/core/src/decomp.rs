//! Decoder decomposition: connect latent variables to the coherent
//! structures of the training data.
//!
//! A trained decoder's output lives in the span of the data's POD modes, so
//! projecting it onto those modes yields decoder coefficients, one per mode,
//! that play the role of nonlinear time coefficients. Differentiating each
//! coefficient with respect to each latent variable, normalizing by the
//! latent's standard deviation and averaging the absolute value over the
//! training latents gives the average rate of change: a latent-by-mode
//! matrix that ranks which latent variables drive which modes. Latents can
//! then be kept or zeroed before decoding to filter the output.

use crate::autonet::{decoder_vjp_batch, Network};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pod::PodBasis;
use serde::{Deserialize, Serialize};

/// Time-block size for sensitivity passes; bounds trace memory while keeping
/// the matrix kernels batched.
const SENS_CHUNK: usize = 1024;

/// Latent time series produced by an encoder (one latent per row).
#[derive(Debug, Clone)]
pub struct LatentSeries {
    pub z: Matrix,
    /// Per-latent standard deviation over time (population convention).
    pub sigma: Vec<f64>,
    /// Where the latents came from (dataset/network labels for reports).
    pub provenance: String,
}

impl LatentSeries {
    pub fn new(z: Matrix, provenance: impl Into<String>) -> Self {
        let sigma = (0..z.rows())
            .map(|i| {
                let row = z.row(i);
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64)
                    .sqrt()
            })
            .collect();
        LatentSeries { z, sigma, provenance: provenance.into() }
    }

    /// Encode a dataset with the network's encoder.
    pub fn from_network(net: &Network, data: &Matrix, provenance: impl Into<String>) -> Result<Self> {
        let (z, _) = net.eval(data)?;
        Ok(LatentSeries::new(z, provenance))
    }

    pub fn n_latents(&self) -> usize {
        self.z.rows()
    }

    /// Latents whose series is constant (zero standard deviation); these are
    /// excluded from normalized sensitivities.
    pub fn degenerate(&self) -> Vec<usize> {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Decoder coefficients: the decoder output projected onto the data modes,
/// stored modes x time so that `output ~= modes * coefficients`.
#[derive(Debug, Clone)]
pub struct DecoderCoefficients {
    pub b: Matrix,
}

/// Project a decoded output onto the retained data modes.
///
/// The projection is the plain transpose product used for the data's own
/// time coefficients, so feeding the dataset itself yields exactly those
/// coefficients.
pub fn decoder_coefficients(output: &Matrix, basis: &PodBasis) -> Result<DecoderCoefficients> {
    if output.rows() != basis.modes.rows() {
        return Err(Error::Contract(format!(
            "output has {} rows, basis modes have {}",
            output.rows(),
            basis.modes.rows()
        )));
    }
    Ok(DecoderCoefficients { b: basis.modes.at_b(output) })
}

/// How latent sensitivities are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SensitivityMethod {
    /// Reverse-mode differentiation through the decoder.
    ReverseMode,
    /// Central differences with a per-latent step `dz_rel * sigma(Z_i)`.
    CentralDifference { dz_rel: f64 },
}

impl Default for SensitivityMethod {
    fn default() -> Self {
        SensitivityMethod::CentralDifference { dz_rel: 1e-4 }
    }
}

/// Sensitivities of the decoder coefficients to the latent variables,
/// normalized by each latent's standard deviation.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    /// For each entry of `target_modes`: d(coefficient)/d(latent) over time,
    /// a (n_latents x n_t) matrix. Together these form the full
    /// modes-by-latents-by-time gradient tensor.
    pub dbdz: Vec<Matrix>,
    /// Mode indices (0-based into the basis) the report covers.
    pub target_modes: Vec<usize>,
    /// Average rate of change: epsilon[i][j] = mean_t |dbdz[j][(i, t)]|,
    /// laid out latents x target-modes.
    pub epsilon: Matrix,
    pub method: SensitivityMethod,
    /// The per-latent standard deviations used for normalization.
    pub sigma: Vec<f64>,
    /// Latents excluded because their series is constant.
    pub excluded: Vec<usize>,
}

/// Compute latent sensitivities of the decoder coefficients at every
/// training latent vector. `target_modes` selects basis modes (0-based);
/// `None` covers all retained modes.
pub fn sensitivities(
    net: &Network,
    latents: &LatentSeries,
    basis: &PodBasis,
    method: SensitivityMethod,
    target_modes: Option<&[usize]>,
) -> Result<SensitivityReport> {
    if latents.n_latents() != net.latent_dim {
        return Err(Error::Contract(format!(
            "latent series has {} rows, network expects {}",
            latents.n_latents(),
            net.latent_dim
        )));
    }
    if basis.modes.rows() != net.output_dim() {
        return Err(Error::Contract(format!(
            "basis modes have {} rows, decoder outputs {}",
            basis.modes.rows(),
            net.output_dim()
        )));
    }
    let modes: Vec<usize> = match target_modes {
        Some(m) => {
            if m.is_empty() {
                return Err(Error::Contract("target mode set is empty".into()));
            }
            if let Some(bad) = m.iter().find(|&&j| j >= basis.n_retained()) {
                return Err(Error::Contract(format!(
                    "target mode {bad} out of range (basis retains {})",
                    basis.n_retained()
                )));
            }
            m.to_vec()
        }
        None => (0..basis.n_retained()).collect(),
    };
    let excluded = latents.degenerate();

    let n_z = net.latent_dim;
    let n_t = latents.z.cols();
    let mut dbdz: Vec<Matrix> = modes.iter().map(|_| Matrix::zeros(n_z, n_t)).collect();
    let directions = Matrix::from_fn(basis.modes.rows(), modes.len(), |r, c| {
        basis.modes.get(r, modes[c])
    });

    let mut start = 0usize;
    while start < n_t {
        let stop = (start + SENS_CHUNK).min(n_t);
        let chunk_idx: Vec<usize> = (start..stop).collect();
        let z_chunk = Matrix::from_fn(n_z, chunk_idx.len(), |i, b| latents.z.get(i, chunk_idx[b]));
        match method {
            SensitivityMethod::ReverseMode => {
                let vjps = decoder_vjp_batch(net, &z_chunk, &directions)?;
                for (j, vjp) in vjps.into_iter().enumerate() {
                    for (b, &t) in chunk_idx.iter().enumerate() {
                        for i in 0..n_z {
                            let s = latents.sigma[i];
                            let val = if s == 0.0 { 0.0 } else { vjp.get(i, b) / s };
                            dbdz[j].set(i, t, val);
                        }
                    }
                }
            }
            SensitivityMethod::CentralDifference { dz_rel } => {
                if dz_rel <= 0.0 {
                    return Err(Error::Contract("central-difference step must be positive".into()));
                }
                for i in 0..n_z {
                    let s = latents.sigma[i];
                    if s == 0.0 {
                        continue;
                    }
                    let dz = dz_rel * s;
                    let mut zp = z_chunk.clone();
                    let mut zm = z_chunk.clone();
                    for b in 0..chunk_idx.len() {
                        zp.set(i, b, zp.get(i, b) + dz);
                        zm.set(i, b, zm.get(i, b) - dz);
                    }
                    let fp = net.decode(&zp)?;
                    let fm = net.decode(&zm)?;
                    let mut diff = fp.sub(&fm);
                    diff.scale(1.0 / (2.0 * dz * s));
                    // project the field derivative onto the target modes
                    let proj = directions.at_b(&diff); // modes x chunk
                    for (j, _) in modes.iter().enumerate() {
                        for (b, &t) in chunk_idx.iter().enumerate() {
                            dbdz[j].set(i, t, proj.get(j, b));
                        }
                    }
                }
            }
        }
        start = stop;
    }

    let epsilon = average_from_tensor(&dbdz, n_z, n_t);
    Ok(SensitivityReport { dbdz, target_modes: modes, epsilon, method, sigma: latents.sigma.clone(), excluded })
}

fn average_from_tensor(dbdz: &[Matrix], n_z: usize, n_t: usize) -> Matrix {
    Matrix::from_fn(n_z, dbdz.len(), |i, j| {
        let m = &dbdz[j];
        (0..n_t).map(|t| m.get(i, t).abs()).sum::<f64>() / n_t as f64
    })
}

/// The average rate of change recomputed from a report's gradient tensor
/// (identical to `report.epsilon`; kept as the explicit definition).
pub fn average_rate_of_change(report: &SensitivityReport) -> Matrix {
    let n_t = report.dbdz.first().map(|m| m.cols()).unwrap_or(0);
    average_from_tensor(&report.dbdz, report.sigma.len(), n_t)
}

/// Equivalent energy: variance of a reconstructed field projected onto the
/// data modes, in the same weighted inner product the basis was computed
/// with. Reported absolutely and as a percentage of the data eigenvalues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalentEnergy {
    /// Diagonal entries, one per retained mode.
    pub diag: Vec<f64>,
    /// 100 * diag / data eigenvalue (NaN-free: zero where the data
    /// eigenvalue is zero).
    pub percent_of_data: Vec<f64>,
}

/// Equivalent energy of decoder coefficients `b` (modes x time) against the
/// basis they were computed with. With identity weights this reduces to
/// `diag(B B^T) / (nt - 1)` exactly.
pub fn equivalent_energy(b: &Matrix, basis: &PodBasis) -> Result<EquivalentEnergy> {
    if b.rows() != basis.n_retained() {
        return Err(Error::Contract(format!(
            "coefficients have {} rows, basis retains {} modes",
            b.rows(),
            basis.n_retained()
        )));
    }
    let nt = b.cols();
    if nt < 2 {
        return Err(Error::Contract("equivalent energy needs at least 2 snapshots".into()));
    }
    // T = Phi^T (W Phi B) with W = diag(sqrt(w)); diag(T T^T)/(nt-1)
    let mut yhat = basis.modes.matmul(b);
    let sqrt_w: Vec<f64> = basis.weights.iter().map(|w| w.sqrt()).collect();
    yhat.scale_rows(&sqrt_w);
    let t = basis.modes.at_b(&yhat);
    let diag: Vec<f64> = (0..t.rows())
        .map(|j| t.row(j).iter().map(|v| v * v).sum::<f64>() / (nt as f64 - 1.0))
        .collect();
    let percent_of_data: Vec<f64> = diag
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let lam = basis.eigenvalues.get(j).copied().unwrap_or(0.0);
            if lam > 0.0 {
                100.0 * d / lam
            } else {
                0.0
            }
        })
        .collect();
    Ok(EquivalentEnergy { diag, percent_of_data })
}

/// Per-decomposed-field equivalent energies for a mode-decomposing network:
/// each field is projected onto the basis and its energy reported
/// separately. By linearity the per-field coefficient matrices sum to the
/// coefficients of the summed output.
pub fn equivalent_energy_fields(fields: &[Matrix], basis: &PodBasis) -> Result<Vec<EquivalentEnergy>> {
    fields
        .iter()
        .map(|f| {
            let b = decoder_coefficients(f, basis)?;
            equivalent_energy(&b.b, basis)
        })
        .collect()
}

/// Rank latent variables by their summed average rate of change over a set
/// of target modes. Returns 0-based latent indices, strongest first, ties
/// broken by the lower index.
pub fn rank_latents(report: &SensitivityReport, target_modes: &[usize]) -> Result<Vec<usize>> {
    if target_modes.is_empty() {
        return Err(Error::Contract("target mode set is empty".into()));
    }
    let cols: Vec<usize> = target_modes
        .iter()
        .map(|m| {
            report
                .target_modes
                .iter()
                .position(|tm| tm == m)
                .ok_or_else(|| {
                    Error::Contract(format!("mode {m} is not covered by this sensitivity report"))
                })
        })
        .collect::<Result<_>>()?;
    let n_z = report.epsilon.rows();
    let mut scored: Vec<(usize, f64)> = (0..n_z)
        .map(|i| (i, cols.iter().map(|&c| report.epsilon.get(i, c)).sum()))
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Zero every latent variable not in `keep` and decode the result.
/// Returns the filtered latent matrix and the filtered output.
pub fn filter_latents(net: &Network, z: &Matrix, keep: &[usize]) -> Result<(Matrix, Matrix)> {
    if z.rows() != net.latent_dim {
        return Err(Error::Contract(format!(
            "latent matrix has {} rows, network expects {}",
            z.rows(),
            net.latent_dim
        )));
    }
    if let Some(bad) = keep.iter().find(|&&i| i >= net.latent_dim) {
        return Err(Error::Contract(format!(
            "kept latent {bad} out of range (network has {})",
            net.latent_dim
        )));
    }
    let mut zf = Matrix::zeros(z.rows(), z.cols());
    for &i in keep {
        for t in 0..z.cols() {
            zf.set(i, t, z.get(i, t));
        }
    }
    let yf = net.decode(&zf)?;
    Ok((zf, yf))
}
