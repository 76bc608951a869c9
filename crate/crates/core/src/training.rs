//! Parameter optimization: mean-squared-error objective with optional L2
//! weight regularization, Adam updates, and a cosine-with-warm-restarts
//! learning-rate schedule.
//!
//! Training is deterministic given (seed, config, data): batches are
//! shuffled with a stream derived from the run seed, dropout masks come from
//! a second derived stream, and all reductions run in a fixed order.

use crate::autonet::{Network, ParamKind};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use serde::{Deserialize, Serialize};

/// Learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Constant,
    /// Cosine annealing from the peak to `min_fraction * peak` over a
    /// period, then restart with the period scaled by `t_mul` and the peak
    /// by `m_mul`.
    CosineRestarts {
        first_period: usize,
        t_mul: f64,
        m_mul: f64,
        min_fraction: f64,
    },
}

impl Schedule {
    /// A restart schedule with the conventional doubling period.
    pub fn cosine_restarts(first_period: usize) -> Self {
        Schedule::CosineRestarts { first_period, t_mul: 2.0, m_mul: 1.0, min_fraction: 0.0 }
    }
}

/// Learning rate at optimizer step `step` (0-based) for a given base rate.
pub fn lr_at(schedule: &Schedule, base_lr: f64, step: usize) -> f64 {
    match schedule {
        Schedule::Constant => base_lr,
        Schedule::CosineRestarts { first_period, t_mul, m_mul, min_fraction } => {
            let mut period = (*first_period).max(1) as f64;
            let mut peak = base_lr;
            let mut remaining = step as f64;
            while remaining >= period {
                remaining -= period;
                period = (period * t_mul).max(1.0);
                peak *= m_mul;
            }
            let x = remaining / period;
            let decay = (1.0 - min_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos())
                + min_fraction;
            peak * decay
        }
    }
}

/// Mean squared error over all entries of two equally shaped matrices.
pub fn mse(y: &Matrix, yhat: &Matrix) -> Result<f64> {
    if y.rows() != yhat.rows() || y.cols() != yhat.cols() {
        return Err(Error::Contract(format!(
            "mse shape mismatch: {}x{} vs {}x{}",
            y.rows(),
            y.cols(),
            yhat.rows(),
            yhat.cols()
        )));
    }
    let n = (y.rows() * y.cols()) as f64;
    Ok(y.data()
        .iter()
        .zip(yhat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub schedule: Schedule,
    /// L2 regularization factor on dense weights (0 disables).
    pub l2_gamma: f64,
    /// When set, every dropout layer's rate is overridden before training.
    #[serde(default)]
    pub dropout: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Fraction of trailing snapshots held out for validation (0 = none).
    #[serde(default)]
    pub holdout_fraction: f64,
    /// Epochs without improvement before a (non-fatal) warning is recorded.
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_true() -> bool {
    true
}

fn default_patience() -> usize {
    50
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            schedule: Schedule::Constant,
            l2_gamma: 0.0,
            dropout: None,
            epochs: 500,
            batch_size: 64,
            seed: 7,
            shuffle: true,
            holdout_fraction: 0.0,
            patience: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-batch data MSE of each epoch.
    pub loss_curve: Vec<f64>,
    /// MSE over the full training set, evaluation mode, at the end.
    pub final_mse: f64,
    pub holdout_mse: Option<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
    /// Path of the checkpoint this run was saved to, when one was written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

/// Adam with bias correction (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One update over the flat gradient (already including any weight
    /// decay term).
    pub fn step(&mut self, net: &mut Network, flat_grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut offset = 0usize;
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        net.for_each_param_mut(|slice| {
            for (i, p) in slice.iter_mut().enumerate() {
                let g = flat_grad[offset + i];
                let mi = &mut m[offset + i];
                let vi = &mut v[offset + i];
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
            offset += slice.len();
        });
    }
}

/// Train `net` to map `inputs` columns to `targets` columns. For an
/// autoencoder both are the snapshot matrix; for decoder-only retraining the
/// inputs are frozen latents.
///
/// The objective is `mse + l2_gamma * sum ||W||_F^2` over dense weights.
/// Batch-norm scales are not regularized.
pub fn train(
    net: &mut Network,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if inputs.cols() != targets.cols() {
        return Err(Error::Contract(format!(
            "inputs have {} snapshots, targets {}",
            inputs.cols(),
            targets.cols()
        )));
    }
    if inputs.rows() != net.input_dim() || targets.rows() != net.output_dim() {
        return Err(Error::Contract(format!(
            "network maps {} -> {}, data is {} -> {}",
            net.input_dim(),
            net.output_dim(),
            inputs.rows(),
            targets.rows()
        )));
    }
    if cfg.learning_rate <= 0.0 || cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Contract(
            "need learning_rate > 0, epochs >= 1, batch_size >= 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::Contract("holdout_fraction must be in [0, 1)".into()));
    }

    if let Some(rate) = cfg.dropout {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Contract(format!("dropout override {rate} outside [0, 1)")));
        }
        net.set_dropout_rate(rate);
    }

    let start = std::time::Instant::now();
    let nt = inputs.cols();
    let holdout = ((nt as f64) * cfg.holdout_fraction) as usize;
    let n_train = nt - holdout;
    if n_train == 0 {
        return Err(Error::Contract("holdout fraction leaves no training data".into()));
    }

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut shuffle_rng = SeededRng::derive(cfg.seed, "train/shuffle");
    let mut dropout_rng = SeededRng::derive(cfg.seed, "train/dropout");
    let mut adam = Adam::new(net.param_count());
    let layout = net.param_layout();

    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut warnings = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut stale_epochs = 0usize;
    let mut warned_patience = false;
    let mut step = 0usize;
    let out_dim = net.output_dim() as f64;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let x = gather_columns(inputs, chunk);
            let y = if std::ptr::eq(inputs, targets) {
                x.clone()
            } else {
                gather_columns(targets, chunk)
            };
            let pass = net
                .forward(&x, true, Some(&mut dropout_rng))
                .map_err(|e| annotate(e, epoch, batch_idx))?;
            let batch_mse = mse(&y, &pass.output).expect("shapes agree");
            if !batch_mse.is_finite() {
                return Err(Error::Numerical(format!(
                    "NaN loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            epoch_loss += batch_mse;
            n_batches += 1;

            let scale = 2.0 / (out_dim * chunk.len() as f64);
            let mut cot = pass.output.sub(&y);
            cot.scale(scale);
            let (grads, _) = net.backward(&pass, &cot);
            net.absorb_batch_stats(&pass);

            let mut flat = Vec::with_capacity(net.param_count());
            grads.for_each(net, |g| flat.extend_from_slice(g));
            if cfg.l2_gamma > 0.0 {
                let mut offset = 0usize;
                let mut slot = 0usize;
                net.for_each_param(|params| {
                    if layout[slot].0 == ParamKind::DenseWeight {
                        for (i, w) in params.iter().enumerate() {
                            flat[offset + i] += 2.0 * cfg.l2_gamma * w;
                        }
                    }
                    offset += params.len();
                    slot += 1;
                });
            }
            let lr = lr_at(&cfg.schedule, cfg.learning_rate, step);
            adam.step(net, &flat, lr);
            step += 1;
        }
        let mean_loss = epoch_loss / n_batches as f64;
        loss_curve.push(mean_loss);
        if mean_loss < best_loss - 1e-15 {
            best_loss = mean_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience && !warned_patience {
                warnings.push(format!(
                    "loss has not improved for {stale_epochs} epochs (epoch {epoch})"
                ));
                warned_patience = true;
            }
        }
    }

    let train_inputs = gather_columns(inputs, &(0..n_train).collect::<Vec<_>>());
    let train_targets = gather_columns(targets, &(0..n_train).collect::<Vec<_>>());
    let (_, out) = net.eval(&train_inputs)?;
    let final_mse = mse(&train_targets, &out)?;
    let holdout_mse = if holdout > 0 {
        let idx: Vec<usize> = (n_train..nt).collect();
        let hx = gather_columns(inputs, &idx);
        let hy = gather_columns(targets, &idx);
        let (_, hout) = net.eval(&hx)?;
        Some(mse(&hy, &hout)?)
    } else {
        None
    };

    Ok(TrainReport {
        loss_curve,
        final_mse,
        holdout_mse,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        warnings,
        checkpoint: None,
    })
}

fn annotate(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("{msg} (epoch {epoch}, batch {batch})")),
        other => other,
    }
}

fn gather_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), idx.len());
    for (j, &src) in idx.iter().enumerate() {
        out.col_mut(j).copy_from_slice(m.col(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::{build, Activation, LayerSpec, NetworkConfig, NetworkKind};
    use crate::numerics::{orthonormalize_columns, principal_angles};

    #[test]
    fn mse_examples() {
        let z = Matrix::zeros(3, 4);
        assert_eq!(mse(&z, &z).unwrap(), 0.0);
        let ones = Matrix::from_fn(3, 4, |_, _| 1.0);
        assert_eq!(mse(&z, &ones).unwrap(), 1.0);
        let mut rng = SeededRng::new(1);
        let a = Matrix::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
        let b = Matrix::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
        let mut hand = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                hand += (a.get(i, j) - b.get(i, j)).powi(2);
            }
        }
        hand /= 12.0;
        assert!((mse(&a, &b).unwrap() - hand).abs() < 1e-15);
        assert!(mse(&z, &Matrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn lr_schedule_shape() {
        let s = Schedule::CosineRestarts { first_period: 100, t_mul: 2.0, m_mul: 0.8, min_fraction: 0.0 };
        let lr0 = 0.01;
        assert_eq!(lr_at(&s, lr0, 0), lr0);
        let mid = lr_at(&s, lr0, 50);
        assert!((mid - lr0 / 2.0).abs() < 1e-12, "half-period value {mid}");
        // monotone decrease within each period, jump only at restarts
        let mut period_start = 0usize;
        let periods = [(0usize, 100usize), (100, 200), (300, 400)];
        for &(a, b) in &periods {
            let mut prev = f64::INFINITY;
            for step in a..b {
                let lr = lr_at(&s, lr0, step);
                assert!(lr <= prev + 1e-15, "increase inside period starting {period_start}");
                prev = lr;
            }
            period_start = b;
            let _ = period_start;
        }
        // restart boundary jumps up, peak scaled by m_mul
        assert!(lr_at(&s, lr0, 100) > lr_at(&s, lr0, 99));
        assert!((lr_at(&s, lr0, 100) - 0.8 * lr0).abs() < 1e-12);
        assert_eq!(lr_at(&Schedule::Constant, lr0, 1234), lr0);
    }

    fn linear_ae(n: usize, nz: usize, seed: u64) -> (NetworkConfig, Network) {
        let cfg = NetworkConfig {
            input_dim: n,
            latent_dim: nz,
            kind: NetworkKind::Ae,
            activation: Activation::Identity,
            encoder: vec![LayerSpec::Dense { width: nz }],
            decoder: vec![LayerSpec::Dense { width: n }],
        };
        let net = build(&cfg, &mut SeededRng::new(seed)).unwrap();
        (cfg, net)
    }

    fn rank_k_data(n: usize, k: usize, nt: usize, seed: u64) -> (Matrix, Matrix) {
        let mut rng = SeededRng::new(seed);
        let raw = Matrix::from_fn(n, k, |_, _| rng.normal());
        let basis = orthonormalize_columns(&raw, 1e-12);
        let mut coeffs = Matrix::from_fn(k, nt, |_, _| rng.normal());
        for i in 0..k {
            let scale = (k - i) as f64; // distinct energies
            for t in 0..nt {
                coeffs.set(i, t, coeffs.get(i, t) * scale);
            }
        }
        (basis.matmul(&coeffs), basis)
    }

    #[test]
    fn regularized_linear_ae_recovers_pod_subspace() {
        let (q, basis) = rank_k_data(8, 2, 120, 3);
        let (_, mut net) = linear_ae(8, 2, 5);
        let cfg = TrainConfig {
            learning_rate: 0.02,
            epochs: 4000,
            batch_size: 120,
            l2_gamma: 1e-3,
            seed: 11,
            patience: 10_000,
            ..Default::default()
        };
        let report = train(&mut net, &q, &q, &cfg).unwrap();
        assert!(report.final_mse < 1e-3, "final mse {}", report.final_mse);

        // decoder columns span the 2-mode subspace
        let dec = net.decoders[0].dense_weights()[0].clone();
        let angles = principal_angles(&dec, &basis).unwrap();
        let deg = angles.last().unwrap() * 180.0 / std::f64::consts::PI;
        assert!(deg < 1.0, "principal angle {deg} degrees");

        // encoder rows near-orthonormal under the soft constraint
        let enc = net.encoder.dense_weights()[0].clone();
        let wwt = enc.a_bt(&enc);
        let err = wwt.sub(&Matrix::identity(2)).frobenius_norm();
        assert!(err < 0.05, "||W W^T - I||_F = {err}");

        // linear AE cannot beat the POD truncation error
        let grid = crate::pod::GridMeta::Cartesian2d {
            x: (0..8).map(|i| i as f64).collect(),
            y: vec![0.0],
        };
        let mut snap = crate::pod::SnapshotMatrix::new(q.clone(), grid, 1.0).unwrap();
        crate::data::remove_mean(&mut snap);
        let pod = crate::pod::compute_pod(&snap).unwrap();
        let rec = crate::pod::reconstruct(&pod, 2).unwrap();
        let pod_mse = mse(&snap.values, &rec).unwrap();
        assert!(report.final_mse >= pod_mse - 1e-9);
    }

    #[test]
    fn training_is_deterministic() {
        let (q, _) = rank_k_data(6, 2, 50, 9);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 20,
            batch_size: 16,
            dropout: Some(0.1),
            ..Default::default()
        };
        let net_cfg = NetworkConfig {
            input_dim: 6,
            latent_dim: 2,
            kind: NetworkKind::Ae,
            activation: Activation::Tanh,
            encoder: vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::Activation,
                LayerSpec::Dropout { rate: 0.0 },
                LayerSpec::Dense { width: 2 },
                LayerSpec::Activation,
            ],
            decoder: vec![LayerSpec::Dense { width: 6 }],
        };
        let run = |seed| {
            let mut net = build(&net_cfg, &mut SeededRng::new(seed)).unwrap();
            let report = train(&mut net, &q, &q, &cfg).unwrap();
            let mut params = Vec::new();
            net.for_each_param(|s| params.extend(s.iter().flat_map(|v| v.to_le_bytes())));
            (params, report.loss_curve)
        };
        let (p1, c1) = run(42);
        let (p2, c2) = run(42);
        assert_eq!(p1, p2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn final_mse_is_recomputed_on_full_set() {
        let (q, _) = rank_k_data(5, 2, 40, 2);
        let (_, mut net) = linear_ae(5, 2, 1);
        let cfg = TrainConfig { learning_rate: 0.01, epochs: 50, batch_size: 8, ..Default::default() };
        let report = train(&mut net, &q, &q, &cfg).unwrap();
        let (_, out) = net.eval(&q).unwrap();
        let recomputed = mse(&q, &out).unwrap();
        assert!((report.final_mse - recomputed).abs() < 1e-12);
    }

    #[test]
    fn holdout_is_reported() {
        let (q, _) = rank_k_data(5, 2, 50, 8);
        let (_, mut net) = linear_ae(5, 2, 4);
        let cfg = TrainConfig {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 10,
            holdout_fraction: 0.2,
            ..Default::default()
        };
        let report = train(&mut net, &q, &q, &cfg).unwrap();
        assert!(report.holdout_mse.is_some());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let (_, mut net) = linear_ae(5, 2, 4);
        let bad = Matrix::zeros(4, 10);
        let cfg = TrainConfig::default();
        assert!(train(&mut net, &bad, &bad, &cfg).is_err());
    }
}
