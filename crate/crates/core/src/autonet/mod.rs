//! Bias-free feedforward networks built from declarative configs, with
//! forward evaluation and reverse-mode differentiation for both parameters
//! and inputs.
//!
//! Design constraints baked in everywhere:
//! - no layer carries a bias term, and batch normalization is scale-only
//!   (divides by a root-mean-square statistic, no centering, no shift), so
//!   every network maps zero to zero;
//! - only the two fixed topologies exist: one decoder (standard autoencoder)
//!   or one single-input decoder per latent variable (mode-decomposing
//!   autoencoder), plus the degenerate encoder-less form used to retrain a
//!   decoder on frozen latents;
//! - a built network is immutable during evaluation; all per-pass state
//!   lives in an externally owned trace, so concurrent forward/backward
//!   passes on one network are safe.

mod checkpoint;
mod config;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint};
pub use config::{build, LayerSpec, NetworkConfig, NetworkKind};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use serde::{Deserialize, Serialize};

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// Identity activation turns the net into a linear map; used for the
    /// linear-autoencoder analyses.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// A built layer with its parameters.
#[derive(Debug, Clone)]
pub enum Layer {
    /// `y = W x`, weight stored out x in.
    Dense { weight: Matrix },
    Activation(Activation),
    /// Scale-only normalization `y_i = gamma_i * x_i / sqrt(ms_i + eps)`,
    /// where `ms` is the per-feature mean square (batch statistic while
    /// training, frozen running statistic at evaluation).
    BatchNorm { gamma: Vec<f64>, running_ms: Vec<f64> },
    /// Inverted dropout; active only when a pass is marked as training.
    Dropout { rate: f64 },
}

/// A sequential stack of layers.
#[derive(Debug, Clone)]
pub struct Stack {
    pub layers: Vec<Layer>,
    pub input_width: usize,
    pub output_width: usize,
}

/// Per-layer saved state from one forward pass, consumed by backward.
enum LayerSaved {
    None,
    /// Activation output (derivative is a function of the output).
    Activation(Matrix),
    /// Inverse RMS per feature and, in training mode, the batch mean square.
    BatchNorm { inv_rms: Vec<f64>, batch_ms: Option<Vec<f64>>, training: bool },
    /// Dropout mask including the 1/(1-rate) inflation.
    Dropout(Matrix),
}

/// Recorded forward pass of one stack over one batch.
pub struct StackTrace {
    /// Input to layer k (inputs[0] is the stack input).
    inputs: Vec<Matrix>,
    saved: Vec<LayerSaved>,
    output: Matrix,
}

impl StackTrace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Parameter gradients for one stack, in layer order.
pub struct StackGrads {
    /// One entry per layer: dense weights get a matrix, batch norm a vector.
    pub per_layer: Vec<Option<ParamGrad>>,
}

pub enum ParamGrad {
    Dense(Matrix),
    BatchNorm(Vec<f64>),
}

impl Stack {
    fn new(layers: Vec<Layer>, input_width: usize) -> Self {
        let mut w = input_width;
        for layer in &layers {
            if let Layer::Dense { weight } = layer {
                w = weight.rows();
            }
        }
        Stack { layers, input_width, output_width: w }
    }

    /// Identity stack (no layers); used as the encoder of decoder-only nets.
    fn identity(width: usize) -> Self {
        Stack { layers: Vec::new(), input_width: width, output_width: width }
    }

    pub fn forward(&self, x: &Matrix, training: bool, rng: Option<&mut SeededRng>) -> Result<StackTrace> {
        if x.rows() != self.input_width {
            return Err(Error::Contract(format!(
                "stack expects input width {}, got {}",
                self.input_width,
                x.rows()
            )));
        }
        let batch = x.cols();
        let mut rng = rng;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            inputs.push(current.clone());
            let input = &inputs[idx];
            match layer {
                Layer::Dense { weight } => {
                    current = weight.matmul(input);
                    saved.push(LayerSaved::None);
                }
                Layer::Activation(act) => {
                    let mut out = input.clone();
                    for v in out.data_mut() {
                        *v = act.apply(*v);
                    }
                    current = out.clone();
                    saved.push(LayerSaved::Activation(out));
                }
                Layer::BatchNorm { gamma, running_ms } => {
                    let width = input.rows();
                    let ms: Vec<f64> = if training {
                        let mut acc = vec![0.0; width];
                        for b in 0..batch {
                            for (a, v) in acc.iter_mut().zip(input.col(b)) {
                                *a += v * v;
                            }
                        }
                        acc.iter().map(|a| a / batch as f64).collect()
                    } else {
                        running_ms.clone()
                    };
                    let inv_rms: Vec<f64> = ms.iter().map(|m| 1.0 / (m + BN_EPS).sqrt()).collect();
                    let mut out = Matrix::zeros(width, batch);
                    for b in 0..batch {
                        let src = input.col(b);
                        let dst = out.col_mut(b);
                        for i in 0..width {
                            dst[i] = gamma[i] * src[i] * inv_rms[i];
                        }
                    }
                    current = out;
                    saved.push(LayerSaved::BatchNorm {
                        inv_rms,
                        batch_ms: if training { Some(ms) } else { None },
                        training,
                    });
                }
                Layer::Dropout { rate } => {
                    if training && *rate > 0.0 {
                        let rng = rng.as_deref_mut().ok_or_else(|| {
                            Error::Contract("training pass with dropout needs an RNG".into())
                        })?;
                        let keep = 1.0 - rate;
                        let mask = Matrix::from_fn(input.rows(), batch, |_, _| {
                            if rng.next_f64() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        });
                        let mut out = input.clone();
                        for (v, m) in out.data_mut().iter_mut().zip(mask.data()) {
                            *v *= m;
                        }
                        current = out;
                        saved.push(LayerSaved::Dropout(mask));
                    } else {
                        current = input.clone();
                        saved.push(LayerSaved::None);
                    }
                }
            }
        }
        if !current.is_finite() {
            return Err(Error::Numerical(
                "non-finite activation: the network has diverged".into(),
            ));
        }
        Ok(StackTrace { inputs, saved, output: current })
    }

    /// Reverse pass: accumulates parameter gradients into `grads` and
    /// returns the cotangent with respect to the stack input.
    pub fn backward(&self, trace: &StackTrace, cotangent: &Matrix, grads: &mut StackGrads) -> Matrix {
        let mut grad = cotangent.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[idx];
            match (layer, &trace.saved[idx]) {
                (Layer::Dense { weight }, _) => {
                    let dw = grad.a_bt(input);
                    match &mut grads.per_layer[idx] {
                        Some(ParamGrad::Dense(acc)) => acc.add_assign(&dw),
                        slot => *slot = Some(ParamGrad::Dense(dw)),
                    }
                    grad = weight.at_b(&grad);
                }
                (Layer::Activation(act), LayerSaved::Activation(out)) => {
                    for (g, y) in grad.data_mut().iter_mut().zip(out.data()) {
                        *g *= act.derivative_from_output(*y);
                    }
                }
                (Layer::BatchNorm { gamma, .. }, LayerSaved::BatchNorm { inv_rms, training, .. }) => {
                    let width = input.rows();
                    let batch = input.cols();
                    // s_i = sum_b dy_ib x_ib feeds both dgamma and, in
                    // training mode, the path through the batch statistic.
                    let mut s = vec![0.0; width];
                    for b in 0..batch {
                        let x = input.col(b);
                        let dy = grad.col(b);
                        for i in 0..width {
                            s[i] += dy[i] * x[i];
                        }
                    }
                    let dgamma: Vec<f64> = s.iter().zip(inv_rms).map(|(si, r)| si * r).collect();
                    match &mut grads.per_layer[idx] {
                        Some(ParamGrad::BatchNorm(acc)) => {
                            for (a, d) in acc.iter_mut().zip(&dgamma) {
                                *a += d;
                            }
                        }
                        slot => *slot = Some(ParamGrad::BatchNorm(dgamma)),
                    }
                    let mut out = Matrix::zeros(width, batch);
                    for b in 0..batch {
                        let x = input.col(b);
                        let dy = grad.col(b);
                        let dst = out.col_mut(b);
                        for i in 0..width {
                            let r = inv_rms[i];
                            let direct = gamma[i] * r * dy[i];
                            dst[i] = if *training {
                                direct - gamma[i] * r * r * r * x[i] * s[i] / batch as f64
                            } else {
                                direct
                            };
                        }
                    }
                    grad = out;
                }
                (Layer::Dropout { .. }, LayerSaved::Dropout(mask)) => {
                    for (g, m) in grad.data_mut().iter_mut().zip(mask.data()) {
                        *g *= m;
                    }
                }
                (Layer::Dropout { .. }, LayerSaved::None) => {}
                _ => unreachable!("trace out of sync with stack"),
            }
        }
        grad
    }

    /// Update batch-norm running statistics from a training-mode trace.
    pub fn absorb_batch_stats(&mut self, trace: &StackTrace) {
        for (layer, saved) in self.layers.iter_mut().zip(&trace.saved) {
            if let (Layer::BatchNorm { running_ms, .. }, LayerSaved::BatchNorm { batch_ms: Some(ms), .. }) =
                (layer, saved)
            {
                for (r, m) in running_ms.iter_mut().zip(ms) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
                }
            }
        }
    }

    pub fn zero_grads(&self) -> StackGrads {
        StackGrads { per_layer: self.layers.iter().map(|_| None).collect() }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weight } => weight.rows() * weight.cols(),
                Layer::BatchNorm { gamma, .. } => gamma.len(),
                _ => 0,
            })
            .sum()
    }

    /// Visit every parameter slice in a fixed, documented order (layer
    /// order; dense weights column-major, then batch-norm scales).
    pub fn for_each_param(&self, mut f: impl FnMut(&[f64])) {
        for layer in &self.layers {
            match layer {
                Layer::Dense { weight } => f(weight.data()),
                Layer::BatchNorm { gamma, .. } => f(gamma),
                _ => {}
            }
        }
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { weight } => f(weight.data_mut()),
                Layer::BatchNorm { gamma, .. } => f(gamma),
                _ => {}
            }
        }
    }

    /// Dense weight matrices in layer order (the linear-autoencoder
    /// analyses inspect these).
    pub fn dense_weights(&self) -> Vec<&Matrix> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense { weight } => Some(weight),
                _ => None,
            })
            .collect()
    }
}

/// An autoencoder: encoder plus one decoder (standard) or one decoder per
/// latent variable (mode-decomposing), or a bare decoder trained on frozen
/// latents.
#[derive(Debug, Clone)]
pub struct Network {
    pub encoder: Stack,
    pub decoders: Vec<Stack>,
    pub latent_dim: usize,
    pub kind: NetworkKind,
}

/// Result of a full forward pass.
pub struct ForwardPass {
    /// Latent matrix (latent_dim x batch).
    pub latents: Matrix,
    /// Network output (field_dim x batch).
    pub output: Matrix,
    /// Per-decoder decomposed fields, for mode-decomposing networks.
    pub fields: Option<Vec<Matrix>>,
    pub(crate) encoder_trace: StackTrace,
    pub(crate) decoder_traces: Vec<StackTrace>,
}

impl Network {
    pub fn input_dim(&self) -> usize {
        self.encoder.input_width
    }

    pub fn output_dim(&self) -> usize {
        self.decoders[0].output_width
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoders.iter().map(Stack::param_count).sum::<usize>()
    }

    pub fn for_each_param(&self, mut f: impl FnMut(&[f64])) {
        self.encoder.for_each_param(&mut f);
        for d in &self.decoders {
            d.for_each_param(&mut f);
        }
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        self.encoder.for_each_param_mut(&mut f);
        for d in &mut self.decoders {
            d.for_each_param_mut(&mut f);
        }
    }

    /// Forward pass over a batch (one sample per column). `training` enables
    /// dropout and batch statistics; it then requires an RNG when any
    /// dropout layer has a positive rate.
    pub fn forward(&self, x: &Matrix, training: bool, mut rng: Option<&mut SeededRng>) -> Result<ForwardPass> {
        let encoder_trace = self.encoder.forward(x, training, rng.as_deref_mut())?;
        let latents = encoder_trace.output.clone();
        let mut decoder_traces = Vec::with_capacity(self.decoders.len());
        let (output, fields) = match self.kind {
            NetworkKind::Ae | NetworkKind::DecoderOnly => {
                let t = self.decoders[0].forward(&latents, training, rng.as_deref_mut())?;
                let out = t.output.clone();
                decoder_traces.push(t);
                (out, None)
            }
            NetworkKind::MdAe => {
                let mut fields = Vec::with_capacity(self.decoders.len());
                let mut sum: Option<Matrix> = None;
                for (i, dec) in self.decoders.iter().enumerate() {
                    let zi = Matrix::from_fn(1, latents.cols(), |_, b| latents.get(i, b));
                    let t = dec.forward(&zi, training, rng.as_deref_mut())?;
                    match &mut sum {
                        Some(s) => s.add_assign(&t.output),
                        None => sum = Some(t.output.clone()),
                    }
                    fields.push(t.output.clone());
                    decoder_traces.push(t);
                }
                (sum.expect("at least one decoder"), Some(fields))
            }
        };
        Ok(ForwardPass { latents, output, fields, encoder_trace, decoder_traces })
    }

    /// Evaluation-mode forward returning just latents and output.
    pub fn eval(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let pass = self.forward(x, false, None)?;
        Ok((pass.latents, pass.output))
    }

    /// Decode a latent batch without touching the encoder.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.rows() != self.latent_dim {
            return Err(Error::Contract(format!(
                "expected {} latent rows, got {}",
                self.latent_dim,
                z.rows()
            )));
        }
        match self.kind {
            NetworkKind::Ae | NetworkKind::DecoderOnly => {
                Ok(self.decoders[0].forward(z, false, None)?.output)
            }
            NetworkKind::MdAe => {
                let mut sum: Option<Matrix> = None;
                for (i, dec) in self.decoders.iter().enumerate() {
                    let zi = Matrix::from_fn(1, z.cols(), |_, b| z.get(i, b));
                    let out = dec.forward(&zi, false, None)?.output;
                    match &mut sum {
                        Some(s) => s.add_assign(&out),
                        None => sum = Some(out),
                    }
                }
                Ok(sum.expect("at least one decoder"))
            }
        }
    }

    /// Per-decoder decomposed fields at a latent batch (mode-decomposing
    /// networks; a standard decoder returns a single field).
    pub fn decode_fields(&self, z: &Matrix) -> Result<Vec<Matrix>> {
        match self.kind {
            NetworkKind::Ae | NetworkKind::DecoderOnly => Ok(vec![self.decode(z)?]),
            NetworkKind::MdAe => {
                let mut fields = Vec::with_capacity(self.decoders.len());
                for (i, dec) in self.decoders.iter().enumerate() {
                    let zi = Matrix::from_fn(1, z.cols(), |_, b| z.get(i, b));
                    fields.push(dec.forward(&zi, false, None)?.output);
                }
                Ok(fields)
            }
        }
    }

    /// Gradients of a scalar loss with respect to all parameters and the
    /// input batch, given the cotangent dL/d(output).
    pub fn backward(
        &self,
        pass: &ForwardPass,
        output_cotangent: &Matrix,
    ) -> (NetworkGrads, Matrix) {
        let mut grads = NetworkGrads {
            encoder: self.encoder.zero_grads(),
            decoders: self.decoders.iter().map(Stack::zero_grads).collect(),
        };
        let latent_grad = match self.kind {
            NetworkKind::Ae | NetworkKind::DecoderOnly => self.decoders[0].backward(
                &pass.decoder_traces[0],
                output_cotangent,
                &mut grads.decoders[0],
            ),
            NetworkKind::MdAe => {
                let batch = output_cotangent.cols();
                let mut zgrad = Matrix::zeros(self.latent_dim, batch);
                for (i, dec) in self.decoders.iter().enumerate() {
                    let gi = dec.backward(
                        &pass.decoder_traces[i],
                        output_cotangent,
                        &mut grads.decoders[i],
                    );
                    for b in 0..batch {
                        zgrad.set(i, b, gi.get(0, b));
                    }
                }
                zgrad
            }
        };
        let input_grad = self
            .encoder
            .backward(&pass.encoder_trace, &latent_grad, &mut grads.encoder);
        (grads, input_grad)
    }

    /// Fold the batch statistics of a training-mode pass into the running
    /// batch-norm statistics.
    pub fn absorb_batch_stats(&mut self, pass: &ForwardPass) {
        self.encoder.absorb_batch_stats(&pass.encoder_trace);
        for (dec, trace) in self.decoders.iter_mut().zip(&pass.decoder_traces) {
            dec.absorb_batch_stats(trace);
        }
    }
}

/// What a parameter slice is, for optimizers that treat weight matrices and
/// normalization scales differently (weight decay applies to dense only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    DenseWeight,
    BatchNormScale,
}

impl Network {
    /// Kinds and lengths of the parameter slices, in `for_each_param` order.
    pub fn param_layout(&self) -> Vec<(ParamKind, usize)> {
        let mut layout = Vec::new();
        let mut visit = |s: &Stack| {
            for layer in &s.layers {
                match layer {
                    Layer::Dense { weight } => {
                        layout.push((ParamKind::DenseWeight, weight.rows() * weight.cols()))
                    }
                    Layer::BatchNorm { gamma, .. } => {
                        layout.push((ParamKind::BatchNormScale, gamma.len()))
                    }
                    _ => {}
                }
            }
        };
        visit(&self.encoder);
        for d in &self.decoders {
            visit(d);
        }
        layout
    }

    /// Override the rate of every dropout layer.
    pub fn set_dropout_rate(&mut self, rate: f64) {
        let visit = |s: &mut Stack| {
            for layer in &mut s.layers {
                if let Layer::Dropout { rate: r } = layer {
                    *r = rate;
                }
            }
        };
        visit(&mut self.encoder);
        for d in &mut self.decoders {
            visit(d);
        }
    }
}

/// Parameter gradients for a whole network, mirroring its stack layout.
pub struct NetworkGrads {
    pub encoder: StackGrads,
    pub decoders: Vec<StackGrads>,
}

impl NetworkGrads {
    /// Visit gradient slices in the same order as `Network::for_each_param`.
    /// Layers without parameters in this batch contribute zeros.
    pub fn for_each(&self, net: &Network, mut f: impl FnMut(&[f64])) {
        fn stack(grads: &StackGrads, s: &Stack, f: &mut impl FnMut(&[f64])) {
            for (layer, g) in s.layers.iter().zip(&grads.per_layer) {
                match (layer, g) {
                    (Layer::Dense { .. }, Some(ParamGrad::Dense(m))) => f(m.data()),
                    (Layer::Dense { weight }, None) => {
                        f(&vec![0.0; weight.rows() * weight.cols()])
                    }
                    (Layer::BatchNorm { .. }, Some(ParamGrad::BatchNorm(v))) => f(v),
                    (Layer::BatchNorm { gamma, .. }, None) => f(&vec![0.0; gamma.len()]),
                    _ => {}
                }
            }
        }
        stack(&self.encoder, &net.encoder, &mut f);
        for (g, d) in self.decoders.iter().zip(&net.decoders) {
            stack(g, d, &mut f);
        }
    }
}

/// Jacobian of the decoder output with respect to the latent vector at one
/// latent point, by reverse-mode passes (field_dim x latent_dim).
pub fn decoder_jacobian(net: &Network, z: &[f64]) -> Result<Matrix> {
    if z.len() != net.latent_dim {
        return Err(Error::Contract(format!(
            "latent point has {} entries, network expects {}",
            z.len(),
            net.latent_dim
        )));
    }
    let n_out = net.output_dim();
    match net.kind {
        NetworkKind::Ae | NetworkKind::DecoderOnly => {
            let dec = &net.decoders[0];
            // Replicate the point across a batch and seed with the identity:
            // one batched reverse pass yields every row of the Jacobian.
            let zb = Matrix::from_fn(net.latent_dim, n_out, |i, _| z[i]);
            let trace = dec.forward(&zb, false, None)?;
            let identity = Matrix::identity(n_out);
            let mut grads = dec.zero_grads();
            let jt = dec.backward(&trace, &identity, &mut grads); // latent_dim x n_out
            Ok(jt.transpose())
        }
        NetworkKind::MdAe => {
            let mut jac = Matrix::zeros(n_out, net.latent_dim);
            for (i, dec) in net.decoders.iter().enumerate() {
                let zb = Matrix::from_fn(1, n_out, |_, _| z[i]);
                let trace = dec.forward(&zb, false, None)?;
                let identity = Matrix::identity(n_out);
                let mut grads = dec.zero_grads();
                let jt = dec.backward(&trace, &identity, &mut grads); // 1 x n_out
                for row in 0..n_out {
                    jac.set(row, i, jt.get(0, row));
                }
            }
            Ok(jac)
        }
    }
}

/// Batched vector-Jacobian products of the decoder: project `dF/dZ` onto a
/// set of output directions, at every column of a latent batch, one reverse
/// pass per direction. Returns, for direction `d`, a (latent_dim x batch)
/// matrix of `d^T dF/dZ` evaluated at each column.
pub fn decoder_vjp_batch(net: &Network, z: &Matrix, directions: &Matrix) -> Result<Vec<Matrix>> {
    if z.rows() != net.latent_dim {
        return Err(Error::Contract(format!(
            "latent batch has {} rows, network expects {}",
            z.rows(),
            net.latent_dim
        )));
    }
    if directions.rows() != net.output_dim() {
        return Err(Error::Contract(format!(
            "directions have {} rows, decoder outputs {}",
            directions.rows(),
            net.output_dim()
        )));
    }
    let batch = z.cols();
    let mut results = Vec::with_capacity(directions.cols());
    match net.kind {
        NetworkKind::Ae | NetworkKind::DecoderOnly => {
            let dec = &net.decoders[0];
            let trace = dec.forward(z, false, None)?;
            for d in 0..directions.cols() {
                let cotangent = Matrix::from_fn(net.output_dim(), batch, |i, _| directions.get(i, d));
                let mut grads = dec.zero_grads();
                results.push(dec.backward(&trace, &cotangent, &mut grads));
            }
        }
        NetworkKind::MdAe => {
            let traces: Vec<StackTrace> = net
                .decoders
                .iter()
                .enumerate()
                .map(|(i, dec)| {
                    let zi = Matrix::from_fn(1, batch, |_, b| z.get(i, b));
                    dec.forward(&zi, false, None)
                })
                .collect::<Result<_>>()?;
            for d in 0..directions.cols() {
                let cotangent = Matrix::from_fn(net.output_dim(), batch, |i, _| directions.get(i, d));
                let mut out = Matrix::zeros(net.latent_dim, batch);
                for (i, dec) in net.decoders.iter().enumerate() {
                    let mut grads = dec.zero_grads();
                    let gi = dec.backward(&traces[i], &cotangent, &mut grads);
                    for b in 0..batch {
                        out.set(i, b, gi.get(0, b));
                    }
                }
                results.push(out);
            }
        }
    }
    Ok(results)
}
