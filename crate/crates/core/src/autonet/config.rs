//! Declarative network construction.
//!
//! An architecture config is a UTF-8 JSON document listing the encoder and
//! decoder layer stacks plus the latent dimension and activation. Unknown
//! keys are rejected. Only feedforward layer kinds are supported; the
//! convolutional kinds parse but are refused at build time with an error
//! naming the layer.

use super::{Activation, Layer, Network, Stack};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use serde::{Deserialize, Serialize};

/// A layer in an architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Dense linear map to `width` outputs; never carries a bias.
    Dense { width: usize },
    /// The network activation (tanh unless the config selects identity).
    Activation,
    /// Scale-only batch normalization.
    BatchNorm,
    Dropout { rate: f64 },
    /// Convolutional kinds are recognized but not implemented; experiments
    /// run the feedforward stack on flattened fields.
    Conv2d,
    Maxpooling,
    Upsampling,
    Reshape,
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkKind {
    /// One encoder, one decoder.
    Ae,
    /// One single-input decoder per latent variable.
    MdAe,
    /// Bare decoder trained on externally supplied latents.
    DecoderOnly,
}

/// Architecture section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Width of the encoder input (the flattened field, or the latent
    /// dimension for decoder-only networks).
    pub input_dim: usize,
    pub latent_dim: usize,
    pub kind: NetworkKind,
    pub activation: Activation,
    /// Encoder layers; must end at `latent_dim` outputs. Empty only for
    /// decoder-only networks.
    pub encoder: Vec<LayerSpec>,
    /// Decoder layers, starting from `latent_dim` inputs (1 per decoder for
    /// mode-decomposing networks).
    pub decoder: Vec<LayerSpec>,
}

fn build_stack(
    specs: &[LayerSpec],
    input_width: usize,
    activation: Activation,
    rng: &mut SeededRng,
    what: &str,
) -> Result<Stack> {
    let mut layers = Vec::with_capacity(specs.len());
    let mut width = input_width;
    for (idx, spec) in specs.iter().enumerate() {
        match spec {
            LayerSpec::Dense { width: out } => {
                if *out == 0 {
                    return Err(Error::Config(format!(
                        "{what} layer {idx}: dense layer has zero width"
                    )));
                }
                let bound = (6.0 / (width + out) as f64).sqrt();
                let weight = Matrix::from_fn(*out, width, |_, _| rng.uniform(-bound, bound));
                layers.push(Layer::Dense { weight });
                width = *out;
            }
            LayerSpec::Activation => layers.push(Layer::Activation(activation)),
            LayerSpec::BatchNorm => layers.push(Layer::BatchNorm {
                gamma: vec![1.0; width],
                running_ms: vec![1.0; width],
            }),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::Config(format!(
                        "{what} layer {idx}: dropout rate {rate} outside [0, 1)"
                    )));
                }
                layers.push(Layer::Dropout { rate: *rate });
            }
            other => {
                return Err(Error::Config(format!(
                    "{what} layer {idx}: unsupported layer kind {other:?}; only dense, \
                     activation, batch-norm and dropout are implemented"
                )));
            }
        }
    }
    Ok(Stack::new(layers, input_width))
}

/// Instantiate a network from its architecture config. Weight initialization
/// is uniform in +-sqrt(6 / (fan_in + fan_out)), drawn from `rng` in layer
/// order (encoder first, then decoders), column-major within each weight.
pub fn build(cfg: &NetworkConfig, rng: &mut SeededRng) -> Result<Network> {
    if cfg.latent_dim == 0 {
        return Err(Error::Config("latent_dim must be >= 1".into()));
    }
    if cfg.input_dim == 0 {
        return Err(Error::Config("input_dim must be >= 1".into()));
    }
    let encoder = match cfg.kind {
        NetworkKind::DecoderOnly => {
            if !cfg.encoder.is_empty() {
                return Err(Error::Config(
                    "decoder-only networks must have an empty encoder".into(),
                ));
            }
            if cfg.input_dim != cfg.latent_dim {
                return Err(Error::Config(format!(
                    "decoder-only networks take latents as input: input_dim {} != latent_dim {}",
                    cfg.input_dim, cfg.latent_dim
                )));
            }
            Stack::identity(cfg.latent_dim)
        }
        _ => {
            let enc = build_stack(&cfg.encoder, cfg.input_dim, cfg.activation, rng, "encoder")?;
            if enc.output_width != cfg.latent_dim {
                return Err(Error::Config(format!(
                    "encoder ends at width {}, latent_dim is {}",
                    enc.output_width, cfg.latent_dim
                )));
            }
            enc
        }
    };

    let decoders = match cfg.kind {
        NetworkKind::Ae | NetworkKind::DecoderOnly => {
            vec![build_stack(&cfg.decoder, cfg.latent_dim, cfg.activation, rng, "decoder")?]
        }
        NetworkKind::MdAe => (0..cfg.latent_dim)
            .map(|i| {
                build_stack(&cfg.decoder, 1, cfg.activation, rng, &format!("decoder {i}"))
            })
            .collect::<Result<_>>()?,
    };
    for (i, d) in decoders.iter().enumerate() {
        if d.output_width == 0 {
            return Err(Error::Config(format!("decoder {i} has no output width")));
        }
    }
    if matches!(cfg.kind, NetworkKind::Ae) && decoders[0].output_width != cfg.input_dim {
        return Err(Error::Config(format!(
            "decoder ends at width {}, expected the input width {}",
            decoders[0].output_width, cfg.input_dim
        )));
    }

    Ok(Network { encoder, decoders, latent_dim: cfg.latent_dim, kind: cfg.kind })
}

impl NetworkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The feedforward encoder/decoder widths used for the 64-sensor
    /// pressure experiments: 64 -> 128 -> 256 -> 256 -> 128 -> 64 -> n_z and
    /// its mirror, with scale-only batch norm and dropout after each hidden
    /// dense layer.
    pub fn pressure_autoencoder(latent_dim: usize, dropout: f64) -> Self {
        let hidden = |width: usize| {
            vec![
                LayerSpec::Dense { width },
                LayerSpec::BatchNorm,
                LayerSpec::Activation,
                LayerSpec::Dropout { rate: dropout },
            ]
        };
        let mut encoder = Vec::new();
        for w in [128, 256, 256, 128, 64] {
            encoder.extend(hidden(w));
        }
        encoder.push(LayerSpec::Dense { width: latent_dim });
        encoder.push(LayerSpec::Activation);
        let mut decoder = Vec::new();
        for w in [64, 128, 256, 256, 128] {
            decoder.extend(hidden(w));
        }
        decoder.push(LayerSpec::Dense { width: 64 });
        NetworkConfig {
            input_dim: 64,
            latent_dim,
            kind: NetworkKind::Ae,
            activation: Activation::Tanh,
            encoder,
            decoder,
        }
    }

    /// The enlarged decoder-only network of the decoder-size study:
    /// n_z -> 64 -> 256 -> 256 -> 256 -> 256 -> 64.
    pub fn large_decoder(latent_dim: usize, dropout: f64) -> Self {
        let hidden = |width: usize| {
            vec![
                LayerSpec::Dense { width },
                LayerSpec::BatchNorm,
                LayerSpec::Activation,
                LayerSpec::Dropout { rate: dropout },
            ]
        };
        let mut decoder = Vec::new();
        for w in [64, 256, 256, 256, 256] {
            decoder.extend(hidden(w));
        }
        decoder.push(LayerSpec::Dense { width: 64 });
        NetworkConfig {
            input_dim: latent_dim,
            latent_dim,
            kind: NetworkKind::DecoderOnly,
            activation: Activation::Tanh,
            encoder: Vec::new(),
            decoder,
        }
    }
}
