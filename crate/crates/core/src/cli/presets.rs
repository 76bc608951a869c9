//! Shipped experiment recipes.
//!
//! Laminar-wake recipes run a reduced feedforward stack on the flattened
//! (downsampled) field; pressure-wake recipes use the 64-sensor feedforward
//! widths with scale-only batch norm and 1.4% dropout, learning rate 0.0022
//! under cosine warm restarts and L2 factor 3e-5. Laminar recipes train with
//! learning rate 0.001 and no regularization or dropout.

use crate::autonet::{Activation, LayerSpec, NetworkConfig, NetworkKind};
use crate::data::{LaminarSurrogateConfig, TurbulentSurrogateConfig};
use crate::error::{Error, Result};
use crate::training::{Schedule, TrainConfig};
use serde::{Deserialize, Serialize};

/// A full experiment description: dataset, architecture and training
/// sections. Commands use the sections they need.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laminar: Option<LaminarSurrogateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turbulent: Option<TurbulentSurrogateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn network(&self) -> Result<&NetworkConfig> {
        self.network
            .as_ref()
            .ok_or_else(|| Error::Config(format!("config '{}' is missing the \"network\" key", self.name)))
    }

    pub fn training(&self) -> Result<&TrainConfig> {
        self.training
            .as_ref()
            .ok_or_else(|| Error::Config(format!("config '{}' is missing the \"training\" key", self.name)))
    }
}

pub const PRESET_NAMES: [&str; 8] = [
    "laminar-ae-nz1",
    "laminar-ae-nz2",
    "laminar-ae-nz3",
    "laminar-mdae-nz2",
    "turbulent-ae-nz2",
    "turbulent-ae-nz3",
    "turbulent-ae-nz28",
    "turbulent-large-decoder",
];

/// Resolve a preset by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    match name {
        "laminar-ae-nz1" => Ok(laminar_ae(name, 1, NetworkKind::Ae)),
        "laminar-ae-nz2" => Ok(laminar_ae(name, 2, NetworkKind::Ae)),
        "laminar-ae-nz3" => Ok(laminar_ae(name, 3, NetworkKind::Ae)),
        "laminar-mdae-nz2" => Ok(laminar_ae(name, 2, NetworkKind::MdAe)),
        "turbulent-ae-nz2" => Ok(turbulent_ae(name, 2)),
        "turbulent-ae-nz3" => Ok(turbulent_ae(name, 3)),
        "turbulent-ae-nz28" => Ok(turbulent_ae(name, 28)),
        "turbulent-large-decoder" => Ok(turbulent_large_decoder(name)),
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// The laminar surrogate used by the shipped autoencoder recipes: a 16x12
/// grid keeps the flattened field small enough for quick feedforward
/// training, and a single shedding pair keeps the field time-odd
/// (u(t + T/2) = -u(t)). Bias-free tanh stacks are odd maps, so they can
/// only carry odd-harmonic content through the latent space; training them
/// on even harmonics forces those harmonics into the latent variables and
/// destroys the circular latent trajectory. The multi-pair surrogate stays
/// the generator default for modal-structure studies.
pub fn laminar_recipe_dataset() -> LaminarSurrogateConfig {
    LaminarSurrogateConfig {
        nx: 16,
        ny: 12,
        n_pairs: 1,
        energies: vec![1.0],
        ..Default::default()
    }
}

/// The pressure surrogate used by the shipped recipes (shorter record than
/// the generator default).
pub fn turbulent_recipe_dataset() -> TurbulentSurrogateConfig {
    TurbulentSurrogateConfig { n_t: 8192, ..Default::default() }
}

/// Reduced feedforward autoencoder for flattened laminar fields.
pub fn laminar_network(input_dim: usize, latent_dim: usize, kind: NetworkKind) -> NetworkConfig {
    let encoder = vec![
        LayerSpec::Dense { width: 64 },
        LayerSpec::Activation,
        LayerSpec::Dense { width: 24 },
        LayerSpec::Activation,
        LayerSpec::Dense { width: latent_dim },
        LayerSpec::Activation,
    ];
    let decoder = vec![
        LayerSpec::Dense { width: 24 },
        LayerSpec::Activation,
        LayerSpec::Dense { width: 64 },
        LayerSpec::Activation,
        LayerSpec::Dense { width: input_dim },
    ];
    NetworkConfig { input_dim, latent_dim, kind, activation: Activation::Tanh, encoder, decoder }
}

pub fn laminar_training() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.001,
        schedule: Schedule::Constant,
        l2_gamma: 0.0,
        dropout: None,
        epochs: 600,
        batch_size: 64,
        seed: 7,
        shuffle: true,
        holdout_fraction: 0.0,
        patience: 200,
    }
}

pub fn turbulent_training() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.0022,
        schedule: Schedule::CosineRestarts {
            first_period: 896,
            t_mul: 2.0,
            m_mul: 1.0,
            min_fraction: 0.0,
        },
        l2_gamma: 3e-5,
        dropout: Some(0.014),
        epochs: 49,
        batch_size: 64,
        seed: 7,
        shuffle: true,
        holdout_fraction: 0.0,
        patience: 100,
    }
}

fn laminar_ae(name: &str, latent_dim: usize, kind: NetworkKind) -> ExperimentConfig {
    let data = laminar_recipe_dataset();
    let input_dim = data.nx * data.ny;
    ExperimentConfig {
        name: name.to_string(),
        laminar: Some(data),
        turbulent: None,
        network: Some(laminar_network(input_dim, latent_dim, kind)),
        training: Some(laminar_training()),
    }
}

fn turbulent_ae(name: &str, latent_dim: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        laminar: None,
        turbulent: Some(turbulent_recipe_dataset()),
        network: Some(NetworkConfig::pressure_autoencoder(latent_dim, 0.014)),
        training: Some(turbulent_training()),
    }
}

fn turbulent_large_decoder(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        laminar: None,
        turbulent: Some(turbulent_recipe_dataset()),
        network: Some(NetworkConfig::large_decoder(2, 0.014)),
        training: Some(turbulent_training()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::build;
    use crate::numerics::SeededRng;

    #[test]
    fn all_presets_resolve_and_build() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert!(cfg.laminar.is_some() ^ cfg.turbulent.is_some(), "{name}: exactly one dataset");
            let net_cfg = cfg.network().unwrap();
            let net = build(net_cfg, &mut SeededRng::new(0)).unwrap();
            assert!(net.param_count() > 0, "{name}");
            cfg.training().unwrap();
        }
        assert!(preset("no-such-preset").is_err());
    }

    #[test]
    fn experiment_config_roundtrips_and_rejects_unknown_keys() {
        let cfg = preset("turbulent-ae-nz2").unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.name, cfg.name);
        let bad = text.replacen('{', "{\"surprise\": 1,", 1);
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn large_decoder_has_more_parameters_than_small() {
        let small = NetworkConfig::pressure_autoencoder(2, 0.014);
        let large = NetworkConfig::large_decoder(2, 0.014);
        let small_net = build(&small, &mut SeededRng::new(0)).unwrap();
        let large_net = build(&large, &mut SeededRng::new(0)).unwrap();
        let small_decoder_params = small_net.decoders[0].param_count();
        assert!(large_net.param_count() > small_decoder_params);
    }
}
