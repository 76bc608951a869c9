//! latentlens: make the latent space of nonlinear autoencoders legible.
//!
//! The pipeline: compute a (weighted) proper orthogonal decomposition of a
//! snapshot dataset, train a bias-free autoencoder on the fluctuating field,
//! project the decoder output onto the POD modes (decoder coefficients),
//! differentiate those coefficients with respect to each latent variable,
//! and average the absolute sensitivities into a ranking matrix. The ranking
//! picks which latent variables carry which coherent structures, so latents
//! can be kept or zeroed to filter the reconstruction.
//!
//! Modules:
//! - [`numerics`]: dense matrices, symmetric eigensolver, Jacobi SVD, seeded RNG
//! - [`pod`]: weighted POD, truncation/reconstruction, energy spectra
//! - [`data`]: synthetic wake surrogates, dataset IO, mean removal
//! - [`autonet`]: bias-free feedforward nets with reverse-mode differentiation
//! - [`training`]: Adam optimization with cosine warm-restart schedules
//! - [`decomp`]: decoder coefficients, sensitivities, ranking, filtering
//! - [`spectral`]: FFT magnitude spectra, Welch PSD, premultiplied PSD
//! - [`plot`]: dependency-free SVG line plots and heatmaps
//! - [`cli`]: the `latentlens` command-line workflows

pub mod autonet;
pub mod cli;
pub mod data;
pub mod decomp;
pub mod error;
pub mod numerics;
pub mod plot;
pub mod pod;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
