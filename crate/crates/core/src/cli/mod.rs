//! The `latentlens` command line: reproducible experiment workflows that
//! chain dataset generation, POD, training, decoder decomposition, latent
//! ranking/filtering and spectral diagnostics, each emitting artifacts plus
//! a run manifest.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data-format error,
//! 4 numerical failure.

pub mod manifest;
pub mod presets;

use crate::autonet::{self, build, NetworkConfig, NetworkKind};
use crate::data::{self, io, LaminarSurrogateConfig, TurbulentSurrogateConfig};
use crate::decomp::{self, LatentSeries, SensitivityMethod};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::plot;
use crate::pod::{self, PodBasis, SnapshotMatrix};
use crate::spectral;
use crate::training;
use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::RunManifest;
use presets::ExperimentConfig;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "latentlens", version, about = "Decoder decomposition toolkit: rank and filter autoencoder latent variables by the flow structures they represent")]
pub struct Cli {
    /// Worker threads (default: LATENTLENS_THREADS or 1). Recorded in
    /// manifests; the numerical kernels in this build are single-threaded.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic surrogate dataset.
    Generate(GenerateArgs),
    /// Weighted POD of a dataset: modes, energies, time coefficients.
    Pod(PodArgs),
    /// Train an autoencoder (or a decoder on frozen latents).
    Train(TrainArgs),
    /// Decoder decomposition: coefficients, sensitivities, average rate of change.
    Decompose(DecomposeArgs),
    /// Rank latent variables by their contribution to target modes.
    Rank(RankArgs),
    /// Zero all but the kept latent variables and decode.
    Filter(FilterArgs),
    /// FFT magnitude spectrum or Welch PSD of dataset rows.
    Spectrum(SpectrumArgs),
    /// Render exported CSVs as SVG line plots or heatmaps.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurrogateKind {
    Laminar,
    Turbulent,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub kind: SurrogateKind,
    /// Output dataset path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Named preset supplying the dataset section.
    #[arg(short, long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// JSON experiment config supplying the dataset section.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the snapshot count.
    #[arg(long)]
    pub nt: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PodArgs {
    /// Dataset (.snap) or CSV of time series.
    pub input: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// How many leading modes to export as CSV (all retained if omitted).
    #[arg(long)]
    pub modes: Option<usize>,
    /// CSV orientation, for CSV inputs.
    #[arg(long, value_enum, default_value = "rows=space")]
    pub layout: LayoutArg,
    /// CSV input has a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(short, long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Frozen latent series (CSV, one latent per row) for decoder-only runs.
    #[arg(long)]
    pub latents: Option<PathBuf>,
    /// Scale the field to unit variance before training.
    #[arg(long)]
    pub normalize: bool,
    // -- TrainConfig overrides, one flag per field --
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2_gamma: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    #[arg(long)]
    pub no_shuffle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Reverse,
    Central,
    Both,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub input: PathBuf,
    /// network.json written by `train`.
    #[arg(long)]
    pub network: PathBuf,
    /// checkpoint.aewts written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// basis.pod written by `pod`.
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "reverse")]
    pub method: MethodArg,
    /// Relative central-difference step (times each latent's std).
    #[arg(long, default_value_t = 1e-4)]
    pub dz_rel: f64,
    /// Target modes, 1-based, comma separated (all retained if omitted).
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<usize>>,
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// epsilon.csv written by `decompose`.
    #[arg(long)]
    pub epsilon: PathBuf,
    /// Target modes, 1-based.
    #[arg(long, value_delimiter = ',', required = true)]
    pub target_modes: Vec<usize>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Keep only the leading entries of the ranking.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: RankFormat,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Latents to keep: `1,5,7` (1-based) or `topK`.
    #[arg(long)]
    pub keep: String,
    /// epsilon.csv, required with `--keep topK`.
    #[arg(long)]
    pub epsilon: Option<PathBuf>,
    /// Target modes for `--keep topK`, 1-based.
    #[arg(long, value_delimiter = ',')]
    pub target_modes: Option<Vec<usize>>,
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpectrumMethod {
    Fft,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    #[value(name = "rows=space")]
    RowsAreSpace,
    #[value(name = "rows=time")]
    RowsAreTime,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Dataset (.snap) or CSV of time series.
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "fft")]
    pub method: SpectrumMethod,
    /// Signals to use, 1-based row indices (all rows if omitted).
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    /// Welch segment length.
    #[arg(long, default_value_t = 1024)]
    pub segment: usize,
    /// Welch overlap fraction.
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Multiply the spectrum by frequency (premultiplied PSD).
    #[arg(long)]
    pub premultiply: bool,
    /// Divide each signal by its standard deviation first (FFT only).
    #[arg(long)]
    pub normalize_std: bool,
    /// CSV orientation, for CSV inputs.
    #[arg(long, value_enum, default_value = "rows=space")]
    pub layout: LayoutArg,
    /// CSV input has a header row.
    #[arg(long)]
    pub header: bool,
    /// Sampling interval for CSV inputs (datasets carry their own).
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Line,
    Heatmap,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV input.
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Input CSV has a header row.
    #[arg(long)]
    pub header: bool,
    /// Line plots: use the first column as the x axis.
    #[arg(long)]
    pub x_first_column: bool,
    /// Line plots: log-scaled x axis.
    #[arg(long)]
    pub log_x: bool,
    /// Heatmaps: reshape each column to an (nx, ny) panel.
    #[arg(long, num_args = 2)]
    pub grid: Option<Vec<usize>>,
    #[arg(long, default_value = "")]
    pub title: String,
}

/// Resolve the worker thread count: flag, then LATENTLENS_THREADS, then 1.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("LATENTLENS_THREADS") {
            Ok(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("LATENTLENS_THREADS={s} is not a number")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(Error::Config("thread count must be >= 1".into()));
    }
    Ok(n)
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    let threads = resolve_threads(cli.threads)?;
    match cli.command {
        Command::Generate(args) => cmd_generate(args, argv, threads),
        Command::Pod(args) => cmd_pod(args, argv, threads),
        Command::Train(args) => cmd_train(args, argv, threads),
        Command::Decompose(args) => cmd_decompose(args, argv, threads),
        Command::Rank(args) => cmd_rank(args, argv, threads),
        Command::Filter(args) => cmd_filter(args, argv, threads),
        Command::Spectrum(args) => cmd_spectrum(args, argv, threads),
        Command::Plot(args) => cmd_plot(args, argv, threads),
    }
}

fn load_experiment(preset: &Option<String>, config: &Option<PathBuf>) -> Result<Option<ExperimentConfig>> {
    if let Some(name) = preset {
        return Ok(Some(presets::preset(name)?));
    }
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)?;
        return Ok(Some(ExperimentConfig::from_json(&text)?));
    }
    Ok(None)
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn prepare_input(path: &Path, normalize: bool) -> Result<SnapshotMatrix> {
    let mut q = io::load(path)?;
    data::remove_mean(&mut q);
    if normalize {
        data::normalize_std(&mut q);
    }
    Ok(q)
}

fn cmd_generate(args: GenerateArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    let experiment = load_experiment(&args.preset, &args.config)?;
    let (q, config_echo, seed) = match args.kind {
        SurrogateKind::Laminar => {
            let mut cfg: LaminarSurrogateConfig = match &experiment {
                Some(e) => e
                    .laminar
                    .clone()
                    .ok_or_else(|| Error::Config(format!("config '{}' is missing the \"laminar\" key", e.name)))?,
                None => LaminarSurrogateConfig::default(),
            };
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(nt) = args.nt {
                cfg.n_t = nt;
            }
            (data::generate_laminar(&cfg)?, serde_json::to_value(&cfg)?, cfg.seed)
        }
        SurrogateKind::Turbulent => {
            let mut cfg: TurbulentSurrogateConfig = match &experiment {
                Some(e) => e
                    .turbulent
                    .clone()
                    .ok_or_else(|| Error::Config(format!("config '{}' is missing the \"turbulent\" key", e.name)))?,
                None => TurbulentSurrogateConfig::default(),
            };
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(nt) = args.nt {
                cfg.n_t = nt;
            }
            (data::generate_turbulent(&cfg)?, serde_json::to_value(&cfg)?, cfg.seed)
        }
    };
    io::save(&q, &args.out)?;
    let mut m = RunManifest::new(argv, config_echo, Some(seed), threads);
    m.record_output(&args.out)?;
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!("wrote {} ({} points x {} snapshots)", args.out.display(), q.n_points(), q.n_snapshots());
    Ok(())
}

fn cmd_pod(args: PodArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    ensure_dir(&args.out)?;
    let q = if args.input.extension().map(|e| e == "csv").unwrap_or(false) {
        let layout = match args.layout {
            LayoutArg::RowsAreSpace => io::CsvLayout::RowsAreSpace,
            LayoutArg::RowsAreTime => io::CsvLayout::RowsAreTime,
        };
        let mut q = io::csv_import(&args.input, layout, args.header)?;
        data::remove_mean(&mut q);
        q
    } else {
        prepare_input(&args.input, false)?
    };
    let basis = pod::compute_pod(&q)?;
    let k = args.modes.unwrap_or(basis.n_retained()).min(basis.n_retained());

    let modes_path = args.out.join("modes.csv");
    {
        let truncated = PodBasis::from_parts(
            basis.modes.take_cols(k),
            basis.eigenvalues.clone(),
            basis.coeffs.take_rows(k),
            basis.weights.clone(),
        );
        io::write_modes_csv(&truncated, &modes_path)?;
    }
    let coeffs_path = args.out.join("coeffs.csv");
    io::write_csv_matrix(&coeffs_path, &basis.coeffs.take_rows(k), None)?;
    let energy_path = args.out.join("energy.csv");
    {
        let (percent, cumulative) = pod::energy_spectrum(&basis)?;
        let mut text = String::from("mode,eigenvalue,percent,cumulative_percent\n");
        for (i, ((p, c), l)) in percent.iter().zip(&cumulative).zip(&basis.eigenvalues).enumerate() {
            text.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", i + 1, l, p, c));
        }
        std::fs::write(&energy_path, text)?;
    }
    let basis_path = args.out.join("basis.pod");
    io::save_basis(&basis, &basis_path)?;

    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"modes_exported": k, "n_retained": basis.n_retained()}),
        None,
        threads,
    );
    m.record_input(&args.input)?;
    for p in [&modes_path, &coeffs_path, &energy_path, &basis_path] {
        m.record_output(p)?;
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!(
        "POD: {} retained modes, leading eigenvalue {:.6e}",
        basis.n_retained(),
        basis.eigenvalues.first().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    ensure_dir(&args.out)?;
    let experiment = load_experiment(&args.preset, &args.config)?
        .ok_or_else(|| Error::Config("train needs --preset or --config".into()))?;
    let net_cfg = experiment.network()?.clone();
    let mut train_cfg = experiment.training()?.clone();
    if let Some(v) = args.seed {
        train_cfg.seed = v;
    }
    if let Some(v) = args.epochs {
        train_cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        train_cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        train_cfg.learning_rate = v;
    }
    if let Some(v) = args.l2_gamma {
        train_cfg.l2_gamma = v;
    }
    if let Some(v) = args.dropout {
        train_cfg.dropout = Some(v);
    }
    if let Some(v) = args.holdout_fraction {
        train_cfg.holdout_fraction = v;
    }
    if args.no_shuffle {
        train_cfg.shuffle = false;
    }

    let q = prepare_input(&args.input, args.normalize)?;
    let mut net = build(&net_cfg, &mut SeededRng::derive(train_cfg.seed, "init"))?;

    let report = match net_cfg.kind {
        NetworkKind::DecoderOnly => {
            let latents_path = args.latents.as_ref().ok_or_else(|| {
                Error::Config("decoder-only training needs --latents <csv>".into())
            })?;
            let z = io::read_csv_matrix(latents_path, false)?;
            if z.rows() != net_cfg.latent_dim {
                return Err(Error::Contract(format!(
                    "latents file has {} rows, network expects {}",
                    z.rows(),
                    net_cfg.latent_dim
                )));
            }
            training::train(&mut net, &z, &q.values, &train_cfg)?
        }
        _ => training::train(&mut net, &q.values, &q.values, &train_cfg)?,
    };

    let network_path = args.out.join("network.json");
    std::fs::write(&network_path, serde_json::to_string_pretty(&net_cfg)?)?;
    let ckpt_path = args.out.join("checkpoint.aewts");
    autonet::save_checkpoint(&net, &net_cfg, &ckpt_path)?;
    let mut report = report;
    report.checkpoint = Some(ckpt_path.display().to_string());
    let report_path = args.out.join("train_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let curve_path = args.out.join("loss_curve.csv");
    {
        let mut text = String::from("epoch,mse\n");
        for (i, l) in report.loss_curve.iter().enumerate() {
            text.push_str(&format!("{},{:.17e}\n", i + 1, l));
        }
        std::fs::write(&curve_path, text)?;
    }
    // encoded latents of the full dataset, one latent per row
    let latents_path = args.out.join("latents.csv");
    {
        let z = match net_cfg.kind {
            NetworkKind::DecoderOnly => {
                io::read_csv_matrix(args.latents.as_ref().unwrap(), false)?
            }
            _ => net.eval(&q.values)?.0,
        };
        io::write_csv_matrix(&latents_path, &z, None)?;
    }

    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"network": net_cfg, "training": train_cfg, "normalize": args.normalize}),
        Some(train_cfg.seed),
        threads,
    );
    m.record_input(&args.input)?;
    if let Some(l) = &args.latents {
        m.record_input(l)?;
    }
    for p in [&network_path, &ckpt_path, &report_path, &curve_path, &latents_path] {
        m.record_output(p)?;
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!(
        "trained {} epochs, final mse {:.6e}{}",
        report.loss_curve.len(),
        report.final_mse,
        report
            .holdout_mse
            .map(|h| format!(", holdout mse {h:.6e}"))
            .unwrap_or_default()
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn load_network(network: &Path, checkpoint: &Path) -> Result<(NetworkConfig, autonet::Network)> {
    let net_cfg = NetworkConfig::from_json(&std::fs::read_to_string(network)?)?;
    let mut net = build(&net_cfg, &mut SeededRng::new(0))?;
    autonet::load_checkpoint(&mut net, &net_cfg, checkpoint)?;
    Ok((net_cfg, net))
}

/// Convert 1-based user mode indices to 0-based, validating the range.
fn to_zero_based(ids: &[usize], what: &str, upper: usize) -> Result<Vec<usize>> {
    ids.iter()
        .map(|&i| {
            if i == 0 || i > upper {
                Err(Error::Contract(format!("{what} index {i} out of range 1..={upper}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

fn cmd_decompose(args: DecomposeArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    ensure_dir(&args.out)?;
    let q = prepare_input(&args.input, args.normalize)?;
    let (net_cfg, net) = load_network(&args.network, &args.checkpoint)?;
    let basis = io::load_basis(&args.basis)?;
    if basis.modes.rows() != q.n_points() {
        return Err(Error::Contract(format!(
            "basis has {} points, dataset has {}",
            basis.modes.rows(),
            q.n_points()
        )));
    }

    let latents = LatentSeries::from_network(&net, &q.values, args.input.display().to_string())?;
    let target_modes = match &args.modes {
        Some(ids) => Some(to_zero_based(ids, "mode", basis.n_retained())?),
        None => None,
    };

    let reverse = SensitivityMethod::ReverseMode;
    let central = SensitivityMethod::CentralDifference { dz_rel: args.dz_rel };
    let (report, gap) = match args.method {
        MethodArg::Reverse => (
            decomp::sensitivities(&net, &latents, &basis, reverse, target_modes.as_deref())?,
            None,
        ),
        MethodArg::Central => (
            decomp::sensitivities(&net, &latents, &basis, central, target_modes.as_deref())?,
            None,
        ),
        MethodArg::Both => {
            let a = decomp::sensitivities(&net, &latents, &basis, reverse, target_modes.as_deref())?;
            let b = decomp::sensitivities(&net, &latents, &basis, central, target_modes.as_deref())?;
            let mut max_gap = 0.0f64;
            for (ma, mb) in a.epsilon.data().iter().zip(b.epsilon.data()) {
                let denom = ma.abs().max(mb.abs()).max(1e-12);
                max_gap = max_gap.max((ma - mb).abs() / denom);
            }
            (a, Some(max_gap))
        }
    };

    // decoder coefficients of the reconstruction + their equivalent energy
    let yhat = net.decode(&latents.z)?;
    let b = decomp::decoder_coefficients(&yhat, &basis)?;
    let energy = decomp::equivalent_energy(&b.b, &basis)?;

    let epsilon_path = args.out.join("epsilon.csv");
    {
        let headers: Vec<String> = report.target_modes.iter().map(|m| format!("mode_{}", m + 1)).collect();
        io::write_csv_matrix(&epsilon_path, &report.epsilon, Some(&headers))?;
    }
    let bcoeffs_path = args.out.join("bcoeffs.csv");
    io::write_csv_matrix(&bcoeffs_path, &b.b, None)?;
    let summary_path = args.out.join("sensitivity_summary.json");
    {
        let all_targets = report.target_modes.clone();
        let ranking = decomp::rank_latents(&report, &all_targets)?;
        let summary = serde_json::json!({
            "method": report.method,
            "dz_rel": args.dz_rel,
            "target_modes": report.target_modes.iter().map(|m| m + 1).collect::<Vec<_>>(),
            "n_latents": latents.n_latents(),
            "excluded_latents": report.excluded.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "dual_method_max_relative_gap": gap,
            "equivalent_energy": energy.diag,
            "equivalent_energy_percent": energy.percent_of_data,
            "latent_sigma": report.sigma,
            "ranking_by_target_modes": ranking.iter().map(|i| i + 1).collect::<Vec<_>>(),
        });
        std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    }

    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"network": net_cfg, "method": report.method, "dz_rel": args.dz_rel}),
        None,
        threads,
    );
    for p in [&args.input, &args.network, &args.checkpoint, &args.basis] {
        m.record_input(p)?;
    }
    for p in [&epsilon_path, &bcoeffs_path, &summary_path] {
        m.record_output(p)?;
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    if let Some(g) = gap {
        println!("dual-method max relative epsilon gap: {g:.3e}");
    }
    println!("wrote {}", epsilon_path.display());
    Ok(())
}

/// Read an epsilon.csv (with its mode_* header) into (epsilon, mode ids 0-based).
fn read_epsilon(path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let text = std::fs::read_to_string(path)?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::Format("epsilon.csv is empty".into()))?;
    let modes: Vec<usize> = header
        .split(',')
        .map(|h| {
            h.trim()
                .strip_prefix("mode_")
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&m| m >= 1)
                .map(|m| m - 1)
                .ok_or_else(|| Error::Format(format!("bad epsilon header field {h:?}")))
        })
        .collect::<Result<_>>()?;
    let epsilon = io::read_csv_matrix(path, true)?;
    if epsilon.cols() != modes.len() {
        return Err(Error::Format("epsilon.csv header does not match its width".into()));
    }
    Ok((epsilon, modes))
}

fn rank_from_epsilon(epsilon: &Matrix, file_modes: &[usize], targets_zero_based: &[usize]) -> Result<Vec<(usize, f64)>> {
    let cols: Vec<usize> = targets_zero_based
        .iter()
        .map(|m| {
            file_modes.iter().position(|fm| fm == m).ok_or_else(|| {
                Error::Contract(format!(
                    "mode {} is not covered by this epsilon file (covered: {})",
                    m + 1,
                    file_modes.iter().map(|f| (f + 1).to_string()).collect::<Vec<_>>().join(",")
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut scored: Vec<(usize, f64)> = (0..epsilon.rows())
        .map(|i| (i, cols.iter().map(|&c| epsilon.get(i, c)).sum()))
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        std::cmp::Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    Ok(scored)
}

fn cmd_rank(args: RankArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    let (epsilon, file_modes) = read_epsilon(&args.epsilon)?;
    let targets = to_zero_based(&args.target_modes, "mode", usize::MAX - 1)?;
    let scored = rank_from_epsilon(&epsilon, &file_modes, &targets)?;
    let top = args.top.unwrap_or(scored.len()).min(scored.len());

    match args.format {
        RankFormat::Json => {
            let value = serde_json::json!({
                "target_modes": args.target_modes,
                "ranking": scored[..top]
                    .iter()
                    .map(|(i, s)| serde_json::json!({"latent": i + 1, "score": s}))
                    .collect::<Vec<_>>(),
            });
            std::fs::write(&args.out, serde_json::to_string_pretty(&value)?)?;
        }
        RankFormat::Csv => {
            let mut text = String::from("latent,score\n");
            for (i, s) in &scored[..top] {
                text.push_str(&format!("{},{:.17e}\n", i + 1, s));
            }
            std::fs::write(&args.out, text)?;
        }
    }
    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"target_modes": args.target_modes, "top": top}),
        None,
        threads,
    );
    m.record_input(&args.epsilon)?;
    m.record_output(&args.out)?;
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    let shown: Vec<String> = scored[..top.min(5)].iter().map(|(i, _)| (i + 1).to_string()).collect();
    println!("top latents for modes {:?}: {}", args.target_modes, shown.join(", "));
    Ok(())
}

fn cmd_filter(args: FilterArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    ensure_dir(&args.out)?;
    let q = prepare_input(&args.input, args.normalize)?;
    let (net_cfg, net) = load_network(&args.network, &args.checkpoint)?;
    let (z, _) = net.eval(&q.values)?;

    let keep: Vec<usize> = if let Some(k) = args.keep.strip_prefix("top") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::Config(format!("bad --keep value {:?}", args.keep)))?;
        let eps_path = args
            .epsilon
            .as_ref()
            .ok_or_else(|| Error::Config("--keep topK needs --epsilon".into()))?;
        let targets = args
            .target_modes
            .as_ref()
            .ok_or_else(|| Error::Config("--keep topK needs --target-modes".into()))?;
        let (epsilon, file_modes) = read_epsilon(eps_path)?;
        let targets = to_zero_based(targets, "mode", usize::MAX - 1)?;
        let scored = rank_from_epsilon(&epsilon, &file_modes, &targets)?;
        scored.iter().take(k).map(|(i, _)| *i).collect()
    } else {
        to_zero_based(
            &args
                .keep
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad latent index {s:?} in --keep")))
                })
                .collect::<Result<Vec<usize>>>()?,
            "latent",
            net.latent_dim,
        )?
    };

    let (zf, yf) = decomp::filter_latents(&net, &z, &keep)?;
    let filtered = SnapshotMatrix::new(yf, q.grid.clone(), q.dt)?;
    let snap_path = args.out.join("filtered.snap");
    io::save(&filtered, &snap_path)?;
    let latents_path = args.out.join("latents_filtered.csv");
    io::write_csv_matrix(&latents_path, &zf, None)?;
    let summary_path = args.out.join("filter_summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "kept_latents": keep.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "latent_dim": net.latent_dim,
        }))?,
    )?;

    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"network": net_cfg, "keep": keep.iter().map(|i| i + 1).collect::<Vec<_>>()}),
        None,
        threads,
    );
    for p in [&args.input, &args.network, &args.checkpoint] {
        m.record_input(p)?;
    }
    if let Some(e) = &args.epsilon {
        m.record_input(e)?;
    }
    for p in [&snap_path, &latents_path, &summary_path] {
        m.record_output(p)?;
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!(
        "kept latents {:?}, wrote {}",
        keep.iter().map(|i| i + 1).collect::<Vec<_>>(),
        snap_path.display()
    );
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    let is_snap = args.input.extension().map(|e| e == "snap").unwrap_or(false);
    let (values, dt) = if is_snap {
        let q = io::load(&args.input)?;
        (q.values.clone(), q.dt)
    } else {
        let layout = match args.layout {
            LayoutArg::RowsAreSpace => io::CsvLayout::RowsAreSpace,
            LayoutArg::RowsAreTime => io::CsvLayout::RowsAreTime,
        };
        let q = io::csv_import(&args.input, layout, args.header)?;
        (q.values.clone(), args.dt.unwrap_or(1.0))
    };
    let rows: Vec<usize> = match &args.rows {
        Some(ids) => to_zero_based(ids, "row", values.rows())?,
        None => (0..values.rows()).collect(),
    };
    let signals: Vec<Vec<f64>> = rows.iter().map(|&i| values.row(i)).collect();

    let spectrum = match args.method {
        SpectrumMethod::Fft => spectral::fft_magnitude(&signals, dt, args.normalize_std)?,
        SpectrumMethod::Welch => {
            let fs = 1.0 / dt;
            let mut acc: Option<spectral::Spectrum> = None;
            for s in &signals {
                let p = spectral::welch_psd(s, fs, args.segment, args.overlap)?;
                match &mut acc {
                    Some(a) => {
                        for (av, pv) in a.values.iter_mut().zip(&p.values) {
                            *av += pv;
                        }
                    }
                    None => acc = Some(p),
                }
            }
            let mut a = acc.ok_or_else(|| Error::Contract("no signals selected".into()))?;
            let n = signals.len() as f64;
            for v in &mut a.values {
                *v /= n;
            }
            a
        }
    };
    let spectrum = if args.premultiply { spectral::premultiply(&spectrum) } else { spectrum };

    let mut text = String::from("st,value\n");
    for (f, v) in spectrum.frequencies.iter().zip(&spectrum.values) {
        text.push_str(&format!("{:.17e},{:.17e}\n", f, v));
    }
    std::fs::write(&args.out, text)?;

    let mut m = RunManifest::new(
        argv,
        serde_json::json!({
            "method": format!("{:?}", args.method),
            "segment": args.segment,
            "overlap": args.overlap,
            "premultiply": args.premultiply,
            "normalize_std": args.normalize_std,
            "rows": rows.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "dt": dt,
        }),
        None,
        threads,
    );
    m.record_input(&args.input)?;
    m.record_output(&args.out)?;
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!("wrote {} ({} bins)", args.out.display(), spectrum.frequencies.len());
    Ok(())
}

fn cmd_plot(args: PlotArgs, argv: Vec<String>, threads: usize) -> Result<()> {
    let start = std::time::Instant::now();
    let matrix = io::read_csv_matrix(&args.input, args.header)?;
    let svg = match args.kind {
        PlotKind::Line => {
            let (x, first_series): (Vec<f64>, usize) = if args.x_first_column {
                ((0..matrix.rows()).map(|i| matrix.get(i, 0)).collect(), 1)
            } else {
                ((0..matrix.rows()).map(|i| i as f64).collect(), 0)
            };
            let columns: Vec<Vec<f64>> = (first_series..matrix.cols())
                .map(|j| (0..matrix.rows()).map(|i| matrix.get(i, j)).collect())
                .collect();
            let labels: Vec<String> =
                (first_series..matrix.cols()).map(|j| format!("series {}", j + 1 - first_series)).collect();
            let series: Vec<plot::Series<'_>> = columns
                .iter()
                .zip(&labels)
                .map(|(y, label)| plot::Series { label, x: &x, y })
                .collect();
            plot::line_plot(&series, &args.title, "x", "value", args.log_x)?
        }
        PlotKind::Heatmap => {
            let panels: Vec<(String, Matrix)> = match &args.grid {
                Some(g) => {
                    let (nx, ny) = (g[0], g[1]);
                    if nx * ny != matrix.rows() {
                        return Err(Error::Contract(format!(
                            "grid {nx}x{ny} does not match {} rows",
                            matrix.rows()
                        )));
                    }
                    (0..matrix.cols())
                        .map(|j| {
                            let panel = Matrix::from_fn(ny, nx, |iy, ix| matrix.get(ix * ny + iy, j));
                            (format!("mode {}", j + 1), panel)
                        })
                        .collect()
                }
                None => vec![("matrix".to_string(), matrix.clone())],
            };
            plot::heatmap_panels(&panels, &args.title)?
        }
    };
    std::fs::write(&args.out, svg)?;
    let mut m = RunManifest::new(
        argv,
        serde_json::json!({"kind": format!("{:?}", args.kind), "grid": args.grid, "log_x": args.log_x}),
        None,
        threads,
    );
    m.record_input(&args.input)?;
    m.record_output(&args.out)?;
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
