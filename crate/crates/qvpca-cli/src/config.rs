//! Command-line definition and the `key = value` config-file expansion.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "qvpca",
    version,
    about = "Quadratic-variation PCA for sampled paths and curve panels",
    args_override_self = true
)]
pub struct Cli {
    /// Optional config file with `key = value` lines (long option names);
    /// explicit command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a built-in model and write paths/panels to CSV.
    Simulate(SimulateArgs),
    /// Quadratic-variation principal component split of a sampled path.
    Pca(PcaArgs),
    /// Factor extraction and dimension selection on a curve panel.
    Factors(FactorsArgs),
    /// Full two-step manifold estimation on a curve panel.
    Manifold(ManifoldArgs),
    /// Fourier estimation of the quadratic-variation operator rank.
    Qdim(QdimArgs),
    /// Backward-lag manifold stability diagnostic.
    Distance(DistanceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    /// Four-factor diffusion observed directly as a path.
    #[value(name = "7.1")]
    #[serde(rename = "7.1")]
    FourFactorPath,
    /// Two-factor curve pair contrasting variance and quadratic variation.
    #[value(name = "7.2")]
    #[serde(rename = "7.2")]
    SinePair,
    /// Four-factor curve model with one pure-drift loading direction.
    #[value(name = "7.3")]
    #[serde(rename = "7.3")]
    FourFactorCurve,
    /// Heath-Jarrow-Morton realization with a known parametrization.
    #[value(name = "hjm")]
    Hjm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseId {
    None,
    /// Time-white Gaussian shock times sin(pi x).
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyId {
    P1,
    P2,
    P3,
}

impl PenaltyId {
    pub fn to_penalty(self) -> qvpca::Penalty {
        match self {
            PenaltyId::P1 => qvpca::Penalty::Pc1,
            PenaltyId::P2 => qvpca::Penalty::Pc2,
            PenaltyId::P3 => qvpca::Penalty::Pc3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PRouteId {
    /// Relative eigenvalue threshold on the factor QV matrix.
    Threshold,
    /// Fourier operator rank estimate.
    Fourier,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Built-in model id.
    #[arg(long)]
    pub model: ModelId,
    /// Comma-separated seed list; one output subdirectory per seed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seed: Vec<u64>,
    /// Number of time increments (the grid has n + 1 points).
    #[arg(long, default_value_t = 1999)]
    pub n: usize,
    /// Time horizon; defaults to 2 pi.
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub t: f64,
    /// Number of spatial grid points (curve models).
    #[arg(long, default_value_t = 31)]
    pub nx: usize,
    /// Left end of the spatial interval.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// Right end of the spatial interval.
    #[arg(long, default_value_t = 5.0)]
    pub b: f64,
    /// Observation noise.
    #[arg(long, value_enum, default_value_t = NoiseId::None)]
    pub noise: NoiseId,
    /// Noise amplitude; defaults to sqrt(2)/3.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2 / 3.0)]
    pub noise_amp: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PcaArgs {
    /// Input path CSV (header: t,1,2,...,d).
    #[arg(long)]
    pub input: PathBuf,
    /// Relative eigenvalue threshold; defaults to n^(-1/3).
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FactorsArgs {
    /// Input panel CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional parametrization samples to subtract (same layout/grids).
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    #[arg(long, value_enum, default_value_t = PenaltyId::P1)]
    pub penalty: PenaltyId,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ManifoldArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    #[arg(long, value_enum, default_value_t = PenaltyId::P1)]
    pub penalty: PenaltyId,
    /// Override the selected number of factors.
    #[arg(long)]
    pub d_hat: Option<usize>,
    /// Route for the volatility dimension.
    #[arg(long, value_enum, default_value_t = PRouteId::Threshold)]
    pub p_route: PRouteId,
    /// Relative threshold for the threshold route; defaults to n^(-1/3).
    #[arg(long)]
    pub eps_rel: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct QdimArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Frequency cutoff; defaults to (n - 1) / 2.
    #[arg(long)]
    pub m: Option<usize>,
    /// Absolute eigenvalue threshold; defaults to n^(-1/3).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Apply the threshold relative to the trace instead.
    #[arg(long, default_value_t = false)]
    pub relative: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Lags, either `start:end:step` or a comma-separated list.
    #[arg(long, default_value = "5:250:5")]
    pub lags: String,
    #[arg(long, default_value_t = 8)]
    pub kmax: usize,
    #[arg(long, value_enum, default_value_t = PenaltyId::P1)]
    pub penalty: PenaltyId,
    /// Fix the number of factors instead of re-selecting per truncation.
    #[arg(long)]
    pub d_hat: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn parse_lags(spec: &str) -> Result<Vec<usize>, CliError> {
    let parse =
        |s: &str| -> Result<usize, CliError> {
            s.trim()
                .parse()
                .map_err(|_| CliError::Parse(format!("bad lag value {s:?}")))
        };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Parse(format!(
                "lag range must be start:end:step, got {spec:?}"
            )));
        }
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step == 0 {
            return Err(CliError::Parse("lag step must be positive".into()));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        spec.split(',').map(parse).collect()
    }
}

/// Expands `--config FILE` by inserting `--key value` pairs read from the
/// file ahead of the explicit arguments (which therefore win).
pub fn expand_config_args(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let pos = argv.iter().position(|a| a == "--config");
    let Some(pos) = pos else {
        return Ok(argv);
    };
    let file = argv
        .get(pos + 1)
        .ok_or_else(|| CliError::Parse("--config needs a file argument".into()))?;
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Io(format!("config {file}: {e}")))?;
    let mut extra = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Parse(format!("config line {}: expected key = value", no + 1))
        })?;
        extra.push(format!("--{}", key.trim()));
        extra.push(value.trim().to_string());
    }
    // Insert the expansion right after the subcommand token (argv[1]),
    // keeping explicit flags later so they override.
    let mut out = Vec::with_capacity(argv.len() + extra.len());
    out.extend(argv.iter().take(2).cloned());
    out.extend(extra);
    out.extend(argv.iter().skip(2).cloned());
    Ok(out)
}
