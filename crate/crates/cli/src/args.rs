use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmchan::pipeline::{PoolingMode, DEFAULT_GAP_PERIODS};
use mmchan::profiles::DEFAULT_TAP_GRID;

const DEFAULT_GAP: f64 = DEFAULT_GAP_PERIODS * DEFAULT_TAP_GRID;

#[derive(Debug, Parser)]
#[command(name = "mmchan", version, about = "Synthesize 60 GHz industrial channels and fit tap traces")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "MMCHAN_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus from a profile.
    Generate(GenerateArgs),
    /// Partition traces into clusters and fit each model parameter.
    Fit(FitArgs),
    /// Compare simulated quartiles with the reference quartiles.
    Validate(ValidateArgs),
    /// Calibrate a profile against quartile targets.
    Calibrate(CalibrateArgs),
    /// Per-capture delay spread, coherence bandwidth and peak-to-average.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    TapsJsonl,
    RealizationsJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pooling {
    PerBeam,
    Pooled,
}

impl From<Pooling> for PoolingMode {
    fn from(p: Pooling) -> Self {
        match p {
            Pooling::PerBeam => PoolingMode::PerBeam,
            Pooling::Pooled => PoolingMode::Pooled,
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::PerBeam => "per-beam",
            Pooling::Pooled => "pooled",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Built-in profile id (e.g. `tunnel-7`) or a profile JSON file.
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::TapsJsonl)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Trace file, one JSON object per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Empirical CDF points; defaults to the report path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Seconds.
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap_threshold: f64,
    /// Absolute amplitude floor; defaults to 1% of each capture's strongest tap.
    #[arg(long)]
    pub noise_floor: Option<f64>,
    #[arg(long, value_enum, default_value_t = Pooling::PerBeam)]
    pub pooling: Pooling,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub profile: String,
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Relative tolerance for delays and amplitudes.
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    /// Absolute tolerance for counts.
    #[arg(long, default_value_t = 1.0)]
    pub count_tolerance: f64,
    /// Optional JSON copy of the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    /// tunnel, exp-hall, mechanical-room or side-tunnel.
    #[arg(long)]
    pub scenario: String,
    /// Degrees.
    #[arg(long)]
    pub beamwidth: u32,
    /// `{"parameter": [q1, q2, q3], ...}`; missing parameters use the built-in targets.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Largest accepted residual.
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Hz.
    #[arg(long, default_value_t = 2.16e9)]
    pub bandwidth: f64,
    /// CSV, one row per capture.
    #[arg(long)]
    pub out: PathBuf,
    /// Frequency samples across the band.
    #[arg(long, default_value_t = mmchan::metrics::DEFAULT_RESPONSE_POINTS)]
    pub points: usize,
    /// Correlation level defining the coherence bandwidth.
    #[arg(long, default_value_t = mmchan::metrics::DEFAULT_CORRELATION_THRESHOLD)]
    pub threshold: f64,
    /// Seconds; used to group taps into clusters for the peak-to-average ratio.
    #[arg(long, default_value_t = DEFAULT_GAP)]
    pub gap_threshold: f64,
}
