use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "breakscope",
    version,
    about = "Hurst, information-flow and changepoint analysis of price panels"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Panel CSV: ISO dates in the first column, one series per further column.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Comma-separated subset of input columns.
    #[arg(long, global = true, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Drop non-positive prices before any transform.
    #[arg(long, global = true)]
    pub drop_negative: bool,
    /// Override the per-analysis default transform.
    #[arg(long, global = true, value_enum)]
    pub transform: Option<TransformArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Raw,
    Log,
    LogReturn,
    SignedLogReturn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic series or panel.
    Synth(SynthArgs),
    /// Full-sample and rolling Hurst exponents (default transform: log).
    Hurst(HurstArgs),
    /// Full-sample and rolling mutual information (default transform: log-return).
    Mi(MiArgs),
    /// PMIME causality matrix and network (default transform: log-return).
    Pmime(PmimeArgs),
    /// Trend/season changepoint decomposition (default transform: raw).
    Beast(BeastArgs),
    /// Run every analysis and write the combined JSON report and CSV bundle.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Fgn,
    Fbm,
    WhiteNoise,
    VarUnidirectional,
    VarChain,
    Piecewise,
    FixturePanel,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Hurst parameter for fgn/fbm.
    #[arg(long, default_value_t = 0.7)]
    pub h: f64,
    /// Noise standard deviation for white-noise and VAR kinds.
    #[arg(long, default_value_t = 1.0)]
    pub sd: f64,
    /// Coupling weight for VAR kinds.
    #[arg(long, default_value_t = 0.9)]
    pub coupling: f64,
    /// Output file; defaults to synth_<kind>.<format> in the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HurstMethodArg {
    Ghe,
    Rs,
}

#[derive(Debug, Args)]
pub struct HurstArgs {
    #[arg(long, default_value_t = 75)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, value_enum, default_value_t = HurstMethodArg::Ghe)]
    pub method: HurstMethodArg,
    /// Emit calendar-year means of the rolling curve.
    #[arg(long)]
    pub per_year: bool,
    /// Emit the correlation matrix of rolling curves.
    #[arg(long)]
    pub corr_matrix: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Knn,
    Binned,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    /// Pair of columns as A,B; all pairs when omitted.
    #[arg(long)]
    pub pair: Option<String>,
    #[arg(long, default_value_t = 60)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub step: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Knn)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Second pair C,D whose rolling curve is compared with the first.
    #[arg(long)]
    pub decouple_against: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub gap_threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub run_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    Surrogate,
    Ratio,
}

#[derive(Debug, Args)]
pub struct PmimeArgs {
    #[arg(long, default_value_t = 5)]
    pub lmax: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = StopArg::Surrogate)]
    pub stop: StopArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.97)]
    pub ratio: f64,
    #[arg(long, default_value_t = 100)]
    pub surrogates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeasonArg {
    Harmonic,
    None,
}

#[derive(Debug, Args)]
pub struct BeastArgs {
    #[arg(long, default_value_t = 7.0)]
    pub period: f64,
    #[arg(long, value_enum, default_value_t = SeasonArg::Harmonic)]
    pub season: SeasonArg,
    #[arg(long, default_value_t = 20)]
    pub cp_max: usize,
    /// Minimum segment length; max(10, n/20) when omitted.
    #[arg(long)]
    pub min_seg: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub order_max: usize,
    /// Sweeps per chain, burn-in included.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 3)]
    pub chains: usize,
    #[arg(long, default_value_t = 0.18)]
    pub cp_prob_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SectionArg {
    Hurst,
    Mi,
    Pmime,
    Beast,
    Events,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Analyses to run.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "hurst,mi,pmime,beast,events"
    )]
    pub sections: Vec<SectionArg>,
    #[command(flatten)]
    pub beast: BeastArgs,
    #[arg(long, default_value_t = 75)]
    pub hurst_window: usize,
    #[arg(long, default_value_t = 60)]
    pub mi_window: usize,
    #[arg(long, default_value_t = 5)]
    pub lmax: usize,
    /// Event catalog JSON; the bundled catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub tol_days: i64,
    #[arg(long, default_value_t = 5)]
    pub approximate_tol_days: i64,
    #[arg(long, default_value_t = 30)]
    pub max_match_days: i64,
}
