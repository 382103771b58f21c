use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  output could not be written
  2  invalid arguments, input file or model
  3  the fit failed (singular design, separation, no convergence)

Data files are UTF-8 CSV with a header row. Column `a` holds the 0/1
treatment, `y` the outcome, an optional `w` positive weights; every other
column is a covariate, in header order.";

#[derive(Debug, Parser)]
#[command(name = "regadj", version, about = "Regression-adjusted average treatment effect estimators", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for simulations (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file and report the ATE estimate.
    Estimate(EstimateArgs),
    /// Decide whether model 1 is guaranteed to be at least as efficient as model 2.
    Check(CheckArgs),
    /// Asymptotic variances of two models on a population given as JSON.
    Compare(CompareArgs),
    /// Monte Carlo bias and SD over a grid of assignment probabilities.
    Simulate(SimulateArgs),
    /// Dominance verdicts for the reference model pairs.
    Table1(Table1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenteringArg {
    KnownMean,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Hc {
    Hc0,
    Hc1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Gaussian,
    Poisson,
}

#[derive(Debug, Args)]
pub struct CenteringOpts {
    #[arg(long, value_enum, default_value = "empirical")]
    pub centering: CenteringArg,

    /// Known covariate mean, comma separated (with --centering known-mean).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,

    /// Model formula, e.g. "1 + A + X1 + A:X1" or "1 + A + Y0@1 + X2".
    #[arg(long)]
    pub model: String,

    /// Known assignment probability; adds the known-π variance.
    #[arg(long)]
    pub pi: Option<f64>,

    /// Use the sample treated fraction as π.
    #[arg(long, conflicts_with = "pi")]
    pub estimate_pi: bool,

    #[command(flatten)]
    pub centering: CenteringOpts,

    #[arg(long, value_enum, default_value = "hc0")]
    pub hc: Hc,

    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: Family,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: String,

    #[arg(long)]
    pub model2: String,

    #[arg(long)]
    pub pi: f64,

    #[arg(long, value_enum, default_value = "empirical")]
    pub centering: CenteringArg,

    /// Covariate names, comma separated (default X1..Xp).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,

    /// Number of covariates when names are not given.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Population JSON: {"pi": .., "moments": {..}} and/or {"sampler": {..}}.
    #[arg(long)]
    pub population: PathBuf,

    #[arg(long)]
    pub model: String,

    #[arg(long)]
    pub model2: String,

    #[command(flatten)]
    pub centering: CenteringOpts,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 1 to 4, or `did-ldv`.
    #[arg(long)]
    pub scenario: String,

    /// Comma separated formulas or names (ANOVA, ANCOVA, ANHECOVA, INTERACTIONS, DiD, LDV).
    #[arg(long)]
    pub models: Option<String>,

    /// A list `0.3,0.5` or a range `start:end:step`.
    #[arg(long)]
    pub pis: Option<String>,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Baseline-outcome coefficient for `did-ldv`.
    #[arg(long, default_value_t = 0.7, allow_hyphen_values = true)]
    pub baseline_coef: f64,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 1)]
    pub p: usize,

    #[arg(long)]
    pub pi: f64,

    /// Also report the LDV/DiD and ANHECOVA corollary checks.
    #[arg(long)]
    pub corollaries: bool,
}
