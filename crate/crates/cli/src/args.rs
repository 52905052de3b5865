use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "concate", version, about = "Finite-sample confidence bands for partially identified treatment effects")]
pub struct Cli {
    /// TOML or JSON file; its values take precedence over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for the parallel scan and simulation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Recorded in output metadata; also the base seed of `simulate`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics and rolling signal-outcome correlations.
    #[command(allow_negative_numbers = true)]
    Describe(DescribeArgs),
    /// Band at a single threshold.
    #[command(allow_negative_numbers = true)]
    Bounds(BoundsArgs),
    /// Sequential scan over a threshold grid.
    #[command(allow_negative_numbers = true)]
    Scan(ScanArgs),
    /// Monte Carlo coverage study.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Panel CSV with a header row.
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub unit_col: Option<String>,
    #[arg(long)]
    pub time_col: Option<String>,
    #[arg(long)]
    pub outcome_col: Option<String>,
    #[arg(long)]
    pub signal_col: Option<String>,
    #[arg(long)]
    pub group_col: Option<String>,
    /// Keep only rows whose group column equals this label.
    #[arg(long)]
    pub group: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    /// naive, manski-max, manski-q05, manski-q10, iid, mixing or hybrid [default: hybrid]
    #[arg(long)]
    pub method: Option<String>,
    /// Overall size [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Mixing constant Σ α(k)^{1/2} [default: 0]
    #[arg(long)]
    pub c_alpha: Option<f64>,
    /// Known lower support bound λ.
    #[arg(long)]
    pub truncation_lower: Option<f64>,
    /// Known upper support bound; requires --truncation-lower.
    #[arg(long)]
    pub truncation_upper: Option<f64>,
    /// Bernstein i.i.d. regime rule: min or max [default: min]
    #[arg(long)]
    pub mean_rule: Option<String>,
    /// Sub-exponential bounds M_0,M_1 [default: max |Y - mean| per arm]
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub m_bound: Option<Vec<f64>>,
    /// Absolute constant of the i.i.d. Bernstein inequality [default: 1]
    #[arg(long)]
    pub c_abs: Option<f64>,
    /// Weak-dependence Bernstein constants C1,C2,C3,C4,gamma [default: 1,1,1,1,0.5]
    #[arg(long, value_delimiter = ',', num_args = 5)]
    pub bernstein: Option<Vec<f64>>,
    /// Long-run variance V [default: Bartlett estimate per arm]
    #[arg(long)]
    pub long_run_var: Option<f64>,
    /// Naive-estimator variance: welch or paper [default: welch]
    #[arg(long)]
    pub variance: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Summary table, CSV or JSON by extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rolling-correlation CSV.
    #[arg(long)]
    pub rolling: Option<PathBuf>,
    /// Rolling window in periods [default: half the number of periods]
    #[arg(long)]
    pub window: Option<usize>,
    /// pearson or kendall [default: pearson]
    #[arg(long)]
    pub correlation: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub band: BandArgs,
    /// Threshold in percent.
    #[arg(long)]
    pub tau: Option<f64>,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub band: BandArgs,
    /// start:stop:step [default: 5:95:5]
    #[arg(long)]
    pub grid: Option<String>,
    /// Smallest arm size evaluated [default: 10]
    #[arg(long)]
    pub min_group: Option<usize>,
    /// Per-look sizes, comma separated [default: equal spending]
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    /// Per-threshold CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tipping summary JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Band chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Design letters A-G, comma separated, or "all" [default: all]
    #[arg(long)]
    pub dgp: Option<String>,
    /// Firms [default: 50]
    #[arg(long)]
    pub n: Option<usize>,
    /// Panel lengths [default: 1,2,5]
    #[arg(long = "T", visible_alias = "periods", value_delimiter = ',')]
    pub t: Option<Vec<usize>>,
    /// Replications per cell [default: 2000]
    #[arg(long)]
    pub reps: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Treatment effect [default: 4]
    #[arg(long)]
    pub delta: Option<f64>,
    /// plugin or prop1 [default: plugin]
    #[arg(long)]
    pub manski_variant: Option<String>,
    /// independent or coupled share covariance [default: independent]
    #[arg(long)]
    pub coupling: Option<String>,
    /// AR(1) first period: standard_normal or stationary [default: standard_normal]
    #[arg(long)]
    pub ar_init: Option<String>,
    /// Oracle sample size for the support reported in the JSON metadata [default: 1000000]
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Coverage CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metadata and cells as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
