use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::estimators::Estimator;
use crate::netgraph::EdgeListFormat;
use crate::rds::{parse_pmf, Regime};
use crate::resample::{Method, SeedMode, SelectionPool};

#[derive(Debug, Parser)]
#[command(
    name = "rdsvar",
    version,
    about = "Respondent-driven sampling simulation and bootstrap variance estimation",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an edge list (and optional attributes) and report its structure.
    Ingest(IngestArgs),
    /// Simulate one RDS sample and write the recruitment forest.
    Simulate(SimulateArgs),
    /// Bootstrap a recruitment forest: point estimate, variance and percentile CI.
    Bootstrap(BootstrapArgs),
    /// Monte Carlo study of coverage, interval width and variance bias.
    Experiment(ExperimentArgs),
    /// Exact bootstrap distribution of a small forest by enumeration.
    Oracle(OracleArgs),
}

/// Recruit-count probabilities; accepts `1/3,1/6,1/6,1/3` on the command
/// line and either that string or a number array in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfInput", into = "Vec<f64>")]
pub struct Pmf(pub Vec<f64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum PmfInput {
    Text(String),
    Numbers(Vec<f64>),
}

impl TryFrom<PmfInput> for Pmf {
    type Error = crate::Error;

    fn try_from(v: PmfInput) -> Result<Self, Self::Error> {
        match v {
            PmfInput::Text(t) => t.parse(),
            PmfInput::Numbers(n) => Ok(Pmf(n)),
        }
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.0
    }
}

impl std::str::FromStr for Pmf {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        parse_pmf(s).map(Pmf)
    }
}

// Every option is an `Option` so that a flag given on the command line can
// be told apart from one left to the config file. Booleans take an optional
// value: `--lcc` means `--lcc true`.

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestArgs {
    /// TOML file with default values for any of this command's options.
    #[arg(long)]
    #[serde(skip_deserializing)]
    pub config: Option<PathBuf>,
    /// Edge list: two ids per line, whitespace or comma separated.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Edge list format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<EdgeListFormat>,
    /// Attribute CSV (`id` column then 0/1 columns).
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Restrict to the largest connected component.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lcc: Option<bool>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_deserializing)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<EdgeListFormat>,
    /// Attribute CSV; when given, the sampled participants' values are written too.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lcc: Option<bool>,
    /// Use a synthetic power-law population of this many nodes instead of --edges.
    #[arg(long)]
    pub synthetic_nodes: Option<usize>,
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    /// Plant the strong-effect attribute panel on the synthetic population.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strong_panel: Option<bool>,
    /// Number of seeds [default: 10].
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Coupons per participant [default: 3].
    #[arg(long)]
    pub coupons: Option<usize>,
    /// Probabilities of 0..=coupons recruits [default: 1/3,1/6,1/6,1/3 for
    /// three coupons, uniform otherwise].
    #[arg(long)]
    pub pmf: Option<Pmf>,
    /// Target sample size [default: 500].
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Draw a new seed when every chain dies [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reseed: Option<bool>,
    /// Master random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapArgs {
    #[arg(long)]
    #[serde(skip_deserializing)]
    pub config: Option<PathBuf>,
    /// Forest CSV with at least `id`, `recruiter_id` and `degree`.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// Participant attribute CSV keyed by forest id.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Attribute columns to estimate [default: all].
    #[arg(long, value_delimiter = ',')]
    pub attribute: Option<Vec<String>>,
    /// neighbourhood or tree [default: neighbourhood].
    #[arg(long)]
    pub method: Option<Method>,
    /// Bootstrap replicates [default: 1000].
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<usize>,
    /// sample_mean, vh or ipw [default: vh].
    #[arg(long)]
    pub estimator: Option<Estimator>,
    /// Confidence level [default: 0.95].
    #[arg(long)]
    pub level: Option<f64>,
    /// recruiters_only or all_participants [default: recruiters_only].
    #[arg(long)]
    pub pool: Option<SelectionPool>,
    /// with_replacement or without_replacement [default: with_replacement].
    #[arg(long)]
    pub tree_seeds: Option<SeedMode>,
    /// Population size N, needed for ipw.
    #[arg(long)]
    pub population_size: Option<u64>,
    /// Population total degree, needed for ipw.
    #[arg(long)]
    pub total_degree: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write every bootstrap estimate to CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub write_estimates: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentArgs {
    #[arg(long)]
    #[serde(skip_deserializing)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<EdgeListFormat>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lcc: Option<bool>,
    #[arg(long)]
    pub synthetic_nodes: Option<usize>,
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strong_panel: Option<bool>,
    /// Attribute columns to study [default: all].
    #[arg(long, value_delimiter = ',')]
    pub attribute: Option<Vec<String>>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub coupons: Option<usize>,
    #[arg(long)]
    pub pmf: Option<Pmf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub reseed: Option<bool>,
    /// Bootstrap methods [default: neighbourhood,tree].
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Monte Carlo replications [default: 1000].
    #[arg(long = "R")]
    #[serde(rename = "R")]
    pub r: Option<usize>,
    /// Bootstrap replicates per replication [default: 1000].
    #[arg(long = "B")]
    #[serde(rename = "B")]
    pub b: Option<usize>,
    /// Confidence levels [default: 0.95,0.8].
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Forests for the expected widths; 0 skips them [default: 5000].
    #[arg(long)]
    pub width_reference: Option<usize>,
    #[arg(long)]
    pub estimator: Option<Estimator>,
    #[arg(long)]
    pub pool: Option<SelectionPool>,
    #[arg(long)]
    pub tree_seeds: Option<SeedMode>,
    /// Master random seed (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to RDSVAR_WORKERS, then the core count.
    /// Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    #[arg(long)]
    #[serde(skip_deserializing)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub attribute: Option<Vec<String>>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub estimator: Option<Estimator>,
    #[arg(long)]
    pub pool: Option<SelectionPool>,
    #[arg(long)]
    pub tree_seeds: Option<SeedMode>,
    #[arg(long)]
    pub population_size: Option<u64>,
    #[arg(long)]
    pub total_degree: Option<u64>,
    /// Also report the balanced-forest moment comparison.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub moments: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fills every field the command line left unset from `file`.
pub(crate) trait Merge {
    fn merge_from(&mut self, file: Self);
}

macro_rules! impl_merge {
    ($ty:ty; $($field:ident),* $(,)?) => {
        impl Merge for $ty {
            fn merge_from(&mut self, file: Self) {
                $(
                    if self.$field.is_none() {
                        self.$field = file.$field;
                    }
                )*
            }
        }
    };
}

impl_merge!(IngestArgs; edges, format, attributes, lcc, out);
impl_merge!(SimulateArgs; edges, format, attributes, lcc, synthetic_nodes, synthetic_seed,
    strong_panel, seeds, coupons, pmf, n, regime, reseed, seed, out);
impl_merge!(BootstrapArgs; forest, attributes, attribute, method, b, estimator, level, pool,
    tree_seeds, population_size, total_degree, seed, write_estimates, out);
impl_merge!(ExperimentArgs; edges, format, attributes, lcc, synthetic_nodes, synthetic_seed,
    strong_panel, attribute, seeds, coupons, pmf, n, regime, reseed, methods, r, b, levels,
    width_reference, estimator, pool, tree_seeds, seed, workers, out);
impl_merge!(OracleArgs; forest, attributes, attribute, method, estimator, pool, tree_seeds,
    population_size, total_degree, moments, out);
