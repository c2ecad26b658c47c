use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ivcoarse", version, about = "Tight bounds for coarsened exposures with an instrumental variable")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value = "human")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point bounds from the LP and, when one applies, the closed form.
    Bounds(BoundsArgs),
    /// Bootstrap confidence interval for the bounds.
    Ci(CiArgs),
    /// Symbolic bounds in p_{xy·z} notation.
    Derive(DeriveArgs),
    /// Run the brute-force audits.
    Verify(VerifyArgs),
    /// Recompute every published analysis for an embedded example.
    Reproduce(ReproduceArgs),
    /// Print the response-function constraint system.
    DumpLp(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PeanutTernary,
    PeanutIllDefining,
    PeanutContaminated,
    PeanutRisk,
    HomocysteineThree,
    HomocysteineFour,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario document (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario; also supplies embedded data when no data file is given.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Summary counts (TOML).
    #[arg(long, conflicts_with = "records")]
    pub summary: Option<PathBuf>,
    /// Unit records with columns z, x_star, y (CSV).
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Coarsening map (TOML) applied to the records.
    #[arg(long, requires = "records")]
    pub map: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Project data that no model distribution reproduces before bounding.
    #[arg(long)]
    pub slack: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Percentile,
    Mn,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Rescaled,
    Raw,
}

#[derive(Debug, Clone, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "percentile")]
    pub method: MethodArg,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid ratio for m-out-of-n.
    #[arg(long, default_value_t = 0.75)]
    pub rho: f64,
    /// Number of grid points for m-out-of-n.
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "rescaled")]
    pub distance: DistanceArg,
    /// Largest tolerated fraction of replicates that needed projection.
    #[arg(long, default_value_t = 0.1)]
    pub max_infeasible: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DeriveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub latex: bool,
    /// Use the scenario's own labels instead of x, x', x^m.
    #[arg(long)]
    pub raw_labels: bool,
    #[arg(long, default_value_t = 4096)]
    pub max_vars: usize,
    #[arg(long, default_value_t = 30)]
    pub max_dual_dim: usize,
    #[arg(long, default_value_t = 2_000_000)]
    pub max_rays: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Scenario,
    Equivalences,
    ClosedForms,
    Orderings,
    Construction,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random-direction restarts per trial in the tightness audit.
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    Peanut,
    Homocysteine,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub example: Example,
    #[arg(long, default_value_t = crate::commands::EMBEDDED_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
}
