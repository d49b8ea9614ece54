//! `aprior`: load measures and machines, run transforms, constructions,
//! mixtures and rebase plans, and emit deterministic tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod report;
mod run;

/// Exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
            Self::Inconclusive => 2,
        }
    }
}

const INPUT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "aprior", version, about = "Exact transformations of computable measures by machines")]
pub struct Cli {
    /// Directory for relative output paths.
    #[arg(long, global = true, env = "APRIOR_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and check input files.
    Validate(ValidateArgs),
    /// Evaluate a transformation at a stage.
    Transform(TransformArgs),
    /// Build a machine realizing a target semimeasure.
    Construct {
        #[arg(value_enum)]
        mode: ConstructMode,
        #[command(flatten)]
        args: ConstructArgs,
    },
    /// Mixtures and weight-function rewrites.
    #[command(subcommand)]
    Mixture(MixtureCommand),
    /// Universal machines built by adjunction.
    #[command(subcommand)]
    Universal(UniversalCommand),
    /// Rebase a universal transformation onto another measure and verify it.
    Rebase(RebaseArgs),
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub measure: Vec<String>,
    #[arg(long)]
    pub machine: Vec<PathBuf>,
    #[arg(long)]
    pub prefix_machine: Vec<PathBuf>,
    /// Approximant files; checked on B^{≤depth} for t ≤ stages.
    #[arg(long)]
    pub approx: Vec<PathBuf>,
    #[arg(long, requires = "approx")]
    pub depth: Option<usize>,
    #[arg(long, requires = "approx")]
    pub stages: Option<usize>,
    #[arg(long)]
    pub weights: Vec<PathBuf>,
    #[arg(long)]
    pub family: Vec<PathBuf>,
    /// Enumeration directories (containing index.txt).
    #[arg(long)]
    pub universal: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub machine: PathBuf,
    /// Comma-separated strings, `-` for ε, or `all:n`.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: String,
    #[arg(long)]
    pub stage: usize,
    /// Treat the machine as prefix-free and evaluate `Q^μ_T`.
    #[arg(long)]
    pub discrete: bool,
    /// Monte Carlo samples to draw alongside the exact value.
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Input bits drawn per sample; defaults to the longest description.
    #[arg(long)]
    pub mc_depth: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstructMode {
    Continuous,
    Discrete,
    Nonuniversal,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long)]
    pub measure: String,
    /// Approximant file.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub stages: usize,
    /// `stage`, `offset k` or `capped c`.
    #[arg(long, default_value = "stage")]
    pub lengths: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Byte cap on retained transcript records.
    #[arg(long, default_value_t = 1 << 22)]
    pub transcript_limit: usize,
    /// Enumeration directory of `U` (nonuniversal mode).
    #[arg(long, required_if_eq("mode", "nonuniversal"))]
    pub universal: Option<PathBuf>,
    /// Enumeration slots searched in `U` per stage (nonuniversal mode).
    #[arg(long, default_value_t = 1 << 16)]
    pub search_budget: usize,
    /// Report a witness for each gap `c` (nonuniversal mode).
    #[arg(long)]
    pub gap: Vec<usize>,
}

#[derive(Subcommand, Debug)]
pub enum MixtureCommand {
    /// Truncated `ξ_W(σ)` with its tail bound.
    Eval(MixtureEvalArgs),
    /// Rewrite `W′` into a proper weight function with the same mixture.
    RewriteProper(RewriteProperArgs),
    /// Fold a registered mixture slot back into the weights.
    RewriteUniversal(RewriteUniversalArgs),
    /// Empirical multiplicative dominance of one approximant over another.
    Dominance(DominanceArgs),
    /// A universal transformation as a mixture over the code words.
    Decompose(DecomposeArgs),
}

#[derive(Args, Debug)]
pub struct MixtureEvalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: String,
    #[arg(long)]
    pub truncation: usize,
    #[arg(long)]
    pub stage: usize,
    /// Also certify `ξ_W(ε) < 1`.
    #[arg(long)]
    pub below_one: bool,
}

#[derive(Args, Debug)]
pub struct RewriteProperArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long)]
    pub q: String,
    #[arg(long)]
    pub c: u32,
    /// Reserved slot that receives `π`.
    #[arg(long)]
    pub k: usize,
    /// Empty slot that absorbs the rest of the unit mass.
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub truncation: usize,
    /// Where to write `W″`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Check the mixtures agree on B^{≤depth} at `--stage`.
    #[arg(long, default_value_t = 4)]
    pub check_depth: usize,
    #[arg(long)]
    pub stage: usize,
}

#[derive(Args, Debug)]
pub struct RewriteUniversalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub family: PathBuf,
    /// Slot holding the reference mixture.
    #[arg(long)]
    pub k: usize,
    /// Weights of the reference mixture.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub truncation: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub check_depth: usize,
    #[arg(long)]
    pub stage: usize,
}

#[derive(Args, Debug)]
pub struct DominanceArgs {
    /// Approximant expected to dominate.
    #[arg(long)]
    pub kappa: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long)]
    pub depth: usize,
    #[arg(long)]
    pub stage: usize,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub measure: String,
    #[arg(long)]
    pub universal: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: String,
    /// Terms `e < codes`.
    #[arg(long)]
    pub codes: usize,
    #[arg(long)]
    pub stage: usize,
}

#[derive(Subcommand, Debug)]
pub enum UniversalCommand {
    /// Write the pairs of `U` enumerated by a stage as a machine file.
    Assemble {
        #[arg(long)]
        universal: PathBuf,
        #[arg(long)]
        stage: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Decompose(DecomposeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Tsv,
}

#[derive(Args, Debug)]
pub struct RebaseArgs {
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long)]
    pub universal: PathBuf,
    /// TOML budget file.
    #[arg(long)]
    pub budgets: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub sigmas: String,
    #[arg(long)]
    pub delta: String,
    #[arg(long)]
    pub report: PathBuf,
    /// Defaults to the report's extension.
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
    /// Overrides `workers` in the budget file.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
