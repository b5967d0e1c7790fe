//! `cadapt`: train, evaluate and audit classifiers under strategic
//! adaptation.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! training failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use cadapt_core::evaluation::ImprovementBase;
use cadapt_core::Family;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cadapt", version, about = "Classifiers that anticipate strategic adaptation")]
pub struct Cli {
    /// Seed for every random stream of the command; overrides config seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample the synthetic causal toy dataset.
    GenerateToy(GenerateToyArgs),
    /// Fit a classifier.
    Train(TrainArgs),
    /// Report test error, deployment error and improvement rate.
    Eval(EvalArgs),
    /// Show the best response of one subject feature by feature.
    Flipset(FlipsetArgs),
    /// Search for a feature correlation that lowers adaptation costs.
    Perturb(PerturbArgs),
    /// Cross-validate over a grid of lambda values.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct GenerateToyArgs {
    /// ToyParams JSON; defaults are used for missing fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Number of rows, overriding the params file.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the feature taxonomy.
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// Where to write the label-oracle sidecar [default: <out>.oracle.json].
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Taxonomy JSON; its order fixes the feature columns.
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long, default_value = "y")]
    pub label_column: String,
    /// Label value mapped to +1; any other single value maps to -1.
    #[arg(long, default_value = "1")]
    pub positive: String,
    /// Label-oracle sidecar, enabling the true-improvement report.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Cost matrices or scales JSON.
    #[arg(long)]
    pub cost: PathBuf,
    /// TrainConfig JSON; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FamilyArg {
    I,
    M,
    A,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::I => Family::I,
            FamilyArg::M => Family::M,
            FamilyArg::A => Family::A,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaseArg {
    /// Subjects with label -1.
    Negative,
    /// Subjects the model rejects.
    Rejected,
}

impl From<BaseArg> for ImprovementBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Negative => ImprovementBase::NegativeLabel,
            BaseArg::Rejected => ImprovementBase::Rejected,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Trained model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub cost: PathBuf,
    /// Response played at deployment.
    #[arg(long, value_enum, default_value = "m")]
    pub response: FamilyArg,
    /// Population the improvement rate is measured on.
    #[arg(long, value_enum, default_value = "negative")]
    pub improvement_base: BaseArg,
    /// Retrain with the model's config under k-fold cross-validation.
    #[arg(long)]
    pub cv: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the flat CSV report here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FlipsetArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub cost: PathBuf,
    /// Zero-based data row.
    #[arg(long)]
    pub row: usize,
    #[arg(long, value_enum, default_value = "a")]
    pub family: FamilyArg,
    /// Show values rounded to integers.
    #[arg(long)]
    pub round: bool,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub cost: PathBuf,
    /// Rejected subjects sampled for the check.
    #[arg(long, default_value_t = 20)]
    pub sample: usize,
    /// Write the perturbed cost model JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub cost: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated, strictly ascending lambda values.
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Flat CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<cadapt_core::Error> for Failure {
    fn from(e: cadapt_core::Error) -> Self {
        use cadapt_core::Error as E;
        match e {
            E::SingleClassData
            | E::NonFiniteLoss
            | E::NoValidPerturbation(_)
            | E::NoOracle
            | E::Fold { .. }
            | E::Sweep { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
