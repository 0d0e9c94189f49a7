//! `coreda`: generate synthetic data, train, evaluate and check gradients.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coreda_core::{Profile, TrainMode};

#[derive(Parser, Debug)]
#[command(
    name = "coreda",
    version,
    about = "Contrastive-regression domain adaptation for skill scoring"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// TOML file whose keys override the selected profile
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Built-in hyperparameter profile
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Desk)]
    pub profile: ProfileArg,

    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Dataset directory (overrides `paths.data_dir`)
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,

    /// Run output root (overrides `paths.run_dir`)
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Full,
    Desk,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Full => Profile::Full,
            ProfileArg::Desk => Profile::Desk,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the labeled source set, the unlabeled target set and the sealed target labels
    Gen,
    /// Train a model and write its checkpoint and JSONL log
    Train(TrainArgs),
    /// Score a trained model on the target (or source) split
    Eval(EvalArgs),
    /// Finite-difference check of every op and of a full training step
    Gradcheck(GradcheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Coreda,
    SourceOnly,
    SemiSup,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Coreda => TrainMode::Coreda,
            ModeArg::SourceOnly => TrainMode::SourceOnly,
            ModeArg::SemiSup => TrainMode::SemiSup,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Coreda)]
    pub mode: ModeArg,

    /// Output directory (default: `<run_dir>/<mode>`)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Continue from the checkpoint in the output directory
    #[arg(long)]
    pub resume: bool,

    #[arg(long)]
    pub no_sup_rel: bool,
    #[arg(long)]
    pub no_sup_abs: bool,
    #[arg(long)]
    pub no_cons_s: bool,
    #[arg(long)]
    pub no_cons_t: bool,
    /// Let gradients flow through the target pseudo-label
    #[arg(long)]
    pub no_stopgrad: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Target,
    Source,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    /// Relative head against exemplars
    Exemplar,
    /// Absolute head alone
    Absolute,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory holding `model.ckpt` (default: `<run_dir>/coreda`)
    #[arg(long)]
    pub run: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = SplitArg::Target)]
    pub split: SplitArg,

    /// Default: absolute for source-only checkpoints, exemplar otherwise
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorArg>,

    /// Number of exemplars
    #[arg(long = "M", alias = "m")]
    pub exemplars: Option<usize>,

    /// Background mixing weight
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Compare against exemplars without background mixing
    #[arg(long)]
    pub no_bg_mix: bool,

    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Write the report as JSON here as well
    #[arg(long)]
    pub json: Option<PathBuf>,

    /// Scale one case's analytic gradient (negative control)
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

/// Raised when a numeric check fails; maps to exit code 3.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<NumericFailure>() {
            return 3;
        }
        if let Some(coreda_core::Error::NonFinite { .. }) = cause.downcast_ref() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen => commands::gen(&cli.global),
        Command::Train(a) => commands::train(&cli.global, a),
        Command::Eval(a) => commands::eval(&cli.global, a),
        Command::Gradcheck(a) => commands::gradcheck(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
