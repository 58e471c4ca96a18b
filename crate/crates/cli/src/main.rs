//! `rtrl`: data generation, training, evaluation and reporting.

mod config;
mod eval;
mod gen;
mod report;
mod run;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "rtrl",
    version,
    about = "Round-trip reinforcement learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate toy datasets or split an existing one.
    #[command(subcommand)]
    GenData(gen::GenCommand),
    /// Train a policy in one of the regimes and write a run directory.
    #[command(after_help = config::keys_help())]
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(eval::EvalArgs),
    /// Merge final reports of run directories into one CSV table.
    Report(report::ReportArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    regime: Regime,
    /// Flat key = value config file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory to create (or to continue with --resume).
    #[arg(long)]
    run_dir: PathBuf,
    /// Continue an interrupted run from its latest checkpoint. The stored
    /// config is used.
    #[arg(long)]
    resume: bool,
    /// Checkpoint and exit once this many steps of the phase are done,
    /// leaving the run resumable (single-phase regimes).
    #[arg(long)]
    stop_after: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regime {
    /// Self-supervised round-trip training on source-only inputs.
    Rtrl,
    /// Alternating directions on unpaired source and target sets.
    Iterative,
    /// SFT warm start, then round-trip training plus the task metric.
    Supervised,
    /// Round-trip training on model-generated synthetic data.
    Selfplay,
    /// Entropy-minimization baseline.
    Em,
    /// SFT on self-generated outputs.
    SftSynOut,
    /// SFT on self-generated inputs.
    SftSynIn,
    /// Plain supervised fine-tuning on both directions.
    Sft,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Rtrl => "rtrl",
            Regime::Iterative => "iterative",
            Regime::Supervised => "supervised",
            Regime::Selfplay => "selfplay",
            Regime::Em => "em",
            Regime::SftSynOut => "sft-syn-out",
            Regime::SftSynIn => "sft-syn-in",
            Regime::Sft => "sft",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return ExitCode::from(2);
            }
            let msg = e.to_string();
            let text: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let text = text.join(" ");
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprintln!("error: usage: {text} (see --help)");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::GenData(g) => gen::run(g),
        Command::Train(t) => run::train(t),
        Command::Eval(e) => eval::run(e),
        Command::Report(r) => report::run(r),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
