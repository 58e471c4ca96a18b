use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rtrl_core::checkpoint;
use rtrl_core::sampling::SamplerConfig;
use rtrl_core::train;

use crate::tasks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Greedy predictions scored against labels.
    Task,
    /// Forward then backward generation scored against the input.
    Roundtrip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// cipher or reaction.
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 16)]
    alphabet: usize,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Backward swaps the dataset sides and the task tags.
    #[arg(long, value_enum, default_value_t = Direction::Forward)]
    direction: Direction,
    #[arg(long, default_value_t = 0.9)]
    temperature: f64,
    #[arg(long, default_value_t = 40)]
    top_k: usize,
    #[arg(long, default_value_t = 0.9)]
    top_p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    max_len: usize,
    /// Output directory for <mode>-<direction>.json and .csv.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(a: EvalArgs) -> Result<()> {
    let (vocab, pair) = tasks::resolve(&a.task, a.alphabet)?;
    let theta = checkpoint::load_compatible(&a.checkpoint, &vocab)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let mut ds = tasks::load(&a.dataset)?;
    let pair = match a.direction {
        Direction::Forward => pair,
        Direction::Backward => {
            if ds.labeled() {
                ds = ds.swapped()?;
            }
            pair.swap()
        }
    };
    let prompts = train::prompts(&ds, &vocab, pair.source)?;
    let report = match a.mode {
        Mode::Task => {
            if !ds.labeled() {
                bail!("task mode needs a labeled dataset");
            }
            train::task_eval(&theta, &prompts, &pair, &SamplerConfig::greedy(), a.max_len)?
        }
        Mode::Roundtrip => {
            let sampler = SamplerConfig {
                temperature: a.temperature,
                top_k: a.top_k,
                top_p: a.top_p,
                seed: a.seed,
            };
            sampler.validate()?;
            train::roundtrip_eval(&theta, &prompts, &pair, &sampler, a.max_len)?
        }
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let stem = format!(
        "{}-{}",
        match a.mode {
            Mode::Task => "task",
            Mode::Roundtrip => "roundtrip",
        },
        match a.direction {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    );
    let json_path = a.out.join(format!("{stem}.json"));
    fs::write(&json_path, report.to_json() + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    let csv_path = a.out.join(format!("{stem}.csv"));
    fs::write(&csv_path, report.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(())
}
