use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rtrl_core::data::{
    cipher_target_symbols, corrupt_outputs, gen_cipher_task, gen_toy_reactions, save_jsonl, split,
    ReactionTemplate,
};

#[derive(Subcommand)]
pub enum GenCommand {
    /// Letter substitution cipher: writes x.jsonl and y.jsonl (unpaired,
    /// aligned by line), plus labeled pairs.jsonl with --pairs.
    Cipher {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        alphabet: usize,
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        /// Also write labeled pairs.jsonl.
        #[arg(long)]
        pairs: bool,
        /// Per-character corruption rate applied to the outputs in pairs.jsonl.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Template reactions: labeled reactants -> product records.
    Reactions {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Comma-separated subset of halide_to_alcohol, esterification,
        /// hydrogenation.
        #[arg(long, default_value = "halide_to_alcohol,esterification,hydrogenation")]
        templates: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded shuffle and cut into train.jsonl, valid.jsonl, test.jsonl.
    Split {
        #[arg(long)]
        input: PathBuf,
        /// Three comma-separated fractions summing to 1.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create_dir(dir: &PathBuf) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Cipher {
            n,
            seed,
            alphabet,
            max_len,
            pairs,
            noise,
            out,
        } => {
            if !(0.0..=1.0).contains(&noise) {
                bail!("--noise must lie in [0, 1], got {noise}");
            }
            let task = gen_cipher_task(seed, n, alphabet, max_len)?;
            create_dir(&out)?;
            save_jsonl(&task.x, &out.join("x.jsonl"))?;
            save_jsonl(&task.y, &out.join("y.jsonl"))?;
            if pairs {
                let mut p = task.pairs();
                if noise > 0.0 {
                    let meta = p.meta.clone();
                    p = corrupt_outputs(&p, noise, &cipher_target_symbols(alphabet), seed)?;
                    p.meta = meta;
                }
                save_jsonl(&p, &out.join("pairs.jsonl"))?;
            }
        }
        GenCommand::Reactions {
            n,
            seed,
            templates,
            out,
        } => {
            let mut chosen = Vec::new();
            for name in templates
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
            {
                match ReactionTemplate::ALL.iter().find(|t| t.name() == name) {
                    Some(t) => chosen.push(*t),
                    None => bail!("unknown template {name:?}"),
                }
            }
            if chosen.is_empty() {
                bail!("--templates names no template");
            }
            let ds = gen_toy_reactions(seed, n, &chosen)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(&parent.to_path_buf())?;
            }
            save_jsonl(&ds, &out)?;
        }
        GenCommand::Split {
            input,
            fractions,
            seed,
            out,
        } => {
            let f: Vec<f64> = fractions
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .with_context(|| format!("parsing --fractions {fractions:?}"))?;
            let f: [f64; 3] = f
                .try_into()
                .map_err(|_| anyhow::anyhow!("--fractions needs exactly three values"))?;
            let ds = crate::tasks::load(&input)?;
            let (a, b, c) = split(&ds, f, seed)?;
            create_dir(&out)?;
            save_jsonl(&a, &out.join("train.jsonl"))?;
            save_jsonl(&b, &out.join("valid.jsonl"))?;
            save_jsonl(&c, &out.join("test.jsonl"))?;
        }
    }
    Ok(())
}
