use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rtrl_core::data::{load_jsonl, Dataset};
use rtrl_core::domain::{cipher_task, reaction_task, TaskPair};
use rtrl_core::vocab::Vocab;

pub fn resolve(name: &str, alphabet: usize) -> Result<(Arc<Vocab>, TaskPair)> {
    Ok(match name {
        "cipher" => {
            if !(4..=26).contains(&alphabet) {
                bail!("cipher alphabet must be in 4..=26, got {alphabet}");
            }
            cipher_task(alphabet)?
        }
        "reaction" => reaction_task()?,
        other => bail!("unknown task {other:?} (expected cipher or reaction)"),
    })
}

pub fn load(path: &Path) -> Result<Dataset> {
    load_jsonl(path).with_context(|| format!("loading dataset {}", path.display()))
}
