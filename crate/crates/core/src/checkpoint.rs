//! Versioned JSON checkpoints for policy tables.
//!
//! Rows are written in context-key order and floats in shortest round-trip
//! form, so write -> read -> write reproduces the file byte for byte.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ContextKey, PolicyParams};
use crate::vocab::{TokenId, Vocab};

pub const FORMAT: &str = "rtrl-policy";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    vocab_hash: String,
    order: usize,
    steps: u64,
    vocab: Vec<String>,
    rows: Vec<Row>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    task: TokenId,
    aligned: TokenId,
    history: Vec<TokenId>,
    logits: Vec<f64>,
}

pub fn to_json(params: &PolicyParams) -> String {
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        vocab_hash: params.vocab().hash(),
        order: params.order(),
        steps: params.steps(),
        vocab: params.vocab().tokens().to_vec(),
        rows: params
            .table()
            .iter()
            .map(|(k, v)| Row {
                task: k.task,
                aligned: k.aligned,
                history: k.history().to_vec(),
                logits: v.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("checkpoint serializes") + "\n"
}

pub fn from_json(text: &str) -> Result<PolicyParams> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "unknown format {:?}",
            file.format
        )));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            file.version
        )));
    }
    let vocab = Vocab::from_token_list(file.vocab)?;
    let found = vocab.hash();
    if found != file.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: file.vocab_hash,
            found,
        });
    }
    let v = vocab.len() as TokenId;
    let mut params = PolicyParams::new(Arc::new(vocab), file.order)?;
    for row in file.rows {
        if row.task >= v || row.aligned >= v || row.history.iter().any(|&t| t >= v) {
            return Err(Error::Checkpoint(
                "row references a token outside the vocabulary".into(),
            ));
        }
        if row.history.len() > crate::policy::MAX_ORDER {
            return Err(Error::BadOrder(row.history.len()));
        }
        params.set_logits(
            ContextKey::new(row.task, row.aligned, &row.history),
            row.logits,
        )?;
    }
    params.set_steps(file.steps);
    Ok(params)
}

pub fn save(params: &PolicyParams, path: &Path) -> Result<()> {
    fs::write(path, to_json(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

/// Loads a checkpoint and checks that its vocabulary matches `expected`.
pub fn load_compatible(path: &Path, expected: &Vocab) -> Result<PolicyParams> {
    let params = load(path)?;
    let (want, got) = (expected.hash(), params.vocab().hash());
    if want != got {
        return Err(Error::VocabMismatch {
            expected: want,
            found: got,
        });
    }
    Ok(params)
}
