//! Rewards: round-trip likelihood, format checks, the supervised metric
//! reward and the negative-entropy baseline.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rtrl_chem::{count_components, parse_smiles};

use crate::domain::DomainKind;
use crate::error::{Error, Result};
use crate::metrics::{
    bleu, fingerprint_sims, levenshtein, meteor_exact, parse_molecule, rouge_l, rouge_n,
};
use crate::policy::PolicyParams;
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatChecker {
    None,
    /// Exactly one valid molecule.
    ReactionPrediction,
    /// At least one component, all valid.
    Retrosynthesis,
    /// Non-empty text with no `[]()` characters.
    Caption,
    /// A single valid molecule via the strict parser.
    MoleculeGeneration,
    /// Non-empty and free of reserved tokens.
    Symbols,
}

impl FromStr for FormatChecker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => FormatChecker::None,
            "reaction_prediction" => FormatChecker::ReactionPrediction,
            "retrosynthesis" => FormatChecker::Retrosynthesis,
            "caption" => FormatChecker::Caption,
            "molecule_generation" => FormatChecker::MoleculeGeneration,
            "symbols" => FormatChecker::Symbols,
            other => return Err(Error::UnregisteredTask(other.to_string())),
        })
    }
}

impl FormatChecker {
    pub fn is_active(self) -> bool {
        self != FormatChecker::None
    }

    pub fn check(self, text: &str, seq: &[TokenId], vocab: &Vocab) -> bool {
        match self {
            FormatChecker::None => true,
            FormatChecker::ReactionPrediction => count_components(text) == 1,
            FormatChecker::Retrosynthesis => count_components(text) >= 1,
            FormatChecker::Caption => {
                !text.trim().is_empty() && !text.contains(['[', ']', '(', ')'])
            }
            FormatChecker::MoleculeGeneration => parse_smiles(text).is_ok(),
            FormatChecker::Symbols => !seq.is_empty() && !seq.iter().any(|&t| vocab.is_reserved(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the format bonus.
    pub alpha: f64,
    /// Divide the round-trip log-likelihood by |x| + 1.
    pub length_normalize: bool,
    /// Outputs identical to their input fail the format check.
    pub copy_guard: bool,
}

impl RewardConfig {
    /// `alpha = 2 ln V`, which puts any well-formed output whose mean
    /// reconstruction log-prob is at least `-ln V` above every malformed one.
    pub fn for_vocab_size(v: usize) -> Self {
        RewardConfig {
            alpha: 2.0 * (v as f64).ln(),
            length_normalize: true,
            copy_guard: true,
        }
    }

    pub fn validate(&self, vocab_size: usize, checker: FormatChecker) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "reward.alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        let floor = (vocab_size as f64).ln();
        if checker.is_active() && self.alpha < floor {
            return Err(Error::Config(format!(
                "reward.alpha = {} is below ln V = {floor:.6} with an active format checker",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Mean (or summed) log-likelihood under the frozen judge of reconstructing
/// `x` from `y` with the backward tag. Always <= 0.
pub fn roundtrip_reward(
    phi: &PolicyParams,
    judge_tag: TokenId,
    x: &[TokenId],
    y: &[TokenId],
    length_normalize: bool,
) -> f64 {
    let (_, total) = phi.sequence_logprob(judge_tag, y, x);
    if length_normalize {
        total / (x.len() + 1) as f64
    } else {
        total
    }
}

/// 1 when the output passes the checker (and, under the copy guard, differs
/// from the input text), else 0.
pub fn format_reward(
    checker: FormatChecker,
    y_text: &str,
    y: &[TokenId],
    input_text: &str,
    copy_guard: bool,
    vocab: &Vocab,
) -> f64 {
    if copy_guard && y_text == input_text {
        return 0.0;
    }
    f64::from(u8::from(checker.check(y_text, y, vocab)))
}

/// Round-trip term plus `alpha` times the format reward.
pub fn total_reward(roundtrip: f64, format: f64, cfg: &RewardConfig) -> f64 {
    roundtrip + cfg.alpha * format
}

/// Task metric in [0, 1] used as an auxiliary reward when labels exist.
pub fn metric_reward(y_text: &str, label: &str, kind: DomainKind) -> f64 {
    let chars = |s: &str| s.chars().collect::<Vec<char>>();
    match kind {
        DomainKind::Text => {
            let c: Vec<&str> = y_text.split_whitespace().collect();
            let r: Vec<&str> = label.split_whitespace().collect();
            if r.is_empty() {
                return 0.0;
            }
            let parts = [
                bleu(&c, &r, 2),
                bleu(&c, &r, 4),
                meteor_exact(&c, &r),
                rouge_n(&c, &r, 1),
                rouge_n(&c, &r, 2),
                rouge_l(&c, &r),
            ];
            parts
                .iter()
                .map(|p| *p.as_ref().unwrap_or(&0.0))
                .sum::<f64>()
                / 6.0
        }
        DomainKind::Molecule | DomainKind::Reaction => {
            let b = bleu(&chars(y_text), &chars(label), 4).unwrap_or(0.0);
            let fp = match (parse_molecule(y_text), parse_molecule(label)) {
                (Some(p), Some(l)) => fingerprint_sims(&p, &l).iter().sum(),
                _ => 0.0,
            };
            (b + fp) / 4.0
        }
        DomainKind::Symbols => {
            let b = bleu(&chars(y_text), &chars(label), 4).unwrap_or(0.0);
            let longest = y_text.chars().count().max(label.chars().count()).max(1);
            let sim = 1.0 - levenshtein(y_text, label) as f64 / longest as f64;
            (b + sim) / 2.0
        }
    }
}

/// Negative mean teacher-forced entropy of the policy along `y` (including
/// the end-of-sequence step). Lies in [-ln V, 0].
pub fn entropy_reward(theta: &PolicyParams, task: TokenId, x: &[TokenId], y: &[TokenId]) -> f64 {
    let mut total = 0.0;
    theta.for_each_position(task, x, y, |key, _| {
        let h: f64 = theta
            .next_token_dist(&key)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        total += h;
    });
    -total / (y.len() + 1) as f64
}
