//! Temperature, top-k and top-p (nucleus) sampling over a categorical
//! distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_k: usize,
    pub top_p: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: 0.9,
            top_k: 40,
            top_p: 0.9,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    /// Argmax decoding, lowest id on ties.
    pub fn greedy() -> Self {
        SamplerConfig {
            temperature: 1.0,
            top_k: 1,
            top_p: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidSampler(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidSampler("top_k must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidSampler(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

/// The distribution actually sampled from: tempered, cut to the top-k
/// tokens, then to the smallest prefix reaching `top_p` mass, renormalized.
/// Tokens are ordered by descending probability, lower id first on ties.
/// Returns `(token, probability)` pairs in that order.
pub fn cut_distribution(probs: &[f64], cfg: &SamplerConfig) -> Result<Vec<(TokenId, f64)>> {
    cfg.validate()?;
    let max = probs.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::AllZeroDistribution);
    }
    let inv_t = 1.0 / cfg.temperature;
    let ln_max = max.ln();
    let mut support: Vec<(TokenId, f64)> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i as TokenId, ((p.ln() - ln_max) * inv_t).exp()))
        .collect();
    support.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    support.truncate(cfg.top_k);
    let total: f64 = support.iter().map(|s| s.1).sum();
    let mut cum = 0.0;
    let mut keep = support.len();
    for (i, s) in support.iter().enumerate() {
        cum += s.1 / total;
        if cum >= cfg.top_p - 1e-12 {
            keep = i + 1;
            break;
        }
    }
    support.truncate(keep);
    let total: f64 = support.iter().map(|s| s.1).sum();
    for s in &mut support {
        s.1 /= total;
    }
    Ok(support)
}

pub fn sample_categorical<R: Rng + ?Sized>(
    probs: &[f64],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<TokenId> {
    let cut = cut_distribution(probs, cfg)?;
    if cut.len() == 1 {
        return Ok(cut[0].0);
    }
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for &(id, p) in &cut {
        cum += p;
        if u < cum {
            return Ok(id);
        }
    }
    Ok(cut.last().expect("non-empty cut").0)
}
