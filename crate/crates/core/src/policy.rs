//! Tabular autoregressive policy.
//!
//! The next-token distribution at output position `i` is a softmax over a
//! logit row selected by a [`ContextKey`]: the task tag, the conditioning
//! token at position `i` (or `<pad>` past its end), and the previous `m`
//! output tokens (most recent first, `<bos>`-padded). Contexts without a
//! stored row have zero logits, i.e. a uniform distribution.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::{sample_categorical, SamplerConfig};
use crate::vocab::{TokenId, Vocab};

pub const MAX_ORDER: usize = 4;
pub const DEFAULT_ORDER: usize = 2;

/// Unused history slots hold this value so keys of one model compare sanely.
const UNUSED: TokenId = TokenId::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextKey {
    pub task: TokenId,
    pub aligned: TokenId,
    history: [TokenId; MAX_ORDER],
}

impl ContextKey {
    pub fn new(task: TokenId, aligned: TokenId, history: &[TokenId]) -> Self {
        assert!(history.len() <= MAX_ORDER, "history longer than MAX_ORDER");
        let mut h = [UNUSED; MAX_ORDER];
        h[..history.len()].copy_from_slice(history);
        ContextKey {
            task,
            aligned,
            history: h,
        }
    }

    /// Previous output tokens, most recent first.
    pub fn history(&self) -> &[TokenId] {
        let n = self.history.iter().take_while(|&&t| t != UNUSED).count();
        &self.history[..n]
    }
}

impl fmt::Display for ContextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(task {}, aligned {}, history {:?})",
            self.task,
            self.aligned,
            self.history()
        )
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Log-softmax evaluated at a single index.
fn log_softmax_at(logits: &[f64], t: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits[t] - lse
}

/// Sparse gradient (or any per-context vector field) over logit rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GradAccumulator {
    width: usize,
    rows: BTreeMap<ContextKey, Vec<f64>>,
}

impl GradAccumulator {
    pub fn new(width: usize) -> Self {
        GradAccumulator {
            width,
            rows: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &BTreeMap<ContextKey, Vec<f64>> {
        &self.rows
    }

    pub fn get(&self, key: &ContextKey) -> Option<&[f64]> {
        self.rows.get(key).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_mut(&mut self, key: ContextKey) -> &mut [f64] {
        let width = self.width;
        self.rows.entry(key).or_insert_with(|| vec![0.0; width])
    }

    pub fn add_scaled(&mut self, key: ContextKey, values: &[f64], scale: f64) {
        for (g, v) in self.row_mut(key).iter_mut().zip(values) {
            *g += scale * v;
        }
    }

    pub fn merge(&mut self, other: &GradAccumulator) {
        assert_eq!(self.width, other.width, "gradient widths differ");
        for (k, v) in &other.rows {
            self.add_scaled(*k, v, 1.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.rows.values_mut() {
            for g in v {
                *g *= s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .values()
            .flatten()
            .fold(0.0, |m: f64, g| m.max(g.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    vocab: Arc<Vocab>,
    order: usize,
    logits: BTreeMap<ContextKey, Vec<f64>>,
    steps: u64,
}

/// One supervised example: task tag, conditioning sequence, target sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SftExample {
    pub task: TokenId,
    pub conditioning: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

impl PolicyParams {
    pub fn new(vocab: Arc<Vocab>, order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::BadOrder(order));
        }
        Ok(PolicyParams {
            vocab,
            order,
            logits: BTreeMap::new(),
            steps: 0,
        })
    }

    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub(crate) fn set_steps(&mut self, steps: u64) {
        self.steps = steps;
    }

    pub fn table(&self) -> &BTreeMap<ContextKey, Vec<f64>> {
        &self.logits
    }

    pub fn logits(&self, key: &ContextKey) -> Option<&[f64]> {
        self.logits.get(key).map(Vec::as_slice)
    }

    pub fn set_logits(&mut self, key: ContextKey, row: Vec<f64>) -> Result<()> {
        if row.len() != self.vocab.len() {
            return Err(Error::RowWidth {
                expected: self.vocab.len(),
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                key: key.to_string(),
            });
        }
        if key.history().len() != self.order {
            return Err(Error::BadOrder(key.history().len()));
        }
        self.logits.insert(key, row);
        Ok(())
    }

    /// Context for output position `i`, given the outputs produced before it.
    pub fn context(
        &self,
        task: TokenId,
        conditioning: &[TokenId],
        prev: &[TokenId],
        i: usize,
    ) -> ContextKey {
        let aligned = conditioning.get(i).copied().unwrap_or(self.vocab.pad());
        let mut hist = [UNUSED; MAX_ORDER];
        for (j, h) in hist.iter_mut().enumerate().take(self.order) {
            *h = if i > j {
                prev[i - 1 - j]
            } else {
                self.vocab.bos()
            };
        }
        ContextKey {
            task,
            aligned,
            history: hist,
        }
    }

    pub fn next_token_dist(&self, key: &ContextKey) -> Vec<f64> {
        match self.logits.get(key) {
            Some(row) => softmax(row),
            None => vec![1.0 / self.vocab.len() as f64; self.vocab.len()],
        }
    }

    fn log_prob(&self, key: &ContextKey, t: TokenId) -> f64 {
        match self.logits.get(key) {
            Some(row) => log_softmax_at(row, t as usize),
            None => -(self.vocab.len() as f64).ln(),
        }
    }

    /// Samples until `<eos>` or `max_len` tokens; the `<eos>` is not returned.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        task: TokenId,
        input: &[TokenId],
        sampler: &SamplerConfig,
        max_len: usize,
        rng: &mut R,
    ) -> Result<Vec<TokenId>> {
        let mut out = Vec::new();
        while out.len() < max_len {
            let key = self.context(task, input, &out, out.len());
            let t = sample_categorical(&self.next_token_dist(&key), sampler, rng)?;
            if t == self.vocab.eos() {
                break;
            }
            out.push(t);
        }
        Ok(out)
    }

    /// Teacher-forced log-probabilities of `target` followed by `<eos>`.
    pub fn sequence_logprob(
        &self,
        task: TokenId,
        conditioning: &[TokenId],
        target: &[TokenId],
    ) -> (Vec<f64>, f64) {
        let eos = self.vocab.eos();
        let per: Vec<f64> = (0..=target.len())
            .map(|i| {
                let key = self.context(task, conditioning, target, i);
                self.log_prob(&key, target.get(i).copied().unwrap_or(eos))
            })
            .collect();
        let total = per.iter().sum();
        (per, total)
    }

    /// Visits every teacher-forced position: its context and realized token.
    pub fn for_each_position(
        &self,
        task: TokenId,
        conditioning: &[TokenId],
        target: &[TokenId],
        mut f: impl FnMut(ContextKey, TokenId),
    ) {
        let eos = self.vocab.eos();
        for i in 0..=target.len() {
            f(
                self.context(task, conditioning, target, i),
                target.get(i).copied().unwrap_or(eos),
            );
        }
    }

    /// Adds `weight * d/dθ log p(target | conditioning)` to `acc`.
    pub fn accumulate_logprob_grad(
        &self,
        task: TokenId,
        conditioning: &[TokenId],
        target: &[TokenId],
        weight: f64,
        acc: &mut GradAccumulator,
    ) {
        self.for_each_position(task, conditioning, target, |key, t| {
            let p = self.next_token_dist(&key);
            let row = acc.row_mut(key);
            for (g, pj) in row.iter_mut().zip(&p) {
                *g -= weight * pj;
            }
            row[t as usize] += weight;
        });
    }

    pub fn logprob_grad(
        &self,
        task: TokenId,
        conditioning: &[TokenId],
        target: &[TokenId],
    ) -> GradAccumulator {
        let mut acc = GradAccumulator::new(self.vocab.len());
        self.accumulate_logprob_grad(task, conditioning, target, 1.0, &mut acc);
        acc
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(Arc::new(self.clone()))
    }

    /// Gradient ascent: `logits[c] += lr * grad[c]`. Rows that are entirely
    /// zero are skipped, so they create no table entries.
    pub fn apply_update(&mut self, grad: &GradAccumulator, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::BadLearningRate(lr));
        }
        for (key, row) in grad.rows() {
            if row.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    key: key.to_string(),
                });
            }
        }
        let width = self.vocab.len();
        for (key, row) in grad.rows() {
            if row.iter().all(|&g| g == 0.0) {
                continue;
            }
            let target = self.logits.entry(*key).or_insert_with(|| vec![0.0; width]);
            for (z, g) in target.iter_mut().zip(row) {
                *z += lr * g;
            }
        }
        self.steps += 1;
        Ok(())
    }

    /// One ascent step on the batch-mean sequence log-likelihood. Returns the
    /// mean log-likelihood before the step.
    pub fn sft_update(&mut self, batch: &[SftExample], lr: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut acc = GradAccumulator::new(self.vocab.len());
        let w = 1.0 / batch.len() as f64;
        let mut ll = 0.0;
        for ex in batch {
            ll += self
                .sequence_logprob(ex.task, &ex.conditioning, &ex.target)
                .1;
            self.accumulate_logprob_grad(ex.task, &ex.conditioning, &ex.target, w, &mut acc);
        }
        self.apply_update(&acc, lr)?;
        Ok(ll * w)
    }

    pub fn mean_logprob(&self, batch: &[SftExample]) -> f64 {
        batch
            .iter()
            .map(|ex| {
                self.sequence_logprob(ex.task, &ex.conditioning, &ex.target)
                    .1
            })
            .sum::<f64>()
            / batch.len().max(1) as f64
    }
}

/// Frozen copy of a policy. Cloning shares the same table.
#[derive(Debug, Clone)]
pub struct PolicySnapshot(Arc<PolicyParams>);

impl PolicySnapshot {
    pub fn snapshot(&self) -> PolicySnapshot {
        self.clone()
    }

    /// A mutable copy to continue training from.
    pub fn to_params(&self) -> PolicyParams {
        (*self.0).clone()
    }
}

impl Deref for PolicySnapshot {
    type Target = PolicyParams;
    fn deref(&self) -> &PolicyParams {
        &self.0
    }
}

impl PartialEq for PolicySnapshot {
    fn eq(&self, other: &Self) -> bool {
        *self.0 == *other.0
    }
}
