//! Group-relative policy optimization.
//!
//! Each prompt gets a group of sampled completions. Rewards are normalized
//! within the group, and the policy follows a clipped sequence-level ratio
//! objective with an exact per-position KL penalty:
//!
//! `loss = -(1/N) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) + beta * KL`
//!
//! where `rho_i = exp(log p_theta(y_i) - log p_old(y_i))` and KL is the mean
//! over completions of the per-position mean of `KL(pi_theta || pi_ref)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{GradAccumulator, PolicyParams};
use crate::rng::{label, stream};
use crate::sampling::SamplerConfig;
use crate::vocab::{Scheme, Sequence, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlReference {
    /// The policy at the start of the current step.
    Old,
    /// A reference fixed for the whole phase (the policy it started from).
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub eps_norm: f64,
    pub learning_rate: f64,
    pub inner_epochs: usize,
    pub groups_per_step: usize,
    /// Generation length cap for completions.
    pub max_len: usize,
    pub kl_reference: KlReference,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 12,
            clip_eps: 0.2,
            kl_beta: 0.04,
            eps_norm: 1e-8,
            learning_rate: 1.0,
            inner_epochs: 1,
            groups_per_step: 16,
            max_len: 32,
            kl_reference: KlReference::Old,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.group_size < 2 {
            return bad(format!(
                "grpo.group_size must be at least 2, got {}",
                self.group_size
            ));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad(format!(
                "grpo.clip_eps must lie in (0, 1), got {}",
                self.clip_eps
            ));
        }
        if !(self.kl_beta >= 0.0 && self.kl_beta.is_finite()) {
            return bad(format!(
                "grpo.kl_beta must be non-negative, got {}",
                self.kl_beta
            ));
        }
        if !(self.eps_norm >= 0.0) {
            return bad(format!(
                "grpo.eps_norm must be non-negative, got {}",
                self.eps_norm
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "grpo.learning_rate must be non-negative, got {}",
                self.learning_rate
            ));
        }
        if self.inner_epochs == 0 || self.groups_per_step == 0 || self.max_len == 0 {
            return bad(
                "grpo.inner_epochs, grpo.groups_per_step and grpo.max_len must be positive".into(),
            );
        }
        Ok(())
    }
}

/// `(r_i - mean) / (std + eps_norm)` with the population standard deviation.
pub fn normalize_advantages(rewards: &[f64], eps_norm: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::GroupTooSmall(rewards.len()));
    }
    // the rounded mean of a constant group need not equal the constant
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + eps_norm;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// The prompt side of a rollout: tokenized input, its text and an optional
/// label (present only in supervised mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub input: Sequence,
    pub text: String,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub seq: Sequence,
    pub text: String,
}

/// Scores one completion. `theta_old` is the policy the group was sampled from.
pub trait RewardFn: Sync {
    fn score(
        &self,
        theta_old: &PolicyParams,
        prompt: &Prompt,
        completion: &Completion,
    ) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub task: TokenId,
    pub input: Sequence,
    pub completions: Vec<Completion>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Sequence log-probability of each completion under the sampling policy.
    pub old_logprobs: Vec<f64>,
}

impl RolloutGroup {
    /// Builds a group from scored completions, normalizing advantages and
    /// recording log-probs under `old`.
    pub fn new(
        old: &PolicyParams,
        task: TokenId,
        input: Sequence,
        completions: Vec<Completion>,
        rewards: Vec<f64>,
        eps_norm: f64,
    ) -> Result<Self> {
        let advantages = normalize_advantages(&rewards, eps_norm)?;
        let old_logprobs = completions
            .iter()
            .map(|c| old.sequence_logprob(task, &input, &c.seq).1)
            .collect();
        Ok(RolloutGroup {
            task,
            input,
            completions,
            rewards,
            advantages,
            old_logprobs,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub policy_loss: f64,
    pub kl: f64,
    /// Fraction of completions whose clipped term is the active minimum.
    pub clip_fraction: f64,
    /// Gradient of `loss` with respect to the logits.
    pub grad: GradAccumulator,
}

/// Exact categorical KL(p || q) at one context and its gradient with respect
/// to the logits of `p`: `p_k (ln p_k - ln q_k - KL)`.
fn kl_and_grad(p: &[f64], q: &[f64]) -> (f64, Vec<f64>) {
    let logratio: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pk, &qk)| if pk > 0.0 { pk.ln() - qk.ln() } else { 0.0 })
        .collect();
    let kl: f64 = p.iter().zip(&logratio).map(|(pk, l)| pk * l).sum();
    let grad = p
        .iter()
        .zip(&logratio)
        .map(|(pk, l)| pk * (l - kl))
        .collect();
    (kl, grad)
}

/// Clipped surrogate loss and its analytic gradient. `reference` is the KL
/// target; `None` uses `old`.
pub fn grpo_loss(
    theta: &PolicyParams,
    old: &PolicyParams,
    reference: Option<&PolicyParams>,
    groups: &[RolloutGroup],
    cfg: &GrpoConfig,
) -> Result<LossOutput> {
    let reference = reference.unwrap_or(old);
    let n: usize = groups.iter().map(|g| g.completions.len()).sum();
    let mut grad = GradAccumulator::new(theta.vocab().len());
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let inv_n = 1.0 / n as f64;
    let (mut policy_loss, mut kl_total, mut clipped) = (0.0, 0.0, 0usize);
    for (gi, g) in groups.iter().enumerate() {
        for (ci, c) in g.completions.iter().enumerate() {
            let a = g.advantages[ci];
            let logp = theta.sequence_logprob(g.task, &g.input, &c.seq).1;
            let rho = (logp - g.old_logprobs[ci]).exp();
            let unclipped = rho * a;
            let clipped_term = rho.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
            let clip_active =
                (a > 0.0 && rho > 1.0 + cfg.clip_eps) || (a < 0.0 && rho < 1.0 - cfg.clip_eps);
            let term = unclipped.min(clipped_term);
            if !term.is_finite() {
                return Err(Error::NonFiniteLoss {
                    group: gi,
                    completion: ci,
                });
            }
            policy_loss -= term * inv_n;
            if clip_active {
                clipped += 1;
            } else if a != 0.0 {
                // d(-rho A / N) = -(rho A / N) d log p
                theta.accumulate_logprob_grad(
                    g.task,
                    &g.input,
                    &c.seq,
                    -unclipped * inv_n,
                    &mut grad,
                );
            }
            let positions = (c.seq.len() + 1) as f64;
            let mut kl_seq = 0.0;
            theta.for_each_position(g.task, &g.input, &c.seq, |key, _| {
                let (kl, kgrad) = kl_and_grad(
                    &theta.next_token_dist(&key),
                    &reference.next_token_dist(&key),
                );
                kl_seq += kl;
                if cfg.kl_beta > 0.0 {
                    grad.add_scaled(key, &kgrad, cfg.kl_beta * inv_n / positions);
                }
            });
            if !kl_seq.is_finite() {
                return Err(Error::NonFiniteLoss {
                    group: gi,
                    completion: ci,
                });
            }
            kl_total += kl_seq / positions;
        }
    }
    let kl = kl_total * inv_n;
    Ok(LossOutput {
        loss: policy_loss + cfg.kl_beta * kl,
        policy_loss,
        kl,
        clip_fraction: clipped as f64 * inv_n,
        grad,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub mean_reward: f64,
    pub mean_abs_adv: f64,
    pub clip_fraction: f64,
    pub kl: f64,
    pub loss: f64,
}

/// Everything a step needs besides the policy and the batch.
pub struct StepContext<'a> {
    pub task: TokenId,
    /// Tokenization scheme of the completions (for their text form).
    pub scheme: Scheme,
    pub reward: &'a dyn RewardFn,
    pub grpo: &'a GrpoConfig,
    pub sampler: &'a SamplerConfig,
    /// Fixed KL target for [`KlReference::Initial`].
    pub reference: Option<&'a PolicyParams>,
    pub seed: u64,
    /// Stream path identifying this step; group and completion indices are
    /// appended per sample.
    pub path: Vec<u64>,
}

/// Samples and scores one group per prompt. Rollouts run in parallel; each
/// sample draws from its own seeded stream and results are gathered in
/// index order.
pub fn collect_groups(
    old: &PolicyParams,
    batch: &[Prompt],
    ctx: &StepContext<'_>,
) -> Result<Vec<RolloutGroup>> {
    let g = ctx.grpo.group_size;
    let vocab = old.vocab();
    let samples: Vec<(Completion, f64)> = (0..batch.len() * g)
        .into_par_iter()
        .map(|idx| {
            let (gi, ci) = (idx / g, idx % g);
            let mut path = vec![label::ROLLOUT];
            path.extend_from_slice(&ctx.path);
            path.extend([gi as u64, ci as u64]);
            let mut rng = stream(ctx.seed, &path);
            let prompt = &batch[gi];
            let seq = old.generate(
                ctx.task,
                &prompt.input,
                ctx.sampler,
                ctx.grpo.max_len,
                &mut rng,
            )?;
            let text = vocab.detokenize(&seq, ctx.scheme);
            let completion = Completion { seq, text };
            let r = ctx.reward.score(old, prompt, &completion)?;
            Ok((completion, r))
        })
        .collect::<Result<_>>()?;
    let mut it = samples.into_iter();
    batch
        .iter()
        .map(|prompt| {
            let (completions, rewards): (Vec<_>, Vec<_>) = it.by_ref().take(g).unzip();
            RolloutGroup::new(
                old,
                ctx.task,
                prompt.input.clone(),
                completions,
                rewards,
                ctx.grpo.eps_norm,
            )
        })
        .collect()
}

/// One optimization step: snapshot `theta` as the sampling policy, collect
/// groups, then apply `inner_epochs` descent steps on the loss (skipped when
/// the learning rate is 0). Stats come from the first inner epoch.
pub fn train_step(
    theta: &mut PolicyParams,
    batch: &[Prompt],
    ctx: &StepContext<'_>,
    step: u64,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    ctx.grpo.validate()?;
    let old = theta.snapshot();
    let groups = collect_groups(&old, batch, ctx)?;
    let reference = match ctx.grpo.kl_reference {
        KlReference::Old => None,
        KlReference::Initial => ctx.reference,
    };
    let mut first: Option<LossOutput> = None;
    for _ in 0..ctx.grpo.inner_epochs {
        let mut out = grpo_loss(theta, &old, reference, &groups, ctx.grpo)?;
        if ctx.grpo.learning_rate > 0.0 {
            out.grad.scale(-1.0);
            theta.apply_update(&out.grad, ctx.grpo.learning_rate)?;
        }
        first.get_or_insert(out);
    }
    let out = first.expect("at least one inner epoch");
    let n: usize = groups.iter().map(|g| g.rewards.len()).sum();
    let rewards = groups.iter().flat_map(|g| &g.rewards).sum::<f64>();
    let abs_adv = groups
        .iter()
        .flat_map(|g| &g.advantages)
        .map(|a| a.abs())
        .sum::<f64>();
    Ok(StepStats {
        step,
        mean_reward: rewards / n as f64,
        mean_abs_adv: abs_adv / n as f64,
        clip_fraction: out.clip_fraction,
        kl: out.kl,
        loss: out.loss,
    })
}
