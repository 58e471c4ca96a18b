//! Training regimes built on GRPO: single-direction round-trip training,
//! iterative role-swapping, supervised training with a metric reward,
//! self-play on synthetic data, and the baselines (entropy minimization and
//! supervised fine-tuning on self-generated data).

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairRecord};
use crate::domain::{DomainKind, TaskPair};
use crate::error::{Error, Result};
use crate::grpo::{train_step, Completion, GrpoConfig, Prompt, RewardFn, StepContext, StepStats};
use crate::metrics::{evaluate, MetricsReport};
use crate::policy::{PolicyParams, PolicySnapshot, SftExample};
use crate::reward::{entropy_reward, format_reward, metric_reward, roundtrip_reward, RewardConfig};
use crate::rng::{label, stream};
use crate::sampling::SamplerConfig;
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        SftConfig {
            epochs: 2,
            lr: 1.0,
            batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grpo: GrpoConfig,
    /// Sampling during rollouts.
    pub sampler: SamplerConfig,
    pub reward: RewardConfig,
    pub sft: SftConfig,
    /// Optimization steps per phase.
    pub steps: u64,
    pub seed: u64,
    /// Weight of the auxiliary metric reward in supervised mode.
    pub metric_weight: f64,
}

impl RunConfig {
    /// Defaults for a vocabulary of `v` tokens (the format weight scales with ln V).
    pub fn for_vocab_size(v: usize) -> Self {
        RunConfig {
            grpo: GrpoConfig::default(),
            sampler: SamplerConfig::default(),
            reward: RewardConfig::for_vocab_size(v),
            sft: SftConfig::default(),
            steps: 500,
            seed: 0,
            metric_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSchedule {
    /// Number of phases; each phase trains one direction.
    pub iterations: usize,
    pub start: Direction,
    /// Stop as soon as the held-out score drops below the best so far and
    /// return the best policy.
    pub early_stop: bool,
}

/// Hooks for logging and checkpointing during training.
pub trait Observer {
    fn on_step(&mut self, _phase: u64, _stats: &StepStats, _theta: &PolicyParams) -> Result<()> {
        Ok(())
    }
    fn on_phase_end(&mut self, _phase: u64, _theta: &PolicyParams) -> Result<()> {
        Ok(())
    }
}

pub struct NoopObserver;
impl Observer for NoopObserver {}

/// Keeps every step's stats in memory.
#[derive(Debug, Default)]
pub struct Recorder {
    pub steps: Vec<(u64, StepStats)>,
}

impl Observer for Recorder {
    fn on_step(&mut self, phase: u64, stats: &StepStats, _theta: &PolicyParams) -> Result<()> {
        self.steps.push((phase, stats.clone()));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: u64,
    pub stats: Vec<StepStats>,
}

/// Tokenizes dataset inputs (and keeps outputs as labels).
pub fn prompts(ds: &Dataset, vocab: &Vocab, kind: DomainKind) -> Result<Vec<Prompt>> {
    ds.records
        .iter()
        .map(|r| {
            Ok(Prompt {
                input: vocab.tokenize(&r.input, kind.scheme())?,
                text: r.input.clone(),
                label: r.output.clone(),
            })
        })
        .collect()
}

/// Supervised examples for the forward direction, plus the backward one
/// when `both` is set.
pub fn sft_examples(
    ds: &Dataset,
    vocab: &Vocab,
    pair: &TaskPair,
    both: bool,
) -> Result<Vec<SftExample>> {
    let mut out = Vec::new();
    for (x, y) in ds.pairs()? {
        let xs = vocab.tokenize(&x, pair.source.scheme())?;
        let ys = vocab.tokenize(&y, pair.target.scheme())?;
        if both {
            out.push(SftExample {
                task: pair.backward,
                conditioning: ys.clone(),
                target: xs.clone(),
            });
        }
        out.push(SftExample {
            task: pair.forward,
            conditioning: xs,
            target: ys,
        });
    }
    Ok(out)
}

/// Minibatch SFT for `cfg.epochs` epochs over a seeded shuffle. Returns the
/// mean pre-update log-likelihood of each epoch.
pub fn sft_train(
    theta: &mut PolicyParams,
    examples: &[SftExample],
    cfg: &SftConfig,
    seed: u64,
    path: &[u64],
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut p = vec![label::SFT];
        p.extend_from_slice(path);
        p.push(epoch as u64);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut stream(seed, &p));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<SftExample> = chunk.iter().map(|&i| examples[i].clone()).collect();
            total += theta.sft_update(&batch, cfg.lr)? * batch.len() as f64;
        }
        curve.push(total / examples.len() as f64);
    }
    Ok(curve)
}

/// Round-trip reward against a frozen judge, plus the format bonus and, when
/// `metric_weight > 0` and the prompt has a label, the task metric.
pub struct RoundTripReward {
    pub phi: PolicySnapshot,
    pub pair: TaskPair,
    pub cfg: RewardConfig,
    pub metric_weight: f64,
}

impl RewardFn for RoundTripReward {
    fn score(&self, _theta_old: &PolicyParams, prompt: &Prompt, c: &Completion) -> Result<f64> {
        let rt = roundtrip_reward(
            &self.phi,
            self.pair.backward,
            &prompt.input,
            &c.seq,
            self.cfg.length_normalize,
        );
        let f = format_reward(
            self.pair.forward_checker,
            &c.text,
            &c.seq,
            &prompt.text,
            self.cfg.copy_guard,
            self.phi.vocab(),
        );
        let mut r = rt + self.cfg.alpha * f;
        if self.metric_weight > 0.0 {
            if let Some(label) = &prompt.label {
                r += self.metric_weight * metric_reward(&c.text, label, self.pair.target);
            }
        }
        Ok(r)
    }
}

/// Negative teacher-forced entropy under the sampling policy, plus the
/// format bonus.
pub struct EntropyReward {
    pub pair: TaskPair,
    pub cfg: RewardConfig,
}

impl RewardFn for EntropyReward {
    fn score(&self, theta_old: &PolicyParams, prompt: &Prompt, c: &Completion) -> Result<f64> {
        let h = entropy_reward(theta_old, self.pair.forward, &prompt.input, &c.seq);
        let f = format_reward(
            self.pair.forward_checker,
            &c.text,
            &c.seq,
            &prompt.text,
            self.cfg.copy_guard,
            theta_old.vocab(),
        );
        Ok(h + self.cfg.alpha * f)
    }
}

/// Runs GRPO steps `start_step..cfg.steps` of one phase with the given
/// reward. `start` is the policy as it was when the phase began; it is the
/// fixed KL target under [`crate::grpo::KlReference::Initial`].
#[allow(clippy::too_many_arguments)]
pub fn run_grpo(
    theta: &mut PolicyParams,
    start: &PolicySnapshot,
    data: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
    reward: &dyn RewardFn,
    phase: u64,
    start_step: u64,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.grpo.validate()?;
    cfg.sampler.validate()?;
    let mut stats = Vec::new();
    for step in start_step..cfg.steps {
        let mut rng = stream(cfg.seed, &[label::BATCH, phase, step]);
        let k = cfg.grpo.groups_per_step;
        let idx: Vec<usize> = if data.len() >= k {
            index::sample(&mut rng, data.len(), k).into_vec()
        } else {
            (0..k)
                .map(|_| rand::Rng::gen_range(&mut rng, 0..data.len()))
                .collect()
        };
        let batch: Vec<Prompt> = idx.iter().map(|&i| data[i].clone()).collect();
        let ctx = StepContext {
            task: pair.forward,
            scheme: pair.target.scheme(),
            reward,
            grpo: &cfg.grpo,
            sampler: &cfg.sampler,
            reference: Some(start),
            seed: cfg.seed,
            path: vec![phase, step],
        };
        let s = train_step(theta, &batch, &ctx, step)?;
        obs.on_step(phase, &s, theta)?;
        stats.push(s);
    }
    obs.on_phase_end(phase, theta)?;
    Ok(PhaseSummary { phase, stats })
}

/// Self-supervised round-trip training of the forward direction on
/// source-only inputs. The judge is a snapshot of `theta` taken once at the
/// start and never updated.
pub fn rtrl_train(
    theta: &mut PolicyParams,
    data: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
    phase: u64,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    let start = theta.snapshot();
    rtrl_phase(theta, &start, data, pair, cfg, 0.0, phase, 0, obs)
}

/// Steps `start_step..` of a round-trip phase whose judge is `start`, the
/// policy at the beginning of the phase. Resuming passes the saved start.
#[allow(clippy::too_many_arguments)]
pub fn rtrl_phase(
    theta: &mut PolicyParams,
    start: &PolicySnapshot,
    data: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
    metric_weight: f64,
    phase: u64,
    start_step: u64,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.reward
        .validate(theta.vocab().len(), pair.forward_checker)?;
    let reward = RoundTripReward {
        phi: start.clone(),
        pair: pair.clone(),
        cfg: cfg.reward,
        metric_weight,
    };
    run_grpo(
        theta, start, data, pair, cfg, &reward, phase, start_step, obs,
    )
}

/// Held-out score used for early stopping; higher is better.
pub type ScoreFn<'a> = dyn Fn(&PolicyParams) -> Result<f64> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSummary {
    pub phases: Vec<PhaseSummary>,
    /// Held-out score before training and after each completed phase.
    pub scores: Vec<f64>,
    pub stopped_early: bool,
}

/// Alternates directions: even phases train `pair` on `x`, odd phases train
/// the swapped pair on `y` (or the reverse when starting backward). Each
/// phase re-snapshots the judge from the current policy. `score` evaluates
/// held-out consistency for early stopping.
#[allow(clippy::too_many_arguments)]
pub fn iterative_rtrl(
    theta: &mut PolicyParams,
    x: &[Prompt],
    y: &[Prompt],
    pair: &TaskPair,
    schedule: &IterationSchedule,
    cfg: &RunConfig,
    score: Option<&ScoreFn<'_>>,
    obs: &mut dyn Observer,
) -> Result<IterativeSummary> {
    if schedule.iterations == 0 {
        return Err(Error::Config("train.iterations must be at least 1".into()));
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let offset = usize::from(schedule.start == Direction::Backward);
    let mut summary = IterativeSummary {
        phases: Vec::new(),
        scores: Vec::new(),
        stopped_early: false,
    };
    let mut best: Option<(f64, PolicyParams)> = None;
    if let (true, Some(f)) = (schedule.early_stop, score) {
        let s = f(theta)?;
        summary.scores.push(s);
        best = Some((s, theta.clone()));
    }
    for k in 0..schedule.iterations {
        let (data, p) = if (k + offset) % 2 == 0 {
            (x, pair.clone())
        } else {
            (y, pair.swap())
        };
        summary
            .phases
            .push(rtrl_train(theta, data, &p, cfg, k as u64, obs)?);
        if let (true, Some(f)) = (schedule.early_stop, score) {
            let s = f(theta)?;
            summary.scores.push(s);
            let (best_score, _) = best.as_ref().expect("scored before training");
            if s < *best_score {
                *theta = best.take().expect("present").1;
                summary.stopped_early = true;
                break;
            }
            best = Some((s, theta.clone()));
        }
    }
    Ok(summary)
}

/// SFT warm start on both directions for `cfg.sft.epochs` epochs (none when
/// zero). Returns the per-epoch mean log-likelihood.
pub fn supervised_warm_start(
    theta: &mut PolicyParams,
    data: &Dataset,
    pair: &TaskPair,
    cfg: &RunConfig,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let vocab = theta.vocab().clone();
    let examples = sft_examples(data, &vocab, pair, true)?;
    if cfg.sft.epochs == 0 {
        return Ok(Vec::new());
    }
    sft_train(theta, &examples, &cfg.sft, cfg.seed, &[0])
}

/// Optional SFT warm start, then round-trip training with the task metric
/// (weighted by `cfg.metric_weight`) as an auxiliary reward.
pub fn supervised_rtrl(
    theta: &mut PolicyParams,
    data: &Dataset,
    pair: &TaskPair,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    supervised_warm_start(theta, data, pair, cfg)?;
    let ps = prompts(data, theta.vocab(), pair.source)?;
    let start = theta.snapshot();
    rtrl_phase(theta, &start, &ps, pair, cfg, cfg.metric_weight, 0, 0, obs)
}

/// Greedy generation for every prompt.
pub fn greedy_outputs(
    theta: &PolicyParams,
    task: TokenId,
    data: &[Prompt],
    max_len: usize,
) -> Result<Vec<Vec<TokenId>>> {
    let greedy = SamplerConfig::greedy();
    data.par_iter()
        .map(|p| theta.generate(task, &p.input, &greedy, max_len, &mut stream(0, &[])))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfPlayRound {
    pub phase: PhaseSummary,
    pub survival_rate: f64,
    /// Synthetic records that passed the format filter; they become the
    /// next round's (unlabeled) source set.
    pub synthetic: Vec<PairRecord>,
}

/// Round `r` trains the current direction on the current source set, then
/// synthesizes the next source set by greedy forward generation filtered by
/// the format check, and swaps roles.
pub fn selfplay_rtrl(
    theta: &mut PolicyParams,
    seed_set: &[Prompt],
    pair: &TaskPair,
    rounds: usize,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<Vec<SelfPlayRound>> {
    if rounds == 0 {
        return Err(Error::Config("train.rounds must be at least 1".into()));
    }
    let mut source: Vec<Prompt> = seed_set.to_vec();
    let mut out = Vec::new();
    let vocab = theta.vocab().clone();
    for r in 0..rounds {
        let p = if r % 2 == 0 {
            pair.clone()
        } else {
            pair.swap()
        };
        let phase = rtrl_train(theta, &source, &p, cfg, r as u64, obs)?;
        let outputs = greedy_outputs(theta, p.forward, &source, cfg.grpo.max_len)?;
        let mut next = Vec::new();
        for (prompt, seq) in source.iter().zip(outputs) {
            let text = vocab.detokenize(&seq, p.target.scheme());
            let ok = format_reward(
                p.forward_checker,
                &text,
                &seq,
                &prompt.text,
                cfg.reward.copy_guard,
                &vocab,
            );
            if ok == 1.0 {
                next.push(Prompt {
                    input: seq,
                    text,
                    label: None,
                });
            }
        }
        let survival_rate = next.len() as f64 / source.len() as f64;
        if next.is_empty() {
            return Err(Error::EmptySynthetic {
                survival: survival_rate,
            });
        }
        let synthetic = next
            .iter()
            .map(|p| PairRecord::unlabeled(p.text.clone()))
            .collect();
        out.push(SelfPlayRound {
            phase,
            survival_rate,
            synthetic,
        });
        source = next;
    }
    Ok(out)
}

/// Forward then backward generation for each input, scored against the
/// input with the source-domain battery.
pub fn roundtrip_eval(
    theta: &PolicyParams,
    inputs: &[Prompt],
    pair: &TaskPair,
    sampler: &SamplerConfig,
    max_len: usize,
) -> Result<MetricsReport> {
    let vocab = theta.vocab();
    let pairs: Vec<(String, String)> = inputs
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let mut rng = stream(sampler.seed, &[label::EVAL, j as u64]);
            let y = theta.generate(pair.forward, &p.input, sampler, max_len, &mut rng)?;
            let back = theta.generate(pair.backward, &y, sampler, max_len, &mut rng)?;
            Ok((
                vocab.detokenize(&back, pair.source.scheme()),
                p.text.clone(),
            ))
        })
        .collect::<Result<_>>()?;
    evaluate(pair.source, &pairs)
}

/// Forward predictions scored against labels with the target-domain battery.
pub fn task_eval(
    theta: &PolicyParams,
    data: &[Prompt],
    pair: &TaskPair,
    sampler: &SamplerConfig,
    max_len: usize,
) -> Result<MetricsReport> {
    let vocab = theta.vocab();
    let pairs: Vec<(String, String)> = data
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let label = p.label.clone().ok_or(Error::MissingLabel(j))?;
            let mut rng = stream(sampler.seed, &[label::EVAL, j as u64]);
            let y = theta.generate(pair.forward, &p.input, sampler, max_len, &mut rng)?;
            Ok((vocab.detokenize(&y, pair.target.scheme()), label))
        })
        .collect::<Result<_>>()?;
    evaluate(pair.target, &pairs)
}

/// Greedy self-labels for `x`, then forward SFT on them. Returns the labels.
pub fn sft_synthetic_output(
    theta: &mut PolicyParams,
    x: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
) -> Result<Vec<String>> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ys = greedy_outputs(theta, pair.forward, x, cfg.grpo.max_len)?;
    let vocab = theta.vocab().clone();
    let examples: Vec<SftExample> = x
        .iter()
        .zip(&ys)
        .map(|(p, y)| SftExample {
            task: pair.forward,
            conditioning: p.input.clone(),
            target: y.clone(),
        })
        .collect();
    sft_train(theta, &examples, &cfg.sft, cfg.seed, &[1])?;
    Ok(ys
        .iter()
        .map(|y| vocab.detokenize(y, pair.target.scheme()))
        .collect())
}

/// Greedy synthetic inputs for targets `y` via the backward direction, then
/// forward SFT on (synthetic input, y). Returns the synthetic inputs.
pub fn sft_synthetic_input(
    theta: &mut PolicyParams,
    y: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
) -> Result<Vec<String>> {
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let xs = greedy_outputs(theta, pair.backward, y, cfg.grpo.max_len)?;
    let vocab = theta.vocab().clone();
    let examples: Vec<SftExample> = y
        .iter()
        .zip(&xs)
        .map(|(p, x)| SftExample {
            task: pair.forward,
            conditioning: x.clone(),
            target: p.input.clone(),
        })
        .collect();
    sft_train(theta, &examples, &cfg.sft, cfg.seed, &[2])?;
    Ok(xs
        .iter()
        .map(|x| vocab.detokenize(x, pair.source.scheme()))
        .collect())
}

/// Entropy-minimization baseline: [`rtrl_train`] with the negative
/// generation entropy in place of the round-trip likelihood.
pub fn em_train(
    theta: &mut PolicyParams,
    data: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
    phase: u64,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    let start = theta.snapshot();
    em_phase(theta, &start, data, pair, cfg, phase, 0, obs)
}

/// Steps `start_step..` of an entropy-minimization phase begun at `start`.
#[allow(clippy::too_many_arguments)]
pub fn em_phase(
    theta: &mut PolicyParams,
    start: &PolicySnapshot,
    data: &[Prompt],
    pair: &TaskPair,
    cfg: &RunConfig,
    phase: u64,
    start_step: u64,
    obs: &mut dyn Observer,
) -> Result<PhaseSummary> {
    cfg.reward
        .validate(theta.vocab().len(), pair.forward_checker)?;
    let reward = EntropyReward {
        pair: pair.clone(),
        cfg: cfg.reward,
    };
    run_grpo(
        theta, start, data, pair, cfg, &reward, phase, start_step, obs,
    )
}
