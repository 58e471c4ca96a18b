//! The seeded toy cipher experiment behind the training-claim checks.
//!
//! Cipher over a 16-symbol alphabet, strings of length at most 12. The base
//! policy is an order-0 table fitted by SFT on 200 pairs whose outputs are
//! 25% corrupted; 600 further inputs are the unlabeled training pool and the
//! last 200 pairs are held out.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rtrl_core::data::{cipher_target_symbols, corrupt_outputs, gen_cipher_task, Dataset};
use rtrl_core::domain::{cipher_task, TaskPair};
use rtrl_core::grpo::Prompt;
use rtrl_core::policy::PolicyParams;
use rtrl_core::sampling::SamplerConfig;
use rtrl_core::train::*;
use rtrl_core::vocab::Vocab;

use super::Check;

pub const ALPHABET: usize = 16;
pub const MAX_LEN: usize = 12;
pub const STEPS: u64 = 500;
pub const GROUP: usize = 12;
pub const NOISE: f64 = 0.25;
/// Frozen regression baseline for the round-trip gain.
pub const MIN_GAIN: f64 = 0.20;

pub struct Toy {
    pub vocab: Arc<Vocab>,
    pub pair: TaskPair,
    pub cfg: RunConfig,
    pub base: PolicyParams,
    pub all: Dataset,
    pub eval: SamplerConfig,
    test_fwd: Vec<Prompt>,
    test_bwd: Vec<Prompt>,
}

impl Toy {
    pub fn new(seed: u64) -> Self {
        let (vocab, pair) = cipher_task(ALPHABET).unwrap();
        let all = gen_cipher_task(seed, 1000, ALPHABET, MAX_LEN)
            .unwrap()
            .pairs();
        let sft = corrupt_outputs(
            &all.slice(0..200),
            NOISE,
            &cipher_target_symbols(ALPHABET),
            seed,
        )
        .unwrap();
        let mut cfg = RunConfig::for_vocab_size(vocab.len());
        cfg.seed = seed;
        cfg.steps = STEPS;
        cfg.grpo.group_size = GROUP;
        cfg.grpo.learning_rate = 5.0;
        cfg.sft.lr = 2.0;
        let mut base = PolicyParams::new(vocab.clone(), 0).unwrap();
        let examples = sft_examples(&sft, &vocab, &pair, true).unwrap();
        sft_train(&mut base, &examples, &cfg.sft, seed, &[0]).unwrap();
        let test = all.slice(800..1000);
        let test_fwd = prompts(&test, &vocab, pair.source).unwrap();
        let test_bwd = prompts(&test.swapped().unwrap(), &vocab, pair.target).unwrap();
        let eval = SamplerConfig {
            seed: 99,
            ..SamplerConfig::default()
        };
        Toy {
            vocab,
            pair,
            cfg,
            base,
            all,
            eval,
            test_fwd,
            test_bwd,
        }
    }

    /// Unlabeled source-side inputs of `range`.
    pub fn sources(&self, range: std::ops::Range<usize>) -> Vec<Prompt> {
        prompts(
            &self.all.slice(range).unlabeled(),
            &self.vocab,
            self.pair.source,
        )
        .unwrap()
    }

    /// Unlabeled target-side strings of `range`.
    pub fn targets(&self, range: std::ops::Range<usize>) -> Vec<Prompt> {
        let ds = self.all.slice(range).swapped().unwrap().unlabeled();
        prompts(&ds, &self.vocab, self.pair.target).unwrap()
    }

    /// Held-out round-trip exact match (x -> y -> x).
    pub fn roundtrip_em(&self, theta: &PolicyParams) -> f64 {
        roundtrip_eval(theta, &self.test_fwd, &self.pair, &self.eval, 32)
            .unwrap()
            .get("exact_match")
            .unwrap()
    }

    /// Held-out exact match of the forward and backward directions.
    pub fn task_em(&self, theta: &PolicyParams) -> (f64, f64) {
        let f = task_eval(theta, &self.test_fwd, &self.pair, &self.eval, 32).unwrap();
        let b = task_eval(theta, &self.test_bwd, &self.pair.swap(), &self.eval, 32).unwrap();
        (f.get("exact_match").unwrap(), b.get("exact_match").unwrap())
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

/// Self-supervised round-trip training on the unlabeled pool.
pub fn check_rtrl_gain(seed: u64, budget: Duration) -> Check {
    let toy = Toy::new(seed);
    let before = toy.roundtrip_em(&toy.base);
    let xs = toy.sources(200..800);
    let mut theta = toy.base.clone();
    let t0 = Instant::now();
    single_threaded(|| rtrl_train(&mut theta, &xs, &toy.pair, &toy.cfg, 0, &mut NoopObserver))
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let after = toy.roundtrip_em(&theta);
    let detail = format!(
        "round-trip exact match {before:.3} -> {after:.3} (gain {:+.3}, need {MIN_GAIN:+.2}); {STEPS} steps in {elapsed:.1?} on one thread",
        after - before
    );
    if after - before >= MIN_GAIN - 1e-12 && elapsed <= budget {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Two alternating phases on disjoint unpaired source and target sets.
pub fn check_iterative(seed: u64) -> Check {
    let toy = Toy::new(seed);
    let (f0, b0) = toy.task_em(&toy.base);
    let xs = toy.sources(200..500);
    let ys = toy.targets(500..800);
    let mut theta = toy.base.clone();
    let sched = IterationSchedule {
        iterations: 2,
        start: Direction::Forward,
        early_stop: false,
    };
    iterative_rtrl(
        &mut theta,
        &xs,
        &ys,
        &toy.pair,
        &sched,
        &toy.cfg,
        None,
        &mut NoopObserver,
    )
    .map_err(|e| e.to_string())?;
    let (f, b) = toy.task_em(&theta);
    let detail = format!("forward {f0:.3} -> {f:.3}, backward {b0:.3} -> {b:.3}");
    if f >= f0 && b >= b0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Two self-play rounds from the source-only seed set.
pub fn check_selfplay(seed: u64) -> Check {
    let toy = Toy::new(seed);
    let (f0, b0) = toy.task_em(&toy.base);
    let xs = toy.sources(200..800);
    let mut theta = toy.base.clone();
    let rounds = selfplay_rtrl(&mut theta, &xs, &toy.pair, 2, &toy.cfg, &mut NoopObserver)
        .map_err(|e| e.to_string())?;
    let (f, b) = toy.task_em(&theta);
    let survival: Vec<String> = rounds
        .iter()
        .map(|r| format!("{:.3}", r.survival_rate))
        .collect();
    let detail = format!(
        "forward {f0:.3} -> {f:.3}, backward {b0:.3} -> {b:.3}; filter survival per round [{}]",
        survival.join(", ")
    );
    if f >= f0 && b >= b0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Round-trip training against the entropy and synthetic-SFT baselines,
/// all from the same base policy and seed.
pub fn check_baselines(seed: u64) -> Check {
    let toy = Toy::new(seed);
    let xs = toy.sources(200..800);
    let ys = toy.targets(200..800);
    let run = |f: &dyn Fn(&mut PolicyParams) -> rtrl_core::Result<()>| -> Result<f64, String> {
        let mut theta = toy.base.clone();
        f(&mut theta).map_err(|e| e.to_string())?;
        Ok(toy.task_em(&theta).0)
    };
    let rtrl = run(&|t| rtrl_train(t, &xs, &toy.pair, &toy.cfg, 0, &mut NoopObserver).map(|_| ()))?;
    let em = run(&|t| em_train(t, &xs, &toy.pair, &toy.cfg, 0, &mut NoopObserver).map(|_| ()))?;
    let out = run(&|t| sft_synthetic_output(t, &xs, &toy.pair, &toy.cfg).map(|_| ()))?;
    let inp = run(&|t| sft_synthetic_input(t, &ys, &toy.pair, &toy.cfg).map(|_| ()))?;
    let base = toy.task_em(&toy.base).0;
    let detail = format!(
        "forward exact match: base {base:.3}, rtrl {rtrl:.3}, em {em:.3}, sft-syn-out {out:.3}, sft-syn-in {inp:.3}"
    );
    if rtrl >= em && rtrl >= out && rtrl >= inp {
        Ok(detail)
    } else {
        Err(detail)
    }
}
