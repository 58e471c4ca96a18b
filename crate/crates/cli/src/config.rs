//! Flat `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the config file, then
//! environment variables. The variable for a key is `RTRL_` followed by the
//! key uppercased with `.` replaced by `_` (`grpo.learning_rate` is
//! `RTRL_GRPO_LEARNING_RATE`). Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use rtrl_core::grpo::{GrpoConfig, KlReference};
use rtrl_core::reward::RewardConfig;
use rtrl_core::sampling::SamplerConfig;
use rtrl_core::train::{Direction, IterationSchedule, RunConfig, SftConfig};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("task", "cipher", "task family: cipher or reaction"),
    ("task.alphabet", "16", "cipher alphabet size (4..=26)"),
    (
        "policy.order",
        "2",
        "number of previous outputs in the context (0..=4)",
    ),
    (
        "policy.init",
        "",
        "checkpoint to start from; empty for a fresh policy",
    ),
    ("data.x", "", "source-side JSONL (inputs used)"),
    (
        "data.y",
        "",
        "target-side JSONL for iterative and sft-syn-in runs",
    ),
    (
        "data.pairs",
        "",
        "labeled JSONL for sft and supervised runs",
    ),
    ("data.eval", "", "labeled held-out JSONL for evaluation"),
    ("seed", "0", "run seed"),
    ("steps", "500", "optimization steps per phase"),
    ("grpo.group_size", "12", "completions per prompt"),
    ("grpo.clip_eps", "0.2", "ratio clip range"),
    ("grpo.kl_beta", "0.04", "KL penalty weight"),
    ("grpo.eps_norm", "1e-8", "advantage normalization epsilon"),
    ("grpo.learning_rate", "1.0", "policy learning rate"),
    ("grpo.inner_epochs", "1", "updates per rollout batch"),
    ("grpo.groups_per_step", "16", "prompts per step"),
    ("grpo.max_len", "32", "generation length cap"),
    ("grpo.kl_reference", "old", "KL target: old or initial"),
    ("sampler.temperature", "0.9", "rollout temperature"),
    ("sampler.top_k", "40", "rollout top-k"),
    ("sampler.top_p", "0.9", "rollout top-p"),
    ("eval.temperature", "0.9", "evaluation temperature"),
    ("eval.top_k", "40", "evaluation top-k"),
    ("eval.top_p", "0.9", "evaluation top-p"),
    ("eval.seed", "0", "evaluation seed"),
    ("reward.alpha", "auto", "format weight; auto is 2 ln V"),
    (
        "reward.length_normalize",
        "true",
        "divide the round-trip log-likelihood by |x| + 1",
    ),
    (
        "reward.copy_guard",
        "true",
        "outputs equal to their input fail the format check",
    ),
    ("sft.epochs", "2", "supervised epochs"),
    ("sft.lr", "1.0", "supervised learning rate"),
    ("sft.batch_size", "8", "supervised minibatch size"),
    (
        "supervised.metric_weight",
        "1.0",
        "weight of the task metric in supervised runs",
    ),
    ("iterative.iterations", "2", "number of phases"),
    ("iterative.start", "forward", "direction of the first phase"),
    (
        "iterative.early_stop",
        "false",
        "stop when held-out round-trip exact match drops",
    ),
    ("selfplay.rounds", "2", "self-play rounds"),
    (
        "run.eval_every",
        "0",
        "held-out evaluation cadence in steps; 0 disables",
    ),
    (
        "run.checkpoint_every",
        "100",
        "checkpoint cadence in steps; 0 disables",
    ),
];

pub fn env_name(key: &str) -> String {
    format!("RTRL_{}", key.to_uppercase().replace('.', "_"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn defaults() -> Self {
        Config {
            values: KEYS
                .iter()
                .map(|(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::defaults();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", n + 1))?;
            cfg.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(cfg)
    }

    /// File values (if any) with environment overrides applied.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Self::parse_str(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => Self::defaults(),
        };
        for (k, _, _) in KEYS {
            if let Ok(v) = std::env::var(env_name(k)) {
                cfg.set(k, v.trim())
                    .with_context(|| format!("from {}", env_name(k)))?;
            }
        }
        Ok(cfg)
    }

    /// File values only, without environment overrides.
    pub fn load_file_only(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => bail!("unknown config key {key:?}"),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("config key {key} is not declared"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .parse()
            .map_err(|e| anyhow!("config key {key}: invalid value {:?}: {e}", self.raw(key)))
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| anyhow!("config key {key} is required for this command"))
    }

    /// Canonical text form: every key in declaration order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _, _) in KEYS {
            writeln!(out, "{k} = {}", self.raw(k)).expect("string write");
        }
        out
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn sampler(&self, prefix: &str, seed: u64) -> Result<SamplerConfig> {
        let s = SamplerConfig {
            temperature: self.get(&format!("{prefix}.temperature"))?,
            top_k: self.get(&format!("{prefix}.top_k"))?,
            top_p: self.get(&format!("{prefix}.top_p"))?,
            seed,
        };
        s.validate()
            .map_err(|e| anyhow!("config keys {prefix}.*: {e}"))?;
        Ok(s)
    }

    pub fn eval_sampler(&self) -> Result<SamplerConfig> {
        self.sampler("eval", self.get("eval.seed")?)
    }

    /// Builds and validates the training config for a vocabulary of `v` tokens.
    pub fn run_config(&self, v: usize) -> Result<RunConfig> {
        let kl_reference = match self.raw("grpo.kl_reference") {
            "old" => KlReference::Old,
            "initial" => KlReference::Initial,
            other => bail!("config key grpo.kl_reference: expected old or initial, got {other:?}"),
        };
        let grpo = GrpoConfig {
            group_size: self.get("grpo.group_size")?,
            clip_eps: self.get("grpo.clip_eps")?,
            kl_beta: self.get("grpo.kl_beta")?,
            eps_norm: self.get("grpo.eps_norm")?,
            learning_rate: self.get("grpo.learning_rate")?,
            inner_epochs: self.get("grpo.inner_epochs")?,
            groups_per_step: self.get("grpo.groups_per_step")?,
            max_len: self.get("grpo.max_len")?,
            kl_reference,
        };
        grpo.validate()?;
        let mut reward = RewardConfig::for_vocab_size(v);
        if self.raw("reward.alpha") != "auto" {
            reward.alpha = self.get("reward.alpha")?;
        }
        reward.length_normalize = self.get("reward.length_normalize")?;
        reward.copy_guard = self.get("reward.copy_guard")?;
        let sft = SftConfig {
            epochs: self.get("sft.epochs")?,
            lr: self.get("sft.lr")?,
            batch_size: self.get("sft.batch_size")?,
        };
        if !(sft.lr > 0.0 && sft.lr.is_finite()) || sft.batch_size == 0 {
            bail!("config keys sft.lr and sft.batch_size must be positive");
        }
        let seed = self.get("seed")?;
        Ok(RunConfig {
            grpo,
            sampler: self.sampler("sampler", seed)?,
            reward,
            sft,
            steps: self.get("steps")?,
            seed,
            metric_weight: self.get("supervised.metric_weight")?,
        })
    }

    pub fn schedule(&self) -> Result<IterationSchedule> {
        let start = match self.raw("iterative.start") {
            "forward" => Direction::Forward,
            "backward" => Direction::Backward,
            other => {
                bail!("config key iterative.start: expected forward or backward, got {other:?}")
            }
        };
        let iterations: usize = self.get("iterative.iterations")?;
        if iterations == 0 {
            bail!("config key iterative.iterations must be at least 1");
        }
        Ok(IterationSchedule {
            iterations,
            start,
            early_stop: self.get("iterative.early_stop")?,
        })
    }
}

/// Key reference for `--help`.
pub fn keys_help() -> String {
    let mut s = String::from("Config keys (env override: RTRL_<KEY with . as _>):\n");
    for (k, d, doc) in KEYS {
        writeln!(s, "  {k:<26} {doc} [default: {d}]").expect("string write");
    }
    s
}
