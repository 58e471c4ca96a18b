//! Run directories for `rtrl train`.
//!
//! Layout:
//!
//! ```text
//! run_dir/
//!   manifest.json         run id, regime, config snapshot, artifacts, status
//!   config.txt            resolved config
//!   steps.jsonl           one line per optimization step
//!   progress.json         resume point (phase, next step) of the latest checkpoint
//!   checkpoints/start.json   policy at the start of the current phase
//!   checkpoints/latest.json  policy at the resume point
//!   checkpoints/final.json
//!   reports/              held-out reports at the eval cadence
//!   synthetic/            generated datasets
//!   summary.json          regime-specific results
//!   final_report.json / final_report.csv
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use indexmap::IndexMap;
use rtrl_core::checkpoint;
use rtrl_core::data::{save_jsonl, Dataset, PairRecord};
use rtrl_core::domain::TaskPair;
use rtrl_core::grpo::{Prompt, StepStats};
use rtrl_core::metrics::{format_value, MetricsReport};
use rtrl_core::policy::{PolicyParams, PolicySnapshot};
use rtrl_core::sampling::SamplerConfig;
use rtrl_core::train::{self, Observer, RunConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::{tasks, Regime, TrainArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub regime: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    pub status: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct Progress {
    phase: u64,
    next_step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalReport {
    pub run_id: String,
    pub regime: String,
    pub reports: IndexMap<String, MetricsReport>,
}

impl FinalReport {
    /// Flattened `section.metric` columns in report order.
    pub fn columns(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (section, r) in &self.reports {
            out.push((format!("{section}.n"), r.n.to_string()));
            out.push((format!("{section}.n_valid"), r.n_valid.to_string()));
            for (k, v) in &r.metrics {
                out.push((format!("{section}.{k}"), format_value(*v)));
            }
        }
        out
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn save_policy(p: &PolicyParams, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint::to_json(p))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn run_id(regime: Regime, cfg: &Config) -> String {
    let mut h = Sha256::new();
    h.update(regime.name().as_bytes());
    h.update(b"\n");
    h.update(cfg.to_text().as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

/// Evaluation on the labeled held-out set: forward and backward task
/// metrics plus round trips from both sides.
pub fn held_out_reports(
    theta: &PolicyParams,
    eval: &Dataset,
    pair: &TaskPair,
    sampler: &SamplerConfig,
    max_len: usize,
) -> Result<IndexMap<String, MetricsReport>> {
    let vocab = theta.vocab();
    let fwd = train::prompts(eval, vocab, pair.source)?;
    let back = pair.swap();
    let bwd = train::prompts(&eval.swapped()?, vocab, back.source)?;
    let mut out = IndexMap::new();
    out.insert(
        "forward".into(),
        train::task_eval(theta, &fwd, pair, sampler, max_len)?,
    );
    out.insert(
        "backward".into(),
        train::task_eval(theta, &bwd, &back, sampler, max_len)?,
    );
    out.insert(
        "roundtrip".into(),
        train::roundtrip_eval(theta, &fwd, pair, sampler, max_len)?,
    );
    out.insert(
        "roundtrip_backward".into(),
        train::roundtrip_eval(theta, &bwd, &back, sampler, max_len)?,
    );
    Ok(out)
}

struct RunObserver<'a> {
    dir: PathBuf,
    log: File,
    checkpoint_every: u64,
    eval_every: u64,
    eval: Option<&'a Dataset>,
    pair: &'a TaskPair,
    sampler: SamplerConfig,
    max_len: usize,
    stop_after: Option<u64>,
    stopped: bool,
}

impl RunObserver<'_> {
    fn checkpoint(&self, theta: &PolicyParams, phase: u64, next_step: u64) -> Result<()> {
        save_policy(theta, &self.dir.join("checkpoints/latest.json"))?;
        write_atomic(
            &self.dir.join("progress.json"),
            &to_json(&Progress { phase, next_step }),
        )
    }

    fn try_on_step(&mut self, phase: u64, stats: &StepStats, theta: &PolicyParams) -> Result<()> {
        let line = json!({
            "phase": phase,
            "step": stats.step,
            "mean_reward": stats.mean_reward,
            "mean_abs_adv": stats.mean_abs_adv,
            "clip_fraction": stats.clip_fraction,
            "kl": stats.kl,
            "loss": stats.loss,
        });
        writeln!(self.log, "{line}").context("writing steps.jsonl")?;
        self.log.flush().context("writing steps.jsonl")?;
        let done = stats.step + 1;
        if self.checkpoint_every > 0 && done.is_multiple_of(self.checkpoint_every) {
            self.checkpoint(theta, phase, done)?;
        }
        if self.stop_after == Some(done) {
            self.checkpoint(theta, phase, done)?;
            self.stopped = true;
            bail!("stopped after {done} steps");
        }
        if let (true, Some(eval)) = (
            self.eval_every > 0 && done.is_multiple_of(self.eval_every),
            self.eval,
        ) {
            let reports = held_out_reports(theta, eval, self.pair, &self.sampler, self.max_len)?;
            let path = self.dir.join(format!("reports/eval-p{phase}-s{done}.json"));
            fs::write(&path, to_json(&reports))
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

impl Observer for RunObserver<'_> {
    fn on_step(
        &mut self,
        phase: u64,
        stats: &StepStats,
        theta: &PolicyParams,
    ) -> rtrl_core::Result<()> {
        self.try_on_step(phase, stats, theta)
            .map_err(|e| rtrl_core::Error::Checkpoint(format!("{e:#}")))
    }

    fn on_phase_end(&mut self, phase: u64, theta: &PolicyParams) -> rtrl_core::Result<()> {
        // The next phase starts from this policy.
        save_policy(theta, &self.dir.join("checkpoints/start.json"))
            .and_then(|_| {
                write_atomic(
                    &self.dir.join("progress.json"),
                    &to_json(&Progress {
                        phase: phase + 1,
                        next_step: 0,
                    }),
                )
            })
            .map_err(|e| rtrl_core::Error::Checkpoint(format!("{e:#}")))
    }
}

/// Drops logged steps at or after the resume point; they are re-run.
fn truncate_log(path: &Path, resume: Progress) -> Result<()> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kept = String::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        let v: serde_json::Value = serde_json::from_str(&line)
            .with_context(|| format!("malformed line in {}", path.display()))?;
        let phase = v["phase"].as_u64().unwrap_or(u64::MAX);
        let step = v["step"].as_u64().unwrap_or(u64::MAX);
        if (phase, step) < (resume.phase, resume.next_step) {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    write_atomic(path, &kept)
}

fn load_prompts(
    cfg: &Config,
    key: &str,
    vocab: &rtrl_core::vocab::Vocab,
    kind: rtrl_core::domain::DomainKind,
) -> Result<Vec<Prompt>> {
    let ds = tasks::load(&cfg.require_path(key)?)?;
    Ok(train::prompts(&ds, vocab, kind)?)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let dir = args.run_dir.clone();
    let manifest_path = dir.join("manifest.json");
    let cfg = if args.resume {
        Config::load_file_only(&dir.join("config.txt"))?
    } else {
        if manifest_path.exists() {
            bail!(
                "{} already holds a run; pass --resume to continue it",
                dir.display()
            );
        }
        Config::load(args.config.as_deref())?
    };
    let regime = args.regime;
    let (vocab, pair) = tasks::resolve(cfg.raw("task"), cfg.get("task.alphabet")?)?;
    let rc: RunConfig = cfg.run_config(vocab.len())?;
    let order: usize = cfg.get("policy.order")?;

    let mut manifest = if args.resume {
        let m: Manifest = serde_json::from_str(
            &fs::read_to_string(&manifest_path)
                .with_context(|| format!("reading {}", manifest_path.display()))?,
        )
        .context("parsing manifest.json")?;
        if m.regime != regime.name() {
            bail!(
                "run was started with regime {}, not {}",
                m.regime,
                regime.name()
            );
        }
        if m.status == "completed" {
            bail!("run in {} is already completed", dir.display());
        }
        m
    } else {
        for sub in ["checkpoints", "reports", "synthetic"] {
            fs::create_dir_all(dir.join(sub))
                .with_context(|| format!("creating {}", dir.join(sub).display()))?;
        }
        fs::write(dir.join("config.txt"), cfg.to_text()).context("writing config.txt")?;
        let mut artifacts = BTreeMap::new();
        for (k, v) in [
            ("config", "config.txt"),
            ("step_log", "steps.jsonl"),
            ("final_checkpoint", "checkpoints/final.json"),
            ("final_report", "final_report.json"),
            ("final_report_csv", "final_report.csv"),
            ("summary", "summary.json"),
        ] {
            artifacts.insert(k.to_string(), v.to_string());
        }
        let m = Manifest {
            run_id: run_id(regime, &cfg),
            regime: regime.name().to_string(),
            seed: rc.seed,
            config: cfg.map().clone(),
            artifacts,
            status: "running".into(),
        };
        write_atomic(&manifest_path, &to_json(&m))?;
        m
    };

    let log_path = dir.join("steps.jsonl");
    let progress_path = dir.join("progress.json");
    let resume_point: Option<Progress> = if args.resume && progress_path.exists() {
        let p: Progress = serde_json::from_str(&fs::read_to_string(&progress_path)?)
            .context("parsing progress.json")?;
        truncate_log(&log_path, p)?;
        Some(p)
    } else {
        if args.resume {
            File::create(&log_path).context("resetting steps.jsonl")?;
        }
        None
    };

    let mut theta = match (resume_point, cfg.path("policy.init")) {
        (Some(p), _) => {
            let which = if p.next_step == 0 { "start" } else { "latest" };
            checkpoint::load_compatible(&dir.join(format!("checkpoints/{which}.json")), &vocab)?
        }
        (None, Some(init)) => checkpoint::load_compatible(&init, &vocab)
            .with_context(|| format!("loading policy.init {}", init.display()))?,
        (None, None) => PolicyParams::new(vocab.clone(), order)?,
    };

    let eval_ds = match cfg.path("data.eval") {
        Some(p) => Some(tasks::load(&p)?),
        None => None,
    };
    let eval_sampler = cfg.eval_sampler()?;
    let log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    let mut obs = RunObserver {
        dir: dir.clone(),
        log,
        checkpoint_every: cfg.get("run.checkpoint_every")?,
        eval_every: cfg.get("run.eval_every")?,
        eval: eval_ds.as_ref(),
        pair: &pair,
        sampler: eval_sampler,
        max_len: rc.grpo.max_len,
        stop_after: args.stop_after,
        stopped: false,
    };

    let single_phase = matches!(regime, Regime::Rtrl | Regime::Em | Regime::Supervised);
    if resume_point.is_some() && !single_phase {
        bail!("--resume is supported for the rtrl, em and supervised regimes");
    }
    // A finished phase leaves progress at (1, 0); nothing is left to run.
    let start_step = match resume_point {
        Some(p) if p.phase > 0 => rc.steps,
        Some(p) => p.next_step,
        None => 0,
    };
    let start_path = dir.join("checkpoints/start.json");
    let phase_start = |theta: &PolicyParams| -> Result<PolicySnapshot> {
        if resume_point.is_some_and(|p| p.next_step > 0) {
            Ok(checkpoint::load_compatible(&start_path, &vocab)?.snapshot())
        } else {
            save_policy(theta, &start_path)?;
            Ok(theta.snapshot())
        }
    };

    let outcome: Result<serde_json::Value> = (|| {
        Ok(match regime {
            Regime::Rtrl | Regime::Em => {
                let xs = load_prompts(&cfg, "data.x", &vocab, pair.source)?;
                let start = phase_start(&theta)?;
                let s = if regime == Regime::Rtrl {
                    train::rtrl_phase(
                        &mut theta, &start, &xs, &pair, &rc, 0.0, 0, start_step, &mut obs,
                    )?
                } else {
                    train::em_phase(&mut theta, &start, &xs, &pair, &rc, 0, start_step, &mut obs)?
                };
                json!({ "steps_run": s.stats.len() })
            }
            Regime::Supervised => {
                let data = tasks::load(&cfg.require_path("data.pairs")?)?;
                if !data.labeled() {
                    bail!("data.pairs must be labeled for the supervised regime");
                }
                let mut curve = Vec::new();
                if resume_point.is_none() {
                    curve = train::supervised_warm_start(&mut theta, &data, &pair, &rc)?;
                }
                let ps = train::prompts(&data, &vocab, pair.source)?;
                let start = phase_start(&theta)?;
                let s = train::rtrl_phase(
                    &mut theta,
                    &start,
                    &ps,
                    &pair,
                    &rc,
                    rc.metric_weight,
                    0,
                    start_step,
                    &mut obs,
                )?;
                json!({ "sft_log_likelihood": curve, "steps_run": s.stats.len() })
            }
            Regime::Iterative => {
                let xs = load_prompts(&cfg, "data.x", &vocab, pair.source)?;
                let ys = load_prompts(&cfg, "data.y", &vocab, pair.target)?;
                let schedule = cfg.schedule()?;
                save_policy(&theta, &start_path)?;
                let scorer = |t: &PolicyParams| -> rtrl_core::Result<f64> {
                    let ds = eval_ds.as_ref().ok_or_else(|| {
                        rtrl_core::Error::Config("iterative.early_stop needs data.eval".into())
                    })?;
                    let ps = train::prompts(ds, t.vocab(), pair.source)?;
                    let r = train::roundtrip_eval(t, &ps, &pair, &eval_sampler, rc.grpo.max_len)?;
                    Ok(r.get("exact_match").unwrap_or(0.0))
                };
                let s = train::iterative_rtrl(
                    &mut theta,
                    &xs,
                    &ys,
                    &pair,
                    &schedule,
                    &rc,
                    Some(&scorer),
                    &mut obs,
                )?;
                json!({ "phases_run": s.phases.len(), "scores": s.scores, "stopped_early": s.stopped_early })
            }
            Regime::Selfplay => {
                let xs = load_prompts(&cfg, "data.x", &vocab, pair.source)?;
                let rounds: usize = cfg.get("selfplay.rounds")?;
                save_policy(&theta, &start_path)?;
                let out = train::selfplay_rtrl(&mut theta, &xs, &pair, rounds, &rc, &mut obs)?;
                let mut survival = Vec::new();
                for (r, round) in out.iter().enumerate() {
                    let kind = if r % 2 == 0 { pair.target } else { pair.source };
                    let ds = Dataset::new(round.synthetic.clone(), Some(kind), Some(kind))?;
                    let path = format!("synthetic/round-{r}.jsonl");
                    save_jsonl(&ds, &dir.join(&path))?;
                    manifest
                        .artifacts
                        .insert(format!("synthetic_round_{r}"), path);
                    survival.push(round.survival_rate);
                }
                json!({ "survival_rates": survival })
            }
            Regime::SftSynOut | Regime::SftSynIn => {
                let (key, kind) = if regime == Regime::SftSynOut {
                    ("data.x", pair.source)
                } else {
                    ("data.y", pair.target)
                };
                let ps = load_prompts(&cfg, key, &vocab, kind)?;
                let texts = if regime == Regime::SftSynOut {
                    train::sft_synthetic_output(&mut theta, &ps, &pair, &rc)?
                } else {
                    train::sft_synthetic_input(&mut theta, &ps, &pair, &rc)?
                };
                let records: Vec<PairRecord> = if regime == Regime::SftSynOut {
                    ps.iter()
                        .zip(&texts)
                        .map(|(p, y)| PairRecord::labeled(p.text.clone(), y.clone()))
                        .collect()
                } else {
                    texts
                        .iter()
                        .zip(&ps)
                        .map(|(x, p)| PairRecord::labeled(x.clone(), p.text.clone()))
                        .collect()
                };
                let ds = Dataset::new(records, Some(pair.source), Some(pair.target))?;
                save_jsonl(&ds, &dir.join("synthetic/sft.jsonl"))?;
                manifest
                    .artifacts
                    .insert("synthetic".into(), "synthetic/sft.jsonl".into());
                json!({ "synthetic_records": ds.len() })
            }
            Regime::Sft => {
                let data = tasks::load(&cfg.require_path("data.pairs")?)?;
                let curve = train::supervised_warm_start(&mut theta, &data, &pair, &rc)?;
                json!({ "sft_log_likelihood": curve })
            }
        })
    })();
    let summary = match outcome {
        Ok(v) => v,
        Err(_) if obs.stopped => {
            manifest.status = "interrupted".into();
            write_atomic(&manifest_path, &to_json(&manifest))?;
            return Ok(());
        }
        Err(e) => return Err(e),
    };

    save_policy(&theta, &dir.join("checkpoints/final.json"))?;
    fs::write(dir.join("summary.json"), to_json(&summary)).context("writing summary.json")?;
    let reports = match &eval_ds {
        Some(ds) => held_out_reports(&theta, ds, &pair, &eval_sampler, rc.grpo.max_len)?,
        None => IndexMap::new(),
    };
    let report = FinalReport {
        run_id: manifest.run_id.clone(),
        regime: manifest.regime.clone(),
        reports,
    };
    fs::write(dir.join("final_report.json"), to_json(&report))
        .context("writing final_report.json")?;
    let cols = report.columns();
    let mut w =
        csv::Writer::from_path(dir.join("final_report.csv")).context("writing final_report.csv")?;
    let mut header = vec!["run_id".to_string(), "regime".to_string()];
    header.extend(cols.iter().map(|c| c.0.clone()));
    w.write_record(&header)?;
    let mut row = vec![report.run_id.clone(), report.regime.clone()];
    row.extend(cols.into_iter().map(|c| c.1));
    w.write_record(&row)?;
    w.flush()?;
    manifest.status = "completed".into();
    write_atomic(&manifest_path, &to_json(&manifest))?;
    Ok(())
}
