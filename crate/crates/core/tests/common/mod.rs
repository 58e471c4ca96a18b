//! Independent oracles and the exact-math checks shared by the core tests
//! and the acceptance harness. Each check returns `Ok(detail)` or
//! `Err(detail)`.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtrl_core::domain::cipher_task;
use rtrl_core::grpo::{grpo_loss, normalize_advantages, Completion, GrpoConfig, RolloutGroup};
use rtrl_core::metrics::{bleu, frechet_distance_diag, levenshtein, rouge_l, rouge_n};
use rtrl_core::policy::{ContextKey, PolicyParams};
use rtrl_core::reward::{format_reward, roundtrip_reward, RewardConfig};
use rtrl_core::vocab::{TokenId, Vocab};

pub mod toy;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- policies

pub fn cipher_vocab(alphabet: usize) -> (Arc<Vocab>, TokenId, TokenId) {
    let (v, pair) = cipher_task(alphabet).unwrap();
    (v, pair.forward, pair.backward)
}

pub fn random_seq<R: Rng>(rng: &mut R, user: usize, min: usize, max: usize) -> Vec<TokenId> {
    let len = rng.gen_range(min..=max);
    (0..len)
        .map(|_| rng.gen_range(0..user) as TokenId)
        .collect()
}

/// Fills every context a (task, input, output) triple visits with random
/// logits of the given scale.
pub fn randomize_along<R: Rng>(
    p: &mut PolicyParams,
    rng: &mut R,
    task: TokenId,
    input: &[TokenId],
    output: &[TokenId],
    scale: f64,
) {
    let v = p.vocab().len();
    let mut keys = Vec::new();
    p.for_each_position(task, input, output, |k, _| keys.push(k));
    for k in keys {
        if p.logits(&k).is_none() {
            let row = (0..v).map(|_| rng.gen_range(-scale..scale)).collect();
            p.set_logits(k, row).unwrap();
        }
    }
}

fn oracle_log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    row.iter().map(|z| z - lse).collect()
}

fn row_or_zero(p: &PolicyParams, k: &ContextKey) -> Vec<f64> {
    p.logits(k)
        .map(|r| r.to_vec())
        .unwrap_or_else(|| vec![0.0; p.vocab().len()])
}

/// log p(target, <eos> | input) from the raw table.
pub fn oracle_logprob(
    p: &PolicyParams,
    task: TokenId,
    input: &[TokenId],
    target: &[TokenId],
) -> f64 {
    let eos = p.vocab().eos();
    (0..=target.len())
        .map(|i| {
            let k = p.context(task, input, target, i);
            let t = target.get(i).copied().unwrap_or(eos) as usize;
            oracle_log_softmax(&row_or_zero(p, &k))[t]
        })
        .sum()
}

/// `weight * d log p / d logits`, accumulated into `out`.
pub fn oracle_logprob_grad(
    p: &PolicyParams,
    task: TokenId,
    input: &[TokenId],
    target: &[TokenId],
    weight: f64,
    out: &mut BTreeMap<ContextKey, Vec<f64>>,
) {
    let eos = p.vocab().eos();
    let v = p.vocab().len();
    for i in 0..=target.len() {
        let k = p.context(task, input, target, i);
        let t = target.get(i).copied().unwrap_or(eos) as usize;
        let probs: Vec<f64> = oracle_log_softmax(&row_or_zero(p, &k))
            .iter()
            .map(|l| l.exp())
            .collect();
        let row = out.entry(k).or_insert_with(|| vec![0.0; v]);
        for j in 0..v {
            row[j] += weight * (f64::from(u8::from(j == t)) - probs[j]);
        }
    }
}

fn with_logit(p: &PolicyParams, k: ContextKey, j: usize, delta: f64) -> PolicyParams {
    let mut q = p.clone();
    let mut row = row_or_zero(p, &k);
    row[j] += delta;
    q.set_logits(k, row).unwrap();
    q
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-6 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

// ------------------------------------------------------------- criterion 1

pub fn check_advantages() -> Check {
    let a = normalize_advantages(&[1.0, 2.0, 3.0], 1e-8).map_err(|e| e.to_string())?;
    let expect = [-1.224744, 0.0, 1.224744];
    for (x, e) in a.iter().zip(expect) {
        ensure((x - e).abs() <= 1e-5, || format!("advantages {a:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.gen_range(2..20);
        let c = rng.gen_range(-50.0..50.0);
        let constant = normalize_advantages(&vec![c; n], 1e-8).unwrap();
        ensure(constant.iter().all(|&x| x == 0.0), || {
            format!("constant group gave {constant:?}")
        })?;
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let adv = normalize_advantages(&r, 1e-8).unwrap();
        let mean = adv.iter().sum::<f64>() / n as f64;
        ensure(mean.abs() <= 1e-9, || format!("mean advantage {mean}"))?;
    }
    Ok(format!("advantages {a:?}"))
}

// ------------------------------------------------------------- criterion 2

/// Central differences (h = 1e-5) of sequence log-probs and of the full
/// GRPO loss against the analytic gradients.
pub fn check_gradients(cases: usize) -> Check {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (vocab, fwd, _) = cipher_vocab(6);
    let user = vocab.user_len();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for case in 0..cases {
        let order = case % 3;
        let mut p = PolicyParams::new(vocab.clone(), order).unwrap();
        let x = random_seq(&mut rng, user, 1, 5);
        let y = random_seq(&mut rng, user, 0, 5);
        randomize_along(&mut p, &mut rng, fwd, &x, &y, 2.0);
        let analytic = p.logprob_grad(fwd, &x, &y);
        // every visited context, every coordinate
        for (k, row) in analytic.rows() {
            for j in 0..row.len() {
                let up = with_logit(&p, *k, j, h).sequence_logprob(fwd, &x, &y).1;
                let dn = with_logit(&p, *k, j, -h).sequence_logprob(fwd, &x, &y).1;
                let fd = (up - dn) / (2.0 * h);
                let e = rel_err(row[j], fd);
                worst = worst.max(e);
                checked += 1;
                ensure(e <= 1e-4, || {
                    format!(
                        "case {case}: logprob grad {} vs fd {fd} at {k}[{j}]",
                        row[j]
                    )
                })?;
            }
        }
        // an unvisited context has zero gradient
        let other = ContextKey::new(fwd, vocab.sep(), &vec![vocab.bos(); order]);
        ensure(analytic.get(&other).is_none(), || {
            "gradient on unvisited context".into()
        })?;

        if case % 4 == 0 {
            let e = grpo_fd_case(&mut rng, order, h)?;
            worst = worst.max(e);
        }
    }
    Ok(format!(
        "{cases} cases, {checked} coordinates, worst relative error {worst:.2e}"
    ))
}

fn grpo_fd_case(rng: &mut ChaCha8Rng, order: usize, h: f64) -> Result<f64, String> {
    let (vocab, fwd, _) = cipher_vocab(5);
    let user = vocab.user_len();
    let mut old = PolicyParams::new(vocab.clone(), order).unwrap();
    let x = random_seq(rng, user, 2, 4);
    let comps: Vec<Completion> = (0..4)
        .map(|_| Completion {
            seq: random_seq(rng, user, 1, 4),
            text: String::new(),
        })
        .collect();
    for c in &comps {
        randomize_along(&mut old, rng, fwd, &x, &c.seq, 1.0);
    }
    // theta is a small perturbation of old so ratios stay inside the clip range
    let mut theta = old.clone();
    let keys: Vec<ContextKey> = old.table().keys().copied().collect();
    for k in keys {
        let row: Vec<f64> = row_or_zero(&old, &k)
            .iter()
            .map(|z| z + rng.gen_range(-0.02..0.02))
            .collect();
        theta.set_logits(k, row).unwrap();
    }
    let rewards: Vec<f64> = (0..comps.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let group = RolloutGroup::new(&old, fwd, x.clone(), comps, rewards, 1e-8).unwrap();
    let cfg = GrpoConfig {
        clip_eps: 0.5,
        kl_beta: 0.1,
        ..GrpoConfig::default()
    };
    let out = grpo_loss(&theta, &old, None, std::slice::from_ref(&group), &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for (k, row) in out.grad.rows() {
        for j in 0..row.len() {
            let loss = |d: f64| {
                grpo_loss(
                    &with_logit(&theta, *k, j, d),
                    &old,
                    None,
                    std::slice::from_ref(&group),
                    &cfg,
                )
                .unwrap()
                .loss
            };
            let fd = (loss(h) - loss(-h)) / (2.0 * h);
            let e = rel_err(row[j], fd);
            worst = worst.max(e);
            ensure(e <= 1e-4, || {
                format!("GRPO grad {} vs fd {fd} at {k}[{j}]", row[j])
            })?;
        }
    }
    Ok(worst)
}

// ------------------------------------------------------------- criterion 3

pub fn check_grpo_degenerate() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (vocab, fwd, _) = cipher_vocab(6);
    let user = vocab.user_len();
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let mut theta = PolicyParams::new(vocab.clone(), trial % 3).unwrap();
        let mut groups = Vec::new();
        for _ in 0..3 {
            let x = random_seq(&mut rng, user, 2, 5);
            let comps: Vec<Completion> = (0..5)
                .map(|_| Completion {
                    seq: random_seq(&mut rng, user, 0, 5),
                    text: String::new(),
                })
                .collect();
            for c in &comps {
                randomize_along(&mut theta, &mut rng, fwd, &x, &c.seq, 1.5);
            }
            let rewards = (0..comps.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            groups.push(RolloutGroup::new(&theta, fwd, x, comps, rewards, 1e-8).unwrap());
        }
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        let out = grpo_loss(&theta, &theta, None, &groups, &cfg).map_err(|e| e.to_string())?;
        ensure(out.loss.abs() <= 1e-10, || {
            format!("loss {} at theta = old", out.loss)
        })?;
        ensure(out.kl == 0.0, || format!("kl {} at theta = old", out.kl))?;
        // independent advantage-weighted policy gradient of the loss
        let n: usize = groups.iter().map(|g| g.completions.len()).sum();
        let mut expect = BTreeMap::new();
        for g in &groups {
            for (c, a) in g.completions.iter().zip(&g.advantages) {
                oracle_logprob_grad(&theta, g.task, &g.input, &c.seq, -a / n as f64, &mut expect);
            }
        }
        worst = worst.max(max_grad_diff(&out.grad, &expect));
        ensure(worst <= 1e-10, || {
            format!("policy gradient differs by {worst:e}")
        })?;
    }

    // clipped completions contribute nothing
    let (vocab, fwd, _) = cipher_vocab(4);
    let user = vocab.user_len();
    let old = PolicyParams::new(vocab.clone(), 0).unwrap();
    let x = random_seq(&mut rng, user, 3, 3);
    let comps: Vec<Completion> = (0..4)
        .map(|i| Completion {
            seq: vec![i as TokenId; 3],
            text: String::new(),
        })
        .collect();
    let rewards = vec![3.0, 1.0, 0.0, 0.5];
    let group = RolloutGroup::new(&old, fwd, x.clone(), comps.clone(), rewards, 1e-8).unwrap();
    // theta raises the probability of completion 0 (advantage > 0) far past 1 + eps
    let mut theta = old.clone();
    let v = vocab.len();
    for i in 0..3 {
        let k = old.context(fwd, &x, &comps[0].seq, i);
        let mut row = vec![0.0; v];
        row[0] = 1.0;
        theta.set_logits(k, row).unwrap();
    }
    let cfg = GrpoConfig {
        kl_beta: 0.0,
        ..GrpoConfig::default()
    };
    let out = grpo_loss(&theta, &old, None, std::slice::from_ref(&group), &cfg).unwrap();
    let rho: Vec<f64> = group
        .completions
        .iter()
        .zip(&group.old_logprobs)
        .map(|(c, lo)| (oracle_logprob(&theta, fwd, &x, &c.seq) - lo).exp())
        .collect();
    ensure(
        group.advantages[0] > 0.0 && rho[0] > 1.0 + cfg.clip_eps,
        || format!("setup: A0 {} rho0 {}", group.advantages[0], rho[0]),
    )?;
    let mut expect = BTreeMap::new();
    for (i, c) in group.completions.iter().enumerate() {
        let a = group.advantages[i];
        let active =
            (a > 0.0 && rho[i] > 1.0 + cfg.clip_eps) || (a < 0.0 && rho[i] < 1.0 - cfg.clip_eps);
        if !active {
            oracle_logprob_grad(&theta, fwd, &x, &c.seq, -rho[i] * a / 4.0, &mut expect);
        }
    }
    let d = max_grad_diff(&out.grad, &expect);
    ensure(d <= 1e-10, || {
        format!("clipped case gradient differs by {d:e}")
    })?;
    ensure(out.clip_fraction > 0.0, || {
        "no completion was clipped".into()
    })?;
    Ok(format!(
        "max |grad - oracle| {worst:.1e}, clipped case {d:.1e}"
    ))
}

fn max_grad_diff(
    got: &rtrl_core::policy::GradAccumulator,
    expect: &BTreeMap<ContextKey, Vec<f64>>,
) -> f64 {
    let mut worst: f64 = 0.0;
    let zero = vec![0.0; got.width()];
    for k in got.rows().keys().chain(expect.keys()) {
        let a = got.get(k).unwrap_or(&zero);
        let b = expect.get(k).map(Vec::as_slice).unwrap_or(&zero);
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

// ------------------------------------------------------------- criterion 4

pub fn brute_levenshtein(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        if let Some(&d) = memo.get(&(a.len(), b.len())) {
            return d;
        }
        let sub = go(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let del = go(&a[1..], b, memo) + 1;
        let ins = go(a, &b[1..], memo) + 1;
        let d = sub.min(del).min(ins);
        memo.insert((a.len(), b.len()), d);
        d
    }
    go(a, b, &mut HashMap::new())
}

/// Clipped n-gram overlap by direct enumeration: each candidate n-gram
/// occurrence greedily claims an unused equal reference occurrence.
pub fn brute_overlap(c: &[char], r: &[char], n: usize) -> usize {
    if c.len() < n || r.len() < n {
        return 0;
    }
    let mut used = vec![false; r.len() - n + 1];
    let mut m = 0;
    for i in 0..=c.len() - n {
        for j in 0..=r.len() - n {
            if !used[j] && c[i..i + n] == r[j..j + n] {
                used[j] = true;
                m += 1;
                break;
            }
        }
    }
    m
}

fn brute_f1(m: usize, c: usize, r: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c as f64;
    let rc = m as f64 / r as f64;
    2.0 * p * rc / (p + rc)
}

pub fn brute_rouge_n(c: &[char], r: &[char], n: usize) -> f64 {
    let ct = (c.len() + 1).saturating_sub(n);
    let rt = (r.len() + 1).saturating_sub(n);
    if rt == 0 {
        return if ct == 0 { 1.0 } else { 0.0 };
    }
    brute_f1(brute_overlap(c, r, n), ct, rt)
}

/// LCS by enumerating every subsequence of the shorter string.
pub fn brute_lcs(a: &[char], b: &[char]) -> usize {
    let (s, t) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subseq = |sub: &[char]| {
        let mut it = t.iter();
        sub.iter().all(|c| it.any(|d| d == c))
    };
    let mut best = 0;
    for mask in 0u32..(1 << s.len()) {
        let sub: Vec<char> = (0..s.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| s[i])
            .collect();
        if sub.len() > best && is_subseq(&sub) {
            best = sub.len();
        }
    }
    best
}

pub fn brute_bleu(c: &[char], r: &[char], max_n: usize) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let total = (c.len() + 1).saturating_sub(n);
        let m = brute_overlap(c, r, n);
        let p = if m > 0 {
            m as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let bp = if c.len() >= r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * (log_sum / max_n as f64).exp()
}

pub fn check_metric_oracles(pairs: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alphabet = ['a', 'b', 'c', 'd'];
    let word = |rng: &mut ChaCha8Rng, min: usize| -> Vec<char> {
        let len = rng.gen_range(min..=10);
        (0..len)
            .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
            .collect()
    };
    for i in 0..pairs {
        let c = word(&mut rng, 0);
        let r = word(&mut rng, 1);
        let (cs, rs): (String, String) = (c.iter().collect(), r.iter().collect());
        let lev = levenshtein(&cs, &rs);
        ensure(lev == brute_levenshtein(&c, &r), || {
            format!("pair {i}: levenshtein {cs:?} {rs:?}")
        })?;
        for n in 1..=3 {
            let got = rouge_n(&c, &r, n).unwrap();
            let want = brute_rouge_n(&c, &r, n);
            ensure((got - want).abs() <= 1e-9, || {
                format!("pair {i}: rouge-{n} {cs:?} {rs:?}: {got} vs {want}")
            })?;
        }
        let got = rouge_l(&c, &r).unwrap();
        let want = brute_f1(brute_lcs(&c, &r), c.len(), r.len());
        ensure((got - want).abs() <= 1e-9, || {
            format!("pair {i}: rouge-L {cs:?} {rs:?}")
        })?;
        for n in [2, 4] {
            let got = bleu(&c, &r, n).unwrap();
            let want = brute_bleu(&c, &r, n);
            ensure((got - want).abs() <= 1e-9, || {
                format!("pair {i}: bleu-{n} {cs:?} {rs:?}: {got} vs {want}")
            })?;
        }
    }
    // Fréchet distance: FD(A, A) = 0 and exact symmetry
    for trial in 0..200 {
        let rows = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..8).map(|_| rng.gen_range(-100.0..100.0)).collect())
                .collect()
        };
        let na = rng.gen_range(2..30);
        let nb = rng.gen_range(2..30);
        let a = rows(&mut rng, na);
        let b = rows(&mut rng, nb);
        let self_d = frechet_distance_diag(&a, &a).unwrap();
        ensure(self_d.abs() <= 1e-9, || {
            format!("trial {trial}: FD(A,A) = {self_d}")
        })?;
        let ab = frechet_distance_diag(&a, &b).unwrap();
        let ba = frechet_distance_diag(&b, &a).unwrap();
        ensure(ab.to_bits() == ba.to_bits(), || {
            format!("trial {trial}: FD asymmetric {ab} {ba}")
        })?;
    }
    Ok(format!("{pairs} random pairs, 200 Fréchet trials"))
}

// ------------------------------------------------------------- criterion 6

/// Copy outputs (format 0) against well-formed outputs (format 1) whose mean
/// backward log-prob is at least -ln V, under alpha = 2 ln V.
pub fn check_reward_guard(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (vocab, pair) = cipher_task(8).unwrap();
    let v = vocab.len();
    let cfg = RewardConfig::for_vocab_size(v);
    let floor = -(v as f64).ln();
    let alpha_ok = (cfg.alpha - 2.0 * (v as f64).ln()).abs() < 1e-12;
    ensure(alpha_ok, || format!("alpha {}", cfg.alpha))?;
    let lower: Vec<TokenId> = (0..8).collect();
    let upper: Vec<TokenId> = (8..16).collect();
    let (mut worst_copy, mut best_valid) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut copies, mut valid) = (0, 0);
    for _ in 0..trials {
        let mut phi = PolicyParams::new(vocab.clone(), rng.gen_range(0..3)).unwrap();
        let len = rng.gen_range(1..8);
        let x: Vec<TokenId> = (0..len).map(|_| lower[rng.gen_range(0..8)]).collect();
        let x_text = vocab.detokenize(&x, pair.source.scheme());
        // a copy output and a well-formed candidate
        let copy = x.clone();
        let ylen = rng.gen_range(1..8);
        let y: Vec<TokenId> = (0..ylen).map(|_| upper[rng.gen_range(0..8)]).collect();
        let scale = rng.gen_range(0.0..8.0);
        randomize_along(&mut phi, &mut rng, pair.backward, &copy, &x, scale);
        randomize_along(&mut phi, &mut rng, pair.backward, &y, &x, scale);
        if rng.gen_bool(0.5) {
            // bias the judge toward reconstructing x from y
            let mut keys = Vec::new();
            phi.for_each_position(pair.backward, &y, &x, |k, t| keys.push((k, t)));
            for (k, t) in keys {
                let mut row = phi.logits(&k).unwrap().to_vec();
                row[t as usize] += rng.gen_range(0.0..10.0);
                phi.set_logits(k, row).unwrap();
            }
        }
        let score = |seq: &[TokenId]| {
            let text = vocab.detokenize(seq, pair.target.scheme());
            let f = format_reward(
                pair.forward_checker,
                &text,
                seq,
                &x_text,
                cfg.copy_guard,
                &vocab,
            );
            let rt = roundtrip_reward(&phi, pair.backward, &x, seq, cfg.length_normalize);
            (f, rt, rt + cfg.alpha * f)
        };
        let (fc, _, sc) = score(&copy);
        ensure(fc == 0.0, || {
            format!("copy {x_text:?} passed the format check")
        })?;
        worst_copy = worst_copy.max(sc);
        copies += 1;
        let (fy, rty, sy) = score(&y);
        if fy == 1.0 && rty >= floor {
            best_valid = best_valid.min(sy);
            valid += 1;
        }
    }
    ensure(valid > 0, || "no qualifying well-formed output".into())?;
    ensure(worst_copy < best_valid, || {
        format!("max copy score {worst_copy} >= min valid score {best_valid}")
    })?;
    Ok(format!(
        "{copies} copies (max {worst_copy:.3}) below {valid} qualifying outputs (min {best_valid:.3})"
    ))
}
