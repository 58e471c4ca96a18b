//! Sequence-similarity metrics over token slices: BLEU, ROUGE-N, ROUGE-L,
//! exact-match METEOR and Levenshtein distance.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap<T: Eq + Hash>(cand: &[T], reference: &[T], n: usize) -> usize {
    let r = ngram_counts(reference, n);
    ngram_counts(cand, n)
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Sentence BLEU with uniform weights over orders `1..=max_n` and a brevity
/// penalty. An order `n >= 2` with no clipped match scores `1 / (t_n + 1)`
/// where `t_n` is the candidate's n-gram count; no unigram match at all
/// gives 0. An empty candidate scores 0.
pub fn bleu<T: Eq + Hash>(cand: &[T], reference: &[T], max_n: usize) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if max_n == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    if cand.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let total = (cand.len() + 1).saturating_sub(n);
        let matches = clipped_overlap(cand, reference, n);
        let p = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return Ok(0.0);
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += p.ln();
    }
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / max_n as f64).exp())
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-N F1 over clipped n-gram overlap. A reference too short to contain
/// any n-gram scores 1 against a candidate that has none either, else 0.
pub fn rouge_n<T: Eq + Hash>(cand: &[T], reference: &[T], n: usize) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let ref_total = (reference.len() + 1).saturating_sub(n);
    let cand_total = (cand.len() + 1).saturating_sub(n);
    if ref_total == 0 {
        return Ok(if cand_total == 0 { 1.0 } else { 0.0 });
    }
    Ok(f1(
        clipped_overlap(cand, reference, n),
        cand_total,
        ref_total,
    ))
}

pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common subsequence.
pub fn rouge_l<T: Eq>(cand: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    Ok(f1(lcs_len(cand, reference), cand.len(), reference.len()))
}

/// Search budget for the chunk-minimizing alignment. Past it the best
/// alignment found so far (the first one is greedy) is used.
const METEOR_NODE_BUDGET: usize = 200_000;

/// METEOR with exact unigram matching only. The alignment has the maximum
/// number of matches and, among those, the fewest chunks (runs contiguous in
/// both candidate and reference).
pub fn meteor_exact<T: Eq + Hash>(cand: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let (m, chunks) = meteor_alignment(cand, reference);
    if m == 0 {
        return Ok(0.0);
    }
    Ok(meteor_score(m, chunks, cand.len(), reference.len()))
}

pub fn meteor_score(matches: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    let m = matches as f64;
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    fmean * (1.0 - penalty)
}

/// Returns (matches, chunks) of the chosen alignment.
pub fn meteor_alignment<T: Eq + Hash>(cand: &[T], reference: &[T]) -> (usize, usize) {
    // per-type counts decide how many candidate occurrences must match
    let mut ref_pos: HashMap<&T, Vec<usize>> = HashMap::new();
    for (j, t) in reference.iter().enumerate() {
        ref_pos.entry(t).or_default().push(j);
    }
    let mut cand_count: HashMap<&T, usize> = HashMap::new();
    for t in cand {
        *cand_count.entry(t).or_insert(0) += 1;
    }
    let mut need: HashMap<&T, usize> = HashMap::new();
    let mut total = 0;
    for (t, &c) in &cand_count {
        let k = c.min(ref_pos.get(t).map_or(0, Vec::len));
        need.insert(*t, k);
        total += k;
    }
    if total == 0 {
        return (0, 0);
    }
    let mut search = MeteorSearch {
        cand,
        ref_pos: &ref_pos,
        remaining: cand_count,
        need,
        used: vec![false; reference.len()],
        assign: vec![None; cand.len()],
        best: 0,
        found: false,
        nodes: 0,
    };
    search.dfs(0, 0);
    (total, total - search.best)
}

struct MeteorSearch<'a, T: Eq + Hash> {
    cand: &'a [T],
    ref_pos: &'a HashMap<&'a T, Vec<usize>>,
    /// Candidate occurrences of each type not yet visited.
    remaining: HashMap<&'a T, usize>,
    /// Matches still required for each type.
    need: HashMap<&'a T, usize>,
    used: Vec<bool>,
    assign: Vec<Option<usize>>,
    /// Most continuations (matches extending the previous match) found.
    best: usize,
    found: bool,
    nodes: usize,
}

impl<T: Eq + Hash> MeteorSearch<'_, T> {
    fn dfs(&mut self, i: usize, continuations: usize) {
        self.nodes += 1;
        if i == self.cand.len() {
            if !self.found || continuations > self.best {
                self.best = continuations;
                self.found = true;
            }
            return;
        }
        if self.found
            && (continuations + (self.cand.len() - i) <= self.best
                || self.nodes > METEOR_NODE_BUDGET)
        {
            return;
        }
        let t = &self.cand[i];
        *self.remaining.get_mut(t).expect("counted") -= 1;
        let need = self.need[t];
        if need > 0 {
            let prev = if i > 0 { self.assign[i - 1] } else { None };
            let mut options: Vec<usize> = self.ref_pos[t]
                .iter()
                .copied()
                .filter(|&j| !self.used[j])
                .collect();
            // try the continuing position first so the first leaf is greedy
            if let Some(p) = prev {
                if let Some(k) = options.iter().position(|&j| j == p + 1) {
                    let j = options.remove(k);
                    options.insert(0, j);
                }
            }
            for j in options {
                let cont = usize::from(prev.is_some_and(|p| p + 1 == j));
                self.used[j] = true;
                self.assign[i] = Some(j);
                *self.need.get_mut(t).expect("counted") -= 1;
                self.dfs(i + 1, continuations + cont);
                *self.need.get_mut(t).expect("counted") += 1;
                self.assign[i] = None;
                self.used[j] = false;
            }
        }
        if self.remaining[t] >= need {
            self.dfs(i + 1, continuations);
        }
        *self.remaining.get_mut(t).expect("counted") += 1;
    }
}

/// Unit-cost character edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
