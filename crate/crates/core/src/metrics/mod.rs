//! Evaluation battery and reports.

mod molecule;
mod text;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize};

pub use molecule::{
    fingerprint_sims, frechet_descriptor_distance, frechet_distance_diag, molecule_exact_match,
    parse_molecule, validity_rate, PATH_MAX_LEN,
};
pub use text::{
    bleu, lcs_len, levenshtein, meteor_alignment, meteor_exact, meteor_score, rouge_l, rouge_n,
};

use crate::domain::DomainKind;
use crate::error::{Error, Result};

pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

pub fn exact_match(pred: &str, label: &str, kind: DomainKind) -> bool {
    match kind {
        DomainKind::Molecule | DomainKind::Reaction => molecule_exact_match(pred, label),
        DomainKind::Text => normalize_whitespace(pred) == normalize_whitespace(label),
        DomainKind::Symbols => pred == label,
    }
}

/// Named results for one evaluation. Metric order is fixed per domain kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kind: DomainKind,
    pub n: usize,
    pub n_valid: usize,
    /// Undefined values (the Fréchet distance with fewer than two valid
    /// molecules) are NaN in memory and `null` in JSON.
    #[serde(deserialize_with = "nullable_metrics")]
    pub metrics: IndexMap<String, f64>,
}

fn nullable_metrics<'de, D: Deserializer<'de>>(d: D) -> Result<IndexMap<String, f64>, D::Error> {
    let raw = IndexMap::<String, Option<f64>>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(k, v)| (k, v.unwrap_or(f64::NAN)))
        .collect())
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CSV columns: n, n_valid, then metrics in report order.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["n".to_string(), "n_valid".to_string()];
        h.extend(self.metrics.keys().cloned());
        h
    }

    pub fn csv_values(&self) -> Vec<String> {
        let mut v = vec![self.n.to_string(), self.n_valid.to_string()];
        v.extend(self.metrics.values().map(|x| format_value(*x)));
        v
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{}\n",
            self.csv_header().join(","),
            self.csv_values().join(",")
        )
    }
}

/// Shortest round-trip decimal form; NaN becomes an empty cell.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        serde_json::to_string(&x).unwrap_or_default()
    }
}

pub fn evaluate(kind: DomainKind, pairs: &[(String, String)]) -> Result<MetricsReport> {
    match kind {
        DomainKind::Molecule | DomainKind::Reaction => evaluate_molecule_task(pairs),
        DomainKind::Text => evaluate_text_task(pairs),
        DomainKind::Symbols => evaluate_symbols_task(pairs),
    }
}

/// `pairs` are (prediction, label). Invalid predictions count as 0 in every
/// similarity mean.
pub fn evaluate_molecule_task(pairs: &[(String, String)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pairs.len() as f64;
    let (mut bleu_sum, mut lev_sum, mut em_sum) = (0.0, 0.0, 0.0);
    let mut sims = [0.0; 3];
    let mut pred_mols = Vec::new();
    let mut label_mols = Vec::new();
    for (pred, label) in pairs {
        bleu_sum += bleu(&chars(pred), &chars(label), 4)?;
        lev_sum += levenshtein(pred, label) as f64;
        em_sum += f64::from(u8::from(molecule_exact_match(pred, label)));
        let p = parse_molecule(pred);
        let l = parse_molecule(label);
        if let (Some(p), Some(l)) = (&p, &l) {
            for (s, v) in sims.iter_mut().zip(fingerprint_sims(p, l)) {
                *s += v;
            }
        }
        pred_mols.extend(p);
        label_mols.extend(l);
    }
    let fd = frechet_descriptor_distance(&pred_mols, &label_mols).unwrap_or(f64::NAN);
    let preds: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
    let mut metrics = IndexMap::new();
    metrics.insert("bleu".into(), bleu_sum / n);
    metrics.insert("levenshtein".into(), lev_sum / n);
    metrics.insert("exact_match".into(), em_sum / n);
    metrics.insert("circular_r2_sim".into(), sims[0] / n);
    metrics.insert("path_sim".into(), sims[1] / n);
    metrics.insert("circular_r1_sim".into(), sims[2] / n);
    metrics.insert("fd_descriptor".into(), fd);
    metrics.insert("validity".into(), validity_rate(&preds));
    Ok(MetricsReport {
        kind: DomainKind::Molecule,
        n: pairs.len(),
        n_valid: pred_mols.len(),
        metrics,
    })
}

pub fn evaluate_text_task(pairs: &[(String, String)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mut sums = [0.0; 7];
    for (pred, label) in pairs {
        let (c, r) = (words(pred), words(label));
        let vals = [
            bleu(&c, &r, 2)?,
            bleu(&c, &r, 4)?,
            rouge_n(&c, &r, 1)?,
            rouge_n(&c, &r, 2)?,
            rouge_l(&c, &r)?,
            meteor_exact(&c, &r)?,
            f64::from(u8::from(exact_match(pred, label, DomainKind::Text))),
        ];
        for (s, v) in sums.iter_mut().zip(vals) {
            *s += v;
        }
    }
    let names = [
        "bleu2",
        "bleu4",
        "rouge1",
        "rouge2",
        "rougeL",
        "meteor",
        "exact_match",
    ];
    Ok(MetricsReport {
        kind: DomainKind::Text,
        n: pairs.len(),
        n_valid: pairs.iter().filter(|p| !p.0.trim().is_empty()).count(),
        metrics: names
            .iter()
            .map(|k| k.to_string())
            .zip(sums.iter().map(|s| s / n))
            .collect(),
    })
}

/// Battery for plain symbol strings: character BLEU-4, mean Levenshtein,
/// exact match.
pub fn evaluate_symbols_task(pairs: &[(String, String)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pairs.len() as f64;
    let (mut b, mut lev, mut em) = (0.0, 0.0, 0.0);
    for (pred, label) in pairs {
        b += bleu(&chars(pred), &chars(label), 4)?;
        lev += levenshtein(pred, label) as f64;
        em += f64::from(u8::from(pred == label));
    }
    let mut metrics = IndexMap::new();
    metrics.insert("bleu".into(), b / n);
    metrics.insert("levenshtein".into(), lev / n);
    metrics.insert("exact_match".into(), em / n);
    Ok(MetricsReport {
        kind: DomainKind::Symbols,
        n: pairs.len(),
        n_valid: pairs.iter().filter(|p| !p.0.is_empty()).count(),
        metrics,
    })
}
