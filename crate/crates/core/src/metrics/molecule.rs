//! Molecule-level metrics: exact match on canonical SMILES, validity,
//! fingerprint similarity and a Fréchet distance over descriptor vectors.

use rtrl_chem::{
    canonicalize, circular_fingerprint, count_components, descriptor_vector, parse_components,
    path_fingerprint, tanimoto, Molecule, DEFAULT_NBITS,
};

use crate::error::{Error, Result};

pub const PATH_MAX_LEN: usize = 7;

/// Parses every dot-separated component and joins them into one graph.
pub fn parse_molecule(s: &str) -> Option<Molecule> {
    let parts = parse_components(s).ok()?;
    Some(Molecule::union(&parts))
}

pub fn molecule_exact_match(pred: &str, label: &str) -> bool {
    match (canonicalize(pred), canonicalize(label)) {
        (Ok(p), Ok(l)) => p == l,
        (Ok(_), Err(_)) => pred.trim() == label.trim(),
        _ => false,
    }
}

pub fn validity_rate<S: AsRef<str>>(preds: &[S]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let valid = preds
        .iter()
        .filter(|p| count_components(p.as_ref()) > 0)
        .count();
    valid as f64 / preds.len() as f64
}

/// Tanimoto similarities (circular radius 2, path, circular radius 1).
pub fn fingerprint_sims(a: &Molecule, b: &Molecule) -> [f64; 3] {
    let sim = |x, y| tanimoto(&x, &y).expect("same family and width");
    [
        sim(
            circular_fingerprint(a, 2, DEFAULT_NBITS),
            circular_fingerprint(b, 2, DEFAULT_NBITS),
        ),
        sim(
            path_fingerprint(a, PATH_MAX_LEN, DEFAULT_NBITS),
            path_fingerprint(b, PATH_MAX_LEN, DEFAULT_NBITS),
        ),
        sim(
            circular_fingerprint(a, 1, DEFAULT_NBITS),
            circular_fingerprint(b, 1, DEFAULT_NBITS),
        ),
    ]
}

fn moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut var {
        *v /= n - 1.0;
    }
    (mean, var)
}

/// Fréchet distance between diagonal Gaussians fitted to two sets of feature
/// rows (sample variances):
/// `sqrt(sum (mu_a - mu_b)^2 + sum (v_a + v_b - 2 sqrt(v_a v_b)))`.
pub fn frechet_distance_diag(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::SetTooSmall {
            which: 'A',
            size: a.len(),
        });
    }
    if b.len() < 2 {
        return Err(Error::SetTooSmall {
            which: 'B',
            size: b.len(),
        });
    }
    let (ma, va) = moments(a);
    let (mb, vb) = moments(b);
    let mut d2 = 0.0;
    for k in 0..ma.len() {
        let dm = ma[k] - mb[k];
        d2 += dm * dm;
        // va + vb - 2 sqrt(va vb), written so that equal inputs give exactly 0
        let ds = va[k].sqrt() - vb[k].sqrt();
        d2 += ds * ds;
    }
    Ok(d2.sqrt())
}

pub fn frechet_descriptor_distance(a: &[Molecule], b: &[Molecule]) -> Result<f64> {
    let feats = |ms: &[Molecule]| -> Vec<Vec<f64>> {
        ms.iter().map(|m| descriptor_vector(m).to_vec()).collect()
    };
    frechet_distance_diag(&feats(a), &feats(b))
}
