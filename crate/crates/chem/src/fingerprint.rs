//! Circular and path fingerprints with Tanimoto similarity.
//!
//! Bit positions come from a fixed 64-bit mix (the SplitMix64 finalizer)
//! reduced modulo the width, so fingerprints are bit-exact across runs and
//! platforms.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::molecule::Molecule;

pub const DEFAULT_NBITS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FingerprintFamily {
    Circular,
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FingerprintError {
    #[error("fingerprint families differ ({0:?} vs {1:?})")]
    FamilyMismatch(FingerprintFamily, FingerprintFamily),
    #[error("fingerprint widths differ ({0} vs {1})")]
    WidthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    family: FingerprintFamily,
    nbits: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn empty(family: FingerprintFamily, nbits: usize) -> Self {
        assert!(
            nbits.is_power_of_two(),
            "fingerprint width must be a power of two"
        );
        Fingerprint {
            family,
            nbits,
            words: vec![0; nbits.div_ceil(64)],
        }
    }

    pub fn family(&self) -> FingerprintFamily {
        self.family
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    fn set_hash(&mut self, h: u64) {
        let bit = (h & (self.nbits as u64 - 1)) as usize;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.contains(b))
    }

    /// Whether every bit set here is also set in `other`.
    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Builds a fingerprint directly from bit positions (each taken mod width).
    pub fn from_bits(family: FingerprintFamily, nbits: usize, bits: &[usize]) -> Self {
        let mut fp = Self::empty(family, nbits);
        for &b in bits {
            fp.set_hash(b as u64);
        }
        fp
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn combine(h: u64, v: u64) -> u64 {
    mix64(
        h ^ v
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2),
    )
}

fn hash_bytes(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| combine(h, b as u64))
}

/// Radius-0 identifiers use only element, aromaticity, charge and isotope, so
/// they are preserved under taking subgraphs. Hydrogen count and degree enter
/// from radius 1 onwards.
fn atom_seed(mol: &Molecule, i: usize) -> u64 {
    let a = mol.atoms()[i];
    [
        a.element.atomic_number() as u64,
        a.aromatic as u64,
        (a.charge as i64 + 128) as u64,
        a.isotope.unwrap_or(0) as u64,
    ]
    .into_iter()
    .fold(0x5eed, combine)
}

/// Circular (Morgan-style) fingerprint: for each atom and each radius
/// `0..=radius` the neighbourhood identifier is hashed to one bit.
pub fn circular_fingerprint(mol: &Molecule, radius: usize, nbits: usize) -> Fingerprint {
    let mut fp = Fingerprint::empty(FingerprintFamily::Circular, nbits);
    let n = mol.atom_count();
    let mut ids: Vec<u64> = (0..n).map(|i| atom_seed(mol, i)).collect();
    for &id in &ids {
        fp.set_hash(id);
    }
    for r in 1..=radius {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u64, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (mol.bonds()[b].order.code() as u64, ids[j]))
                    .collect();
                nb.sort_unstable();
                let mut h = combine(r as u64, ids[i]);
                h = combine(h, mol.atoms()[i].hydrogens as u64);
                h = combine(h, nb.len() as u64);
                for (order, id) in nb {
                    h = combine(combine(h, order), id);
                }
                h
            })
            .collect();
        ids = next;
        for &id in &ids {
            fp.set_hash(id);
        }
    }
    fp
}

/// Distinct path strings (element symbols joined by bond symbols) for all
/// simple paths of `1..=max_len` bonds, each written in its lexicographically
/// smaller direction.
pub fn path_strings(mol: &Molecule, max_len: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut path = Vec::with_capacity(max_len + 1);
    let mut on_path = vec![false; mol.atom_count()];
    for start in 0..mol.atom_count() {
        path.push(start);
        on_path[start] = true;
        extend_paths(mol, max_len, &mut path, &mut on_path, &mut out);
        on_path[start] = false;
        path.pop();
    }
    out
}

fn extend_paths(
    mol: &Molecule,
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut BTreeSet<String>,
) {
    if path.len() > 1 {
        let fwd = encode_path(mol, path.iter().copied());
        let rev = encode_path(mol, path.iter().rev().copied());
        out.insert(fwd.min(rev));
    }
    if path.len() > max_len {
        return;
    }
    let last = *path.last().expect("non-empty path");
    for &(next, _) in mol.neighbors(last) {
        if !on_path[next] {
            on_path[next] = true;
            path.push(next);
            extend_paths(mol, max_len, path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }
}

fn encode_path(mol: &Molecule, atoms: impl Iterator<Item = usize>) -> String {
    let mut s = String::new();
    let mut prev: Option<usize> = None;
    for a in atoms {
        if let Some(p) = prev {
            s.push(
                mol.bond_between(p, a)
                    .expect("path follows bonds")
                    .order
                    .symbol(),
            );
        }
        s.push_str(mol.atoms()[a].symbol());
        prev = Some(a);
    }
    s
}

pub fn path_fingerprint(mol: &Molecule, max_len: usize, nbits: usize) -> Fingerprint {
    let mut fp = Fingerprint::empty(FingerprintFamily::Path, nbits);
    for s in path_strings(mol, max_len) {
        fp.set_hash(hash_bytes(s.as_bytes()));
    }
    fp
}

/// |A and B| / |A or B|, defined as 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.family != b.family {
        return Err(FingerprintError::FamilyMismatch(a.family, b.family));
    }
    if a.nbits != b.nbits {
        return Err(FingerprintError::WidthMismatch(a.nbits, b.nbits));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / either as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn tanimoto_cases() {
        let f = |bits: &[usize]| Fingerprint::from_bits(FingerprintFamily::Circular, 64, bits);
        assert_eq!(tanimoto(&f(&[1, 2, 3]), &f(&[2, 3, 4])).unwrap(), 0.5);
        assert_eq!(tanimoto(&f(&[1, 2]), &f(&[1, 2])).unwrap(), 1.0);
        assert_eq!(tanimoto(&f(&[1]), &f(&[2])).unwrap(), 0.0);
        assert_eq!(tanimoto(&f(&[]), &f(&[])).unwrap(), 1.0);
        let p = Fingerprint::from_bits(FingerprintFamily::Path, 64, &[1]);
        assert!(matches!(
            tanimoto(&f(&[1]), &p),
            Err(FingerprintError::FamilyMismatch(..))
        ));
        let w = Fingerprint::from_bits(FingerprintFamily::Circular, 128, &[1]);
        assert!(matches!(
            tanimoto(&f(&[1]), &w),
            Err(FingerprintError::WidthMismatch(64, 128))
        ));
    }

    #[test]
    fn ethanol_paths() {
        let m = parse_smiles("CCO").unwrap();
        let paths: Vec<String> = path_strings(&m, 2).into_iter().collect();
        assert_eq!(paths, vec!["C-C", "C-C-O", "C-O"]);
        assert_eq!(path_strings(&m, 1).len(), 2);
    }

    #[test]
    fn single_atom_fingerprints() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(circular_fingerprint(&m, 0, DEFAULT_NBITS).count_ones(), 1);
        assert_eq!(path_fingerprint(&m, 7, DEFAULT_NBITS).count_ones(), 0);
    }

    #[test]
    fn identical_molecules_identical_bits() {
        let a = circular_fingerprint(&parse_smiles("c1ccccc1O").unwrap(), 2, 2048);
        let b = circular_fingerprint(&parse_smiles("Oc1ccccc1").unwrap(), 2, 2048);
        assert_eq!(a, b);
        assert_eq!(tanimoto(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn mix_is_fixed() {
        // frozen so fingerprints stay bit-exact across releases
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161d_100b_05e5);
    }
}
