mod common;

use std::collections::{BTreeSet, VecDeque};

use common::{corpus, random_perm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtrl_chem::{
    circular_fingerprint, descriptor_vector, parse_smiles, path_fingerprint, path_strings, Molecule,
};

#[test]
fn fingerprints_and_descriptors_ignore_atom_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in corpus() {
        let p = m.permuted(&random_perm(&mut rng, m.atom_count()));
        for r in 0..=3 {
            assert_eq!(
                circular_fingerprint(&m, r, 2048),
                circular_fingerprint(&p, r, 2048)
            );
        }
        assert_eq!(path_fingerprint(&m, 7, 2048), path_fingerprint(&p, 7, 2048));
        assert_eq!(descriptor_vector(&m), descriptor_vector(&p));
    }
}

/// Connected induced subgraph grown breadth-first from a random atom.
fn random_connected_subset<R: Rng>(rng: &mut R, m: &Molecule) -> Vec<usize> {
    let n = m.atom_count();
    let want = rng.gen_range(1..=n);
    let start = rng.gen_range(0..n);
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut keep = Vec::new();
    while let Some(a) = queue.pop_front() {
        keep.push(a);
        if keep.len() == want {
            break;
        }
        for &(b, _) in m.neighbors(a) {
            if !seen[b] {
                seen[b] = true;
                queue.push_back(b);
            }
        }
    }
    keep
}

#[test]
fn radius_zero_bits_are_monotone_under_subgraphs() {
    let nbits = 1 << 20;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in corpus() {
        let keep = random_connected_subset(&mut rng, &m);
        let sub = m.induced_subgraph(&keep);
        let a = circular_fingerprint(&sub, 0, nbits);
        let b = circular_fingerprint(&m, 0, nbits);
        assert!(a.is_subset_of(&b));
    }
}

/// Independent path enumeration: every sequence of distinct atoms with each
/// consecutive pair bonded, written both ways, keeping the smaller string.
fn oracle_paths(m: &Molecule, max_len: usize) -> BTreeSet<String> {
    fn bond_char(m: &Molecule, a: usize, b: usize) -> Option<char> {
        m.bonds()
            .iter()
            .find(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
            .map(|x| match x.order.code() {
                1 => '-',
                2 => '=',
                3 => '#',
                _ => ':',
            })
    }
    fn text(m: &Molecule, seq: &[usize]) -> String {
        let mut s = m.atoms()[seq[0]].symbol().to_string();
        for w in seq.windows(2) {
            s.push(bond_char(m, w[0], w[1]).unwrap());
            s.push_str(m.atoms()[w[1]].symbol());
        }
        s
    }
    fn walk(m: &Molecule, max_len: usize, seq: &mut Vec<usize>, out: &mut BTreeSet<String>) {
        if seq.len() >= 2 {
            let fwd = text(m, seq);
            let rev: Vec<usize> = seq.iter().rev().copied().collect();
            out.insert(fwd.min(text(m, &rev)));
        }
        if seq.len() == max_len + 1 {
            return;
        }
        for next in 0..m.atom_count() {
            let last = *seq.last().unwrap();
            if !seq.contains(&next) && bond_char(m, last, next).is_some() {
                seq.push(next);
                walk(m, max_len, seq, out);
                seq.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for start in 0..m.atom_count() {
        walk(m, max_len, &mut vec![start], &mut out);
    }
    out
}

#[test]
fn path_strings_match_enumeration_oracle() {
    for m in corpus().iter().take(200) {
        for len in 1..=5 {
            assert_eq!(path_strings(m, len), oracle_paths(m, len));
        }
    }
    let ethanol = parse_smiles("CCO").unwrap();
    assert_eq!(oracle_paths(&ethanol, 2).len(), 3);
}
