#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtrl_chem::{random_molecule, Atom, BondOrder, GenConfig, Molecule};

pub const SUITE_SIZE: usize = 500;

/// The fixed 500-molecule corpus shared by the invariance tests.
pub fn corpus() -> Vec<Molecule> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let cfg = GenConfig {
        max_atoms: 12,
        ..GenConfig::default()
    };
    (0..SUITE_SIZE)
        .map(|_| random_molecule(&mut rng, &cfg))
        .collect()
}

pub fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn label(a: &Atom) -> (u8, bool, i8, u8, Option<u16>) {
    (
        a.element.atomic_number(),
        a.aromatic,
        a.charge,
        a.hydrogens,
        a.isotope,
    )
}

fn order_matrix(m: &Molecule) -> Vec<Vec<Option<BondOrder>>> {
    let n = m.atom_count();
    let mut mat = vec![vec![None; n]; n];
    for b in m.bonds() {
        mat[b.a][b.b] = Some(b.order);
        mat[b.b][b.a] = Some(b.order);
    }
    mat
}

/// Brute-force labelled graph isomorphism: tries every injective assignment
/// of atoms, pruning only on label and adjacency mismatches.
pub fn isomorphic(x: &Molecule, y: &Molecule) -> bool {
    if x.atom_count() != y.atom_count() || x.bond_count() != y.bond_count() {
        return false;
    }
    let (mx, my) = (order_matrix(x), order_matrix(y));
    let mut map = vec![usize::MAX; x.atom_count()];
    let mut used = vec![false; y.atom_count()];
    assign(x, y, &mx, &my, 0, &mut map, &mut used)
}

fn assign(
    x: &Molecule,
    y: &Molecule,
    mx: &[Vec<Option<BondOrder>>],
    my: &[Vec<Option<BondOrder>>],
    i: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if i == map.len() {
        return true;
    }
    for j in 0..used.len() {
        if used[j] || label(&x.atoms()[i]) != label(&y.atoms()[j]) {
            continue;
        }
        if (0..i).any(|k| mx[i][k] != my[j][map[k]]) {
            continue;
        }
        map[i] = j;
        used[j] = true;
        if assign(x, y, mx, my, i + 1, map, used) {
            return true;
        }
        used[j] = false;
    }
    false
}
