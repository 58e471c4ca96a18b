//! Fixed-length molecular descriptor vector.

use crate::element::Element;
use crate::fingerprint::{circular_fingerprint, DEFAULT_NBITS};
use crate::molecule::Molecule;

pub const DESCRIPTOR_DIM: usize = 8;

/// Names of the descriptor components, in vector order.
pub const DESCRIPTOR_NAMES: [&str; DESCRIPTOR_DIM] = [
    "atom_count",
    "bond_count",
    "ring_count",
    "aromatic_atoms",
    "heteroatoms",
    "mean_degree",
    "charge_sum",
    "fingerprint_density",
];

/// Descriptor vector in [`DESCRIPTOR_NAMES`] order. Fingerprint density is the
/// set-bit fraction of the radius-2 circular fingerprint at the default width.
pub fn descriptor_vector(mol: &Molecule) -> [f64; DESCRIPTOR_DIM] {
    let atoms = mol.atom_count() as f64;
    let bonds = mol.bond_count() as f64;
    let aromatic = mol.atoms().iter().filter(|a| a.aromatic).count() as f64;
    let hetero = mol
        .atoms()
        .iter()
        .filter(|a| a.element != Element::C)
        .count() as f64;
    let charge: f64 = mol.atoms().iter().map(|a| a.charge as f64).sum();
    let mean_degree = if mol.atom_count() == 0 {
        0.0
    } else {
        2.0 * bonds / atoms
    };
    let density =
        circular_fingerprint(mol, 2, DEFAULT_NBITS).count_ones() as f64 / DEFAULT_NBITS as f64;
    [
        atoms,
        bonds,
        mol.ring_count() as f64,
        aromatic,
        hetero,
        mean_degree,
        charge,
        density,
    ]
}
