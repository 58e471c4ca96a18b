//! Small-molecule toolkit: SMILES parsing and canonical writing, reaction
//! SMILES, fingerprints, Tanimoto similarity and descriptor vectors.

pub mod canon;
pub mod descriptor;
pub mod element;
pub mod error;
pub mod fingerprint;
pub mod gen;
pub mod molecule;
pub mod reaction;
pub mod smiles;

pub use canon::{canonical_smiles, canonicalize, write_smiles};
pub use descriptor::{descriptor_vector, DESCRIPTOR_DIM, DESCRIPTOR_NAMES};
pub use element::Element;
pub use error::ChemError;
pub use fingerprint::{
    circular_fingerprint, path_fingerprint, path_strings, tanimoto, Fingerprint, FingerprintError,
    FingerprintFamily, DEFAULT_NBITS,
};
pub use gen::{random_molecule, GenConfig};
pub use molecule::{Atom, Bond, BondOrder, Molecule};
pub use reaction::{parse_reaction, Reaction};
pub use smiles::{count_components, parse_components, parse_smiles};
