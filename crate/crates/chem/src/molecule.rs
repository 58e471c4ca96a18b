//! Molecular graph with explicit hydrogen counts.

use crate::element::Element;
use crate::error::ChemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum. Aromatic bonds count as one; the
    /// delocalised electron is accounted for per atom.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Total attached hydrogens (implicit ones are resolved at construction).
    pub hydrogens: u8,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            aromatic: false,
            charge: 0,
            hydrogens: 0,
            isotope: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }

    pub fn symbol(&self) -> &'static str {
        if self.aromatic {
            self.element
                .aromatic_symbol()
                .unwrap_or(self.element.symbol())
        } else {
            self.element.symbol()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Implicit hydrogen count an unbracketed atom would receive given the sum of
/// its bond valences. `None` means no organic-subset interpretation exists.
pub fn implicit_hydrogens(element: Element, aromatic: bool, bond_sum: u8) -> Option<u8> {
    let allowed = element.allowed_valences(0);
    if aromatic {
        let lowest = *allowed.first()?;
        if element.takes_pi_bond() && bond_sum < lowest {
            Some(lowest - bond_sum - 1)
        } else if bond_sum <= lowest {
            Some(lowest - bond_sum)
        } else {
            None
        }
    } else {
        allowed
            .iter()
            .find(|&&v| v >= bond_sum)
            .map(|&v| v - bond_sum)
    }
}

/// Whether `total` (bonds plus hydrogens) is acceptable for the atom.
pub fn valence_ok(atom: &Atom, total: u8) -> bool {
    let allowed = atom.element.allowed_valences(atom.charge);
    if atom.aromatic {
        allowed.contains(&total) || allowed.contains(&(total + 1))
    } else {
        allowed.contains(&total)
    }
}

/// A single- or multi-component molecular graph.
///
/// Molecules built through [`Molecule::new`] or the parser are simple graphs
/// that satisfy the valence table and have every aromatic atom on a ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Builds and validates a molecule. Hydrogen counts are taken as given.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let mol = Self::from_parts(atoms, bonds)?;
        mol.validate()?;
        Ok(mol)
    }

    /// Builds a simple graph without the valence or aromaticity checks. Used
    /// for substructures, which need not be chemically complete.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(ChemError::AtomOutOfRange {
                    atom: bond.a.max(bond.b),
                });
            }
            if bond.a == bond.b {
                return Err(ChemError::SelfLoop { atom: bond.a });
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(ChemError::DuplicateBond {
                    a: bond.a.min(bond.b),
                    b: bond.a.max(bond.b),
                });
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
        })
    }

    /// Builds a molecule whose atoms all take their implicit hydrogen count,
    /// as unbracketed SMILES atoms would. Charges and isotopes are kept.
    pub fn with_implicit_hydrogens(
        mut atoms: Vec<Atom>,
        bonds: Vec<Bond>,
    ) -> Result<Self, ChemError> {
        let probe = Self::from_parts(atoms.clone(), bonds.clone())?;
        for (i, atom) in atoms.iter_mut().enumerate() {
            let sum = probe.bond_valence_sum(i);
            atom.hydrogens = if atom.charge == 0 {
                implicit_hydrogens(atom.element, atom.aromatic, sum)
                    .ok_or(ChemError::Valence { atom: i })?
            } else {
                let allowed = atom.element.allowed_valences(atom.charge);
                let pi = u8::from(atom.aromatic && atom.element.takes_pi_bond());
                allowed
                    .iter()
                    .find(|&&v| v >= sum + pi)
                    .map(|&v| v - sum - pi)
                    .ok_or(ChemError::Valence { atom: i })?
            };
        }
        Self::new(atoms, bonds)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// `(neighbour, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, i)| &self.bonds[i])
    }

    pub fn bond_valence_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    pub fn validate(&self) -> Result<(), ChemError> {
        let in_ring = self.ring_atoms();
        for (i, atom) in self.atoms.iter().enumerate() {
            let total = self.bond_valence_sum(i) + atom.hydrogens;
            if !valence_ok(atom, total) {
                return Err(ChemError::Valence { atom: i });
            }
            if atom.aromatic && (atom.element.aromatic_symbol().is_none() || !in_ring[i]) {
                return Err(ChemError::AromaticOutsideRing { atom: i });
            }
        }
        for bond in &self.bonds {
            if bond.order == BondOrder::Aromatic
                && !(self.atoms[bond.a].aromatic && self.atoms[bond.b].aromatic)
            {
                return Err(ChemError::AromaticBond {
                    a: bond.a,
                    b: bond.b,
                });
            }
        }
        Ok(())
    }

    /// Marks atoms that lie on at least one cycle (endpoints of a non-bridge bond).
    pub fn ring_atoms(&self) -> Vec<bool> {
        let bridges = self.bridges();
        let mut in_ring = vec![false; self.atoms.len()];
        for (i, bond) in self.bonds.iter().enumerate() {
            if !bridges[i] {
                in_ring[bond.a] = true;
                in_ring[bond.b] = true;
            }
        }
        in_ring
    }

    /// Marks bonds whose removal disconnects the graph.
    pub fn bridges(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // iterative DFS: (atom, parent bond, next neighbour index)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, parent_bond, ref mut next)) = stack.last_mut() {
                if *next < self.adjacency[u].len() {
                    let (v, b) = self.adjacency[u][*next];
                    *next += 1;
                    if b == parent_bond {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, b, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            is_bridge[parent_bond] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }

    /// Connected components as lists of atom indices, in order of lowest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Cyclomatic number: bonds - atoms + components.
    pub fn ring_count(&self) -> usize {
        (self.bonds.len() + self.components().len()).saturating_sub(self.atoms.len())
    }

    /// Relabels atoms: atom `i` of `self` becomes atom `perm[i]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![self.atoms[0]; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = *atom;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Molecule::from_parts(atoms, bonds).expect("permutation preserves simplicity")
    }

    /// Disjoint union of several molecules, atoms numbered in input order.
    pub fn union(parts: &[Molecule]) -> Molecule {
        let mut atoms = Vec::new();
        let mut bonds = Vec::new();
        for part in parts {
            let offset = atoms.len();
            atoms.extend_from_slice(&part.atoms);
            bonds.extend(part.bonds.iter().map(|b| Bond {
                a: b.a + offset,
                b: b.b + offset,
                order: b.order,
            }));
        }
        Molecule::from_parts(atoms, bonds).expect("disjoint union is simple")
    }

    /// Subgraph induced by `keep` (atoms renumbered in the given order). The
    /// result is not re-validated: hydrogens and aromatic flags are copied.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Molecule {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i]).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond {
                a: map[b.a],
                b: map[b.b],
                order: b.order,
            })
            .collect();
        Molecule::from_parts(atoms, bonds).expect("induced subgraph is simple")
    }
}
