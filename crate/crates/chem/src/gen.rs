//! Random valid molecule generator, used for test corpora and toy data.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::element::Element;
use crate::molecule::{Atom, Bond, BondOrder, Molecule};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_atoms: usize,
    /// Probability of starting from an aromatic six-ring.
    pub aromatic_prob: f64,
    /// Probability per growth step of closing a ring instead of adding an atom.
    pub ring_prob: f64,
    pub multiple_bond_prob: f64,
    pub charge_prob: f64,
    pub isotope_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_atoms: 12,
            aromatic_prob: 0.3,
            ring_prob: 0.15,
            multiple_bond_prob: 0.15,
            charge_prob: 0.03,
            isotope_prob: 0.02,
        }
    }
}

const CHAIN_ELEMENTS: [(Element, u32); 8] = [
    (Element::C, 60),
    (Element::N, 10),
    (Element::O, 12),
    (Element::S, 4),
    (Element::F, 4),
    (Element::Cl, 4),
    (Element::Br, 3),
    (Element::P, 3),
];

fn pick_element<R: Rng + ?Sized>(rng: &mut R) -> Element {
    CHAIN_ELEMENTS
        .choose_weighted(rng, |e| e.1)
        .expect("non-empty weights")
        .0
}

struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Remaining bond valence each atom can accept.
    spare: Vec<u8>,
}

impl Builder {
    fn add_atom(&mut self, atom: Atom, capacity: u8) -> usize {
        self.atoms.push(atom);
        self.spare.push(capacity);
        self.atoms.len() - 1
    }

    fn bonded(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
    }

    fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) {
        let v = order.valence();
        self.spare[a] -= v;
        self.spare[b] -= v;
        self.bonds.push(Bond { a, b, order });
    }

    fn seed_aromatic<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let hetero: usize = rng.gen_range(0..3);
        let start = self.atoms.len();
        for i in 0..6 {
            // at most one pyridine-type nitrogen per ring keeps things tame
            if hetero == 1 && i == 3 {
                self.add_atom(Atom::aromatic(Element::N), 0);
            } else {
                self.add_atom(Atom::aromatic(Element::C), 1);
            }
        }
        for i in 0..6 {
            let (a, b) = (start + i, start + (i + 1) % 6);
            self.bonds.push(Bond {
                a,
                b,
                order: BondOrder::Aromatic,
            });
        }
    }

    fn new_chain_atom<R: Rng + ?Sized>(&mut self, rng: &mut R, cfg: &GenConfig) -> (Atom, u8) {
        let element = pick_element(rng);
        let mut atom = Atom::new(element);
        if rng.gen_bool(cfg.charge_prob) {
            match element {
                Element::N => atom.charge = 1,
                Element::O => atom.charge = -1,
                _ => {}
            }
        }
        if element == Element::C && rng.gen_bool(cfg.isotope_prob) {
            atom.isotope = Some(13);
        }
        let allowed = element.allowed_valences(atom.charge);
        let capacity = if allowed.len() > 1 && rng.gen_bool(0.1) {
            *allowed.last().expect("non-empty")
        } else {
            allowed[0]
        };
        (atom, capacity)
    }
}

/// Generates one random molecule that satisfies the valence table.
pub fn random_molecule<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Molecule {
    loop {
        if let Some(m) = try_generate(rng, cfg) {
            return m;
        }
    }
}

fn try_generate<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> Option<Molecule> {
    let mut b = Builder {
        atoms: Vec::new(),
        bonds: Vec::new(),
        spare: Vec::new(),
    };
    let target = rng.gen_range(1..=cfg.max_atoms.max(1));
    if cfg.max_atoms >= 6 && target >= 6 && rng.gen_bool(cfg.aromatic_prob) {
        b.seed_aromatic(rng);
    } else {
        let (atom, cap) = b.new_chain_atom(rng, cfg);
        b.add_atom(atom, cap);
    }
    let mut attempts = 0;
    while b.atoms.len() < target && attempts < 200 {
        attempts += 1;
        let open: Vec<usize> = (0..b.atoms.len()).filter(|&i| b.spare[i] > 0).collect();
        if open.is_empty() {
            break;
        }
        if b.atoms.len() >= 3 && rng.gen_bool(cfg.ring_prob) {
            let x = *open.choose(rng)?;
            let y = *open.choose(rng)?;
            if x != y && !b.bonded(x, y) && !b.atoms[x].aromatic && !b.atoms[y].aromatic {
                b.add_bond(x, y, BondOrder::Single);
            }
            continue;
        }
        let host = *open.choose(rng)?;
        let (atom, cap) = b.new_chain_atom(rng, cfg);
        if cap == 0 {
            continue;
        }
        let mut order = BondOrder::Single;
        if !b.atoms[host].aromatic && rng.gen_bool(cfg.multiple_bond_prob) {
            let room = b.spare[host].min(cap);
            if room >= 3 && rng.gen_bool(0.3) {
                order = BondOrder::Triple;
            } else if room >= 2 {
                order = BondOrder::Double;
            }
        }
        let idx = b.add_atom(atom, cap);
        b.add_bond(host, idx, order);
    }
    Molecule::with_implicit_hydrogens(b.atoms, b.bonds).ok()
}
