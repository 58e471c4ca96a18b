//! Elements of the organic subset and the valence table.
//!
//! Allowed valences are looked up by the atom's *effective valence-electron
//! count* `e = group_electrons - charge`, so a charged atom behaves like its
//! isoelectronic neutral neighbour (N+ like C, O- like F, C- like N, ...):
//!
//! | e | period 2          | period >= 3 |
//! |---|-------------------|-------------|
//! | 1 | 1                 | 1           |
//! | 2 | 2                 | 2           |
//! | 3 | 3                 | 3           |
//! | 4 | 4                 | 4           |
//! | 5 | 3 (N: 3, 5)       | 3, 5        |
//! | 6 | 2                 | 2, 4, 6     |
//! | 7 | 1                 | 1           |
//!
//! Neutral nitrogen additionally keeps valence 5 as in the OpenSMILES organic
//! subset. Any other electron count has no allowed valence.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    /// Lowercase symbol used for aromatic atoms, if the element may be aromatic.
    pub fn aromatic_symbol(self) -> Option<&'static str> {
        match self {
            Element::B => Some("b"),
            Element::C => Some("c"),
            Element::N => Some("n"),
            Element::O => Some("o"),
            Element::P => Some("p"),
            Element::S => Some("s"),
            _ => None,
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }

    pub fn from_aromatic_symbol(s: &str) -> Option<Element> {
        Element::ALL
            .iter()
            .copied()
            .find(|e| e.aromatic_symbol() == Some(s))
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::P => 15,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    fn group_electrons(self) -> i32 {
        match self {
            Element::B => 3,
            Element::C => 4,
            Element::N | Element::P => 5,
            Element::O | Element::S => 6,
            Element::F | Element::Cl | Element::Br | Element::I => 7,
        }
    }

    fn period(self) -> u8 {
        match self {
            Element::B | Element::C | Element::N | Element::O | Element::F => 2,
            _ => 3,
        }
    }

    /// Aromatic atoms of these elements donate one electron to the ring and so
    /// take one less implicit hydrogen (c, n, p, b); o and s donate a lone pair.
    pub(crate) fn takes_pi_bond(self) -> bool {
        matches!(self, Element::B | Element::C | Element::N | Element::P)
    }

    /// Allowed total valences (bond-order sum plus hydrogens), ascending.
    pub fn allowed_valences(self, charge: i8) -> &'static [u8] {
        let e = self.group_electrons() - charge as i32;
        let hyper = self.period() >= 3;
        match e {
            1 => &[1],
            2 => &[2],
            3 => &[3],
            4 => &[4],
            5 if hyper || (self == Element::N && charge == 0) => &[3, 5],
            5 => &[3],
            6 if hyper => &[2, 4, 6],
            6 => &[2],
            7 => &[1],
            _ => &[],
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
