//! Parser for a restricted SMILES dialect.
//!
//! Supported: organic-subset atoms (`B C N O P S F Cl Br I`), aromatic
//! `b c n o p s`, bracket atoms `[isotope? symbol H<n>? charge?]`, bonds
//! `- = # :`, branches, ring closures `1`-`9` and `%nn`. Stereo marks,
//! wildcards and `.` (multiple components) are rejected.

use std::collections::BTreeMap;

use crate::element::Element;
use crate::error::ChemError;
use crate::molecule::{implicit_hydrogens, Atom, Bond, BondOrder, Molecule};

struct ParsedAtom {
    atom: Atom,
    bracket: bool,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<Bond>,
}

/// Parses a single-component SMILES string into a validated [`Molecule`].
pub fn parse_smiles(s: &str) -> Result<Molecule, ChemError> {
    if s.is_empty() {
        return Err(ChemError::Empty);
    }
    let mut p = Parser {
        src: s.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    p.parse()?;
    p.finish()
}

/// Parses a dot-separated SMILES string into its components.
pub fn parse_components(s: &str) -> Result<Vec<Molecule>, ChemError> {
    s.split('.')
        .enumerate()
        .map(|(index, part)| {
            parse_smiles(part).map_err(|e| ChemError::Component {
                field: "molecule",
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Number of dot-separated components that parse; 0 if any component fails.
pub fn count_components(s: &str) -> usize {
    match parse_components(s) {
        Ok(parts) => parts.len(),
        Err(_) => 0,
    }
}

#[derive(PartialEq)]
enum Last {
    Start,
    Atom,
    Bond,
    Ring,
    Open,
    Close,
}

impl<'a> Parser<'a> {
    fn syntax<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T, ChemError> {
        Err(ChemError::Syntax {
            pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn parse(&mut self) -> Result<(), ChemError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut branches: Vec<(Option<usize>, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, (usize, Option<BondOrder>)> = BTreeMap::new();
        let mut last = Last::Start;
        let mut ring_ok = false;

        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'[' | b'A'..=b'Z' | b'a'..=b'z' => {
                    let idx = self.parse_atom()?;
                    if let Some(p) = prev {
                        let order = pending.map(|(o, _)| o);
                        self.add_bond(p, idx, order)?;
                    } else if last != Last::Start {
                        return self.syntax(start, "atom without attachment point");
                    }
                    pending = None;
                    prev = Some(idx);
                    last = Last::Atom;
                    ring_ok = true;
                }
                b'-' | b'=' | b'#' | b':' => {
                    if pending.is_some() || prev.is_none() || last == Last::Bond {
                        return self.syntax(start, "unexpected bond symbol");
                    }
                    let order = match c {
                        b'-' => BondOrder::Single,
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        _ => BondOrder::Aromatic,
                    };
                    pending = Some((order, start));
                    self.pos += 1;
                    last = Last::Bond;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.syntax(start, "ring closure without atom");
                    };
                    if !ring_ok {
                        return self.syntax(start, "ring closure must follow an atom");
                    }
                    let label = self.parse_ring_label()?;
                    let order = pending.take().map(|(o, _)| o);
                    match rings.remove(&label) {
                        Some((open_atom, open_order)) => {
                            let order = match (open_order, order) {
                                (Some(a), Some(b)) if a != b => {
                                    return Err(ChemError::RingBondConflict { label })
                                }
                                (Some(a), _) => Some(a),
                                (None, b) => b,
                            };
                            self.add_bond(open_atom, atom, order)?;
                        }
                        None => {
                            rings.insert(label, (atom, order));
                        }
                    }
                    last = Last::Ring;
                }
                b'(' => {
                    if prev.is_none()
                        || pending.is_some()
                        || matches!(last, Last::Open | Last::Start)
                    {
                        return self.syntax(start, "branch without preceding atom");
                    }
                    branches.push((prev, start));
                    self.pos += 1;
                    last = Last::Open;
                    ring_ok = false;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(ChemError::UnbalancedParenthesis { pos: start });
                    };
                    if pending.is_some() || matches!(last, Last::Open | Last::Bond) {
                        return self.syntax(start, "empty branch or dangling bond");
                    }
                    prev = p;
                    self.pos += 1;
                    last = Last::Close;
                    ring_ok = false;
                }
                b'.' => return Err(ChemError::MultiComponent { pos: start }),
                _ => {
                    return self.syntax(start, format!("unexpected character '{}'", c as char));
                }
            }
        }

        if let Some((_, pos)) = pending {
            return self.syntax(pos, "dangling bond");
        }
        if let Some(&(_, pos)) = branches.first() {
            return Err(ChemError::UnbalancedParenthesis { pos });
        }
        if let Some((&label, _)) = rings.iter().next() {
            return Err(ChemError::UnmatchedRingClosure { label });
        }
        if self.atoms.is_empty() {
            return Err(ChemError::Empty);
        }
        Ok(())
    }

    fn parse_ring_label(&mut self) -> Result<u32, ChemError> {
        let start = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.src.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => self.syntax(start, "'%' must be followed by two digits"),
            }
        } else {
            let d = self.src[self.pos] - b'0';
            if d == 0 {
                return self.syntax(start, "ring closure 0 is not supported");
            }
            self.pos += 1;
            Ok(d as u32)
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, order: Option<BondOrder>) -> Result<(), ChemError> {
        if a == b {
            return Err(ChemError::SelfLoop { atom: a });
        }
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(ChemError::DuplicateBond {
                a: a.min(b),
                b: a.max(b),
            });
        }
        let order = order.unwrap_or(
            if self.atoms[a].atom.aromatic && self.atoms[b].atom.aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            },
        );
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn parse_atom(&mut self) -> Result<usize, ChemError> {
        let parsed = if self.peek() == Some(b'[') {
            self.parse_bracket_atom()?
        } else {
            let start = self.pos;
            let (element, aromatic, len) = self
                .match_symbol(true)
                .or_else(|| self.match_symbol(false))
                .map_or_else(|| self.syntax(start, "unknown atom symbol"), Ok)?;
            self.pos += len;
            let mut atom = Atom::new(element);
            atom.aromatic = aromatic;
            ParsedAtom {
                atom,
                bracket: false,
            }
        };
        self.atoms.push(parsed);
        Ok(self.atoms.len() - 1)
    }

    /// Matches an element symbol at the cursor. `two` selects two-letter symbols.
    fn match_symbol(&self, two: bool) -> Option<(Element, bool, usize)> {
        let len = if two { 2 } else { 1 };
        let s = std::str::from_utf8(self.src.get(self.pos..self.pos + len)?).ok()?;
        if let Some(e) = Element::from_symbol(s) {
            return Some((e, false, len));
        }
        Element::from_aromatic_symbol(s).map(|e| (e, true, len))
    }

    fn parse_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn parse_bracket_atom(&mut self) -> Result<ParsedAtom, ChemError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = match self.parse_number() {
            Some(n) if n > 0 && n < 1000 => Some(n as u16),
            Some(_) => return self.syntax(open + 1, "isotope out of range"),
            None => None,
        };
        let sym_pos = self.pos;
        let (element, aromatic, len) = self
            .match_symbol(true)
            .or_else(|| self.match_symbol(false))
            .map_or_else(|| self.syntax(sym_pos, "unknown bracket atom symbol"), Ok)?;
        self.pos += len;

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = match self.parse_number() {
                Some(n) if n <= 9 => n as u8,
                Some(_) => return self.syntax(self.pos, "hydrogen count too large"),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.parse_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
            if !(-4..=4).contains(&charge) {
                return self.syntax(self.pos, "charge out of range");
            }
        }

        if self.peek() != Some(b']') {
            return self.syntax(self.pos, "expected ']'");
        }
        self.pos += 1;
        Ok(ParsedAtom {
            atom: Atom {
                element,
                aromatic,
                charge: charge as i8,
                hydrogens,
                isotope,
            },
            bracket: true,
        })
    }

    fn finish(self) -> Result<Molecule, ChemError> {
        let mut atoms: Vec<Atom> = self.atoms.iter().map(|p| p.atom).collect();
        let graph = Molecule::from_parts(atoms.clone(), self.bonds.clone())?;
        for (i, parsed) in self.atoms.iter().enumerate() {
            if !parsed.bracket {
                let sum = graph.bond_valence_sum(i);
                atoms[i].hydrogens =
                    implicit_hydrogens(parsed.atom.element, parsed.atom.aromatic, sum)
                        .ok_or(ChemError::Valence { atom: i })?;
            }
        }
        Molecule::new(atoms, self.bonds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethanol() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.atom_count(), 3);
        assert_eq!(m.bond_count(), 2);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Single));
        let h: Vec<u8> = m.atoms().iter().map(|a| a.hydrogens).collect();
        assert_eq!(h, vec![3, 2, 1]);
    }

    #[test]
    fn unmatched_ring() {
        assert_eq!(
            parse_smiles("C1CC"),
            Err(ChemError::UnmatchedRingClosure { label: 1 })
        );
    }

    #[test]
    fn pentavalent_carbon() {
        assert_eq!(
            parse_smiles("C(C)(C)(C)(C)C"),
            Err(ChemError::Valence { atom: 0 })
        );
    }

    #[test]
    fn benzene_and_pyrrole() {
        let b = parse_smiles("c1ccccc1").unwrap();
        assert!(b.atoms().iter().all(|a| a.aromatic && a.hydrogens == 1));
        assert!(b.bonds().iter().all(|x| x.order == BondOrder::Aromatic));
        let p = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(p.atoms()[3].hydrogens, 1);
        let pyridine = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(pyridine.atoms()[3].hydrogens, 0);
        let thiophene = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(thiophene.atoms()[3].hydrogens, 0);
    }

    #[test]
    fn aromatic_requires_ring() {
        assert!(matches!(
            parse_smiles("cC"),
            Err(ChemError::AromaticOutsideRing { atom: 0 })
        ));
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[NH4+]").unwrap();
        assert_eq!(m.atoms()[0].charge, 1);
        assert_eq!(m.atoms()[0].hydrogens, 4);
        let m = parse_smiles("CC(=O)[O-]").unwrap();
        assert_eq!(m.atoms()[3].charge, -1);
        let m = parse_smiles("[13CH4]").unwrap();
        assert_eq!(m.atoms()[0].isotope, Some(13));
        assert!(matches!(
            parse_smiles("[CH5]"),
            Err(ChemError::Valence { atom: 0 })
        ));
    }

    #[test]
    fn ring_percent_labels_and_bond_symbols() {
        let m = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(m.ring_count(), 1);
        let m = parse_smiles("C=1CC1").unwrap();
        assert_eq!(m.bond_between(0, 2).unwrap().order, BondOrder::Double);
        assert_eq!(
            parse_smiles("C=1CC#1"),
            Err(ChemError::RingBondConflict { label: 1 })
        );
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_smiles("C(C"),
            Err(ChemError::UnbalancedParenthesis { pos: 1 })
        ));
        assert!(matches!(
            parse_smiles("CC)"),
            Err(ChemError::UnbalancedParenthesis { pos: 2 })
        ));
        assert!(matches!(
            parse_smiles("CC.O"),
            Err(ChemError::MultiComponent { pos: 2 })
        ));
        assert!(matches!(
            parse_smiles("C()C"),
            Err(ChemError::Syntax { .. })
        ));
        assert!(matches!(parse_smiles("C="), Err(ChemError::Syntax { .. })));
        assert!(matches!(
            parse_smiles("CX"),
            Err(ChemError::Syntax { pos: 1, .. })
        ));
        assert!(matches!(
            parse_smiles("C[C@H](O)N"),
            Err(ChemError::Syntax { .. })
        ));
        assert!(matches!(
            parse_smiles("C11"),
            Err(ChemError::SelfLoop { .. })
        ));
        assert!(matches!(
            parse_smiles("C1C1"),
            Err(ChemError::DuplicateBond { .. })
        ));
        assert_eq!(parse_smiles(""), Err(ChemError::Empty));
        assert!(matches!(
            parse_smiles(")"),
            Err(ChemError::UnbalancedParenthesis { .. })
        ));
    }

    #[test]
    fn components() {
        assert_eq!(count_components("CCO"), 1);
        assert_eq!(count_components("CC.O"), 2);
        assert_eq!(count_components("CC.)"), 0);
        assert_eq!(count_components(""), 0);
    }
}
