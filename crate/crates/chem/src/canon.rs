//! Canonical SMILES.
//!
//! Atoms are ranked by an invariant tuple (element, aromaticity, degree,
//! charge, hydrogen count, isotope) and the ranks are refined with neighbour
//! ranks until stable. Remaining ties are broken by trying every member of
//! the lowest tied class and keeping the lexicographically smallest string,
//! so the result does not depend on input atom order. The string itself is a
//! depth-first traversal from the lowest-ranked atom, visiting neighbours in
//! rank order.

use crate::error::ChemError;
use crate::molecule::{implicit_hydrogens, Atom, BondOrder, Molecule};
use crate::smiles::parse_components;

/// Upper bound on fully-ranked orderings explored while breaking ties. Past
/// it the search commits to the first candidate at every remaining tie.
const TIE_BREAK_BUDGET: usize = 4096;

/// Canonical SMILES of a (possibly multi-component) molecule. Components are
/// canonicalized independently, sorted, and joined with `.`.
pub fn canonical_smiles(mol: &Molecule) -> String {
    let comps = mol.components();
    if comps.len() == 1 {
        return canonical_connected(mol);
    }
    let mut parts: Vec<String> = comps
        .iter()
        .map(|c| canonical_connected(&mol.induced_subgraph(c)))
        .collect();
    parts.sort();
    parts.join(".")
}

/// Parses a dot-separated SMILES string and returns its canonical form.
pub fn canonicalize(s: &str) -> Result<String, ChemError> {
    let mut parts: Vec<String> = parse_components(s)?.iter().map(canonical_smiles).collect();
    parts.sort();
    Ok(parts.join("."))
}

fn canonical_connected(mol: &Molecule) -> String {
    if mol.atom_count() == 0 {
        return String::new();
    }
    let ranks = refine(mol, initial_ranks(mol));
    let mut best: Option<String> = None;
    let mut leaves = 0;
    search(mol, ranks, &mut best, &mut leaves);
    best.expect("at least one ordering explored")
}

fn search(mol: &Molecule, ranks: Vec<u32>, best: &mut Option<String>, leaves: &mut usize) {
    let Some(tied) = lowest_tied_class(&ranks) else {
        *leaves += 1;
        let s = write_smiles(mol, &ranks);
        if best.as_ref().is_none_or(|b| s < *b) {
            *best = Some(s);
        }
        return;
    };
    for (k, &atom) in tied.iter().enumerate() {
        if k > 0 && *leaves >= TIE_BREAK_BUDGET {
            break;
        }
        let mut split: Vec<u32> = ranks.iter().map(|&r| 2 * r + 1).collect();
        split[atom] -= 1;
        search(mol, refine(mol, dense(&split)), best, leaves);
    }
}

fn lowest_tied_class(ranks: &[u32]) -> Option<Vec<usize>> {
    let mut counts = std::collections::BTreeMap::new();
    for &r in ranks {
        *counts.entry(r).or_insert(0usize) += 1;
    }
    let (&r, _) = counts.iter().find(|(_, &c)| c > 1)?;
    Some((0..ranks.len()).filter(|&i| ranks[i] == r).collect())
}

fn atom_invariant(mol: &Molecule, i: usize) -> (u8, bool, usize, i8, u8, u16) {
    let a = mol.atoms()[i];
    (
        a.element.atomic_number(),
        a.aromatic,
        mol.degree(i),
        a.charge,
        a.hydrogens,
        a.isotope.unwrap_or(0),
    )
}

fn initial_ranks(mol: &Molecule) -> Vec<u32> {
    let keys: Vec<_> = (0..mol.atom_count())
        .map(|i| atom_invariant(mol, i))
        .collect();
    dense(&keys)
}

/// Maps values to dense ranks 0.. preserving order.
fn dense<T: Ord + Clone>(keys: &[T]) -> Vec<u32> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

fn refine(mol: &Molecule, mut ranks: Vec<u32>) -> Vec<u32> {
    let mut classes = count_classes(&ranks);
    loop {
        let keys: Vec<(u32, Vec<(u32, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(u32, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, b)| (ranks[j], mol.bonds()[b].order.code()))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense(&keys);
        let next_classes = count_classes(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

fn count_classes(ranks: &[u32]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

/// Writes a SMILES string for a connected molecule, starting from the
/// lowest-priority atom and visiting neighbours in ascending priority.
/// Priorities need not be distinct; ties fall back to atom index.
pub fn write_smiles(mol: &Molecule, priority: &[u32]) -> String {
    assert_eq!(priority.len(), mol.atom_count(), "one priority per atom");
    let n = mol.atom_count();
    let mut out = String::new();
    let mut visited = vec![false; n];
    let order = |i: usize| (priority[i], i);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| order(i));
    let mut first = true;
    for start in starts {
        if visited[start] {
            continue;
        }
        if !first {
            out.push('.');
        }
        first = false;
        let plan = plan_traversal(mol, start, &order, &mut visited);
        emit(mol, &plan, start, &mut out);
    }
    out
}

struct Plan {
    children: Vec<Vec<usize>>,
    /// Ring-closure partners per atom, in the order digits are written.
    ring_partners: Vec<Vec<usize>>,
}

fn plan_traversal(
    mol: &Molecule,
    start: usize,
    order: &dyn Fn(usize) -> (u32, usize),
    visited: &mut [bool],
) -> Plan {
    let n = mol.atom_count();
    let mut children = vec![Vec::new(); n];
    let mut ring_partners = vec![Vec::new(); n];
    let mut on_stack = vec![false; n];
    let mut sorted_nb: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = mol.neighbors(i).iter().map(|&(j, _)| j).collect();
            v.sort_by_key(|&j| order(j));
            v
        })
        .collect();

    // iterative DFS: (atom, parent, next neighbour index)
    let mut stack = vec![(start, usize::MAX, 0usize)];
    visited[start] = true;
    on_stack[start] = true;
    let mut ring_edges: Vec<(usize, usize)> = Vec::new();
    while let Some(&mut (u, parent, ref mut next)) = stack.last_mut() {
        if *next < sorted_nb[u].len() {
            let v = sorted_nb[u][*next];
            *next += 1;
            if v == parent {
                continue;
            }
            if !visited[v] {
                visited[v] = true;
                on_stack[v] = true;
                children[u].push(v);
                stack.push((v, u, 0));
            } else if on_stack[v] {
                // back edge to an ancestor: opens at v, closes at u
                ring_edges.push((v, u));
            }
        } else {
            on_stack[u] = false;
            stack.pop();
        }
    }
    for (open, close) in ring_edges {
        ring_partners[open].push(close);
        ring_partners[close].push(open);
    }
    for partners in ring_partners.iter_mut() {
        partners.sort_by_key(|&j| order(j));
    }
    sorted_nb.clear();
    Plan {
        children,
        ring_partners,
    }
}

fn emit(mol: &Molecule, plan: &Plan, start: usize, out: &mut String) {
    let n = mol.atom_count();
    let mut written = vec![false; n];
    // ring digit currently assigned to each open (opener, closer) pair
    let mut open_digits: Vec<(usize, usize, u32)> = Vec::new();
    let mut in_use: Vec<bool> = vec![false; 100];

    enum Step {
        Atom(usize, Option<usize>),
        Text(&'static str),
    }
    let mut work = vec![Step::Atom(start, None)];
    while let Some(step) = work.pop() {
        match step {
            Step::Text(t) => out.push_str(t),
            Step::Atom(u, from) => {
                if let Some(p) = from {
                    push_bond(mol, p, u, out);
                }
                write_atom(mol, u, out);
                written[u] = true;
                let mut released = Vec::new();
                for &partner in &plan.ring_partners[u] {
                    if written[partner] {
                        let pos = open_digits
                            .iter()
                            .position(|&(o, c, _)| o == partner && c == u)
                            .expect("ring opened before closing");
                        let (_, _, d) = open_digits.remove(pos);
                        push_digit(d, out);
                        released.push(d);
                    } else {
                        let d = (1..100u32)
                            .find(|&d| !in_use[d as usize])
                            .expect("fewer than 100 open rings");
                        in_use[d as usize] = true;
                        open_digits.push((u, partner, d));
                        push_bond(mol, u, partner, out);
                        push_digit(d, out);
                    }
                }
                for d in released {
                    in_use[d as usize] = false;
                }
                let kids = &plan.children[u];
                for (k, &child) in kids.iter().enumerate().rev() {
                    if k + 1 < kids.len() {
                        work.push(Step::Text(")"));
                        work.push(Step::Atom(child, Some(u)));
                        work.push(Step::Text("("));
                    } else {
                        work.push(Step::Atom(child, Some(u)));
                    }
                }
            }
        }
    }
}

fn push_digit(d: u32, out: &mut String) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        out.push('%');
        out.push_str(&d.to_string());
    }
}

fn push_bond(mol: &Molecule, a: usize, b: usize, out: &mut String) {
    let bond = mol.bond_between(a, b).expect("bonded atoms");
    let both_aromatic = mol.atoms()[a].aromatic && mol.atoms()[b].aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => out.push('-'),
        BondOrder::Single => {}
        BondOrder::Aromatic if both_aromatic => {}
        other => out.push(other.symbol()),
    }
}

fn needs_brackets(mol: &Molecule, i: usize) -> bool {
    let a: &Atom = &mol.atoms()[i];
    a.charge != 0
        || a.isotope.is_some()
        || implicit_hydrogens(a.element, a.aromatic, mol.bond_valence_sum(i)) != Some(a.hydrogens)
}

fn write_atom(mol: &Molecule, i: usize, out: &mut String) {
    let a = mol.atoms()[i];
    if !needs_brackets(mol, i) {
        out.push_str(a.symbol());
        return;
    }
    out.push('[');
    if let Some(iso) = a.isotope {
        out.push_str(&iso.to_string());
    }
    out.push_str(a.symbol());
    match a.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            out.push('H');
            out.push_str(&h.to_string());
        }
    }
    match a.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            out.push('+');
            out.push_str(&c.to_string());
        }
        c => {
            out.push('-');
            out.push_str(&(-c).to_string());
        }
    }
    out.push(']');
}
