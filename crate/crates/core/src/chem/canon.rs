//! Canonical SMILES emission.
//!
//! Atoms are ranked by iterative neighborhood refinement (Morgan-style).
//! Remaining ties are broken by individualizing each member of the first
//! tied cell in turn and refining again; every complete ranking is emitted
//! as a depth-first SMILES string and the lexicographically smallest one is
//! the key. Atoms that are twins (same label, same neighbors over the same
//! bond orders) are interchangeable, so only one of them is branched on.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::hash::{Hash, Hasher};

use super::{element, implicit_hydrogens, BondOrder, Molecule};

/// Molecules above this atom count get the invariant-hash key.
pub const DEFAULT_CANON_ATOM_LIMIT: usize = 128;
/// Complete rankings explored before falling back to the invariant-hash key.
const LEAF_BUDGET: usize = 20_000;

/// Canonical key for a (scaffold) molecule. Isomorphic graphs map to the
/// same string; the empty molecule maps to `""`.
///
/// Molecules over [`DEFAULT_CANON_ATOM_LIMIT`] atoms, or whose symmetry
/// exhausts the search budget, get `"~hash:<hex>"` built from refined
/// atom invariants instead. That key is still isomorphism-invariant but may
/// collide for non-isomorphic graphs.
pub fn scaffold_key(mol: &Molecule) -> String {
    canonical_form(mol).0
}

/// Canonical SMILES that re-parses to an isomorphic molecule. Unlike
/// [`scaffold_key`] this always returns parseable SMILES, even when the
/// search budget is exhausted (the first complete ranking is used).
pub fn canonical_smiles(mol: &Molecule) -> String {
    canonical_form(mol).1
}

fn canonical_form(mol: &Molecule) -> (String, String) {
    if mol.is_empty() {
        return (String::new(), String::new());
    }
    let labels = atom_labels(mol);
    let initial = refine(mol, dense_rank(&labels));
    if mol.num_atoms() > DEFAULT_CANON_ATOM_LIMIT {
        let smiles = first_leaf(mol, initial.clone());
        return (hash_key(&labels, &initial), smiles);
    }
    let mut search = Search {
        mol,
        best: None,
        leaves: 0,
    };
    search.explore(initial.clone());
    let best = search.best.expect("at least one leaf");
    if search.leaves > LEAF_BUDGET {
        return (hash_key(&labels, &initial), best);
    }
    (best.clone(), best)
}

/// Isomorphism-invariant atom label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct AtomLabel {
    element: u8,
    aromatic: bool,
    charge: i8,
    isotope: u16,
    hydrogens: usize,
    degree: usize,
}

fn atom_labels(mol: &Molecule) -> Vec<AtomLabel> {
    (0..mol.num_atoms())
        .map(|i| {
            let a = mol.atom(i);
            AtomLabel {
                element: a.element,
                aromatic: a.aromatic,
                charge: a.formal_charge,
                isotope: a.isotope.unwrap_or(0),
                hydrogens: a.explicit_h as usize + a.implicit_h as usize,
                degree: mol.degree(i),
            }
        })
        .collect()
}

fn dense_rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("present"))
        .collect()
}

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Refines ranks until the number of classes stops growing. The old rank
/// leads every new key, so the order between existing classes is kept.
fn refine(mol: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let n = mol.num_atoms();
    let mut classes = count_classes(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u8, usize)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(j, bi)| (bond_code(mol.bonds()[bi].order), ranks[j]))
                    .collect();
                nb.sort_unstable();
                (ranks[i], nb)
            })
            .collect();
        let next = dense_rank(&keys);
        let next_classes = count_classes(&next);
        ranks = next;
        if next_classes == classes || next_classes == n {
            return ranks;
        }
        classes = next_classes;
    }
}

fn count_classes(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

fn individualize(ranks: &[usize], atom: usize) -> Vec<usize> {
    let keys: Vec<(usize, u8)> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, u8::from(i != atom)))
        .collect();
    dense_rank(&keys)
}

/// First non-singleton class in rank order.
fn target_cell(ranks: &[usize]) -> Option<Vec<usize>> {
    let mut cells: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &r) in ranks.iter().enumerate() {
        cells.entry(r).or_default().push(i);
    }
    cells.into_values().find(|c| c.len() > 1)
}

/// Neighbor signature used to detect interchangeable twins.
fn twin_signature(mol: &Molecule, i: usize) -> Vec<(usize, u8)> {
    let mut sig: Vec<(usize, u8)> = mol
        .neighbors(i)
        .iter()
        .map(|&(j, bi)| (j, bond_code(mol.bonds()[bi].order)))
        .collect();
    sig.sort_unstable();
    sig
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<String>,
    leaves: usize,
}

impl Search<'_> {
    fn explore(&mut self, ranks: Vec<usize>) {
        if self.leaves > LEAF_BUDGET && self.best.is_some() {
            return;
        }
        let Some(cell) = target_cell(&ranks) else {
            self.leaves += 1;
            let s = emit(self.mol, &ranks);
            if self.best.as_ref().is_none_or(|b| s < *b) {
                self.best = Some(s);
            }
            return;
        };
        let mut seen: Vec<Vec<(usize, u8)>> = Vec::new();
        for &atom in &cell {
            let sig = twin_signature(self.mol, atom);
            if seen.contains(&sig) {
                continue;
            }
            seen.push(sig);
            let next = refine(self.mol, individualize(&ranks, atom));
            self.explore(next);
        }
    }
}

fn first_leaf(mol: &Molecule, mut ranks: Vec<usize>) -> String {
    while let Some(cell) = target_cell(&ranks) {
        ranks = refine(mol, individualize(&ranks, cell[0]));
    }
    emit(mol, &ranks)
}

fn hash_key(labels: &[AtomLabel], ranks: &[usize]) -> String {
    let mut pairs: Vec<(usize, &AtomLabel)> = ranks.iter().copied().zip(labels).collect();
    pairs.sort();
    let mut h = DefaultHasher::new();
    pairs.hash(&mut h);
    format!("~hash:{:016x}", h.finish())
}

/// Depth-first SMILES for a complete ranking: each component starts at its
/// lowest-ranked atom and neighbors are visited in rank order.
fn emit(mol: &Molecule, ranks: &[usize]) -> String {
    let n = mol.num_atoms();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);

    let sorted_neighbors: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            let mut nb = mol.neighbors(i).to_vec();
            nb.sort_by_key(|&(j, _)| ranks[j]);
            nb
        })
        .collect();

    let mut visited = vec![false; n];
    let mut bond_used = vec![false; mol.num_bonds()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    // ring bonds touching each atom: (partner, bond)
    let mut ring_ends: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut roots = Vec::new();

    for &start in &order {
        if visited[start] {
            continue;
        }
        roots.push(start);
        // iterative DFS keeping an explicit neighbor cursor per frame
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        visited[start] = true;
        while let Some(frame) = stack.last_mut() {
            let (a, cursor) = *frame;
            if cursor == sorted_neighbors[a].len() {
                stack.pop();
                continue;
            }
            frame.1 += 1;
            let (nb, bi) = sorted_neighbors[a][cursor];
            if bond_used[bi] {
                continue;
            }
            bond_used[bi] = true;
            if visited[nb] {
                ring_ends[a].push((nb, bi));
                ring_ends[nb].push((a, bi));
            } else {
                visited[nb] = true;
                children[a].push((nb, bi));
                stack.push((nb, 0));
            }
        }
    }
    for ends in ring_ends.iter_mut() {
        ends.sort_by_key(|&(p, _)| ranks[p]);
    }

    let mut out = String::new();
    let mut digits = RingDigits::default();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        emit_atom(mol, root, &children, &ring_ends, &mut digits, &mut out);
    }
    out
}

#[derive(Default)]
struct RingDigits {
    open: BTreeMap<usize, u16>,
    in_use: Vec<bool>,
}

impl RingDigits {
    fn allocate(&mut self, bond: usize) -> u16 {
        let d = (1..)
            .find(|&d| !self.in_use.get(d as usize).copied().unwrap_or(false))
            .expect("free digit");
        if self.in_use.len() <= d as usize {
            self.in_use.resize(d as usize + 1, false);
        }
        self.in_use[d as usize] = true;
        self.open.insert(bond, d);
        d
    }

    fn close(&mut self, bond: usize) -> Option<u16> {
        let d = self.open.remove(&bond)?;
        self.in_use[d as usize] = false;
        Some(d)
    }
}

fn push_digit(out: &mut String, d: u16) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn emit_atom(
    mol: &Molecule,
    root: usize,
    children: &[Vec<(usize, usize)>],
    ring_ends: &[Vec<(usize, usize)>],
    digits: &mut RingDigits,
    out: &mut String,
) {
    enum Step {
        Atom(usize, Option<usize>),
        Open,
        Close,
    }
    let mut stack = vec![Step::Atom(root, None)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Open => out.push('('),
            Step::Close => out.push(')'),
            Step::Atom(a, via) => {
                if let Some(bi) = via {
                    let b = &mol.bonds()[bi];
                    out.push_str(bond_symbol(mol, b.begin, b.end, b.order));
                }
                out.push_str(&atom_text(mol, a));
                for &(partner, bi) in &ring_ends[a] {
                    match digits.close(bi) {
                        Some(d) => push_digit(out, d),
                        None => {
                            let order = mol.bonds()[bi].order;
                            out.push_str(bond_symbol(mol, a, partner, order));
                            let d = digits.allocate(bi);
                            push_digit(out, d);
                        }
                    }
                }
                let kids = &children[a];
                // pushed in reverse so the first child is emitted first
                for (k, &(child, bi)) in kids.iter().enumerate().rev() {
                    let last = k + 1 == kids.len();
                    if !last {
                        stack.push(Step::Close);
                    }
                    stack.push(Step::Atom(child, Some(bi)));
                    if !last {
                        stack.push(Step::Open);
                    }
                }
            }
        }
    }
}

fn bond_symbol(mol: &Molecule, a: usize, b: usize, order: BondOrder) -> &'static str {
    let both_aromatic = mol.atom(a).aromatic && mol.atom(b).aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

const ORGANIC: [u8; 11] = [0, 5, 6, 7, 8, 9, 15, 16, 17, 35, 53];

fn atom_text(mol: &Molecule, i: usize) -> String {
    let atom = mol.atom(i);
    let own_h = atom.explicit_h as usize + atom.implicit_h as usize;
    let symbol = element::symbol(atom.element);
    let symbol = if atom.aromatic {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    let organic_ok = ORGANIC.contains(&atom.element)
        && atom.formal_charge == 0
        && atom.isotope.is_none()
        && implicit_hydrogens(atom.element, atom.aromatic, mol.bond_order_sum(i))
            == Some(own_h as u8);
    if organic_ok {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(&symbol);
    match own_h {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "+{c}");
        }
        c => {
            let _ = write!(s, "-{}", -c);
        }
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn key(s: &str) -> String {
        scaffold_key(&parse_smiles(s).unwrap())
    }

    #[test]
    fn benzene_orderings_agree() {
        assert_eq!(key("c1ccccc1"), key("c1ccc(cc1)"));
        assert_eq!(key("c1ccccc1"), "c1ccccc1");
    }

    #[test]
    fn empty_key() {
        assert_eq!(scaffold_key(&Molecule::empty()), "");
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(key("CCO"), key("COC"));
        assert_eq!(key("OCC"), key("CCO"));
        assert_ne!(key("Cc1ccccc1C"), key("Cc1cccc(C)c1"));
        assert_eq!(key("Cc1ccccc1C"), key("c1cccc(C)c1C"));
    }

    #[test]
    fn emission_reparses() {
        for s in [
            "CC(=O)[O-].[Na+]",
            "c1ccc2[nH]ccc2c1",
            "C1CC2CCC1CC2",
            "O=C(O)c1ccccc1-c1ccccc1",
            "[13CH4]",
            "C#N",
            "FC(F)(F)C(F)(F)C(F)(F)F",
        ] {
            let m = parse_smiles(s).unwrap();
            let out = canonical_smiles(&m);
            let back = parse_smiles(&out).unwrap_or_else(|e| panic!("{s} -> {out}: {e}"));
            assert_eq!(scaffold_key(&back), scaffold_key(&m), "{s} -> {out}");
            assert_eq!(back.num_atoms(), m.num_atoms());
            assert_eq!(back.num_bonds(), m.num_bonds());
        }
    }

    #[test]
    fn highly_symmetric_cage_terminates() {
        // cubane: every atom equivalent
        let k = key("C12C3C4C1C5C2C3C45");
        assert!(!k.starts_with("~hash"));
        assert_eq!(k, key("C12C3C4C1C5C2C3C45"));
    }
}
