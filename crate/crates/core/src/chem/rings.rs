use std::collections::VecDeque;

use super::{Bond, Molecule};

/// Ring basis of the molecule: independent cycles as atom-index lists in
/// traversal order. The basis size is `bonds - atoms + components`.
///
/// Cycles are chosen smallest-first (shortest cycle through each bond,
/// then fundamental cycles to complete the basis), so for ordinary ring
/// systems this is the smallest set of smallest rings.
pub fn perceive_rings(mol: &Molecule) -> Vec<Vec<usize>> {
    mol.rings().to_vec()
}

pub(super) fn cycle_basis(
    n_atoms: usize,
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> Vec<Vec<usize>> {
    let n_bonds = bonds.len();
    let components = count_components(n_atoms, adjacency);
    let target = (n_bonds + components).saturating_sub(n_atoms);
    if target == 0 {
        return Vec::new();
    }

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for (bi, bond) in bonds.iter().enumerate() {
        if let Some(path) = shortest_path_avoiding(adjacency, bond.begin, bond.end, bi) {
            candidates.push(path);
        }
    }
    candidates.extend(fundamental_cycles(n_atoms, bonds, adjacency));
    // shortest first; ties by sorted atom set for determinism
    candidates.sort_by_cached_key(|c| {
        let mut s = c.clone();
        s.sort_unstable();
        (c.len(), s)
    });

    let mut basis = Gf2Basis::default();
    let mut rings = Vec::with_capacity(target);
    for cycle in candidates {
        if rings.len() == target {
            break;
        }
        let vector = edge_vector(&cycle, adjacency, n_bonds);
        if basis.insert(vector) {
            rings.push(cycle);
        }
    }
    debug_assert_eq!(rings.len(), target);
    rings
}

fn count_components(n_atoms: usize, adjacency: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; n_atoms];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..n_atoms {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(a) = stack.pop() {
            for &(n, _) in &adjacency[a] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
    }
    count
}

/// BFS path from `from` to `to` that does not use bond `skip`.
/// Returned as the atom list from `from` to `to`.
fn shortest_path_avoiding(
    adjacency: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    skip: usize,
) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; adjacency.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(a) = queue.pop_front() {
        if a == to {
            break;
        }
        for &(n, bi) in &adjacency[a] {
            if bi == skip || parent[n] != usize::MAX {
                continue;
            }
            parent[n] = a;
            queue.push_back(n);
        }
    }
    if parent[to] == usize::MAX {
        return None;
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

fn fundamental_cycles(
    n_atoms: usize,
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> Vec<Vec<usize>> {
    let mut parent = vec![usize::MAX; n_atoms];
    let mut depth = vec![0usize; n_atoms];
    let mut tree_bond = vec![false; bonds.len()];
    for root in 0..n_atoms {
        if parent[root] != usize::MAX {
            continue;
        }
        parent[root] = root;
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            for &(n, bi) in &adjacency[a] {
                if parent[n] == usize::MAX {
                    parent[n] = a;
                    depth[n] = depth[a] + 1;
                    tree_bond[bi] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    let mut cycles = Vec::new();
    for (bi, bond) in bonds.iter().enumerate() {
        if tree_bond[bi] {
            continue;
        }
        let (mut u, mut v) = (bond.begin, bond.end);
        let mut left = vec![u];
        let mut right = vec![v];
        while u != v {
            if depth[u] >= depth[v] {
                u = parent[u];
                left.push(u);
            } else {
                v = parent[v];
                right.push(v);
            }
        }
        // both sides end at the common ancestor
        right.pop();
        right.reverse();
        left.extend(right);
        cycles.push(left);
    }
    cycles
}

fn edge_vector(cycle: &[usize], adjacency: &[Vec<(usize, usize)>], n_bonds: usize) -> Vec<u64> {
    let mut v = vec![0u64; n_bonds.div_ceil(64)];
    for (k, &a) in cycle.iter().enumerate() {
        let b = cycle[(k + 1) % cycle.len()];
        if let Some(&(_, bi)) = adjacency[a].iter().find(|(n, _)| *n == b) {
            v[bi / 64] ^= 1 << (bi % 64);
        }
    }
    v
}

/// Incremental row-echelon basis over GF(2).
#[derive(Default)]
struct Gf2Basis {
    rows: Vec<(usize, Vec<u64>)>,
}

impl Gf2Basis {
    fn leading_bit(v: &[u64]) -> Option<usize> {
        v.iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    /// Adds the vector if it is independent of the rows so far.
    fn insert(&mut self, mut v: Vec<u64>) -> bool {
        for (pivot, row) in &self.rows {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        match Self::leading_bit(&v) {
            None => false,
            Some(pivot) => {
                // keep rows reduced against the new pivot
                for (_, row) in self.rows.iter_mut() {
                    if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                        for (x, y) in row.iter_mut().zip(&v) {
                            *x ^= y;
                        }
                    }
                }
                self.rows.push((pivot, v));
                true
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::chem::parse_smiles;

    use super::*;

    fn basis_size(s: &str) -> usize {
        perceive_rings(&parse_smiles(s).unwrap()).len()
    }

    #[test]
    fn benzene_one_ring() {
        let rings = perceive_rings(&parse_smiles("c1ccccc1").unwrap());
        assert_eq!(rings.len(), 1);
        assert_eq!(rings[0].len(), 6);
    }

    #[test]
    fn acyclic_has_none() {
        assert_eq!(basis_size("CCO"), 0);
    }

    #[test]
    fn naphthalene_two_six_rings() {
        let mol = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let rings = perceive_rings(&mol);
        assert_eq!(mol.num_bonds() - mol.num_atoms() + 1, 2);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.len() == 6));
        assert_eq!(mol.atoms().iter().filter(|a| a.in_ring).count(), 10);
    }

    #[test]
    fn cubane_and_spiro() {
        // cubane: 12 bonds, 8 atoms -> 5 independent four-rings
        let mol = parse_smiles("C12C3C4C1C5C2C3C45").unwrap();
        let rings = perceive_rings(&mol);
        assert_eq!(rings.len(), 5);
        assert!(rings.iter().all(|r| r.len() == 4));
        assert_eq!(basis_size("C1CCC11CCCC1"), 2);
    }

    #[test]
    fn ring_flags_skip_linkers() {
        let mol = parse_smiles("c1ccccc1CCc1ccccc1").unwrap();
        assert!(!mol.atom(6).in_ring);
        assert!(!mol.atom(7).in_ring);
        assert_eq!(mol.bonds().iter().filter(|b| b.in_ring).count(), 12);
        assert_eq!(mol.smallest_ring_size(0), Some(6));
        assert_eq!(mol.smallest_ring_size(6), None);
    }
}
