use super::QueryPattern;
use crate::chem::Molecule;

/// True when at least one injective embedding of the query exists.
pub fn match_exists(q: &QueryPattern, mol: &Molecule) -> bool {
    !find_embeddings(q, mol, 1).is_empty()
}

/// Up to `limit` embeddings, each a map from query atom index to molecule
/// atom index, in ascending lexicographic order of the mapped tuples.
pub fn find_embeddings(q: &QueryPattern, mol: &Molecule, limit: usize) -> Vec<Vec<usize>> {
    let mut found = Vec::new();
    let n = q.num_atoms();
    if limit == 0 || n == 0 || n > mol.num_atoms() {
        return found;
    }
    let mut state = State {
        q,
        mol,
        anchors: anchors(q),
        mapping: Vec::with_capacity(n),
        used: vec![false; mol.num_atoms()],
        sorted_neighbors: (0..mol.num_atoms())
            .map(|i| {
                let mut nb: Vec<usize> = mol.neighbors(i).iter().map(|&(j, _)| j).collect();
                nb.sort_unstable();
                nb
            })
            .collect(),
        limit,
    };
    state.extend(&mut found);
    found
}

/// For each query atom after the first, its lowest-indexed earlier neighbor.
fn anchors(q: &QueryPattern) -> Vec<Option<usize>> {
    (0..q.num_atoms())
        .map(|i| {
            q.neighbors(i)
                .iter()
                .map(|&(j, _)| j)
                .filter(|&j| j < i)
                .min()
        })
        .collect()
}

struct State<'a> {
    q: &'a QueryPattern,
    mol: &'a Molecule,
    anchors: Vec<Option<usize>>,
    mapping: Vec<usize>,
    used: Vec<bool>,
    sorted_neighbors: Vec<Vec<usize>>,
    limit: usize,
}

impl State<'_> {
    fn extend(&mut self, found: &mut Vec<Vec<usize>>) {
        let qi = self.mapping.len();
        if qi == self.q.num_atoms() {
            found.push(self.mapping.clone());
            return;
        }
        let candidates: Vec<usize> = match self.anchors[qi] {
            Some(anchor) => self.sorted_neighbors[self.mapping[anchor]].clone(),
            None => (0..self.mol.num_atoms()).collect(),
        };
        for m in candidates {
            if self.feasible(qi, m) {
                self.mapping.push(m);
                self.used[m] = true;
                self.extend(found);
                self.used[m] = false;
                self.mapping.pop();
                if found.len() >= self.limit {
                    return;
                }
            }
        }
    }

    fn feasible(&self, qi: usize, m: usize) -> bool {
        if self.used[m] || self.mol.degree(m) < self.q.neighbors(qi).len() {
            return false;
        }
        if !self.q.atom_matches(qi, self.mol, m) {
            return false;
        }
        self.q
            .neighbors(qi)
            .iter()
            .filter(|&&(qj, _)| qj < qi)
            .all(|&(qj, qb)| self.q.bond_matches(qb, self.mol, self.mapping[qj], m))
    }
}
