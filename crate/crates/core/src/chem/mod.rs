//! Molecular graphs: SMILES parsing and tokenization, ring perception,
//! Bemis–Murcko scaffolds and canonical graph keys.

mod canon;
pub mod element;
mod rings;
mod scaffold;
mod smiles;
mod tokenize;

pub use canon::{canonical_smiles, scaffold_key, DEFAULT_CANON_ATOM_LIMIT};
pub use rings::perceive_rings;
pub use scaffold::murcko_scaffold;
pub use smiles::{parse_smiles, parse_smiles_with_limit, SmilesError, DEFAULT_MAX_SMILES_LEN};
pub use tokenize::{tokenize_smiles, TokenSequence, TokenizeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the bond-order sum used by the implicit-hydrogen model.
    /// Aromatic bonds count as 1; the shared pi electron is handled per atom.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub index: usize,
    /// Atomic number; 0 for the `*` wildcard atom.
    pub element: u8,
    pub aromatic: bool,
    pub formal_charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogens written inside a bracket atom (`[NH2]` has 2).
    pub explicit_h: u8,
    /// Hydrogens implied by the standard-valence model (organic subset only).
    pub implicit_h: u8,
    pub in_ring: bool,
    /// Written as a bracket atom in the source.
    pub bracket: bool,
    /// Chirality marker as written (`@`, `@@`, ...). Parsed but not used.
    pub chirality: Option<String>,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Atom {
            index: 0,
            element,
            aromatic: false,
            formal_charge: 0,
            isotope: None,
            explicit_h: 0,
            implicit_h: 0,
            in_ring: false,
            bracket: false,
            chirality: None,
        }
    }

    pub fn symbol(&self) -> &'static str {
        element::symbol(self.element)
    }

    pub fn is_hydrogen(&self) -> bool {
        self.element == element::HYDROGEN
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    pub in_ring: bool,
    /// `/` or `\` as written. Parsed but not used.
    pub stereo: Option<char>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// An attributed molecular graph.
#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    source: String,
    /// Per atom: (neighbor, bond index), in bond insertion order.
    adjacency: Vec<Vec<(usize, usize)>>,
    rings: Vec<Vec<usize>>,
}

impl Molecule {
    /// Builds a molecule, reindexes atoms, and runs ring perception.
    ///
    /// Bonds must reference valid, distinct atoms with no duplicate pairs;
    /// callers inside this crate guarantee that.
    pub(crate) fn from_parts(mut atoms: Vec<Atom>, mut bonds: Vec<Bond>, source: String) -> Self {
        for (i, atom) in atoms.iter_mut().enumerate() {
            atom.index = i;
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, bond) in bonds.iter().enumerate() {
            debug_assert!(bond.begin != bond.end);
            adjacency[bond.begin].push((bond.end, bi));
            adjacency[bond.end].push((bond.begin, bi));
        }
        let rings = rings::cycle_basis(atoms.len(), &bonds, &adjacency);
        let mut ring_bonds = vec![false; bonds.len()];
        for ring in &rings {
            for (k, &a) in ring.iter().enumerate() {
                let b = ring[(k + 1) % ring.len()];
                if let Some(&(_, bi)) = adjacency[a].iter().find(|(n, _)| *n == b) {
                    ring_bonds[bi] = true;
                }
            }
        }
        for atom in atoms.iter_mut() {
            atom.in_ring = false;
        }
        for (bi, bond) in bonds.iter_mut().enumerate() {
            bond.in_ring = ring_bonds[bi];
            if bond.in_ring {
                atoms[bond.begin].in_ring = true;
                atoms[bond.end].in_ring = true;
            }
        }
        Molecule {
            atoms,
            bonds,
            source,
            adjacency,
            rings,
        }
    }

    /// The zero-atom molecule, used as the scaffold of acyclic inputs.
    pub fn empty() -> Self {
        Molecule::from_parts(Vec::new(), Vec::new(), String::new())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Neighbor atoms with the connecting bond index.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Number of graph neighbors (SMARTS `D`).
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i]
            .iter()
            .filter(|(n, _)| !self.atoms[*n].is_hydrogen())
            .count()
    }

    /// Attached hydrogens: implicit, bracket-declared, and explicit H atoms.
    pub fn total_h(&self, i: usize) -> usize {
        let atom = &self.atoms[i];
        let h_neighbors = self.adjacency[i]
            .iter()
            .filter(|(n, _)| self.atoms[*n].is_hydrogen())
            .count();
        atom.explicit_h as usize + atom.implicit_h as usize + h_neighbors
    }

    /// Total connections including all hydrogens (SMARTS `X`).
    pub fn connectivity(&self, i: usize) -> usize {
        let atom = &self.atoms[i];
        self.degree(i) + atom.explicit_h as usize + atom.implicit_h as usize
    }

    /// Sum of bond valences at an atom (aromatic counted as 1).
    pub fn bond_order_sum(&self, i: usize) -> usize {
        self.adjacency[i]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence() as usize)
            .sum()
    }

    /// Ring basis computed at construction; see [`perceive_rings`].
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    /// Number of basis rings containing the atom (SMARTS `R<n>`).
    pub fn ring_membership(&self, i: usize) -> usize {
        self.rings.iter().filter(|r| r.contains(&i)).count()
    }

    /// Size of the smallest basis ring containing the atom (SMARTS `r<n>`).
    pub fn smallest_ring_size(&self, i: usize) -> Option<usize> {
        self.rings
            .iter()
            .filter(|r| r.contains(&i))
            .map(|r| r.len())
            .min()
    }

    /// Connected-component label per atom and the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.atoms.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.atoms.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(a) = stack.pop() {
                for &(n, _) in &self.adjacency[a] {
                    if label[n] == usize::MAX {
                        label[n] = count;
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    pub fn num_components(&self) -> usize {
        self.components().1
    }

    /// Structural equality: same atoms and bonds in the same order.
    /// Ignores the source text.
    pub fn same_graph(&self, other: &Molecule) -> bool {
        self.atoms == other.atoms && self.bonds == other.bonds
    }

    /// Returns a copy with atoms renumbered so that old atom `i` becomes
    /// `perm[i]`. Bond order in the list follows the new begin indices.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = self.atoms.clone();
        for (old, atom) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = atom.clone();
        }
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: perm[b.begin],
                end: perm[b.end],
                ..b.clone()
            })
            .collect();
        bonds.sort_by_key(|b| (b.begin.min(b.end), b.begin.max(b.end)));
        Molecule::from_parts(atoms, bonds, self.source.clone())
    }

    /// Disjoint union of two molecules (a `.`-joined SMILES).
    pub fn disjoint_union(&self, other: &Molecule) -> Molecule {
        let offset = self.atoms.len();
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let mut bonds = self.bonds.clone();
        bonds.extend(other.bonds.iter().map(|b| Bond {
            begin: b.begin + offset,
            end: b.end + offset,
            ..b.clone()
        }));
        let source = format!("{}.{}", self.source, other.source);
        Molecule::from_parts(atoms, bonds, source)
    }
}

/// Implicit hydrogens for an organic-subset atom, or `None` when the
/// bond-order sum exceeds every standard valence.
///
/// Picks the smallest standard valence not below the bond-order sum.
/// Aromatic atoms give up one more hydrogen to the pi system when any
/// remain.
pub(crate) fn implicit_hydrogens(element: u8, aromatic: bool, bond_sum: usize) -> Option<u8> {
    let valences = element::default_valences(element);
    if valences.is_empty() {
        return Some(0);
    }
    let v = valences.iter().find(|&&v| v as usize >= bond_sum)?;
    let mut h = *v as usize - bond_sum;
    if aromatic && h > 0 {
        h -= 1;
    }
    Some(h as u8)
}
