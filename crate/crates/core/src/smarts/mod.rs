//! SMARTS subset: atom and bond predicates, query graphs, and a
//! backtracking substructure matcher.

mod matcher;
mod parse;

pub use matcher::{find_embeddings, match_exists};
pub use parse::{parse_smarts, SmartsError};

use crate::chem::{BondOrder, Molecule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomPrimitive {
    /// `*`
    Wildcard,
    /// Element symbol; `aromatic` follows the letter case.
    Element {
        number: u8,
        aromatic: bool,
    },
    /// `#n`
    AtomicNumber(u8),
    /// `a`
    Aromatic,
    /// `A`
    Aliphatic,
    /// `D<n>`: explicit connections.
    Degree(u8),
    /// `H<n>`: implicit plus explicit hydrogens.
    TotalH(u8),
    /// `X<n>`: connections including all hydrogens.
    Connectivity(u8),
    Charge(i8),
    /// `R` without a count, or `r` without a size.
    InRing,
    /// `R<n>`: number of basis rings containing the atom; `R0` is acyclic.
    RingCount(u8),
    /// `r<n>`: size of the smallest basis ring containing the atom.
    SmallestRing(u8),
}

impl AtomPrimitive {
    pub fn matches(&self, mol: &Molecule, i: usize) -> bool {
        let atom = mol.atom(i);
        match *self {
            AtomPrimitive::Wildcard => true,
            AtomPrimitive::Element { number, aromatic } => {
                atom.element == number && atom.aromatic == aromatic
            }
            AtomPrimitive::AtomicNumber(n) => atom.element == n,
            AtomPrimitive::Aromatic => atom.aromatic,
            AtomPrimitive::Aliphatic => !atom.aromatic,
            AtomPrimitive::Degree(n) => mol.degree(i) == n as usize,
            AtomPrimitive::TotalH(n) => mol.total_h(i) == n as usize,
            AtomPrimitive::Connectivity(n) => mol.connectivity(i) == n as usize,
            AtomPrimitive::Charge(c) => atom.formal_charge == c,
            AtomPrimitive::InRing => atom.in_ring,
            AtomPrimitive::RingCount(0) => !atom.in_ring,
            AtomPrimitive::RingCount(n) => mol.ring_membership(i) == n as usize,
            AtomPrimitive::SmallestRing(0) => !atom.in_ring,
            AtomPrimitive::SmallestRing(n) => mol.smallest_ring_size(i) == Some(n as usize),
        }
    }
}

/// Predicate tree. `And` covers both `&` and `;`; precedence only matters
/// while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomExpr {
    Prim(AtomPrimitive),
    Not(Box<AtomExpr>),
    And(Vec<AtomExpr>),
    Or(Vec<AtomExpr>),
}

impl AtomExpr {
    pub fn matches(&self, mol: &Molecule, i: usize) -> bool {
        match self {
            AtomExpr::Prim(p) => p.matches(mol, i),
            AtomExpr::Not(e) => !e.matches(mol, i),
            AtomExpr::And(es) => es.iter().all(|e| e.matches(mol, i)),
            AtomExpr::Or(es) => es.iter().any(|e| e.matches(mol, i)),
        }
    }

    /// True when every atom satisfying the expression is aromatic.
    /// Conservative: negations never count.
    pub fn requires_aromatic(&self) -> bool {
        match self {
            AtomExpr::Prim(AtomPrimitive::Aromatic) => true,
            AtomExpr::Prim(AtomPrimitive::Element { aromatic, .. }) => *aromatic,
            AtomExpr::Prim(_) | AtomExpr::Not(_) => false,
            AtomExpr::And(es) => es.iter().any(AtomExpr::requires_aromatic),
            AtomExpr::Or(es) => !es.is_empty() && es.iter().all(AtomExpr::requires_aromatic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BondExpr {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `~`
    Any,
    /// `@`
    Ring,
    /// No bond symbol written. Matches single bonds, and also aromatic
    /// bonds when both query atoms require aromaticity.
    Unspecified {
        aromatic_pair: bool,
    },
    Not(Box<BondExpr>),
    And(Vec<BondExpr>),
    Or(Vec<BondExpr>),
}

impl BondExpr {
    pub fn matches(&self, order: BondOrder, in_ring: bool) -> bool {
        match self {
            BondExpr::Single => order == BondOrder::Single,
            BondExpr::Double => order == BondOrder::Double,
            BondExpr::Triple => order == BondOrder::Triple,
            BondExpr::Aromatic => order == BondOrder::Aromatic,
            BondExpr::Any => true,
            BondExpr::Ring => in_ring,
            BondExpr::Unspecified { aromatic_pair } => {
                order == BondOrder::Single || (*aromatic_pair && order == BondOrder::Aromatic)
            }
            BondExpr::Not(e) => !e.matches(order, in_ring),
            BondExpr::And(es) => es.iter().all(|e| e.matches(order, in_ring)),
            BondExpr::Or(es) => es.iter().any(|e| e.matches(order, in_ring)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBond {
    pub begin: usize,
    pub end: usize,
    pub expr: BondExpr,
}

/// Parsed query graph. Atoms are in written order, so every atom after the
/// first has a bonded predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPattern {
    atoms: Vec<AtomExpr>,
    bonds: Vec<QueryBond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    source: String,
}

impl QueryPattern {
    pub(crate) fn new(atoms: Vec<AtomExpr>, bonds: Vec<QueryBond>, source: String) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, b) in bonds.iter().enumerate() {
            adjacency[b.begin].push((b.end, bi));
            adjacency[b.end].push((b.begin, bi));
        }
        QueryPattern {
            atoms,
            bonds,
            adjacency,
            source,
        }
    }

    pub fn atoms(&self) -> &[AtomExpr] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[QueryBond] {
        &self.bonds
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether molecule atom `m` can stand in for query atom `q`, ignoring
    /// bonds. Exposed for brute-force checkers.
    pub fn atom_matches(&self, q: usize, mol: &Molecule, m: usize) -> bool {
        self.atoms[q].matches(mol, m)
    }

    /// Whether the molecule bond between `ma` and `mb` satisfies query bond
    /// `qb`; false when the atoms are not bonded.
    pub fn bond_matches(&self, qb: usize, mol: &Molecule, ma: usize, mb: usize) -> bool {
        mol.bond_between(ma, mb)
            .is_some_and(|b| self.bonds[qb].expr.matches(b.order, b.in_ring))
    }
}
