mod common;

use common::{corpus500, random_molecule, random_smiles, shuffled};
use fgr::chem::{
    canonical_smiles, murcko_scaffold, parse_smiles, perceive_rings, scaffold_key, tokenize_smiles,
    Molecule,
};
use proptest::prelude::*;

fn atom_multiset(m: &Molecule) -> Vec<(u8, bool, i8, usize)> {
    let mut v: Vec<_> = (0..m.num_atoms())
        .map(|i| {
            let a = m.atom(i);
            (a.element, a.aromatic, a.formal_charge, m.total_h(i))
        })
        .collect();
    v.sort_unstable();
    v
}

fn bond_multiset(m: &Molecule) -> Vec<(u8, u8, String)> {
    let mut v: Vec<_> = m
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (m.atom(b.begin).element, m.atom(b.end).element);
            (x.min(y), x.max(y), format!("{:?}", b.order))
        })
        .collect();
    v.sort_unstable();
    v
}

#[test]
fn corpus_round_trips() {
    let corpus = corpus500();
    assert_eq!(corpus.len(), 500);
    for s in &corpus {
        assert_eq!(tokenize_smiles(s).unwrap().to_string(), *s);
        let m = parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        let emitted = canonical_smiles(&m);
        let back = parse_smiles(&emitted).unwrap_or_else(|e| panic!("{s} -> {emitted}: {e}"));
        assert_eq!(scaffold_key(&back), scaffold_key(&m), "{s}");
        assert_eq!(atom_multiset(&back), atom_multiset(&m), "{s}");
        assert_eq!(bond_multiset(&back), bond_multiset(&m), "{s}");
    }
}

#[test]
fn toluene_and_benzene_share_scaffold_key() {
    let t = murcko_scaffold(&parse_smiles("Cc1ccccc1").unwrap());
    let b = murcko_scaffold(&parse_smiles("c1ccccc1").unwrap());
    assert_eq!(scaffold_key(&t), scaffold_key(&b));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tokenize_concat_identity(seed in any::<u64>()) {
        let s = random_smiles(seed, 16);
        prop_assert_eq!(tokenize_smiles(&s).unwrap().to_string(), s);
    }

    #[test]
    fn emission_reparses_isomorphic(seed in any::<u64>()) {
        let m = random_molecule(seed, 16);
        let back = parse_smiles(&canonical_smiles(&m)).unwrap();
        prop_assert_eq!(scaffold_key(&back), scaffold_key(&m));
        prop_assert_eq!(atom_multiset(&back), atom_multiset(&m));
        prop_assert_eq!(bond_multiset(&back), bond_multiset(&m));
    }

    #[test]
    fn ring_basis_size(seed in any::<u64>()) {
        let m = random_molecule(seed, 20);
        let expected = m.num_bonds() + m.num_components() - m.num_atoms();
        prop_assert_eq!(perceive_rings(&m).len(), expected);
        for ring in perceive_rings(&m) {
            prop_assert!(ring.iter().all(|&a| m.atom(a).in_ring));
        }
    }

    #[test]
    fn scaffold_idempotent(seed in any::<u64>()) {
        let once = murcko_scaffold(&random_molecule(seed, 20));
        prop_assert!(murcko_scaffold(&once).same_graph(&once));
    }

    #[test]
    fn key_invariant_under_relabeling(seed in any::<u64>(), pseed in any::<u64>()) {
        let m = random_molecule(seed, 12);
        let p = m.permuted(&shuffled(m.num_atoms(), pseed));
        prop_assert_eq!(scaffold_key(&p), scaffold_key(&m));
        let sm = murcko_scaffold(&m);
        let sp = murcko_scaffold(&p);
        prop_assert_eq!(scaffold_key(&sp), scaffold_key(&sm));
    }
}
