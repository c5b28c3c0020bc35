use super::{Atom, Bond, Molecule};

/// Bemis–Murcko scaffold: ring systems plus the linkers joining them.
///
/// Non-ring atoms of degree ≤ 1 are stripped repeatedly. A surviving atom
/// takes over the hydrogens its removed substituents occupied, so the
/// scaffold is a valid molecule in its own right (toluene gives benzene
/// with six aromatic CH). Molecules without rings give [`Molecule::empty`].
pub fn murcko_scaffold(mol: &Molecule) -> Molecule {
    if mol.rings().is_empty() {
        return Molecule::empty();
    }
    let n = mol.num_atoms();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| !mol.atom(i).in_ring && degree[i] <= 1)
        .collect();
    while let Some(a) = stack.pop() {
        if !alive[a] {
            continue;
        }
        alive[a] = false;
        for &(nb, _) in mol.neighbors(a) {
            if alive[nb] {
                degree[nb] -= 1;
                if !mol.atom(nb).in_ring && degree[nb] <= 1 {
                    stack.push(nb);
                }
            }
        }
    }

    let mut new_index = vec![usize::MAX; n];
    let mut atoms: Vec<Atom> = Vec::new();
    for i in (0..n).filter(|&i| alive[i]) {
        new_index[i] = atoms.len();
        let mut atom = mol.atom(i).clone();
        let lost: usize = mol
            .neighbors(i)
            .iter()
            .filter(|(nb, _)| !alive[*nb])
            .map(|&(_, bi)| mol.bonds()[bi].order.valence() as usize)
            .sum();
        if atom.bracket {
            atom.explicit_h = atom.explicit_h.saturating_add(lost as u8);
        } else {
            atom.implicit_h = atom.implicit_h.saturating_add(lost as u8);
        }
        atoms.push(atom);
    }
    let bonds: Vec<Bond> = mol
        .bonds()
        .iter()
        .filter(|b| alive[b.begin] && alive[b.end])
        .map(|b| Bond {
            begin: new_index[b.begin],
            end: new_index[b.end],
            ..b.clone()
        })
        .collect();
    Molecule::from_parts(atoms, bonds, String::new())
}
