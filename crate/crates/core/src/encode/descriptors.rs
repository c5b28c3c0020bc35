use crate::chem::element::{is_halogen, monoisotopic_mass, CARBON, HYDROGEN, NITROGEN, OXYGEN};
use crate::chem::{BondOrder, Molecule};

pub const DEFAULT_DESCRIPTOR_LEN: usize = 211;

/// Names of the populated slots, in slot order.
pub const IMPLEMENTED_DESCRIPTORS: [&str; 14] = [
    "mol_weight",
    "heavy_atoms",
    "heteroatoms",
    "halogens",
    "rings",
    "aromatic_rings",
    "hbond_donors",
    "hbond_acceptors",
    "rotatable_bonds",
    "formal_charge",
    "electrons",
    "fraction_csp3",
    "longest_chain",
    "components",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

/// Slot labels for a vector of length `len`; slots past the implemented
/// subset are named `reserved_<i>`.
pub fn descriptor_names(len: usize) -> Vec<String> {
    (0..len)
        .map(|i| match IMPLEMENTED_DESCRIPTORS.get(i) {
            Some(n) => n.to_string(),
            None => format!("reserved_{i}"),
        })
        .collect()
}

pub fn compute_descriptors(mol: &Molecule) -> DescriptorVector {
    compute_descriptors_padded(mol, DEFAULT_DESCRIPTOR_LEN)
}

/// Raw (unnormalized) descriptors, truncated or zero-padded to `len`.
pub fn compute_descriptors_padded(mol: &Molecule, len: usize) -> DescriptorVector {
    let mut values = raw(mol).to_vec();
    values.resize(len, 0.0);
    DescriptorVector {
        values,
        names: descriptor_names(len),
    }
}

fn raw(mol: &Molecule) -> [f64; 14] {
    let atoms = mol.atoms();
    let h_mass = monoisotopic_mass(HYDROGEN);
    let mut weight = 0.0;
    let mut electrons = 0i64;
    let mut charge = 0i64;
    let (mut heavy, mut hetero, mut halogens) = (0, 0, 0);
    let (mut donors, mut acceptors) = (0, 0);
    let (mut carbons, mut csp3) = (0, 0);
    for (i, a) in atoms.iter().enumerate() {
        let attached = (a.explicit_h + a.implicit_h) as usize;
        weight += monoisotopic_mass(a.element) + attached as f64 * h_mass;
        electrons += a.element as i64 + attached as i64;
        charge += a.formal_charge as i64;
        if a.is_hydrogen() || a.element == 0 {
            continue;
        }
        heavy += 1;
        if a.element != CARBON {
            hetero += 1;
        }
        if is_halogen(a.element) {
            halogens += 1;
        }
        if a.element == NITROGEN || a.element == OXYGEN {
            acceptors += 1;
            if mol.total_h(i) > 0 {
                donors += 1;
            }
        }
        if a.element == CARBON {
            carbons += 1;
            let saturated = !a.aromatic
                && mol
                    .neighbors(i)
                    .iter()
                    .all(|&(_, b)| mol.bonds()[b].order == BondOrder::Single);
            if saturated {
                csp3 += 1;
            }
        }
    }
    let aromatic_rings = mol
        .rings()
        .iter()
        .filter(|r| r.iter().all(|&i| atoms[i].aromatic))
        .count();
    let rotatable = mol
        .bonds()
        .iter()
        .filter(|b| {
            b.order == BondOrder::Single
                && !b.in_ring
                && !atoms[b.begin].is_hydrogen()
                && !atoms[b.end].is_hydrogen()
                && mol.heavy_degree(b.begin) >= 2
                && mol.heavy_degree(b.end) >= 2
        })
        .count();
    let fraction_csp3 = if carbons == 0 {
        0.0
    } else {
        csp3 as f64 / carbons as f64
    };
    [
        weight,
        heavy as f64,
        hetero as f64,
        halogens as f64,
        mol.rings().len() as f64,
        aromatic_rings as f64,
        donors as f64,
        acceptors as f64,
        rotatable as f64,
        charge as f64,
        (electrons - charge) as f64,
        fraction_csp3,
        longest_chain(mol) as f64,
        mol.num_components() as f64,
    ]
}

/// Atoms on the longest path through acyclic, non-aromatic carbons. Those
/// atoms induce a forest, so two sweeps per tree give its diameter.
fn longest_chain(mol: &Molecule) -> usize {
    let keep: Vec<bool> = mol
        .atoms()
        .iter()
        .map(|a| a.element == CARBON && !a.aromatic && !a.in_ring)
        .collect();
    let mut seen = vec![false; mol.num_atoms()];
    let mut best = 0;
    for start in 0..mol.num_atoms() {
        if !keep[start] || seen[start] {
            continue;
        }
        let (far, _) = farthest(mol, &keep, start, Some(&mut seen));
        let (_, dist) = farthest(mol, &keep, far, None);
        best = best.max(dist + 1);
    }
    best
}

fn farthest(
    mol: &Molecule,
    keep: &[bool],
    start: usize,
    mut mark: Option<&mut Vec<bool>>,
) -> (usize, usize) {
    let mut dist = vec![usize::MAX; mol.num_atoms()];
    dist[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut last = (start, 0);
    while let Some(a) = queue.pop_front() {
        if let Some(m) = mark.as_deref_mut() {
            m[a] = true;
        }
        if dist[a] > last.1 {
            last = (a, dist[a]);
        }
        for &(n, _) in mol.neighbors(a) {
            if keep[n] && dist[n] == usize::MAX {
                dist[n] = dist[a] + 1;
                queue.push_back(n);
            }
        }
    }
    last
}
