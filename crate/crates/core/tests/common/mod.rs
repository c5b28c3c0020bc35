#![allow(dead_code)]

use fgr::chem::{parse_smiles, Molecule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALIPHATIC: [(&str, u32); 7] = [
    ("C", 12),
    ("N", 3),
    ("O", 3),
    ("S", 1),
    ("F", 1),
    ("Cl", 1),
    ("Br", 1),
];
const RINGS: [&str; 6] = [
    "c9ccccc9",
    "c9ccncc9",
    "c9ccoc9",
    "c9cc[nH]c9",
    "c9ccsc9",
    "C9CC9",
];

fn pick_atom(rng: &mut ChaCha8Rng) -> &'static str {
    let total: u32 = ALIPHATIC.iter().map(|(_, w)| w).sum();
    let mut r = rng.random_range(0..total);
    for (s, w) in ALIPHATIC {
        if r < w {
            return s;
        }
        r -= w;
    }
    unreachable!()
}

/// Grammar-driven random SMILES: chains, branches, ring closures and
/// embedded aromatic rings. Candidates the parser rejects (valence, ring
/// clashes) are discarded and regenerated.
pub fn random_smiles(seed: u64, max_atoms: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let s = candidate(&mut rng, max_atoms);
        if let Ok(m) = parse_smiles(&s) {
            if m.num_atoms() <= max_atoms && m.num_atoms() > 0 {
                return s;
            }
        }
    }
}

pub fn random_molecule(seed: u64, max_atoms: usize) -> Molecule {
    parse_smiles(&random_smiles(seed, max_atoms)).unwrap()
}

fn candidate(rng: &mut ChaCha8Rng, max_atoms: usize) -> String {
    let target = rng.random_range((max_atoms / 2).max(1)..=max_atoms);
    let mut s = String::new();
    let mut atoms = 0;
    let mut depth = 0usize;
    let mut open: Vec<u8> = Vec::new();
    let mut since_open = 0;
    let mut fresh_branch = false;
    while atoms < target {
        if atoms > 0 && !fresh_branch {
            match rng.random_range(0..20) {
                0..=1 => s.push('='),
                2 => s.push('#'),
                _ => {}
            }
        }
        if atoms + 6 <= target && rng.random_bool(0.12) {
            let ring = RINGS[rng.random_range(0..RINGS.len())];
            s.push_str(ring);
            atoms += if ring.starts_with('C') { 3 } else { 5 };
        } else {
            s.push_str(pick_atom(rng));
            atoms += 1;
        }
        fresh_branch = false;
        since_open += 1;
        if open.len() < 2 && rng.random_bool(0.15) {
            let label = (1..9).find(|l| !open.contains(l)).unwrap();
            open.push(label);
            s.push(char::from(b'0' + label));
            since_open = 0;
        } else if !open.is_empty() && since_open >= 2 && rng.random_bool(0.3) {
            let label = open.pop().unwrap();
            s.push(char::from(b'0' + label));
        }
        if rng.random_bool(0.15) {
            s.push('(');
            depth += 1;
            fresh_branch = true;
        } else if depth > 0 && rng.random_bool(0.3) {
            s.push(')');
            depth -= 1;
        }
        if atoms < target && depth == 0 && open.is_empty() && rng.random_bool(0.03) {
            s.push('.');
            fresh_branch = true;
        }
    }
    if s.ends_with('(') {
        s.pop();
        depth -= 1;
    }
    for label in open {
        // close with a single extra atom so closures never bond an atom to itself
        s.push('C');
        s.push(char::from(b'0' + label));
    }
    for _ in 0..depth {
        s.push(')');
    }
    if s.ends_with('.') {
        s.pop();
    }
    s
}

/// Random permutation of 0..n.
pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

pub fn corpus500() -> Vec<String> {
    let text = include_str!("../../data/corpus500.smi");
    text.lines().map(str::to_string).collect()
}

const QUERY_ATOMS: [&str; 24] = [
    "C", "c", "N", "n", "O", "*", "a", "A", "[#6]", "[OX2H]", "[CX4]", "[!#6]", "[C,N]", "[R]",
    "[R0]", "[D2]", "[H1]", "[c,n;R]", "[#7,#8]", "[X3]", "[r6]", "[CH2]", "[O;H0]", "[!C;!c]",
];
const QUERY_BONDS: [&str; 10] = ["", "", "", "=", "~", ":", "-", "@", "!@", "=,#"];

/// Random connected SMARTS with 1 to 4 atoms, drawn from the supported
/// primitive and bond forms; may contain one ring closure.
pub fn random_smarts(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = rng.random_range(1..=4);
    let mut s = String::new();
    let mut ring_open = false;
    let mut in_branch = false;
    for i in 0..n {
        if i > 0 {
            s.push_str(QUERY_BONDS[rng.random_range(0..QUERY_BONDS.len())]);
        }
        s.push_str(QUERY_ATOMS[rng.random_range(0..QUERY_ATOMS.len())]);
        if i == 0 && n >= 3 && rng.random_bool(0.3) {
            s.push('1');
            ring_open = true;
        }
        if i == 1 && n == 4 && !ring_open && rng.random_bool(0.4) {
            s.push('(');
            in_branch = true;
        } else if in_branch && i == 2 {
            s.push(')');
            in_branch = false;
        }
    }
    if ring_open {
        s.push('1');
    }
    s
}

/// Every injective assignment of query atoms to molecule atoms that
/// satisfies all atom and bond predicates, in lexicographic order.
pub fn brute_force_embeddings(q: &fgr::smarts::QueryPattern, mol: &Molecule) -> Vec<Vec<usize>> {
    fn rec(
        q: &fgr::smarts::QueryPattern,
        mol: &Molecule,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == q.num_atoms() {
            let ok = (0..q.num_atoms()).all(|i| q.atom_matches(i, mol, cur[i]))
                && q.bonds()
                    .iter()
                    .enumerate()
                    .all(|(bi, b)| q.bond_matches(bi, mol, cur[b.begin], cur[b.end]));
            if ok {
                out.push(cur.clone());
            }
            return;
        }
        for m in 0..mol.num_atoms() {
            if !cur.contains(&m) {
                cur.push(m);
                rec(q, mol, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(q, mol, &mut Vec::new(), &mut out);
    out
}

/// 1,000 random molecules as token sequences.
pub fn synthetic_corpus(seed: u64, n: usize) -> Vec<fgr::chem::TokenSequence> {
    (0..n as u64)
        .map(|i| fgr::chem::tokenize_smiles(&random_smiles(seed.wrapping_add(i), 20)).unwrap())
        .collect()
}

/// Reference miner: recounts every pair from scratch each round. Tokens
/// are their tokenizer-token runs joined by U+001F.
pub fn brute_force_mine(
    corpus: &[fgr::chem::TokenSequence],
    eta: u64,
    mvs: usize,
) -> (Vec<Vec<String>>, Vec<(Vec<String>, Vec<String>, u64)>) {
    use std::collections::{BTreeMap, BTreeSet};
    const SEP: &str = "\u{1f}";
    let split = |t: &str| t.split(SEP).map(str::to_string).collect::<Vec<_>>();
    let mut seqs: Vec<Vec<String>> = corpus.iter().map(|s| s.tokens().to_vec()).collect();
    let alphabet: BTreeSet<String> = seqs.iter().flatten().cloned().collect();
    let mut vocab: Vec<String> = alphabet.into_iter().collect();
    let mut trace = Vec::new();
    while vocab.len() < mvs {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for s in &seqs {
            for w in s.windows(2) {
                *counts.entry((w[0].clone(), w[1].clone())).or_default() += 1;
            }
        }
        let key = |p: &(String, String)| {
            (p.0.replace(SEP, ""), p.1.replace(SEP, ""), split(&p.0), split(&p.1))
        };
        let Some((best, &count)) = counts
            .iter()
            .min_by(|(pa, ca), (pb, cb)| cb.cmp(ca).then_with(|| key(pa).cmp(&key(pb))))
        else {
            break;
        };
        if count < eta {
            break;
        }
        let (a, b) = best.clone();
        let merged = format!("{a}{SEP}{b}");
        trace.push((split(&a), split(&b), count));
        if !vocab.contains(&merged) {
            vocab.push(merged.clone());
        }
        for s in seqs.iter_mut() {
            let mut out = Vec::with_capacity(s.len());
            let mut i = 0;
            while i < s.len() {
                if i + 1 < s.len() && s[i] == a && s[i + 1] == b {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(s[i].clone());
                    i += 1;
                }
            }
            *s = out;
        }
    }
    (vocab.iter().map(|t| split(t)).collect(), trace)
}

/// A small random network and batch for gradient checks. The seed picks
/// the mode: bit 0 tied, bit 1 regression, bit 2 α = 0.1, bit 3 β = 0.1.
pub fn random_net(seed: u64) -> (fgr::nn::Model, fgr::nn::Batch) {
    use fgr::nn::{Batch, Model, ModelConfig, TaskKind};
    use ndarray::Array2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (p, l, k, n) = (
        rng.random_range(3..=20),
        rng.random_range(2..=8),
        rng.random_range(1..=3),
        rng.random_range(2..=8),
    );
    let use_descriptors = rng.random_bool(0.5);
    let d = if use_descriptors { rng.random_range(1..=5) } else { 0 };
    let task = if seed & 2 == 0 {
        TaskKind::Classification
    } else {
        TaskKind::Regression
    };
    let cfg = ModelConfig {
        latent: l,
        tied: seed & 1 == 1,
        alpha: if seed & 4 == 0 { 0.0 } else { 0.1 },
        beta: if seed & 8 == 0 { 0.0 } else { 0.1 },
        task,
        tasks: k,
        use_descriptors,
        ..ModelConfig::default()
    };
    let mut m = Model::new(cfg, p, d, seed);
    for b in [&mut m.params.b_e, &mut m.params.b_d, &mut m.params.b_f] {
        b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let x = Array2::from_shape_fn((n, p), |_| f64::from(rng.random_bool(0.3) as u8));
    let dm = use_descriptors.then(|| Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0)));
    let y = Array2::from_shape_fn((n, k), |_| match task {
        TaskKind::Classification => f64::from(rng.random_bool(0.5) as u8),
        TaskKind::Regression => rng.random_range(-3.0..3.0),
    });
    let mask = Array2::from_shape_fn((n, k), |_| f64::from(rng.random_bool(0.8) as u8));
    (m, Batch::new(x, dm, y, mask).unwrap())
}

/// Largest relative error between analytic gradients and central finite
/// differences with step `h`. Relative error is `|a − f| / max(|a|, |f|, 1e-4)`;
/// the floor keeps parameters with near-zero gradient from dividing by zero.
pub fn max_gradient_error(model: &fgr::nn::Model, batch: &fgr::nn::Batch, h: f64) -> f64 {
    use fgr::nn::{compute_gradients, total_loss};
    let (_, g) = compute_gradients(model, batch).unwrap();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (bi, block) in g.blocks().iter().enumerate() {
        for (k, &a) in block.iter().enumerate() {
            let orig = probe.params.blocks()[bi][k];
            probe.params.blocks_mut()[bi][k] = orig + h;
            let up = total_loss(&probe, batch).unwrap().total;
            probe.params.blocks_mut()[bi][k] = orig - h;
            let down = total_loss(&probe, batch).unwrap().total;
            probe.params.blocks_mut()[bi][k] = orig;
            let f = (up - down) / (2.0 * h);
            worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1e-4));
        }
    }
    worst
}
