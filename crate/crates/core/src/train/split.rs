use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::chem::{murcko_scaffold, scaffold_key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Random,
    Scaffold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub labels: Vec<Split>,
    pub method: SplitMethod,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl SplitAssignment {
    pub fn indices(&self, s: Split) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == s)
            .collect()
    }

    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for l in &self.labels {
            c[*l as usize] += 1;
        }
        c
    }
}

/// Canonical Murcko-scaffold key per record; acyclic molecules share "".
pub fn scaffold_keys(ds: &Dataset) -> Vec<String> {
    ds.records
        .par_iter()
        .map(|r| scaffold_key(&murcko_scaffold(&r.mol)))
        .collect()
}

/// Record indices grouped by key, largest group first, ties by key.
pub fn scaffold_groups(keys: &[String]) -> Vec<(String, Vec<usize>)> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    let mut out: Vec<(String, Vec<usize>)> = groups
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    // stable sort keeps key order among equal sizes
    out.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
    out
}

pub fn scaffold_split(ds: &Dataset, ratios: [f64; 3], seed: u64) -> SplitAssignment {
    scaffold_split_keys(&scaffold_keys(ds), ratios, seed)
}

/// Whole scaffold groups go, largest first, to the first of train, valid,
/// test whose current size is still below `ratio · n`; groups that find
/// every split at capacity go to test.
pub fn scaffold_split_keys(keys: &[String], ratios: [f64; 3], seed: u64) -> SplitAssignment {
    let n = keys.len() as f64;
    let caps = ratios.map(|r| r * n - 1e-9);
    let mut counts = [0usize; 3];
    let mut labels = vec![Split::Train; keys.len()];
    for (_, members) in scaffold_groups(keys) {
        let s = Split::ALL
            .into_iter()
            .find(|&s| (counts[s as usize] as f64) < caps[s as usize])
            .unwrap_or(Split::Test);
        counts[s as usize] += members.len();
        for i in members {
            labels[i] = s;
        }
    }
    for s in [Split::Valid, Split::Test] {
        if ratios[s as usize] > 0.0 && counts[s as usize] == 0 {
            log::warn!("scaffold split left {} empty", s.as_str());
        }
    }
    SplitAssignment {
        labels,
        method: SplitMethod::Scaffold,
        seed,
        ratios,
    }
}

/// Seeded shuffle, then contiguous slices. Valid and test sizes are
/// floored; the remainder goes to train.
pub fn random_split(n: usize, ratios: [f64; 3], seed: u64) -> SplitAssignment {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_valid = (ratios[1] * n as f64 + 1e-9).floor() as usize;
    let n_test = (ratios[2] * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_valid - n_test;
    let mut labels = vec![Split::Train; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
    }
    SplitAssignment {
        labels,
        method: SplitMethod::Random,
        seed,
        ratios,
    }
}

/// Scaffold-grouped fold labels: each group, largest first, joins the
/// currently smallest fold (lowest index on ties).
pub fn scaffold_folds(keys: &[String], folds: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; folds];
    let mut fold = vec![0; keys.len()];
    for (_, members) in scaffold_groups(keys) {
        let f = (0..folds).min_by_key(|&f| (sizes[f], f)).expect("folds > 0");
        sizes[f] += members.len();
        for i in members {
            fold[i] = f;
        }
    }
    fold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn singletons_fill_greedily() {
        let k: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
        let s = scaffold_split_keys(&k, [0.8, 0.1, 0.1], 0);
        assert_eq!(s.counts(), [8, 1, 1]);
    }

    #[test]
    fn one_scaffold_goes_to_train() {
        let s = scaffold_split_keys(&keys(&["a"; 7]), [0.8, 0.1, 0.1], 0);
        assert_eq!(s.counts(), [7, 0, 0]);
    }

    #[test]
    fn groups_stay_whole() {
        let k = keys(&["a", "b", "a", "c", "b", "a", "d", "e", "e", "f"]);
        let s = scaffold_split_keys(&k, [0.6, 0.2, 0.2], 0);
        for i in 0..k.len() {
            for j in 0..k.len() {
                if k[i] == k[j] {
                    assert_eq!(s.labels[i], s.labels[j]);
                }
            }
        }
        // a(3) b(2) e(2) → train reaches 7 ≥ 6; c → valid; d, f → valid then test
        assert_eq!(s.counts(), [7, 2, 1]);
    }

    #[test]
    fn random_split_is_seeded() {
        let a = random_split(100, [0.8, 0.1, 0.1], 1);
        assert_eq!(a, random_split(100, [0.8, 0.1, 0.1], 1));
        assert_ne!(a.labels, random_split(100, [0.8, 0.1, 0.1], 2).labels);
        assert_eq!(a.counts(), [80, 10, 10]);
        assert_eq!(random_split(7, [0.8, 0.1, 0.1], 0).counts(), [7, 0, 0]);
        assert_eq!(random_split(25, [0.5, 0.3, 0.2], 0).counts(), [13, 7, 5]);
    }

    #[test]
    fn folds_partition() {
        let k = keys(&["a", "a", "a", "b", "b", "c", "d", "e", "f", "g"]);
        let f = scaffold_folds(&k, 3);
        let mut sizes = [0; 3];
        for &x in &f {
            sizes[x] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert_eq!(f[0], f[1]);
        assert_eq!(f[3], f[4]);
        assert!(sizes.iter().all(|&s| s >= 3));
    }
}
