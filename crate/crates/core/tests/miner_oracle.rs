mod common;

use common::{brute_force_mine, synthetic_corpus};
use fgr::chem::tokenize_smiles;
use fgr::vocab::{mine_mfg, mine_mfg_traced, MfgVocabulary};
use proptest::prelude::*;

fn check_against_oracle(corpus: &[fgr::chem::TokenSequence], eta: u64, mvs: usize) {
    let (vocab, trace) = mine_mfg_traced(corpus, eta, mvs).unwrap();
    let (oracle_vocab, oracle_trace) = brute_force_mine(corpus, eta, mvs);
    let trace: Vec<_> = trace
        .into_iter()
        .map(|m| (m.left, m.right, m.frequency))
        .collect();
    assert_eq!(trace, oracle_trace, "eta={eta}");
    let tokens: Vec<Vec<String>> = vocab.entries().iter().map(|e| e.tokens.clone()).collect();
    assert_eq!(tokens, oracle_vocab, "eta={eta}");
}

#[test]
fn merge_sequence_matches_recount_oracle() {
    let corpus = synthetic_corpus(1, 1000);
    for eta in [2, 5, 50] {
        check_against_oracle(&corpus, eta, 30000);
    }
}

#[test]
fn merge_sequence_matches_under_size_cap() {
    let corpus = synthetic_corpus(2, 300);
    check_against_oracle(&corpus, 2, 60);
}

#[test]
fn invariants_on_synthetic_corpus() {
    let corpus = synthetic_corpus(3, 400);
    for (eta, mvs) in [(2, 30000), (3, 80), (10, 30000)] {
        let v = mine_mfg(&corpus, eta, mvs).unwrap();
        assert!(v.merged().iter().all(|e| e.frequency >= eta));
        assert!(v.merged().len() <= mvs.saturating_sub(v.initial().len()));
        assert!(v.initial().iter().all(|e| e.tokens.len() == 1));
        assert!(v.merged().iter().all(|e| e.tokens.len() >= 2));
        let again = mine_mfg(&corpus, eta, mvs).unwrap();
        assert_eq!(v.to_text(), again.to_text());
        assert_eq!(MfgVocabulary::from_text(&v.to_text()).unwrap(), v);
    }
    let v = mine_mfg(&corpus, u64::MAX, 30000).unwrap();
    assert!(v.merged().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_corpora_match_oracle(seed in any::<u64>(), n in 1usize..40, eta in 1u64..6, mvs in 1usize..200) {
        let corpus = synthetic_corpus(seed, n);
        let (vocab, trace) = mine_mfg_traced(&corpus, eta, mvs).unwrap();
        let (ov, ot) = brute_force_mine(&corpus, eta, mvs);
        let trace: Vec<_> = trace.into_iter().map(|m| (m.left, m.right, m.frequency)).collect();
        prop_assert_eq!(trace, ot);
        let tokens: Vec<Vec<String>> = vocab.entries().iter().map(|e| e.tokens.clone()).collect();
        prop_assert_eq!(tokens, ov);
    }
}

#[test]
fn duplicate_runs_collapse_to_one_entry() {
    // C C O then C CO style orders can reach the same token run twice
    let corpus: Vec<_> = ["CCOCO", "CCOCO", "COCCO"]
        .iter()
        .map(|s| tokenize_smiles(s).unwrap())
        .collect();
    let v = mine_mfg(&corpus, 1, 1000).unwrap();
    let mut texts: Vec<Vec<String>> = v.entries().iter().map(|e| e.tokens.clone()).collect();
    let n = texts.len();
    texts.sort();
    texts.dedup();
    assert_eq!(texts.len(), n);
}
