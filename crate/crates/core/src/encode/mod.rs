//! Multi-hot functional-group encodings and the 2D descriptor vector.

mod descriptors;
mod matrix;

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::chem::{Molecule, TokenSequence};
use crate::smarts::match_exists;
use crate::vocab::{FgVocabulary, MfgVocabulary};

pub use descriptors::{
    compute_descriptors, compute_descriptors_padded, descriptor_names, DescriptorVector,
    DEFAULT_DESCRIPTOR_LEN, IMPLEMENTED_DESCRIPTORS,
};
pub use matrix::{read_matrix, write_matrix, write_matrix_tsv, EncodedMatrix, MATRIX_MAGIC};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("non-finite value at position {0}")]
    NonFiniteInput(usize),
    #[error("matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Fg,
    Mfg,
    Fgr,
}

impl EncodingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingKind::Fg => "fg",
            EncodingKind::Mfg => "mfg",
            EncodingKind::Fgr => "fgr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fg" => Some(EncodingKind::Fg),
            "mfg" => Some(EncodingKind::Mfg),
            "fgr" => Some(EncodingKind::Fgr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiHotVector {
    pub bits: Vec<bool>,
    pub kind: EncodingKind,
}

impl MultiHotVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Bit `i` is set when FG entry `i` matches anywhere in the molecule.
pub fn encode_fg(mol: &Molecule, vocab: &FgVocabulary) -> MultiHotVector {
    MultiHotVector {
        bits: vocab
            .entries()
            .iter()
            .map(|e| match_exists(&e.pattern, mol))
            .collect(),
        kind: EncodingKind::Fg,
    }
}

/// Lookup table from token runs to MFG entry positions, so a sequence is
/// scanned once per window length rather than once per entry.
#[derive(Debug, Clone)]
pub struct MfgIndex {
    runs: HashMap<Vec<String>, Vec<usize>>,
    max_len: usize,
    len: usize,
}

impl MfgIndex {
    pub fn new(vocab: &MfgVocabulary) -> Self {
        let mut runs: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
        for (i, e) in vocab.entries().iter().enumerate() {
            runs.entry(e.tokens.clone()).or_default().push(i);
        }
        MfgIndex {
            runs,
            max_len: vocab.max_tokens(),
            len: vocab.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn encode(&self, tokens: &TokenSequence) -> MultiHotVector {
        let toks = tokens.tokens();
        let mut bits = vec![false; self.len];
        for start in 0..toks.len() {
            let end_max = (start + self.max_len).min(toks.len());
            for end in start + 1..=end_max {
                if let Some(hits) = self.runs.get(&toks[start..end]) {
                    for &i in hits {
                        bits[i] = true;
                    }
                }
            }
        }
        MultiHotVector {
            bits,
            kind: EncodingKind::Mfg,
        }
    }
}

/// Bit `i` is set when entry `i`'s token run occurs contiguously in `tokens`.
/// Matching is on tokens, so `C` never matches inside `[C@H]` or `Cl`.
pub fn encode_mfg(tokens: &TokenSequence, vocab: &MfgVocabulary) -> MultiHotVector {
    MfgIndex::new(vocab).encode(tokens)
}

/// FG bits followed by MFG bits.
pub fn encode_combined(
    mol: &Molecule,
    tokens: &TokenSequence,
    fg: &FgVocabulary,
    mfg: &MfgVocabulary,
) -> MultiHotVector {
    concat(encode_fg(mol, fg), encode_mfg(tokens, mfg))
}

fn concat(fg: MultiHotVector, mfg: MultiHotVector) -> MultiHotVector {
    let mut bits = fg.bits;
    bits.extend(mfg.bits);
    MultiHotVector {
        bits,
        kind: EncodingKind::Fgr,
    }
}

/// Scales to unit Euclidean norm; the zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>, EncodeError> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(EncodeError::NonFiniteInput(i));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Everything needed to turn a parsed record into model inputs.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pub kind: EncodingKind,
    fg: Option<FgVocabulary>,
    mfg: Option<(MfgVocabulary, MfgIndex)>,
    pub descriptor_len: usize,
}

impl Featurizer {
    /// `fg` is required for FG/FGR and `mfg` for MFG/FGR; extra vocabularies
    /// are ignored. Panics when a required vocabulary is missing.
    pub fn new(
        kind: EncodingKind,
        fg: Option<FgVocabulary>,
        mfg: Option<MfgVocabulary>,
        descriptor_len: usize,
    ) -> Self {
        let fg = match kind {
            EncodingKind::Mfg => None,
            _ => Some(fg.expect("FG vocabulary required")),
        };
        let mfg = match kind {
            EncodingKind::Fg => None,
            _ => {
                let v = mfg.expect("MFG vocabulary required");
                let idx = MfgIndex::new(&v);
                Some((v, idx))
            }
        };
        Featurizer {
            kind,
            fg,
            mfg,
            descriptor_len,
        }
    }

    pub fn fg(&self) -> Option<&FgVocabulary> {
        self.fg.as_ref()
    }

    pub fn mfg(&self) -> Option<&MfgVocabulary> {
        self.mfg.as_ref().map(|(v, _)| v)
    }

    pub fn fg_fingerprint(&self) -> String {
        self.fg().map(|v| v.fingerprint().to_string()).unwrap_or_default()
    }

    pub fn mfg_fingerprint(&self) -> String {
        self.mfg().map(|v| v.fingerprint()).unwrap_or_default()
    }

    /// Width of the multi-hot vector.
    pub fn width(&self) -> usize {
        self.fg().map_or(0, |v| v.len()) + self.mfg().map_or(0, |v| v.len())
    }

    /// Labels for every multi-hot bit: FG names, then MFG token strings.
    pub fn labels(&self) -> Vec<(String, &'static str)> {
        let mut out = Vec::with_capacity(self.width());
        if let Some(fg) = self.fg() {
            out.extend(fg.names().into_iter().map(|n| (n, "FG")));
        }
        if let Some(mfg) = self.mfg() {
            out.extend(mfg.entries().iter().map(|e| (e.text(), "MFG")));
        }
        out
    }

    pub fn multi_hot(&self, mol: &Molecule, tokens: &TokenSequence) -> MultiHotVector {
        let fg = self.fg.as_ref().map(|v| encode_fg(mol, v));
        let mfg = self.mfg.as_ref().map(|(_, idx)| idx.encode(tokens));
        match (fg, mfg) {
            (Some(a), Some(b)) => concat(a, b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => MultiHotVector {
                bits: Vec::new(),
                kind: self.kind,
            },
        }
    }

    /// L2-normalized descriptor vector padded to `descriptor_len`.
    pub fn descriptors(&self, mol: &Molecule) -> Vec<f64> {
        let d = compute_descriptors_padded(mol, self.descriptor_len);
        l2_normalize(&d.values).expect("descriptors are finite")
    }

    /// Encodes many records in parallel; output order follows input order.
    pub fn encode_batch(&self, records: &[(&Molecule, &TokenSequence)]) -> Vec<Vec<f64>> {
        records
            .par_iter()
            .map(|(m, t)| self.multi_hot(m, t).to_f64())
            .collect()
    }

    pub fn descriptor_batch(&self, mols: &[&Molecule]) -> Vec<Vec<f64>> {
        mols.par_iter().map(|m| self.descriptors(m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{parse_smiles, tokenize_smiles};
    use crate::vocab::parse_fg_vocab;

    fn toy_mfg(runs: &[&[&str]]) -> MfgVocabulary {
        let mut text = String::from("fgr-mfg v1 eta=1 mvs=100 corpus=x\n");
        for r in runs {
            text.push_str("1\t");
            text.push_str(&r.join("\u{1f}"));
            text.push('\n');
        }
        MfgVocabulary::from_text(&text).unwrap()
    }

    fn toks(s: &str) -> TokenSequence {
        tokenize_smiles(s).unwrap()
    }

    #[test]
    fn fg_presence_bits() {
        let (v, _) = parse_fg_vocab("hydroxyl\t[OX2H]\nnitro\t[N+](=O)[O-]\n", false).unwrap();
        let e = encode_fg(&parse_smiles("CCO").unwrap(), &v);
        assert_eq!(e.bits, [true, false]);
        let m = encode_fg(&parse_smiles("C").unwrap(), &v);
        assert_eq!(m.count_ones(), 0);
        assert_eq!(e, encode_fg(&parse_smiles("CCO").unwrap(), &v));
    }

    #[test]
    fn mfg_contiguous_runs() {
        let v = toy_mfg(&[&["C", "C"], &["C", "C", "O"]]);
        assert_eq!(encode_mfg(&toks("CCO"), &v).bits, [true, true]);
        assert_eq!(encode_mfg(&toks("CN"), &v).bits, [false, false]);
        let single = toy_mfg(&[&["C"]]);
        assert_eq!(encode_mfg(&toks("CCO"), &single).bits, [true]);
        // no match inside a bracket atom or a two-letter element
        assert_eq!(encode_mfg(&toks("[C@H](Cl)O"), &single).bits, [false]);
        // gapped runs do not count
        assert_eq!(encode_mfg(&toks("CNC"), &v).bits, [false, false]);
    }

    #[test]
    fn combined_is_concatenation() {
        let (fg, _) = parse_fg_vocab("hydroxyl\t[OX2H]\nnitro\t[N+](=O)[O-]\n", false).unwrap();
        let mfg = toy_mfg(&[&["C", "C"], &["C", "N"]]);
        let mol = parse_smiles("CCO").unwrap();
        let t = toks("CCO");
        let c = encode_combined(&mol, &t, &fg, &mfg);
        assert_eq!(c.len(), 4);
        assert_eq!(c.bits[..2], encode_fg(&mol, &fg).bits[..]);
        assert_eq!(c.bits[2..], encode_mfg(&t, &mfg).bits[..]);
        assert_eq!(c.bits, [true, false, true, false]);
    }

    #[test]
    fn normalization() {
        assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap(), [0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 0.0]).unwrap(), [0.0, 0.0]);
        assert!(matches!(
            l2_normalize(&[1.0, f64::NAN]),
            Err(EncodeError::NonFiniteInput(1))
        ));
    }

    #[test]
    fn featurizer_widths_and_labels() {
        let (fg, _) = parse_fg_vocab("hydroxyl\t[OX2H]\n", false).unwrap();
        let mfg = toy_mfg(&[&["C", "C"]]);
        let f = Featurizer::new(EncodingKind::Fgr, Some(fg.clone()), Some(mfg.clone()), 16);
        assert_eq!(f.width(), 2);
        assert_eq!(
            f.labels(),
            vec![("hydroxyl".to_string(), "FG"), ("CC".to_string(), "MFG")]
        );
        let mol = parse_smiles("CCO").unwrap();
        assert_eq!(f.multi_hot(&mol, &toks("CCO")).bits, [true, true]);
        let d = f.descriptors(&mol);
        assert_eq!(d.len(), 16);
        let norm: f64 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let only_fg = Featurizer::new(EncodingKind::Fg, Some(fg), Some(mfg), 0);
        assert_eq!(only_fg.width(), 1);
        assert!(only_fg.mfg().is_none());
    }
}
