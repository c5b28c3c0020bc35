use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{io_error, sha256_hex, VocabError};
use crate::chem::{parse_smiles, tokenize_smiles, TokenSequence};

pub const MFG_MAGIC: &str = "fgr-mfg";
const FORMAT_VERSION: &str = "v1";
/// ASCII unit separator between tokens of one entry in the saved file.
const US: char = '\u{1f}';

/// One mined pattern: a run of tokenizer tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MfgEntry {
    pub tokens: Vec<String>,
    /// Occurrence count for single tokens; pair count at merge time for
    /// merged entries.
    pub frequency: u64,
}

impl MfgEntry {
    pub fn text(&self) -> String {
        self.tokens.concat()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MfgProvenance {
    pub eta: u64,
    pub mvs: usize,
    /// SHA-256 of the corpus, one sequence per line.
    pub corpus: String,
}

/// Single-token alphabet first (sorted), then merged entries in merge order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MfgVocabulary {
    entries: Vec<MfgEntry>,
    initial_count: usize,
    provenance: MfgProvenance,
}

impl MfgVocabulary {
    pub fn entries(&self) -> &[MfgEntry] {
        &self.entries
    }

    pub fn initial(&self) -> &[MfgEntry] {
        &self.entries[..self.initial_count]
    }

    pub fn merged(&self) -> &[MfgEntry] {
        &self.entries[self.initial_count..]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> &MfgProvenance {
        &self.provenance
    }

    /// Longest entry, in tokens.
    pub fn max_tokens(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.tokens.len())
            .max()
            .unwrap_or(0)
    }

    /// Saved-file text; byte-identical for identical vocabularies.
    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "{MFG_MAGIC} {FORMAT_VERSION} eta={} mvs={} corpus={}\n",
            p.eta, p.mvs, p.corpus
        );
        for e in &self.entries {
            let joined = e.tokens.join(&US.to_string());
            let _ = writeln!(out, "{}\t{}", e.frequency, joined);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let provenance = parse_header(header)?;
        let mut entries = Vec::new();
        let mut initial_count = 0;
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            if line.is_empty() {
                continue;
            }
            let (freq, toks) = line
                .split_once('\t')
                .ok_or(VocabError::MalformedLine { line: line_no })?;
            let frequency = freq
                .parse()
                .map_err(|_| VocabError::MalformedLine { line: line_no })?;
            let tokens: Vec<String> = toks.split(US).map(str::to_string).collect();
            if tokens.iter().any(String::is_empty) {
                return Err(VocabError::MalformedLine { line: line_no });
            }
            if tokens.len() == 1 {
                if initial_count != entries.len() {
                    // single tokens must all precede merged entries
                    return Err(VocabError::MalformedLine { line: line_no });
                }
                initial_count += 1;
            }
            entries.push(MfgEntry { tokens, frequency });
        }
        Ok(MfgVocabulary {
            entries,
            initial_count,
            provenance,
        })
    }

    /// SHA-256 of the saved-file text.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_text().as_bytes())
    }
}

fn parse_header(header: &str) -> Result<MfgProvenance, VocabError> {
    let mismatch = || VocabError::VersionMismatch {
        found: header.chars().take(64).collect(),
    };
    let mut parts = header.split(' ');
    if parts.next() != Some(MFG_MAGIC) || parts.next() != Some(FORMAT_VERSION) {
        return Err(mismatch());
    }
    let mut eta = None;
    let mut mvs = None;
    let mut corpus = None;
    for part in parts {
        match part.split_once('=') {
            Some(("eta", v)) => eta = v.parse().ok(),
            Some(("mvs", v)) => mvs = v.parse().ok(),
            Some(("corpus", v)) => corpus = Some(v.to_string()),
            _ => return Err(VocabError::MalformedLine { line: 1 }),
        }
    }
    match (eta, mvs, corpus) {
        (Some(eta), Some(mvs), Some(corpus)) => Ok(MfgProvenance { eta, mvs, corpus }),
        _ => Err(VocabError::MalformedLine { line: 1 }),
    }
}

pub fn save_vocab(vocab: &MfgVocabulary, path: &Path) -> Result<(), VocabError> {
    std::fs::write(path, vocab.to_text()).map_err(|e| io_error(path, e))
}

pub fn load_mfg_vocab(path: &Path) -> Result<MfgVocabulary, VocabError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    MfgVocabulary::from_text(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCount {
    pub pair: (String, String),
    pub count: u64,
}

/// All adjacent token pairs with their counts, overlaps included, sorted
/// by pair.
pub fn scan_pair_frequencies(sequences: &[Vec<String>]) -> Result<Vec<PairCount>, VocabError> {
    if sequences.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let mut counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for seq in sequences {
        for w in seq.windows(2) {
            *counts.entry((&w[0], &w[1])).or_default() += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|((a, b), count)| PairCount {
            pair: (a.to_string(), b.to_string()),
            count,
        })
        .collect())
}

/// One step of the miner: the chosen pair, as runs of tokenizer tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub frequency: u64,
}

pub fn mine_mfg(
    corpus: &[TokenSequence],
    eta: u64,
    mvs: usize,
) -> Result<MfgVocabulary, VocabError> {
    mine_mfg_traced(corpus, eta, mvs).map(|(v, _)| v)
}

struct Symbol {
    base: Vec<String>,
    text: String,
}

fn tie_key<'a>(
    symbols: &'a [Symbol],
    p: &(u32, u32),
) -> (&'a str, &'a str, &'a [String], &'a [String]) {
    let (l, r) = (&symbols[p.0 as usize], &symbols[p.1 as usize]);
    (&l.text, &r.text, &l.base, &r.base)
}

/// Pair-merge miner. Each round merges the most frequent adjacent pair
/// (ties to the lexicographically smallest pair of token strings) while
/// its frequency is at least `eta` and the vocabulary is below `mvs`.
///
/// A merge whose token run already exists as an entry (reached by another
/// merge order) reuses that entry, so the vocabulary never holds duplicate
/// patterns; it still appears in the returned trace.
pub fn mine_mfg_traced(
    corpus: &[TokenSequence],
    eta: u64,
    mvs: usize,
) -> Result<(MfgVocabulary, Vec<Merge>), VocabError> {
    if eta == 0 {
        return Err(VocabError::InvalidParameter("eta must be positive".into()));
    }
    if mvs == 0 {
        return Err(VocabError::InvalidParameter("mvs must be positive".into()));
    }
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(VocabError::EmptyCorpus);
    }

    let mut hasher = Sha256::new();
    let mut unique: BTreeMap<&[String], u64> = BTreeMap::new();
    let mut token_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for seq in corpus {
        hasher.update(seq.to_string().as_bytes());
        hasher.update(b"\n");
        *unique.entry(seq.tokens()).or_default() += 1;
        for t in seq.tokens() {
            *token_counts.entry(t).or_default() += 1;
        }
    }
    let provenance = MfgProvenance {
        eta,
        mvs,
        corpus: hex::encode(hasher.finalize()),
    };

    let mut symbols: Vec<Symbol> = Vec::new();
    let mut by_base: HashMap<Vec<String>, u32> = HashMap::new();
    let mut entries = Vec::new();
    for (&tok, &count) in &token_counts {
        by_base.insert(vec![tok.to_string()], symbols.len() as u32);
        symbols.push(Symbol {
            base: vec![tok.to_string()],
            text: tok.to_string(),
        });
        entries.push(MfgEntry {
            tokens: vec![tok.to_string()],
            frequency: count,
        });
    }
    let initial_count = entries.len();

    let mut seqs: Vec<Vec<u32>> = Vec::with_capacity(unique.len());
    let mut weights: Vec<u64> = Vec::with_capacity(unique.len());
    for (toks, &w) in &unique {
        seqs.push(toks.iter().map(|t| by_base[&vec![t.clone()]]).collect());
        weights.push(w);
    }

    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut where_: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (s, seq) in seqs.iter().enumerate() {
        for w in seq.windows(2) {
            *counts.entry((w[0], w[1])).or_default() += weights[s];
            where_.entry((w[0], w[1])).or_default().insert(s);
        }
    }

    let mut trace = Vec::new();
    while entries.len() < mvs {
        let best = counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .min_by(|(pa, ca), (pb, cb)| {
                cb.cmp(ca)
                    .then_with(|| tie_key(&symbols, pa).cmp(&tie_key(&symbols, pb)))
            })
            .map(|(&p, &c)| (p, c));
        let Some(((a, b), freq)) = best else {
            break;
        };
        if freq < eta {
            break;
        }
        let mut base = symbols[a as usize].base.clone();
        base.extend(symbols[b as usize].base.iter().cloned());
        trace.push(Merge {
            left: symbols[a as usize].base.clone(),
            right: symbols[b as usize].base.clone(),
            frequency: freq,
        });
        let id = match by_base.get(&base) {
            Some(&id) => id,
            None => {
                let id = symbols.len() as u32;
                by_base.insert(base.clone(), id);
                symbols.push(Symbol {
                    text: base.concat(),
                    base: base.clone(),
                });
                entries.push(MfgEntry {
                    tokens: base,
                    frequency: freq,
                });
                id
            }
        };

        let mut affected: Vec<usize> = where_
            .remove(&(a, b))
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for s in affected {
            let w = weights[s];
            for win in seqs[s].windows(2) {
                let key = (win[0], win[1]);
                if let Some(c) = counts.get_mut(&key) {
                    *c -= w;
                    if *c == 0 {
                        counts.remove(&key);
                    }
                }
            }
            let old = std::mem::take(&mut seqs[s]);
            let mut new = Vec::with_capacity(old.len());
            let mut i = 0;
            while i < old.len() {
                if i + 1 < old.len() && old[i] == a && old[i + 1] == b {
                    new.push(id);
                    i += 2;
                } else {
                    new.push(old[i]);
                    i += 1;
                }
            }
            for win in new.windows(2) {
                let key = (win[0], win[1]);
                *counts.entry(key).or_default() += w;
                where_.entry(key).or_default().insert(s);
            }
            seqs[s] = new;
        }
    }

    Ok((
        MfgVocabulary {
            entries,
            initial_count,
            provenance,
        },
        trace,
    ))
}

/// Outcome of reading a SMILES corpus file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusReport {
    pub accepted: usize,
    pub skipped: usize,
    /// First few skipped lines (1-based) with the reason.
    pub examples: Vec<(usize, String)>,
}

const MAX_SKIP_EXAMPLES: usize = 10;

/// Reads newline-delimited SMILES (first whitespace field per line), gzip
/// detected by magic bytes. Lines that fail to tokenize or parse are
/// skipped and counted.
pub fn read_corpus(path: &Path) -> Result<(Vec<TokenSequence>, CorpusReport), VocabError> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = BufReader::new(file);
    let gz = reader
        .fill_buf()
        .map(|b| b.starts_with(&[0x1f, 0x8b]))
        .map_err(|e| io_error(path, e))?;
    let reader: Box<dyn Read> = if gz {
        Box::new(flate2::read::MultiGzDecoder::new(reader))
    } else {
        Box::new(reader)
    };
    let mut out = Vec::new();
    let mut report = CorpusReport::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| io_error(path, e))?;
        let Some(smiles) = line.split_whitespace().next() else {
            continue;
        };
        let parsed = tokenize_smiles(smiles)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_smiles(smiles).map(|_| t).map_err(|e| e.to_string()));
        match parsed {
            Ok(t) => out.push(t),
            Err(reason) => {
                report.skipped += 1;
                if report.examples.len() < MAX_SKIP_EXAMPLES {
                    report.examples.push((idx + 1, reason));
                }
            }
        }
    }
    report.accepted = out.len();
    if out.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    Ok((out, report))
}
