//! Functional-group vocabularies: curated SMARTS lists and token patterns
//! mined from a SMILES corpus.

mod fg;
mod mfg;

use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::smarts::SmartsError;

pub use fg::{load_fg_vocab, parse_fg_vocab, FgEntry, FgLoadReport, FgVocabulary};
pub use mfg::{
    load_mfg_vocab, mine_mfg, mine_mfg_traced, read_corpus, save_vocab, scan_pair_frequencies,
    CorpusReport, Merge, MfgEntry, MfgProvenance, MfgVocabulary, PairCount, MFG_MAGIC,
};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: malformed entry")]
    MalformedLine { line: usize },
    #[error("line {line}: {source}")]
    InvalidSmarts { line: usize, source: SmartsError },
    #[error("line {line}: duplicate name '{name}'")]
    DuplicateName { line: usize, name: String },
    #[error("unsupported vocabulary format: {found}")]
    VersionMismatch { found: String },
    #[error("corpus contains no usable sequences")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn io_error(path: &std::path::Path, source: std::io::Error) -> VocabError {
    if source.kind() == std::io::ErrorKind::NotFound {
        VocabError::FileNotFound(path.to_path_buf())
    } else {
        VocabError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
