use std::collections::HashSet;
use std::path::Path;

use super::{io_error, sha256_hex, VocabError};
use crate::smarts::{parse_smarts, QueryPattern};

#[derive(Debug, Clone)]
pub struct FgEntry {
    pub name: String,
    pub smarts: String,
    pub pattern: QueryPattern,
}

/// Ordered curated vocabulary; entry `i` is multi-hot bit `i`.
#[derive(Debug, Clone)]
pub struct FgVocabulary {
    entries: Vec<FgEntry>,
    fingerprint: String,
}

/// Lines that failed to load, with the reason. Empty in strict mode,
/// since strict loading stops at the first bad line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FgLoadReport {
    pub accepted: usize,
    pub rejected: Vec<(usize, String)>,
}

impl FgVocabulary {
    pub fn entries(&self) -> &[FgEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// SHA-256 over the accepted `name<TAB>smarts` lines.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

pub fn load_fg_vocab(
    path: &Path,
    skip_invalid: bool,
) -> Result<(FgVocabulary, FgLoadReport), VocabError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_fg_vocab(&text, skip_invalid)
}

/// Parses `<name><TAB><SMARTS>` lines; `#` starts a comment line and blank
/// lines are ignored. Line numbers in errors are 1-based.
pub fn parse_fg_vocab(
    text: &str,
    skip_invalid: bool,
) -> Result<(FgVocabulary, FgLoadReport), VocabError> {
    let mut entries = Vec::new();
    let mut report = FgLoadReport::default();
    let mut names = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let result = parse_line(line, line_no).and_then(|entry| {
            if names.contains(&entry.name) {
                Err(VocabError::DuplicateName {
                    line: line_no,
                    name: entry.name,
                })
            } else {
                Ok(entry)
            }
        });
        match result {
            Ok(entry) => {
                names.insert(entry.name.clone());
                entries.push(entry);
            }
            Err(e) if skip_invalid => {
                log::warn!("skipping vocabulary line {line_no}: {e}");
                report.rejected.push((line_no, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    report.accepted = entries.len();
    let mut canon = String::new();
    for e in &entries {
        canon.push_str(&e.name);
        canon.push('\t');
        canon.push_str(&e.smarts);
        canon.push('\n');
    }
    let fingerprint = sha256_hex(canon.as_bytes());
    Ok((
        FgVocabulary {
            entries,
            fingerprint,
        },
        report,
    ))
}

fn parse_line(line: &str, line_no: usize) -> Result<FgEntry, VocabError> {
    let mut parts = line.split('\t');
    let (Some(name), Some(smarts), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(VocabError::MalformedLine { line: line_no });
    };
    let (name, smarts) = (name.trim(), smarts.trim());
    if name.is_empty() || smarts.is_empty() {
        return Err(VocabError::MalformedLine { line: line_no });
    }
    let pattern = parse_smarts(smarts).map_err(|source| VocabError::InvalidSmarts {
        line: line_no,
        source,
    })?;
    Ok(FgEntry {
        name: name.to_string(),
        smarts: smarts.to_string(),
        pattern,
    })
}
