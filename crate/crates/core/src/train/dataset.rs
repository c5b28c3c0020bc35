use std::io::Read;
use std::path::Path;

use rayon::prelude::*;

use super::TrainError;
use crate::chem::{parse_smiles, tokenize_smiles, Molecule, TokenSequence};
use crate::nn::TaskKind;

#[derive(Debug, Clone)]
pub struct Record {
    pub smiles: String,
    pub mol: Molecule,
    pub tokens: TokenSequence,
    /// One entry per task; `None` marks a missing label.
    pub targets: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub task: TaskKind,
    pub task_names: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows: usize,
    pub kept: usize,
    /// 1-based data row (header excluded) and reason.
    pub dropped: Vec<(usize, String)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tasks(&self) -> usize {
        self.task_names.len()
    }

    /// Records restricted to `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            task: self.task,
            task_names: self.task_names.clone(),
        }
    }
}

pub fn load_dataset(path: &Path, task: TaskKind) -> Result<(Dataset, IngestReport), TrainError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text, task)
}

/// CSV with a header row. The `smiles` column (any case) holds the
/// molecule; every other column is a task. Empty cells are missing labels.
/// SMILES are trimmed before parsing. Rows that fail to parse, or whose
/// labels are not numbers (0/1 for classification), are dropped and
/// reported.
pub fn parse_dataset(text: &str, task: TaskKind) -> Result<(Dataset, IngestReport), TrainError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| TrainError::Io(e.to_string()))?
        .clone();
    let smiles_col = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("smiles"))
        .ok_or(TrainError::MissingSmilesColumn)?;
    let task_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != smiles_col).collect();
    let task_names = task_cols
        .iter()
        .map(|&c| headers[c].trim().to_string())
        .collect();

    let mut rows = Vec::new();
    let mut report = IngestReport::default();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        report.rows += 1;
        match rec {
            Ok(r) => rows.push((row, r)),
            Err(e) => report.dropped.push((row, e.to_string())),
        }
    }
    let parsed: Vec<(usize, Result<Record, String>)> = rows
        .par_iter()
        .map(|(row, r)| (*row, parse_row(r, smiles_col, &task_cols, task)))
        .collect();
    let mut records = Vec::with_capacity(parsed.len());
    for (row, p) in parsed {
        match p {
            Ok(rec) => records.push(rec),
            Err(reason) => report.dropped.push((row, reason)),
        }
    }
    report.dropped.sort_by_key(|(r, _)| *r);
    report.kept = records.len();
    for (row, reason) in &report.dropped {
        log::warn!("dropping row {row}: {reason}");
    }
    if records.is_empty() {
        return Err(TrainError::NoUsableRows);
    }
    Ok((
        Dataset {
            records,
            task,
            task_names,
        },
        report,
    ))
}

fn parse_row(
    r: &csv::StringRecord,
    smiles_col: usize,
    task_cols: &[usize],
    task: TaskKind,
) -> Result<Record, String> {
    let smiles = r.get(smiles_col).unwrap_or("").trim().to_string();
    let mol = parse_smiles(&smiles).map_err(|e| format!("SMILES '{smiles}': {e}"))?;
    let tokens = tokenize_smiles(&smiles).map_err(|e| format!("SMILES '{smiles}': {e}"))?;
    let mut targets = Vec::with_capacity(task_cols.len());
    for &c in task_cols {
        let cell = r.get(c).unwrap_or("").trim();
        if cell.is_empty() {
            targets.push(None);
            continue;
        }
        let v: f64 = cell
            .parse()
            .map_err(|_| format!("label '{cell}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("label '{cell}' is not finite"));
        }
        if task == TaskKind::Classification && v != 0.0 && v != 1.0 {
            return Err(format!("classification label '{cell}' is not 0 or 1"));
        }
        targets.push(Some(v));
    }
    Ok(Record {
        smiles,
        mol,
        tokens,
        targets,
    })
}
