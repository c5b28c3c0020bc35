//! Dataset ingestion, splitting, the training loop, evaluation and
//! cross-validation.

mod config;
mod dataset;
mod metrics;
mod pipeline;
mod split;

use std::path::PathBuf;

use thiserror::Error;

use crate::encode::EncodeError;
use crate::nn::NnError;
use crate::vocab::VocabError;

pub use config::{
    Config, DataConfig, DescriptorNorm, InterpretConfig, ModelSection, OptimizerConfig, OptimizerKind,
    TrainingConfig, VocabConfig,
};
pub use dataset::{load_dataset, parse_dataset, Dataset, IngestReport, Record};
pub use metrics::{
    mae, macro_average, r2, rmse, roc_auc, score_tasks, MetricKind, MetricsReport, TaskMetric,
};
pub use pipeline::{
    column_scales, crossvalidate, encode_dataset, evaluate, featurizer_from_checkpoint, fit, make_split,
    predict_outputs, prepare, train, CvFold, CvOutcome, EpochRecord, Encoded,
    FitResult, PipelineMeta, Prepared, TrainOutcome, VocabOverrides,
};
pub use split::{
    random_split, scaffold_folds, scaffold_groups, scaffold_keys, scaffold_split,
    scaffold_split_keys, Split, SplitAssignment, SplitMethod,
};

/// The curated starter list used when no FG file is configured.
pub const STARTER_FG: &str = include_str!("../../data/fg_starter.tsv");

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has no 'smiles' column")]
    MissingSmilesColumn,
    #[error("dataset has no usable rows")]
    NoUsableRows,
    #[error("i/o: {0}")]
    Io(String),
    #[error("config: {0}")]
    Config(String),
    #[error("no task could be scored on this split")]
    DegenerateTask,
    #[error("non-finite gradient in {block} at epoch {epoch}, batch {batch}; state written to {}", dump.display())]
    Diverged {
        epoch: usize,
        batch: usize,
        block: &'static str,
        dump: PathBuf,
    },
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}
