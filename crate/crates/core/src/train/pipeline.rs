use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    macro_average, random_split, scaffold_folds, scaffold_keys, scaffold_split, score_tasks,
    Config, Dataset, DescriptorNorm, IngestReport, MetricKind, MetricsReport, OptimizerKind, Split,
    SplitAssignment, SplitMethod, TrainError, STARTER_FG,
};
use crate::encode::{compute_descriptors_padded, EncodingKind, Featurizer};
use crate::nn::{
    compute_gradients, sam_step, Batch, Checkpoint, LossParts, Model, NnError, Sgd, TaskKind,
};
use crate::vocab::{mine_mfg, parse_fg_vocab, sha256_hex, MfgVocabulary};

/// Everything a checkpoint needs to rebuild its featurizer and split,
/// stored in the checkpoint header. Vocabulary texts are embedded so a
/// checkpoint does not depend on files that may move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub encoding: String,
    pub descriptor_len: usize,
    pub descriptor_norm: DescriptorNorm,
    /// Per-column divisors for column normalization; empty otherwise.
    pub descriptor_scale: Vec<f64>,
    pub skip_invalid: bool,
    pub task_names: Vec<String>,
    pub split: SplitMethod,
    pub ratios: [f64; 3],
    pub split_seed: u64,
    pub data_sha256: String,
    pub fg_text: Option<String>,
    pub mfg_text: Option<String>,
}

impl PipelineMeta {
    /// The `descriptors` argument of [`encode_dataset`] for this checkpoint.
    pub fn descriptor_input(&self, ck: &Checkpoint) -> Option<&[f64]> {
        ck.model.config.use_descriptors.then_some(&self.descriptor_scale[..])
    }
}

/// Model inputs for every record, computed once.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub x: Array2<f64>,
    pub d: Option<Array2<f64>>,
    pub y: Array2<f64>,
    pub mask: Array2<f64>,
}

impl Encoded {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    /// Row `i` as the model sees it: bits, then descriptors if present.
    pub fn input_row(&self, i: usize) -> Vec<f64> {
        let mut r = self.x.row(i).to_vec();
        if let Some(d) = &self.d {
            r.extend(d.row(i).iter());
        }
        r
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch, NnError> {
        Batch::new(
            self.x.select(Axis(0), idx),
            self.d.as_ref().map(|d| d.select(Axis(0), idx)),
            self.y.select(Axis(0), idx),
            self.mask.select(Axis(0), idx),
        )
    }
}

fn raw_descriptors(f: &Featurizer, ds: &Dataset) -> Array2<f64> {
    let d: Vec<f64> = ds
        .records
        .par_iter()
        .flat_map_iter(|r| compute_descriptors_padded(&r.mol, f.descriptor_len).values)
        .collect();
    Array2::from_shape_vec((ds.len(), f.descriptor_len), d).expect("padded descriptors")
}

/// Root-mean-square of every raw descriptor column over `ds`; columns that
/// are zero throughout get 1 so they stay zero.
pub fn column_scales(f: &Featurizer, ds: &Dataset) -> Vec<f64> {
    let d = raw_descriptors(f, ds);
    let n = d.nrows().max(1) as f64;
    d.columns()
        .into_iter()
        .map(|c| {
            let rms = (c.dot(&c) / n).sqrt();
            if rms > 0.0 {
                rms
            } else {
                1.0
            }
        })
        .collect()
}

/// Encodes every record. `descriptors` is `None` for models without
/// descriptors, `Some(&[])` for per-molecule normalization and
/// `Some(scales)` for column scaling.
pub fn encode_dataset(f: &Featurizer, ds: &Dataset, descriptors: Option<&[f64]>) -> Encoded {
    let n = ds.len();
    let pairs: Vec<_> = ds.records.iter().map(|r| (&r.mol, &r.tokens)).collect();
    let x = f.encode_batch(&pairs).concat();
    let x = Array2::from_shape_vec((n, f.width()), x).expect("rows have the featurizer width");
    let d = descriptors.map(|scale| {
        if scale.is_empty() {
            let mols: Vec<_> = ds.records.iter().map(|r| &r.mol).collect();
            let d = f.descriptor_batch(&mols).concat();
            Array2::from_shape_vec((n, f.descriptor_len), d).expect("padded descriptors")
        } else {
            raw_descriptors(f, ds) / &ndarray::ArrayView1::from(scale)
        }
    });
    let k = ds.tasks();
    let mut y = Array2::zeros((n, k));
    let mut mask = Array2::zeros((n, k));
    for (i, r) in ds.records.iter().enumerate() {
        for (t, v) in r.targets.iter().enumerate() {
            if let Some(v) = v {
                y[[i, t]] = *v;
                mask[[i, t]] = 1.0;
            }
        }
    }
    Encoded { x, d, y, mask }
}

fn featurizer_from_texts(
    kind: EncodingKind,
    fg_text: Option<&str>,
    mfg_text: Option<&str>,
    descriptor_len: usize,
    skip_invalid: bool,
) -> Result<Featurizer, TrainError> {
    let fg = match fg_text {
        Some(t) => {
            let (v, report) = parse_fg_vocab(t, skip_invalid)?;
            if !report.rejected.is_empty() {
                log::warn!("skipped {} invalid FG entries", report.rejected.len());
            }
            Some(v)
        }
        None => None,
    };
    let mfg = mfg_text.map(MfgVocabulary::from_text).transpose()?;
    Ok(Featurizer::new(kind, fg, mfg, descriptor_len))
}

fn read_text(p: &Path) -> Result<String, TrainError> {
    std::fs::read_to_string(p).map_err(|e| TrainError::Io(format!("{}: {e}", p.display())))
}

/// A dataset with its vocabularies resolved and every record encoded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub report: IngestReport,
    pub featurizer: Featurizer,
    pub encoded: Encoded,
    pub meta: PipelineMeta,
}

/// Loads the dataset, resolves vocabularies and encodes every record. An
/// absent FG file means the bundled starter list; an absent MFG file means
/// mining over the dataset's own SMILES (labels are never read).
pub fn prepare(cfg: &Config) -> Result<Prepared, TrainError> {
    let bytes = std::fs::read(&cfg.data.path)
        .map_err(|e| TrainError::Io(format!("{}: {e}", cfg.data.path.display())))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| TrainError::Io(format!("{}: not UTF-8", cfg.data.path.display())))?;
    let (dataset, report) = super::parse_dataset(&text, cfg.data.task)?;
    let kind = cfg.vocab.encoding_kind()?;

    let fg_text = match kind {
        EncodingKind::Mfg => None,
        _ => Some(match &cfg.vocab.fg {
            Some(p) => read_text(p)?,
            None => STARTER_FG.to_string(),
        }),
    };
    let mfg_text = match kind {
        EncodingKind::Fg => None,
        _ => Some(match &cfg.vocab.mfg {
            Some(p) => read_text(p)?,
            None => {
                let corpus: Vec<_> = dataset.records.iter().map(|r| r.tokens.clone()).collect();
                mine_mfg(&corpus, cfg.vocab.mine_eta, cfg.vocab.mine_mvs)?.to_text()
            }
        }),
    };
    let featurizer = featurizer_from_texts(
        kind,
        fg_text.as_deref(),
        mfg_text.as_deref(),
        cfg.model.descriptor_len,
        cfg.vocab.skip_invalid,
    )?;
    let descriptor_scale = match cfg.model.descriptor_norm {
        DescriptorNorm::Column if cfg.model.use_descriptors => column_scales(&featurizer, &dataset),
        _ => Vec::new(),
    };
    let encoded = encode_dataset(
        &featurizer,
        &dataset,
        cfg.model.use_descriptors.then_some(&descriptor_scale[..]),
    );
    let meta = PipelineMeta {
        encoding: kind.as_str().to_string(),
        descriptor_len: cfg.model.descriptor_len,
        descriptor_norm: cfg.model.descriptor_norm,
        descriptor_scale,
        skip_invalid: cfg.vocab.skip_invalid,
        task_names: dataset.task_names.clone(),
        split: cfg.data.split,
        ratios: cfg.data.ratios,
        split_seed: cfg.training.seed,
        data_sha256: sha256_hex(text.as_bytes()),
        fg_text,
        mfg_text,
    };
    Ok(Prepared {
        dataset,
        report,
        featurizer,
        encoded,
        meta,
    })
}

pub fn make_split(ds: &Dataset, method: SplitMethod, ratios: [f64; 3], seed: u64) -> SplitAssignment {
    match method {
        SplitMethod::Scaffold => scaffold_split(ds, ratios, seed),
        SplitMethod::Random => random_split(ds.len(), ratios, seed),
    }
}

/// Vocabulary files that replace the texts embedded in a checkpoint. They
/// must carry the same fingerprints.
#[derive(Debug, Clone, Default)]
pub struct VocabOverrides {
    pub fg: Option<PathBuf>,
    pub mfg: Option<PathBuf>,
}

pub fn featurizer_from_checkpoint(
    ck: &Checkpoint,
    overrides: &VocabOverrides,
) -> Result<(Featurizer, PipelineMeta), TrainError> {
    let meta: PipelineMeta = serde_json::from_value(ck.header.pipeline.clone())
        .map_err(|e| TrainError::Config(format!("checkpoint pipeline metadata: {e}")))?;
    let kind = EncodingKind::parse(&meta.encoding)
        .ok_or_else(|| TrainError::Config(format!("unknown encoding '{}'", meta.encoding)))?;
    let pick = |over: &Option<PathBuf>, stored: &Option<String>| -> Result<Option<String>, TrainError> {
        match over {
            Some(p) => read_text(p).map(Some),
            None => Ok(stored.clone()),
        }
    };
    let fg_text = match kind {
        EncodingKind::Mfg => None,
        _ => pick(&overrides.fg, &meta.fg_text)?,
    };
    let mfg_text = match kind {
        EncodingKind::Fg => None,
        _ => pick(&overrides.mfg, &meta.mfg_text)?,
    };
    if (kind != EncodingKind::Mfg && fg_text.is_none()) || (kind != EncodingKind::Fg && mfg_text.is_none()) {
        return Err(TrainError::Config("checkpoint lacks a vocabulary".into()));
    }
    let f = featurizer_from_texts(
        kind,
        fg_text.as_deref(),
        mfg_text.as_deref(),
        meta.descriptor_len,
        meta.skip_invalid,
    )?;
    ck.verify_vocab(&f.fg_fingerprint(), &f.mfg_fingerprint())?;
    if f.width() != ck.model.input_width {
        return Err(TrainError::Config(format!(
            "featurizer width {} does not match model input {}",
            f.width(),
            ck.model.input_width
        )));
    }
    Ok((f, meta))
}

/// Outputs (probabilities or regression values) for the given rows.
pub fn predict_outputs(model: &Model, enc: &Encoded, idx: &[usize]) -> Result<Vec<Vec<f64>>, TrainError> {
    if idx.is_empty() {
        return Ok(Vec::new());
    }
    let x = enc.x.select(Axis(0), idx);
    let d = enc.d.as_ref().map(|d| d.select(Axis(0), idx));
    let out = model.predict(x.view(), d.as_ref().map(|d| d.view()))?;
    Ok(out.rows().into_iter().map(|r| r.to_vec()).collect())
}

fn default_metric(task: TaskKind) -> MetricKind {
    match task {
        TaskKind::Classification => MetricKind::RocAuc,
        TaskKind::Regression => MetricKind::Rmse,
    }
}

fn score(
    model: &Model,
    enc: &Encoded,
    ds: &Dataset,
    idx: &[usize],
    metric: MetricKind,
) -> Result<Vec<super::TaskMetric>, TrainError> {
    let out = predict_outputs(model, enc, idx)?;
    let targets: Vec<_> = idx.iter().map(|&i| ds.records[i].targets.clone()).collect();
    Ok(score_tasks(metric, &ds.task_names, &out, &targets))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Supervised loss.
    pub l_e: f64,
    /// Reconstruction loss.
    pub l_r: f64,
    pub l_ubc: f64,
    pub l_t: f64,
    pub metric: MetricKind,
    pub valid_metric: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: Model,
    /// Epoch whose parameters `model` holds (1-based).
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Trains a fresh model on `train_idx`. With a non-empty `valid_idx` the
/// parameters of the best validation epoch are kept (earliest on ties);
/// otherwise those of the final epoch.
#[allow(clippy::too_many_arguments)]
pub fn fit(
    cfg: &Config,
    ds: &Dataset,
    enc: &Encoded,
    train_idx: &[usize],
    valid_idx: &[usize],
    seed: u64,
    mut log: Option<&mut dyn Write>,
) -> Result<FitResult, TrainError> {
    if train_idx.is_empty() {
        return Err(TrainError::Config("training split is empty".into()));
    }
    let t = &cfg.training;
    let descriptor_width = enc.d.as_ref().map_or(cfg.model.descriptor_len, |d| d.ncols());
    let mut model = Model::new(
        cfg.model.model_config(ds.task, ds.tasks()),
        enc.x.ncols(),
        descriptor_width,
        seed,
    );
    let metric = t.metric.unwrap_or_else(|| default_metric(ds.task));
    let mut opt = Sgd::new(cfg.optimizer.lr, cfg.optimizer.momentum)
        .with_weight_decay(cfg.optimizer.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let start = Instant::now();
    let mut order = train_idx.to_vec();
    let mut history = Vec::with_capacity(t.epochs);
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=t.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for (bi, chunk) in order.chunks(t.batch_size).enumerate() {
            let batch = enc.batch(chunk)?;
            let step = match cfg.optimizer.kind {
                OptimizerKind::Sam => {
                    sam_step(&mut model, &batch, &mut opt, cfg.optimizer.rho).map(|(p, _)| p)
                }
                OptimizerKind::Sgd => compute_gradients(&model, &batch).map(|(p, g)| {
                    opt.step(&mut model.params, &g);
                    p
                }),
            };
            let parts = match step {
                Err(NnError::NonFiniteGradient(block)) => {
                    let dump = dump_path(&t.out);
                    write_dump(&dump, epoch, bi + 1, block, chunk, &model);
                    return Err(TrainError::Diverged {
                        epoch,
                        batch: bi + 1,
                        block,
                        dump,
                    });
                }
                other => other?,
            };
            let w = chunk.len() as f64;
            for (s, v) in sums.iter_mut().zip(loss_array(&parts)) {
                *s += w * v;
            }
        }
        let n = order.len() as f64;
        let valid_metric = if valid_idx.is_empty() {
            None
        } else {
            macro_average(&score(&model, enc, ds, valid_idx, metric)?)
        };
        let rec = EpochRecord {
            epoch,
            l_e: sums[0] / n,
            l_r: sums[1] / n,
            l_ubc: sums[2] / n,
            l_t: sums[3] / n,
            metric,
            valid_metric,
            wall_time: t.wall_time.then(|| start.elapsed().as_secs_f64()),
        };
        if let Some(w) = log.as_deref_mut() {
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| TrainError::Io(e.to_string()))?;
        }
        log::info!(
            "epoch {epoch}: L_t {:.6} valid {} {}",
            rec.l_t,
            metric.as_str(),
            valid_metric.map_or("-".to_string(), |v| format!("{v:.6}"))
        );
        history.push(rec);
        if let Some(v) = valid_metric {
            let better = match &best {
                None => true,
                Some((b, _, _)) if metric.higher_is_better() => v > *b,
                Some((b, _, _)) => v < *b,
            };
            if better {
                best = Some((v, epoch, model.clone()));
            }
        }
    }
    Ok(match best {
        Some((_, best_epoch, model)) => FitResult {
            model,
            best_epoch,
            history,
        },
        None => FitResult {
            model,
            best_epoch: t.epochs,
            history,
        },
    })
}

fn loss_array(p: &LossParts) -> [f64; 4] {
    [p.supervised, p.reconstruction, p.ubc, p.total]
}

fn dump_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".diverged.json");
    PathBuf::from(s)
}

fn write_dump(path: &Path, epoch: usize, batch: usize, block: &str, rows: &[usize], model: &Model) {
    let state = serde_json::json!({
        "epoch": epoch,
        "batch": batch,
        "block": block,
        "rows": rows,
        "param_norm": model.params.norm(),
        "non_finite_param": model.params.first_non_finite(),
        "config": model.config,
    });
    if let Err(e) = std::fs::write(path, format!("{state:#}\n")) {
        log::error!("could not write {}: {e}", path.display());
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub split: SplitAssignment,
    pub history: Vec<EpochRecord>,
}

/// Splits, fits and packages a checkpoint. Nothing is written except to
/// `log`.
pub fn train(cfg: &Config, prep: &Prepared, log: Option<&mut dyn Write>) -> Result<TrainOutcome, TrainError> {
    let seed = cfg.training.seed;
    let split = make_split(&prep.dataset, cfg.data.split, cfg.data.ratios, seed);
    let counts = split.counts();
    log::info!(
        "split {:?}: train {} valid {} test {}",
        cfg.data.split,
        counts[0],
        counts[1],
        counts[2]
    );
    let fit = fit(
        cfg,
        &prep.dataset,
        &prep.encoded,
        &split.indices(Split::Train),
        &split.indices(Split::Valid),
        seed,
        log,
    )?;
    Ok(TrainOutcome {
        checkpoint: package(prep, fit.model, seed, fit.best_epoch, cfg),
        split,
        history: fit.history,
    })
}

fn package(prep: &Prepared, model: Model, seed: u64, epoch: usize, cfg: &Config) -> Checkpoint {
    let mut ck = Checkpoint::new(
        model,
        prep.featurizer.fg_fingerprint(),
        prep.featurizer.mfg_fingerprint(),
        seed,
        epoch,
    );
    let mut meta = prep.meta.clone();
    meta.split = cfg.data.split;
    meta.ratios = cfg.data.ratios;
    meta.split_seed = seed;
    ck.header.pipeline = serde_json::to_value(&meta).expect("metadata serializes");
    ck
}

/// Scores a checkpoint on `ds`. `split` selects rows by recomputing the
/// checkpoint's stored split on `ds`; `None` scores every row.
pub fn evaluate(
    ck: &Checkpoint,
    ds: &Dataset,
    split: Option<Split>,
    metric: Option<MetricKind>,
    overrides: &VocabOverrides,
) -> Result<MetricsReport, TrainError> {
    let (f, meta) = featurizer_from_checkpoint(ck, overrides)?;
    if ds.tasks() != ck.model.config.tasks || ds.task != ck.model.config.task {
        return Err(TrainError::Config(format!(
            "dataset has {} {:?} tasks, checkpoint expects {} {:?}",
            ds.tasks(),
            ds.task,
            ck.model.config.tasks,
            ck.model.config.task
        )));
    }
    let enc = encode_dataset(&f, ds, meta.descriptor_input(ck));
    let idx: Vec<usize> = match split {
        Some(s) => make_split(ds, meta.split, meta.ratios, meta.split_seed).indices(s),
        None => (0..ds.len()).collect(),
    };
    let metric = metric.unwrap_or_else(|| default_metric(ds.task));
    let per_task = score(&ck.model, &enc, ds, &idx, metric)?;
    let macro_value = macro_average(&per_task);
    if macro_value.is_none() {
        return Err(TrainError::DegenerateTask);
    }
    Ok(MetricsReport {
        metric,
        split: split.map_or("all", |s| s.as_str()).to_string(),
        seed: meta.split_seed,
        per_task,
        macro_value,
    })
}

#[derive(Debug, Clone)]
pub struct CvFold {
    pub fold: usize,
    pub test_idx: Vec<usize>,
    pub checkpoint: Checkpoint,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<CvFold>,
    pub metric: MetricKind,
    pub mean: f64,
    /// Population standard deviation over scored folds.
    pub std: f64,
}

/// K-fold cross-validation. Scaffold configs keep each scaffold inside one
/// fold. Each fold trains on the rest for the configured epochs and keeps
/// the final parameters, since no validation rows are held back.
pub fn crossvalidate(cfg: &Config, prep: &Prepared, folds: usize) -> Result<CvOutcome, TrainError> {
    if folds < 2 || folds > prep.dataset.len() {
        return Err(TrainError::Config(format!(
            "cannot make {folds} folds from {} records",
            prep.dataset.len()
        )));
    }
    let seed = cfg.training.seed;
    let ds = &prep.dataset;
    let fold_of = match cfg.data.split {
        SplitMethod::Scaffold => scaffold_folds(&scaffold_keys(ds), folds),
        SplitMethod::Random => {
            let mut order: Vec<usize> = (0..ds.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut f = vec![0; ds.len()];
            for (pos, &i) in order.iter().enumerate() {
                f[i] = pos % folds;
            }
            f
        }
    };
    let metric = cfg.training.metric.unwrap_or_else(|| default_metric(ds.task));
    let mut out = Vec::with_capacity(folds);
    for fold in 0..folds {
        let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
            (0..ds.len()).partition(|&i| fold_of[i] == fold);
        let fit = fit(cfg, ds, &prep.encoded, &train_idx, &[], seed, None)?;
        let per_task = score(&fit.model, &prep.encoded, ds, &test_idx, metric)?;
        let report = MetricsReport {
            metric,
            split: format!("fold{fold}"),
            seed,
            macro_value: macro_average(&per_task),
            per_task,
        };
        log::info!(
            "fold {fold}: {} test rows, {} {:?}",
            test_idx.len(),
            metric.as_str(),
            report.macro_value
        );
        out.push(CvFold {
            fold,
            test_idx,
            checkpoint: package(prep, fit.model, seed, fit.best_epoch, cfg),
            report,
        });
    }
    let vals: Vec<f64> = out.iter().filter_map(|f| f.report.macro_value).collect();
    if vals.is_empty() {
        return Err(TrainError::DegenerateTask);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt();
    Ok(CvOutcome {
        folds: out,
        metric,
        mean,
        std,
    })
}
