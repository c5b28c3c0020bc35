use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fgr::analysis::{alignment_report, uniformity_report, DEFAULT_BANDWIDTH};
use fgr::encode::{
    descriptor_names, write_matrix, write_matrix_tsv, EncodedMatrix, EncodingKind, Featurizer,
    DEFAULT_DESCRIPTOR_LEN,
};
use fgr::interpret::{
    attribute_rows, feature_labels, write_reports_tsv, AttributionParams, AttributionReport,
    Method, ModelTarget,
};
use fgr::nn::{load_checkpoint, save_checkpoint, Checkpoint, TaskKind};
use fgr::train::{
    crossvalidate, encode_dataset, evaluate, featurizer_from_checkpoint, load_dataset,
    make_split, prepare, train, Config, Dataset, Encoded, MetricKind, PipelineMeta, Split,
    VocabOverrides,
};
use fgr::vocab::{load_fg_vocab, load_mfg_vocab, mine_mfg, read_corpus, save_vocab};

#[derive(Parser)]
#[command(name = "fgrkit", version, about = "Functional-group representation toolkit")]
struct Cli {
    /// Overrides the seed of every seeded step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel encoding and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    log: LogFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogFormat {
    Text,
    JsonLines,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Bin,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Alignment,
    Uniformity,
}

#[derive(Subcommand)]
enum Command {
    /// Mine an MFG vocabulary from a SMILES corpus.
    MineVocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 500)]
        eta: u64,
        #[arg(long, default_value_t = 30000)]
        mvs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a dataset into a labelled multi-hot matrix.
    Encode {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fg: Option<PathBuf>,
        #[arg(long)]
        mfg: Option<PathBuf>,
        /// Append L2-normalized descriptor columns.
        #[arg(long)]
        descriptors: bool,
        #[arg(long, default_value_t = DEFAULT_DESCRIPTOR_LEN)]
        descriptor_len: usize,
        /// Skip FG lines that fail to parse.
        #[arg(long)]
        skip_invalid: bool,
        #[arg(long, value_enum, default_value_t = MatrixFormat::Bin)]
        format: MatrixFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a config file and write the checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path; the config's when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Independent runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Score a checkpoint on one split of a dataset.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// train, valid, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        /// roc_auc, rmse, mae or r2.
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        fg: Option<PathBuf>,
        #[arg(long)]
        mfg: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature attributions averaged over one or more checkpoints.
    Attribute {
        #[arg(long, num_args = 1.., required = true)]
        ckpt: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// A method name or `all`; the config's when absent.
        #[arg(long)]
        method: Option<String>,
        /// Ranked TSV output.
        #[arg(long)]
        out: PathBuf,
        /// JSON summary; next to the TSV when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Supplies defaults from its `interpret` section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        task: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Rows to explain: train, valid, test or all.
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Latent-space alignment or uniformity report.
    Analyze {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        report: ReportKind,
        #[arg(long, default_value_t = 5)]
        top_s: usize,
        #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
        bandwidth: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-fold cross-validation; one checkpoint per fold.
    Crossval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.log);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting thread pool")?;
    }
    match cli.command {
        Command::MineVocab {
            corpus,
            eta,
            mvs,
            out,
        } => mine_vocab(&corpus, eta, mvs, &out),
        Command::Encode {
            data,
            fg,
            mfg,
            descriptors,
            descriptor_len,
            skip_invalid,
            format,
            out,
        } => encode(
            &data,
            fg.as_deref(),
            mfg.as_deref(),
            descriptors.then_some(descriptor_len),
            skip_invalid,
            format,
            &out,
        ),
        Command::Train { config, out, runs } => train_cmd(&config, out, runs, cli.seed),
        Command::Evaluate {
            ckpt,
            data,
            split,
            metric,
            fg,
            mfg,
            out,
        } => {
            let overrides = VocabOverrides { fg, mfg };
            evaluate_cmd(&ckpt, &data, &split, metric.as_deref(), &overrides, out.as_deref())
        }
        Command::Attribute {
            ckpt,
            data,
            method,
            out,
            summary,
            config,
            steps,
            samples,
            noise,
            task,
            top_k,
            split,
        } => {
            let mut interp = match &config {
                Some(p) => Config::load(p)?.interpret,
                None => Default::default(),
            };
            if let Some(m) = method {
                interp.method = m;
            }
            interp.steps = steps.unwrap_or(interp.steps);
            interp.samples = samples.unwrap_or(interp.samples);
            interp.noise = noise.unwrap_or(interp.noise);
            interp.task = task.unwrap_or(interp.task);
            interp.top_k = top_k.unwrap_or(interp.top_k);
            let summary = summary.unwrap_or_else(|| out.with_extension("json"));
            attribute_cmd(&ckpt, &data, &interp, &split, cli.seed.unwrap_or(0), &out, &summary)
        }
        Command::Analyze {
            ckpt,
            data,
            report,
            top_s,
            bandwidth,
            out,
        } => analyze_cmd(&ckpt, &data, report, top_s, bandwidth, out.as_deref()),
        Command::Crossval {
            config,
            folds,
            out_dir,
        } => crossval_cmd(&config, folds, &out_dir, cli.seed),
    }
}

fn init_logging(format: LogFormat) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    match format {
        LogFormat::Text => {
            b.format_timestamp(None).format_target(false);
        }
        LogFormat::JsonLines => {
            b.format(|buf, rec| {
                let line = json!({
                    "level": rec.level().as_str(),
                    "target": rec.target(),
                    "message": rec.args().to_string(),
                });
                writeln!(buf, "{line}")
            });
        }
    }
    b.init();
}

/// Pretty JSON to a file, or to stdout when no path is given.
fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

fn mine_vocab(corpus: &Path, eta: u64, mvs: usize, out: &Path) -> Result<()> {
    let (seqs, report) = read_corpus(corpus)?;
    for (line, reason) in &report.examples {
        log::warn!("{}:{line}: skipped: {reason}", corpus.display());
    }
    log::info!("{} sequences, {} skipped", report.accepted, report.skipped);
    let vocab = mine_mfg(&seqs, eta, mvs)?;
    save_vocab(&vocab, out)?;
    emit(
        &json!({
            "accepted": report.accepted,
            "skipped": report.skipped,
            "entries": vocab.len(),
            "initial": vocab.initial().len(),
            "merged": vocab.merged().len(),
            "fingerprint": vocab.fingerprint(),
        }),
        None,
    )
}

fn encode(
    data: &Path,
    fg: Option<&Path>,
    mfg: Option<&Path>,
    descriptors: Option<usize>,
    skip_invalid: bool,
    format: MatrixFormat,
    out: &Path,
) -> Result<()> {
    let kind = match (fg, mfg) {
        (Some(_), Some(_)) => EncodingKind::Fgr,
        (Some(_), None) => EncodingKind::Fg,
        (None, Some(_)) => EncodingKind::Mfg,
        (None, None) => bail!("need --fg, --mfg or both"),
    };
    let fg = match fg {
        Some(p) => {
            let (v, rep) = load_fg_vocab(p, skip_invalid)?;
            for (line, reason) in &rep.rejected {
                log::warn!("{}:{line}: skipped: {reason}", p.display());
            }
            Some(v)
        }
        None => None,
    };
    let mfg = mfg.map(load_mfg_vocab).transpose()?;
    let f = Featurizer::new(kind, fg, mfg, descriptors.unwrap_or(DEFAULT_DESCRIPTOR_LEN));
    // Regression parsing accepts any numeric label column; labels are unused.
    let (ds, report) = load_dataset(data, TaskKind::Regression)?;
    for (row, reason) in &report.dropped {
        log::warn!("{}: row {row} dropped: {reason}", data.display());
    }
    let enc = encode_dataset(&f, &ds, descriptors.map(|_| &[][..]));
    let mut columns: Vec<String> = f.labels().into_iter().map(|(n, _)| n).collect();
    if let Some(len) = descriptors {
        columns.extend(descriptor_names(len));
    }
    let matrix = EncodedMatrix {
        fg_fingerprint: f.fg_fingerprint(),
        mfg_fingerprint: f.mfg_fingerprint(),
        columns,
        rows: ds.records.iter().map(|r| r.smiles.clone()).collect(),
        data: (0..enc.rows()).flat_map(|i| enc.input_row(i)).collect(),
    };
    let mut w = create(out)?;
    match format {
        MatrixFormat::Bin => write_matrix(&matrix, &mut w)?,
        MatrixFormat::Tsv => write_matrix_tsv(&matrix, &mut w)?,
    }
    w.flush()?;
    log::info!("{} rows x {} columns", matrix.n_rows(), matrix.n_cols());
    Ok(())
}

/// `model.ckpt` becomes `model.run2.ckpt`.
fn run_path(p: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return p.to_path_buf();
    }
    let stem = p.file_stem().unwrap_or_default().to_string_lossy();
    let name = match p.extension() {
        Some(ext) => format!("{stem}.run{run}.{}", ext.to_string_lossy()),
        None => format!("{stem}.run{run}"),
    };
    p.with_file_name(name)
}

fn split_score(ck: &Checkpoint, ds: &Dataset, split: Split, metric: Option<MetricKind>) -> Option<f64> {
    evaluate(ck, ds, Some(split), metric, &VocabOverrides::default())
        .ok()
        .and_then(|r| r.macro_value)
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (Some(m), Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()))
}

fn train_cmd(config: &Path, out: Option<PathBuf>, runs: usize, seed: Option<u64>) -> Result<()> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let mut cfg = Config::load(config)?;
    if let Some(o) = out {
        cfg.training.out = o;
    }
    if let Some(s) = seed {
        cfg.training.seed = s;
    }
    let prep = prepare(&cfg)?;
    for (row, reason) in &prep.report.dropped {
        log::warn!("{}: row {row} dropped: {reason}", cfg.data.path.display());
    }
    log::info!(
        "{} records, {} tasks, input width {}",
        prep.dataset.len(),
        prep.dataset.tasks(),
        prep.featurizer.width()
    );
    let base_seed = cfg.training.seed;
    let (base_out, base_log) = (cfg.training.out.clone(), cfg.training.log.clone());
    let mut results = Vec::new();
    let mut tests = Vec::new();
    for run in 0..runs {
        cfg.training.seed = base_seed + run as u64;
        cfg.training.out = run_path(&base_out, run, runs);
        cfg.training.log = base_log.as_ref().map(|p| run_path(p, run, runs));
        let mut log_file = cfg.training.log.as_deref().map(create).transpose()?;
        let outcome = train(
            &cfg,
            &prep,
            log_file.as_mut().map(|w| w as &mut dyn Write),
        )?;
        if let Some(w) = log_file.as_mut() {
            w.flush()?;
        }
        save_checkpoint(&outcome.checkpoint, &cfg.training.out)
            .with_context(|| format!("writing {}", cfg.training.out.display()))?;
        let metric = cfg.training.metric;
        let valid = split_score(&outcome.checkpoint, &prep.dataset, Split::Valid, metric);
        let test = split_score(&outcome.checkpoint, &prep.dataset, Split::Test, metric);
        tests.extend(test);
        log::info!(
            "run {run} (seed {}): best epoch {}, valid {valid:?}, test {test:?}",
            cfg.training.seed,
            outcome.checkpoint.header.epoch
        );
        results.push(json!({
            "run": run,
            "seed": cfg.training.seed,
            "checkpoint": cfg.training.out,
            "best_epoch": outcome.checkpoint.header.epoch,
            "split_counts": outcome.split.counts(),
            "valid": valid,
            "test": test,
        }));
    }
    let metric = outcome_metric(&cfg);
    let (mean, std) = mean_std(&tests);
    emit(
        &json!({
            "metric": metric.as_str(),
            "runs": results,
            "test_mean": mean,
            "test_std": std,
        }),
        None,
    )
}

fn outcome_metric(cfg: &Config) -> MetricKind {
    cfg.training.metric.unwrap_or(match cfg.data.task {
        TaskKind::Classification => MetricKind::RocAuc,
        TaskKind::Regression => MetricKind::Rmse,
    })
}

fn parse_split(s: &str) -> Result<Option<Split>> {
    if s == "all" {
        return Ok(None);
    }
    Split::parse(s)
        .map(Some)
        .with_context(|| format!("unknown split '{s}' (train, valid, test or all)"))
}

fn load_for(ckpt: &Path, data: &Path) -> Result<(Checkpoint, Dataset)> {
    let ck = load_checkpoint(ckpt).with_context(|| format!("reading {}", ckpt.display()))?;
    let (ds, report) = load_dataset(data, ck.model.config.task)?;
    for (row, reason) in &report.dropped {
        log::warn!("{}: row {row} dropped: {reason}", data.display());
    }
    Ok((ck, ds))
}

/// Featurizes `ds` the way the checkpoint was trained.
fn encode_for(ck: &Checkpoint, ds: &Dataset, overrides: &VocabOverrides) -> Result<(Featurizer, PipelineMeta, Encoded)> {
    let (f, meta) = featurizer_from_checkpoint(ck, overrides)?;
    let enc = encode_dataset(&f, ds, meta.descriptor_input(ck));
    Ok((f, meta, enc))
}

fn evaluate_cmd(
    ckpt: &Path,
    data: &Path,
    split: &str,
    metric: Option<&str>,
    overrides: &VocabOverrides,
    out: Option<&Path>,
) -> Result<()> {
    let split = parse_split(split)?;
    let metric = metric
        .map(|m| MetricKind::parse(m).with_context(|| format!("unknown metric '{m}'")))
        .transpose()?;
    let (ck, ds) = load_for(ckpt, data)?;
    let report = evaluate(&ck, &ds, split, metric, overrides)?;
    emit(&serde_json::to_value(&report)?, out)
}

fn attribute_cmd(
    ckpts: &[PathBuf],
    data: &Path,
    interp: &fgr::train::InterpretConfig,
    split: &str,
    seed: u64,
    out: &Path,
    summary: &Path,
) -> Result<()> {
    let methods = Method::parse_list(&interp.method)
        .with_context(|| format!("unknown method '{}'", interp.method))?;
    let split = parse_split(split)?;
    let params = AttributionParams {
        steps: interp.steps,
        samples: interp.samples,
        noise: interp.noise,
        task: interp.task,
        seed,
    };
    let mut labels = None;
    let mut per_method: Vec<Vec<Vec<f64>>> = vec![Vec::new(); methods.len()];
    for path in ckpts {
        let (ck, ds) = load_for(path, data)?;
        let (f, meta, enc) = encode_for(&ck, &ds, &VocabOverrides::default())?;
        let these = feature_labels(&f, enc.d.is_some());
        match &labels {
            None => labels = Some(these),
            Some(l) if *l != these => bail!("{} uses different features", path.display()),
            Some(_) => {}
        }
        let idx: Vec<usize> = match split {
            Some(s) => make_split(&ds, meta.split, meta.ratios, meta.split_seed).indices(s),
            None => (0..ds.len()).collect(),
        };
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| enc.input_row(i)).collect();
        let targets: Vec<Option<f64>> = idx
            .iter()
            .map(|&i| ds.records[i].targets.get(params.task).copied().flatten())
            .collect();
        let target = ModelTarget::new(&ck.model, params.task)?;
        for (m, acc) in methods.iter().zip(per_method.iter_mut()) {
            acc.push(attribute_rows(&target, &rows, &targets, ds.task, *m, &params)?);
        }
        log::info!("{}: {} rows attributed", path.display(), rows.len());
    }
    let labels = labels.expect("at least one checkpoint");
    let reports = methods
        .iter()
        .zip(&per_method)
        .map(|(m, folds)| AttributionReport::from_folds(*m, params.task, labels.clone(), folds))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = create(out)?;
    write_reports_tsv(&reports, &mut w)?;
    w.flush()?;
    let tops: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "method": r.method.as_str(),
                "folds": r.folds,
                "top": r.top(interp.top_k),
            })
        })
        .collect();
    emit(
        &json!({
            "config": {
                "checkpoints": ckpts,
                "data": data,
                "split": split.map_or("all", |s| s.as_str()),
                "interpret": interp,
                "seed": seed,
            },
            "reports": tops,
        }),
        Some(summary),
    )
}

fn analyze_cmd(
    ckpt: &Path,
    data: &Path,
    kind: ReportKind,
    top_s: usize,
    bandwidth: f64,
    out: Option<&Path>,
) -> Result<()> {
    let (ck, ds) = load_for(ckpt, data)?;
    let (_, _, enc) = encode_for(&ck, &ds, &VocabOverrides::default())?;
    let value = match kind {
        ReportKind::Alignment => {
            let r = alignment_report(&ck.model, &ds, &enc, top_s)?;
            json!({ "report": "alignment", "top_s": top_s, "result": r })
        }
        ReportKind::Uniformity => {
            let r = uniformity_report(&ck.model, &enc, bandwidth)?;
            json!({ "report": "uniformity", "result": r })
        }
    };
    emit(&value, out)
}

fn crossval_cmd(config: &Path, folds: Option<usize>, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = Config::load(config)?;
    if let Some(s) = seed {
        cfg.training.seed = s;
    }
    let k = folds.unwrap_or(cfg.training.folds);
    let prep = prepare(&cfg)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let cv = crossvalidate(&cfg, &prep, k)?;
    let mut rows = Vec::new();
    for fold in &cv.folds {
        let path = out_dir.join(format!("fold{}.ckpt", fold.fold));
        save_checkpoint(&fold.checkpoint, &path)
            .with_context(|| format!("writing {}", path.display()))?;
        rows.push(json!({
            "fold": fold.fold,
            "checkpoint": path,
            "value": fold.report.macro_value,
            "test_rows": fold.test_idx,
        }));
    }
    emit(
        &json!({
            "metric": cv.metric.as_str(),
            "mean": cv.mean,
            "std": cv.std,
            "folds": rows,
        }),
        Some(&out_dir.join("cv.json")),
    )?;
    log::info!("{}: {} ± {}", cv.metric.as_str(), cv.mean, cv.std);
    Ok(())
}
