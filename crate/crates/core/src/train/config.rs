use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::encode::{EncodingKind, DEFAULT_DESCRIPTOR_LEN};
use crate::nn::{ModelConfig, TaskKind};
use super::metrics::MetricKind;
use super::split::SplitMethod;

/// Run configuration, read from TOML. Every field has a default; unknown
/// keys are rejected. Relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub vocab: VocabConfig,
    pub model: ModelSection,
    pub optimizer: OptimizerConfig,
    pub training: TrainingConfig,
    pub interpret: InterpretConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub task: TaskKind,
    pub split: SplitMethod,
    pub ratios: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: PathBuf::from("data.csv"),
            task: TaskKind::Classification,
            split: SplitMethod::Scaffold,
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    /// Curated SMARTS list; the bundled starter list when absent.
    pub fg: Option<PathBuf>,
    /// Saved MFG vocabulary; mined from the dataset's SMILES when absent.
    pub mfg: Option<PathBuf>,
    /// One of `fg`, `mfg`, `fgr`.
    pub encoding: String,
    pub mine_eta: u64,
    pub mine_mvs: usize,
    /// Skip FG lines that fail to parse instead of aborting.
    pub skip_invalid: bool,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            fg: None,
            mfg: None,
            encoding: "fgr".into(),
            mine_eta: 500,
            mine_mvs: 30000,
            skip_invalid: false,
        }
    }
}

impl VocabConfig {
    pub fn encoding_kind(&self) -> Result<EncodingKind, TrainError> {
        EncodingKind::parse(&self.encoding)
            .ok_or_else(|| TrainError::Config(format!("unknown encoding '{}'", self.encoding)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub latent: usize,
    pub tied: bool,
    pub alpha_t: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub eps: f64,
    pub use_descriptors: bool,
    pub descriptor_len: usize,
    pub descriptor_norm: DescriptorNorm,
}

/// How descriptor vectors are scaled before entering the head.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorNorm {
    /// Each molecule's vector divided by its own Euclidean norm.
    #[default]
    Row,
    /// Each descriptor column divided by its root-mean-square over the
    /// dataset, so columns of very different scales become comparable.
    Column,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            latent: m.latent,
            tied: m.tied,
            alpha_t: m.alpha_t,
            gamma: m.gamma,
            alpha: m.alpha,
            beta: m.beta,
            delta: m.delta,
            eps: m.eps,
            use_descriptors: m.use_descriptors,
            descriptor_len: DEFAULT_DESCRIPTOR_LEN,
            descriptor_norm: DescriptorNorm::Row,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, task: TaskKind, tasks: usize) -> ModelConfig {
        ModelConfig {
            latent: self.latent,
            tied: self.tied,
            alpha_t: self.alpha_t,
            gamma: self.gamma,
            alpha: self.alpha,
            beta: self.beta,
            delta: self.delta,
            eps: self.eps,
            task,
            tasks,
            use_descriptors: self.use_descriptors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Sam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub rho: f64,
    /// L2 penalty added to every gradient; 0 disables it.
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sam,
            lr: 0.05,
            momentum: 0.9,
            rho: 0.05,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Checkpoint path.
    pub out: PathBuf,
    /// Epoch log (JSON lines); no log file when absent.
    pub log: Option<PathBuf>,
    /// Add elapsed seconds to each log record. Off by default because it
    /// makes the log differ between otherwise identical runs.
    pub wall_time: bool,
    pub folds: usize,
    /// Model-selection and report metric; ROC-AUC or RMSE by task when
    /// absent.
    pub metric: Option<MetricKind>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 50,
            batch_size: 16,
            seed: 0,
            out: PathBuf::from("model.ckpt"),
            log: None,
            wall_time: false,
            folds: 5,
            metric: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretConfig {
    pub method: String,
    pub steps: usize,
    pub samples: usize,
    pub noise: f64,
    pub top_k: usize,
    pub task: usize,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        InterpretConfig {
            method: "integrated_gradients".into(),
            steps: 128,
            samples: 32,
            noise: 0.0,
            top_k: 20,
            task: 0,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, TrainError> {
        let c: Config = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Config, TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        let mut c = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.path);
        fix(&mut self.training.out);
        for p in [
            &mut self.vocab.fg,
            &mut self.vocab.mfg,
            &mut self.training.log,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        let r = self.data.ratios;
        if r.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("data.ratios must be three values in [0, 1] summing to 1");
        }
        self.vocab.encoding_kind()?;
        if self.vocab.mine_eta == 0 || self.vocab.mine_mvs == 0 {
            return bad("vocab.mine_eta and vocab.mine_mvs must be positive");
        }
        if self.model.latent == 0 {
            return bad("model.latent must be positive");
        }
        if !(self.optimizer.lr > 0.0) || !(0.0..1.0).contains(&self.optimizer.momentum) {
            return bad("optimizer.lr must be positive and momentum in [0, 1)");
        }
        if self.optimizer.rho < 0.0 || self.optimizer.weight_decay < 0.0 {
            return bad("optimizer.rho and optimizer.weight_decay must be non-negative");
        }
        if self.training.batch_size == 0 {
            return bad("training.batch_size must be positive");
        }
        if self.training.folds < 2 {
            return bad("training.folds must be at least 2");
        }
        if self.interpret.steps < 2 || self.interpret.samples == 0 {
            return bad("interpret.steps must be >= 2 and interpret.samples >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = Config::from_toml("[data]\npath = \"x.csv\"\n").unwrap();
        assert_eq!(c.data.path, PathBuf::from("x.csv"));
        assert_eq!(c.training.epochs, 50);
        assert_eq!(c.training.batch_size, 16);
        assert_eq!(c.model.latent, 512);
        assert_eq!(c.optimizer.kind, OptimizerKind::Sam);
        assert_eq!(c.model.descriptor_len, 211);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml("[data]\npth = \"x\"\n").is_err());
        assert!(Config::from_toml("[bogus]\n").is_err());
        assert!(Config::from_toml("[model]\nlatent = 0\n").is_err());
        assert!(Config::from_toml("[vocab]\nencoding = \"ecfp\"\n").is_err());
        assert!(Config::from_toml("[data]\nratios = [0.5, 0.5, 0.5]\n").is_err());
    }

    #[test]
    fn full_document() {
        let text = r#"
[data]
path = "toy.csv"
task = "regression"
split = "random"
ratios = [0.7, 0.2, 0.1]
[vocab]
fg = "fg.tsv"
encoding = "fg"
[model]
latent = 32
tied = true
use_descriptors = true
[optimizer]
kind = "sgd"
lr = 0.01
[training]
epochs = 3
log = "log.jsonl"
[interpret]
method = "feature_ablation"
"#;
        let mut c = Config::from_toml(text).unwrap();
        c.resolve_paths(Path::new("/base"));
        assert_eq!(c.data.task, TaskKind::Regression);
        assert_eq!(c.data.split, SplitMethod::Random);
        assert_eq!(c.vocab.fg, Some(PathBuf::from("/base/fg.tsv")));
        assert_eq!(c.training.log, Some(PathBuf::from("/base/log.jsonl")));
        assert_eq!(c.training.out, PathBuf::from("/base/model.ckpt"));
        assert!(c.model.tied);
        assert_eq!(c.optimizer.kind, OptimizerKind::Sgd);
    }
}
