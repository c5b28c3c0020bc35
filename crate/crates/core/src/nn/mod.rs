//! The autoencoder with a prediction head, its losses and exact gradients,
//! and the SGD/SAM optimizers. All arithmetic is f64.

mod checkpoint;
mod grad;
mod loss;
mod optim;

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
    CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use grad::{compute_gradients, input_gradient};
pub use loss::{
    bce_rows, focal_reconstruction_loss, supervised_loss, total_loss, ubc_loss, LossParts,
};
pub use optim::{sam_perturbation, sam_step, sgd_step, SamOutcome, Sgd};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch of {0} rows is too small for a covariance")]
    BatchTooSmall(usize),
    #[error("every label in the batch is masked")]
    AllMasked,
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("vocabulary fingerprint mismatch for {which}: checkpoint {expected}, supplied {found}")]
    VocabMismatch {
        which: &'static str,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub latent: usize,
    pub tied: bool,
    pub alpha_t: f64,
    pub gamma: f64,
    /// Weight of the reconstruction term in the total loss.
    pub alpha: f64,
    /// Weight of the decorrelation term in the total loss.
    pub beta: f64,
    /// Smooth-L1 transition point.
    pub delta: f64,
    /// Probability clamp for the reconstruction BCE.
    pub eps: f64,
    pub task: TaskKind,
    pub tasks: usize,
    pub use_descriptors: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            latent: 512,
            tied: false,
            alpha_t: 0.25,
            gamma: 2.0,
            alpha: 0.1,
            beta: 0.01,
            delta: 1.0,
            eps: 1e-7,
            task: TaskKind::Classification,
            tasks: 1,
            use_descriptors: false,
        }
    }
}

/// Trainable parameters. `w_e` is l×p, `w_d` p×l (absent when tied),
/// `w_f` k×m.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub w_e: Array2<f64>,
    pub b_e: Array1<f64>,
    pub w_d: Option<Array2<f64>>,
    pub b_d: Array1<f64>,
    pub w_f: Array2<f64>,
    pub b_f: Array1<f64>,
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            w_e: Array2::zeros(self.w_e.raw_dim()),
            b_e: Array1::zeros(self.b_e.len()),
            w_d: self.w_d.as_ref().map(|w| Array2::zeros(w.raw_dim())),
            b_d: Array1::zeros(self.b_d.len()),
            w_f: Array2::zeros(self.w_f.raw_dim()),
            b_f: Array1::zeros(self.b_f.len()),
        }
    }

    /// Names of the blocks returned by [`Params::blocks`], in order.
    pub fn block_names(&self) -> Vec<&'static str> {
        let mut n = vec!["w_e", "b_e"];
        if self.w_d.is_some() {
            n.push("w_d");
        }
        n.extend(["b_d", "w_f", "b_f"]);
        n
    }

    /// Parameter blocks in declaration order, each row-major.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = vec![slice(self.w_e.as_slice()), slice(self.b_e.as_slice())];
        if let Some(w) = &self.w_d {
            out.push(slice(w.as_slice()));
        }
        out.push(slice(self.b_d.as_slice()));
        out.push(slice(self.w_f.as_slice()));
        out.push(slice(self.b_f.as_slice()));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.w_e.as_slice_mut().expect("standard layout"),
            self.b_e.as_slice_mut().expect("standard layout"),
        ];
        if let Some(w) = &mut self.w_d {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        out.push(self.b_d.as_slice_mut().expect("standard layout"));
        out.push(self.w_f.as_slice_mut().expect("standard layout"));
        out.push(self.b_f.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Euclidean norm over all blocks, summed in block order.
    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Params) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.block_names()
            .into_iter()
            .zip(self.blocks())
            .find(|(_, b)| b.iter().any(|v| !v.is_finite()))
            .map(|(n, _)| n)
    }
}

fn slice(s: Option<&[f64]>) -> &[f64] {
    s.expect("standard layout")
}

/// One minibatch. `mask` is 1 where a label is present.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub d: Option<Array2<f64>>,
    pub y: Array2<f64>,
    pub mask: Array2<f64>,
}

impl Batch {
    pub fn new(
        x: Array2<f64>,
        d: Option<Array2<f64>>,
        y: Array2<f64>,
        mask: Array2<f64>,
    ) -> Result<Batch, NnError> {
        let n = x.nrows();
        if y.nrows() != n || mask.raw_dim() != y.raw_dim() {
            return Err(NnError::ShapeMismatch(format!(
                "x has {n} rows, y {:?}, mask {:?}",
                y.dim(),
                mask.dim()
            )));
        }
        if let Some(d) = &d {
            if d.nrows() != n {
                return Err(NnError::ShapeMismatch(format!(
                    "descriptor rows {} != {n}",
                    d.nrows()
                )));
            }
        }
        Ok(Batch { x, d, y, mask })
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
    /// Multi-hot width p.
    pub input_width: usize,
    /// Descriptor width; only used when `config.use_descriptors`.
    pub descriptor_width: usize,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub z: Array2<f64>,
    pub x_hat: Array2<f64>,
    /// Head input: `z`, or `z` followed by descriptors.
    pub h: Array2<f64>,
    /// Head pre-activations.
    pub logits: Array2<f64>,
    pub y_hat: Array2<f64>,
}

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-s..s))
}

impl Model {
    /// Glorot-uniform weights drawn in a fixed order from `seed`; zero biases.
    pub fn new(config: ModelConfig, input_width: usize, descriptor_width: usize, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, p, k) = (config.latent, input_width, config.tasks);
        let m = l + if config.use_descriptors { descriptor_width } else { 0 };
        let w_e = glorot(&mut rng, l, p);
        let w_d = (!config.tied).then(|| glorot(&mut rng, p, l));
        let w_f = glorot(&mut rng, k, m);
        Model {
            params: Params {
                w_e,
                b_e: Array1::zeros(l),
                w_d,
                b_d: Array1::zeros(p),
                w_f,
                b_f: Array1::zeros(k),
            },
            config,
            input_width,
            descriptor_width,
        }
    }

    pub fn head_width(&self) -> usize {
        self.config.latent
            + if self.config.use_descriptors {
                self.descriptor_width
            } else {
                0
            }
    }

    /// `Z = X·W_eᵀ + b_e`, no activation.
    pub fn forward_encoder(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.input_width {
            return Err(NnError::ShapeMismatch(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_width
            )));
        }
        Ok(x.dot(&self.params.w_e.t()) + &self.params.b_e)
    }

    /// `X̂ = σ(Z·W_dᵀ + b_d)`; with tied weights `W_d` is `W_eᵀ`.
    pub fn forward_decoder(&self, z: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        if z.ncols() != self.config.latent {
            return Err(NnError::ShapeMismatch(format!(
                "latent has {} columns, model expects {}",
                z.ncols(),
                self.config.latent
            )));
        }
        let a = match &self.params.w_d {
            Some(w_d) => z.dot(&w_d.t()),
            None => z.dot(&self.params.w_e),
        };
        Ok((a + &self.params.b_d).mapv(sigmoid))
    }

    /// Head input, concatenating descriptors when the model uses them.
    pub fn head_input(
        &self,
        z: ArrayView2<f64>,
        d: Option<ArrayView2<f64>>,
    ) -> Result<Array2<f64>, NnError> {
        if !self.config.use_descriptors {
            return Ok(z.to_owned());
        }
        let d = d.ok_or_else(|| NnError::ShapeMismatch("descriptors required".into()))?;
        if d.ncols() != self.descriptor_width || d.nrows() != z.nrows() {
            return Err(NnError::ShapeMismatch(format!(
                "descriptors {:?}, expected ({}, {})",
                d.dim(),
                z.nrows(),
                self.descriptor_width
            )));
        }
        Ok(concatenate(Axis(1), &[z, d]).expect("row counts checked"))
    }

    /// Returns `(logits, outputs)`; outputs are σ(logits) for
    /// classification and the logits themselves for regression.
    pub fn predict_head(
        &self,
        z: ArrayView2<f64>,
        d: Option<ArrayView2<f64>>,
    ) -> Result<(Array2<f64>, Array2<f64>), NnError> {
        let h = self.head_input(z, d)?;
        let logits = h.dot(&self.params.w_f.t()) + &self.params.b_f;
        let out = self.activate(&logits);
        Ok((logits, out))
    }

    fn activate(&self, logits: &Array2<f64>) -> Array2<f64> {
        match self.config.task {
            TaskKind::Classification => logits.mapv(sigmoid),
            TaskKind::Regression => logits.clone(),
        }
    }

    pub fn forward(
        &self,
        x: ArrayView2<f64>,
        d: Option<ArrayView2<f64>>,
    ) -> Result<Forward, NnError> {
        let z = self.forward_encoder(x)?;
        let x_hat = self.forward_decoder(z.view())?;
        let h = self.head_input(z.view(), d)?;
        let logits = h.dot(&self.params.w_f.t()) + &self.params.b_f;
        let y_hat = self.activate(&logits);
        Ok(Forward {
            z,
            x_hat,
            h,
            logits,
            y_hat,
        })
    }

    /// Head pre-activations for each row; the quantity attributions explain.
    pub fn logits(
        &self,
        x: ArrayView2<f64>,
        d: Option<ArrayView2<f64>>,
    ) -> Result<Array2<f64>, NnError> {
        let z = self.forward_encoder(x)?;
        Ok(self.predict_head(z.view(), d)?.0)
    }

    pub fn predict(
        &self,
        x: ArrayView2<f64>,
        d: Option<ArrayView2<f64>>,
    ) -> Result<Array2<f64>, NnError> {
        let z = self.forward_encoder(x)?;
        Ok(self.predict_head(z.view(), d)?.1)
    }
}
