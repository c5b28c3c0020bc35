use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::Serialize;

use super::{Batch, Forward, Model, NnError, TaskKind};

/// Component losses of one evaluation; `total = supervised + α·reconstruction + β·ubc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossParts {
    pub supervised: f64,
    pub reconstruction: f64,
    pub ubc: f64,
    pub total: f64,
}

/// Per-row binary cross-entropy with the conventional negative sign, the
/// reconstruction clamped to `[eps, 1 − eps]`.
pub fn bce_rows(x: ArrayView2<f64>, x_hat: ArrayView2<f64>, eps: f64) -> Array1<f64> {
    x.rows()
        .into_iter()
        .zip(x_hat.rows())
        .map(|(xr, hr)| {
            -xr.iter()
                .zip(hr.iter())
                .map(|(&t, &p)| {
                    let p = p.clamp(eps, 1.0 - eps);
                    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                })
                .sum::<f64>()
        })
        .collect()
}

/// Batch mean of `α_t (1 − p_t)^γ · BCE` with `p_t = exp(−BCE)` per row.
pub fn focal_reconstruction_loss(
    x: ArrayView2<f64>,
    x_hat: ArrayView2<f64>,
    alpha_t: f64,
    gamma: f64,
    eps: f64,
) -> f64 {
    let b = bce_rows(x, x_hat, eps);
    if b.is_empty() {
        return 0.0;
    }
    b.iter().map(|&v| focal(v, alpha_t, gamma)).sum::<f64>() / b.len() as f64
}

pub(super) fn focal(bce: f64, alpha_t: f64, gamma: f64) -> f64 {
    // 1 − exp(−b) via expm1 keeps precision when b is small
    let one_minus_pt = -(-bce).exp_m1();
    alpha_t * one_minus_pt.powf(gamma) * bce
}

/// d focal / d bce.
pub(super) fn focal_slope(bce: f64, alpha_t: f64, gamma: f64) -> f64 {
    let pt = (-bce).exp();
    let q = -(-bce).exp_m1();
    let tail = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        gamma * q.powf(gamma - 1.0) * pt * bce
    };
    alpha_t * (q.powf(gamma) + tail)
}

/// Column-centered latents and their unbiased covariance.
pub(super) fn covariance(z: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = z.nrows();
    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
    let zc = &z - &mean;
    let cov = zc.t().dot(&zc) / (n as f64 - 1.0);
    (zc, cov)
}

/// Sum of squared off-diagonal entries of the latent covariance.
pub fn ubc_loss(z: ArrayView2<f64>) -> Result<f64, NnError> {
    if z.nrows() < 2 {
        return Err(NnError::BatchTooSmall(z.nrows()));
    }
    let (_, cov) = covariance(z);
    let mut s = 0.0;
    for ((i, j), v) in cov.indexed_iter() {
        if i != j {
            s += v * v;
        }
    }
    Ok(s)
}

/// Masked mean loss over present labels. `logits` are head pre-activations:
/// classification uses BCE written in logit form, `softplus(o) − y·o`, which
/// equals BCE on σ(o) without clamping; regression uses smooth L1 on `o − y`.
pub fn supervised_loss(
    logits: ArrayView2<f64>,
    y: ArrayView2<f64>,
    mask: ArrayView2<f64>,
    kind: TaskKind,
    delta: f64,
) -> Result<f64, NnError> {
    if logits.dim() != y.dim() || y.dim() != mask.dim() {
        return Err(NnError::ShapeMismatch(format!(
            "logits {:?}, targets {:?}, mask {:?}",
            logits.dim(),
            y.dim(),
            mask.dim()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&o, &t), &m) in logits.iter().zip(y.iter()).zip(mask.iter()) {
        if m == 0.0 {
            continue;
        }
        count += 1;
        sum += match kind {
            TaskKind::Classification => softplus(o) - t * o,
            TaskKind::Regression => smooth_l1(o - t, delta),
        };
    }
    if count == 0 {
        return Err(NnError::AllMasked);
    }
    Ok(sum / count as f64)
}

pub(super) fn softplus(o: f64) -> f64 {
    o.max(0.0) + (-o.abs()).exp().ln_1p()
}

pub(super) fn smooth_l1(e: f64, delta: f64) -> f64 {
    if e.abs() < delta {
        0.5 * e * e / delta
    } else {
        e.abs() - 0.5 * delta
    }
}

/// Total loss for a batch. A batch with every label masked contributes
/// `supervised = 0` (reconstruction-only training), and a single-row batch
/// contributes `ubc = 0` since its covariance is undefined.
pub fn total_loss(model: &Model, batch: &Batch) -> Result<LossParts, NnError> {
    let f = model.forward(batch.x.view(), batch.d.as_ref().map(|d| d.view()))?;
    parts_from_forward(model, batch, &f)
}

pub(super) fn parts_from_forward(
    model: &Model,
    batch: &Batch,
    f: &Forward,
) -> Result<LossParts, NnError> {
    let c = &model.config;
    let supervised = match supervised_loss(
        f.logits.view(),
        batch.y.view(),
        batch.mask.view(),
        c.task,
        c.delta,
    ) {
        Err(NnError::AllMasked) => 0.0,
        r => r?,
    };
    let reconstruction =
        focal_reconstruction_loss(batch.x.view(), f.x_hat.view(), c.alpha_t, c.gamma, c.eps);
    let ubc = match ubc_loss(f.z.view()) {
        Err(NnError::BatchTooSmall(_)) => 0.0,
        r => r?,
    };
    Ok(LossParts {
        supervised,
        reconstruction,
        ubc,
        total: supervised + c.alpha * reconstruction + c.beta * ubc,
    })
}
