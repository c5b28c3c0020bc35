use ndarray::{s, Array1, Array2, Axis};

use super::loss::{covariance, focal_slope, parts_from_forward};
use super::{sigmoid, Batch, LossParts, Model, NnError, Params, TaskKind};

/// Loss components and the exact gradient of the total loss with respect to
/// every parameter block.
pub fn compute_gradients(model: &Model, batch: &Batch) -> Result<(LossParts, Params), NnError> {
    let c = &model.config;
    let p = &model.params;
    let n = batch.rows();
    let f = model.forward(batch.x.view(), batch.d.as_ref().map(|d| d.view()))?;
    let parts = parts_from_forward(model, batch, &f)?;
    let mut g = p.zeros_like();

    // supervised head
    let labelled = batch.mask.iter().filter(|&&m| m != 0.0).count();
    let mut d_logits = Array2::<f64>::zeros(f.logits.raw_dim());
    if labelled > 0 {
        let scale = 1.0 / labelled as f64;
        for (((d, &o), &t), &m) in d_logits
            .iter_mut()
            .zip(f.logits.iter())
            .zip(batch.y.iter())
            .zip(batch.mask.iter())
        {
            if m == 0.0 {
                continue;
            }
            *d = scale
                * match c.task {
                    TaskKind::Classification => sigmoid(o) - t,
                    TaskKind::Regression => {
                        let e = o - t;
                        if e.abs() < c.delta {
                            e / c.delta
                        } else {
                            e.signum()
                        }
                    }
                };
        }
    }
    g.w_f = d_logits.t().dot(&f.h);
    g.b_f = d_logits.sum_axis(Axis(0));
    let d_h = d_logits.dot(&p.w_f);
    let mut d_z = d_h.slice(s![.., ..c.latent]).to_owned();

    // reconstruction through the focal weighting and the decoder sigmoid
    if c.alpha != 0.0 && n > 0 {
        let bce = super::bce_rows(batch.x.view(), f.x_hat.view(), c.eps);
        let mut d_a = f.x_hat.clone();
        for (i, mut row) in d_a.rows_mut().into_iter().enumerate() {
            let w = c.alpha * focal_slope(bce[i], c.alpha_t, c.gamma) / n as f64;
            for (j, v) in row.iter_mut().enumerate() {
                let q = *v;
                *v = if q > c.eps && q < 1.0 - c.eps {
                    w * (q - batch.x[[i, j]])
                } else {
                    0.0
                };
            }
        }
        g.b_d = d_a.sum_axis(Axis(0));
        match &p.w_d {
            Some(w_d) => {
                g.w_d = Some(d_a.t().dot(&f.z));
                d_z += &d_a.dot(w_d);
            }
            None => {
                // tied: A = Z·W_e, so W_e also collects the decoder path
                g.w_e = f.z.t().dot(&d_a);
                d_z += &d_a.dot(&p.w_e.t());
            }
        }
    }

    // decorrelation: d/dZ Σ_{i≠j} C_ij² = 4·Zc·C_off / (n − 1)
    if c.beta != 0.0 && n >= 2 {
        let (zc, mut cov) = covariance(f.z.view());
        cov.diag_mut().fill(0.0);
        let scale = c.beta * 4.0 / (n as f64 - 1.0);
        d_z += &(zc.dot(&cov) * scale);
    }

    g.w_e += &d_z.t().dot(&batch.x);
    g.b_e = d_z.sum_axis(Axis(0));

    // products against transposed views may come back column-major
    g.w_e = standard(g.w_e);
    g.w_d = g.w_d.map(standard);
    g.w_f = standard(g.w_f);

    if let Some(block) = g.first_non_finite() {
        return Err(NnError::NonFiniteGradient(block));
    }
    Ok((parts, g))
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Gradient of the task logit with respect to the model input, the
/// multi-hot bits followed by descriptors when the model uses them. The
/// logit is affine in the input, so this does not depend on the point.
pub fn input_gradient(model: &Model, task: usize) -> Array1<f64> {
    let p = &model.params;
    let l = model.config.latent;
    let w = p.w_f.row(task);
    let gx = w.slice(s![..l]).dot(&p.w_e);
    let mut out = gx.to_vec();
    if model.config.use_descriptors {
        out.extend(w.slice(s![l..]).iter());
    }
    Array1::from(out)
}
