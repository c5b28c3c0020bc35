use super::{compute_gradients, Batch, LossParts, Model, NnError, Params};

/// SGD with classical momentum: `v ← μ·v + g + λ·θ`, `θ ← θ − lr·v`.
/// The decay λ is zero unless set.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Option<Params>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Sgd {
        assert!(lr > 0.0, "learning rate must be positive");
        assert!((0.0..1.0).contains(&momentum), "momentum must be in [0, 1)");
        Sgd {
            lr,
            momentum,
            weight_decay: 0.0,
            velocity: None,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Sgd {
        assert!(weight_decay >= 0.0, "weight decay must be non-negative");
        self.weight_decay = weight_decay;
        self
    }

    pub fn velocity(&self) -> Option<&Params> {
        self.velocity.as_ref()
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let v = self.velocity.get_or_insert_with(|| grads.zeros_like());
        let wd = self.weight_decay;
        for ((vb, gb), pb) in v.blocks_mut().into_iter().zip(grads.blocks()).zip(params.blocks()) {
            for ((vi, gi), pi) in vb.iter_mut().zip(gb).zip(pb) {
                *vi = if wd == 0.0 {
                    self.momentum * *vi + gi
                } else {
                    self.momentum * *vi + gi + wd * pi
                };
            }
        }
        params.axpy(-self.lr, v);
    }
}

pub fn sgd_step(params: &mut Params, grads: &Params, opt: &mut Sgd) {
    opt.step(params, grads);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamOutcome {
    /// Gradient taken at the perturbed point `θ + ρ·g/‖g‖`.
    Perturbed,
    /// `‖g‖ = 0`, so a plain SGD step was taken instead.
    ZeroGradientNorm,
}

/// The ascent point `θ + ρ·g/‖g‖`, or `None` when `‖g‖ = 0`.
pub fn sam_perturbation(params: &Params, grads: &Params, rho: f64) -> Option<Params> {
    let norm = grads.norm();
    if norm == 0.0 {
        return None;
    }
    let mut probe = params.clone();
    if rho != 0.0 {
        probe.axpy(rho / norm, grads);
    }
    Some(probe)
}

/// Sharpness-aware step. Returns the losses at the unperturbed point.
pub fn sam_step(
    model: &mut Model,
    batch: &Batch,
    opt: &mut Sgd,
    rho: f64,
) -> Result<(LossParts, SamOutcome), NnError> {
    let (parts, g) = compute_gradients(model, batch)?;
    let Some(probe_params) = sam_perturbation(&model.params, &g, rho) else {
        opt.step(&mut model.params, &g);
        return Ok((parts, SamOutcome::ZeroGradientNorm));
    };
    let probe = Model {
        params: probe_params,
        config: model.config.clone(),
        input_width: model.input_width,
        descriptor_width: model.descriptor_width,
    };
    let (_, g_sharp) = compute_gradients(&probe, batch)?;
    opt.step(&mut model.params, &g_sharp);
    Ok((parts, SamOutcome::Perturbed))
}
