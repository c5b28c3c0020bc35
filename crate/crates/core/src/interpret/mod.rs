//! Feature attributions: integrated gradients, gradient-SHAP, feature
//! ablation and feature permutation, with averaging across checkpoints.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::encode::{descriptor_names, Featurizer};
use crate::nn::{input_gradient, Model, NnError, TaskKind};
use crate::train::{rmse, roc_auc};

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("task {task} out of range for a model with {tasks} tasks")]
    TaskOutOfRange { task: usize, tasks: usize },
    #[error("input has {found} features, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("integrated gradients needs at least 2 steps")]
    TooFewSteps,
    #[error("gradient-SHAP needs at least one sample and one baseline")]
    NoSamples,
    #[error("permutation needs at least 2 labelled rows")]
    TooFewRows,
    #[error("the permutation metric is undefined on these labels")]
    DegenerateTask,
    #[error("reports disagree in shape or labels")]
    ShapeMismatch,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// A scalar function of the input with its gradient.
pub trait Differentiable: Sync {
    fn width(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// `value` at many points; implementations may evaluate them as a batch.
    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.value(x)).collect()
    }
}

/// `f(x) = w·x + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Differentiable for Linear {
    fn width(&self) -> usize {
        self.w.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.w.clone()
    }
}

/// The pre-activation output of one task of a trained model, as a function
/// of the multi-hot bits followed by the descriptors (when the model uses
/// them).
#[derive(Debug, Clone)]
pub struct ModelTarget<'a> {
    model: &'a Model,
    task: usize,
    grad: Vec<f64>,
}

impl<'a> ModelTarget<'a> {
    pub fn new(model: &'a Model, task: usize) -> Result<Self, InterpretError> {
        if task >= model.config.tasks {
            return Err(InterpretError::TaskOutOfRange {
                task,
                tasks: model.config.tasks,
            });
        }
        Ok(ModelTarget {
            model,
            task,
            grad: input_gradient(model, task).to_vec(),
        })
    }
}

impl Differentiable for ModelTarget<'_> {
    fn width(&self) -> usize {
        self.grad.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let p = self.model.input_width;
        let bits = Array2::from_shape_vec((1, p), x[..p].to_vec()).expect("width checked");
        let d = self
            .model
            .config
            .use_descriptors
            .then(|| Array2::from_shape_vec((1, x.len() - p), x[p..].to_vec()).expect("width"));
        self.model
            .logits(bits.view(), d.as_ref().map(|d| d.view()))
            .expect("shapes follow the model")[[0, self.task]]
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        // the logit is affine in the input
        self.grad.clone()
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        if xs.is_empty() {
            return Vec::new();
        }
        let p = self.model.input_width;
        let w = xs[0].len();
        let bits = Array2::from_shape_fn((xs.len(), p), |(r, c)| xs[r][c]);
        let d = self
            .model
            .config
            .use_descriptors
            .then(|| Array2::from_shape_fn((xs.len(), w - p), |(r, c)| xs[r][p + c]));
        self.model
            .logits(bits.view(), d.as_ref().map(|d| d.view()))
            .expect("shapes follow the model")
            .column(self.task)
            .to_vec()
    }
}

fn check_width(f: &dyn Differentiable, v: &[f64]) -> Result<(), InterpretError> {
    if v.len() != f.width() {
        return Err(InterpretError::WidthMismatch {
            expected: f.width(),
            found: v.len(),
        });
    }
    Ok(())
}

/// Right-Riemann path integral from `baseline` to `x`:
/// `(x_i − b_i) · (1/m) Σ_{s=1..m} ∂f/∂x_i(b + (s/m)(x − b))`.
pub fn integrated_gradients(
    f: &dyn Differentiable,
    x: &[f64],
    baseline: &[f64],
    steps: usize,
) -> Result<Vec<f64>, InterpretError> {
    check_width(f, x)?;
    check_width(f, baseline)?;
    if steps < 2 {
        return Err(InterpretError::TooFewSteps);
    }
    let mut acc = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        for ((p, xi), bi) in point.iter_mut().zip(x).zip(baseline) {
            *p = bi + t * (xi - bi);
        }
        for (a, g) in acc.iter_mut().zip(f.gradient(&point)) {
            *a += g;
        }
    }
    Ok(acc
        .iter()
        .zip(x.iter().zip(baseline))
        .map(|(a, (xi, bi))| (xi - bi) * a / steps as f64)
        .collect())
}

/// Mean over `samples` draws of `(x − b)·∇f(b + u(x − b) + ε)`, with `b`
/// drawn from `baselines`, `u ~ U(0, 1)` and `ε ~ N(0, noise²)` per
/// coordinate.
pub fn gradient_shap(
    f: &dyn Differentiable,
    x: &[f64],
    baselines: &[Vec<f64>],
    noise: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, InterpretError> {
    check_width(f, x)?;
    if samples == 0 || baselines.is_empty() {
        return Err(InterpretError::NoSamples);
    }
    for b in baselines {
        check_width(f, b)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for _ in 0..samples {
        let b = &baselines[rng.random_range(0..baselines.len())];
        let u: f64 = rng.random();
        for ((p, xi), bi) in point.iter_mut().zip(x).zip(b) {
            *p = bi + u * (xi - bi);
            if noise > 0.0 {
                *p += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        for ((a, g), (xi, bi)) in acc.iter_mut().zip(f.gradient(&point)).zip(x.iter().zip(b)) {
            *a += (xi - bi) * g;
        }
    }
    Ok(acc.into_iter().map(|a| a / samples as f64).collect())
}

/// `f(x) − f(x with feature i set to baseline_i)` for every i.
pub fn feature_ablation(
    f: &dyn Differentiable,
    x: &[f64],
    baseline: &[f64],
) -> Result<Vec<f64>, InterpretError> {
    check_width(f, x)?;
    check_width(f, baseline)?;
    let moved: Vec<usize> = (0..x.len()).filter(|&i| x[i] != baseline[i]).collect();
    let mut probes = Vec::with_capacity(moved.len() + 1);
    probes.push(x.to_vec());
    for &i in &moved {
        let mut p = x.to_vec();
        p[i] = baseline[i];
        probes.push(p);
    }
    let v = f.values(&probes);
    let mut out = vec![0.0; x.len()];
    for (k, &i) in moved.iter().enumerate() {
        out[i] = v[0] - v[k + 1];
    }
    Ok(out)
}

fn mix(seed: u64, task: usize, feature: usize) -> u64 {
    let mut z = seed ^ (task as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add((feature as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z ^ (z >> 31)
}

fn permutation_metric(kind: TaskKind, out: &[f64], truth: &[f64]) -> Option<f64> {
    match kind {
        TaskKind::Classification => {
            let labels: Vec<bool> = truth.iter().map(|&t| t == 1.0).collect();
            roc_auc(out, &labels)
        }
        TaskKind::Regression => Some(-rmse(out, truth)),
    }
}

/// Dataset-level importance: metric on the rows minus the metric after
/// shuffling column i across them. The metric is ROC-AUC for
/// classification and negative RMSE for regression. Rows whose label is
/// missing are ignored. Each column's shuffle is seeded from
/// `(seed, task, i)`, so results do not depend on evaluation order.
pub fn feature_permutation(
    f: &dyn Differentiable,
    rows: &[Vec<f64>],
    targets: &[Option<f64>],
    kind: TaskKind,
    task: usize,
    seed: u64,
) -> Result<Vec<f64>, InterpretError> {
    let (rows, truth): (Vec<Vec<f64>>, Vec<f64>) = rows
        .iter()
        .zip(targets)
        .filter_map(|(r, t)| t.map(|t| (r.clone(), t)))
        .unzip();
    if rows.len() < 2 {
        return Err(InterpretError::TooFewRows);
    }
    for r in &rows {
        check_width(f, r)?;
    }
    let out = f.values(&rows);
    let base = permutation_metric(kind, &out, &truth).ok_or(InterpretError::DegenerateTask)?;
    let width = f.width();
    Ok((0..width)
        .into_par_iter()
        .map(|i| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            if col.iter().all(|&v| v == col[0]) {
                return 0.0;
            }
            col.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, task, i)));
            let probes: Vec<Vec<f64>> = rows
                .iter()
                .zip(&col)
                .map(|(r, &v)| {
                    let mut p = r.clone();
                    p[i] = v;
                    p
                })
                .collect();
            let permuted = f.values(&probes);
            base - permutation_metric(kind, &permuted, &truth).expect("labels unchanged")
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    IntegratedGradients,
    GradientShap,
    FeatureAblation,
    FeaturePermutation,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::IntegratedGradients,
        Method::GradientShap,
        Method::FeatureAblation,
        Method::FeaturePermutation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::IntegratedGradients => "integrated_gradients",
            Method::GradientShap => "gradient_shap",
            Method::FeatureAblation => "feature_ablation",
            Method::FeaturePermutation => "feature_permutation",
        }
    }

    /// A method name, or `all`.
    pub fn parse_list(s: &str) -> Option<Vec<Method>> {
        if s == "all" {
            return Some(Method::ALL.to_vec());
        }
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .map(|m| vec![m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionParams {
    pub steps: usize,
    pub samples: usize,
    pub noise: f64,
    pub task: usize,
    pub seed: u64,
}

impl Default for AttributionParams {
    fn default() -> Self {
        AttributionParams {
            steps: 128,
            samples: 32,
            noise: 0.0,
            task: 0,
            seed: 0,
        }
    }
}

/// One score per feature for one model: per-record scores averaged over
/// `rows` (zero baseline), or the dataset-level permutation score.
pub fn attribute_rows(
    f: &dyn Differentiable,
    rows: &[Vec<f64>],
    targets: &[Option<f64>],
    kind: TaskKind,
    method: Method,
    params: &AttributionParams,
) -> Result<Vec<f64>, InterpretError> {
    if method == Method::FeaturePermutation {
        return feature_permutation(f, rows, targets, kind, params.task, params.seed);
    }
    let zero = vec![0.0; f.width()];
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .enumerate()
        .map(|(r, x)| match method {
            Method::IntegratedGradients => integrated_gradients(f, x, &zero, params.steps),
            Method::GradientShap => gradient_shap(
                f,
                x,
                std::slice::from_ref(&zero),
                params.noise,
                params.samples,
                mix(params.seed, params.task, r),
            ),
            Method::FeatureAblation => feature_ablation(f, x, &zero),
            Method::FeaturePermutation => unreachable!(),
        })
        .collect::<Result<_, _>>()?;
    let mut mean = vec![0.0; f.width()];
    for row in &per_row {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = per_row.len().max(1) as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureLabel {
    pub name: String,
    /// `FG`, `MFG` or `DESC`.
    pub kind: &'static str,
}

/// Labels for every model input: multi-hot bits, then descriptor slots.
pub fn feature_labels(f: &Featurizer, descriptors: bool) -> Vec<FeatureLabel> {
    let mut out: Vec<FeatureLabel> = f
        .labels()
        .into_iter()
        .map(|(name, kind)| FeatureLabel { name, kind })
        .collect();
    if descriptors {
        out.extend(
            descriptor_names(f.descriptor_len)
                .into_iter()
                .map(|name| FeatureLabel { name, kind: "DESC" }),
        );
    }
    out
}

/// Element-wise mean and population standard deviation across folds.
pub fn aggregate(folds: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), InterpretError> {
    let Some(first) = folds.first() else {
        return Err(InterpretError::ShapeMismatch);
    };
    if folds.iter().any(|f| f.len() != first.len()) {
        return Err(InterpretError::ShapeMismatch);
    }
    let n = folds.len() as f64;
    let mean: Vec<f64> = (0..first.len())
        .map(|i| folds.iter().map(|f| f[i]).sum::<f64>() / n)
        .collect();
    let std = (0..first.len())
        .map(|i| (folds.iter().map(|f| (f[i] - mean[i]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    Ok((mean, std))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionReport {
    pub method: Method,
    pub task: usize,
    pub folds: usize,
    pub labels: Vec<FeatureLabel>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl AttributionReport {
    pub fn from_folds(
        method: Method,
        task: usize,
        labels: Vec<FeatureLabel>,
        folds: &[Vec<f64>],
    ) -> Result<Self, InterpretError> {
        let (mean, std) = aggregate(folds)?;
        if labels.len() != mean.len() {
            return Err(InterpretError::ShapeMismatch);
        }
        Ok(AttributionReport {
            method,
            task,
            folds: folds.len(),
            labels,
            mean,
            std,
        })
    }

    /// Feature indices by descending |mean|, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.mean.len()).collect();
        idx.sort_by(|&a, &b| self.mean[b].abs().total_cmp(&self.mean[a].abs()).then(a.cmp(&b)));
        idx
    }

    pub fn top(&self, k: usize) -> Vec<RankedFeature> {
        self.ranking()
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(r, i)| RankedFeature {
                rank: r + 1,
                feature: self.labels[i].name.clone(),
                kind: self.labels[i].kind,
                mean: self.mean[i],
                std: self.std[i],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub feature: String,
    pub kind: &'static str,
    pub mean: f64,
    pub std: f64,
}

/// One line per feature and method, ranked within each method.
pub fn write_reports_tsv<W: Write>(reports: &[AttributionReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "method\tfeature\tkind\tmean\tstd\trank")?;
    for rep in reports {
        for r in rep.top(rep.mean.len()) {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                rep.method.as_str(),
                r.feature,
                r.kind,
                r.mean,
                r.std,
                r.rank
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> Linear {
        Linear {
            w: vec![2.0, -1.0, 0.5],
            b: 0.3,
        }
    }

    /// f(x) = Σ x_i² + x_0·x_1, a nonlinear check for the path integral.
    struct Quad;

    impl Differentiable for Quad {
        fn width(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0] * x[0] + x[1] * x[1] + x[0] * x[1]
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![2.0 * x[0] + x[1], 2.0 * x[1] + x[0]]
        }
    }

    #[test]
    fn ig_exact_on_linear() {
        let x = [1.0, 0.0, 1.0];
        for steps in [2, 3, 50] {
            let ig = integrated_gradients(&lin(), &x, &[0.0; 3], steps).unwrap();
            assert_eq!(ig, vec![2.0, 0.0, 0.5]);
        }
        assert!(integrated_gradients(&lin(), &x, &[0.0; 3], 1).is_err());
        assert_eq!(integrated_gradients(&lin(), &x, &x, 8).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn ig_converges_on_quadratic() {
        let x = [1.0, 2.0];
        let target = Quad.value(&x) - Quad.value(&[0.0, 0.0]);
        let gap = |m| {
            let s: f64 = integrated_gradients(&Quad, &x, &[0.0, 0.0], m).unwrap().iter().sum();
            (s - target).abs()
        };
        assert!(gap(256) < gap(16));
        assert!(gap(256) / target < 0.01);
    }

    #[test]
    fn ablation_matches_ig_on_linear() {
        let x = [0.4, 1.0, 0.0];
        let ab = feature_ablation(&lin(), &x, &[0.0; 3]).unwrap();
        let ig = integrated_gradients(&lin(), &x, &[0.0; 3], 7).unwrap();
        for (a, b) in ab.iter().zip(&ig) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shap_seeded_and_zero_at_baseline() {
        let x = vec![1.0, 1.0, 0.0];
        let z = vec![vec![0.0; 3]];
        let a = gradient_shap(&lin(), &x, &z, 0.1, 20, 7).unwrap();
        assert_eq!(a, gradient_shap(&lin(), &x, &z, 0.1, 20, 7).unwrap());
        assert_eq!(gradient_shap(&lin(), &z[0], &z, 0.0, 5, 1).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn permutation_constant_column_scores_zero() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![(i % 2) as f64, 1.0, (i / 4) as f64])
            .collect();
        let y: Vec<Option<f64>> = (0..8).map(|i| Some((i % 2) as f64)).collect();
        let s = feature_permutation(&lin(), &rows, &y, TaskKind::Classification, 0, 3).unwrap();
        assert_eq!(s[1], 0.0);
        assert!(s[0] > 0.0);
        assert_eq!(s, feature_permutation(&lin(), &rows, &y, TaskKind::Classification, 0, 3).unwrap());
    }

    #[test]
    fn aggregation() {
        let (m, s) = aggregate(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(m, vec![2.0, 2.0]);
        assert_eq!(s, vec![1.0, 1.0]);
        let (m, s) = aggregate(&vec![vec![0.5, -2.0]; 3]).unwrap();
        assert_eq!((m, s), (vec![0.5, -2.0], vec![0.0, 0.0]));
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn ranking_by_magnitude() {
        let labels = ["a", "b", "c"]
            .iter()
            .map(|n| FeatureLabel {
                name: n.to_string(),
                kind: "FG",
            })
            .collect();
        let r = AttributionReport::from_folds(
            Method::FeatureAblation,
            0,
            labels,
            &[vec![0.1, -0.9, 0.5]],
        )
        .unwrap();
        assert_eq!(r.ranking(), vec![1, 2, 0]);
        assert_eq!(r.top(1)[0].feature, "b");
    }
}
