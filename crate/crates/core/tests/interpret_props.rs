mod common;

use common::random_net;
use fgr::interpret::{
    feature_ablation, feature_permutation, gradient_shap, integrated_gradients, Differentiable,
    Linear, ModelTarget,
};
use fgr::nn::TaskKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ c_i x_i² + sin(w·x)`: smooth and far from linear.
struct Curved {
    c: Vec<f64>,
    w: Vec<f64>,
}

impl Differentiable for Curved {
    fn width(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let dot: f64 = self.w.iter().zip(x).map(|(w, x)| w * x).sum();
        self.c.iter().zip(x).map(|(c, x)| c * x * x).sum::<f64>() + dot.sin()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let dot: f64 = self.w.iter().zip(x).map(|(w, x)| w * x).sum();
        (0..x.len()).map(|i| 2.0 * self.c[i] * x[i] + self.w[i] * dot.cos()).collect()
    }
}

fn vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ig_exact_on_linear_for_any_steps(seed in any::<u64>(), steps in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(1..30);
        let f = Linear { w: vector(&mut rng, p, -3.0, 3.0), b: rng.random_range(-1.0..1.0) };
        let x = vector(&mut rng, p, -1.0, 2.0);
        let base = vector(&mut rng, p, -1.0, 1.0);
        let ig = integrated_gradients(&f, &x, &base, steps).unwrap();
        let ab = feature_ablation(&f, &x, &base).unwrap();
        for i in 0..p {
            let exact = f.w[i] * (x[i] - base[i]);
            prop_assert!((ig[i] - exact).abs() < 1e-12);
            prop_assert!((ab[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_at_the_baseline(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.random_range(1..20);
        let f = Curved { c: vector(&mut rng, p, -1.0, 1.0), w: vector(&mut rng, p, -1.0, 1.0) };
        let x = vector(&mut rng, p, -1.0, 1.0);
        let ig = integrated_gradients(&f, &x, &x, 16).unwrap();
        let shap = gradient_shap(&f, &x, std::slice::from_ref(&x), 0.0, 8, seed).unwrap();
        let ab = feature_ablation(&f, &x, &x).unwrap();
        for v in ig.iter().chain(&shap).chain(&ab) {
            prop_assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn model_target_is_the_affine_logit(seed in any::<u64>()) {
        let (m, _) = random_net(seed);
        let task = (seed as usize) % m.config.tasks;
        let t = ModelTarget::new(&m, task).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vector(&mut rng, t.width(), 0.0, 1.0)).collect();
        let batch = t.values(&xs);
        let g = t.gradient(&xs[0]);
        let f0 = t.value(&vec![0.0; t.width()]);
        for (x, b) in xs.iter().zip(&batch) {
            let v = t.value(x);
            prop_assert!((v - b).abs() < 1e-12);
            let lin: f64 = f0 + g.iter().zip(x).map(|(g, x)| g * x).sum::<f64>();
            prop_assert!((v - lin).abs() < 1e-9 * v.abs().max(1.0));
        }
    }
}

#[test]
fn completeness_gap_shrinks_with_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let steps = [4, 8, 16, 32, 64, 128];
    let mut mean_gap = [0.0; 6];
    for _ in 0..40 {
        let p = rng.random_range(2..12);
        let f = Curved {
            c: vector(&mut rng, p, -2.0, 2.0),
            w: vector(&mut rng, p, -2.0, 2.0),
        };
        let x = vector(&mut rng, p, -1.0, 1.0);
        let zero = vec![0.0; p];
        let delta = f.value(&x) - f.value(&zero);
        for (g, &m) in mean_gap.iter_mut().zip(&steps) {
            let sum: f64 = integrated_gradients(&f, &x, &zero, m).unwrap().iter().sum();
            *g += (sum - delta).abs() / 40.0;
        }
    }
    for w in mean_gap.windows(2) {
        assert!(w[1] < w[0], "{mean_gap:?}");
    }
    // right-Riemann error is first order
    assert!(mean_gap[5] < mean_gap[0] / 16.0, "{mean_gap:?}");
}

#[test]
fn gradient_shap_estimate_within_standard_error() {
    // for Σ c_i x_i² each term's expectation is c_i (x_i² − b_i²), and a
    // draw's variance is 4c²(x−b)²((x−b)²/12 + σ²)
    let c = vec![1.5, -0.7, 2.0, 0.3];
    let f = Curved {
        c: c.clone(),
        w: vec![0.0; 4],
    };
    let x = vec![1.0, -0.5, 0.8, 2.0];
    let b = vec![0.2, 0.1, -0.4, 0.0];
    let (noise, samples) = (0.3, 4096);
    let est = gradient_shap(&f, &x, std::slice::from_ref(&b), noise, samples, 5).unwrap();
    for i in 0..4 {
        let d = x[i] - b[i];
        let expected = c[i] * (x[i] * x[i] - b[i] * b[i]);
        let var = 4.0 * c[i] * c[i] * d * d * (d * d / 12.0 + noise * noise);
        let se = (var / samples as f64).sqrt();
        assert!((est[i] - expected).abs() < 4.0 * se, "{i}: {} vs {expected} (se {se})", est[i]);
    }
}

#[test]
fn permutation_is_thread_independent() {
    let f = Linear {
        w: vec![3.0, 0.0, -1.0, 0.5, 2.0],
        b: -0.4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..5).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect())
        .collect();
    let ys: Vec<Option<f64>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i % 7 != 0).then(|| f.value(r) + rng.random_range(-0.5..0.5)))
        .collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| feature_permutation(&f, &rows, &ys, TaskKind::Regression, 0, 9).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    // the zero-weight column never changes the output
    assert_eq!(one[1], 0.0);
    assert!(one[0] > one[3]);
}
