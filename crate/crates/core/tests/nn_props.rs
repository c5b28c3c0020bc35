mod common;

use common::{max_gradient_error, random_net};
use fgr::nn::{
    bce_rows, compute_gradients, focal_reconstruction_loss, sam_step, sgd_step,
    supervised_loss, total_loss, ubc_loss, Model, ModelConfig, Sgd,
};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences_over_100_seeds() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (m, b) = random_net(seed);
        let e = max_gradient_error(&m, &b, 1e-5);
        assert!(e < 1e-5, "seed {seed}: {e}");
        worst = worst.max(e);
    }
    eprintln!("max relative error {worst:.3e}");
}

#[test]
fn encoder_matches_reference_matmul() {
    let m = Model::new(ModelConfig { latent: 5, ..ModelConfig::default() }, 3, 0, 42);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
    let z = m.forward_encoder(x.view()).unwrap();
    for i in 0..3 {
        for j in 0..5 {
            let mut s = m.params.b_e[j];
            for t in 0..3 {
                s += x[[i, t]] * m.params.w_e[[j, t]];
            }
            assert!((z[[i, j]] - s).abs() < 1e-12);
        }
    }
    let xh = m.forward_decoder(z.view()).unwrap();
    let w_d = m.params.w_d.as_ref().unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let mut a = m.params.b_d[j];
            for t in 0..5 {
                a += z[[i, t]] * w_d[[j, t]];
            }
            assert!((xh[[i, j]] - 1.0 / (1.0 + (-a).exp())).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn focal_without_focusing_is_bce(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p) = (rng.random_range(1..10), rng.random_range(1..30));
        let x = Array2::from_shape_fn((n, p), |_| f64::from(rng.random_bool(0.2) as u8));
        let h = Array2::from_shape_fn((n, p), |_| rng.random_range(0.001..0.999));
        let bce = bce_rows(x.view(), h.view(), 1e-7).sum() / n as f64;
        let focal = focal_reconstruction_loss(x.view(), h.view(), 1.0, 0.0, 1e-7);
        prop_assert!((focal - bce).abs() <= 1e-12 * bce.abs().max(1.0));
    }

    #[test]
    fn total_recombines(seed in 0u64..1_000_000) {
        let (m, b) = random_net(seed);
        let t = total_loss(&m, &b).unwrap();
        let f = m.forward(b.x.view(), b.d.as_ref().map(|d| d.view())).unwrap();
        let c = &m.config;
        let le = supervised_loss(f.logits.view(), b.y.view(), b.mask.view(), c.task, c.delta).unwrap_or(0.0);
        let lr = focal_reconstruction_loss(b.x.view(), f.x_hat.view(), c.alpha_t, c.gamma, c.eps);
        let lu = ubc_loss(f.z.view()).unwrap();
        prop_assert!((t.total - (le + c.alpha * lr + c.beta * lu)).abs() < 1e-12);
        prop_assert!(lu >= 0.0);
    }

    #[test]
    fn ubc_zero_on_decorrelated(seed in 0u64..1_000_000, l in 1usize..6) {
        // rows ±e_j pairs give a diagonal covariance
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = Array2::zeros((2 * l, l));
        for j in 0..l {
            let s: f64 = rng.random_range(0.1..5.0);
            z[[2 * j, j]] = s;
            z[[2 * j + 1, j]] = -s;
        }
        let shift = Array2::from_shape_fn((1, l), |_| rng.random_range(-3.0..3.0));
        let z = &z + &shift.index_axis(Axis(0), 0);
        prop_assert!(ubc_loss(z.view()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sam_without_radius_is_sgd(seed in 0u64..1_000_000) {
        let (m, b) = random_net(seed);
        let mut a = m.clone();
        let mut oa = Sgd::new(0.05, 0.9);
        let mut s = m.clone();
        let mut os = Sgd::new(0.05, 0.9);
        for _ in 0..3 {
            sam_step(&mut a, &b, &mut oa, 0.0).unwrap();
            let (_, g) = compute_gradients(&s, &b).unwrap();
            sgd_step(&mut s.params, &g, &mut os);
        }
        let bits = |m: &Model| -> Vec<u64> {
            m.params.blocks().iter().flat_map(|b| b.iter().map(|v| v.to_bits())).collect()
        };
        prop_assert_eq!(bits(&a), bits(&s));
    }

    #[test]
    fn classification_outputs_open_interval(seed in 0u64..1_000_000) {
        let (m, b) = random_net(seed & !2);
        let y = m.predict(b.x.view(), b.d.as_ref().map(|d| d.view())).unwrap();
        prop_assert!(y.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
