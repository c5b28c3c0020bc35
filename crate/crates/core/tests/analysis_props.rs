use fgr::analysis::{davies_bouldin, project_2d, uniformity_profile};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct evaluation, written independently of the library's loops.
fn dbi_oracle(points: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let dim = points.ncols();
    let centroid = |c: usize| -> Vec<f64> {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        (0..dim)
            .map(|j| rows.iter().map(|&i| points[[i, j]]).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let cents: Vec<Vec<f64>> = ids.iter().map(|&c| centroid(c)).collect();
    let d = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let s: Vec<f64> = ids
        .iter()
        .zip(&cents)
        .map(|(&c, cen)| {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            rows.iter().map(|&i| d(&points.row(i).to_vec(), cen)).sum::<f64>() / rows.len() as f64
        })
        .collect();
    let k = ids.len();
    (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a)
                .map(|b| (s[a] + s[b]) / d(&cents[a], &cents[b]))
                .fold(f64::MIN, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

fn clustered(seed: u64, dim: usize) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..6);
    let n = rng.random_range(k..=100);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    // every cluster gets at least one point
    let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    let pts = Array2::from_shape_fn((n, dim), |(i, j)| centers[labels[i]][j] + rng.random_range(-2.0..2.0));
    (pts, labels)
}

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
fn rotation(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

fn apply(points: &Array2<f64>, q: &DMatrix<f64>, shift: &[f64]) -> Array2<f64> {
    let (n, dim) = points.dim();
    Array2::from_shape_fn((n, dim), |(i, j)| {
        (0..dim).map(|t| q[(j, t)] * points[[i, t]]).sum::<f64>() + shift[j]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dbi_matches_direct_formula(seed in any::<u64>(), dim in 1usize..6) {
        let (p, l) = clustered(seed, dim);
        let got = davies_bouldin(p.view(), &l).unwrap();
        let want = dbi_oracle(&p, &l);
        prop_assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn dbi_invariant_under_relabeling_and_isometry(seed in any::<u64>(), dim in 2usize..6) {
        let (p, l) = clustered(seed, dim);
        let base = davies_bouldin(p.view(), &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);

        let renamed: Vec<usize> = l.iter().map(|&c| 100 - 7 * c).collect();
        prop_assert!((davies_bouldin(p.view(), &renamed).unwrap() - base).abs() < 1e-12);

        let mut order: Vec<usize> = (0..l.len()).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let shuffled = p.select(ndarray::Axis(0), &order);
        let sl: Vec<usize> = order.iter().map(|&i| l[i]).collect();
        prop_assert!((davies_bouldin(shuffled.view(), &sl).unwrap() - base).abs() < 1e-9);

        let q = rotation(&mut rng, dim);
        let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-50.0..50.0)).collect();
        let moved = apply(&p, &q, &shift);
        prop_assert!((davies_bouldin(moved.view(), &l).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn projection_of_rank_two_data_is_isometric(seed in any::<u64>(), dim in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..40);
        let q = rotation(&mut rng, dim);
        let shift: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let flat = Array2::from_shape_fn((n, dim), |(_, j)| if j < 2 { rng.random_range(-3.0..3.0) } else { 0.0 });
        let pts = apply(&flat, &q, &shift);
        let pr = project_2d(pts.view()).unwrap();
        let d = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| -> f64 {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        for i in 0..n {
            for j in 0..i {
                let orig = d(pts.row(i), pts.row(j));
                let proj = d(pr.points.row(i), pr.points.row(j));
                prop_assert!((orig - proj).abs() < 1e-9 * orig.max(1.0), "{} {} {:?} n={}", orig, proj, pr.variance, n);
            }
        }
    }

    #[test]
    fn projected_variance_is_the_top_eigenvalues(seed in any::<u64>(), dim in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..60);
        let scale: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..4.0)).collect();
        let pts = Array2::from_shape_fn((n, dim), |(_, j)| scale[j] * rng.random_range(-1.0..1.0));
        let pr = project_2d(pts.view()).unwrap();

        let mean: Vec<f64> = (0..dim).map(|j| pts.column(j).sum() / n as f64).collect();
        let cov = DMatrix::from_fn(dim, dim, |a, b| {
            (0..n).map(|i| (pts[[i, a]] - mean[a]) * (pts[[i, b]] - mean[b])).sum::<f64>() / (n as f64 - 1.0)
        });
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for k in 0..2 {
            prop_assert!((pr.variance[k] - eig[k]).abs() < 1e-9 * eig[0].max(1.0), "{:?} vs {:?}", pr.variance, eig);
        }
    }

    #[test]
    fn density_is_a_circular_distribution(seed in any::<u64>(), bw in 0.05f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..80);
        let pts = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let prof = uniformity_profile(pts.view(), bw).unwrap();
        prop_assert!(prof.density.iter().all(|&d| d >= 0.0));
        prop_assert!((prof.integral() - 1.0).abs() < 1e-3, "{}", prof.integral());
    }
}

#[test]
fn uniform_angles_give_a_flat_profile() {
    let n = 720;
    let pts = Array2::from_shape_fn((n, 2), |(i, j)| {
        let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        if j == 0 { t.cos() } else { t.sin() }
    });
    let prof = uniformity_profile(pts.view(), 0.2).unwrap();
    assert!(prof.flatness() < 1.0 + 1e-6, "{}", prof.flatness());
    let expected = 1.0 / (2.0 * std::f64::consts::PI);
    assert!(prof.density.iter().all(|d| (d - expected).abs() < 1e-6));
}
