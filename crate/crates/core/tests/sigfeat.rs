use canoa::sigfeat::*;
use canoa::SampledTrace;
use nalgebra::{DMatrix, SymmetricEigen as NaEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    // correlated columns with decaying scale
    (0..n)
        .map(|_| {
            let base: Vec<f64> = (0..d).map(|_| z.sample(&mut rng)).collect();
            (0..d)
                .map(|j| base[j] * (d - j) as f64 + 0.5 * base[(j + 1) % d])
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_holds(x in prop::collection::vec(-10.0f64..10.0, 2..300)) {
        let plan = SpectrumPlan::<f64>::new(x.len());
        let spec = plan.transform(&x);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-6 * time.max(1e-12));
    }

    #[test]
    fn tukey_endpoints_are_zero(len in 2usize..2000, alpha in 0.001f64..=1.0) {
        let w = tukey_window::<f64>(len, TukeyParams::new(alpha).unwrap());
        prop_assert_eq!(w[0], 0.0);
        prop_assert_eq!(w[len - 1], 0.0);
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for i in 0..len {
            prop_assert!((w[i] - w[len - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_affine_invariant(a in 0.1f64..100.0, b in -50.0f64..50.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, 1.0).unwrap();
        let raw: Vec<f64> = (0..2000).map(|_| z.sample(&mut rng)).collect();
        let t1 = SampledTrace::new(raw.clone(), 1e6, 0.0);
        let t2 = SampledTrace::new(raw.iter().map(|v| a * v + b).collect(), 1e6, 0.0);
        let s1 = estimate_norm_stats(&t1, 2000).unwrap();
        let s2 = estimate_norm_stats(&t2, 2000).unwrap();
        for (x, y) in t1.samples.iter().zip(&t2.samples) {
            prop_assert!((s1.apply(*x) - s2.apply(*y)).abs() < 1e-9);
        }
    }
}

#[test]
fn tukey_alpha_zero_is_rectangular() {
    let w = tukey_window::<f64>(16, TukeyParams::new(0.0).unwrap());
    assert!(w.iter().all(|&v| v == 1.0));
}

#[test]
fn normalization_recovers_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = Normal::new(5.0, 2.0).unwrap();
    let t = SampledTrace::new((0..200_000).map(|_| d.sample(&mut rng)).collect::<Vec<f64>>(), 1e6, 0.0);
    let s = estimate_norm_stats(&t, 200_000).unwrap();
    assert!((s.mean - 5.0).abs() < 0.02);
    assert!((s.std - 2.0).abs() < 0.02);
    let z: Vec<f64> = t.samples.iter().map(|&v| s.apply(v)).collect();
    let m = z.iter().sum::<f64>() / z.len() as f64;
    let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
    assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
}

#[test]
fn eigen_agrees_with_dense_oracle() {
    for (n, seed) in [(3usize, 1u64), (10, 2), (40, 3)] {
        let rows = gaussian_rows(4 * n, n, seed);
        let (_, cov) = covariance(&rows);
        let ours = symmetric_eigen(&cov, n);
        let mut oracle: Vec<f64> = NaEigen::new(DMatrix::from_row_slice(n, n, &cov))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.values.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-6 * oracle[0], "n={n}: {a} vs {b}");
        }
        // A v = λ v
        for (lambda, v) in ours.values.iter().zip(&ours.vectors) {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| cov[i * n + j] * v[j]).sum();
                assert!((av - lambda * v[i]).abs() < 1e-6 * oracle[0]);
            }
        }
    }
}

#[test]
fn pca_is_orthonormal_and_decorrelating() {
    let d = 30;
    let rows = gaussian_rows(500, d, 7);
    let basis = fit_pca(&rows, 12).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            let dot: f64 = basis.components[i]
                .iter()
                .zip(&basis.components[j])
                .map(|(a, b)| a * b)
                .sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-9, "<v{i}, v{j}> = {dot}");
        }
    }
    let proj: Vec<Vec<f64>> = rows.iter().map(|r| basis.project(r).unwrap()).collect();
    let (mean, cov) = covariance(&proj);
    assert!(mean.iter().all(|m| m.abs() < 1e-9));
    for i in 0..12 {
        for j in 0..12 {
            let c = cov[i * 12 + j];
            if i == j {
                assert!((c - basis.explained_variance[i]).abs() < 1e-6 * basis.explained_variance[0]);
            } else {
                assert!(c.abs() < 1e-6 * basis.explained_variance[0]);
            }
        }
    }
    for w in basis.explained_variance.windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn pca_agrees_with_dense_oracle() {
    let d = 20;
    let rows = gaussian_rows(300, d, 9);
    let basis = fit_pca(&rows, 5).unwrap();
    let (_, cov) = covariance(&rows);
    let eig = NaEigen::new(DMatrix::from_row_slice(d, d, &cov));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for (k, &o) in order.iter().take(5).enumerate() {
        assert!((basis.explained_variance[k] - eig.eigenvalues[o]).abs() < 1e-6 * eig.eigenvalues[order[0]]);
        let v = eig.eigenvectors.column(o);
        let dot: f64 = (0..d).map(|i| v[i] * basis.components[k][i]).sum();
        assert!(
            (dot.abs() - 1.0).abs() < 1e-6,
            "component {k}: |<ours, oracle>| = {}",
            dot.abs()
        );
    }
}

#[test]
fn reconstruction_error_does_not_grow_with_m() {
    let rows = gaussian_rows(200, 16, 4);
    let full = fit_pca(&rows, 15).unwrap();
    let mut last = f64::INFINITY;
    for m in 1..=15 {
        let b = full.truncated(m);
        let err: f64 = rows
            .iter()
            .map(|r| {
                let rec = b.reconstruct(&b.project(r).unwrap());
                r.iter().zip(&rec).map(|(a, c)| (a - c).powi(2)).sum::<f64>()
            })
            .sum();
        assert!(err <= last + 1e-9, "m={m}: {err} > {last}");
        last = err;
    }
}

#[test]
fn pca_rejects_rank_deficient_requests() {
    let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
    assert!(matches!(
        fit_pca(&rows, 2),
        Err(SigError::RankDeficient {
            requested: 2,
            available: 1
        })
    ));
}

#[test]
fn f32_pipeline_matches_f64() {
    let rows = gaussian_rows(120, 8, 5);
    let rows32: Vec<Vec<f32>> = rows.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    let b64 = fit_pca(&rows, 3).unwrap();
    let b32 = fit_pca(&rows32, 3).unwrap();
    for k in 0..3 {
        let rel = (b32.explained_variance[k] as f64 - b64.explained_variance[k]).abs() / b64.explained_variance[k];
        assert!(rel < 1e-3);
    }
    let seg: Vec<f32> = (0..64).map(|i| (i as f32 * 0.3).sin()).collect();
    let s32 = spectrum(&seg);
    let s64 = spectrum(&seg.iter().map(|&v| v as f64).collect::<Vec<_>>());
    for (a, b) in s32.iter().zip(&s64) {
        assert!((*a as f64 - b).abs() < 1e-4);
    }
}
