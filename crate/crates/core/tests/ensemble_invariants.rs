use rpforest::projection::{ProjectionKind, ProjectionSpec};
use rpforest::{DataSet, DenseMatrix, Ensemble, EnsembleConfig, FeatureMatrix, Policy, RngStream, SparseMatrix, TreeConfig};

fn toy(seed: u64, n: usize, p: usize, d: usize) -> DataSet {
    let mut rng = RngStream::new(seed, 0);
    let x: Vec<f64> = (0..n * p).map(|_| rng.next_uniform()).collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..d)
                .filter(|&j| (x[i * p + j % p] > 0.5) ^ (rng.next_uniform() < 0.15))
                .map(|j| (j, 1.0))
                .collect()
        })
        .collect();
    DataSet::new(
        FeatureMatrix::Dense(DenseMatrix::from_vec(n, p, x).unwrap()),
        SparseMatrix::from_rows(d, &rows).unwrap(),
    )
    .unwrap()
}

/// The two subspace policies have the same expected model; over 200
/// repetitions their mean predictions must agree within 3 standard errors.
#[test]
fn average_models_agree() {
    let ds = toy(1, 60, 3, 6);
    let probes = DenseMatrix::from_rows(&[
        vec![0.1, 0.2, 0.3],
        vec![0.9, 0.1, 0.5],
        vec![0.5, 0.5, 0.5],
        vec![0.3, 0.8, 0.9],
        vec![0.7, 0.6, 0.2],
    ])
    .unwrap();
    let probes = FeatureMatrix::Dense(probes);
    let reps = 200;
    let run = |policy: Policy| -> Vec<Vec<f64>> {
        (0..reps)
            .map(|r| {
                let cfg = EnsembleConfig::new(5, ProjectionSpec::gaussian(1), policy, TreeConfig::random_forest(2), 1000 + r);
                Ensemble::fit(&ds.full_view(), &cfg)
                    .unwrap()
                    .predict(&probes)
                    .unwrap()
                    .into_values()
            })
            .collect()
    };
    let a = run(Policy::SharedSubspace);
    let b = run(Policy::PerTreeSubspace);
    let stats = |s: &[Vec<f64>], k: usize| {
        let mean = s.iter().map(|v| v[k]).sum::<f64>() / reps as f64;
        let var = s.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        (mean, var / reps as f64)
    };
    for k in 0..a[0].len() {
        let (ma, va) = stats(&a, k);
        let (mb, vb) = stats(&b, k);
        let se = (va + vb).sqrt();
        assert!((ma - mb).abs() <= 3.0 * se + 1e-12, "entry {k}: {ma} vs {mb} (se {se})");
    }
}

/// Permuting label columns before fitting only permutes the predictions when
/// the projection is label-agnostic.
#[test]
fn label_permutation_covariance() {
    let ds = toy(2, 50, 3, 5);
    let perm = [3, 0, 4, 1, 2];
    let rows: Vec<Vec<(usize, f64)>> = (0..50)
        .map(|i| {
            let mut r: Vec<(usize, f64)> = ds.labels().row(i).indices.iter().map(|&j| (perm[j], 1.0)).collect();
            r.sort_by_key(|e| e.0);
            r
        })
        .collect();
    let permuted = DataSet::new(ds.inputs().clone(), SparseMatrix::from_rows(5, &rows).unwrap()).unwrap();
    for (policy, spec) in [
        (Policy::NoProjection, ProjectionSpec::identity(5)),
        (Policy::SharedSubspace, ProjectionSpec::identity(5)),
    ] {
        let cfg = EnsembleConfig::new(4, spec, policy, TreeConfig::random_forest(2), 9);
        let a = Ensemble::fit(&ds.full_view(), &cfg).unwrap().predict(ds.inputs()).unwrap();
        let b = Ensemble::fit(&permuted.full_view(), &cfg).unwrap().predict(ds.inputs()).unwrap();
        for i in 0..50 {
            for j in 0..5 {
                assert!((a.get(i, j) - b.get(i, perm[j])).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn every_projection_kind_fits() {
    let ds = toy(3, 40, 3, 8);
    for kind in [
        ProjectionKind::Gaussian,
        ProjectionKind::Rademacher { s: 3.0 },
        ProjectionKind::HadamardSubsample,
        ProjectionKind::IdentitySubsample,
        ProjectionKind::Pca,
    ] {
        for policy in [Policy::SharedSubspace, Policy::PerTreeSubspace] {
            let cfg = EnsembleConfig::new(3, ProjectionSpec::new(kind, 4), policy, TreeConfig::extra_trees(2), 4);
            let e = Ensemble::fit(&ds.full_view(), &cfg).unwrap();
            assert_eq!(e.trees().len(), 3);
            let pred = e.predict(ds.inputs()).unwrap();
            assert!(pred.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn save_and_load() {
    let ds = toy(4, 30, 2, 4);
    let cfg = EnsembleConfig::new(3, ProjectionSpec::gaussian(2), Policy::PerTreeSubspace, TreeConfig::random_forest(1), 5);
    let e = Ensemble::fit(&ds.full_view(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    e.save(&path).unwrap();
    let back = Ensemble::load(&path).unwrap();
    assert_eq!(back.predict(ds.inputs()).unwrap(), e.predict(ds.inputs()).unwrap());
    assert_eq!(back.config(), e.config());
}
