use proptest::prelude::*;
use rpforest::projection::{distortion_check, generate, project};
use rpforest::tree::{grow, variance_sum, variance_sum_pairwise, Node};
use rpforest::{DataSet, DenseMatrix, FeatureMatrix, ProjectionSpec, RngStream, SparseMatrix, TreeConfig};

fn random_dense(n: usize, d: usize, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.next_gaussian()).collect()).unwrap()
}

fn random_labels(n: usize, d: usize, density: f64, rng: &mut RngStream) -> SparseMatrix {
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|_| (0..d).filter(|_| rng.next_uniform() < density).map(|j| (j, 1.0)).collect())
        .collect();
    SparseMatrix::from_rows(d, &rows).unwrap()
}

fn random_dataset(n: usize, p: usize, d: usize, rng: &mut RngStream) -> DataSet {
    let x = random_dense(n, p, rng);
    DataSet::new(FeatureMatrix::Dense(x), random_labels(n, d, 0.3, rng)).unwrap()
}

#[test]
fn centred_and_pairwise_variance_agree() {
    let mut rng = RngStream::new(1, 0);
    for _ in 0..500 {
        let n = 1 + rng.next_index(30);
        let d = 1 + rng.next_index(20);
        let y = random_dense(n, d, &mut rng);
        let a = variance_sum(&y).unwrap();
        let b = variance_sum_pairwise(&y).unwrap();
        assert!((a - b).abs() <= 1e-10 * b.max(1.0), "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn variance_scales_quadratically(seed in any::<u64>(), c in -10.0f64..10.0) {
        let mut rng = RngStream::new(seed, 0);
        let y = random_dense(12, 5, &mut rng);
        let scaled = DenseMatrix::from_vec(12, 5, y.values().iter().map(|v| c * v).collect()).unwrap();
        let base = variance_sum(&y).unwrap();
        let got = variance_sum(&scaled).unwrap();
        prop_assert!((got - c * c * base).abs() <= 1e-12 * (c * c * base).max(1.0));
    }

    #[test]
    fn training_samples_route_to_their_leaves(seed in any::<u64>(), bootstrap in any::<bool>()) {
        let mut rng = RngStream::new(seed, 0);
        let ds = random_dataset(40, 3, 5, &mut rng);
        let cfg = TreeConfig { k: 2, n_min: 3, splitter: rpforest::Splitter::Exhaustive, bootstrap };
        let tree = grow(&ds.full_view(), None, &cfg, &mut rng).unwrap();
        let total: usize = tree.leaf_sample_counts().iter().sum();
        prop_assert_eq!(total, 40);
        for node in tree.nodes() {
            if let Node::Split { impurity_reduction, .. } = node {
                prop_assert!(*impurity_reduction > 0.0);
            }
        }
        if !bootstrap {
            let mut counts = vec![0usize; tree.n_leaves()];
            let mut sums = vec![vec![0.0; 5]; tree.n_leaves()];
            let y = ds.labels().to_dense();
            for i in 0..40 {
                let leaf = tree.leaf_of_sample(ds.inputs(), i);
                counts[leaf] += 1;
                for j in 0..5 {
                    sums[leaf][j] += y.get(i, j);
                }
            }
            prop_assert_eq!(&counts, tree.leaf_sample_counts());
            for (leaf, s) in sums.iter().enumerate() {
                for j in 0..5 {
                    let want = s[j] / counts[leaf] as f64;
                    let got = tree.leaf_values().get(leaf, j);
                    prop_assert!((got - want).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&got));
                }
            }
        }
    }
}

/// Whenever all pairwise distances of a node sample are preserved within
/// `1 ± ε`, the projected variance is within `1 ± ε` of the original and
/// every candidate split score moves by at most `2 ε` times the parent
/// variance.
#[test]
fn node_level_variance_transfer() {
    let eps = 0.5;
    let mut rng = RngStream::new(77, 0);
    let mut premises = 0;
    for trial in 0..200 {
        let n = 20;
        let y = random_labels(n, 60, 0.2, &mut rng);
        let m = [40, 80, 160][trial % 3];
        let phi = generate(&ProjectionSpec::gaussian(m), 60, &mut rng).unwrap();
        let report = distortion_check(&phi, &y, eps).unwrap();
        if !report.holds() {
            continue;
        }
        premises += 1;
        let orig = y.to_dense();
        let z = project(&phi, &y).unwrap();
        let v = variance_sum(&orig).unwrap();
        let vz = variance_sum(&z).unwrap();
        assert!(vz >= (1.0 - eps) * v && vz <= (1.0 + eps) * v, "{vz} vs {v}");

        for cut in 1..n {
            let left: Vec<usize> = (0..cut).collect();
            let right: Vec<usize> = (cut..n).collect();
            let score = |m: &DenseMatrix| {
                let l = variance_sum(&m.select_rows(&left).unwrap()).unwrap();
                let r = variance_sum(&m.select_rows(&right).unwrap()).unwrap();
                variance_sum(m).unwrap() - (cut as f64 * l + (n - cut) as f64 * r) / n as f64
            };
            let (s, sz) = (score(&orig), score(&z));
            assert!((s - sz).abs() <= 2.0 * eps * v + 1e-12, "cut {cut}: {sz} vs {s}");
        }
    }
    assert!(premises > 50, "only {premises} trials met the premise");
}
