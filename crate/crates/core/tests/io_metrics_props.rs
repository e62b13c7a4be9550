use proptest::prelude::*;
use rpforest::io::{make_split_indices, read_svmlight_multilabel, write_svmlight_multilabel, SplitPlan};
use rpforest::metrics::{lrap, lrap_oracle};
use rpforest::{DataSet, DenseMatrix, FeatureMatrix, SparseMatrix};

fn sparse_strategy(rows: usize, cols: usize, values: BoxedStrategy<f64>) -> impl Strategy<Value = SparseMatrix> {
    proptest::collection::vec(proptest::collection::vec(proptest::option::weighted(0.3, values), cols), rows).prop_map(
        move |grid| {
            let rows: Vec<Vec<(usize, f64)>> = grid
                .into_iter()
                .map(|r| r.into_iter().enumerate().filter_map(|(j, v)| v.map(|v| (j, v))).collect())
                .collect();
            SparseMatrix::from_rows(cols, &rows).unwrap()
        },
    )
}

fn dataset_strategy() -> impl Strategy<Value = DataSet> {
    (1usize..12, 1usize..6, 1usize..6).prop_flat_map(|(n, p, d)| {
        let feature = prop_oneof![(-1e6f64..1e6), Just(1.0), (1e-300f64..1e-290)]
            .prop_filter("non-zero", |v| *v != 0.0)
            .boxed();
        (sparse_strategy(n, p, feature), sparse_strategy(n, d, Just(1.0).boxed()))
            .prop_map(|(x, y)| DataSet::new(FeatureMatrix::Sparse(x), y).unwrap())
    })
}

fn scores_and_labels() -> impl Strategy<Value = (DenseMatrix, SparseMatrix)> {
    (1usize..10, 1usize..8).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(0u8..4, n * d),
            sparse_strategy(n, d, Just(1.0).boxed()).prop_filter("some labels", |y| y.nnz() > 0),
        )
            .prop_map(move |(s, y)| {
                let s = DenseMatrix::from_vec(n, d, s.into_iter().map(f64::from).collect()).unwrap();
                (s, y)
            })
    })
}

proptest! {
    #[test]
    fn svmlight_round_trip(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_svmlight_multilabel(&ds, &mut buf).unwrap();
        let back = read_svmlight_multilabel(buf.as_slice()).unwrap();
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.inputs().to_sparse(), ds.inputs().to_sparse());
        // Re-serialising is stable.
        let mut again = Vec::new();
        write_svmlight_multilabel(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn lrap_matches_oracle((s, y) in scores_and_labels()) {
        let a = lrap(&s, &y).unwrap();
        prop_assert!((a - lrap_oracle(&s, &y).unwrap()).abs() < 1e-12);
        prop_assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn lrap_ignores_monotone_transforms((s, y) in scores_and_labels()) {
        let g = DenseMatrix::from_vec(s.rows(), s.cols(), s.values().iter().map(|v| (3.0 * v - 1.0).exp()).collect()).unwrap();
        prop_assert_eq!(lrap(&s, &y).unwrap(), lrap(&g, &y).unwrap());
    }

    #[test]
    fn lrap_ignores_row_order((s, y) in scores_and_labels()) {
        let n = s.rows();
        let rev: Vec<usize> = (0..n).rev().collect();
        let a = lrap(&s, &y).unwrap();
        let b = lrap(&s.select_rows(&rev).unwrap(), &y.select_rows(&rev).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn splits_are_disjoint(n in 20usize..200, seed in any::<u64>(), k in 2usize..10) {
        let plans = [
            SplitPlan::ShuffledRepeats { repeats: 3, n_train: n / 2, n_test: n / 3 },
            SplitPlan::KFold { k },
            SplitPlan::FixedHoldout { n_train: n / 2, n_test: n / 2 },
        ];
        for plan in plans {
            for s in make_split_indices(n, &plan, seed).unwrap() {
                let mut seen = vec![false; n];
                for &i in s.train.iter().chain(&s.test) {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
        }
    }
}
