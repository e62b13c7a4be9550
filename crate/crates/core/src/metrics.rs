//! Label ranking average precision (LRAP).
//!
//! For a sample with relevant set `R` and scores `f`, each relevant label `j`
//! contributes `|{k ∈ R : f_k ≥ f_j}| / |{k : f_k ≥ f_j}|`; contributions are
//! averaged over `R`, then over samples. Samples without relevant labels are
//! dropped.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lrap {
    pub score: f64,
    /// Samples with at least one relevant label.
    pub retained: usize,
}

fn check_shapes(scores: &DenseMatrix, y: &SparseMatrix) -> Result<()> {
    if scores.rows() != y.rows() || scores.cols() != y.cols() {
        return Err(Error::DimensionMismatch(format!(
            "scores are {}x{} but labels are {}x{}",
            scores.rows(),
            scores.cols(),
            y.rows(),
            y.cols()
        )));
    }
    Ok(())
}

pub fn lrap(scores: &DenseMatrix, y: &SparseMatrix) -> Result<f64> {
    lrap_detailed(scores, y).map(|r| r.score)
}

/// Sort-based LRAP, `O(d log d)` per sample.
pub fn lrap_detailed(scores: &DenseMatrix, y: &SparseMatrix) -> Result<Lrap> {
    check_shapes(scores, y)?;
    let d = y.cols();
    let mut relevant = vec![false; d];
    let mut order: Vec<usize> = Vec::with_capacity(d);
    let mut total = 0.0;
    let mut retained = 0;
    for i in 0..y.rows() {
        let labels = y.row(i);
        if labels.nnz() == 0 {
            continue;
        }
        retained += 1;
        let s = scores.row(i);
        for j in labels.indices {
            relevant[*j] = true;
        }
        order.clear();
        order.extend(0..d);
        order.sort_unstable_by(|&a, &b| s[b].total_cmp(&s[a]));

        // Walk groups of equal scores from the top; every member of a group
        // sees the whole group as ranked at or above it.
        let mut sample_sum = 0.0;
        let mut seen_all = 0usize;
        let mut seen_rel = 0usize;
        let mut start = 0;
        while start < d {
            let mut end = start + 1;
            while end < d && s[order[end]] == s[order[start]] {
                end += 1;
            }
            let group_rel = order[start..end].iter().filter(|&&k| relevant[k]).count();
            seen_all += end - start;
            seen_rel += group_rel;
            sample_sum += group_rel as f64 * seen_rel as f64 / seen_all as f64;
            start = end;
        }
        total += sample_sum / labels.nnz() as f64;
        for j in labels.indices {
            relevant[*j] = false;
        }
    }
    if retained == 0 {
        return Err(Error::Undefined("LRAP needs at least one sample with a relevant label".into()));
    }
    Ok(Lrap {
        score: total / retained as f64,
        retained,
    })
}

/// Literal double loop over the definition, `O(n d²)`. Reference for tests.
pub fn lrap_oracle(scores: &DenseMatrix, y: &SparseMatrix) -> Result<f64> {
    check_shapes(scores, y)?;
    let dense = y.to_dense();
    let d = y.cols();
    let mut total = 0.0;
    let mut retained = 0;
    for i in 0..y.rows() {
        let yi = dense.row(i);
        let s = scores.row(i);
        let n_rel = yi.iter().filter(|v| **v == 1.0).count();
        if n_rel == 0 {
            continue;
        }
        retained += 1;
        let mut acc = 0.0;
        for j in 0..d {
            if yi[j] != 1.0 {
                continue;
            }
            let mut in_y = 0;
            let mut in_all = 0;
            for k in 0..d {
                if s[k] >= s[j] {
                    in_all += 1;
                    if yi[k] == 1.0 {
                        in_y += 1;
                    }
                }
            }
            acc += in_y as f64 / in_all as f64;
        }
        total += acc / n_rel as f64;
    }
    if retained == 0 {
        return Err(Error::Undefined("LRAP needs at least one sample with a relevant label".into()));
    }
    Ok(total / retained as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn labels(rows: &[&[usize]], d: usize) -> SparseMatrix {
        let rows: Vec<Vec<(usize, f64)>> = rows.iter().map(|r| r.iter().map(|&j| (j, 1.0)).collect()).collect();
        SparseMatrix::from_rows(d, &rows).unwrap()
    }

    #[test]
    fn worked_example() {
        let y = labels(&[&[0, 2]], 3);
        let s = DenseMatrix::from_rows(&[vec![0.8, 0.9, 0.7]]).unwrap();
        assert!((lrap(&s, &y).unwrap() - 7.0 / 12.0).abs() < 1e-15);
        assert!((lrap_oracle(&s, &y).unwrap() - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn all_ties() {
        let y = labels(&[&[0, 2]], 3);
        let s = DenseMatrix::from_rows(&[vec![0.3, 0.3, 0.3]]).unwrap();
        assert!((lrap(&s, &y).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_scores() {
        let y = labels(&[&[0, 2], &[1], &[0, 1, 3]], 4);
        let s = y.to_dense();
        assert_eq!(lrap(&s, &y).unwrap(), 1.0);
        assert_eq!(lrap_oracle(&s, &y).unwrap(), 1.0);
    }

    #[test]
    fn single_relevant_ranked_last() {
        let y = labels(&[&[3]], 4);
        let s = DenseMatrix::from_rows(&[vec![0.9, 0.8, 0.7, 0.1]]).unwrap();
        assert_eq!(lrap(&s, &y).unwrap(), 0.25);
        assert_eq!(lrap_oracle(&s, &y).unwrap(), 0.25);
    }

    #[test]
    fn empty_rows_dropped_and_all_empty_is_error() {
        let y = labels(&[&[1], &[]], 2);
        let s = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let r = lrap_detailed(&s, &y).unwrap();
        assert_eq!((r.score, r.retained), (1.0, 1));
        let empty = labels(&[&[], &[]], 2);
        assert!(matches!(lrap(&s, &empty), Err(Error::Undefined(_))));
        assert!(lrap_oracle(&s, &empty).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let y = labels(&[&[1]], 3);
        let s = DenseMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(lrap(&s, &y).is_err());
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = RngStream::new(99, 0);
        for _ in 0..50 {
            let (n, d) = (20, 10);
            let rows: Vec<Vec<usize>> = (0..n).map(|_| (0..d).filter(|_| rng.next_uniform() < 0.3).collect()).collect();
            let refs: Vec<&[usize]> = rows.iter().map(|r| r.as_slice()).collect();
            let y = labels(&refs, d);
            if y.nnz() == 0 {
                continue;
            }
            // Coarse scores to force plenty of ties.
            let vals: Vec<f64> = (0..n * d).map(|_| (rng.next_uniform() * 4.0).floor() / 4.0).collect();
            let s = DenseMatrix::from_vec(n, d, vals).unwrap();
            let a = lrap(&s, &y).unwrap();
            let b = lrap_oracle(&s, &y).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            assert!(a > 0.0 && a <= 1.0);
        }
    }
}
