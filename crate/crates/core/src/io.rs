//! Multi-label svmlight files and train/test split plans.
//!
//! One sample per line:
//!
//! ```text
//! 0,2 1:1.0 3:0.5
//! ```
//!
//! Comma-separated 0-based label indices (possibly empty), then
//! whitespace-separated 1-based `feature:value` pairs in strictly increasing
//! feature order. A comment line `#d=<int> #p=<int>` pins the label and
//! feature counts; otherwise both are inferred from the largest index seen.
//! Other lines starting with `#` and blank lines are ignored. Paths ending in
//! `.gz` are decompressed on the fly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, DataView, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::rng::RngStream;

pub fn load_svmlight_multilabel(path: &Path) -> Result<DataSet> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    read_svmlight_multilabel(BufReader::new(reader))
}

fn parse_header(line: &str) -> Option<(Option<usize>, Option<usize>)> {
    let mut d = None;
    let mut p = None;
    for tok in line.split_whitespace() {
        let tok = tok.trim_start_matches('#');
        if let Some(v) = tok.strip_prefix("d=") {
            d = Some(v.parse().ok()?);
        } else if let Some(v) = tok.strip_prefix("p=") {
            p = Some(v.parse().ok()?);
        }
    }
    (d.is_some() || p.is_some()).then_some((d, p))
}

pub fn read_svmlight_multilabel<R: BufRead>(reader: R) -> Result<DataSet> {
    let mut pinned_d = None;
    let mut pinned_p = None;
    let mut labels: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut features: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_label = None;
    let mut max_feature = None;

    for (no, line) in reader.lines().enumerate() {
        let line_no = no + 1;
        let line = line?;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let trimmed = line.trim_end();
        if trimmed.trim_start().starts_with('#') {
            if let Some((d, p)) = parse_header(trimmed) {
                if !labels.is_empty() {
                    return Err(err("size header must precede the data".into()));
                }
                pinned_d = d.or(pinned_d);
                pinned_p = p.or(pinned_p);
            }
            continue;
        }
        if trimmed.trim().is_empty() {
            continue;
        }

        // A leading space means an empty label list.
        let (label_part, rest) = if trimmed.starts_with(char::is_whitespace) {
            ("", trimmed)
        } else {
            match trimmed.split_once(char::is_whitespace) {
                Some((l, r)) => (l, r),
                None => (trimmed, ""),
            }
        };
        let label_part = if label_part.contains(':') {
            return Err(err(format!("expected labels before `{label_part}`")));
        } else {
            label_part
        };

        let mut row_labels: Vec<usize> = Vec::new();
        if !label_part.is_empty() {
            for tok in label_part.split(',') {
                let j: usize = tok.parse().map_err(|_| err(format!("bad label index `{tok}`")))?;
                if pinned_d.is_some_and(|d| j >= d) {
                    return Err(err(format!("label {j} out of range for d={}", pinned_d.unwrap())));
                }
                row_labels.push(j);
            }
        }
        row_labels.sort_unstable();
        row_labels.dedup();
        if let Some(&j) = row_labels.last() {
            max_label = max_label.max(Some(j));
        }

        let mut row_features = Vec::new();
        let mut last: Option<usize> = None;
        for tok in rest.split_whitespace() {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected `index:value`, found `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite feature value `{val}`")));
            }
            let col = idx - 1;
            if last.is_some_and(|l| col <= l) {
                return Err(err(format!("feature index {idx} is not increasing")));
            }
            if pinned_p.is_some_and(|p| col >= p) {
                return Err(err(format!("feature {idx} out of range for p={}", pinned_p.unwrap())));
            }
            last = Some(col);
            if val != 0.0 {
                row_features.push((col, val));
            }
        }
        if let Some(c) = last {
            max_feature = max_feature.max(Some(c));
        }
        labels.push(row_labels.into_iter().map(|j| (j, 1.0)).collect());
        features.push(row_features);
    }

    if labels.is_empty() {
        return Err(Error::Empty("no samples in file".into()));
    }
    let d = pinned_d.unwrap_or(max_label.map_or(0, |j| j + 1));
    let p = pinned_p.unwrap_or(max_feature.map_or(0, |c| c + 1));
    let x = SparseMatrix::from_rows(p, &features)?;
    let y = SparseMatrix::from_rows(d, &labels)?;
    DataSet::new(FeatureMatrix::Sparse(x), y)
}

/// Writes `ds` in the format read by [`read_svmlight_multilabel`], with a
/// size header so empty trailing labels and features survive the round trip.
pub fn write_svmlight_multilabel<W: Write>(ds: &DataSet, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "#d={} #p={}", ds.label_count(), ds.feature_count())?;
    let x = ds.inputs().to_sparse();
    for i in 0..ds.sample_count() {
        let labels: Vec<String> = ds.labels().row(i).indices.iter().map(|j| j.to_string()).collect();
        let mut line = labels.join(",");
        for (c, v) in x.row(i).iter() {
            line.push_str(&format!(" {}:{}", c + 1, v));
        }
        if line.is_empty() {
            // A blank line would be skipped on reading.
            line.push_str(" 1:0");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_svmlight_multilabel(ds: &DataSet, path: &Path) -> Result<()> {
    write_svmlight_multilabel(ds, File::create(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitPlan {
    /// First `n_train` rows train, the next `n_test` rows test, file order kept.
    FixedHoldout { n_train: usize, n_test: usize },
    /// Independent uniform shuffles, each cut into `n_train` + `n_test`.
    ShuffledRepeats { repeats: usize, n_train: usize, n_test: usize },
    KFold { k: usize },
}

/// Parent row indices of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn views<'a>(&self, ds: &'a DataSet) -> Result<(DataView<'a>, DataView<'a>)> {
        Ok((ds.row_slice(&self.train)?, ds.row_slice(&self.test)?))
    }
}

pub fn make_split_indices(n: usize, plan: &SplitPlan, seed: u64) -> Result<Vec<SplitIndices>> {
    let check_sizes = |n_train: usize, n_test: usize| {
        if n_train == 0 || n_test == 0 || n_train + n_test > n {
            Err(Error::InvalidParameter(format!(
                "split sizes {n_train}+{n_test} do not fit {n} samples"
            )))
        } else {
            Ok(())
        }
    };
    match *plan {
        SplitPlan::FixedHoldout { n_train, n_test } => {
            check_sizes(n_train, n_test)?;
            Ok(vec![SplitIndices {
                train: (0..n_train).collect(),
                test: (n_train..n_train + n_test).collect(),
            }])
        }
        SplitPlan::ShuffledRepeats { repeats, n_train, n_test } => {
            check_sizes(n_train, n_test)?;
            if repeats == 0 {
                return Err(Error::InvalidParameter("at least one repeat is required".into()));
            }
            let mut rng = RngStream::new(seed, 0);
            Ok((0..repeats)
                .map(|_| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    rng.partial_shuffle(&mut idx, n_train + n_test);
                    SplitIndices {
                        train: idx[..n_train].to_vec(),
                        test: idx[n_train..n_train + n_test].to_vec(),
                    }
                })
                .collect())
        }
        SplitPlan::KFold { k } => {
            if k < 2 || k > n {
                return Err(Error::InvalidParameter(format!("cannot make {k} folds of {n} samples")));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            RngStream::new(seed, 0).shuffle(&mut idx);
            let mut splits = Vec::with_capacity(k);
            let mut start = 0;
            for f in 0..k {
                // The first n % k folds take one extra sample.
                let size = n / k + usize::from(f < n % k);
                let test = idx[start..start + size].to_vec();
                let train = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
                splits.push(SplitIndices { train, test });
                start += size;
            }
            Ok(splits)
        }
    }
}

pub fn make_splits<'a>(ds: &'a DataSet, plan: &SplitPlan, seed: u64) -> Result<Vec<(DataView<'a>, DataView<'a>)>> {
    make_split_indices(ds.sample_count(), plan, seed)?
        .iter()
        .map(|s| s.views(ds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn parse(s: &str) -> Result<DataSet> {
        read_svmlight_multilabel(s.as_bytes())
    }

    #[test]
    fn parses_documented_line() {
        let ds = parse("0,2 1:1.0 3:0.5\n").unwrap();
        assert_eq!(ds.labels().row(0).indices, &[0, 2]);
        assert_eq!((ds.label_count(), ds.feature_count()), (3, 3));
        let x = ds.inputs();
        assert_eq!((x.get(0, 0), x.get(0, 1), x.get(0, 2)), (1.0, 0.0, 0.5));
    }

    #[test]
    fn empty_label_row_is_kept() {
        let ds = parse("1 1:1\n 2:1.0\n").unwrap();
        assert_eq!(ds.sample_count(), 2);
        assert_eq!(ds.labels().row(1).nnz(), 0);
        assert_eq!(ds.inputs().get(1, 1), 1.0);
    }

    #[test]
    fn header_pins_sizes() {
        let ds = parse("#d=5 #p=4\n0 1:1\n").unwrap();
        assert_eq!((ds.label_count(), ds.feature_count()), (5, 4));
        assert!(matches!(parse("#d=2 #p=4\n0,3 1:1\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse("0 1:1\n0 3:1 2:1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("0 1:1\n\n0 1:x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse("a 1:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0 0:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0 1:1 1:2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse("").is_err());
    }

    #[test]
    fn gzip_input() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.svm.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(b"0,1 1:2.5\n1 2:1\n").unwrap();
        enc.finish().unwrap();
        let ds = load_svmlight_multilabel(&path).unwrap();
        assert_eq!(ds.sample_count(), 2);
        assert_eq!(ds.inputs().get(0, 0), 2.5);
    }

    #[test]
    fn kfold_partitions() {
        let splits = make_split_indices(100, &SplitPlan::KFold { k: 10 }, 3).unwrap();
        assert_eq!(splits.len(), 10);
        let mut all = HashSet::new();
        for s in &splits {
            assert_eq!(s.test.len(), 10);
            assert_eq!(s.train.len(), 90);
            for i in &s.test {
                assert!(all.insert(*i));
            }
        }
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn holdout_sizes() {
        let splits = make_split_indices(593, &SplitPlan::FixedHoldout { n_train: 391, n_test: 202 }, 0).unwrap();
        assert_eq!((splits[0].train.len(), splits[0].test.len()), (391, 202));
        assert!(make_split_indices(500, &SplitPlan::FixedHoldout { n_train: 391, n_test: 202 }, 0).is_err());
    }

    #[test]
    fn shuffled_repeats_are_disjoint_and_deterministic() {
        let plan = SplitPlan::ShuffledRepeats { repeats: 10, n_train: 60, n_test: 30 };
        let a = make_split_indices(100, &plan, 9).unwrap();
        let b = make_split_indices(100, &plan, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert_ne!(a[0], a[1]);
        for s in &a {
            let train: HashSet<_> = s.train.iter().collect();
            assert!(s.test.iter().all(|i| !train.contains(i)));
        }
        assert!(make_split_indices(100, &SplitPlan::KFold { k: 1 }, 0).is_err());
    }
}
