//! Learning samples: an input matrix paired with a sparse label matrix,
//! plus cheap row views used for splits and bootstrap draws.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseMatrix, SparseRow};

/// Read access to input features, indexed by sample then feature.
pub trait FeatureSource {
    fn n_samples(&self) -> usize;
    fn n_features(&self) -> usize;
    fn value(&self, sample: usize, feature: usize) -> f64;
}

/// `n × p` input matrix in either storage.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.rows(),
            FeatureMatrix::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(m) => m.cols(),
            FeatureMatrix::Sparse(m) => m.cols(),
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self {
            FeatureMatrix::Dense(m) => m.get(row, col),
            FeatureMatrix::Sparse(m) => m.get(row, col),
        }
    }

    pub fn dense_row(&self, row: usize) -> Vec<f64> {
        match self {
            FeatureMatrix::Dense(m) => m.row(row).to_vec(),
            FeatureMatrix::Sparse(m) => {
                let mut out = vec![0.0; m.cols()];
                for (j, v) in m.row(row).iter() {
                    out[j] = v;
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            FeatureMatrix::Dense(m) => m.clone(),
            FeatureMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        match self {
            FeatureMatrix::Dense(m) => m.to_sparse(),
            FeatureMatrix::Sparse(m) => m.clone(),
        }
    }

    /// Fraction of non-zero entries.
    pub fn density(&self) -> f64 {
        let cells = (self.rows() * self.cols()).max(1) as f64;
        match self {
            FeatureMatrix::Dense(m) => m.values().iter().filter(|v| **v != 0.0).count() as f64 / cells,
            FeatureMatrix::Sparse(m) => m.nnz() as f64 / cells,
        }
    }
}

impl FeatureSource for FeatureMatrix {
    fn n_samples(&self) -> usize {
        self.rows()
    }

    fn n_features(&self) -> usize {
        self.cols()
    }

    #[inline]
    fn value(&self, sample: usize, feature: usize) -> f64 {
        self.get(sample, feature)
    }
}

/// Paired inputs `X` (`n × p`) and outputs `Y` (`n × d`).
///
/// Multi-label sets store `Y` as presence-only ones. Synthetic regression
/// problems built with [`DataSet::with_real_outputs`] may hold arbitrary
/// finite outputs in the same sparse container.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: FeatureMatrix,
    y: SparseMatrix,
    binary: bool,
}

impl DataSet {
    /// Multi-label data set: every stored label value must be exactly 1.
    pub fn new(x: FeatureMatrix, y: SparseMatrix) -> Result<Self> {
        if let Some(v) = y.values().iter().find(|v| **v != 1.0) {
            return Err(Error::InvalidData(format!("label value {v} is not a presence flag")));
        }
        Self::build(x, y, true)
    }

    /// Data set with real-valued outputs.
    pub fn with_real_outputs(x: FeatureMatrix, y: SparseMatrix) -> Result<Self> {
        Self::build(x, y, false)
    }

    fn build(x: FeatureMatrix, y: SparseMatrix, binary: bool) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.rows(),
                y.rows()
            )));
        }
        if x.cols() == 0 {
            return Err(Error::InvalidData("at least one input feature is required".into()));
        }
        if y.cols() == 0 {
            return Err(Error::InvalidData("at least one output is required".into()));
        }
        Ok(Self { x, y, binary })
    }

    pub fn sample_count(&self) -> usize {
        self.y.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.x.cols()
    }

    pub fn label_count(&self) -> usize {
        self.y.cols()
    }

    pub fn inputs(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn labels(&self) -> &SparseMatrix {
        &self.y
    }

    pub fn has_binary_labels(&self) -> bool {
        self.binary
    }

    /// Same data with inputs converted to dense storage.
    pub fn with_dense_inputs(self) -> Self {
        let x = FeatureMatrix::Dense(self.x.to_dense());
        Self { x, ..self }
    }

    pub fn full_view(&self) -> DataView<'_> {
        DataView {
            data: self,
            rows: (0..self.sample_count()).collect(),
        }
    }

    /// View over the listed rows, in order. Duplicates are allowed.
    pub fn row_slice(&self, idx: &[usize]) -> Result<DataView<'_>> {
        let n = self.sample_count();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfBounds { index: bad, len: n });
        }
        Ok(DataView {
            data: self,
            rows: idx.to_vec(),
        })
    }
}

/// Ordered selection of rows of a [`DataSet`]. Shares the parent's storage.
#[derive(Debug, Clone)]
pub struct DataView<'a> {
    data: &'a DataSet,
    rows: Vec<usize>,
}

impl<'a> DataView<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dataset(&self) -> &'a DataSet {
        self.data
    }

    /// Parent row indices, in view order.
    pub fn indices(&self) -> &[usize] {
        &self.rows
    }

    pub fn feature_count(&self) -> usize {
        self.data.feature_count()
    }

    pub fn label_count(&self) -> usize {
        self.data.label_count()
    }

    pub fn label_row(&self, i: usize) -> SparseRow<'a> {
        self.data.y.row(self.rows[i])
    }

    pub fn input_row(&self, i: usize) -> Vec<f64> {
        self.data.x.dense_row(self.rows[i])
    }

    /// Materialised label rows of this view.
    pub fn labels(&self) -> SparseMatrix {
        self.data
            .y
            .select_rows(&self.rows)
            .expect("view indices were validated at construction")
    }

    /// Sub-view; `idx` indexes into this view.
    pub fn row_slice(&self, idx: &[usize]) -> Result<DataView<'a>> {
        let n = self.len();
        let mut rows = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= n {
                return Err(Error::IndexOutOfBounds { index: i, len: n });
            }
            rows.push(self.rows[i]);
        }
        Ok(DataView {
            data: self.data,
            rows,
        })
    }

    /// Copies the view into a standalone data set.
    pub fn to_dataset(&self) -> DataSet {
        let x = match &self.data.x {
            FeatureMatrix::Dense(m) => FeatureMatrix::Dense(m.select_rows(&self.rows).expect("validated")),
            FeatureMatrix::Sparse(m) => FeatureMatrix::Sparse(m.select_rows(&self.rows).expect("validated")),
        };
        DataSet {
            x,
            y: self.labels(),
            binary: self.data.binary,
        }
    }
}

impl FeatureSource for DataView<'_> {
    fn n_samples(&self) -> usize {
        self.len()
    }

    fn n_features(&self) -> usize {
        self.data.feature_count()
    }

    #[inline]
    fn value(&self, sample: usize, feature: usize) -> f64 {
        self.data.x.get(self.rows[sample], feature)
    }
}
