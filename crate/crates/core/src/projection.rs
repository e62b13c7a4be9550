//! Output-space projection matrices `Φ ∈ R^{m×d}`.
//!
//! Supported generators:
//!
//! - `gaussian`: i.i.d. `N(0, 1/m)` entries
//! - `rademacher(s)`: entries `±√(s/m)` each with probability `1/(2s)`, zero otherwise
//! - `hadamard_subsample`: `m` rows drawn without replacement from a Sylvester
//!   Hadamard matrix of order `2^⌈log₂ d⌉`, first `d` columns kept, scaled by `1/√m`
//! - `identity_subsample`: `m` distinct unit rows (plain label subsampling)
//! - `pca`: top-`m` principal directions of the centred label matrix
//! - `identity`: the `d × d` identity
//!
//! Sparse Rademacher (`s ≥ 3`), identity and identity-subsample matrices are
//! stored sparse; the others dense.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseBuilder, SparseMatrix};
use crate::rng::RngStream;

/// Largest label dimension accepted by [`pca_fit`].
pub const PCA_MAX_LABELS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ProjectionKind {
    Gaussian,
    Rademacher { s: f64 },
    HadamardSubsample,
    IdentitySubsample,
    Pca,
    Identity,
}

impl ProjectionKind {
    pub fn name(&self) -> String {
        match self {
            ProjectionKind::Gaussian => "gaussian".into(),
            ProjectionKind::Rademacher { s } => format!("rademacher(s={s})"),
            ProjectionKind::HadamardSubsample => "hadamard_subsample".into(),
            ProjectionKind::IdentitySubsample => "identity_subsample".into(),
            ProjectionKind::Pca => "pca".into(),
            ProjectionKind::Identity => "identity".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    /// Target dimension.
    pub m: usize,
}

impl ProjectionSpec {
    pub fn new(kind: ProjectionKind, m: usize) -> Self {
        Self { kind, m }
    }

    pub fn gaussian(m: usize) -> Self {
        Self::new(ProjectionKind::Gaussian, m)
    }

    pub fn identity(d: usize) -> Self {
        Self::new(ProjectionKind::Identity, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Storage {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

/// A realised `m × d` projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    kind: ProjectionKind,
    storage: Storage,
}

impl ProjectionMatrix {
    pub fn from_dense(kind: ProjectionKind, m: DenseMatrix) -> Self {
        Self {
            kind,
            storage: Storage::Dense(m),
        }
    }

    pub fn from_sparse(kind: ProjectionKind, m: SparseMatrix) -> Self {
        Self {
            kind,
            storage: Storage::Sparse(m),
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut b = SparseBuilder::new(d);
        for i in 0..d {
            b.push_row(&[(i, 1.0)]).expect("diagonal entry in range");
        }
        Self::from_sparse(ProjectionKind::Identity, b.finish())
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Target dimension.
    pub fn m(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.rows(),
            Storage::Sparse(a) => a.rows(),
        }
    }

    /// Original output dimension.
    pub fn d(&self) -> usize {
        match &self.storage {
            Storage::Dense(a) => a.cols(),
            Storage::Sparse(a) => a.cols(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a.get(r, c),
            Storage::Sparse(a) => a.get(r, c),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Sparse(a) => a.to_dense(),
        }
    }
}

/// Draws a projection matrix for `d` outputs.
///
/// `pca` is data dependent and must go through [`pca_projection`].
pub fn generate(spec: &ProjectionSpec, d: usize, rng: &mut RngStream) -> Result<ProjectionMatrix> {
    let m = spec.m;
    if d == 0 {
        return Err(Error::InvalidParameter("output dimension d must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("target dimension m must be at least 1".into()));
    }
    match spec.kind {
        ProjectionKind::Gaussian => {
            let scale = 1.0 / (m as f64).sqrt();
            let values = (0..m * d).map(|_| rng.next_gaussian() * scale).collect();
            Ok(ProjectionMatrix::from_dense(spec.kind, DenseMatrix::from_vec(m, d, values)?))
        }
        ProjectionKind::Rademacher { s } => rademacher(spec.kind, s, m, d, rng),
        ProjectionKind::HadamardSubsample => {
            if m > d {
                return Err(Error::InvalidParameter(format!(
                    "hadamard_subsample needs m <= d (m={m}, d={d})"
                )));
            }
            let order = d.next_power_of_two();
            let mut rows: Vec<usize> = (0..order).collect();
            rng.partial_shuffle(&mut rows, m);
            let scale = 1.0 / (m as f64).sqrt();
            let mut values = Vec::with_capacity(m * d);
            for &r in &rows[..m] {
                values.extend((0..d).map(|c| hadamard_sign(r, c) * scale));
            }
            Ok(ProjectionMatrix::from_dense(spec.kind, DenseMatrix::from_vec(m, d, values)?))
        }
        ProjectionKind::IdentitySubsample => {
            if m > d {
                return Err(Error::InvalidParameter(format!(
                    "identity_subsample needs m <= d (m={m}, d={d})"
                )));
            }
            let mut labels: Vec<usize> = (0..d).collect();
            rng.partial_shuffle(&mut labels, m);
            let mut b = SparseBuilder::new(d);
            for &j in &labels[..m] {
                b.push_row(&[(j, 1.0)])?;
            }
            Ok(ProjectionMatrix::from_sparse(spec.kind, b.finish()))
        }
        ProjectionKind::Identity => {
            if m != d {
                return Err(Error::InvalidParameter(format!("identity projection needs m == d (m={m}, d={d})")));
            }
            Ok(ProjectionMatrix::identity(d))
        }
        ProjectionKind::Pca => Err(Error::InvalidParameter(
            "pca projections are fitted from labels, use pca_projection".into(),
        )),
    }
}

fn rademacher(kind: ProjectionKind, s: f64, m: usize, d: usize, rng: &mut RngStream) -> Result<ProjectionMatrix> {
    if !(s.is_finite() && s >= 1.0) {
        return Err(Error::InvalidParameter(format!("rademacher sparsity needs 1/s in (0, 1], got s={s}")));
    }
    let v = (s / m as f64).sqrt();
    let half = 1.0 / (2.0 * s);
    let mut draw = || {
        let u = rng.next_uniform();
        if u < half {
            -v
        } else if u < 2.0 * half {
            v
        } else {
            0.0
        }
    };
    if s >= 3.0 {
        let mut b = SparseBuilder::new(d);
        let mut row = Vec::new();
        for _ in 0..m {
            row.clear();
            for c in 0..d {
                let x = draw();
                if x != 0.0 {
                    row.push((c, x));
                }
            }
            b.push_row(&row)?;
        }
        Ok(ProjectionMatrix::from_sparse(kind, b.finish()))
    } else {
        let values = (0..m * d).map(|_| draw()).collect();
        Ok(ProjectionMatrix::from_dense(kind, DenseMatrix::from_vec(m, d, values)?))
    }
}

/// Entry `(r, c)` of the Sylvester Hadamard matrix: `(-1)^{popcount(r & c)}`.
#[inline]
pub fn hadamard_sign(r: usize, c: usize) -> f64 {
    if (r & c).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Projects every row of `y`: row `i` of the result is `Φ y^i`.
/// Cost is `O(nnz(Y) · m)` for dense `Φ`.
pub fn project(phi: &ProjectionMatrix, y: &SparseMatrix) -> Result<DenseMatrix> {
    if y.cols() != phi.d() {
        return Err(Error::DimensionMismatch(format!(
            "labels have {} columns but the projection expects d={}",
            y.cols(),
            phi.d()
        )));
    }
    let m = phi.m();
    let mut out = DenseMatrix::zeros(y.rows(), m);
    match &phi.storage {
        Storage::Dense(a) => {
            let columns = a.transpose();
            for i in 0..y.rows() {
                let dst = out.row_mut(i);
                for (k, v) in y.row(i).iter() {
                    for (o, &w) in dst.iter_mut().zip(columns.row(k)) {
                        *o += v * w;
                    }
                }
            }
        }
        Storage::Sparse(a) => {
            let columns = a.transpose();
            for i in 0..y.rows() {
                let dst = out.row_mut(i);
                for (k, v) in y.row(i).iter() {
                    for (r, w) in columns.row(k).iter() {
                        dst[r] += v * w;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Smallest `m` satisfying `m ≥ 8 ε⁻² ln n`, floored at 1.
pub fn jl_min_dimension(epsilon: f64, n: usize) -> Result<usize> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 points, got {n}")));
    }
    let bound = 8.0 * (n as f64).ln() / (epsilon * epsilon);
    Ok((bound.ceil() as usize).max(1))
}

/// Principal directions of a label matrix together with the full spectrum.
#[derive(Debug, Clone)]
pub struct PcaFit {
    pub projection: ProjectionMatrix,
    /// All `d` covariance eigenvalues in the order used for the rows.
    pub eigenvalues: Vec<f64>,
}

/// Top-`m` principal directions of the mean-centred labels.
///
/// Rows are ordered by decreasing eigenvalue; numerically tied eigenvalues
/// are ordered by the index of the eigenvector's largest-magnitude
/// coordinate, and each row is signed so that coordinate is positive.
pub fn pca_fit(y: &SparseMatrix, m: usize) -> Result<PcaFit> {
    let (n, d) = (y.rows(), y.cols());
    if d > PCA_MAX_LABELS {
        return Err(Error::InvalidParameter(format!(
            "pca is limited to d <= {PCA_MAX_LABELS}, got {d}"
        )));
    }
    if m == 0 || m > d.min(n) {
        return Err(Error::InvalidParameter(format!("pca needs 1 <= m <= min(d, n) (m={m}, d={d}, n={n})")));
    }
    let mut mean = vec![0.0; d];
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for i in 0..n {
        let row = y.row(i);
        for (a, va) in row.iter() {
            mean[a] += va;
            for (b, vb) in row.iter() {
                cov[(a, b)] += va * vb;
            }
        }
    }
    let nf = n as f64;
    mean.iter_mut().for_each(|v| *v /= nf);
    for a in 0..d {
        for b in 0..d {
            cov[(a, b)] = cov[(a, b)] / nf - mean[a] * mean[b];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, usize, Vec<f64>)> = (0..d)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let lead = leading_coordinate(&v);
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[c], lead, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0_f64, f64::max);
    let tol = 1e-10 * scale;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() <= tol {
            end += 1;
        }
        pairs[start..end].sort_by_key(|p| p.1);
        start = end;
    }
    let mut values = Vec::with_capacity(m * d);
    for p in &pairs[..m] {
        values.extend_from_slice(&p.2);
    }
    Ok(PcaFit {
        projection: ProjectionMatrix::from_dense(ProjectionKind::Pca, DenseMatrix::from_vec(m, d, values)?),
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
    })
}

pub fn pca_projection(y: &SparseMatrix, m: usize) -> Result<ProjectionMatrix> {
    Ok(pca_fit(y, m)?.projection)
}

fn leading_coordinate(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Result of an exhaustive pairwise distance-preservation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionReport {
    /// Pairs with `y^i != y^j` that were checked.
    pub pairs: usize,
    /// Pairs violating either side of the `(1 ± ε)` bound.
    pub violations: usize,
    /// Identical pairs, skipped.
    pub skipped: usize,
    /// Largest `| ‖Φy^i − Φy^j‖² / ‖y^i − y^j‖² − 1 |` seen.
    pub max_ratio_error: f64,
}

impl DistortionReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.violations as f64 / self.pairs as f64
        }
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `(1−ε)‖y^i−y^j‖² ≤ ‖Φy^i−Φy^j‖² ≤ (1+ε)‖y^i−y^j‖²` over all pairs.
pub fn distortion_check(phi: &ProjectionMatrix, y: &SparseMatrix, epsilon: f64) -> Result<DistortionReport> {
    let z = project(phi, y)?;
    let dense = y.to_dense();
    let n = y.rows();
    let mut report = DistortionReport {
        pairs: 0,
        violations: 0,
        skipped: 0,
        max_ratio_error: 0.0,
    };
    for i in 0..n {
        for j in i + 1..n {
            let orig = squared_distance(dense.row(i), dense.row(j));
            if orig == 0.0 {
                report.skipped += 1;
                continue;
            }
            let proj = squared_distance(z.row(i), z.row(j));
            report.pairs += 1;
            if proj < (1.0 - epsilon) * orig || proj > (1.0 + epsilon) * orig {
                report.violations += 1;
            }
            report.max_ratio_error = report.max_ratio_error.max((proj / orig - 1.0).abs());
        }
    }
    Ok(report)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
