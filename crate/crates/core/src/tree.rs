//! Multi-output regression trees grown on (possibly projected) outputs.
//!
//! The split score is the variance reduction
//! `ΔI = Var(S) − |S_l|/|S| Var(S_l) − |S_r|/|S| Var(S_r)` where `Var` is the
//! sum of per-dimension variances. It is evaluated on the targets `Z` the
//! tree is grown on (`Z = Φ Y` or `Z = Y`), while leaf vectors are always
//! the mean of the original label rows reaching the leaf.

use serde::{Deserialize, Serialize};

use crate::dataset::{DataView, FeatureSource};
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseBuilder, SparseMatrix};
use crate::projection::{project, ProjectionMatrix};
use crate::rng::RngStream;

/// Node variance at or below this is treated as pure.
pub const PURE_TOLERANCE: f64 = 1e-12;

/// Splits must reduce impurity by more than this fraction of the parent
/// variance; anything smaller is treated as `ΔI == 0`.
const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    /// Best midpoint over all sorted feature values.
    Exhaustive,
    /// One uniform cut point per candidate feature.
    RandomThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Features examined per split.
    pub k: usize,
    /// A split is attempted only when the node holds at least this many samples.
    pub n_min: usize,
    pub splitter: Splitter,
    pub bootstrap: bool,
}

impl TreeConfig {
    pub fn random_forest(k: usize) -> Self {
        Self {
            k,
            n_min: 1,
            splitter: Splitter::Exhaustive,
            bootstrap: true,
        }
    }

    pub fn extra_trees(k: usize) -> Self {
        Self {
            k,
            n_min: 1,
            splitter: Splitter::RandomThreshold,
            bootstrap: false,
        }
    }

    /// Unpruned CART over all `p` features.
    pub fn cart(p: usize) -> Self {
        Self {
            k: p,
            n_min: 1,
            splitter: Splitter::Exhaustive,
            bootstrap: false,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.k == 0 || self.k > p {
            return Err(Error::InvalidParameter(format!("k must be in 1..={p}, got {}", self.k)));
        }
        if self.n_min == 0 {
            return Err(Error::InvalidParameter("n_min must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: usize,
    /// Samples with `x[feature] <= threshold` go left.
    pub threshold: f64,
    pub impurity_reduction: f64,
}

impl SplitRecord {
    /// Higher gain wins; ties go to the lower feature index, then the lower threshold.
    fn beats(&self, other: &SplitRecord) -> bool {
        if self.impurity_reduction != other.impurity_reduction {
            return self.impurity_reduction > other.impurity_reduction;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        impurity_reduction: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

/// Array-encoded binary tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    /// `leaf_count × d` leaf means in the original output space.
    leaf_values: SparseMatrix,
    leaf_sample_counts: Vec<usize>,
    n_features: usize,
}

const TREE_FORMAT: &str = "rpforest-tree";
const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    version: u32,
    tree: Tree,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_values(&self) -> &SparseMatrix {
        &self.leaf_values
    }

    pub fn leaf_sample_counts(&self) -> &[usize] {
        &self.leaf_sample_counts
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_sample_counts.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.leaf_values.cols()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            best = best.max(depth);
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push((left, depth + 1));
                stack.push((right, depth + 1));
            }
        }
        best
    }

    fn route(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if value(feature) <= threshold { left } else { right },
            }
        }
    }

    /// Leaf reached by an input row.
    pub fn leaf_of(&self, x: &[f64]) -> Result<usize> {
        self.check_width(x.len())?;
        Ok(self.route(|f| x[f]))
    }

    pub fn leaf_of_sample<F: FeatureSource>(&self, src: &F, sample: usize) -> usize {
        self.route(|f| src.value(sample, f))
    }

    /// Prediction in the original output space (length `d`).
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let leaf = self.leaf_of(x)?;
        let mut out = vec![0.0; self.n_outputs()];
        for (j, v) in self.leaf_values.row(leaf).iter() {
            out[j] = v;
        }
        Ok(out)
    }

    /// Adds the prediction for `sample` of `src` into `out`.
    pub fn accumulate<F: FeatureSource>(&self, src: &F, sample: usize, out: &mut [f64]) {
        let leaf = self.leaf_of_sample(src, sample);
        for (j, v) in self.leaf_values.row(leaf).iter() {
            out[j] += v;
        }
    }

    fn check_width(&self, p: usize) -> Result<()> {
        if p != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "input has {p} features, tree expects {}",
                self.n_features
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TreeDocument {
            format: TREE_FORMAT.into(),
            version: TREE_FORMAT_VERSION,
            tree: self.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(s)?;
        if doc.format != TREE_FORMAT || doc.version != TREE_FORMAT_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported tree document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.tree)
    }
}

/// Sum of per-dimension variances, `(1/|S|) Σ ‖y^i − ȳ‖²`.
pub fn variance_sum(rows: &DenseMatrix) -> Result<f64> {
    let n = rows.rows();
    if n == 0 {
        return Err(Error::Empty("variance of an empty sample".into()));
    }
    let mut mean = vec![0.0; rows.cols()];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(rows.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut acc = 0.0;
    for i in 0..n {
        acc += rows.row(i).iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
    }
    Ok(acc / n as f64)
}

/// The same quantity through pairwise distances, `(1/(2|S|²)) Σ_i Σ_j ‖y^i − y^j‖²`.
pub fn variance_sum_pairwise(rows: &DenseMatrix) -> Result<f64> {
    let n = rows.rows();
    if n == 0 {
        return Err(Error::Empty("variance of an empty sample".into()));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += rows
                .row(i)
                .iter()
                .zip(rows.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    Ok(acc / (2.0 * (n * n) as f64))
}

/// Reusable buffers for split search.
#[derive(Debug, Default)]
struct Scratch {
    pairs: Vec<(f64, usize)>,
    left: Vec<f64>,
    total: Vec<f64>,
}

impl Scratch {
    /// Fills `total` with the column sums of `z` over `samples` and returns
    /// the node variance.
    fn load_node(&mut self, samples: &[usize], z: &DenseMatrix) -> f64 {
        let m = z.cols();
        self.total.clear();
        self.total.resize(m, 0.0);
        let mut sumsq = 0.0;
        for &s in samples {
            for (t, &v) in self.total.iter_mut().zip(z.row(s)) {
                *t += v;
                sumsq += v * v;
            }
        }
        let n = samples.len() as f64;
        sumsq / n - squared_norm(&self.total) / (n * n)
    }
}

#[inline]
fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
fn squared_norm_of_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `ΔI` from the left-child sums; the right child is `total − left`.
#[inline]
fn gain(total: &[f64], parent_term: f64, left: &[f64], n_left: usize, n: usize) -> f64 {
    let n_right = n - n_left;
    let proxy = squared_norm(left) / n_left as f64 + squared_norm_of_difference(total, left) / n_right as f64;
    (proxy - parent_term) / n as f64
}

#[inline]
fn midpoint(a: f64, b: f64) -> f64 {
    let t = a / 2.0 + b / 2.0;
    if t >= b || t < a {
        a
    } else {
        t
    }
}

fn check_split_inputs<F: FeatureSource>(samples: &[usize], x: &F, z: &DenseMatrix, features: &[usize]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("split search needs at least 2 samples".into()));
    }
    if features.is_empty() {
        return Err(Error::InvalidParameter("split search needs at least one feature".into()));
    }
    if x.n_samples() != z.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} input rows but {} target rows",
            x.n_samples(),
            z.rows()
        )));
    }
    if let Some(&f) = features.iter().find(|&&f| f >= x.n_features()) {
        return Err(Error::IndexOutOfBounds {
            index: f,
            len: x.n_features(),
        });
    }
    if let Some(&s) = samples.iter().find(|&&s| s >= z.rows()) {
        return Err(Error::IndexOutOfBounds { index: s, len: z.rows() });
    }
    Ok(())
}

/// Best split over all midpoints of consecutive distinct values of the
/// candidate features. `samples` index rows of both `x` and `z`.
///
/// Returns `None` when every candidate is constant on the node or no split
/// reduces impurity.
pub fn best_split_exhaustive<F: FeatureSource>(
    samples: &[usize],
    x: &F,
    z: &DenseMatrix,
    features: &[usize],
) -> Result<Option<SplitRecord>> {
    check_split_inputs(samples, x, z, features)?;
    let mut scratch = Scratch::default();
    let var = scratch.load_node(samples, z);
    Ok(exhaustive_search(samples, x, z, features, var, &mut scratch))
}

fn exhaustive_search<F: FeatureSource>(
    samples: &[usize],
    x: &F,
    z: &DenseMatrix,
    features: &[usize],
    parent_var: f64,
    scratch: &mut Scratch,
) -> Option<SplitRecord> {
    if parent_var <= PURE_TOLERANCE {
        return None;
    }
    let n = samples.len();
    let m = z.cols();
    let parent_term = squared_norm(&scratch.total) / n as f64;
    let mut best: Option<SplitRecord> = None;
    for &f in features {
        scratch.pairs.clear();
        scratch.pairs.extend(samples.iter().map(|&s| (x.value(s, f), s)));
        scratch
            .pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if scratch.pairs[0].0 == scratch.pairs[n - 1].0 {
            continue;
        }
        scratch.left.clear();
        scratch.left.resize(m, 0.0);
        for idx in 0..n - 1 {
            let (value, s) = scratch.pairs[idx];
            for (l, &v) in scratch.left.iter_mut().zip(z.row(s)) {
                *l += v;
            }
            let next = scratch.pairs[idx + 1].0;
            if value < next {
                let g = gain(&scratch.total, parent_term, &scratch.left, idx + 1, n);
                let cand = SplitRecord {
                    feature: f,
                    threshold: midpoint(value, next),
                    impurity_reduction: g,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
    }
    best.filter(|b| b.impurity_reduction > GAIN_TOLERANCE * parent_var)
}

/// Extra-Trees split: one uniform threshold in `[min, max)` per candidate
/// feature (drawn in the given feature order), best of those cuts.
pub fn best_split_random_threshold<F: FeatureSource>(
    samples: &[usize],
    x: &F,
    z: &DenseMatrix,
    features: &[usize],
    rng: &mut RngStream,
) -> Result<Option<SplitRecord>> {
    check_split_inputs(samples, x, z, features)?;
    let mut scratch = Scratch::default();
    let var = scratch.load_node(samples, z);
    Ok(random_threshold_search(samples, x, z, features, var, &mut scratch, rng))
}

fn random_threshold_search<F: FeatureSource>(
    samples: &[usize],
    x: &F,
    z: &DenseMatrix,
    features: &[usize],
    parent_var: f64,
    scratch: &mut Scratch,
    rng: &mut RngStream,
) -> Option<SplitRecord> {
    if parent_var <= PURE_TOLERANCE {
        return None;
    }
    let n = samples.len();
    let m = z.cols();
    let parent_term = squared_norm(&scratch.total) / n as f64;
    let mut best: Option<SplitRecord> = None;
    for &f in features {
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            let v = x.value(s, f);
            (lo.min(v), hi.max(v))
        });
        if lo == hi {
            continue;
        }
        let mut threshold = lo + rng.next_uniform() * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        scratch.left.clear();
        scratch.left.resize(m, 0.0);
        let mut n_left = 0;
        for &s in samples {
            if x.value(s, f) <= threshold {
                n_left += 1;
                for (l, &v) in scratch.left.iter_mut().zip(z.row(s)) {
                    *l += v;
                }
            }
        }
        let cand = SplitRecord {
            feature: f,
            threshold,
            impurity_reduction: gain(&scratch.total, parent_term, &scratch.left, n_left, n),
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.filter(|b| b.impurity_reduction > GAIN_TOLERANCE * parent_var)
}

/// Grows a tree on `Φ Y` (or on `Y` when `phi` is `None`) and labels its
/// leaves with means of the original label rows.
pub fn grow(view: &DataView<'_>, phi: Option<&ProjectionMatrix>, cfg: &TreeConfig, rng: &mut RngStream) -> Result<Tree> {
    if view.is_empty() {
        return Err(Error::Empty("cannot grow a tree on an empty sample".into()));
    }
    let z = match phi {
        Some(phi) => {
            if phi.d() != view.label_count() {
                return Err(Error::DimensionMismatch(format!(
                    "projection expects d={} but data has {} labels",
                    phi.d(),
                    view.label_count()
                )));
            }
            project(phi, &view.labels())?
        }
        None => view.labels().to_dense(),
    };
    grow_with_targets(view, &z, cfg, rng)
}

/// Grows a tree whose structure is driven by `targets` (row `i` belongs to
/// view sample `i`).
pub fn grow_with_targets(view: &DataView<'_>, targets: &DenseMatrix, cfg: &TreeConfig, rng: &mut RngStream) -> Result<Tree> {
    let n = view.len();
    let p = view.feature_count();
    if n == 0 {
        return Err(Error::Empty("cannot grow a tree on an empty sample".into()));
    }
    if targets.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} target rows for {n} samples",
            targets.rows()
        )));
    }
    cfg.validate(p)?;

    let mut samples: Vec<usize> = if cfg.bootstrap {
        let mut s: Vec<usize> = (0..n).map(|_| rng.next_index(n)).collect();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };

    let d = view.label_count();
    let mut builder = Builder {
        view,
        z: targets,
        cfg,
        rng,
        scratch: Scratch::default(),
        feature_pool: (0..p).collect(),
        selected: Vec::with_capacity(cfg.k),
        nodes: Vec::new(),
        leaf_values: SparseBuilder::new(d),
        leaf_counts: Vec::new(),
        acc: vec![0.0; d],
        seen: vec![false; d],
        touched: Vec::new(),
        entries: Vec::new(),
        partition: Vec::new(),
    };
    builder.build(&mut samples)?;
    Ok(Tree {
        nodes: builder.nodes,
        leaf_values: builder.leaf_values.finish(),
        leaf_sample_counts: builder.leaf_counts,
        n_features: p,
    })
}

struct Builder<'v, 'a, 'r> {
    view: &'v DataView<'a>,
    z: &'v DenseMatrix,
    cfg: &'v TreeConfig,
    rng: &'r mut RngStream,
    scratch: Scratch,
    feature_pool: Vec<usize>,
    selected: Vec<usize>,
    nodes: Vec<Node>,
    leaf_values: SparseBuilder,
    leaf_counts: Vec<usize>,
    acc: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
    entries: Vec<(usize, f64)>,
    partition: Vec<usize>,
}

impl Builder<'_, '_, '_> {
    fn build(&mut self, samples: &mut [usize]) -> Result<()> {
        self.nodes.push(Node::Leaf { leaf: usize::MAX });
        let mut stack = vec![(0usize, 0usize, samples.len())];
        while let Some((id, start, end)) = stack.pop() {
            let node = &mut samples[start..end];
            match self.find_split(node) {
                Some(split) => {
                    let mid = start + self.partition_node(node, &split);
                    let left = self.nodes.len();
                    let right = left + 1;
                    self.nodes.push(Node::Leaf { leaf: usize::MAX });
                    self.nodes.push(Node::Leaf { leaf: usize::MAX });
                    self.nodes[id] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        impurity_reduction: split.impurity_reduction,
                        left,
                        right,
                    };
                    stack.push((right, mid, end));
                    stack.push((left, start, mid));
                }
                None => {
                    let leaf = self.make_leaf(node)?;
                    self.nodes[id] = Node::Leaf { leaf };
                }
            }
        }
        Ok(())
    }

    fn find_split(&mut self, node: &[usize]) -> Option<SplitRecord> {
        let n = node.len();
        if n < 2 || n < self.cfg.n_min {
            return None;
        }
        let var = self.scratch.load_node(node, self.z);
        if var <= PURE_TOLERANCE {
            return None;
        }
        // Draw features without replacement until k non-constant ones are
        // found; constant features do not count towards k.
        self.selected.clear();
        let p = self.feature_pool.len();
        let mut drawn = 0;
        while self.selected.len() < self.cfg.k && drawn < p {
            let j = drawn + self.rng.next_index(p - drawn);
            self.feature_pool.swap(drawn, j);
            let f = self.feature_pool[drawn];
            drawn += 1;
            if !self.is_constant(node, f) {
                self.selected.push(f);
            }
        }
        if self.selected.is_empty() {
            return None;
        }
        self.selected.sort_unstable();
        let features = std::mem::take(&mut self.selected);
        let split = match self.cfg.splitter {
            Splitter::Exhaustive => exhaustive_search(node, self.view, self.z, &features, var, &mut self.scratch),
            Splitter::RandomThreshold => {
                random_threshold_search(node, self.view, self.z, &features, var, &mut self.scratch, self.rng)
            }
        };
        self.selected = features;
        split
    }

    fn is_constant(&self, node: &[usize], f: usize) -> bool {
        let first = self.view.value(node[0], f);
        node[1..].iter().all(|&s| self.view.value(s, f) == first)
    }

    /// Stable partition; returns the size of the left part.
    fn partition_node(&mut self, node: &mut [usize], split: &SplitRecord) -> usize {
        self.partition.clear();
        let mut n_left = 0;
        for i in 0..node.len() {
            let s = node[i];
            if self.view.value(s, split.feature) <= split.threshold {
                node[n_left] = s;
                n_left += 1;
            } else {
                self.partition.push(s);
            }
        }
        node[n_left..].copy_from_slice(&self.partition);
        n_left
    }

    fn make_leaf(&mut self, node: &[usize]) -> Result<usize> {
        self.touched.clear();
        for &s in node {
            for (j, v) in self.view.label_row(s).iter() {
                if !self.seen[j] {
                    self.seen[j] = true;
                    self.touched.push(j);
                }
                self.acc[j] += v;
            }
        }
        self.touched.sort_unstable();
        self.entries.clear();
        let n = node.len() as f64;
        for &j in &self.touched {
            self.entries.push((j, self.acc[j] / n));
            self.acc[j] = 0.0;
            self.seen[j] = false;
        }
        self.leaf_values.push_row(&self.entries)?;
        self.leaf_counts.push(node.len());
        Ok(self.leaf_counts.len() - 1)
    }
}
