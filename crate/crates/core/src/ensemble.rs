//! Averaged tree ensembles over projected output spaces.
//!
//! Three policies:
//!
//! - [`Policy::SharedSubspace`]: one `Φ` drawn once, every tree grown on `ΦY`
//! - [`Policy::PerTreeSubspace`]: a fresh `Φ_j` per tree
//! - [`Policy::NoProjection`]: trees grown directly on `Y`
//!
//! Seeds: projection `j` uses stream `j` of the master seed (the shared
//! policy uses stream 0) and tree `j` uses stream `t + j`. A tree's
//! randomness therefore never depends on scheduling order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataView, FeatureSource};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::projection::{generate, pca_projection, project, ProjectionKind, ProjectionMatrix, ProjectionSpec};
use crate::rng::RngStream;
use crate::tree::{grow_with_targets, Tree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    SharedSubspace,
    PerTreeSubspace,
    NoProjection,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::SharedSubspace => "shared_subspace",
            Policy::PerTreeSubspace => "per_tree_subspace",
            Policy::NoProjection => "no_projection",
        }
    }
}

fn default_keep() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_trees: usize,
    /// Ignored under [`Policy::NoProjection`].
    pub projection: ProjectionSpec,
    pub policy: Policy,
    pub tree: TreeConfig,
    pub seed: u64,
    /// Worker threads for tree growth; 1 grows trees in order on the caller.
    pub threads: usize,
    /// Keep realised projection matrices on the fitted model. Per-tree
    /// matrices can be large, so benchmarks turn this off.
    #[serde(default = "default_keep")]
    pub keep_projections: bool,
}

impl EnsembleConfig {
    pub fn new(n_trees: usize, projection: ProjectionSpec, policy: Policy, tree: TreeConfig, seed: u64) -> Self {
        Self {
            n_trees,
            projection,
            policy,
            tree,
            seed,
            threads: 1,
            keep_projections: true,
        }
    }

    pub fn validate(&self, p: usize, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("an ensemble needs at least one tree".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        self.tree.validate(p)?;
        if self.policy != Policy::NoProjection && self.projection.m == 0 {
            return Err(Error::InvalidParameter("target dimension m must be at least 1".into()));
        }
        if self.policy != Policy::NoProjection && self.projection.kind == ProjectionKind::Identity && self.projection.m != d {
            return Err(Error::InvalidParameter(format!(
                "identity projection needs m = d = {d}, got {}",
                self.projection.m
            )));
        }
        Ok(())
    }
}

/// Wall-clock seconds, summed over trees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTiming {
    pub generate_project_seconds: f64,
    pub grow_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<Tree>,
    projections: Vec<ProjectionMatrix>,
    config: EnsembleConfig,
    n_features: usize,
    n_outputs: usize,
}

const ENSEMBLE_FORMAT: &str = "rpforest-ensemble";
const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    config: EnsembleConfig,
    n_features: usize,
    n_outputs: usize,
    trees: Vec<Tree>,
}

impl Ensemble {
    pub fn fit(view: &DataView<'_>, cfg: &EnsembleConfig) -> Result<Self> {
        Self::fit_timed(view, cfg).map(|(e, _)| e)
    }

    pub fn fit_timed(view: &DataView<'_>, cfg: &EnsembleConfig) -> Result<(Self, FitTiming)> {
        Self::fit_with_seeds(view, cfg, cfg.seed, cfg.seed)
    }

    /// Like [`Ensemble::fit_timed`] but with separate master seeds for the
    /// projection streams and the tree streams, so either source of
    /// randomness can be held fixed while the other varies.
    pub fn fit_with_seeds(
        view: &DataView<'_>,
        cfg: &EnsembleConfig,
        projection_seed: u64,
        tree_seed: u64,
    ) -> Result<(Self, FitTiming)> {
        if view.is_empty() {
            return Err(Error::Empty("cannot fit on an empty sample".into()));
        }
        let p = view.feature_count();
        let d = view.label_count();
        cfg.validate(p, d)?;
        let t = cfg.n_trees;
        let labels = view.labels();
        let mut timing = FitTiming::default();

        let draw = |j: usize| -> Result<ProjectionMatrix> {
            match cfg.projection.kind {
                ProjectionKind::Pca => pca_projection(&labels, cfg.projection.m),
                _ => generate(&cfg.projection, d, &mut RngStream::new(projection_seed, j as u64)),
            }
        };

        // Targets shared by every tree, if any.
        let mut shared_phi = None;
        let shared_targets = match cfg.policy {
            Policy::NoProjection => Some(labels.to_dense()),
            Policy::SharedSubspace => {
                let start = Instant::now();
                let phi = draw(0)?;
                let z = project(&phi, &labels)?;
                timing.generate_project_seconds += start.elapsed().as_secs_f64();
                shared_phi = Some(phi);
                Some(z)
            }
            Policy::PerTreeSubspace => None,
        };

        let grow_one = |j: usize| -> Result<(Tree, Option<ProjectionMatrix>, FitTiming)> {
            let mut local = FitTiming::default();
            let mut own_phi = None;
            let own_targets;
            let targets = match &shared_targets {
                Some(z) => z,
                None => {
                    let start = Instant::now();
                    let phi = draw(j)?;
                    own_targets = project(&phi, &labels)?;
                    local.generate_project_seconds = start.elapsed().as_secs_f64();
                    own_phi = Some(phi);
                    &own_targets
                }
            };
            let start = Instant::now();
            let mut rng = RngStream::new(tree_seed, (t + j) as u64);
            let tree = grow_with_targets(view, targets, &cfg.tree, &mut rng)?;
            local.grow_seconds = start.elapsed().as_secs_f64();
            Ok((tree, own_phi, local))
        };

        let grown: Vec<Result<(Tree, Option<ProjectionMatrix>, FitTiming)>> = if cfg.threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| (0..t).into_par_iter().map(grow_one).collect())
        } else {
            (0..t).map(grow_one).collect()
        };

        let mut trees = Vec::with_capacity(t);
        let mut projections = Vec::new();
        if let Some(phi) = shared_phi {
            projections.push(phi);
        }
        for r in grown {
            let (tree, phi, local) = r?;
            trees.push(tree);
            if let Some(phi) = phi {
                projections.push(phi);
            }
            timing.generate_project_seconds += local.generate_project_seconds;
            timing.grow_seconds += local.grow_seconds;
        }
        if !cfg.keep_projections {
            projections.clear();
        }
        log::debug!(
            "fitted {t} trees ({}) in {:.3}s grow, {:.3}s projection",
            cfg.policy.name(),
            timing.grow_seconds,
            timing.generate_project_seconds
        );
        Ok((
            Self {
                trees,
                projections,
                config: cfg.clone(),
                n_features: p,
                n_outputs: d,
            },
            timing,
        ))
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Realised projections: one for the shared policy, `t` for per-tree,
    /// none without projection or when they were not kept.
    pub fn projections(&self) -> &[ProjectionMatrix] {
        &self.projections
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn policy(&self) -> Policy {
        self.config.policy
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Averaged prediction for every row of `x`, `n × d`.
    pub fn predict<F: FeatureSource + Sync>(&self, x: &F) -> Result<DenseMatrix> {
        if x.n_features() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, model expects {}",
                x.n_features(),
                self.n_features
            )));
        }
        let d = self.n_outputs;
        let scale = 1.0 / self.trees.len() as f64;
        let mut out = vec![0.0; x.n_samples() * d];
        let fill = |(i, row): (usize, &mut [f64])| {
            for tree in &self.trees {
                tree.accumulate(x, i, row);
            }
            for v in row.iter_mut() {
                *v *= scale;
            }
        };
        if self.config.threads > 1 {
            out.par_chunks_mut(d).enumerate().for_each(fill);
        } else {
            out.chunks_mut(d).enumerate().for_each(fill);
        }
        DenseMatrix::from_vec(x.n_samples(), d, out)
    }

    /// JSON document with the config, shapes and trees. Projection matrices
    /// are not needed for prediction and are not written.
    pub fn to_json(&self) -> Result<String> {
        let doc = Manifest {
            format: ENSEMBLE_FORMAT.into(),
            version: ENSEMBLE_FORMAT_VERSION,
            config: self.config.clone(),
            n_features: self.n_features,
            n_outputs: self.n_outputs,
            trees: self.trees.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Manifest = serde_json::from_str(s)?;
        if doc.format != ENSEMBLE_FORMAT || doc.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported ensemble document {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.trees.is_empty() {
            return Err(Error::InvalidData("ensemble document has no trees".into()));
        }
        if doc
            .trees
            .iter()
            .any(|t| t.n_features() != doc.n_features || t.n_outputs() != doc.n_outputs)
        {
            return Err(Error::InvalidData("tree shapes disagree with the manifest".into()));
        }
        Ok(Self {
            trees: doc.trees,
            projections: Vec::new(),
            config: doc.config,
            n_features: doc.n_features,
            n_outputs: doc.n_outputs,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DataSet, FeatureMatrix};
    use crate::matrix::SparseMatrix;
    use crate::tree::Splitter;

    fn random_data(seed: u64, n: usize, p: usize, d: usize) -> DataSet {
        let mut rng = RngStream::new(seed, 0);
        let x: Vec<f64> = (0..n * p).map(|_| rng.next_uniform()).collect();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|_| (0..d).filter(|_| rng.next_uniform() < 0.3).map(|j| (j, 1.0)).collect())
            .collect();
        DataSet::new(
            FeatureMatrix::Dense(DenseMatrix::from_vec(n, p, x).unwrap()),
            SparseMatrix::from_rows(d, &rows).unwrap(),
        )
        .unwrap()
    }

    fn cfg(t: usize, policy: Policy, spec: ProjectionSpec) -> EnsembleConfig {
        EnsembleConfig::new(t, spec, policy, TreeConfig::random_forest(2), 17)
    }

    #[test]
    fn single_tree_policies_agree() {
        let ds = random_data(1, 40, 4, 6);
        let v = ds.full_view();
        let a = Ensemble::fit(&v, &cfg(1, Policy::SharedSubspace, ProjectionSpec::gaussian(3))).unwrap();
        let b = Ensemble::fit(&v, &cfg(1, Policy::PerTreeSubspace, ProjectionSpec::gaussian(3))).unwrap();
        assert_eq!(a.trees(), b.trees());
        assert_eq!(a.projections(), b.projections());
    }

    #[test]
    fn no_projection_matches_identity() {
        let ds = random_data(2, 40, 4, 6);
        let v = ds.full_view();
        let a = Ensemble::fit(&v, &cfg(5, Policy::NoProjection, ProjectionSpec::gaussian(1))).unwrap();
        let b = Ensemble::fit(&v, &cfg(5, Policy::SharedSubspace, ProjectionSpec::identity(6))).unwrap();
        assert_eq!(a.trees(), b.trees());
        assert!(a.projections().is_empty());
        assert_eq!(b.projections().len(), 1);
    }

    #[test]
    fn per_tree_projections_differ() {
        let ds = random_data(3, 30, 3, 8);
        let e = Ensemble::fit(&ds.full_view(), &cfg(3, Policy::PerTreeSubspace, ProjectionSpec::gaussian(4))).unwrap();
        let ps = e.projections();
        assert_eq!(ps.len(), 3);
        for a in 0..3 {
            for b in a + 1..3 {
                let (x, y) = (ps[a].to_dense(), ps[b].to_dense());
                assert!(x.values().iter().zip(y.values()).all(|(u, v)| u != v));
            }
        }
    }

    #[test]
    fn prediction_is_per_tree_average() {
        let ds = random_data(4, 50, 3, 5);
        let e = Ensemble::fit(&ds.full_view(), &cfg(3, Policy::PerTreeSubspace, ProjectionSpec::gaussian(2))).unwrap();
        let pred = e.predict(ds.inputs()).unwrap();
        for i in 0..ds.sample_count() {
            let x = ds.inputs().dense_row(i);
            let per: Vec<Vec<f64>> = e.trees().iter().map(|t| t.predict_one(&x).unwrap()).collect();
            for j in 0..5 {
                let want = (per[0][j] + per[1][j] + per[2][j]) / 3.0;
                assert!((pred.get(i, j) - want).abs() <= 1e-15);
                assert!((0.0..=1.0).contains(&pred.get(i, j)));
            }
        }
    }

    #[test]
    fn single_leaf_trees_predict_global_mean() {
        let ds = random_data(5, 20, 2, 3);
        let mut c = cfg(4, Policy::SharedSubspace, ProjectionSpec::gaussian(2));
        c.tree.n_min = 1000;
        c.tree.bootstrap = false;
        let e = Ensemble::fit(&ds.full_view(), &c).unwrap();
        let dense = ds.labels().to_dense();
        let pred = e.predict(ds.inputs()).unwrap();
        for j in 0..3 {
            let mean = (0..20).map(|i| dense.get(i, j)).sum::<f64>() / 20.0;
            for i in 0..20 {
                assert!((pred.get(i, j) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let ds = random_data(6, 60, 5, 7);
        let v = ds.full_view();
        let mut c = cfg(6, Policy::PerTreeSubspace, ProjectionSpec::gaussian(3));
        c.tree.splitter = Splitter::RandomThreshold;
        let a = Ensemble::fit(&v, &c).unwrap();
        let b = Ensemble::fit(&v, &c).unwrap();
        c.threads = 3;
        let par = Ensemble::fit(&v, &c).unwrap();
        assert_eq!(a.trees(), b.trees());
        assert_eq!(a.trees(), par.trees());
        let pa = a.predict(ds.inputs()).unwrap();
        let pp = par.predict(ds.inputs()).unwrap();
        assert_eq!(pa, pp);
    }

    #[test]
    fn shape_mismatch_on_predict() {
        let ds = random_data(7, 20, 3, 3);
        let e = Ensemble::fit(&ds.full_view(), &cfg(2, Policy::NoProjection, ProjectionSpec::gaussian(1))).unwrap();
        let other = random_data(8, 5, 4, 3);
        assert!(matches!(e.predict(other.inputs()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn invalid_configs() {
        let ds = random_data(9, 10, 3, 3);
        let v = ds.full_view();
        assert!(Ensemble::fit(&v, &cfg(0, Policy::NoProjection, ProjectionSpec::gaussian(1))).is_err());
        assert!(Ensemble::fit(&v, &cfg(1, Policy::SharedSubspace, ProjectionSpec::identity(2))).is_err());
        let empty = ds.row_slice(&[]).unwrap();
        assert!(Ensemble::fit(&empty, &cfg(1, Policy::NoProjection, ProjectionSpec::gaussian(1))).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ds = random_data(10, 30, 3, 4);
        let e = Ensemble::fit(&ds.full_view(), &cfg(3, Policy::PerTreeSubspace, ProjectionSpec::gaussian(2))).unwrap();
        let back = Ensemble::from_json(&e.to_json().unwrap()).unwrap();
        assert_eq!(back.trees(), e.trees());
        assert_eq!(back.predict(ds.inputs()).unwrap(), e.predict(ds.inputs()).unwrap());
        assert!(Ensemble::from_json("{\"format\":\"x\"}").is_err());
    }

    #[test]
    fn timing_is_non_negative() {
        let ds = random_data(11, 40, 3, 5);
        let start = Instant::now();
        let (_, timing) =
            Ensemble::fit_timed(&ds.full_view(), &cfg(4, Policy::PerTreeSubspace, ProjectionSpec::gaussian(2))).unwrap();
        let total = start.elapsed().as_secs_f64();
        assert!(timing.generate_project_seconds >= 0.0 && timing.grow_seconds >= 0.0);
        assert!(timing.generate_project_seconds + timing.grow_seconds <= total);
    }
}
