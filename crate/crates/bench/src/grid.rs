//! Grid expansion and execution.

use std::io::Write;
use std::time::Instant;

use anyhow::{bail, Result};
use rpforest::io::make_split_indices;
use rpforest::metrics::lrap_detailed;
use rpforest::projection::{ProjectionKind, ProjectionSpec};
use rpforest::rng::derive_seed;
use rpforest::{DataSet, Ensemble, EnsembleConfig, Policy, TreeConfig};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};

/// Bumped whenever the CSV columns change.
pub const SCHEMA_VERSION: u32 = 1;

/// One resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub method: Method,
    pub policy: Policy,
    /// `None` without projection.
    pub projection: Option<ProjectionKind>,
    pub m: usize,
    pub k: usize,
    pub t: usize,
    pub n_min: usize,
}

impl GridPoint {
    pub fn ensemble_config(&self, d: usize, seed: u64, threads: usize) -> EnsembleConfig {
        let tree = TreeConfig {
            k: self.k,
            n_min: self.n_min,
            splitter: self.method.splitter(),
            bootstrap: self.method.bootstrap(),
        };
        let spec = match self.projection {
            Some(kind) => ProjectionSpec::new(kind, self.m),
            None => ProjectionSpec::identity(d),
        };
        let mut cfg = EnsembleConfig::new(self.t, spec, self.policy, tree, seed);
        cfg.threads = threads;
        cfg.keep_projections = false;
        cfg
    }

    pub fn projection_name(&self) -> String {
        self.projection.map_or_else(|| "none".into(), |k| k.name())
    }
}

/// Cartesian product of the grid lists, resolved for `p` features and `d`
/// labels. Without projection the projection kind and `m` do not matter, so
/// those points are emitted once with `m = d`.
pub fn expand_grid(cfg: &ExperimentConfig, p: usize, d: usize) -> Result<Vec<GridPoint>> {
    let mut points: Vec<GridPoint> = Vec::new();
    for &method in &cfg.method {
        for &policy in &cfg.policy {
            for proj in &cfg.projection {
                for m in &cfg.m {
                    for k in &cfg.k {
                        for &t in &cfg.t {
                            for &n_min in &cfg.n_min {
                                let (projection, m) = if policy == Policy::NoProjection {
                                    (None, d)
                                } else {
                                    (Some(proj.resolve(d, cfg.rademacher_s)?), m.resolve_m(d)?)
                                };
                                let point = GridPoint {
                                    method,
                                    policy,
                                    projection,
                                    m,
                                    k: k.resolve_k(p)?,
                                    t,
                                    n_min,
                                };
                                if !points.contains(&point) {
                                    points.push(point);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub schema_version: u32,
    pub grid_point: usize,
    pub method: String,
    pub policy: String,
    pub projection: String,
    pub m: usize,
    pub k: usize,
    pub t: usize,
    pub n_min: usize,
    pub splitter: String,
    pub bootstrap: bool,
    pub repeat: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub retained: usize,
    pub lrap: f64,
    pub load_seconds: f64,
    pub fit_seconds: f64,
    pub project_seconds: f64,
    pub grow_seconds: f64,
    pub predict_seconds: f64,
}

impl GridRow {
    /// Columns whose values are wall-clock measurements.
    pub const TIMING_COLUMNS: [&'static str; 5] =
        ["load_seconds", "fit_seconds", "project_seconds", "grow_seconds", "predict_seconds"];
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridOutcome {
    pub rows: usize,
    /// Grid point ids that were aborted, with the reason.
    pub failures: Vec<(usize, String)>,
}

/// Master seed for one repeat. It does not depend on the grid point, so all
/// points of a repeat see the same randomness.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    derive_seed(seed, &[repeat as u64])
}

/// Runs every grid point on every split and writes one CSV row per pair.
pub fn run_grid<W: Write>(cfg: &ExperimentConfig, ds: &DataSet, load_seconds: f64, out: W) -> Result<GridOutcome> {
    let (n, p, d) = (ds.sample_count(), ds.feature_count(), ds.label_count());
    let points = expand_grid(cfg, p, d)?;
    if points.is_empty() {
        bail!("empty grid");
    }
    let splits = make_split_indices(n, &cfg.split_plan(n), cfg.seed)?;
    // Holdout reruns the algorithms on the single split.
    let plan: Vec<usize> = match cfg.split {
        crate::config::SplitMode::Holdout => vec![0; cfg.repeats],
        _ => (0..splits.len()).collect(),
    };

    let mut writer = csv::Writer::from_writer(out);
    let mut outcome = GridOutcome::default();
    for (id, point) in points.iter().enumerate() {
        log::info!(
            "grid point {id}: {} {} {} m={} k={} t={}",
            point.method.name(),
            point.policy.name(),
            point.projection_name(),
            point.m,
            point.k,
            point.t
        );
        for (repeat, &split_id) in plan.iter().enumerate() {
            match run_one(cfg, ds, point, repeat, &splits[split_id]) {
                Ok(mut row) => {
                    row.grid_point = id;
                    row.load_seconds = load_seconds;
                    writer.serialize(&row)?;
                    outcome.rows += 1;
                }
                Err(e) => {
                    log::error!("grid point {id} aborted at repeat {repeat}: {e:#}");
                    outcome.failures.push((id, format!("{e:#}")));
                    break;
                }
            }
        }
    }
    writer.flush()?;
    Ok(outcome)
}

fn run_one(
    cfg: &ExperimentConfig,
    ds: &DataSet,
    point: &GridPoint,
    repeat: usize,
    split: &rpforest::io::SplitIndices,
) -> Result<GridRow> {
    let (train, test) = split.views(ds)?;
    let ens_cfg = point.ensemble_config(ds.label_count(), repeat_seed(cfg.seed, repeat), cfg.threads);
    let start = Instant::now();
    let (model, timing) = Ensemble::fit_timed(&train, &ens_cfg)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let scores = model.predict(&test)?;
    let predict_seconds = start.elapsed().as_secs_f64();
    let score = lrap_detailed(&scores, &test.labels())?;
    Ok(GridRow {
        schema_version: SCHEMA_VERSION,
        grid_point: 0,
        method: point.method.name().into(),
        policy: point.policy.name().into(),
        projection: point.projection_name(),
        m: point.m,
        k: point.k,
        t: point.t,
        n_min: point.n_min,
        splitter: match point.method.splitter() {
            rpforest::Splitter::Exhaustive => "exhaustive".into(),
            rpforest::Splitter::RandomThreshold => "random_threshold".into(),
        },
        bootstrap: point.method.bootstrap(),
        repeat,
        n_train: train.len(),
        n_test: test.len(),
        retained: score.retained,
        lrap: score.score,
        load_seconds: 0.0,
        fit_seconds,
        project_seconds: timing.generate_project_seconds,
        grow_seconds: timing.grow_seconds,
        predict_seconds,
    })
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<GridRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for r in reader.deserialize() {
        let row: GridRow = r?;
        if row.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema version {}", row.schema_version);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn no_projection_points_are_deduplicated() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            split = "kfold"
            policy = ["no_projection", "per_tree_subspace"]
            projection = ["gaussian", "hadamard_subsample"]
            m = [1, "ln_d", "d"]
            "#,
        )
        .unwrap();
        let points = expand_grid(&cfg, 72, 6).unwrap();
        assert_eq!(points.len(), 1 + 2 * 3);
        assert_eq!(points[0].projection, None);
        assert_eq!(points[0].m, 6);
        assert_eq!(points[0].k, 8);
    }
}
