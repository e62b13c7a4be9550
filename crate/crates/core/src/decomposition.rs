//! Monte Carlo bias/variance decomposition on synthetic problems.
//!
//! For a predictor `f(x; LS, Φ, ε)` the expected squared error splits into
//! residual error, squared bias and three variance terms:
//!
//! - `V_LS`: variance over learning samples of the `(Φ, ε)`-averaged prediction
//! - `V_Proj`: expected variance over `Φ` of the `ε`-averaged prediction
//! - `V_Algo`: expected variance over `ε`
//!
//! Estimation runs three nested loops (learning sample, projection, tree
//! randomness) and uses unbiased nested-ANOVA estimators. For an ensemble the
//! "projection" level is everything drawn from the projection seed (one `Φ`
//! for a shared subspace, `t` of them for per-tree subspaces) and the inner
//! level is everything drawn from the tree seed.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataSet, FeatureMatrix};
use crate::ensemble::{Ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, RngStream};

/// A learning problem with a known joint distribution.
pub trait SyntheticProblem: Sync {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// Draws a learning sample of `n` pairs.
    fn sample_learning_set(&self, n: usize, rng: &mut RngStream) -> Result<DataSet>;
    /// Conditional mean `E[Y | x]`.
    fn bayes(&self, x: &[f64]) -> Vec<f64>;
    /// `E ‖Y − E[Y | x]‖²`.
    fn residual_variance(&self, x: &[f64]) -> f64;
    /// Points at which the decomposition is evaluated.
    fn probes(&self) -> Vec<Vec<f64>>;
}

fn real_dataset(x: Vec<f64>, y: Vec<f64>, n: usize, p: usize, d: usize) -> Result<DataSet> {
    let x = DenseMatrix::from_vec(n, p, x)?;
    let y = DenseMatrix::from_vec(n, d, y)?.to_sparse();
    DataSet::with_real_outputs(FeatureMatrix::Dense(x), y)
}

/// Two inputs uniform on the unit square, two outputs with i.i.d. Gaussian
/// noise:
///
/// `f₁(x) = 1[x₀ > 0.5] + 0.5 x₁`, `f₂(x) = x₀ x₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoiseProblem {
    pub noise_std: f64,
}

impl Default for GaussianNoiseProblem {
    fn default() -> Self {
        Self { noise_std: 0.3 }
    }
}

impl SyntheticProblem for GaussianNoiseProblem {
    fn n_features(&self) -> usize {
        2
    }

    fn n_outputs(&self) -> usize {
        2
    }

    fn sample_learning_set(&self, n: usize, rng: &mut RngStream) -> Result<DataSet> {
        let mut x = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let xi = [rng.next_uniform(), rng.next_uniform()];
            let f = self.bayes(&xi);
            x.extend_from_slice(&xi);
            for fj in f {
                y.push(fj + self.noise_std * rng.next_gaussian());
            }
        }
        real_dataset(x, y, n, 2, 2)
    }

    fn bayes(&self, x: &[f64]) -> Vec<f64> {
        let step = if x[0] > 0.5 { 1.0 } else { 0.0 };
        vec![step + 0.5 * x[1], x[0] * x[1]]
    }

    fn residual_variance(&self, _x: &[f64]) -> f64 {
        2.0 * self.noise_std * self.noise_std
    }

    fn probes(&self) -> Vec<Vec<f64>> {
        vec![
            vec![0.25, 0.25],
            vec![0.75, 0.25],
            vec![0.25, 0.75],
            vec![0.75, 0.75],
            vec![0.45, 0.55],
        ]
    }
}

/// Noise-free outputs on the integer grid `{0..side}²`. Every learning
/// sample lists each grid point `copies` times, so a fully grown tree
/// reproduces the target exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteGridProblem {
    pub side: usize,
    pub copies: usize,
}

impl SyntheticProblem for DiscreteGridProblem {
    fn n_features(&self) -> usize {
        2
    }

    fn n_outputs(&self) -> usize {
        3
    }

    /// `n` is ignored; the sample always holds `side² · copies` rows, in a
    /// shuffled order.
    fn sample_learning_set(&self, _n: usize, rng: &mut RngStream) -> Result<DataSet> {
        let mut points: Vec<[f64; 2]> = Vec::new();
        for _ in 0..self.copies {
            for a in 0..self.side {
                for b in 0..self.side {
                    points.push([a as f64, b as f64]);
                }
            }
        }
        rng.shuffle(&mut points);
        let n = points.len();
        let x: Vec<f64> = points.iter().flatten().copied().collect();
        let y: Vec<f64> = points.iter().flat_map(|p| self.bayes(p)).collect();
        real_dataset(x, y, n, 2, 3)
    }

    fn bayes(&self, x: &[f64]) -> Vec<f64> {
        let (a, b) = (x[0], x[1]);
        vec![((a + b) as usize % 2) as f64, a * 0.5 - b, if a > b { 1.0 } else { 0.0 }]
    }

    fn residual_variance(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn probes(&self) -> Vec<Vec<f64>> {
        let s = self.side.saturating_sub(1) as f64;
        vec![vec![0.0, 0.0], vec![s, 0.0], vec![0.0, s], vec![s, s]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    /// Predictor; `seed` is the master seed for the whole experiment.
    pub ensemble: EnsembleConfig,
    /// Learning sample size.
    pub n_samples: usize,
    pub n_ls: usize,
    pub n_phi: usize,
    pub n_eps: usize,
    /// Worker threads over learning samples.
    pub threads: usize,
}

impl DecompositionConfig {
    pub fn new(ensemble: EnsembleConfig, n_samples: usize) -> Self {
        Self {
            ensemble,
            n_samples,
            n_ls: 30,
            n_phi: 20,
            n_eps: 20,
            threads: 1,
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn from_values(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            value: mean,
            se: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerms {
    /// Known exactly from the problem.
    pub residual: f64,
    pub bias2: Estimate,
    pub v_ls: Estimate,
    pub v_algo: Estimate,
    pub v_proj: Estimate,
    /// `V_LS + V_Algo + V_Proj`.
    pub variance: Estimate,
    /// Residual + bias² + variance.
    pub sum: Estimate,
    /// Mean squared error against fresh outputs, estimated directly.
    pub total_error: Estimate,
}

impl DecompositionTerms {
    /// Standard error for comparing `sum` with `total_error`.
    pub fn combined_se(&self) -> f64 {
        (self.sum.se.powi(2) + self.total_error.se.powi(2)).sqrt()
    }

    fn rows(&self) -> [(&'static str, f64, f64); 8] {
        [
            ("sigma2_r", self.residual, 0.0),
            ("bias2", self.bias2.value, self.bias2.se),
            ("v_ls", self.v_ls.value, self.v_ls.se),
            ("v_algo", self.v_algo.value, self.v_algo.se),
            ("v_proj", self.v_proj.value, self.v_proj.se),
            ("variance", self.variance.value, self.variance.se),
            ("sum", self.sum.value, self.sum.se),
            ("total_error", self.total_error.value, self.total_error.se),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub probes: Vec<DecompositionTerms>,
    /// Terms averaged over probe points.
    pub mean: DecompositionTerms,
    pub n_ls: usize,
    pub n_phi: usize,
    pub n_eps: usize,
}

impl DecompositionReport {
    /// Flat CSV: `probe,term,estimate,se`; the probe average uses id `mean`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "probe,term,estimate,se")?;
        for (q, terms) in self.probes.iter().enumerate() {
            for (name, v, se) in terms.rows() {
                writeln!(w, "{q},{name},{v},{se}")?;
            }
        }
        for (name, v, se) in self.mean.rows() {
            writeln!(w, "mean,{name},{v},{se}")?;
        }
        Ok(())
    }
}

/// Per learning sample, per probe: the quantities the estimators need.
struct LsSummary {
    /// `(Φ, ε)`-averaged prediction.
    mean: Vec<f64>,
    /// Mean over `Φ` of the unbiased within-`ε` variance.
    within_eps: f64,
    /// Unbiased variance over `Φ` of the `ε`-averaged predictions.
    between_phi: f64,
    /// Direct error estimate, residual included.
    error: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows[0].len()];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

fn unbiased_spread(rows: &[Vec<f64>], center: &[f64]) -> f64 {
    rows.iter().map(|r| sq_dist(r, center)).sum::<f64>() / (rows.len() - 1) as f64
}

/// Decomposition of a single tree; the ensemble size in `cfg` is ignored.
pub fn estimate_single_tree<P: SyntheticProblem + ?Sized>(problem: &P, cfg: &DecompositionConfig) -> Result<DecompositionReport> {
    let mut single = cfg.clone();
    single.ensemble.n_trees = 1;
    estimate_ensemble(problem, &single)
}

pub fn estimate_ensemble<P: SyntheticProblem + ?Sized>(problem: &P, cfg: &DecompositionConfig) -> Result<DecompositionReport> {
    if cfg.n_ls < 2 || cfg.n_phi < 2 || cfg.n_eps < 2 {
        return Err(Error::InvalidParameter("every repetition count must be at least 2".into()));
    }
    if cfg.threads == 0 {
        return Err(Error::InvalidParameter("threads must be at least 1".into()));
    }
    let probes = problem.probes();
    if probes.is_empty() {
        return Err(Error::Empty("problem defines no probe points".into()));
    }
    let p = problem.n_features();
    let q = probes.len();
    let probe_x = FeatureMatrix::Dense(DenseMatrix::from_rows(&probes)?);
    if probe_x.cols() != p {
        return Err(Error::DimensionMismatch(format!("probes have {} features, problem has {p}", probe_x.cols())));
    }
    let bayes: Vec<Vec<f64>> = probes.iter().map(|x| problem.bayes(x)).collect();
    let residual: Vec<f64> = probes.iter().map(|x| problem.residual_variance(x)).collect();
    let seed = cfg.ensemble.seed;
    let mut ens_cfg = cfg.ensemble.clone();
    ens_cfg.threads = 1;
    ens_cfg.keep_projections = false;

    let one_ls = |i: usize| -> Result<Vec<LsSummary>> {
        let mut rng = RngStream::new(derive_seed(seed, &[0, i as u64]), 0);
        let ls = problem.sample_learning_set(cfg.n_samples, &mut rng)?;
        let view = ls.full_view();
        // preds[probe][phi][eps]
        let mut preds = vec![vec![Vec::with_capacity(cfg.n_eps); cfg.n_phi]; q];
        for j in 0..cfg.n_phi {
            let proj_seed = derive_seed(seed, &[1, i as u64, j as u64]);
            for k in 0..cfg.n_eps {
                let tree_seed = derive_seed(seed, &[2, i as u64, j as u64, k as u64]);
                let (model, _) = Ensemble::fit_with_seeds(&view, &ens_cfg, proj_seed, tree_seed)?;
                let out = model.predict(&probe_x)?;
                for (r, per_probe) in preds.iter_mut().enumerate() {
                    per_probe[j].push(out.row(r).to_vec());
                }
            }
        }
        Ok(preds
            .iter()
            .enumerate()
            .map(|(r, per_phi)| {
                let phi_means: Vec<Vec<f64>> = per_phi.iter().map(|g| mean_rows(g)).collect();
                let within_eps = per_phi
                    .iter()
                    .zip(&phi_means)
                    .map(|(g, c)| unbiased_spread(g, c))
                    .sum::<f64>()
                    / cfg.n_phi as f64;
                let mean = mean_rows(&phi_means);
                let between_phi = unbiased_spread(&phi_means, &mean);
                let error = residual[r]
                    + per_phi.iter().flatten().map(|g| sq_dist(g, &bayes[r])).sum::<f64>()
                        / (cfg.n_phi * cfg.n_eps) as f64;
                LsSummary {
                    mean,
                    within_eps,
                    between_phi,
                    error,
                }
            })
            .collect())
    };

    let per_ls: Vec<Result<Vec<LsSummary>>> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.n_ls).into_par_iter().map(one_ls).collect())
    } else {
        (0..cfg.n_ls).map(one_ls).collect()
    };
    let per_ls = per_ls.into_iter().collect::<Result<Vec<_>>>()?;

    let n = cfg.n_ls as f64;
    let (n_phi, n_eps) = (cfg.n_phi as f64, cfg.n_eps as f64);
    // influence[probe][term][ls], terms: bias2, v_ls, v_algo, v_proj, total_error
    let mut influence = vec![vec![vec![0.0; cfg.n_ls]; 5]; q];
    for r in 0..q {
        let means: Vec<Vec<f64>> = per_ls.iter().map(|s| s[r].mean.clone()).collect();
        let grand = mean_rows(&means);
        let gap: Vec<f64> = bayes[r].iter().zip(&grand).map(|(b, g)| b - g).collect();
        let gap2: f64 = gap.iter().map(|v| v * v).sum();
        for (i, s) in per_ls.iter().enumerate() {
            let s = &s[r];
            let dev: Vec<f64> = s.mean.iter().zip(&grand).map(|(a, b)| a - b).collect();
            let spread = n / (n - 1.0) * dev.iter().map(|v| v * v).sum::<f64>();
            let cross: f64 = gap.iter().zip(&dev).map(|(a, b)| a * b).sum();
            influence[r][0][i] = gap2 - 2.0 * cross - spread / n;
            influence[r][1][i] = spread - s.between_phi / n_phi;
            influence[r][2][i] = s.within_eps;
            influence[r][3][i] = s.between_phi - s.within_eps / n_eps;
            influence[r][4][i] = s.error;
        }
    }

    let terms_from = |res: f64, inf: &[Vec<f64>]| -> DecompositionTerms {
        let variance: Vec<f64> = (0..cfg.n_ls).map(|i| inf[1][i] + inf[2][i] + inf[3][i]).collect();
        let sum: Vec<f64> = (0..cfg.n_ls).map(|i| res + inf[0][i] + variance[i]).collect();
        DecompositionTerms {
            residual: res,
            bias2: Estimate::from_values(&inf[0]),
            v_ls: Estimate::from_values(&inf[1]),
            v_algo: Estimate::from_values(&inf[2]),
            v_proj: Estimate::from_values(&inf[3]),
            variance: Estimate::from_values(&variance),
            sum: Estimate::from_values(&sum),
            total_error: Estimate::from_values(&inf[4]),
        }
    };

    let probe_terms: Vec<DecompositionTerms> = (0..q).map(|r| terms_from(residual[r], &influence[r])).collect();
    let avg_inf: Vec<Vec<f64>> = (0..5)
        .map(|term| {
            (0..cfg.n_ls)
                .map(|i| influence.iter().map(|per| per[term][i]).sum::<f64>() / q as f64)
                .collect()
        })
        .collect();
    let mean = terms_from(residual.iter().sum::<f64>() / q as f64, &avg_inf);
    Ok(DecompositionReport {
        probes: probe_terms,
        mean,
        n_ls: cfg.n_ls,
        n_phi: cfg.n_phi,
        n_eps: cfg.n_eps,
    })
}
