//! Experiment configuration: a flat TOML document of scalars and lists.
//!
//! ```toml
//! data = "emotions.svm"
//! seed = 1
//! threads = 1
//! split = "shuffled"      # holdout | shuffled | kfold
//! repeats = 10
//! n_train = 391
//! n_test = 202
//! method = ["random_forest"]            # random_forest | extra_trees | cart
//! policy = ["per_tree_subspace", "no_projection"]
//! projection = ["gaussian"]
//! m = [1, "ln_d", "d"]
//! k = ["sqrt_p"]
//! t = [100]
//! n_min = [1]
//! ```
//!
//! Every list key is a grid dimension; the grid is their cartesian product.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rpforest::io::SplitPlan;
use rpforest::projection::ProjectionKind;
use rpforest::{Policy, Splitter};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Symbolic {
    Count(usize),
    Name(String),
}

impl Symbolic {
    /// Target dimension for `d` labels: `1`, `ln_d` and `2ln_d` rounded to
    /// the nearest integer, `d`, or an explicit count.
    pub fn resolve_m(&self, d: usize) -> Result<usize> {
        let ln_d = (d as f64).ln();
        let m = match self {
            Symbolic::Count(m) => *m,
            Symbolic::Name(s) => match s.as_str() {
                "ln_d" => (0.5 + ln_d).floor() as usize,
                "2ln_d" => (0.5 + 2.0 * ln_d).floor() as usize,
                "d" => d,
                other => bail!("unknown symbolic m `{other}`"),
            },
        };
        Ok(m.max(1))
    }

    /// Features per split for `p` inputs: `sqrt_p` rounded down, `p`, or an
    /// explicit count.
    pub fn resolve_k(&self, p: usize) -> Result<usize> {
        let k = match self {
            Symbolic::Count(k) => *k,
            Symbolic::Name(s) => match s.as_str() {
                "sqrt_p" => (p as f64).sqrt().floor() as usize,
                "p" => p,
                other => bail!("unknown symbolic k `{other}`"),
            },
        };
        Ok(k.max(1))
    }

    pub fn label(&self) -> String {
        match self {
            Symbolic::Count(v) => v.to_string(),
            Symbolic::Name(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exhaustive splits on bootstrap samples.
    RandomForest,
    /// Random thresholds on the full sample.
    ExtraTrees,
    /// Exhaustive splits on the full sample.
    Cart,
}

impl Method {
    pub fn splitter(self) -> Splitter {
        match self {
            Method::ExtraTrees => Splitter::RandomThreshold,
            _ => Splitter::Exhaustive,
        }
    }

    pub fn bootstrap(self) -> bool {
        self == Method::RandomForest
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::RandomForest => "random_forest",
            Method::ExtraTrees => "extra_trees",
            Method::Cart => "cart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// One split; `repeats` reruns of the randomised algorithm on it.
    Holdout,
    /// `repeats` independent shuffled splits.
    Shuffled,
    /// `folds`-fold cross-validation.
    Kfold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionName {
    Gaussian,
    /// Needs `rademacher_s`.
    Rademacher,
    /// Rademacher with `s = √d`.
    SparseRademacher,
    HadamardSubsample,
    IdentitySubsample,
    Pca,
    Identity,
}

impl ProjectionName {
    pub fn resolve(self, d: usize, s: Option<f64>) -> Result<ProjectionKind> {
        Ok(match self {
            ProjectionName::Gaussian => ProjectionKind::Gaussian,
            ProjectionName::Rademacher => ProjectionKind::Rademacher {
                s: s.context("projection `rademacher` needs `rademacher_s`")?,
            },
            ProjectionName::SparseRademacher => ProjectionKind::Rademacher { s: (d as f64).sqrt() },
            ProjectionName::HadamardSubsample => ProjectionKind::HadamardSubsample,
            ProjectionName::IdentitySubsample => ProjectionKind::IdentitySubsample,
            ProjectionName::Pca => ProjectionKind::Pca,
            ProjectionName::Identity => ProjectionKind::Identity,
        })
    }
}

fn one() -> usize {
    1
}

fn default_repeats() -> usize {
    10
}

fn default_folds() -> usize {
    10
}

fn default_methods() -> Vec<Method> {
    vec![Method::RandomForest]
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::NoProjection]
}

fn default_projections() -> Vec<ProjectionName> {
    vec![ProjectionName::Gaussian]
}

fn default_m() -> Vec<Symbolic> {
    vec![Symbolic::Name("d".into())]
}

fn default_k() -> Vec<Symbolic> {
    vec![Symbolic::Name("sqrt_p".into())]
}

fn default_t() -> Vec<usize> {
    vec![100]
}

fn default_n_min() -> Vec<usize> {
    vec![1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    pub split: SplitMode,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_methods")]
    pub method: Vec<Method>,
    #[serde(default = "default_policies")]
    pub policy: Vec<Policy>,
    #[serde(default = "default_projections")]
    pub projection: Vec<ProjectionName>,
    pub rademacher_s: Option<f64>,
    #[serde(default = "default_m")]
    pub m: Vec<Symbolic>,
    #[serde(default = "default_k")]
    pub k: Vec<Symbolic>,
    #[serde(default = "default_t")]
    pub t: Vec<usize>,
    #[serde(default = "default_n_min")]
    pub n_min: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).context("invalid experiment config")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    fn check(&self) -> Result<()> {
        if self.method.is_empty()
            || self.policy.is_empty()
            || self.projection.is_empty()
            || self.m.is_empty()
            || self.k.is_empty()
            || self.t.is_empty()
            || self.n_min.is_empty()
        {
            bail!("every grid list must hold at least one value");
        }
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        Ok(())
    }

    /// Split plan for a data set of `n` samples. Holdout and shuffled
    /// splits default to a 2:1 train/test cut when sizes are not given.
    pub fn split_plan(&self, n: usize) -> SplitPlan {
        let n_train = self.n_train.unwrap_or(2 * n / 3);
        let n_test = self.n_test.unwrap_or(n - n_train.min(n));
        match self.split {
            SplitMode::Holdout => SplitPlan::FixedHoldout { n_train, n_test },
            SplitMode::Shuffled => SplitPlan::ShuffledRepeats {
                repeats: self.repeats,
                n_train,
                n_test,
            },
            SplitMode::Kfold => SplitPlan::KFold { k: self.folds },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbolic_m_values() {
        let ln = Symbolic::Name("ln_d".into());
        assert_eq!(ln.resolve_m(1000).unwrap(), 7);
        assert_eq!(ln.resolve_m(6).unwrap(), 2);
        assert_eq!(Symbolic::Name("2ln_d".into()).resolve_m(1000).unwrap(), 14);
        assert_eq!(Symbolic::Name("d".into()).resolve_m(983).unwrap(), 983);
        assert_eq!(Symbolic::Count(25).resolve_m(983).unwrap(), 25);
        assert!(Symbolic::Name("half".into()).resolve_m(10).is_err());
    }

    #[test]
    fn symbolic_k_values() {
        assert_eq!(Symbolic::Name("sqrt_p".into()).resolve_k(72).unwrap(), 8);
        assert_eq!(Symbolic::Name("sqrt_p".into()).resolve_k(103).unwrap(), 10);
        assert_eq!(Symbolic::Name("p".into()).resolve_k(72).unwrap(), 72);
    }

    #[test]
    fn parses_flat_document() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seed = 3
            split = "shuffled"
            n_train = 391
            n_test = 202
            policy = ["per_tree_subspace", "no_projection"]
            m = [1, "ln_d", "d"]
            t = [10]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.m.len(), 3);
        assert_eq!(cfg.method, vec![Method::RandomForest]);
        assert_eq!(
            cfg.split_plan(593),
            SplitPlan::ShuffledRepeats { repeats: 10, n_train: 391, n_test: 202 }
        );
    }

    #[test]
    fn rejects_unknown_keys_and_empty_lists() {
        assert!(ExperimentConfig::from_toml_str("split = \"kfold\"\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("split = \"kfold\"\nt = []").is_err());
    }
}
