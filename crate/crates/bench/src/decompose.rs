//! Settings for the `decompose` subcommand.

use anyhow::{Context, Result};
use rpforest::decomposition::{estimate_ensemble, DecompositionConfig, DecompositionReport, GaussianNoiseProblem};
use rpforest::projection::ProjectionSpec;
use rpforest::{EnsembleConfig, Policy, TreeConfig};
use serde::{Deserialize, Serialize};

use crate::config::{Method, ProjectionName};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSettings {
    pub seed: u64,
    pub threads: usize,
    pub policy: Policy,
    pub projection: ProjectionName,
    pub m: usize,
    pub t: usize,
    pub k: usize,
    pub method: Method,
    pub n_samples: usize,
    pub n_ls: usize,
    pub n_phi: usize,
    pub n_eps: usize,
    pub noise_std: f64,
}

impl Default for DecomposeSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 1,
            policy: Policy::PerTreeSubspace,
            projection: ProjectionName::Gaussian,
            m: 1,
            t: 10,
            k: 2,
            method: Method::RandomForest,
            n_samples: 100,
            n_ls: 30,
            n_phi: 20,
            n_eps: 20,
            noise_std: 0.3,
        }
    }
}

impl DecomposeSettings {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).context("invalid decompose config")
    }

    pub fn run(&self) -> Result<DecompositionReport> {
        let problem = GaussianNoiseProblem { noise_std: self.noise_std };
        let tree = TreeConfig {
            k: self.k,
            n_min: 1,
            splitter: self.method.splitter(),
            bootstrap: self.method.bootstrap(),
        };
        let spec = ProjectionSpec::new(self.projection.resolve(2, None)?, self.m);
        let mut cfg = DecompositionConfig::new(EnsembleConfig::new(self.t, spec, self.policy, tree, self.seed), self.n_samples);
        cfg.n_ls = self.n_ls;
        cfg.n_phi = self.n_phi;
        cfg.n_eps = self.n_eps;
        cfg.threads = self.threads;
        Ok(estimate_ensemble(&problem, &cfg)?)
    }
}
