//! Multi-label tree ensembles grown on randomly projected output spaces.
//!
//! Split scores are computed on `Φ y` where `Φ` is an `m × d` random
//! projection of the label space, while leaf predictions are always
//! averaged from the original label vectors. No decoding step is needed
//! at prediction time.
//!
//! The crate is organised bottom-up:
//!
//! - [`matrix`], [`dataset`], [`rng`]: containers and the seeded randomness contract
//! - [`projection`]: generators for `Φ` and distortion checks
//! - [`tree`]: single multi-output trees (CART, Random-Forest and Extra-Trees style)
//! - [`ensemble`]: shared-subspace and per-tree-subspace ensembles
//! - [`metrics`]: label ranking average precision
//! - [`decomposition`]: Monte Carlo bias/variance decomposition on synthetic problems
//! - [`io`]: svmlight-style multi-label files and train/test split plans

pub mod dataset;
pub mod decomposition;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod projection;
pub mod rng;
pub mod tree;

pub use dataset::{DataSet, DataView, FeatureMatrix, FeatureSource};
pub use ensemble::{Ensemble, EnsembleConfig, FitTiming, Policy};
pub use error::{Error, Result};
pub use matrix::{DenseMatrix, SparseMatrix, SparseRow};
pub use projection::{ProjectionKind, ProjectionMatrix, ProjectionSpec};
pub use rng::RngStream;
pub use tree::{Splitter, Tree, TreeConfig};
