//! Position-debiased click modeling.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the whole modeling
//! path: position-CTR and COEC priors, type-aware quantization, reversible
//! integer hashing of (feature bin, rank) conjunctions, L2-regularized
//! logistic regression, counterfactual rank-1 scoring, a position-based
//! click simulator and AUC metrics. File formats and the command line live
//! in the `debias-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod featurizer;
pub mod math;
pub mod metrics;
pub mod model;
pub mod scorer;
pub mod simulator;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
pub use featurizer::{FeatureBatch, Interaction, SparseFeatureVector};
pub use model::{
    FeatureKind, FeatureSchema, FeatureSpec, HashConfig, Impression, ItemId, LinearModel,
    SessionId, UserId,
};
pub use stats::{Priors, PositionPropensityTable, PriorTable, Smoothing};
