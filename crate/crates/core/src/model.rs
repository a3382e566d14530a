//! Shared domain types and the linear click model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::featurizer::{unhash_interaction, SparseFeatureVector};
use crate::math::sigmoid;

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_newtype!(SessionId);
id_newtype!(UserId);
id_newtype!(ItemId);

/// One logged display of an item to a user.
#[derive(Debug, Clone, PartialEq)]
pub struct Impression {
    pub day: u32,
    pub session_id: SessionId,
    pub user_id: UserId,
    pub item_id: ItemId,
    /// Display position, 1-based.
    pub rank: u32,
    pub clicked: bool,
    /// One value per schema column. Values in the rank column and in derived
    /// columns are placeholders: the rank comes from `rank` and derived
    /// values are injected from the priors.
    pub raw_features: Vec<f64>,
}

impl Impression {
    /// Copy of this impression displayed at another rank.
    pub fn at_rank(&self, rank: u32) -> Impression {
        Impression { rank, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Categorical,
    Proportion,
    Similarity,
    HeavyTailed,
    Rank,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Categorical => "categorical",
            FeatureKind::Proportion => "proportion",
            FeatureKind::Similarity => "similarity",
            FeatureKind::HeavyTailed => "heavy_tailed",
            FeatureKind::Rank => "rank",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureKind> {
        Ok(match s {
            "categorical" => FeatureKind::Categorical,
            "proportion" => FeatureKind::Proportion,
            "similarity" => FeatureKind::Similarity,
            "heavy_tailed" => FeatureKind::HeavyTailed,
            "rank" => FeatureKind::Rank,
            other => return Err(Error::Schema(format!("unknown feature kind `{other}`"))),
        })
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Columns whose value is computed from the training priors rather than
/// read from the log. They are recognized by reserved column names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedFeature {
    Coec,
    Ucoec,
    /// Number of training impressions of the user.
    UserActivity,
}

impl DerivedFeature {
    pub fn from_name(name: &str) -> Option<DerivedFeature> {
        match name {
            "coec" => Some(DerivedFeature::Coec),
            "ucoec" => Some(DerivedFeature::Ucoec),
            "user_activity" => Some(DerivedFeature::UserActivity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub max_bins: u32,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind, max_bins: u32) -> FeatureSpec {
        FeatureSpec { name: name.into(), kind, max_bins }
    }

    pub fn derived(&self) -> Option<DerivedFeature> {
        DerivedFeature::from_name(&self.name)
    }

    /// True for columns that must be present in a raw log.
    pub fn is_observed(&self) -> bool {
        self.kind != FeatureKind::Rank && self.derived().is_none()
    }
}

/// Ordered feature declarations. Exactly one column has kind `rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    specs: Vec<FeatureSpec>,
    rank_index: usize,
}

impl FeatureSchema {
    pub fn new(specs: Vec<FeatureSpec>) -> Result<FeatureSchema> {
        let mut rank_index = None;
        for (i, spec) in specs.iter().enumerate() {
            if spec.max_bins == 0 {
                return Err(Error::Schema(format!("feature `{}` has max_bins 0", spec.name)));
            }
            if specs[..i].iter().any(|s| s.name == spec.name) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", spec.name)));
            }
            if spec.kind == FeatureKind::Rank {
                if rank_index.is_some() {
                    return Err(Error::Schema("more than one rank feature".to_string()));
                }
                rank_index = Some(i);
            }
        }
        let rank_index =
            rank_index.ok_or_else(|| Error::Schema("no feature of kind rank".to_string()))?;
        Ok(FeatureSchema { specs, rank_index })
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn rank_index(&self) -> usize {
        self.rank_index
    }

    /// Number of non-rank columns (`d`).
    pub fn item_feature_count(&self) -> usize {
        self.specs.len() - 1
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Indices of the columns read from a raw log, in schema order.
    pub fn observed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.specs.iter().enumerate().filter(|(_, s)| s.is_observed()).map(|(i, _)| i)
    }

    /// Checks an impression against the schema. Placeholder columns are
    /// not inspected.
    pub fn validate(&self, impression: &Impression) -> Result<()> {
        if impression.rank == 0 {
            return Err(Error::Schema("rank must be >= 1".to_string()));
        }
        if impression.raw_features.len() != self.specs.len() {
            return Err(Error::Schema(format!(
                "impression has {} feature values, schema has {}",
                impression.raw_features.len(),
                self.specs.len()
            )));
        }
        for (spec, &value) in self.specs.iter().zip(&impression.raw_features) {
            if spec.is_observed() {
                crate::featurizer::check_domain(value, spec)?;
            }
        }
        Ok(())
    }
}

/// Layout of the interaction id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashConfig {
    /// Multiplier separating the rank slot from the bin (`M`).
    pub rank_multiplier: u64,
    /// Bins reserved per feature (`B_max`).
    pub max_bins_per_feature: u32,
    /// Largest rank with its own slot; deeper ranks share slot `max_rank + 1`.
    pub max_rank: u32,
}

impl Default for HashConfig {
    fn default() -> Self {
        HashConfig { rank_multiplier: 10_000, max_bins_per_feature: 64, max_rank: 50 }
    }
}

impl HashConfig {
    pub fn new(rank_multiplier: u64, max_bins_per_feature: u32, max_rank: u32) -> Result<HashConfig> {
        let cfg = HashConfig { rank_multiplier, max_bins_per_feature, max_rank };
        if max_bins_per_feature == 0 {
            return Err(Error::Config("max_bins_per_feature must be >= 1".to_string()));
        }
        if rank_multiplier <= u64::from(max_rank) + 1 {
            return Err(Error::Config(format!(
                "rank multiplier {rank_multiplier} must exceed max_rank + 1 = {}",
                u64::from(max_rank) + 1
            )));
        }
        Ok(cfg)
    }

    /// Slot used for a logged rank.
    #[inline]
    pub fn rank_slot(&self, rank: u32) -> u32 {
        rank.min(self.overflow_slot())
    }

    #[inline]
    pub fn overflow_slot(&self) -> u32 {
        self.max_rank + 1
    }

    /// Checks the config against a schema's bin budgets.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        for spec in schema.specs() {
            if spec.kind != FeatureKind::Rank && spec.max_bins > self.max_bins_per_feature {
                return Err(Error::Schema(format!(
                    "feature `{}` declares {} bins, more than B_max = {}",
                    spec.name, spec.max_bins, self.max_bins_per_feature
                )));
            }
        }
        Ok(())
    }
}

/// Logistic model over interaction ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Unregularized bias term.
    pub intercept: f64,
    pub weights: BTreeMap<u64, f64>,
    pub hash_config: HashConfig,
    pub schema: FeatureSchema,
    /// Inverse regularization strength the model was fitted with.
    pub c_value: f64,
}

impl LinearModel {
    /// All-zero model.
    pub fn zeros(schema: FeatureSchema, hash_config: HashConfig, c_value: f64) -> LinearModel {
        LinearModel { intercept: 0.0, weights: BTreeMap::new(), hash_config, schema, c_value }
    }

    #[inline]
    pub fn weight(&self, id: u64) -> f64 {
        self.weights.get(&id).copied().unwrap_or(0.0)
    }

    /// Checks that `id` is a valid interaction for this model's schema.
    pub fn check_id(&self, id: u64) -> Result<()> {
        let decoded = unhash_interaction(id, &self.hash_config)?;
        decoded.check_schema(id, &self.schema)
    }

    /// `intercept + sum of weights` over the vector's ids.
    pub fn logit(&self, features: &SparseFeatureVector) -> Result<f64> {
        for &id in features.ids() {
            self.check_id(id).map_err(|_| Error::InvalidFeature(id))?;
        }
        Ok(self.logit_ids(features.ids()))
    }

    /// Logit without id validation.
    #[inline]
    pub fn logit_ids(&self, ids: &[u64]) -> f64 {
        ids.iter().fold(self.intercept, |acc, id| acc + self.weight(*id))
    }

    pub fn predict_proba(&self, features: &SparseFeatureVector) -> Result<f64> {
        self.logit(features).map(sigmoid)
    }

    /// Weights with `|w| > threshold`.
    pub fn active_weights(&self, threshold: f64) -> usize {
        self.weights.values().filter(|w| w.abs() > threshold).count()
    }
}
