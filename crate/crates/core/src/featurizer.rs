//! Raw impressions to sparse binary interaction vectors.
//!
//! Every non-rank column is quantized into a bin and emitted twice: once
//! as a base id (rank slot 0, meaning "no rank") and once crossed with the
//! display rank. The rank column itself becomes a one-hot rank id. Ids are
//! laid out as `((feature * B_max + bin) * M) + rank_slot`, so decoding is
//! a `mod M` followed by a `div`/`mod B_max`, and all ids of feature `f`
//! live in `[f * B_max * M, (f + 1) * B_max * M)`. Emitting columns in
//! schema order therefore yields sorted vectors without a sort.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::model::{DerivedFeature, FeatureKind, FeatureSchema, FeatureSpec, HashConfig, Impression};
use crate::stats::Priors;

/// Strictly increasing interaction ids, each with implicit value 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseFeatureVector {
    ids: Vec<u64>,
}

impl SparseFeatureVector {
    pub fn new(ids: Vec<u64>) -> Result<SparseFeatureVector> {
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Encoding("ids must be strictly increasing".to_string()));
        }
        Ok(SparseFeatureVector { ids })
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn into_ids(self) -> Vec<u64> {
        self.ids
    }
}

/// Row-major batch of feature vectors sharing one length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureBatch {
    stride: usize,
    ids: Vec<u64>,
}

impl FeatureBatch {
    pub fn from_rows(stride: usize, ids: Vec<u64>) -> FeatureBatch {
        assert!(stride == 0 && ids.is_empty() || stride > 0 && ids.len().is_multiple_of(stride));
        FeatureBatch { stride, ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len().checked_div(self.stride).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn row(&self, index: usize) -> &[u64] {
        &self.ids[index * self.stride..(index + 1) * self.stride]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u64]> + '_ {
        // chunks_exact panics on 0
        self.ids.chunks_exact(self.stride.max(1))
    }

    pub fn as_flat(&self) -> &[u64] {
        &self.ids
    }

    pub fn to_vectors(&self) -> Vec<SparseFeatureVector> {
        self.rows().map(|r| SparseFeatureVector { ids: r.to_vec() }).collect()
    }
}

/// A decoded interaction id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interaction {
    pub feature: u32,
    pub bin: u32,
    /// Rank slot; 0 for base (uncrossed) features.
    pub rank: u32,
}

impl Interaction {
    /// Checks the decoded fields against a schema.
    pub fn check_schema(&self, id: u64, schema: &FeatureSchema) -> Result<()> {
        let fail = |reason: String| Err(Error::Decoding { id, reason });
        let Some(spec) = schema.specs().get(self.feature as usize) else {
            return fail(format!("feature index {} outside schema of {}", self.feature, schema.len()));
        };
        if spec.kind == FeatureKind::Rank {
            if self.bin != 0 || self.rank == 0 {
                return fail(format!("rank feature with bin {} and rank {}", self.bin, self.rank));
            }
        } else if self.bin >= spec.max_bins {
            return fail(format!("bin {} >= max_bins {} of `{}`", self.bin, spec.max_bins, spec.name));
        }
        Ok(())
    }
}

/// Checks a raw value against the domain of its column kind.
pub fn check_domain(value: f64, spec: &FeatureSpec) -> Result<()> {
    let ok = value.is_finite()
        && match spec.kind {
            FeatureKind::Categorical => value >= 0.0 && value == libm::floor(value),
            FeatureKind::Proportion => (0.0..=1.0).contains(&value),
            FeatureKind::Similarity => (-1.0..=1.0).contains(&value),
            FeatureKind::HeavyTailed => true,
            FeatureKind::Rank => value >= 1.0 && value == libm::floor(value),
        };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain { feature: spec.name.clone(), value })
    }
}

/// Type-aware quantization of one value.
pub fn quantize(value: f64, kind: FeatureKind) -> Result<u32> {
    let domain = |name: &str| Error::Domain { feature: name.to_string(), value };
    if !value.is_finite() {
        return Err(domain(kind.as_str()));
    }
    let bin = match kind {
        FeatureKind::Categorical | FeatureKind::Rank => {
            if value < 0.0 || value != libm::floor(value) {
                return Err(domain(kind.as_str()));
            }
            value
        }
        FeatureKind::Proportion => {
            if !(0.0..=1.0).contains(&value) {
                return Err(domain(kind.as_str()));
            }
            libm::floor(value * 20.0)
        }
        FeatureKind::Similarity => {
            if !(-1.0..=1.0).contains(&value) {
                return Err(domain(kind.as_str()));
            }
            libm::floor((value + 1.0) * 5.0)
        }
        FeatureKind::HeavyTailed => libm::floor(libm::log1p(value.max(0.0)) * 2.0),
    };
    if bin > f64::from(u32::MAX) {
        return Err(domain(kind.as_str()));
    }
    Ok(bin as u32)
}

/// Quantizes and checks the result against the column's bin budget.
pub fn quantize_spec(value: f64, spec: &FeatureSpec) -> Result<u32> {
    let bin = quantize(value, spec.kind).map_err(|e| match e {
        Error::Domain { value, .. } => Error::Domain { feature: spec.name.clone(), value },
        other => other,
    })?;
    if bin >= spec.max_bins {
        return Err(Error::Schema(format!(
            "value {value} of `{}` falls in bin {bin}, max_bins is {}",
            spec.name, spec.max_bins
        )));
    }
    Ok(bin)
}

/// Encodes `(feature, bin, rank slot)` as `((feature * B_max + bin) * M) + rank`.
#[inline]
pub fn hash_interaction(feature: u32, bin: u32, rank: u32, cfg: &HashConfig) -> Result<u64> {
    if bin >= cfg.max_bins_per_feature {
        return Err(Error::Encoding(format!(
            "bin {bin} >= B_max {}",
            cfg.max_bins_per_feature
        )));
    }
    if rank > cfg.overflow_slot() {
        return Err(Error::Encoding(format!("rank slot {rank} > {}", cfg.overflow_slot())));
    }
    u64::from(feature)
        .checked_mul(u64::from(cfg.max_bins_per_feature))
        .and_then(|x| x.checked_add(u64::from(bin)))
        .and_then(|x| x.checked_mul(cfg.rank_multiplier))
        .and_then(|x| x.checked_add(u64::from(rank)))
        .ok_or_else(|| Error::Encoding(format!("feature index {feature} overflows the id space")))
}

/// Inverse of [`hash_interaction`].
#[inline]
pub fn unhash_interaction(id: u64, cfg: &HashConfig) -> Result<Interaction> {
    let rank = id % cfg.rank_multiplier;
    let cell = id / cfg.rank_multiplier;
    let bins = u64::from(cfg.max_bins_per_feature);
    let bin = (cell % bins) as u32;
    let feature = cell / bins;
    if rank > u64::from(cfg.overflow_slot()) {
        return Err(Error::Decoding {
            id,
            reason: format!("rank slot {rank} > {}", cfg.overflow_slot()),
        });
    }
    let feature = u32::try_from(feature)
        .map_err(|_| Error::Decoding { id, reason: format!("feature index {feature} too large") })?;
    Ok(Interaction { feature, bin, rank: rank as u32 })
}

/// Featurizes impressions under a fixed schema, id layout and set of priors.
#[derive(Debug, Clone, Copy)]
pub struct Featurizer<'a> {
    pub schema: &'a FeatureSchema,
    pub hash_config: HashConfig,
    pub priors: &'a Priors,
}

impl<'a> Featurizer<'a> {
    pub fn new(
        schema: &'a FeatureSchema,
        hash_config: HashConfig,
        priors: &'a Priors,
    ) -> Result<Featurizer<'a>> {
        hash_config.check_schema(schema)?;
        Ok(Featurizer { schema, hash_config, priors })
    }

    /// Ids per row: one rank id plus a base and a crossed id per column.
    pub fn stride(&self) -> usize {
        1 + 2 * self.schema.item_feature_count()
    }

    /// Value of column `index`, resolving derived columns from the priors.
    pub fn column_value(&self, impression: &Impression, index: usize) -> Result<f64> {
        let spec = &self.schema.specs()[index];
        match spec.derived() {
            None => Ok(impression.raw_features[index]),
            Some(DerivedFeature::Coec) => Ok(self.priors.items.coec_of(impression.item_id)),
            Some(DerivedFeature::Ucoec) => self.priors.items.ucoec_of(impression.item_id),
            Some(DerivedFeature::UserActivity) => {
                Ok(self.priors.items.user_activity(impression.user_id) as f64)
            }
        }
    }

    pub fn featurize(&self, impression: &Impression) -> Result<SparseFeatureVector> {
        self.featurize_at(impression, impression.rank)
    }

    /// Featurizes as if the impression had been displayed at `rank`.
    pub fn featurize_at(&self, impression: &Impression, rank: u32) -> Result<SparseFeatureVector> {
        self.schema.validate(impression)?;
        if rank == 0 {
            return Err(Error::Schema("rank must be >= 1".to_string()));
        }
        let slot = self.hash_config.rank_slot(rank);
        let mut ids = Vec::with_capacity(self.stride());
        for (f, spec) in self.schema.specs().iter().enumerate() {
            let f32_index = f as u32;
            if spec.kind == FeatureKind::Rank {
                ids.push(hash_interaction(f32_index, 0, slot, &self.hash_config)?);
            } else {
                let bin = quantize_spec(self.column_value(impression, f)?, spec)?;
                ids.push(hash_interaction(f32_index, bin, 0, &self.hash_config)?);
                ids.push(hash_interaction(f32_index, bin, slot, &self.hash_config)?);
            }
        }
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        Ok(SparseFeatureVector { ids })
    }

    pub fn featurize_batch(&self, log: &[Impression]) -> Result<FeatureBatch> {
        self.featurize_batch_at(log, None)
    }

    /// Columnar featurization: quantize one column over all rows, then
    /// combine its bins with the rank column by integer arithmetic.
    /// `rank_override` replaces every logged rank.
    pub fn featurize_batch_at(
        &self,
        log: &[Impression],
        rank_override: Option<u32>,
    ) -> Result<FeatureBatch> {
        let row_err = |index: usize, e: Error| Error::Row { index, source: alloc::boxed::Box::new(e) };
        let stride = self.stride();
        if log.is_empty() {
            return Ok(FeatureBatch::from_rows(stride, Vec::new()));
        }
        if rank_override == Some(0) {
            return Err(Error::Schema("rank must be >= 1".to_string()));
        }
        for (i, imp) in log.iter().enumerate() {
            if imp.raw_features.len() != self.schema.len() {
                return Err(row_err(i, Error::Schema(format!(
                    "impression has {} feature values, schema has {}",
                    imp.raw_features.len(),
                    self.schema.len()
                ))));
            }
            if imp.rank == 0 {
                return Err(row_err(i, Error::Schema("rank must be >= 1".to_string())));
            }
        }
        let cfg = &self.hash_config;
        let m = cfg.rank_multiplier;
        let slots: Vec<u64> = log
            .iter()
            .map(|imp| u64::from(cfg.rank_slot(rank_override.unwrap_or(imp.rank))))
            .collect();

        let mut out = alloc::vec![0u64; log.len() * stride];
        let mut bins: Vec<u32> = Vec::with_capacity(log.len());
        let mut pos = 0;
        for (f, spec) in self.schema.specs().iter().enumerate() {
            let feature_base = hash_interaction(f as u32, 0, 0, cfg)?;
            if spec.kind == FeatureKind::Rank {
                for (row, &slot) in out.chunks_exact_mut(stride).zip(&slots) {
                    row[pos] = feature_base + slot;
                }
                pos += 1;
                continue;
            }
            bins.clear();
            match spec.derived() {
                None => {
                    for (i, imp) in log.iter().enumerate() {
                        bins.push(quantize_spec(imp.raw_features[f], spec).map_err(|e| row_err(i, e))?);
                    }
                }
                Some(_) => {
                    for (i, imp) in log.iter().enumerate() {
                        let v = self.column_value(imp, f).map_err(|e| row_err(i, e))?;
                        bins.push(quantize_spec(v, spec).map_err(|e| row_err(i, e))?);
                    }
                }
            }
            for ((row, &slot), &bin) in out.chunks_exact_mut(stride).zip(&slots).zip(&bins) {
                let base = feature_base + u64::from(bin) * m;
                row[pos] = base;
                row[pos + 1] = base + slot;
            }
            pos += 2;
        }
        Ok(FeatureBatch { stride, ids: out })
    }

    /// Builds every interaction as a text key (`price_Bin5_x_Rank12`),
    /// interns it in a vocabulary and re-encodes vocabulary entries into
    /// the integer id space. Output is identical to [`Self::featurize_batch`];
    /// this is the string-concatenation baseline the integer kernel replaces.
    pub fn featurize_string_reference(&self, log: &[Impression]) -> Result<FeatureBatch> {
        let stride = self.stride();
        let mut vocab: HashMap<String, u64> = HashMap::new();
        let mut out = Vec::with_capacity(log.len() * stride);
        let mut row_keys: Vec<String> = Vec::with_capacity(stride);
        for (i, imp) in log.iter().enumerate() {
            let row_err = |e: Error| Error::Row { index: i, source: alloc::boxed::Box::new(e) };
            self.schema.validate(imp).map_err(row_err)?;
            let slot = self.hash_config.rank_slot(imp.rank);
            row_keys.clear();
            for (f, spec) in self.schema.specs().iter().enumerate() {
                if spec.kind == FeatureKind::Rank {
                    row_keys.push(format!("{}_Rank{}", spec.name, slot));
                } else {
                    let v = self.column_value(imp, f).map_err(row_err)?;
                    let bin = quantize_spec(v, spec).map_err(row_err)?;
                    let base = format!("{}_Bin{}", spec.name, bin);
                    let mut cross = base.clone();
                    write!(cross, "_x_Rank{slot}").expect("write to String");
                    row_keys.push(base);
                    row_keys.push(cross);
                }
            }
            let start = out.len();
            for key in row_keys.drain(..) {
                let id = match vocab.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = self.encode_key(&key).map_err(row_err)?;
                        vocab.insert(key, id);
                        id
                    }
                };
                out.push(id);
            }
            out[start..].sort_unstable();
        }
        Ok(FeatureBatch::from_rows(stride, out))
    }

    fn encode_key(&self, key: &str) -> Result<u64> {
        let bad = || Error::Encoding(format!("malformed interaction key `{key}`"));
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad());
        let feature = |name: &str| self.schema.index_of(name).map(|i| i as u32).ok_or_else(bad);
        let (head, rank) = match key.rfind("_x_Rank") {
            Some(at) => (&key[..at], num(&key[at + 7..])?),
            None => match key.rfind("_Bin") {
                Some(_) => (key, 0),
                None => {
                    let at = key.rfind("_Rank").ok_or_else(bad)?;
                    let f = feature(&key[..at])?;
                    return hash_interaction(f, 0, num(&key[at + 5..])?, &self.hash_config);
                }
            },
        };
        let at = head.rfind("_Bin").ok_or_else(bad)?;
        let f = feature(&head[..at])?;
        hash_interaction(f, num(&head[at + 4..])?, rank, &self.hash_config)
    }
}
