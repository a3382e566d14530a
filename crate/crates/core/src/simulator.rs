//! Synthetic click logs under a position-based model.
//!
//! Each slot is clicked with probability `examination(rank) * r(user, item)`.
//! Slates are ordered by a logging policy that ranks by latent item quality
//! plus Gaussian noise, so display rank is confounded with quality.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{FeatureKind, FeatureSchema, FeatureSpec, Impression, ItemId, SessionId, UserId};

/// Relative examination per rank of a 3x4 grid layout read row by row,
/// normalized to rank 1.
pub const GRID_PROPENSITIES: [f64; 12] = [1.00, 0.57, 0.40, 0.31, 0.23, 0.18, 0.16, 0.13, 0.11, 0.10, 0.09, 0.08];

const ITEM_STREAM: u64 = 1;
const USER_STREAM: u64 = 2;
const SESSION_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_items: usize,
    pub n_users: usize,
    pub n_sessions: usize,
    pub slate_size: usize,
    pub days: u32,
    /// Relative examination of ranks 1..=len; deeper ranks decay geometrically.
    pub propensity_grid: Vec<f64>,
    /// Absolute examination probability at rank 1.
    pub base_examination: f64,
    /// Standard deviation of the logging policy's Gaussian noise.
    pub logging_policy_noise: f64,
    /// Weight of item quality in the logging score.
    pub confounding_strength: f64,
    /// Slope of relevance in item quality.
    pub quality_weight: f64,
    /// Relevance boost when the item category matches the user's taste.
    pub affinity_weight: f64,
    pub relevance_offset: f64,
    /// Users examine slots `activity^elasticity` times more (normalized to
    /// mean 1 over sessions), independently of relevance.
    pub activity_click_elasticity: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_items: 400,
            n_users: 3_000,
            n_sessions: 100_000,
            slate_size: 12,
            days: 45,
            propensity_grid: GRID_PROPENSITIES.to_vec(),
            base_examination: 0.6,
            logging_policy_noise: 0.1,
            confounding_strength: 1.0,
            quality_weight: 2.0,
            affinity_weight: 0.5,
            relevance_offset: -0.5,
            activity_click_elasticity: 1.5,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_items == 0 || self.n_users == 0 {
            return fail("n_items and n_users must be >= 1");
        }
        if self.slate_size == 0 || self.slate_size > self.n_items {
            return fail("slate_size must be in 1..=n_items");
        }
        if self.days == 0 {
            return fail("days must be >= 1");
        }
        if self.propensity_grid.is_empty()
            || self.propensity_grid.iter().any(|&p| !(p > 0.0 && p <= 1.0))
        {
            return fail("propensity_grid values must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.base_examination) {
            return fail("base_examination must lie in [0, 1]");
        }
        if !(self.logging_policy_noise >= 0.0) {
            return fail("logging_policy_noise must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.confounding_strength) {
            return fail("confounding_strength must lie in [0, 1]");
        }
        for (name, v) in [
            ("quality_weight", self.quality_weight),
            ("affinity_weight", self.affinity_weight),
            ("relevance_offset", self.relevance_offset),
            ("activity_click_elasticity", self.activity_click_elasticity),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Relative examination at a 1-based rank.
    pub fn relative_examination(&self, rank: u32) -> f64 {
        let grid = &self.propensity_grid;
        let k = rank as usize;
        if k <= grid.len() {
            return grid[k - 1];
        }
        let last = grid[grid.len() - 1];
        let ratio = if grid.len() >= 2 { last / grid[grid.len() - 2] } else { 1.0 };
        last * libm::pow(ratio, (k - grid.len()) as f64)
    }

    /// Absolute examination probability at a 1-based rank.
    pub fn examination(&self, rank: u32) -> f64 {
        (self.base_examination * self.relative_examination(rank)).min(1.0)
    }
}

/// Latent item quality and per-(user, item) relevance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub quality: BTreeMap<ItemId, f64>,
    pub relevance: BTreeMap<(UserId, ItemId), f64>,
}

impl GroundTruth {
    pub fn relevance_of(&self, user: UserId, item: ItemId) -> Option<f64> {
        self.relevance.get(&(user, item)).copied()
    }
}

/// Column names of the logs [`generate`] produces.
pub fn default_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        FeatureSpec::new("rank", FeatureKind::Rank, 1),
        FeatureSpec::new("price", FeatureKind::HeavyTailed, 32),
        FeatureSpec::new("rating", FeatureKind::Proportion, 21),
        FeatureSpec::new("review_volume", FeatureKind::HeavyTailed, 32),
        FeatureSpec::new("visual_quality", FeatureKind::Proportion, 21),
        FeatureSpec::new("similarity", FeatureKind::Similarity, 11),
        FeatureSpec::new("device", FeatureKind::Categorical, 3),
        FeatureSpec::new("coec", FeatureKind::HeavyTailed, 16),
        FeatureSpec::new("ucoec", FeatureKind::HeavyTailed, 24),
        FeatureSpec::new("user_activity", FeatureKind::HeavyTailed, 32),
    ])
    .expect("static schema")
}

const N_CATEGORIES: u32 = 4;

struct Item {
    quality: f64,
    category: u32,
    price: f64,
    rating: f64,
    reviews: f64,
    visual: f64,
}

struct User {
    taste: u32,
    device: u32,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates a log sorted by session (and therefore by day) plus the
/// relevance of every (user, item) pair that appears in it.
pub fn generate(config: &SimulationConfig) -> Result<(Vec<Impression>, GroundTruth)> {
    config.validate()?;
    let schema = default_schema();
    let width = schema.len();

    let mut rng = stream(config.seed, ITEM_STREAM);
    let items: Vec<Item> = (0..config.n_items)
        .map(|_| {
            let quality = normal(&mut rng);
            let category = rng.random_range(0..N_CATEGORIES);
            let price = libm::exp(4.0 - 0.3 * quality + 0.8 * normal(&mut rng));
            let rating = sigmoid(1.0 + 0.9 * quality + 0.6 * normal(&mut rng));
            let reviews = libm::exp(3.0 + 0.7 * quality + 1.0 * normal(&mut rng));
            let visual = sigmoid(0.5 * quality + 1.0 * normal(&mut rng));
            Item { quality, category, price, rating, reviews, visual }
        })
        .collect();

    let mut rng = stream(config.seed, USER_STREAM);
    let mut activity = Vec::with_capacity(config.n_users);
    let users: Vec<User> = (0..config.n_users)
        .map(|_| {
            activity.push(libm::exp(normal(&mut rng)));
            User { taste: rng.random_range(0..N_CATEGORIES), device: rng.random_range(0..3) }
        })
        .collect();
    let user_dist = WeightedIndex::new(&activity).map_err(|e| Error::Config(format!("{e}")))?;
    let happiness: Vec<f64> = activity.iter().map(|&a| libm::pow(a, config.activity_click_elasticity)).collect();
    let norm = activity.iter().zip(&happiness).map(|(a, h)| a * h).sum::<f64>() / activity.iter().sum::<f64>();

    let relevance = |u: &User, i: &Item| {
        let affinity = if u.taste == i.category { 1.0 } else { 0.0 };
        sigmoid(config.quality_weight * i.quality + config.affinity_weight * affinity + config.relevance_offset)
    };

    let mut log = Vec::with_capacity(config.n_sessions * config.slate_size);
    let mut truth = GroundTruth {
        quality: items.iter().enumerate().map(|(i, it)| (ItemId(i as u64), it.quality)).collect(),
        relevance: BTreeMap::new(),
    };
    let mut slate: Vec<(f64, usize)> = Vec::with_capacity(config.slate_size);

    for s in 0..config.n_sessions {
        let mut rng = stream(config.seed, SESSION_STREAM_BASE + s as u64);
        let day = 1 + ((s as u64 * u64::from(config.days)) / config.n_sessions as u64) as u32;
        let user_index = user_dist.sample(&mut rng);
        let user = &users[user_index];
        slate.clear();
        for i in rand::seq::index::sample(&mut rng, config.n_items, config.slate_size) {
            let score = config.confounding_strength * items[i].quality
                + config.logging_policy_noise * normal(&mut rng);
            slate.push((score, i));
        }
        slate.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (k, &(_, i)) in slate.iter().enumerate() {
            let item = &items[i];
            let rank = k as u32 + 1;
            let r = relevance(user, item);
            let examination = (config.examination(rank) * happiness[user_index] / norm).min(1.0);
            let clicked = rng.random::<f64>() < examination * r;
            let affinity = if user.taste == item.category { 1.0 } else { 0.0 };
            let similarity = (0.6 * affinity - 0.3 + 0.25 * normal(&mut rng)).clamp(-1.0, 1.0);
            let mut raw = vec![0.0; width];
            raw[1] = item.price;
            raw[2] = item.rating;
            raw[3] = item.reviews;
            raw[4] = item.visual;
            raw[5] = similarity;
            raw[6] = f64::from(user.device);
            let (user_id, item_id) = (UserId(user_index as u64), ItemId(i as u64));
            truth.relevance.insert((user_id, item_id), r);
            log.push(Impression {
                day,
                session_id: SessionId(s as u64),
                user_id,
                item_id,
                rank,
                clicked,
                raw_features: raw,
            });
        }
    }
    Ok((log, truth))
}

/// Draws a rank-independent relevance label `~ Bernoulli(r(user, item))`
/// per impression. Pairs missing from `truth` are an error.
pub fn relevance_labels(truth: &GroundTruth, impressions: &[Impression], seed: u64) -> Result<Vec<bool>> {
    let mut rng = stream(seed, 3);
    impressions
        .iter()
        .map(|imp| {
            let r = truth
                .relevance_of(imp.user_id, imp.item_id)
                .ok_or_else(|| Error::Config(format!("no relevance for user {} item {}", imp.user_id, imp.item_id)))?;
            Ok(rng.random::<f64>() < r)
        })
        .collect()
}

/// Splits a day-ordered log into `day <= split_day` and the rest.
pub fn temporal_split(log: &[Impression], split_day: u32) -> (Vec<Impression>, Vec<Impression>) {
    log.iter().cloned().partition(|imp| imp.day <= split_day)
}
