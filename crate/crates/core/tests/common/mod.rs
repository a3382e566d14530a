#![allow(dead_code)]

use debias_core::featurizer::hash_interaction;
use debias_core::simulator::{default_schema, generate, SimulationConfig};
use debias_core::trainer::Dataset;
use debias_core::{
    FeatureBatch, FeatureSchema, HashConfig, Impression, ItemId, Priors, SessionId, Smoothing, UserId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_sim(seed: u64) -> SimulationConfig {
    SimulationConfig { n_items: 80, n_users: 120, n_sessions: 2_000, seed, ..SimulationConfig::default() }
}

/// A simulated log and priors fitted on all of it.
pub fn sim_priors(seed: u64) -> (Vec<Impression>, Priors) {
    let (log, _) = generate(&small_sim(seed)).unwrap();
    let priors = Priors::fit(&log, HashConfig::default().max_rank, Smoothing::default()).unwrap();
    (log, priors)
}

/// Random valid impression for the default schema. Ranks go past the
/// overflow slot and ids past the simulated ones to exercise cold paths.
pub fn random_impression(rng: &mut impl Rng) -> Impression {
    let schema = default_schema();
    let mut raw = vec![0.0; schema.len()];
    raw[1] = rng.random_range(0.0..1e5);
    raw[2] = rng.random_range(0.0..=1.0);
    raw[3] = rng.random_range(0.0f64..12.0).exp();
    raw[4] = rng.random_range(0.0..=1.0);
    raw[5] = rng.random_range(-1.0..=1.0);
    raw[6] = f64::from(rng.random_range(0..3u32));
    Impression {
        day: rng.random_range(1..=45),
        session_id: SessionId(rng.random_range(0..1000)),
        user_id: UserId(rng.random_range(0..150)),
        item_id: ItemId(rng.random_range(0..100)),
        rank: rng.random_range(1..=70),
        clicked: rng.random_bool(0.3),
        raw_features: raw,
    }
}

pub fn random_log(seed: u64, n: usize) -> Vec<Impression> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_impression(&mut rng)).collect()
}

pub fn toy_schema() -> FeatureSchema {
    use debias_core::{FeatureKind, FeatureSpec};
    FeatureSchema::new(vec![
        FeatureSpec::new("rank", FeatureKind::Rank, 1),
        FeatureSpec::new("a", FeatureKind::Categorical, 8),
        FeatureSpec::new("b", FeatureKind::Categorical, 8),
        FeatureSpec::new("c", FeatureKind::Categorical, 8),
    ])
    .unwrap()
}

/// Random sparse design over `toy_schema` with a planted signal.
pub fn toy_dataset(seed: u64, n: usize) -> Dataset {
    let hc = HashConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::with_capacity(n * 4);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = rng.random_range(1..=5u32);
        let (a, b, c) = (rng.random_range(0..8u32), rng.random_range(0..8u32), rng.random_range(0..8u32));
        let mut row = vec![
            hash_interaction(0, 0, rank, &hc).unwrap(),
            hash_interaction(1, a, 0, &hc).unwrap(),
            hash_interaction(2, b, 0, &hc).unwrap(),
            hash_interaction(3, c, rank, &hc).unwrap(),
        ];
        row.sort_unstable();
        ids.extend(row);
        let z = -1.0 + 0.4 * f64::from(a) - 0.5 * f64::from(rank) + 0.1 * f64::from(c);
        labels.push(rng.random::<f64>() < debias_core::math::sigmoid(z));
    }
    Dataset::new(FeatureBatch::from_rows(4, ids), labels).unwrap()
}
