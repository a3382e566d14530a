mod common;

use std::collections::BTreeMap;

use debias_core::featurizer::{hash_interaction, Featurizer};
use debias_core::scorer::{counterfactual_score, rerank};
use debias_core::simulator::{default_schema, generate, temporal_split, SimulationConfig};
use debias_core::stats::fit_position_ctr;
use debias_core::trainer::{fit, Dataset, TrainConfig};
use debias_core::{HashConfig, Impression, LinearModel, Priors, Smoothing};

fn train(log: &[Impression], c: f64) -> (LinearModel, Priors) {
    let hc = HashConfig::default();
    let schema = default_schema();
    let priors = Priors::fit(log, hc.max_rank, Smoothing::default()).unwrap();
    let fz = Featurizer::new(&schema, hc, &priors).unwrap();
    let data = Dataset::new(fz.featurize_batch(log).unwrap(), log.iter().map(|i| i.clicked).collect()).unwrap();
    (fit(&data, &TrainConfig::default().with_c(c), &schema, hc).unwrap(), priors)
}

fn norm(m: &LinearModel) -> f64 {
    m.weights.values().map(|w| w * w).sum::<f64>().sqrt()
}

#[test]
fn weight_norm_shrinks_with_c() {
    let (log, _) = generate(&common::small_sim(3)).unwrap();
    let grid = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 1.0];
    let norms: Vec<f64> = grid.iter().map(|&c| norm(&train(&log, c).0)).collect();
    for w in norms.windows(2) {
        assert!(w[0] <= w[1] + 1e-6 * w[1].max(1.0), "{norms:?}");
    }
    assert!(norms[0] < norms[6] / 10.0, "{norms:?}");
}

#[test]
fn fit_is_deterministic() {
    let (log, _) = generate(&common::small_sim(4)).unwrap();
    let (a, _) = train(&log, 1e-2);
    let (b, _) = train(&log, 1e-2);
    assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
    assert_eq!(a.weights.len(), b.weights.len());
    for ((ia, wa), (ib, wb)) in a.weights.iter().zip(&b.weights) {
        assert_eq!(ia, ib);
        assert!((wa - wb).abs() <= 1e-10);
    }
}

#[test]
fn priors_leak_when_test_rows_are_added() {
    let (log, _) = generate(&common::small_sim(5)).unwrap();
    let (train_rows, test_rows) = temporal_split(&log, 35);
    let max_rank = HashConfig::default().max_rank;
    let clean = Priors::fit(&train_rows, max_rank, Smoothing::default()).unwrap();
    let leaked = Priors::fit(&log, max_rank, Smoothing::default()).unwrap();
    assert_ne!(clean, leaked);

    let schema = default_schema();
    let hc = HashConfig::default();
    let a = Featurizer::new(&schema, hc, &clean).unwrap().featurize_batch(&test_rows).unwrap();
    let b = Featurizer::new(&schema, hc, &leaked).unwrap().featurize_batch(&test_rows).unwrap();
    assert_ne!(a, b);

    // flipping test-window clicks cannot move priors fitted on the train window
    let flipped: Vec<Impression> = log
        .iter()
        .map(|i| if i.day > 35 { Impression { clicked: !i.clicked, ..i.clone() } } else { i.clone() })
        .collect();
    let (train_again, _) = temporal_split(&flipped, 35);
    assert_eq!(Priors::fit(&train_again, max_rank, Smoothing::default()).unwrap(), clean);
}

fn unconfounded() -> SimulationConfig {
    SimulationConfig {
        n_items: 200,
        n_users: 300,
        n_sessions: 60_000,
        confounding_strength: 0.0,
        logging_policy_noise: 1.0,
        activity_click_elasticity: 0.0,
        seed: 21,
        ..SimulationConfig::default()
    }
}

#[test]
fn position_ctr_recovers_examination_shape() {
    let cfg = unconfounded();
    let (log, _) = generate(&cfg).unwrap();
    let table = fit_position_ctr(&log, 50, Smoothing::default()).unwrap();
    let mut n = BTreeMap::<u32, f64>::new();
    for imp in &log {
        *n.entry(imp.rank).or_default() += 1.0;
    }
    let p1 = table.expected_ctr(1);
    for k in 2..=cfg.slate_size as u32 {
        let pk = table.expected_ctr(k);
        let ratio = pk / p1;
        let se = ratio * ((1.0 - pk) / (n[&k] * pk) + (1.0 - p1) / (n[&1] * p1)).sqrt();
        let expected = cfg.relative_examination(k) / cfg.relative_examination(1);
        assert!((ratio - expected).abs() <= 3.0 * se, "rank {k}: {ratio} vs {expected} (se {se})");
    }
}

#[test]
fn clicks_factor_into_examination_and_relevance() {
    let cfg = unconfounded();
    let (log, truth) = generate(&cfg).unwrap();
    // (rank, relevance quartile) -> (clicks, rows, sum r)
    let mut cells = BTreeMap::<(u32, usize), (f64, f64, f64)>::new();
    for imp in &log {
        let r = truth.relevance_of(imp.user_id, imp.item_id).unwrap();
        let bucket = ((r * 4.0) as usize).min(3);
        let c = cells.entry((imp.rank, bucket)).or_default();
        c.0 += f64::from(u8::from(imp.clicked));
        c.1 += 1.0;
        c.2 += r;
    }
    for (&(rank, bucket), &(clicks, rows, sum_r)) in &cells {
        if rows < 200.0 {
            continue;
        }
        let predicted = cfg.examination(rank) * sum_r / rows;
        let observed = clicks / rows;
        let se = (predicted * (1.0 - predicted) / rows).sqrt().max(1e-3);
        assert!((observed - predicted).abs() <= 4.0 * se, "rank {rank} bucket {bucket}: {observed} vs {predicted}");
    }
}

#[test]
fn sessions_never_span_the_split() {
    let (log, _) = generate(&common::small_sim(6)).unwrap();
    let mut days = BTreeMap::new();
    for imp in &log {
        assert_eq!(*days.entry(imp.session_id).or_insert(imp.day), imp.day);
    }
    let (train_rows, test_rows) = temporal_split(&log, 35);
    assert_eq!(train_rows.len() + test_rows.len(), log.len());
    assert!(train_rows.iter().all(|i| i.day <= 35) && test_rows.iter().all(|i| i.day > 35));
}

#[test]
fn price_sensitivity_depends_on_rank_through_crossed_weights() {
    let (log, _) = generate(&common::small_sim(7)).unwrap();
    let (model, priors) = train(&log, 1.0);
    let schema = default_schema();
    let hc = HashConfig::default();
    let fz = Featurizer::new(&schema, hc, &priors).unwrap();
    let price = schema.index_of("price").unwrap();
    let (b1, b2) = (7u32, 9u32);
    // ln(1+v) = b/2 + 0.25 lands inside bin b
    let value = |b: u32| (f64::from(b) / 2.0 + 0.25).exp() - 1.0;
    let mut base = log[0].clone();
    let mut diffs = Vec::new();
    for k in 1..=12 {
        base.raw_features[price] = value(b1);
        let lo = model.logit(&fz.featurize_at(&base, k).unwrap()).unwrap();
        base.raw_features[price] = value(b2);
        let hi = model.logit(&fz.featurize_at(&base, k).unwrap()).unwrap();
        let w = |b, k| model.weight(hash_interaction(price as u32, b, k, &hc).unwrap());
        let expected = w(b2, 0) + w(b2, k) - w(b1, 0) - w(b1, k);
        assert!((hi - lo - expected).abs() < 1e-12, "rank {k}");
        diffs.push(hi - lo);
    }
    assert!(diffs.iter().any(|d| (d - diffs[0]).abs() > 1e-6), "{diffs:?}");
}

#[test]
fn counterfactual_ordering_ignores_position_weights() {
    let (log, _) = generate(&common::small_sim(8)).unwrap();
    let (model, priors) = train(&log, 0.1);
    let hc = HashConfig::default();
    let rank = default_schema().rank_index() as u32;
    let candidates: Vec<Impression> = log.iter().take(60).cloned().collect();
    let scores: Vec<f64> = candidates.iter().map(|i| counterfactual_score(&model, &priors, i).unwrap()).collect();

    let mut deeper = model.clone();
    for k in 2..=hc.overflow_slot() {
        deeper.weights.insert(hash_interaction(rank, 0, k, &hc).unwrap(), 3.0 * f64::from(k));
    }
    let again: Vec<f64> = candidates.iter().map(|i| counterfactual_score(&deeper, &priors, i).unwrap()).collect();
    assert_eq!(scores, again);

    let mut top = model.clone();
    *top.weights.entry(hash_interaction(rank, 0, 1, &hc).unwrap()).or_default() += 1.7;
    let ids = |m: &LinearModel| rerank(m, &priors, &candidates).unwrap().into_iter().map(|(i, _)| i).collect::<Vec<_>>();
    assert_eq!(ids(&model), ids(&top));
}

#[test]
fn coec_separates_quality_deciles() {
    // alpha=1, beta=20 pulls sparse items towards 0.05, so this needs the
    // default traffic volume
    let (log, truth) = generate(&SimulationConfig::default()).unwrap();
    let priors = Priors::fit(&log, 50, Smoothing::default()).unwrap();
    let mut by_quality: Vec<_> = truth.quality.iter().map(|(&i, &q)| (q, priors.items.coec_of(i))).collect();
    by_quality.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decile = by_quality.len() / 10;
    let mean = |s: &[(f64, f64)]| s.iter().map(|x| x.1).sum::<f64>() / s.len() as f64;
    let (bottom, top) = (mean(&by_quality[..decile]), mean(&by_quality[by_quality.len() - decile..]));
    assert!(top > 1.0 && bottom < 1.0, "top {top} bottom {bottom}");
}
