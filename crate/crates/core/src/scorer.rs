//! Counterfactual rank-1 scoring, reranking and weight explanation.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Result;
use crate::featurizer::{unhash_interaction, Featurizer};
use crate::math::sigmoid;
use crate::model::{Impression, ItemId, LinearModel};
use crate::stats::Priors;

/// Rank every item is scored at.
pub const REFERENCE_RANK: u32 = 1;

fn featurizer<'a>(model: &'a LinearModel, priors: &'a Priors) -> Result<Featurizer<'a>> {
    Featurizer::new(&model.schema, model.hash_config, priors)
}

/// Click probability with the display rank forced to 1. Base ids are kept;
/// the rank id and all crossed ids are those of rank 1.
pub fn counterfactual_score(model: &LinearModel, priors: &Priors, impression: &Impression) -> Result<f64> {
    let features = featurizer(model, priors)?.featurize_at(impression, REFERENCE_RANK)?;
    model.predict_proba(&features)
}

/// Items ordered by descending counterfactual score, ties by item id.
pub fn rerank(model: &LinearModel, priors: &Priors, candidates: &[Impression]) -> Result<Vec<(ItemId, f64)>> {
    let mut scored = candidates
        .iter()
        .map(|imp| Ok((imp.item_id, counterfactual_score(model, priors, imp)?)))
        .collect::<Result<Vec<_>>>()?;
    sort_scored(&mut scored);
    Ok(scored)
}

/// Descending score, ascending item id on ties.
pub fn sort_scored(scored: &mut [(ItemId, f64)]) {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
}

/// One active weight of an explained prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub id: u64,
    pub feature: String,
    pub bin: u32,
    /// Rank slot; 0 for base features.
    pub rank: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub intercept: f64,
    pub logit: f64,
    /// Nonzero contributions by descending magnitude, truncated to `top_n`.
    pub contributions: Vec<Contribution>,
}

/// Decomposes the logit of an impression at its logged rank into the
/// weights of its active interactions.
pub fn explain(model: &LinearModel, priors: &Priors, impression: &Impression, top_n: usize) -> Result<Explanation> {
    let features = featurizer(model, priors)?.featurize(impression)?;
    let mut contributions = Vec::new();
    for &id in features.ids() {
        let decoded = unhash_interaction(id, &model.hash_config)?;
        decoded.check_schema(id, &model.schema)?;
        let weight = model.weight(id);
        if weight != 0.0 {
            contributions.push(Contribution {
                id,
                feature: model.schema.specs()[decoded.feature as usize].name.clone(),
                bin: decoded.bin,
                rank: decoded.rank,
                weight,
            });
        }
    }
    let logit = model.logit(&features)?;
    contributions.sort_by(|a, b| {
        b.weight.abs().partial_cmp(&a.weight.abs()).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
    });
    contributions.truncate(top_n);
    Ok(Explanation { intercept: model.intercept, logit, contributions })
}

impl Explanation {
    pub fn probability(&self) -> f64 {
        sigmoid(self.logit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurizer::hash_interaction;
    use crate::model::{FeatureKind, FeatureSchema, FeatureSpec, HashConfig, SessionId, UserId};
    use crate::stats::{PositionPropensityTable, PriorTable, Smoothing};
    use alloc::vec;

    fn priors() -> Priors {
        Priors {
            positions: PositionPropensityTable::from_entries(vec![], 51, Smoothing::default()),
            items: PriorTable::from_parts(vec![], 0.1, vec![], Smoothing::default()),
        }
    }

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureSpec::new("price", FeatureKind::Categorical, 7),
            FeatureSpec::new("rank", FeatureKind::Rank, 1),
            FeatureSpec::new("rating", FeatureKind::Proportion, 7),
        ])
        .unwrap()
    }

    fn cfg() -> HashConfig {
        HashConfig::new(10_000, 7, 50).unwrap()
    }

    fn model(weights: &[(u64, f64)]) -> LinearModel {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::new("price", FeatureKind::Categorical, 7),
            FeatureSpec::new("rank", FeatureKind::Rank, 1),
            FeatureSpec::new("rating", FeatureKind::Categorical, 7),
        ])
        .unwrap();
        let mut m = LinearModel::zeros(schema, cfg(), 1e-5);
        m.weights.extend(weights.iter().copied());
        m
    }

    fn imp(item: u64, rank: u32, price: f64, rating: f64) -> Impression {
        Impression {
            day: 1,
            session_id: SessionId(1),
            user_id: UserId(1),
            item_id: ItemId(item),
            rank,
            clicked: false,
            raw_features: vec![price, 0.0, rating],
        }
    }

    #[test]
    fn logged_rank_is_erased() {
        let m = model(&[
            (hash_interaction(0, 5, 1, &cfg()).unwrap(), 0.4),
            (hash_interaction(0, 5, 2, &cfg()).unwrap(), -3.0),
            (hash_interaction(1, 0, 37, &cfg()).unwrap(), -2.0),
        ]);
        let p = priors();
        let a = counterfactual_score(&m, &p, &imp(1, 37, 5.0, 1.0)).unwrap();
        let b = counterfactual_score(&m, &p, &imp(1, 2, 5.0, 1.0)).unwrap();
        assert_eq!(a, b);
        assert!((a - sigmoid(0.4)).abs() < 1e-15);
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = model(&[]);
        let p = priors();
        for (i, r) in [(1, 1), (2, 9), (3, 60)] {
            assert_eq!(counterfactual_score(&m, &p, &imp(i, r, i as f64, 2.0)).unwrap(), 0.5);
        }
    }

    #[test]
    fn pure_position_model_cannot_rank() {
        let m = model(
            &(1..=51).map(|k| (hash_interaction(1, 0, k, &cfg()).unwrap(), -0.1 * f64::from(k))).collect::<Vec<_>>(),
        );
        let p = priors();
        let scores: Vec<_> = (0..6u64)
            .map(|i| counterfactual_score(&m, &p, &imp(i, 1 + i as u32 * 7, (i % 7) as f64, (i % 3) as f64)).unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn rerank_orders_and_breaks_ties() {
        let p = priors();
        assert!(rerank(&model(&[]), &p, &[]).unwrap().is_empty());
        let single = rerank(&model(&[]), &p, &[imp(9, 3, 1.0, 1.0)]).unwrap();
        assert_eq!(single[0].0, ItemId(9));

        let mut scored = vec![(ItemId(1), 0.9), (ItemId(3), 0.2), (ItemId(2), 0.2)];
        sort_scored(&mut scored);
        let order: Vec<_> = scored.iter().map(|s| s.0 .0).collect();
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn rerank_is_shift_invariant() {
        let mut m = model(&[
            (hash_interaction(0, 1, 0, &cfg()).unwrap(), 0.3),
            (hash_interaction(0, 2, 1, &cfg()).unwrap(), 0.9),
            (hash_interaction(2, 4, 0, &cfg()).unwrap(), -0.5),
        ]);
        let p = priors();
        let cands: Vec<_> = (0..10u64).map(|i| imp(i, 1 + i as u32, (i % 3) as f64, (i % 5) as f64)).collect();
        let before: Vec<_> = rerank(&m, &p, &cands).unwrap().into_iter().map(|s| s.0).collect();
        m.intercept += 3.7;
        let after: Vec<_> = rerank(&m, &p, &cands).unwrap().into_iter().map(|s| s.0).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn explain_single_interaction() {
        let m = model(&[(50_012, 1.3)]);
        let e = explain(&m, &priors(), &imp(1, 12, 5.0, 0.0), 10).unwrap();
        assert_eq!(
            e.contributions,
            vec![Contribution { id: 50_012, feature: "price".into(), bin: 5, rank: 12, weight: 1.3 }]
        );
        let e = explain(&model(&[]), &priors(), &imp(1, 12, 5.0, 0.0), 10).unwrap();
        assert!(e.contributions.is_empty());
        assert_eq!(e.logit, 0.0);
    }

    #[test]
    fn explain_rejects_schema_mismatch() {
        // a model whose schema disagrees with the featurized values
        let m = LinearModel::zeros(schema(), cfg(), 1.0);
        assert!(explain(&m, &priors(), &imp(1, 1, 5.0, 0.3), 3).is_ok());
        assert!(explain(&m, &priors(), &imp(1, 1, 9.0, 0.3), 3).is_err());
    }
}
