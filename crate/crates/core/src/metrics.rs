//! Standard, relevance and propensity AUC.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::featurizer::Featurizer;
use crate::model::{Impression, LinearModel};
use crate::trainer::{score_batch, EvalSet};

/// Area under the ROC curve via the Mann-Whitney U statistic. Tied scores
/// get averaged ranks, i.e. 0.5 credit per tied positive/negative pair.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Config(alloc::format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric { iteration: 0, what: "score" });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // sum of 1-based ranks of the positives, ties averaged
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += avg_rank * pos_in_group as f64;
        start = end;
    }
    let n_pos_f = n_pos as f64;
    let u = rank_sum - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Position-free signal a relevance AUC is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum RelevanceTarget {
    /// Ground-truth relevance labels, one per test row.
    Truth(Vec<bool>),
    /// Observed clicks restricted to rows logged at this rank.
    Stratified(u32),
}

impl RelevanceTarget {
    pub fn mode_name(&self) -> &'static str {
        match self {
            RelevanceTarget::Truth(_) => "truth",
            RelevanceTarget::Stratified(_) => "stratified",
        }
    }
}

/// AUC of predictions at the logged rank against logged clicks.
pub fn standard_auc(model: &LinearModel, featurizer: &Featurizer<'_>, log: &[Impression]) -> Result<f64> {
    let batch = featurizer.featurize_batch(log)?;
    auc(&score_batch(model, &batch), &clicks(log))
}

/// AUC of rank-1 counterfactual scores against a position-free target.
pub fn relevance_auc(
    model: &LinearModel,
    featurizer: &Featurizer<'_>,
    log: &[Impression],
    target: &RelevanceTarget,
) -> Result<f64> {
    let (rows, labels) = relevance_rows(log, target)?;
    let batch = featurizer.featurize_batch_at(&rows, Some(1))?;
    auc(&score_batch(model, &batch), &labels)
}

/// AUC of `-rank` against clicks: how much of the click signal rank alone explains.
pub fn propensity_auc(log: &[Impression]) -> Result<f64> {
    let scores: Vec<f64> = log.iter().map(|imp| -f64::from(imp.rank)).collect();
    auc(&scores, &clicks(log))
}

/// Precomputes the feature batches a sweep evaluates on.
pub fn eval_set(featurizer: &Featurizer<'_>, log: &[Impression], target: &RelevanceTarget) -> Result<EvalSet> {
    let (rows, relevance) = relevance_rows(log, target)?;
    Ok(EvalSet {
        observed: featurizer.featurize_batch(log)?,
        clicks: clicks(log),
        counterfactual: featurizer.featurize_batch_at(&rows, Some(1))?,
        relevance,
    })
}

fn clicks(log: &[Impression]) -> Vec<bool> {
    log.iter().map(|imp| imp.clicked).collect()
}

fn relevance_rows(log: &[Impression], target: &RelevanceTarget) -> Result<(Vec<Impression>, Vec<bool>)> {
    match target {
        RelevanceTarget::Truth(labels) => {
            if labels.len() != log.len() {
                return Err(Error::Config(alloc::format!(
                    "{} relevance labels for {} rows",
                    labels.len(),
                    log.len()
                )));
            }
            Ok((log.to_vec(), labels.clone()))
        }
        RelevanceTarget::Stratified(rank) => {
            let rows: Vec<Impression> = log.iter().filter(|imp| imp.rank == *rank).cloned().collect();
            if rows.is_empty() {
                return Err(Error::EmptyStratum(*rank));
            }
            let labels = clicks(&rows);
            Ok((rows, labels))
        }
    }
}
