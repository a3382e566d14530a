//! L2-regularized logistic regression over sparse interaction vectors.
//!
//! Objective: `sum_i logloss(y_i, sigmoid(z_i)) + ||w||^2 / (2C)` with the
//! intercept left out of the penalty. The solver is full-batch gradient
//! descent on a limited-memory quasi-Newton (L-BFGS) direction whose
//! initial scaling is the inverse Hessian diagonal, with Armijo backtracking.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::featurizer::FeatureBatch;
use crate::math::{log_loss, sigmoid};
use crate::metrics::auc;
use crate::model::{FeatureSchema, HashConfig, LinearModel};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const LBFGS_MEMORY: usize = 10;

/// Limited-memory inverse-Hessian approximation seeded with the inverse
/// Hessian diagonal.
struct LbfgsHistory {
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    rho: Vec<f64>,
    alpha: Vec<f64>,
    capacity: usize,
    next: usize,
    len: usize,
}

impl LbfgsHistory {
    fn new(capacity: usize, dim: usize) -> LbfgsHistory {
        LbfgsHistory {
            s: (0..capacity).map(|_| alloc::vec![0.0; dim]).collect(),
            y: (0..capacity).map(|_| alloc::vec![0.0; dim]).collect(),
            rho: alloc::vec![0.0; capacity],
            alpha: alloc::vec![0.0; capacity],
            capacity,
            next: 0,
            len: 0,
        }
    }

    fn clear(&mut self) {
        self.len = 0;
        self.next = 0;
    }

    fn push(&mut self, x_old: &[f64], x_new: &[f64], g_old: &[f64], g_new: &[f64]) {
        let slot = self.next;
        let mut sy = 0.0;
        for j in 0..x_old.len() {
            let s = x_new[j] - x_old[j];
            let y = g_new[j] - g_old[j];
            self.s[slot][j] = s;
            self.y[slot][j] = y;
            sy += s * y;
        }
        // skip pairs violating the curvature condition
        if !(sy > 1e-12) {
            return;
        }
        self.rho[slot] = 1.0 / sy;
        self.next = (slot + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// `out = -H * grad` by the two-loop recursion.
    fn direction(&mut self, grad: &[f64], diag: &[f64], out: &mut [f64]) {
        out.iter_mut().zip(grad).for_each(|(o, &g)| *o = g);
        let order: Vec<usize> =
            (0..self.len).map(|i| (self.next + self.capacity - 1 - i) % self.capacity).collect();
        for &k in &order {
            let a = self.rho[k] * dot(&self.s[k], out);
            self.alpha[k] = a;
            out.iter_mut().zip(&self.y[k]).for_each(|(o, &y)| *o -= a * y);
        }
        out.iter_mut().zip(diag).for_each(|(o, &d)| *o /= d.max(1e-300));
        for &k in order.iter().rev() {
            let b = self.rho[k] * dot(&self.y[k], out);
            let a = self.alpha[k];
            out.iter_mut().zip(&self.s[k]).for_each(|(o, &s)| *o += (a - b) * s);
        }
        out.iter_mut().for_each(|o| *o = -*o);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Inverse regularization strength `C`.
    pub c_value: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective improvement drops below this.
    pub convergence_tol: f64,
    /// Recorded for provenance; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { c_value: 1e-5, max_iterations: 500, convergence_tol: 1e-8, seed: 0 }
    }
}

impl TrainConfig {
    pub fn with_c(self, c_value: f64) -> TrainConfig {
        TrainConfig { c_value, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_value > 0.0 && self.c_value.is_finite()) {
            return Err(Error::Config(alloc::format!("C must be positive, got {}", self.c_value)));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Config(alloc::format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Feature vectors with click labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureBatch,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn new(features: FeatureBatch, labels: Vec<bool>) -> Result<Dataset> {
        if features.len() != labels.len() {
            return Err(Error::Config(alloc::format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Dataset re-indexed to dense columns.
struct Design<'a> {
    stride: usize,
    cols: Vec<u32>,
    ids: Vec<u64>,
    labels: &'a [bool],
}

impl<'a> Design<'a> {
    fn new(data: &'a Dataset, extra_ids: impl Iterator<Item = u64>) -> Design<'a> {
        let flat = data.features.as_flat();
        let mut ids: Vec<u64> = flat.iter().copied().chain(extra_ids).collect();
        ids.sort_unstable();
        ids.dedup();
        let cols = flat
            .iter()
            .map(|id| ids.binary_search(id).expect("id collected above") as u32)
            .collect();
        Design { stride: data.features.stride(), cols, ids, labels: &data.labels }
    }

    fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        let n = self.labels.len();
        (0..n).map(move |i| &self.cols[i * self.stride..(i + 1) * self.stride])
    }

    /// Change in every logit per unit step along `dir` (`dir[0]` is the intercept).
    fn direction_logits(&self, dir: &[f64], out: &mut Vec<f64>) {
        let w = &dir[1..];
        out.clear();
        out.extend(self.rows().map(|row| row.iter().fold(dir[0], |acc, &c| acc + w[c as usize])));
    }

    /// Gradient and Hessian diagonal at `theta` given its logits `z`.
    fn gradient(&self, theta: &[f64], z: &[f64], c: f64, grad: &mut [f64], diag: &mut [f64]) {
        grad[0] = 0.0;
        diag[0] = 0.0;
        for j in 1..theta.len() {
            grad[j] = theta[j] / c;
            diag[j] = 1.0 / c;
        }
        let (g_w, d_w) = (&mut grad[1..], &mut diag[1..]);
        let (mut g0, mut d0) = (0.0, 0.0);
        for ((row, &zi), &y) in self.rows().zip(z).zip(self.labels) {
            let p = sigmoid(zi);
            let r = p - f64::from(u8::from(y));
            let s = (p * (1.0 - p)).max(1e-12);
            g0 += r;
            d0 += s;
            for &col in row {
                g_w[col as usize] += r;
                d_w[col as usize] += s;
            }
        }
        grad[0] = g0;
        diag[0] = d0;
    }
}

fn penalty(w: &[f64], c: f64) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>() / (2.0 * c)
}

fn data_loss(z: &[f64], labels: &[bool]) -> f64 {
    z.iter().zip(labels).map(|(&z, &y)| log_loss(z, y)).sum()
}

fn check_finite(x: f64, iteration: usize, what: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numeric { iteration, what })
    }
}

/// Regularized objective of `model` on `data`.
pub fn objective(model: &LinearModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let loss: f64 = data
        .features
        .rows()
        .zip(&data.labels)
        .map(|(row, &y)| log_loss(model.logit_ids(row), y))
        .sum();
    let reg = model.weights.values().map(|w| w * w).sum::<f64>() / (2.0 * model.c_value);
    check_finite(loss + reg, 0, "objective")
}

/// Gradient of [`objective`]: `(d/d intercept, d/d w_id)` for every id in
/// the data or the model.
pub fn gradient(model: &LinearModel, data: &Dataset) -> Result<(f64, BTreeMap<u64, f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut grad: BTreeMap<u64, f64> =
        model.weights.iter().map(|(&id, &w)| (id, w / model.c_value)).collect();
    let mut g0 = 0.0;
    for (row, &y) in data.features.rows().zip(&data.labels) {
        let r = sigmoid(model.logit_ids(row)) - f64::from(u8::from(y));
        g0 += r;
        for &id in row {
            *grad.entry(id).or_insert(0.0) += r;
        }
    }
    check_finite(g0, 0, "gradient")?;
    for g in grad.values() {
        check_finite(*g, 0, "gradient")?;
    }
    Ok((g0, grad))
}

/// Summary of a finished fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub objective: f64,
    pub initial_objective: f64,
    pub converged: bool,
}

/// Fits a model from zero initialization.
pub fn fit(
    data: &Dataset,
    config: &TrainConfig,
    schema: &FeatureSchema,
    hash_config: HashConfig,
) -> Result<LinearModel> {
    fit_with_report(data, config, schema, hash_config).map(|(m, _)| m)
}

pub fn fit_with_report(
    data: &Dataset,
    config: &TrainConfig,
    schema: &FeatureSchema,
    hash_config: HashConfig,
) -> Result<(LinearModel, FitReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let positives = data.labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateLabels);
    }
    let design = Design::new(data, core::iter::empty());
    let c = config.c_value;
    let n_cols = design.ids.len();
    let labels = design.labels;

    let mut z = alloc::vec![0.0; labels.len()];
    let mut f = data_loss(&z, labels);
    let initial_objective = f;

    // parameter vector: [intercept, w...]; only w is penalized
    let dim = n_cols + 1;
    let mut theta = alloc::vec![0.0; dim];
    let mut grad = alloc::vec![0.0; dim];
    let mut diag = alloc::vec![0.0; dim];
    let mut dir = alloc::vec![0.0; dim];
    let mut trial = alloc::vec![0.0; dim];
    let mut next_grad = alloc::vec![0.0; dim];
    let mut dz = Vec::with_capacity(labels.len());
    let mut history = LbfgsHistory::new(LBFGS_MEMORY, dim);
    let mut converged = false;
    let mut iterations = 0;

    design.gradient(&theta, &z, c, &mut grad, &mut diag);
    while iterations < config.max_iterations {
        iterations += 1;
        check_finite(grad.iter().sum(), iterations, "gradient")?;
        history.direction(&grad, &diag, &mut dir);
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            // memory produced an ascent direction; restart from the scaled gradient
            history.clear();
            history.direction(&grad, &diag, &mut dir);
            slope = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) {
                converged = true;
                break;
            }
        }
        design.direction_logits(&dir, &mut dz);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            trial.iter_mut().zip(&theta).zip(&dir).for_each(|((x, &th), &d)| *x = th + t * d);
            let loss: f64 =
                z.iter().zip(&dz).zip(labels).map(|((&zi, &di), &y)| log_loss(zi + t * di, y)).sum();
            let candidate = loss + penalty(&trial[1..], c);
            if candidate.is_finite() && candidate <= f + ARMIJO * t * slope {
                accepted = Some(candidate);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // no representable decrease left: stationary to working precision
            if -slope <= config.convergence_tol * f.abs().max(1.0) {
                converged = true;
                break;
            }
            return Err(Error::Optimization { iteration: iterations, objective: f });
        };
        z.iter_mut().zip(&dz).for_each(|(zi, &di)| *zi += t * di);
        design.gradient(&trial, &z, c, &mut next_grad, &mut diag);
        history.push(&theta, &trial, &grad, &next_grad);
        core::mem::swap(&mut theta, &mut trial);
        core::mem::swap(&mut grad, &mut next_grad);
        let improvement = (f - next) / f.abs().max(1e-300);
        f = next;
        if improvement < config.convergence_tol {
            converged = true;
            break;
        }
    }
    check_finite(f, iterations, "objective")?;

    let weights = design
        .ids
        .iter()
        .zip(&theta[1..])
        .filter(|(_, &wj)| wj != 0.0)
        .map(|(&id, &wj)| (id, wj))
        .collect();
    let model = LinearModel {
        intercept: theta[0],
        weights,
        hash_config,
        schema: schema.clone(),
        c_value: c,
    };
    Ok((model, FitReport { iterations, objective: f, initial_objective, converged }))
}

/// Scores every row of a batch with a dense lookup table.
pub fn score_batch(model: &LinearModel, batch: &FeatureBatch) -> Vec<f64> {
    let table: hashbrown::HashMap<u64, f64> = model.weights.iter().map(|(&k, &v)| (k, v)).collect();
    batch
        .rows()
        .map(|row| row.iter().fold(model.intercept, |acc, id| acc + table.get(id).copied().unwrap_or(0.0)))
        .collect()
}

/// Held-out data for a sweep: rows at their logged rank with clicks, and
/// the same (or a stratified subset of) rows at rank 1 with relevance labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub observed: FeatureBatch,
    pub clicks: Vec<bool>,
    pub counterfactual: FeatureBatch,
    pub relevance: Vec<bool>,
}

/// Metrics of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMetrics {
    pub standard_auc: f64,
    pub relevance_auc: f64,
    pub train_seconds: f64,
    /// Weights with `|w| > 1e-8`.
    pub active_weights: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c_value: f64,
    pub outcome: Result<SweepMetrics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn argmax(&self, key: impl Fn(&SweepMetrics) -> f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            if let Ok(m) = &row.outcome {
                let v = key(m);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// Row index with the highest standard AUC.
    pub fn best_standard(&self) -> Option<usize> {
        self.argmax(|m| m.standard_auc)
    }

    /// Row index with the highest relevance AUC.
    pub fn best_relevance(&self) -> Option<usize> {
        self.argmax(|m| m.relevance_auc)
    }
}

/// Fits and evaluates one model per `C`. Failures are recorded per row.
/// `clock` returns seconds from an arbitrary origin.
pub fn sweep(
    train: &Dataset,
    eval: &EvalSet,
    c_grid: &[f64],
    base: &TrainConfig,
    schema: &FeatureSchema,
    hash_config: HashConfig,
    clock: &dyn Fn() -> f64,
) -> Result<SweepResult> {
    if c_grid.is_empty() {
        return Err(Error::EmptyInput("C grid"));
    }
    let rows = c_grid
        .iter()
        .map(|&c_value| {
            let outcome = (|| {
                let start = clock();
                let (model, report) = fit_with_report(train, &base.with_c(c_value), schema, hash_config)?;
                let train_seconds = clock() - start;
                let standard_auc = auc(&score_batch(&model, &eval.observed), &eval.clicks)?;
                let relevance_auc = auc(&score_batch(&model, &eval.counterfactual), &eval.relevance)?;
                Ok(SweepMetrics {
                    standard_auc,
                    relevance_auc,
                    train_seconds,
                    active_weights: model.active_weights(1e-8),
                    iterations: report.iterations,
                })
            })();
            SweepRow { c_value, outcome }
        })
        .collect();
    Ok(SweepResult { rows })
}
