//! Position-CTR baselines, COEC, UCOEC and global CTR.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Impression, ItemId, UserId};

/// Additive smoothing `(clicks + alpha) / (denominator + beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing { alpha: 1.0, beta: 20.0 }
    }
}

impl Smoothing {
    pub const NONE: Smoothing = Smoothing { alpha: 0.0, beta: 0.0 };

    fn check(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "smoothing needs finite alpha >= 0 and beta >= 0, got ({}, {})",
                self.alpha,
                self.beta
            )));
        }
        Ok(())
    }

    /// Value assigned to an entity with no observations.
    pub fn prior_mean(&self) -> f64 {
        if self.beta > 0.0 {
            self.alpha / self.beta
        } else {
            0.0
        }
    }
}

/// Expected CTR per rank slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionPropensityTable {
    expected_ctr: BTreeMap<u32, f64>,
    overflow_slot: u32,
    smoothing: Smoothing,
}

impl PositionPropensityTable {
    /// Table from explicit `(slot, expected_ctr)` pairs. A missing overflow
    /// entry falls back to the smoothing prior.
    pub fn from_entries(
        entries: Vec<(u32, f64)>,
        overflow_slot: u32,
        smoothing: Smoothing,
    ) -> PositionPropensityTable {
        let mut expected_ctr: BTreeMap<u32, f64> = entries.into_iter().collect();
        expected_ctr.entry(overflow_slot).or_insert_with(|| smoothing.prior_mean());
        PositionPropensityTable { expected_ctr, overflow_slot, smoothing }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.expected_ctr.iter().map(|(&k, &v)| (k, v))
    }

    pub fn overflow_slot(&self) -> u32 {
        self.overflow_slot
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// Expected CTR for a logged rank. Deep ranks share the overflow slot;
    /// slots never seen inherit the overflow value.
    pub fn expected_ctr(&self, rank: u32) -> f64 {
        let slot = rank.min(self.overflow_slot);
        self.expected_ctr
            .get(&slot)
            .or_else(|| self.expected_ctr.get(&self.overflow_slot))
            .copied()
            .unwrap_or(0.0)
    }
}

/// Fits `(clicks_k + alpha) / (impressions_k + beta)` per rank slot.
/// `max_rank` is the last rank with its own slot.
pub fn fit_position_ctr(
    log: &[Impression],
    max_rank: u32,
    smoothing: Smoothing,
) -> Result<PositionPropensityTable> {
    if log.is_empty() {
        return Err(Error::EmptyInput("impression log"));
    }
    smoothing.check()?;
    if smoothing.beta <= 0.0 {
        return Err(Error::Config(alloc::string::String::from(
            "position CTR smoothing needs beta > 0",
        )));
    }
    let overflow = max_rank + 1;
    let mut counts: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for imp in log {
        let c = counts.entry(imp.rank.min(overflow)).or_default();
        c.0 += 1;
        c.1 += u64::from(imp.clicked);
    }
    let entries = counts
        .into_iter()
        .map(|(slot, (n, clicks))| {
            (slot, (clicks as f64 + smoothing.alpha) / (n as f64 + smoothing.beta))
        })
        .collect();
    Ok(PositionPropensityTable::from_entries(entries, overflow, smoothing))
}

/// Clicks over expected clicks of one item.
pub fn coec(
    item: ItemId,
    log: &[Impression],
    positions: &PositionPropensityTable,
    smoothing: Smoothing,
) -> Result<f64> {
    smoothing.check()?;
    let mut seen = false;
    let (mut clicks, mut expected) = (0.0, 0.0);
    for imp in log.iter().filter(|imp| imp.item_id == item) {
        seen = true;
        clicks += f64::from(u8::from(imp.clicked));
        expected += positions.expected_ctr(imp.rank);
    }
    if !seen {
        return Err(Error::UnknownItem(item.0));
    }
    smoothed_ratio(clicks, expected, smoothing)
}

fn smoothed_ratio(clicks: f64, expected: f64, smoothing: Smoothing) -> Result<f64> {
    let denom = expected + smoothing.beta;
    if denom <= 0.0 {
        return Err(Error::DivisionHazard("COEC expected-click sum"));
    }
    Ok((clicks + smoothing.alpha) / denom)
}

/// Total clicks over total impressions.
pub fn global_ctr(log: &[Impression]) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyInput("impression log"));
    }
    let clicks = log.iter().filter(|imp| imp.clicked).count();
    Ok(clicks as f64 / log.len() as f64)
}

/// COEC divided by the global CTR.
pub fn ucoec(item: ItemId, priors: &PriorTable) -> Result<f64> {
    priors.ucoec_of(item)
}

/// Per-item COEC with its accumulators, the global CTR and per-user
/// impression counts, all from one training window.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    /// item -> (clicks, expected clicks)
    accumulators: BTreeMap<ItemId, (f64, f64)>,
    coec: BTreeMap<ItemId, f64>,
    global_ctr: f64,
    user_impressions: BTreeMap<UserId, u64>,
    smoothing: Smoothing,
}

impl PriorTable {
    pub fn fit(
        log: &[Impression],
        positions: &PositionPropensityTable,
        smoothing: Smoothing,
    ) -> Result<PriorTable> {
        let global = global_ctr(log)?;
        smoothing.check()?;
        let mut accumulators: BTreeMap<ItemId, (f64, f64)> = BTreeMap::new();
        let mut user_impressions: BTreeMap<UserId, u64> = BTreeMap::new();
        for imp in log {
            let acc = accumulators.entry(imp.item_id).or_default();
            acc.0 += f64::from(u8::from(imp.clicked));
            acc.1 += positions.expected_ctr(imp.rank);
            *user_impressions.entry(imp.user_id).or_default() += 1;
        }
        let items = accumulators.into_iter().map(|(i, (c, e))| (i, c, e)).collect();
        PriorTable::build(items, global, user_impressions.into_iter().collect(), smoothing)
    }

    /// Rebuilds a table from stored accumulators.
    pub fn from_parts(
        items: Vec<(ItemId, f64, f64)>,
        global_ctr: f64,
        users: Vec<(UserId, u64)>,
        smoothing: Smoothing,
    ) -> PriorTable {
        PriorTable::build(items, global_ctr, users, smoothing)
            .expect("accumulators with a zero COEC denominator")
    }

    fn build(
        items: Vec<(ItemId, f64, f64)>,
        global_ctr: f64,
        users: Vec<(UserId, u64)>,
        smoothing: Smoothing,
    ) -> Result<PriorTable> {
        let mut accumulators = BTreeMap::new();
        let mut coec = BTreeMap::new();
        for (item, clicks, expected) in items {
            coec.insert(item, smoothed_ratio(clicks, expected, smoothing)?);
            accumulators.insert(item, (clicks, expected));
        }
        Ok(PriorTable {
            accumulators,
            coec,
            global_ctr,
            user_impressions: users.into_iter().collect(),
            smoothing,
        })
    }

    /// COEC of an item; unseen items get `alpha / beta`.
    pub fn coec_of(&self, item: ItemId) -> f64 {
        self.coec.get(&item).copied().unwrap_or_else(|| self.smoothing.prior_mean())
    }

    pub fn ucoec_of(&self, item: ItemId) -> Result<f64> {
        if self.global_ctr <= 0.0 {
            return Err(Error::DivisionHazard("global CTR"));
        }
        Ok(self.coec_of(item) / self.global_ctr)
    }

    pub fn global_ctr(&self) -> f64 {
        self.global_ctr
    }

    pub fn user_activity(&self, user: UserId) -> u64 {
        self.user_impressions.get(&user).copied().unwrap_or(0)
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// `(item, clicks, expected clicks, coec)` in item order.
    pub fn items(&self) -> impl Iterator<Item = (ItemId, f64, f64, f64)> + '_ {
        self.accumulators.iter().map(|(&i, &(c, e))| (i, c, e, self.coec[&i]))
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, u64)> + '_ {
        self.user_impressions.iter().map(|(&u, &n)| (u, n))
    }
}

/// Everything featurization needs from the training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub positions: PositionPropensityTable,
    pub items: PriorTable,
}

impl Priors {
    pub fn fit(log: &[Impression], max_rank: u32, smoothing: Smoothing) -> Result<Priors> {
        let positions = fit_position_ctr(log, max_rank, smoothing)?;
        let items = PriorTable::fit(log, &positions, smoothing)?;
        Ok(Priors { positions, items })
    }
}
