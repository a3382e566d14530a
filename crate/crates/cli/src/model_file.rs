//! Versioned text model files: header, priors, then sorted weights.

use std::fmt::Write as _;
use std::path::Path;

use debias_core::stats::PositionPropensityTable;
use debias_core::{
    FeatureSchema, HashConfig, ItemId, LinearModel, PriorTable, Priors, Smoothing, UserId,
};

use crate::error::{CliError, Result};
use crate::schema_file::parse_schema;

pub const FORMAT_VERSION: u32 = 1;
/// Weights at or below this magnitude are dropped before saving.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// A fitted model with the priors and split it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: LinearModel,
    pub priors: Priors,
    pub split_day: u32,
}

impl TrainedModel {
    /// Prunes tiny weights so the in-memory model equals what gets saved.
    pub fn new(mut model: LinearModel, priors: Priors, split_day: u32) -> TrainedModel {
        model.weights.retain(|_, w| w.abs() > PRUNE_THRESHOLD);
        TrainedModel { model, priors, split_day }
    }
}

pub fn format_model(t: &TrainedModel) -> String {
    let m = &t.model;
    let hc = m.hash_config;
    let sm = t.priors.items.smoothing();
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!("version\t{FORMAT_VERSION}"));
    line(format!("c_value\t{}", m.c_value));
    line(format!("split_day\t{}", t.split_day));
    line(format!("M\t{}", hc.rank_multiplier));
    line(format!("B_max\t{}", hc.max_bins_per_feature));
    line(format!("K_max\t{}", hc.max_rank));
    line(format!("intercept\t{}", m.intercept));
    line(format!("smoothing\t{}\t{}", sm.alpha, sm.beta));
    line(format!("global_ctr\t{}", t.priors.items.global_ctr()));

    let specs = m.schema.specs();
    line(format!("[schema]\t{}", specs.len()));
    for spec in specs {
        line(format!("{}\t{}\t{}", spec.name, spec.kind, spec.max_bins));
    }
    let positions: Vec<(u32, f64)> = t.priors.positions.entries().collect();
    line(format!("[positions]\t{}", positions.len()));
    for (slot, ctr) in positions {
        line(format!("{slot}\t{ctr}"));
    }
    let items: Vec<_> = t.priors.items.items().collect();
    line(format!("[items]\t{}", items.len()));
    for (item, clicks, expected, coec) in items {
        line(format!("{}\t{clicks}\t{expected}\t{coec}", item.0));
    }
    let users: Vec<_> = t.priors.items.users().collect();
    line(format!("[users]\t{}", users.len()));
    for (user, n) in users {
        line(format!("{}\t{n}", user.0));
    }
    let weights: Vec<_> = m.weights.iter().filter(|(_, w)| w.abs() > PRUNE_THRESHOLD).collect();
    line(format!("[weights]\t{}", weights.len()));
    for (id, w) in weights {
        line(format!("{id}\t{w}"));
    }
    s
}

pub fn save_model(path: &Path, t: &TrainedModel) -> Result<()> {
    std::fs::write(path, format_model(t)).map_err(CliError::io(path))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_model(&text, path)
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> CliError {
        CliError::parse(self.path, self.line, msg)
    }

    fn fields(&mut self) -> Result<Vec<&'a str>> {
        let (n, l) = self.inner.next().ok_or_else(|| CliError::parse(self.path, self.line + 1, "unexpected end of file"))?;
        self.line = n + 1;
        Ok(l.split('\t').collect())
    }

    fn parse<T: std::str::FromStr>(&self, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| self.err(format!("bad value `{raw}`")))
    }

    /// `key<TAB>value...`; returns the values.
    fn keyed(&mut self, key: &str, arity: usize) -> Result<Vec<&'a str>> {
        let f = self.fields()?;
        if f[0] != key || f.len() != arity + 1 {
            return Err(self.err(format!("expected `{key}` with {arity} value(s)")));
        }
        Ok(f[1..].to_vec())
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let v = self.keyed(&format!("[{name}]"), 1)?;
        self.parse(v[0])
    }

    fn row(&mut self, arity: usize) -> Result<Vec<&'a str>> {
        let f = self.fields()?;
        if f.len() != arity {
            return Err(self.err(format!("expected {arity} tab-separated fields")));
        }
        Ok(f)
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<TrainedModel> {
    let mut r = Lines { path, inner: text.lines().enumerate(), line: 0 };
    let version: u32 = { let v = r.keyed("version", 1)?; r.parse(v[0])? };
    if version != FORMAT_VERSION {
        return Err(r.err(format!("unsupported model version {version}")));
    }
    let c_value: f64 = { let v = r.keyed("c_value", 1)?; r.parse(v[0])? };
    let split_day: u32 = { let v = r.keyed("split_day", 1)?; r.parse(v[0])? };
    let m: u64 = { let v = r.keyed("M", 1)?; r.parse(v[0])? };
    let b_max: u32 = { let v = r.keyed("B_max", 1)?; r.parse(v[0])? };
    let k_max: u32 = { let v = r.keyed("K_max", 1)?; r.parse(v[0])? };
    let hash_config = HashConfig::new(m, b_max, k_max)?;
    let intercept: f64 = { let v = r.keyed("intercept", 1)?; r.parse(v[0])? };
    let smoothing = {
        let v = r.keyed("smoothing", 2)?;
        Smoothing { alpha: r.parse(v[0])?, beta: r.parse(v[1])? }
    };
    let global_ctr: f64 = { let v = r.keyed("global_ctr", 1)?; r.parse(v[0])? };

    let n = r.section("schema")?;
    let mut schema_text = String::new();
    for _ in 0..n {
        writeln!(schema_text, "{}", r.row(3)?.join("\t")).unwrap();
    }
    let schema: FeatureSchema = parse_schema(&schema_text, path)?;
    hash_config.check_schema(&schema)?;

    let n = r.section("positions")?;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let f = r.row(2)?;
        positions.push((r.parse(f[0])?, r.parse(f[1])?));
    }
    let positions = PositionPropensityTable::from_entries(positions, hash_config.overflow_slot(), smoothing);

    let n = r.section("items")?;
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let f = r.row(4)?;
        let (clicks, expected): (f64, f64) = (r.parse(f[1])?, r.parse(f[2])?);
        if expected + smoothing.beta <= 0.0 {
            return Err(r.err("item has no expected clicks"));
        }
        items.push((ItemId(r.parse(f[0])?), clicks, expected));
    }
    let n = r.section("users")?;
    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let f = r.row(2)?;
        users.push((UserId(r.parse(f[0])?), r.parse(f[1])?));
    }
    let items = PriorTable::from_parts(items, global_ctr, users, smoothing);

    let n = r.section("weights")?;
    let mut model = LinearModel::zeros(schema, hash_config, c_value);
    model.intercept = intercept;
    let mut last = None;
    for _ in 0..n {
        let f = r.row(2)?;
        let id: u64 = r.parse(f[0])?;
        if last.is_some_and(|l| id <= l) {
            return Err(r.err("weight ids must be strictly increasing"));
        }
        last = Some(id);
        model.check_id(id).map_err(|e| r.err(e.to_string()))?;
        model.weights.insert(id, r.parse(f[1])?);
    }
    if let Some((n, l)) = r.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(CliError::parse(path, n + 1, format!("trailing content `{l}`")));
    }
    Ok(TrainedModel { model, priors: Priors { positions, items }, split_day })
}
