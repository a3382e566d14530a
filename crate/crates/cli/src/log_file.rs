//! Impression logs (CSV) and relevance truth files (TSV).

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use debias_core::simulator::GroundTruth;
use debias_core::{FeatureSchema, Impression, ItemId, SessionId, UserId};

use crate::error::{CliError, Result};

pub const FIXED_COLUMNS: [&str; 6] = ["day", "session_id", "user_id", "item_id", "rank", "clicked"];

/// Header of a log for `schema`: the fixed columns, then observed feature
/// columns in schema order.
pub fn log_header(schema: &FeatureSchema) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(schema.observed_indices().map(|i| schema.specs()[i].name.clone()))
        .collect()
}

pub fn write_log<W: Write>(out: W, schema: &FeatureSchema, log: &[Impression]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| CliError::csv("<output>")(e);
    w.write_record(log_header(schema)).map_err(to_err)?;
    let observed: Vec<usize> = schema.observed_indices().collect();
    let mut record: Vec<String> = Vec::with_capacity(FIXED_COLUMNS.len() + observed.len());
    for imp in log {
        record.clear();
        record.push(imp.day.to_string());
        record.push(imp.session_id.0.to_string());
        record.push(imp.user_id.0.to_string());
        record.push(imp.item_id.0.to_string());
        record.push(imp.rank.to_string());
        record.push(u8::from(imp.clicked).to_string());
        record.extend(observed.iter().map(|&i| imp.raw_features[i].to_string()));
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(CliError::io("<output>"))
}

pub fn save_log(path: &Path, schema: &FeatureSchema, log: &[Impression]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    write_log(BufWriter::new(file), schema, log).map_err(|e| relabel(e, path))
}

fn relabel(e: CliError, path: &Path) -> CliError {
    match e {
        CliError::Csv { source, .. } => CliError::Csv { path: path.into(), source },
        CliError::Io { source, .. } => CliError::Io { path: path.into(), source },
        other => other,
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("bad {name} `{raw}`")))
}

/// Reads a log whose header matches `schema`. Rank and derived columns are
/// filled with placeholders; every row is validated against the schema.
pub fn read_log(path: &Path, schema: &FeatureSchema) -> Result<Vec<Impression>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(CliError::csv(path))?;
    let expected = log_header(schema);
    let header: Vec<String> = reader.headers().map_err(CliError::csv(path))?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(CliError::parse(
            path,
            1,
            format!("header `{}` does not match schema, expected `{}`", header.join(","), expected.join(",")),
        ));
    }
    let observed: Vec<usize> = schema.observed_indices().collect();
    let mut log = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 1;
    while reader.read_record(&mut record).map_err(CliError::csv(path))? {
        line += 1;
        let clicked = match record[5].trim() {
            "0" => false,
            "1" => true,
            other => return Err(CliError::parse(path, line, format!("bad clicked `{other}`, expected 0 or 1"))),
        };
        let mut raw_features = vec![0.0; schema.len()];
        for (k, &i) in observed.iter().enumerate() {
            raw_features[i] = field(path, line, &schema.specs()[i].name, &record[FIXED_COLUMNS.len() + k])?;
        }
        let imp = Impression {
            day: field(path, line, "day", &record[0])?,
            session_id: SessionId(field(path, line, "session_id", &record[1])?),
            user_id: UserId(field(path, line, "user_id", &record[2])?),
            item_id: ItemId(field(path, line, "item_id", &record[3])?),
            rank: field(path, line, "rank", &record[4])?,
            clicked,
            raw_features,
        };
        schema.validate(&imp).map_err(|e| CliError::parse(path, line, e.to_string()))?;
        log.push(imp);
    }
    Ok(log)
}

pub fn write_truth<W: Write>(mut out: W, truth: &GroundTruth) -> std::io::Result<()> {
    writeln!(out, "user_id\titem_id\tr")?;
    for (&(user, item), &r) in &truth.relevance {
        writeln!(out, "{}\t{}\t{}", user.0, item.0, r)?;
    }
    out.flush()
}

pub fn save_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    write_truth(BufWriter::new(file), truth).map_err(CliError::io(path))
}

/// Reads `user_id<TAB>item_id<TAB>r` lines. Item qualities are not stored.
pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut relevance = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 && line.starts_with("user_id") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [user, item, r] = fields[..] else {
            return Err(CliError::parse(path, n + 1, "expected user_id<TAB>item_id<TAB>r"));
        };
        let r: f64 = field(path, n + 1, "r", r)?;
        if !(0.0..=1.0).contains(&r) {
            return Err(CliError::parse(path, n + 1, format!("relevance {r} outside [0, 1]")));
        }
        relevance.insert((UserId(field(path, n + 1, "user_id", user)?), ItemId(field(path, n + 1, "item_id", item)?)), r);
    }
    Ok(GroundTruth { quality: BTreeMap::new(), relevance })
}
