//! Subcommand implementations. Each writes human-readable output to `out`
//! and files to the paths it is given.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use debias_core::featurizer::Featurizer;
use debias_core::metrics::{eval_set, propensity_auc, relevance_auc, standard_auc, RelevanceTarget};
use debias_core::scorer::{explain, rerank, Explanation};
use debias_core::simulator::{default_schema, generate, relevance_labels, temporal_split, SimulationConfig};
use debias_core::trainer::{fit_with_report, sweep, Dataset, SweepResult, TrainConfig};
use debias_core::{FeatureSchema, HashConfig, Impression, Priors, Smoothing};
use serde::Serialize;

use crate::config_file::{format_config, read_config};
use crate::error::{CliError, Result};
use crate::log_file::{read_log, read_truth, save_log, save_truth};
use crate::model_file::{load_model, save_model, TrainedModel};
use crate::schema_file::{read_schema, write_schema};

pub const DEFAULT_GRID: [f64; 7] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 1.0];
pub const DEFAULT_SPLIT_DAY: u32 = 35;
pub const DEFAULT_LABEL_SEED: u64 = 7;

fn io(out: &mut dyn Write) -> impl FnMut(std::fmt::Arguments<'_>) -> Result<()> + '_ {
    move |args| out.write_fmt(args).map_err(CliError::io("<stdout>"))
}

fn schema_or_default(path: Option<&Path>) -> Result<FeatureSchema> {
    match path {
        Some(p) => read_schema(p),
        None => Ok(default_schema()),
    }
}

/// Files written by `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateOutputs {
    pub impressions: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
    pub schema: PathBuf,
}

pub fn simulate(config: Option<&Path>, seed: Option<u64>, out_dir: &Path, out: &mut dyn Write) -> Result<SimulateOutputs> {
    let mut cfg = match config {
        Some(p) => read_config(p)?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let (log, truth) = generate(&cfg)?;
    let outputs = SimulateOutputs {
        impressions: out_dir.join("impressions.csv"),
        truth: out_dir.join("truth.tsv"),
        config: out_dir.join("config.txt"),
        schema: out_dir.join("schema.tsv"),
    };
    let schema = default_schema();
    save_log(&outputs.impressions, &schema, &log)?;
    save_truth(&outputs.truth, &truth)?;
    std::fs::write(&outputs.config, format_config(&cfg)).map_err(CliError::io(&outputs.config))?;
    write_schema(&outputs.schema, &schema)?;
    let clicks = log.iter().filter(|i| i.clicked).count();
    io(out)(format_args!(
        "wrote {} impressions ({} clicks) over {} days to {}\n",
        log.len(),
        clicks,
        cfg.days,
        out_dir.display()
    ))?;
    Ok(outputs)
}

/// Fits priors and a model on rows with `day <= split_day`.
pub fn train_on(
    log: &[Impression],
    schema: &FeatureSchema,
    config: &TrainConfig,
    split_day: u32,
) -> Result<(TrainedModel, f64, usize)> {
    let train: Vec<Impression> = log.iter().filter(|i| i.day <= split_day).cloned().collect();
    if train.is_empty() {
        return Err(CliError::EmptyTrain { split_day });
    }
    let hc = HashConfig::default();
    let priors = Priors::fit(&train, hc.max_rank, Smoothing::default())?;
    let fz = Featurizer::new(schema, hc, &priors)?;
    let data = Dataset::new(fz.featurize_batch(&train)?, train.iter().map(|i| i.clicked).collect())?;
    let start = Instant::now();
    let (model, report) = fit_with_report(&data, config, schema, hc)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok((TrainedModel::new(model, priors, split_day), seconds, report.iterations))
}

pub fn train(
    log_path: &Path,
    schema_path: Option<&Path>,
    config: &TrainConfig,
    split_day: u32,
    model_out: &Path,
    out: &mut dyn Write,
) -> Result<TrainedModel> {
    let schema = schema_or_default(schema_path)?;
    let log = read_log(log_path, &schema)?;
    let (trained, seconds, iterations) = train_on(&log, &schema, config, split_day)?;
    save_model(model_out, &trained)?;
    io(out)(format_args!(
        "train_seconds={seconds:.3} iterations={iterations} active_weights={}\n",
        trained.model.active_weights(0.0)
    ))?;
    Ok(trained)
}

/// Which relevance AUC to compute.
#[derive(Debug, Clone)]
pub enum RelevanceMode {
    /// Bernoulli labels drawn from a truth file with this seed.
    Truth { truth: PathBuf, seed: u64 },
    Stratified { rank: u32 },
}

fn relevance_target(mode: &RelevanceMode, test: &[Impression]) -> Result<RelevanceTarget> {
    Ok(match mode {
        RelevanceMode::Truth { truth, seed } => {
            let truth = read_truth(truth)?;
            RelevanceTarget::Truth(relevance_labels(&truth, test, *seed)?)
        }
        RelevanceMode::Stratified { rank } => RelevanceTarget::Stratified(*rank),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub standard_auc: f64,
    pub relevance_auc: f64,
    pub relevance_mode: String,
    pub propensity_auc: f64,
    pub n_test: usize,
}

pub fn evaluate_on(trained: &TrainedModel, log: &[Impression], mode: &RelevanceMode) -> Result<EvalReport> {
    let test: Vec<Impression> = log.iter().filter(|i| i.day > trained.split_day).cloned().collect();
    if test.is_empty() {
        return Err(CliError::EmptyTest { split_day: trained.split_day });
    }
    let m = &trained.model;
    let fz = Featurizer::new(&m.schema, m.hash_config, &trained.priors)?;
    let target = relevance_target(mode, &test)?;
    Ok(EvalReport {
        standard_auc: standard_auc(m, &fz, &test)?,
        relevance_auc: relevance_auc(m, &fz, &test, &target)?,
        relevance_mode: target.mode_name().to_string(),
        propensity_auc: propensity_auc(&test)?,
        n_test: test.len(),
    })
}

fn write_json_line<T: Serialize>(path: Option<&Path>, records: &[T], out: &mut dyn Write) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("serializable record"));
        text.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, &text).map_err(CliError::io(p)),
        None => out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>")),
    }
}

pub fn evaluate(
    model_path: &Path,
    log_path: &Path,
    mode: &RelevanceMode,
    report_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<EvalReport> {
    let trained = load_model(model_path)?;
    let log = read_log(log_path, &trained.model.schema)?;
    let report = evaluate_on(&trained, &log, mode)?;
    write_json_line(report_out, std::slice::from_ref(&report), out)?;
    Ok(report)
}

/// Sorts a grid and removes duplicates; returns the number removed.
pub fn dedup_grid(grid: &[f64]) -> (Vec<f64>, usize) {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    let removed = grid.len() - g.len();
    (g, removed)
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            match v.parse::<f64>() {
                Ok(c) if c.is_finite() && c > 0.0 => Ok(c),
                _ => Err(CliError::Usage(format!("bad C value `{v}` in grid"))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevance_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_weights: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn sweep_records(result: &SweepResult) -> Vec<SweepRecord> {
    result
        .rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(m) => SweepRecord {
                c: row.c_value,
                standard_auc: Some(m.standard_auc),
                relevance_auc: Some(m.relevance_auc),
                train_seconds: Some(m.train_seconds),
                active_weights: Some(m.active_weights),
                error: None,
            },
            Err(e) => SweepRecord {
                c: row.c_value,
                standard_auc: None,
                relevance_auc: None,
                train_seconds: None,
                active_weights: None,
                error: Some(format!("error[{}]: {e}", e.category())),
            },
        })
        .collect()
}

pub fn sweep_table(result: &SweepResult, mode: &str) -> String {
    let mut s = format!("{:>8}  {:>12}  {:>13}  {:>9}  {:>8}\n", "C", "standard_auc", "relevance_auc", "seconds", "active");
    let (bs, br) = (result.best_standard(), result.best_relevance());
    for (i, row) in result.rows.iter().enumerate() {
        match &row.outcome {
            Ok(m) => {
                let mark = match (Some(i) == bs, Some(i) == br) {
                    (true, true) => "  <- best standard, best relevance",
                    (true, false) => "  <- best standard",
                    (false, true) => "  <- best relevance",
                    _ => "",
                };
                s.push_str(&format!(
                    "{:>8e}  {:>12.4}  {:>13.4}  {:>9.2}  {:>8}{mark}\n",
                    row.c_value, m.standard_auc, m.relevance_auc, m.train_seconds, m.active_weights
                ));
            }
            Err(e) => s.push_str(&format!("{:>8e}  error[{}]: {e}\n", row.c_value, e.category())),
        }
    }
    s.push_str(&format!("relevance mode: {mode}\n"));
    s
}

pub struct SweepInputs<'a> {
    pub log: &'a Path,
    pub schema: Option<&'a Path>,
    pub grid: &'a [f64],
    pub split_day: u32,
    pub mode: RelevanceMode,
    pub base: TrainConfig,
}

pub fn sweep_on(
    log: &[Impression],
    schema: &FeatureSchema,
    grid: &[f64],
    split_day: u32,
    mode: &RelevanceMode,
    base: &TrainConfig,
) -> Result<(SweepResult, String)> {
    let (train, test) = temporal_split(log, split_day);
    if train.is_empty() {
        return Err(CliError::EmptyTrain { split_day });
    }
    if test.is_empty() {
        return Err(CliError::EmptyTest { split_day });
    }
    let hc = HashConfig::default();
    let priors = Priors::fit(&train, hc.max_rank, Smoothing::default())?;
    let fz = Featurizer::new(schema, hc, &priors)?;
    let data = Dataset::new(fz.featurize_batch(&train)?, train.iter().map(|i| i.clicked).collect())?;
    let target = relevance_target(mode, &test)?;
    let eval = eval_set(&fz, &test, &target)?;
    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64();
    Ok((sweep(&data, &eval, grid, base, schema, hc, &clock)?, target.mode_name().to_string()))
}

pub fn run_sweep(inputs: &SweepInputs<'_>, report_out: Option<&Path>, out: &mut dyn Write) -> Result<SweepResult> {
    let (grid, removed) = dedup_grid(inputs.grid);
    if removed > 0 {
        eprintln!("warning: removed {removed} duplicate C value(s) from the grid");
    }
    let schema = schema_or_default(inputs.schema)?;
    let log = read_log(inputs.log, &schema)?;
    let (result, mode) = sweep_on(&log, &schema, &grid, inputs.split_day, &inputs.mode, &inputs.base)?;
    let records = sweep_records(&result);
    write_json_line(report_out, &records, out)?;
    io(out)(format_args!("{}", sweep_table(&result, &mode)))?;
    Ok(result)
}

pub fn format_explanation(e: &Explanation) -> String {
    let mut s = format!("{:>10}  {:<16}  {:>4}  {:>4}  {:>12}\n", "id", "feature", "bin", "rank", "weight");
    for c in &e.contributions {
        let rank = if c.rank == 0 { "-".to_string() } else { c.rank.to_string() };
        s.push_str(&format!("{:>10}  {:<16}  {:>4}  {:>4}  {:>12.6}\n", c.id, c.feature, c.bin, rank, c.weight));
    }
    s.push_str(&format!("intercept {:.6}\nlogit {:.6}\nprobability {:.6}\n", e.intercept, e.logit, e.probability()));
    s
}

/// Explains the row at `row` (0-based, header excluded) of a log.
pub fn run_explain(model_path: &Path, log_path: &Path, row: usize, top_n: usize, out: &mut dyn Write) -> Result<Explanation> {
    let trained = load_model(model_path)?;
    let log = read_log(log_path, &trained.model.schema)?;
    let imp = log
        .get(row)
        .ok_or_else(|| CliError::Usage(format!("row {row} out of range, log has {} rows", log.len())))?;
    let e = explain(&trained.model, &trained.priors, imp, top_n)?;
    io(out)(format_args!("{}", format_explanation(&e)))?;
    Ok(e)
}

/// Counterfactual scores of every row, best first.
pub fn run_score(model_path: &Path, log_path: &Path, scores_out: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let trained = load_model(model_path)?;
    let log = read_log(log_path, &trained.model.schema)?;
    let scored = rerank(&trained.model, &trained.priors, &log)?;
    let mut text = String::from("item_id\tscore\n");
    for (item, score) in scored {
        text.push_str(&format!("{}\t{score}\n", item.0));
    }
    match scores_out {
        Some(p) => std::fs::write(p, text).map_err(CliError::io(p)),
        None => out.write_all(text.as_bytes()).map_err(CliError::io("<stdout>")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: usize,
    pub repetitions: usize,
    pub batch_seconds: f64,
    pub string_seconds: f64,
    pub batch_rows_per_second: f64,
    pub string_rows_per_second: f64,
    pub ratio: f64,
    pub equivalent: bool,
}

/// Times the integer kernel against the string-keyed reference on `rows`
/// simulated rows, best of `repetitions`.
pub fn bench(rows: usize, repetitions: usize, seed: u64) -> Result<BenchReport> {
    let repetitions = repetitions.max(1);
    if rows == 0 {
        return Ok(BenchReport {
            rows,
            repetitions,
            batch_seconds: 0.0,
            string_seconds: 0.0,
            batch_rows_per_second: 0.0,
            string_rows_per_second: 0.0,
            ratio: 1.0,
            equivalent: true,
        });
    }
    let base = SimulationConfig::default();
    let cfg = SimulationConfig { n_sessions: rows.div_ceil(base.slate_size), seed, ..base };
    let (mut log, _) = generate(&cfg)?;
    log.truncate(rows);
    let schema = default_schema();
    let hc = HashConfig::default();
    let priors = Priors::fit(&log, hc.max_rank, Smoothing::default())?;
    let fz = Featurizer::new(&schema, hc, &priors)?;

    let best = |f: &dyn Fn() -> Result<debias_core::FeatureBatch>| -> Result<(f64, debias_core::FeatureBatch)> {
        let mut best = f64::INFINITY;
        let mut last = None;
        for _ in 0..repetitions {
            let start = Instant::now();
            let b = f()?;
            best = best.min(start.elapsed().as_secs_f64());
            last = Some(b);
        }
        Ok((best, last.expect("at least one repetition")))
    };
    let (batch_seconds, batch) = best(&|| Ok(fz.featurize_batch(&log)?))?;
    let (string_seconds, reference) = best(&|| Ok(fz.featurize_string_reference(&log)?))?;
    let equivalent = batch == reference;
    if !equivalent {
        return Err(CliError::Mismatch);
    }
    let n = rows as f64;
    Ok(BenchReport {
        rows,
        repetitions,
        batch_seconds,
        string_seconds,
        batch_rows_per_second: n / batch_seconds,
        string_rows_per_second: n / string_seconds,
        ratio: string_seconds / batch_seconds,
        equivalent,
    })
}

pub fn run_bench(rows: usize, repetitions: usize, seed: u64, out: &mut dyn Write) -> Result<BenchReport> {
    let r = bench(rows, repetitions, seed)?;
    io(out)(format_args!(
        "rows={} repetitions={} batch={:.4}s ({:.0} rows/s) string={:.4}s ({:.0} rows/s) ratio={:.2}x equivalence={}\n",
        r.rows,
        r.repetitions,
        r.batch_seconds,
        r.batch_rows_per_second,
        r.string_seconds,
        r.string_rows_per_second,
        r.ratio,
        if r.equivalent { "PASS" } else { "FAIL" }
    ))?;
    Ok(r)
}
