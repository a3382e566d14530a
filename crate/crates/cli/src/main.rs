use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use debias_cli::commands::{self, RelevanceMode, SweepInputs, DEFAULT_LABEL_SEED, DEFAULT_SPLIT_DAY};
use debias_cli::{CliError, Result};
use debias_core::trainer::TrainConfig;

#[derive(Parser)]
#[command(name = "debias", version, about = "Position-debiased click models over impression logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Truth,
    Stratified,
}

#[derive(clap::Args)]
struct RelevanceArgs {
    /// Relevance AUC mode; defaults to truth when --truth is given.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Truth file from `simulate`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Logged rank used by the stratified mode.
    #[arg(long, default_value_t = 1)]
    rank_stratum: u32,
    /// Seed for drawing relevance labels.
    #[arg(long, default_value_t = DEFAULT_LABEL_SEED)]
    seed: u64,
}

impl RelevanceArgs {
    fn mode(&self) -> Result<RelevanceMode> {
        let mode = self.mode.unwrap_or(if self.truth.is_some() { Mode::Truth } else { Mode::Stratified });
        match mode {
            Mode::Truth => {
                let truth = self.truth.clone().ok_or_else(|| CliError::Usage("--mode truth needs --truth".into()))?;
                Ok(RelevanceMode::Truth { truth, seed: self.seed })
            }
            Mode::Stratified => {
                if self.rank_stratum == 0 {
                    return Err(CliError::Usage("--rank-stratum must be >= 1".into()));
                }
                Ok(RelevanceMode::Stratified { rank: self.rank_stratum })
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic impression log and its relevance truth.
    Simulate {
        /// key=value config; missing keys use defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit priors and a model on rows up to the split day.
    Train {
        log: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-5)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_SPLIT_DAY)]
        split_day: u32,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics on rows after the model's split day.
    Evaluate {
        model: PathBuf,
        log: PathBuf,
        #[command(flatten)]
        relevance: RelevanceArgs,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate one model per C.
    Sweep {
        log: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Comma-separated C values.
        #[arg(long, default_value = "1e-6,1e-5,1e-4,1e-3,1e-2,0.1,1.0")]
        grid: String,
        #[arg(long, default_value_t = DEFAULT_SPLIT_DAY)]
        split_day: u32,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
        #[command(flatten)]
        relevance: RelevanceArgs,
        /// JSON-lines results file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-feature contributions for one logged row.
    Explain {
        model: PathBuf,
        log: PathBuf,
        /// 0-based data row.
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Counterfactual scores for candidate rows, best first.
    Score {
        model: PathBuf,
        candidates: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integer crossing kernel against the string-keyed reference.
    Bench {
        #[arg(long, default_value_t = 1_000_000)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn train_config(c: f64, max_iterations: usize) -> Result<TrainConfig> {
    let cfg = TrainConfig { c_value: c, max_iterations, ..TrainConfig::default() };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out: dir } => {
            commands::simulate(config.as_deref(), seed, &dir, out)?;
        }
        Command::Train { log, schema, c, split_day, max_iterations, out: model } => {
            let cfg = train_config(c, max_iterations)?;
            commands::train(&log, schema.as_deref(), &cfg, split_day, &model, out)?;
        }
        Command::Evaluate { model, log, relevance, out: report } => {
            commands::evaluate(&model, &log, &relevance.mode()?, report.as_deref(), out)?;
        }
        Command::Sweep { log, schema, grid, split_day, max_iterations, relevance, out: report } => {
            let grid = commands::parse_grid(&grid)?;
            let inputs = SweepInputs {
                log: &log,
                schema: schema.as_deref(),
                grid: &grid,
                split_day,
                mode: relevance.mode()?,
                base: train_config(TrainConfig::default().c_value, max_iterations)?,
            };
            commands::run_sweep(&inputs, report.as_deref(), out)?;
        }
        Command::Explain { model, log, row, top_n } => {
            commands::run_explain(&model, &log, row, top_n, out)?;
        }
        Command::Score { model, candidates, out: scores } => {
            commands::run_score(&model, &candidates, scores.as_deref(), out)?;
        }
        Command::Bench { rows, repetitions, seed } => {
            commands::run_bench(rows, repetitions, seed, out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
