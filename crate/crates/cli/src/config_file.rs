//! Flat `key=value` simulation configs.

use std::fmt::Write as _;
use std::path::Path;

use debias_core::simulator::SimulationConfig;

use crate::error::{CliError, Result};

/// Parses a config; missing keys keep their defaults.
pub fn parse_config(text: &str, path: &Path) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::parse(path, n + 1, "expected key=value"));
        };
        let (key, value) = (key.trim(), value.trim());
        let bad = || CliError::parse(path, n + 1, format!("bad value `{value}` for `{key}`"));
        macro_rules! set {
            ($field:ident) => {
                cfg.$field = value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "n_items" => set!(n_items),
            "n_users" => set!(n_users),
            "n_sessions" => set!(n_sessions),
            "slate_size" => set!(slate_size),
            "days" => set!(days),
            "base_examination" => set!(base_examination),
            "logging_policy_noise" => set!(logging_policy_noise),
            "confounding_strength" => set!(confounding_strength),
            "quality_weight" => set!(quality_weight),
            "affinity_weight" => set!(affinity_weight),
            "relevance_offset" => set!(relevance_offset),
            "activity_click_elasticity" => set!(activity_click_elasticity),
            "seed" => set!(seed),
            "propensity_grid" => {
                cfg.propensity_grid = value
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?
            }
            other => return Err(CliError::parse(path, n + 1, format!("unknown key `{other}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_config(&text, path)
}

/// Every field, in a fixed order, parseable by [`parse_config`].
pub fn format_config(cfg: &SimulationConfig) -> String {
    let grid: Vec<String> = cfg.propensity_grid.iter().map(f64::to_string).collect();
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").unwrap();
    kv("n_items", cfg.n_items.to_string());
    kv("n_users", cfg.n_users.to_string());
    kv("n_sessions", cfg.n_sessions.to_string());
    kv("slate_size", cfg.slate_size.to_string());
    kv("days", cfg.days.to_string());
    kv("propensity_grid", grid.join(","));
    kv("base_examination", cfg.base_examination.to_string());
    kv("logging_policy_noise", cfg.logging_policy_noise.to_string());
    kv("confounding_strength", cfg.confounding_strength.to_string());
    kv("quality_weight", cfg.quality_weight.to_string());
    kv("affinity_weight", cfg.affinity_weight.to_string());
    kv("relevance_offset", cfg.relevance_offset.to_string());
    kv("activity_click_elasticity", cfg.activity_click_elasticity.to_string());
    kv("seed", cfg.seed.to_string());
    s
}
