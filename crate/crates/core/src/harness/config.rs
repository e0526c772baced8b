//! Line-oriented experiment configuration.
//!
//! ```text
//! # convergence study
//! dist = gaussian:0,1
//! b = 2
//! n_grid = 64, 512, 4096
//! trials_per_n = 200
//! base_seed = 20240601
//! node_budget = 1e9        # optional, default 1e9
//! output_path = out/study  # directory for trials.csv and summary.csv
//! workers = 8              # optional, default 1
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key may appear once.

use std::collections::HashSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::dist::StepDistribution;

pub const DEFAULT_WORKERS: usize = 1;
pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: key `{key}`: {reason}")]
    Field { line: usize, key: String, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dist: StepDistribution,
    pub b: u32,
    pub n_grid: Vec<usize>,
    pub trials_per_n: usize,
    pub base_seed: u64,
    pub node_budget: u64,
    pub output_path: PathBuf,
    pub workers: usize,
}

/// Accepts plain integers, `0x` hex, and exact float notation such as `1e9`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Some(hex) = s.strip_prefix("0x") {
        return u64::from_str_radix(hex, 16).map_err(|e| e.to_string());
    }
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut seen = HashSet::new();
    let mut dist = None;
    let mut b = None;
    let mut n_grid = None;
    let mut trials = None;
    let mut seed = None;
    let mut budget = DEFAULT_NODE_BUDGET;
    let mut output = None;
    let mut workers = DEFAULT_WORKERS;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let fail = |reason: String| ConfigError::Field { line, key: key.to_string(), reason };
        if !seen.insert(key.to_string()) {
            return Err(fail("duplicate key".into()));
        }
        if value.is_empty() {
            return Err(fail("empty value".into()));
        }
        match key {
            "dist" => dist = Some(value.parse::<StepDistribution>().map_err(|e| fail(e.to_string()))?),
            "b" => {
                let v = parse_count(value).map_err(fail)?;
                if !(2..=u64::from(u32::MAX)).contains(&v) {
                    return Err(fail(format!("branching factor must be >= 2, got {v}")));
                }
                b = Some(v as u32);
            }
            "n_grid" => {
                let grid = value
                    .split(',')
                    .map(|t| parse_count(t.trim()).map(|v| v as usize))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(fail)?;
                if grid.contains(&0) {
                    return Err(fail("grid sizes must be >= 1".into()));
                }
                if grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(fail("grid must be strictly increasing".into()));
                }
                n_grid = Some(grid);
            }
            "trials_per_n" => {
                let v = parse_count(value).map_err(fail)?;
                if v == 0 {
                    return Err(fail("must be >= 1".into()));
                }
                trials = Some(v as usize);
            }
            "base_seed" => seed = Some(parse_count(value).map_err(fail)?),
            "node_budget" => {
                budget = parse_count(value).map_err(fail)?;
                if budget == 0 {
                    return Err(fail("must be >= 1".into()));
                }
            }
            "output_path" => output = Some(PathBuf::from(value)),
            "workers" => {
                let v = parse_count(value).map_err(fail)?;
                if v == 0 || v > 1024 {
                    return Err(fail("must be between 1 and 1024".into()));
                }
                workers = v as usize;
            }
            _ => return Err(fail("unknown key".into())),
        }
    }

    Ok(ExperimentConfig {
        dist: dist.ok_or(ConfigError::Missing("dist"))?,
        b: b.ok_or(ConfigError::Missing("b"))?,
        n_grid: n_grid.ok_or(ConfigError::Missing("n_grid"))?,
        trials_per_n: trials.ok_or(ConfigError::Missing("trials_per_n"))?,
        base_seed: seed.ok_or(ConfigError::Missing("base_seed"))?,
        node_budget: budget,
        output_path: output.ok_or(ConfigError::Missing("output_path"))?,
        workers,
    })
}
