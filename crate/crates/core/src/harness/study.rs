//! Convergence and tube studies.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::config::ExperimentConfig;
use super::csv::{fmt_f64, parse_f64, read_table, CsvTable};
use crate::brw::{exact_offset, TreeRandomness};
use crate::counter::{derive, trial_seed};
use crate::dist::StepDistribution;
use crate::ldtool::{ld_profile, LdError};
use crate::mogulskii::{estimate_stay_prob, MogulskiiError, StayEstimate, TubeRegion};

pub const TRIALS_HEADER: [&str; 9] = [
    "n",
    "trial",
    "seed",
    "l_n",
    "l_n_over_cbrt_n",
    "lower_bound",
    "nodes_explored",
    "nodes_generated",
    "budget_exhausted",
];

pub const SUMMARY_HEADER: [&str; 12] = [
    "n",
    "trials",
    "median",
    "mean",
    "q1",
    "q3",
    "median_l_n",
    "exhausted_fraction",
    "abs_median_minus_l0",
    "slope",
    "intercept",
    "l0",
];

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Assumption(#[from] LdError),
    #[error(transparent)]
    Tube(#[from] MogulskiiError),
    #[error("malformed trials CSV: {0}")]
    Malformed(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One exact-offset trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub l_n: f64,
    pub lower_bound: f64,
    pub nodes_explored: u64,
    pub nodes_generated: u64,
    pub budget_exhausted: bool,
}

impl TrialRow {
    pub fn scaled(&self) -> f64 {
        self.l_n / (self.n as f64).cbrt()
    }
}

/// Per-size statistics of `L_n / n^{1/3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub trials: usize,
    pub median: f64,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub median_l_n: f64,
    pub exhausted_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSummary {
    pub sizes: Vec<SizeSummary>,
    /// Least-squares slope of `log median L_n` against `log n`; NaN with fewer than two usable sizes.
    pub slope: f64,
    pub intercept: f64,
    pub l0_reference: f64,
}

impl OffsetSummary {
    /// Fraction of all trials that hit the node budget.
    pub fn exhausted_fraction(&self) -> f64 {
        let total: usize = self.sizes.iter().map(|s| s.trials).sum();
        let hit: f64 = self.sizes.iter().map(|s| s.exhausted_fraction * s.trials as f64).sum();
        if total == 0 {
            0.0
        } else {
            hit / total as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&SUMMARY_HEADER);
        for s in &self.sizes {
            t.push_raw(vec![
                s.n.to_string(),
                s.trials.to_string(),
                fmt_f64(s.median),
                fmt_f64(s.mean),
                fmt_f64(s.q1),
                fmt_f64(s.q3),
                fmt_f64(s.median_l_n),
                fmt_f64(s.exhausted_fraction),
                fmt_f64((s.median - self.l0_reference).abs()),
                fmt_f64(self.slope),
                fmt_f64(self.intercept),
                fmt_f64(self.l0_reference),
            ]);
        }
        t.into_string()
    }
}

/// Quantile with linear interpolation between order statistics; `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least squares `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Summary of trial rows, which must be sorted by `(n, trial)`.
pub fn summarize(rows: &[TrialRow], l0: f64) -> OffsetSummary {
    let mut sizes = Vec::new();
    for group in rows.chunk_by(|a, b| a.n == b.n) {
        let mut scaled: Vec<f64> = group.iter().map(TrialRow::scaled).collect();
        scaled.sort_by(f64::total_cmp);
        let mut raw: Vec<f64> = group.iter().map(|r| r.l_n).collect();
        raw.sort_by(f64::total_cmp);
        let exhausted = group.iter().filter(|r| r.budget_exhausted).count();
        sizes.push(SizeSummary {
            n: group[0].n,
            trials: group.len(),
            median: quantile(&scaled, 0.5),
            mean: scaled.iter().sum::<f64>() / scaled.len() as f64,
            q1: quantile(&scaled, 0.25),
            q3: quantile(&scaled, 0.75),
            median_l_n: quantile(&raw, 0.5),
            exhausted_fraction: exhausted as f64 / group.len() as f64,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        sizes.iter().filter(|s| s.median_l_n > 0.0).map(|s| ((s.n as f64).ln(), s.median_l_n.ln())).unzip();
    let (slope, intercept) = linear_fit(&xs, &ys);
    OffsetSummary { sizes, slope, intercept, l0_reference: l0 }
}

pub fn trials_to_csv(rows: &[TrialRow]) -> String {
    let mut t = CsvTable::new(&TRIALS_HEADER);
    for r in rows {
        t.push_raw(vec![
            r.n.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.l_n),
            fmt_f64(r.scaled()),
            fmt_f64(r.lower_bound),
            r.nodes_explored.to_string(),
            r.nodes_generated.to_string(),
            u8::from(r.budget_exhausted).to_string(),
        ]);
    }
    t.into_string()
}

pub fn trials_from_csv(text: &str) -> Result<Vec<TrialRow>, StudyError> {
    let bad = |m: String| StudyError::Malformed(m);
    let (header, rows) = read_table(text).ok_or_else(|| bad("empty file".into()))?;
    if header != TRIALS_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    rows.iter()
        .enumerate()
        .map(|(i, f)| {
            let at = |m: &str| bad(format!("row {}: {m}", i + 1));
            if f.len() != TRIALS_HEADER.len() {
                return Err(at("wrong number of fields"));
            }
            Ok(TrialRow {
                n: f[0].parse().map_err(|_| at("n"))?,
                trial: f[1].parse().map_err(|_| at("trial"))?,
                seed: f[2].parse().map_err(|_| at("seed"))?,
                l_n: parse_f64(&f[3]).ok_or_else(|| at("l_n"))?,
                lower_bound: parse_f64(&f[5]).ok_or_else(|| at("lower_bound"))?,
                nodes_explored: f[6].parse().map_err(|_| at("nodes_explored"))?,
                nodes_generated: f[7].parse().map_err(|_| at("nodes_generated"))?,
                budget_exhausted: match f[8].as_str() {
                    "0" => false,
                    "1" => true,
                    _ => return Err(at("budget_exhausted")),
                },
            })
        })
        .collect()
}

/// Recomputes the summary from the raw trials CSV.
pub fn summary_from_csv(text: &str, l0: f64) -> Result<OffsetSummary, StudyError> {
    let mut rows = trials_from_csv(text)?;
    rows.sort_by_key(|r| (r.n, r.trial));
    Ok(summarize(&rows, l0))
}

/// Result of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<TrialRow>,
    pub summary: OffsetSummary,
    pub trials_csv: String,
    pub summary_csv: String,
}

/// Runs every `(n, trial)` of the configuration without touching the file system.
pub fn compute_convergence_study(config: &ExperimentConfig) -> Result<StudyOutput, StudyError> {
    let profile = ld_profile(&config.dist, config.b)?;
    let centered = profile.centered.clone();
    let b = config.b as usize;
    let jobs: Vec<(usize, usize)> =
        config.n_grid.iter().flat_map(|&n| (0..config.trials_per_n).map(move |t| (n, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| StudyError::Pool(e.to_string()))?;
    let mut rows: Vec<TrialRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, trial)| {
                let seed = trial_seed(config.base_seed, n as u64, trial as u64);
                let r = exact_offset(&centered, &TreeRandomness::new(seed, b), n, config.node_budget);
                TrialRow {
                    n,
                    trial,
                    seed,
                    l_n: r.l_n,
                    lower_bound: r.lower_bound,
                    nodes_explored: r.nodes_explored,
                    nodes_generated: r.nodes_generated,
                    budget_exhausted: r.budget_exhausted,
                }
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.n, r.trial));
    let summary = summarize(&rows, profile.l0);
    let trials_csv = trials_to_csv(&rows);
    let summary_csv = summary.to_csv();
    Ok(StudyOutput { rows, summary, trials_csv, summary_csv })
}

fn write(path: &Path, text: &str) -> Result<(), StudyError> {
    fs::write(path, text).map_err(|source| StudyError::Io { path: path.to_path_buf(), source })
}

/// Runs the study and writes `trials.csv` and `summary.csv` under `output_path`.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<StudyOutput, StudyError> {
    let out = compute_convergence_study(config)?;
    let dir = &config.output_path;
    fs::create_dir_all(dir).map_err(|source| StudyError::Io { path: dir.clone(), source })?;
    write(&dir.join("trials.csv"), &out.trials_csv)?;
    write(&dir.join("summary.csv"), &out.summary_csv)?;
    Ok(out)
}

/// A tube study: one tube, several walk lengths.
#[derive(Debug, Clone)]
pub struct TubeStudyConfig {
    pub dist: StepDistribution,
    pub b: u32,
    pub tube: TubeRegion,
    pub n_grid: Vec<usize>,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeRow {
    pub estimate: StayEstimate,
    pub predicted_rate: f64,
}

pub const TUBE_HEADER: [&str; 7] = ["n", "samples", "p_hat", "std_err", "rate_hat", "predicted_rate", "zero_hits"];

/// Estimates the stay probability of the tilted law for each `n`; walk
/// length `n` uses seed `derive(seed, n)`. A zero-hit row keeps `rate_hat`
/// as `nan` with `zero_hits = 1`.
pub fn run_tube_study(config: &TubeStudyConfig) -> Result<(Vec<TubeRow>, String), StudyError> {
    let profile = ld_profile(&config.dist, config.b)?;
    let q = profile.tilted();
    let predicted_rate = profile.tube_rate(config.tube.h2());
    let mut rows = Vec::with_capacity(config.n_grid.len());
    let mut table = CsvTable::new(&TUBE_HEADER);
    for &n in &config.n_grid {
        let estimate = estimate_stay_prob(&q, &config.tube, n, config.samples, derive(config.seed, n as u64), 0.0)?;
        table.push_raw(vec![
            n.to_string(),
            estimate.samples.to_string(),
            fmt_f64(estimate.p_hat),
            fmt_f64(estimate.std_err),
            fmt_f64(estimate.rate_hat.unwrap_or(f64::NAN)),
            fmt_f64(predicted_rate),
            u8::from(estimate.rate_hat.is_none()).to_string(),
        ]);
        rows.push(TubeRow { estimate, predicted_rate });
    }
    Ok((rows, table.into_string()))
}
