//! Tube regions and small-deviation probabilities of the tilted walk.
//!
//! A [`TubeRegion`] is a piecewise-constant open tube `(f₁(t), f₂(t))` on
//! `[0, 1]`. For a mean-zero walk with variance σ², the probability that the
//! scaled path `S_k / n^{1/3}` stays inside the tube decays like
//! `exp(−(π²σ²/2)·H₂(G)·n^{1/3})`, where `H₂(G) = ∫₀¹ dt / (f₂ − f₁)²`.

use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::counter::{derive, mix64, unit_f64};
use crate::dist::StepDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MogulskiiError {
    #[error("invalid tube: {0}")]
    InvalidTube(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no sample stayed in the tube ({samples} samples); the rate estimate is undefined")]
    ZeroHits { samples: u64 },
}

/// Piecewise-constant open tube. Piece `j` covers `[t_j, t_{j+1})`; the last
/// piece also covers `t = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeRegion {
    breakpoints: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TubeRegion {
    /// `breakpoints` runs from 0 to 1 with one more entry than `lower`/`upper`.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(breakpoints: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MogulskiiError> {
        let bad = |m: String| Err(MogulskiiError::InvalidTube(m));
        let pieces = lower.len();
        if pieces == 0 || upper.len() != pieces || breakpoints.len() != pieces + 1 {
            return bad(format!(
                "{} breakpoints for {} lower and {} upper values",
                breakpoints.len(),
                lower.len(),
                upper.len()
            ));
        }
        if breakpoints[0] != 0.0 || breakpoints[pieces] != 1.0 {
            return bad("breakpoints must start at 0 and end at 1".into());
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("breakpoints must be strictly increasing".into());
        }
        for j in 0..pieces {
            if lower[j].is_nan() || upper[j].is_nan() || !(lower[j] < upper[j]) {
                return bad(format!("piece {j}: need f1 < f2, got ({}, {})", lower[j], upper[j]));
            }
            if lower[j] == f64::INFINITY || upper[j] == f64::NEG_INFINITY {
                return bad(format!("piece {j}: empty interval"));
            }
        }
        for j in 0..pieces - 1 {
            if !(lower[j].max(lower[j + 1]) < upper[j].min(upper[j + 1])) {
                return bad(format!("pieces {j} and {} do not overlap", j + 1));
            }
        }
        Ok(Self { breakpoints, lower, upper })
    }

    /// Single piece `(lower, upper)` on all of `[0, 1]`.
    pub fn constant(lower: f64, upper: f64) -> Result<Self, MogulskiiError> {
        Self::new(vec![0.0, 1.0], vec![lower], vec![upper])
    }

    /// The whole plane.
    pub fn full() -> Self {
        Self::constant(f64::NEG_INFINITY, f64::INFINITY).expect("valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn pieces(&self) -> usize {
        self.lower.len()
    }

    /// Index of the piece containing `t` (right-continuous; `t ≥ 1` maps to the last piece).
    pub fn piece_at(&self, t: f64) -> usize {
        let inner = &self.breakpoints[1..self.pieces()];
        inner.partition_point(|&b| b <= t)
    }

    /// `G_x`: both boundaries moved down by `x`.
    pub fn shifted(&self, x: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            lower: self.lower.iter().map(|f| f - x).collect(),
            upper: self.upper.iter().map(|f| f - x).collect(),
        }
    }

    /// `H₂(G) = Σ_j (t_{j+1} − t_j) / (f₂ⱼ − f₁ⱼ)²`; infinite pieces contribute 0.
    pub fn h2(&self) -> f64 {
        self.h2_widened(0.0)
    }

    /// `H₂` of the tube widened by `gap`: `Σ_j (t_{j+1} − t_j) / (f₂ⱼ − f₁ⱼ + gap)²`.
    pub fn h2_widened(&self, gap: f64) -> f64 {
        assert!(gap >= 0.0, "gap must be non-negative");
        (0..self.pieces())
            .map(|j| {
                let width = self.upper[j] - self.lower[j] + gap;
                (self.breakpoints[j + 1] - self.breakpoints[j]) / (width * width)
            })
            .sum()
    }

    /// Union `G_a ∪ G_b` for `a ≤ b`, i.e. `(f₁ − b, f₂ − a)` piecewise.
    pub fn union_of_shifts(&self, a: f64, b: f64) -> Self {
        assert!(a <= b);
        Self {
            breakpoints: self.breakpoints.clone(),
            lower: self.lower.iter().map(|f| f - b).collect(),
            upper: self.upper.iter().map(|f| f - a).collect(),
        }
    }
}

fn parse_bound(tok: &str) -> Result<f64, MogulskiiError> {
    match tok.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|e| MogulskiiError::InvalidTube(format!("`{t}`: {e}"))),
    }
}

/// Parses `t0:f1:f2;t1:f1:f2;...`: each entry opens a piece at `t_j` that
/// runs until the next entry (the last one until 1). Bounds may be `inf`/`-inf`.
impl FromStr for TubeRegion {
    type Err = MogulskiiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut breakpoints = Vec::new();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for entry in s.split(';').filter(|e| !e.trim().is_empty()) {
            let parts: Vec<&str> = entry.split(':').collect();
            if parts.len() != 3 {
                return Err(MogulskiiError::InvalidTube(format!("entry `{entry}` is not t:f1:f2")));
            }
            breakpoints.push(parse_bound(parts[0])?);
            lower.push(parse_bound(parts[1])?);
            upper.push(parse_bound(parts[2])?);
        }
        breakpoints.push(1.0);
        Self::new(breakpoints, lower, upper)
    }
}

/// Monte Carlo estimate of a stay probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StayEstimate {
    pub n: usize,
    pub samples: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// Binomial standard error `√(p̂(1 − p̂)/samples)`.
    pub std_err: f64,
    /// `−log(p̂)/n^{1/3}`; `None` when no sample stayed in the tube.
    pub rate_hat: Option<f64>,
}

impl StayEstimate {
    pub fn rate(&self) -> Result<f64, MogulskiiError> {
        self.rate_hat.ok_or(MogulskiiError::ZeroHits { samples: self.samples })
    }
}

/// Bounds in walk units (`(f − start)·n^{1/3}`) for each step `k = 0..n−1`,
/// compressed into runs of steps sharing a piece.
fn step_bounds(tube: &TubeRegion, n: usize, start: f64) -> Vec<(usize, f64, f64)> {
    let scale = (n as f64).cbrt();
    let mut runs: Vec<(usize, f64, f64)> = Vec::new();
    for k in 0..n {
        let j = tube.piece_at(k as f64 / n as f64);
        let lo = (tube.lower[j] - start) * scale;
        let hi = (tube.upper[j] - start) * scale;
        match runs.last() {
            Some(&(_, l, h)) if l == lo && h == hi => {}
            _ => runs.push((k, lo, hi)),
        }
    }
    runs
}

/// Does sample `index` stay in the tube for all steps `k = 0..n−1`?
#[inline]
fn stays(dist: &StepDistribution, stream: u64, runs: &[(usize, f64, f64)], n: usize) -> bool {
    let mut sum = 0.0;
    let mut k = 0usize;
    for (r, &(_, lo, hi)) in runs.iter().enumerate() {
        let end = runs.get(r + 1).map_or(n, |next| next.0);
        while k < end {
            if k > 0 {
                sum += dist.sample(unit_f64(mix64(stream.wrapping_add(k as u64))));
            }
            if !(lo < sum && sum < hi) {
                return false;
            }
            k += 1;
        }
    }
    true
}

/// Plain Monte Carlo estimate of `Q(start + S_n(t) ∈ G, t ∈ [0, 1])`.
///
/// `q_dist` should be the mean-zero tilted law. Sample `i` draws its step
/// `k ≥ 1` from `unit_f64(mix64(derive(seed, i) + k))`; the check at
/// `t = k/n` uses the piece containing `k/n`. Because every sample's
/// randomness depends only on `(seed, i)`, the estimate does not depend on
/// how samples are split across threads.
pub fn estimate_stay_prob(
    q_dist: &StepDistribution,
    tube: &TubeRegion,
    n: usize,
    samples: u64,
    seed: u64,
    start: f64,
) -> Result<StayEstimate, MogulskiiError> {
    if n == 0 || samples == 0 {
        return Err(MogulskiiError::InvalidArgument(format!("need n >= 1 and samples >= 1 (got {n}, {samples})")));
    }
    let runs = step_bounds(tube, n, start);
    const CHUNK: u64 = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            (lo..hi).filter(|&i| stays(q_dist, derive(seed, i), &runs, n)).count() as u64
        })
        .sum();
    let p_hat = hits as f64 / samples as f64;
    let std_err = (p_hat * (1.0 - p_hat) / samples as f64).sqrt();
    let rate_hat = (hits > 0).then(|| (0.0 - p_hat.ln()) / (n as f64).cbrt());
    Ok(StayEstimate { n, samples, hits, p_hat, std_err, rate_hat })
}
