//! Barrier curves.
//!
//! The Euler recursion
//!
//! ```text
//! s_0 = 0,  w_0 = l + δ
//! s_k = s_{k-1} − π²σ_Q² / (2λ₋ w_{k-1}²) · ε,   w_k = l + δ − s_k
//! ```
//!
//! discretizes `s′ = c / (α − s)²`, `s(0) = 0` with `c = π²σ_Q²/(−2λ₋)` and
//! `α = l + δ`, whose solution is `s^α(t) = α + ∛(3ct − α³)`. The same
//! curve solves the minimax problem `min_w max_t { w(t) + ∫₀ᵗ c / w² }`
//! through `w = α − s`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::ldtool::LdProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("invalid barrier parameter: {0}")]
    InvalidParameter(String),
    /// The window width reached zero before the last step: the curve hit its
    /// ceiling `l + δ`, which happens in the sub-critical regime `l + δ < l0`.
    #[error("barrier curve reached its ceiling at step {k}")]
    CurveBlowup { k: usize, partial: Box<BarrierCurve> },
}

/// Euler sequence `(s_k, w_k)` for `k = 0..=inv_epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierCurve {
    pub l: f64,
    pub delta: f64,
    /// Number of Euler steps, `1/ε`.
    pub inv_epsilon: usize,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    pub sigma_q_sq: f64,
    pub lambda_minus: f64,
}

impl BarrierCurve {
    pub fn epsilon(&self) -> f64 {
        1.0 / self.inv_epsilon as f64
    }

    /// `l + δ`, the ceiling of the curve and the `α` of the matching ODE.
    pub fn alpha(&self) -> f64 {
        self.l + self.delta
    }

    /// Last index present; shorter than `inv_epsilon` only for a partial curve.
    pub fn last_index(&self) -> usize {
        self.s.len() - 1
    }

    /// Closed-form `s^α(kε)` for every stored index.
    pub fn closed_form(&self) -> Vec<f64> {
        (0..self.s.len())
            .map(|k| {
                closed_form_s(self.alpha(), self.sigma_q_sq, self.lambda_minus, k as f64 / self.inv_epsilon as f64)
            })
            .collect()
    }
}

/// Runs the Euler recursion for the barrier level `l`.
pub fn euler_curve(profile: &LdProfile, l: f64, delta: f64, inv_epsilon: usize) -> Result<BarrierCurve, BarrierError> {
    euler_curve_raw(profile.sigma_q_sq, profile.lambda_minus, l, delta, inv_epsilon)
}

/// [`euler_curve`] with the two profile constants passed directly.
pub fn euler_curve_raw(
    sigma_q_sq: f64,
    lambda_minus: f64,
    l: f64,
    delta: f64,
    inv_epsilon: usize,
) -> Result<BarrierCurve, BarrierError> {
    if !(l > 0.0 && delta > 0.0 && inv_epsilon >= 1) {
        return Err(BarrierError::InvalidParameter(format!(
            "need l > 0, delta > 0, inv_eps >= 1 (got {l}, {delta}, {inv_epsilon})"
        )));
    }
    if !(sigma_q_sq > 0.0 && lambda_minus < 0.0) {
        return Err(BarrierError::InvalidParameter("need sigma_q_sq > 0 and lambda_minus < 0".into()));
    }
    let alpha = l + delta;
    let eps = 1.0 / inv_epsilon as f64;
    let drift = -PI * PI * sigma_q_sq / (2.0 * lambda_minus);
    let mut s = Vec::with_capacity(inv_epsilon + 1);
    let mut w = Vec::with_capacity(inv_epsilon + 1);
    s.push(0.0);
    w.push(alpha);
    for k in 1..=inv_epsilon {
        let prev_w = w[k - 1];
        let next = s[k - 1] + drift / (prev_w * prev_w) * eps;
        s.push(next);
        w.push(alpha - next);
        if w[k] <= 0.0 && k < inv_epsilon {
            let partial = BarrierCurve { l, delta, inv_epsilon, s, w, sigma_q_sq, lambda_minus };
            return Err(BarrierError::CurveBlowup { k, partial: Box::new(partial) });
        }
    }
    Ok(BarrierCurve { l, delta, inv_epsilon, s, w, sigma_q_sq, lambda_minus })
}

/// `s^α(t) = α + ∛(l0³ t − α³)` with `l0³ = −3π²σ_Q²/(2λ₋)`; the cube root keeps the sign.
pub fn closed_form_s(alpha: f64, sigma_q_sq: f64, lambda_minus: f64, t: f64) -> f64 {
    let l0_cubed = -3.0 * PI * PI * sigma_q_sq / (2.0 * lambda_minus);
    alpha + (l0_cubed * t - alpha.powi(3)).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    /// First index with `s_k ≥ l1`, and `1 − Kε`.
    Crossed {
        k: usize,
        gamma_slack: f64,
    },
    NotCrossed,
}

/// Smallest `k` with `s_k ≥ l1`.
pub fn first_crossing(curve: &BarrierCurve, l1: f64) -> Crossing {
    match curve.s.iter().position(|&s| s >= l1) {
        Some(k) => Crossing::Crossed { k, gamma_slack: 1.0 - k as f64 / curve.inv_epsilon as f64 },
        None => Crossing::NotCrossed,
    }
}

/// Minimax solution on a uniform grid of `grid_size` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalSolution {
    pub value: f64,
    /// Grid nodes `t_j = j / grid_size`, `j = 0..=grid_size`.
    pub t: Vec<f64>,
    pub w_star: Vec<f64>,
    /// Objective decrease achieved by the local descent after the ODE start.
    pub descent_gain: f64,
}

/// Discretized objective `max_j { w_j + ∫₀^{t_j} c / w² }`.
///
/// Between nodes `w³` is interpolated linearly, so on a cell with end values
/// `a`, `b` and width `h` the integral is exactly `3ch / (a² + ab + b²)`.
/// Profiles of the form `w³ = A − 3ct` are therefore integrated without error.
pub fn variational_objective(c: f64, w: &[f64]) -> f64 {
    assert!(w.len() >= 2, "need at least one cell");
    let h = 1.0 / (w.len() - 1) as f64;
    let mut integral = 0.0;
    let mut best = w[0];
    for pair in w.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let denom = a * a + a * b + b * b;
        integral += if denom > 0.0 { 3.0 * c * h / denom } else { f64::INFINITY };
        best = best.max(b + integral);
    }
    best
}

/// Solves `min_w max_t { w(t) + ∫₀ᵗ c / w(u)² du }` on `[0, 1]`.
///
/// Starts from the equalizing profile `w³ = 3c(1 − t)` (from `w′ = −c/w²`
/// with `w(1) = 0`) and then runs coordinate descent over multiplicative
/// perturbations of the grid values, stopping once no move improves the
/// objective by more than 1e-9.
pub fn solve_variational(c: f64, grid_size: usize) -> Result<VariationalSolution, BarrierError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(BarrierError::InvalidParameter(format!("c must be finite and > 0, got {c}")));
    }
    if grid_size < 10 {
        return Err(BarrierError::InvalidParameter(format!("grid_size must be >= 10, got {grid_size}")));
    }
    let t: Vec<f64> = (0..=grid_size).map(|j| j as f64 / grid_size as f64).collect();
    let mut w: Vec<f64> = t.iter().map(|&tj| (3.0 * c * (1.0 - tj)).cbrt()).collect();
    w[grid_size] = 0.0;
    let start = variational_objective(c, &w);
    let mut value = start;

    const STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
    for _sweep in 0..20 {
        let mut improved = false;
        for j in 0..w.len() {
            let base = w[j];
            let scale = base.max(value * 1e-3);
            for step in STEPS {
                for dir in [1.0, -1.0] {
                    let trial = base + dir * step * scale;
                    if trial < 0.0 {
                        continue;
                    }
                    w[j] = trial;
                    let v = variational_objective(c, &w);
                    if v < value - 1e-9 {
                        value = v;
                        improved = true;
                    } else {
                        w[j] = base;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(VariationalSolution { value, t, w_star: w, descent_gain: start - value })
}
