//! Large-deviation profile of a step law on a `b`-ary tree.
//!
//! For a law with log-MGF Λ the tilt parameters λ± solve
//! `λΛ′(λ) − Λ(λ) = log b` on either side of zero; `Λ′(λ₋)` and `Λ′(λ₊)` are
//! the linear speeds of the minimum and maximum. After centering the law so
//! that the minimal speed is zero, the tilted variance σ_Q² = Λ″(λ₋) and
//! λ₋ fix the offset constant `l0 = ∛(3π²σ_Q² / (−2λ₋))`.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::dist::StepDistribution;

/// Largest |λ| tried while bracketing a tilt parameter.
pub const LAMBDA_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltSide {
    Negative,
    Positive,
}

impl TiltSide {
    fn sign(self) -> f64 {
        match self {
            TiltSide::Negative => -1.0,
            TiltSide::Positive => 1.0,
        }
    }
}

impl fmt::Display for TiltSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiltSide::Negative => "negative",
            TiltSide::Positive => "positive",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdError {
    #[error("assumption violated: λΛ′(λ) − Λ(λ) = log b has no {side} root ({reason})")]
    AssumptionViolated { side: TiltSide, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Λ*(x) = sup_λ (λx − Λ(λ)).
///
/// Returns `f64::INFINITY` outside the closed support of a bounded law. At a
/// support endpoint the supremum is only reached as |λ| → ∞ and equals
/// `−log P(X = x)`.
pub fn rate_function(dist: &StepDistribution, x: f64) -> f64 {
    let (lo, hi) = dist.support();
    if x < lo || x > hi {
        return f64::INFINITY;
    }
    if x == lo || x == hi {
        return -dist.mass_at(x).ln();
    }
    let slope = |lam: f64| dist.log_mgf_derivs(lam).1;

    // Λ′ is increasing; bracket the root of Λ′(λ) = x.
    let (mut a, mut b) = (-1.0, 1.0);
    while slope(a) > x && a > -LAMBDA_LIMIT {
        b = a;
        a *= 2.0;
    }
    while slope(b) < x && b < LAMBDA_LIMIT {
        a = b;
        b *= 2.0;
    }
    let mut lam = 0.5 * (a + b);
    for _ in 0..200 {
        let (_, d1, d2) = dist.log_mgf_derivs(lam);
        let resid = d1 - x;
        if resid.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
        if resid > 0.0 {
            b = lam;
        } else {
            a = lam;
        }
        let newton = lam - resid / d2;
        lam = if d2 > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a <= 1e-15 * lam.abs().max(1.0) {
            break;
        }
    }
    lam * x - dist.log_mgf(lam)
}

/// Root of `λΛ′(λ) − Λ(λ) = log b` on the requested side of zero.
///
/// The left-hand side vanishes at 0 and grows in |λ| on each side, so the
/// root is bracketed by doubling, narrowed by bisection to relative width
/// 1e-12, then polished with two Newton steps.
pub fn solve_lambda(dist: &StepDistribution, log_b: f64, side: TiltSide) -> Result<f64, LdError> {
    if !(log_b > 0.0 && log_b.is_finite()) {
        return Err(LdError::InvalidArgument(format!("log b must be finite and > 0, got {log_b}")));
    }
    let g = |lam: f64| dist.legendre_gap(lam) - log_b;
    let sign = side.sign();

    let mut inner = 0.0;
    let mut outer = sign;
    loop {
        let v = g(outer);
        if !v.is_finite() {
            return Err(LdError::AssumptionViolated { side, reason: format!("log-MGF not finite at λ = {outer}") });
        }
        if v > 0.0 {
            break;
        }
        inner = outer;
        outer *= 2.0;
        if outer.abs() > LAMBDA_LIMIT {
            return Err(LdError::AssumptionViolated {
                side,
                reason: format!("λΛ′ − Λ stays below log b up to |λ| = {LAMBDA_LIMIT}"),
            });
        }
    }

    // g(inner) ≤ 0 < g(outer)
    while (outer - inner).abs() > 1e-12 * outer.abs() {
        let mid = 0.5 * (inner + outer);
        if g(mid) > 0.0 {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    let (lo, hi) = if inner < outer { (inner, outer) } else { (outer, inner) };
    let mut lam = 0.5 * (inner + outer);
    for _ in 0..2 {
        let d2 = dist.log_mgf_derivs(lam).2;
        let slope = lam * d2;
        if slope == 0.0 {
            break;
        }
        let next = lam - g(lam) / slope;
        let width = hi - lo;
        if next >= lo - width && next <= hi + width && g(next).abs() <= g(lam).abs() {
            lam = next;
        }
    }
    Ok(lam)
}

/// Constants derived from a (law, branching factor) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LdProfile {
    pub b: u32,
    pub log_b: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// Minimal linear speed `m = Λ′(λ₋)` of the original law.
    pub min_speed: f64,
    /// Maximal linear speed `M = Λ′(λ₊)` of the original law.
    pub max_speed: f64,
    /// Variance of the tilted centered law.
    pub sigma_q_sq: f64,
    pub l0: f64,
    /// The input law shifted by `−m`, so its minimal speed is zero.
    pub centered: StepDistribution,
}

impl LdProfile {
    /// The tilted law `Q`: `centered` tilted by λ₋, mean zero.
    pub fn tilted(&self) -> StepDistribution {
        self.centered.tilt(self.lambda_minus)
    }

    /// `π²σ_Q² / (−2λ₋)`, the drift coefficient of the barrier ODE.
    pub fn barrier_coefficient(&self) -> f64 {
        PI * PI * self.sigma_q_sq / (-2.0 * self.lambda_minus)
    }

    /// `(π²σ_Q²/2)·h2`, the small-deviation exponent per unit `n^{1/3}`.
    pub fn tube_rate(&self, h2: f64) -> f64 {
        0.5 * PI * PI * self.sigma_q_sq * h2
    }
}

/// `∛(3π²σ_Q² / (−2λ₋))`.
pub fn offset_constant(sigma_q_sq: f64, lambda_minus: f64) -> f64 {
    (3.0 * PI * PI * sigma_q_sq / (-2.0 * lambda_minus)).cbrt()
}

pub fn ld_profile(dist: &StepDistribution, b: u32) -> Result<LdProfile, LdError> {
    if b < 2 {
        return Err(LdError::InvalidArgument(format!("branching factor must be >= 2, got {b}")));
    }
    let log_b = f64::from(b).ln();
    let lambda_minus = solve_lambda(dist, log_b, TiltSide::Negative)?;
    let lambda_plus = solve_lambda(dist, log_b, TiltSide::Positive)?;
    let min_speed = dist.log_mgf_derivs(lambda_minus).1;
    let max_speed = dist.log_mgf_derivs(lambda_plus).1;
    let centered = dist.center(min_speed);
    let sigma_q_sq = centered.log_mgf_derivs(lambda_minus).2;
    Ok(LdProfile {
        b,
        log_b,
        lambda_minus,
        lambda_plus,
        min_speed,
        max_speed,
        sigma_q_sq,
        l0: offset_constant(sigma_q_sq, lambda_minus),
        centered,
    })
}
