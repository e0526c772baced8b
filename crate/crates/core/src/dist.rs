//! Step laws of the branching random walk.
//!
//! A [`StepDistribution`] is one of a few light-tailed kinds plus an
//! additive `shift`. The shift is kept apart from the kind so that centering
//! is exact and reversible. Sampling is inverse-transform from an explicit
//! uniform, which lets callers drive it from counter-based randomness.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Tolerance on the total mass of a discrete law.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse distribution `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}

/// Shape of the increment law, before the additive shift.
#[derive(Debug, Clone, PartialEq)]
pub enum DistKind {
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Takes value `a` with probability `p` and `b` otherwise.
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
    },
    /// `(value, probability)` atoms. Sampling walks the atoms in stored order.
    FiniteDiscrete {
        atoms: Vec<(f64, f64)>,
    },
}

/// Increment law `F` together with an additive shift applied to every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    kind: DistKind,
    shift: f64,
}

/// Weighted atoms `(value, prob)` without the shift; shared by both discrete kinds.
fn atoms_of(kind: &DistKind) -> Option<Vec<(f64, f64)>> {
    match kind {
        DistKind::Gaussian { .. } => None,
        DistKind::TwoPoint { a, b, p } => Some(vec![(*a, *p), (*b, 1.0 - *p)]),
        DistKind::FiniteDiscrete { atoms } => Some(atoms.clone()),
    }
}

/// Exponentially tilted atom weights.
///
/// Returns normalized weights `q_i ∝ p_i e^{λ v_i}`, the log of the
/// normalizer relative to the largest exponent, and that largest exponent.
fn tilted_weights(atoms: &[(f64, f64)], lambda: f64) -> (Vec<f64>, f64, f64) {
    let max_exp = atoms.iter().filter(|(_, p)| *p > 0.0).map(|(v, _)| lambda * v).fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> =
        atoms.iter().map(|(v, p)| if *p > 0.0 { p * (lambda * v - max_exp).exp() } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    for q in w.iter_mut() {
        *q /= total;
    }
    (w, total.ln(), max_exp)
}

impl StepDistribution {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self, DistError> {
        Self::new(DistKind::Gaussian { mean, variance })
    }

    pub fn two_point(a: f64, b: f64, p: f64) -> Result<Self, DistError> {
        Self::new(DistKind::TwoPoint { a, b, p })
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self, DistError> {
        Self::new(DistKind::FiniteDiscrete { atoms })
    }

    /// Validates `kind` and wraps it with zero shift.
    pub fn new(kind: DistKind) -> Result<Self, DistError> {
        let bad = |msg: String| Err(DistError::InvalidParameter(msg));
        match &kind {
            DistKind::Gaussian { mean, variance } => {
                if !mean.is_finite() {
                    return bad(format!("gaussian mean must be finite, got {mean}"));
                }
                if !(variance.is_finite() && *variance > 0.0) {
                    return bad(format!("gaussian variance must be finite and > 0, got {variance}"));
                }
            }
            DistKind::TwoPoint { a, b, p } => {
                if !(a.is_finite() && b.is_finite()) {
                    return bad("two-point values must be finite".into());
                }
                if !(*p > 0.0 && *p < 1.0) {
                    return bad(format!("two-point probability must lie in (0, 1), got {p}"));
                }
                if a == b {
                    return bad("two-point law is degenerate (a == b)".into());
                }
            }
            DistKind::FiniteDiscrete { atoms } => {
                if atoms.iter().any(|(v, p)| !v.is_finite() || !p.is_finite() || *p < 0.0) {
                    return bad("atoms need finite values and non-negative probabilities".into());
                }
                let total: f64 = atoms.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return bad(format!("atom probabilities sum to {total}, expected 1"));
                }
                let mut support = atoms.iter().filter(|(_, p)| *p > 0.0).map(|(v, _)| *v);
                let first = support.next();
                if !support.any(|v| Some(v) != first) {
                    return bad("discrete law needs two distinct atoms with positive mass".into());
                }
            }
        }
        Ok(Self { kind, shift: 0.0 })
    }

    pub fn kind(&self) -> &DistKind {
        &self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Same law with the shift replaced.
    pub fn with_shift(&self, shift: f64) -> Self {
        Self { kind: self.kind.clone(), shift }
    }

    /// Smallest and largest values the shifted law can take.
    pub fn support(&self) -> (f64, f64) {
        match atoms_of(&self.kind) {
            None => (f64::NEG_INFINITY, f64::INFINITY),
            Some(atoms) => {
                let live = atoms.iter().filter(|(_, p)| *p > 0.0).map(|(v, _)| *v);
                let lo = live.clone().fold(f64::INFINITY, f64::min);
                let hi = live.fold(f64::NEG_INFINITY, f64::max);
                (lo + self.shift, hi + self.shift)
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, DistKind::Gaussian { .. })
    }

    /// Probability mass sitting exactly at `x` (zero for the Gaussian).
    pub fn mass_at(&self, x: f64) -> f64 {
        atoms_of(&self.kind)
            .map(|atoms| atoms.iter().filter(|(v, _)| v + self.shift == x).map(|(_, p)| p).sum())
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.log_mgf_derivs(0.0).1
    }

    pub fn variance(&self) -> f64 {
        self.log_mgf_derivs(0.0).2
    }

    /// Λ(λ) = log E e^{λX} of the shifted law.
    pub fn log_mgf(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        match &self.kind {
            DistKind::Gaussian { mean, variance } => (mean + self.shift) * lambda + 0.5 * variance * lambda * lambda,
            kind => {
                let atoms = atoms_of(kind).expect("discrete kind");
                let (_, log_total, max_exp) = tilted_weights(&atoms, lambda);
                self.shift * lambda + max_exp + log_total
            }
        }
    }

    /// `(Λ, Λ′, Λ″)` at `lambda`; `Λ′` is the tilted mean and `Λ″` the tilted variance.
    pub fn log_mgf_derivs(&self, lambda: f64) -> (f64, f64, f64) {
        match &self.kind {
            DistKind::Gaussian { variance, .. } => {
                let mu = self.gaussian_mean();
                (self.log_mgf(lambda), mu + variance * lambda, *variance)
            }
            kind => {
                let atoms = atoms_of(kind).expect("discrete kind");
                let (q, _, _) = tilted_weights(&atoms, lambda);
                let mean: f64 = q.iter().zip(&atoms).map(|(q, (v, _))| q * v).sum();
                let var: f64 = q.iter().zip(&atoms).map(|(q, (v, _))| q * (v - mean).powi(2)).sum();
                (self.log_mgf(lambda), mean + self.shift, var)
            }
        }
    }

    /// λΛ′(λ) − Λ(λ), evaluated without cancellation.
    ///
    /// For the Gaussian this is σ²λ²/2. For discrete laws it equals the
    /// relative entropy of the tilted weights against the original ones,
    /// which is summed term by term and never overshoots its supremum.
    pub fn legendre_gap(&self, lambda: f64) -> f64 {
        match &self.kind {
            DistKind::Gaussian { variance, .. } => 0.5 * variance * lambda * lambda,
            kind => {
                let atoms = atoms_of(kind).expect("discrete kind");
                let (q, log_total, max_exp) = tilted_weights(&atoms, lambda);
                q.iter()
                    .zip(&atoms)
                    .filter(|(q, _)| **q > 0.0)
                    .map(|(q, (v, p))| {
                        let log_q = (lambda * v - max_exp) - log_total + p.ln();
                        q * (log_q - p.ln())
                    })
                    .sum::<f64>()
                    .max(0.0)
            }
        }
    }

    fn gaussian_mean(&self) -> f64 {
        match self.kind {
            DistKind::Gaussian { mean, .. } => mean + self.shift,
            _ => unreachable!(),
        }
    }

    /// Law with density `e^{λx − Λ(λ)}` against `self`.
    pub fn tilt(&self, lambda: f64) -> Self {
        if lambda == 0.0 {
            return self.clone();
        }
        let kind = match &self.kind {
            DistKind::Gaussian { mean, variance } => {
                DistKind::Gaussian { mean: mean + lambda * variance, variance: *variance }
            }
            DistKind::TwoPoint { a, b, .. } => {
                let atoms = atoms_of(&self.kind).expect("discrete kind");
                let (q, _, _) = tilted_weights(&atoms, lambda);
                DistKind::TwoPoint { a: *a, b: *b, p: q[0] / (q[0] + q[1]) }
            }
            DistKind::FiniteDiscrete { atoms } => {
                let (q, _, _) = tilted_weights(atoms, lambda);
                let total: f64 = q.iter().sum();
                DistKind::FiniteDiscrete { atoms: atoms.iter().zip(q).map(|((v, _), q)| (*v, q / total)).collect() }
            }
        };
        Self { kind, shift: self.shift }
    }

    /// Subtracts `m` from every increment.
    pub fn center(&self, m: f64) -> Self {
        self.with_shift(self.shift - m)
    }

    /// Inverse-CDF transform of `uniform ∈ [0, 1)`.
    ///
    /// Discrete laws pick the first atom whose cumulative mass exceeds the
    /// uniform. The Gaussian maps `0.0` to `-inf`.
    pub fn sample(&self, uniform: f64) -> f64 {
        match &self.kind {
            DistKind::Gaussian { mean, variance } => mean + self.shift + variance.sqrt() * inverse_normal_cdf(uniform),
            DistKind::TwoPoint { a, b, p } => {
                if uniform < *p {
                    a + self.shift
                } else {
                    b + self.shift
                }
            }
            DistKind::FiniteDiscrete { atoms } => {
                let mut cum = 0.0;
                for (v, p) in atoms {
                    cum += p;
                    if uniform < cum {
                        return v + self.shift;
                    }
                }
                let (v, _) = atoms.iter().rev().find(|(_, p)| *p > 0.0).expect("validated");
                v + self.shift
            }
        }
    }
}

/// Standard normal quantile, Wichura's AS 241 (PPND16).
///
/// Relative accuracy is about 1e-16 over the whole open unit interval.
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4) * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den =
            ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2) * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn parse_f64(spec: &str, tok: &str) -> Result<f64, DistError> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| DistError::Parse { spec: spec.to_string(), reason: format!("`{}`: {e}", tok.trim()) })
}

/// Parses `gaussian:<mean>,<var>`, `twopoint:<a>,<b>,<p>` or
/// `discrete:<v1>:<p1>;<v2>:<p2>;...`, optionally followed by `+shift(<s>)`.
impl FromStr for StepDistribution {
    type Err = DistError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let perr = |reason: &str| DistError::Parse { spec: spec.to_string(), reason: reason.to_string() };
        let (body, shift) = match spec.trim().strip_suffix(')').and_then(|s| s.rsplit_once("+shift(")) {
            Some((body, shift)) => (body, parse_f64(spec, shift)?),
            None => (spec.trim(), 0.0),
        };
        let (name, args) = body.split_once(':').ok_or_else(|| perr("missing `:`"))?;
        let base = match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" => {
                let v: Vec<&str> = args.split(',').collect();
                if v.len() != 2 {
                    return Err(perr("gaussian takes <mean>,<var>"));
                }
                Self::gaussian(parse_f64(spec, v[0])?, parse_f64(spec, v[1])?)
            }
            "twopoint" => {
                let v: Vec<&str> = args.split(',').collect();
                if v.len() != 3 {
                    return Err(perr("twopoint takes <a>,<b>,<p>"));
                }
                Self::two_point(parse_f64(spec, v[0])?, parse_f64(spec, v[1])?, parse_f64(spec, v[2])?)
            }
            "discrete" => {
                let atoms = args
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|atom| {
                        let (v, p) = atom.split_once(':').ok_or_else(|| perr("atoms are <value>:<prob>"))?;
                        Ok((parse_f64(spec, v)?, parse_f64(spec, p)?))
                    })
                    .collect::<Result<Vec<_>, DistError>>()?;
                Self::discrete(atoms)
            }
            other => Err(perr(&format!("unknown kind `{other}`"))),
        }?;
        Ok(base.with_shift(shift))
    }
}

/// Writes the parse grammar; a non-zero shift is appended as `+shift(<s>)`.
impl fmt::Display for StepDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistKind::Gaussian { mean, variance } => write!(f, "gaussian:{mean},{variance}")?,
            DistKind::TwoPoint { a, b, p } => write!(f, "twopoint:{a},{b},{p}")?,
            DistKind::FiniteDiscrete { atoms } => {
                write!(f, "discrete:")?;
                for (i, (v, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
            }
        }
        if self.shift != 0.0 {
            write!(f, "+shift({})", self.shift)?;
        }
        Ok(())
    }
}
