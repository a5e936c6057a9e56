//! Poisson and continuous-Poisson distribution functions, ordinal interval
//! probabilities between cut points, and their slopes in the mean.
//!
//! The continuous extension is `F̃_λ(x) = Q(x + 1, λ)` for `x > -1` and 0
//! otherwise, so it coincides with the Poisson CDF at every nonnegative
//! integer. [`Convention::Literal`] switches to the unshifted `Q(x, λ)` form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{ln_gamma, regularized_gamma};

/// Floor applied to level probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Lower sentinel cut point `γ₀`.
pub const GAMMA_LOWER: f64 = -1.0;

/// Which continuous extension of the Poisson CDF to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `Q(x + 1, λ)`: agrees with the Poisson CDF at integers.
    #[default]
    Shifted,
    /// `Q(x, λ)`: agrees with the Poisson CDF at `x - 1`.
    Literal,
}

impl Convention {
    /// Gamma shape for a cut point, or `None` when the CDF is identically 0.
    #[inline]
    fn shape(self, x: f64) -> Option<f64> {
        let a = match self {
            Convention::Shifted => x + 1.0,
            Convention::Literal => x,
        };
        (a > 0.0).then_some(a)
    }
}

/// Interior cut points `γ₁ < … < γ_{K-1}`; `γ₀ = -1` and `γ_K = ∞` are implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPoints {
    values: Vec<f64>,
    integer_valued: bool,
}

impl CutPoints {
    /// Known integer cut points.
    pub fn integer(values: &[i64]) -> Result<Self> {
        let values: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        Self::validate(&values)?;
        Ok(CutPoints { values, integer_valued: true })
    }

    /// Real-valued (estimated) cut points.
    pub fn real(values: &[f64]) -> Result<Self> {
        Self::validate(values)?;
        let integer_valued = values.iter().all(|v| v.fract() == 0.0);
        Ok(CutPoints { values: values.to_vec(), integer_valued })
    }

    fn validate(values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InvalidCutPoints("need at least one cut point (K >= 2)".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCutPoints(format!("non-finite cut point in {values:?}")));
        }
        if !(values[0] > GAMMA_LOWER) {
            return Err(Error::InvalidCutPoints(format!("first cut point must exceed -1, got {}", values[0])));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidCutPoints(format!("cut points must be strictly increasing: {values:?}")));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_integer_valued(&self) -> bool {
        self.integer_valued
    }

    /// Number of ordinal levels `K`.
    pub fn levels(&self) -> usize {
        self.values.len() + 1
    }

    /// `(γ_{k-1}, γ_k)` for 1-based level `k`, with the sentinels filled in.
    pub fn bounds(&self, level: usize) -> (f64, f64) {
        debug_assert!(level >= 1 && level <= self.levels());
        let lo = if level == 1 { GAMMA_LOWER } else { self.values[level - 2] };
        let hi = if level == self.levels() { f64::INFINITY } else { self.values[level - 1] };
        (lo, hi)
    }

    /// Codes a latent count into its 1-based ordinal level.
    pub fn level_of(&self, count: u64) -> usize {
        1 + self.values.iter().filter(|&&g| count as f64 > g).count()
    }
}

/// `Pr(N ≤ k)` for `N ~ Poisson(λ)`; 0 for `k < 0`.
pub fn poisson_cdf(k: i64, lambda: f64) -> Result<f64> {
    check_mean(lambda)?;
    if k < 0 {
        return Ok(0.0);
    }
    Ok(regularized_gamma(k as f64 + 1.0, lambda).1)
}

/// Continuous extension `Q(x + 1, λ)` of the Poisson CDF.
pub fn continuous_cdf(x: f64, lambda: f64) -> Result<f64> {
    continuous_cdf_with(x, lambda, Convention::Shifted)
}

pub fn continuous_cdf_with(x: f64, lambda: f64, convention: Convention) -> Result<f64> {
    check_mean(lambda)?;
    Ok(cdf_pair(x, lambda, convention).1)
}

/// `∂F̃_λ(x)/∂λ = -e^{-λ} λ^x / Γ(x + 1)`.
pub fn dcontinuous_cdf_dlambda(x: f64, lambda: f64) -> Result<f64> {
    dcontinuous_cdf_dlambda_with(x, lambda, Convention::Shifted)
}

pub fn dcontinuous_cdf_dlambda_with(x: f64, lambda: f64, convention: Convention) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveMean(lambda));
    }
    Ok(cdf_slope(x, lambda, convention))
}

/// Probability that the count falls in `(lo, hi]`.
///
/// `continuous = false` uses the Poisson CDF, which requires integer bounds
/// (or the sentinels); `continuous = true` uses the shifted extension. No floor
/// is applied here.
pub fn interval_prob(lo: f64, hi: f64, lambda: f64, continuous: bool) -> Result<f64> {
    check_mean(lambda)?;
    if !(lo < hi) {
        return Err(Error::EmptyInterval { lo, hi });
    }
    if !continuous {
        let integral = |v: f64| v.is_infinite() || v.fract() == 0.0;
        if !integral(lo) || !integral(hi) {
            return Err(Error::InvalidCutPoints(format!(
                "exact Poisson probabilities need integer cut points, got ({lo}, {hi}]"
            )));
        }
    }
    Ok(level_prob(lo, hi, lambda, Convention::Shifted))
}

/// `(P, Q)` pair for the CDF at `x`: `Q` is the CDF, `P = 1 - Q` its complement.
#[inline]
fn cdf_pair(x: f64, lambda: f64, convention: Convention) -> (f64, f64) {
    if x == f64::INFINITY {
        return (0.0, 1.0);
    }
    match convention.shape(x) {
        None => (1.0, 0.0),
        Some(a) => regularized_gamma(a, lambda),
    }
}

/// `∂F̃_λ(x)/∂λ`, including the `λ = 0` limit.
#[inline]
fn cdf_slope(x: f64, lambda: f64, convention: Convention) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    let Some(a) = convention.shape(x) else {
        return 0.0;
    };
    // -λ^{a-1} e^{-λ} / Γ(a)
    let power = a - 1.0;
    if lambda == 0.0 {
        return if power == 0.0 {
            -1.0
        } else if power > 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    -(power * lambda.ln() - lambda - ln_gamma(a)).exp()
}

/// `F̃(hi) - F̃(lo)`, choosing the complement form when both CDF values are
/// close to 1 so that small upper-tail probabilities are not lost.
#[inline]
pub(crate) fn level_prob(lo: f64, hi: f64, lambda: f64, convention: Convention) -> f64 {
    let (p_lo, q_lo) = cdf_pair(lo, lambda, convention);
    let (p_hi, q_hi) = cdf_pair(hi, lambda, convention);
    let prob = if q_lo > 0.5 { p_lo - p_hi } else { q_hi - q_lo };
    prob.max(0.0)
}

/// Level probability and its derivative in `λ`.
#[inline]
pub(crate) fn level_prob_and_slope(lo: f64, hi: f64, lambda: f64, convention: Convention) -> (f64, f64) {
    let prob = level_prob(lo, hi, lambda, convention);
    let slope = cdf_slope(hi, lambda, convention) - cdf_slope(lo, lambda, convention);
    (prob, slope)
}

fn check_mean(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::NegativeMean(lambda));
    }
    Ok(())
}
