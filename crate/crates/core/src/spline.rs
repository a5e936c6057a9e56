//! Monotone I-spline basis for the baseline cumulative intensity.
//!
//! "Order" follows Ramsay's convention: order `l` M-splines are piecewise
//! polynomials of degree `l - 1`, so the I-splines (their running integrals)
//! have degree `l`. With `m` interior knots the basis has `m + l` functions.
//!
//! Evaluation uses the identity `I_i(t) = Σ_{j > i} B_j(t)`, where `B_j` are the
//! order `l + 1` B-splines on the knot vector with one extra boundary repeat at
//! each end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spline order, interior knot count and domain end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub order: usize,
    pub interior: usize,
    pub tau: f64,
}

impl SplineSpec {
    pub fn new(order: usize, interior: usize, tau: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidSpline(format!("order must be >= 1, got {order}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidSpline(format!("domain end must be positive, got {tau}")));
        }
        Ok(SplineSpec { order, interior, tau })
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.interior + self.order
    }
}

/// Where interior knots go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnotPlacement {
    /// Empirical quantiles of the pooled visit times.
    #[default]
    Quantile,
    /// Equally spaced on (0, τ).
    Equal,
}

/// Knot sequence with `order`-fold repeats at 0 and τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    order: usize,
    tau: f64,
}

impl KnotVector {
    /// Builds knots from explicit interior positions.
    pub fn from_interior(spec: SplineSpec, interior: &[f64]) -> Result<Self> {
        if interior.len() != spec.interior {
            return Err(Error::InvalidSpline(format!(
                "expected {} interior knots, got {}",
                spec.interior,
                interior.len()
            )));
        }
        let mut prev = 0.0;
        for &k in interior {
            if !(k > prev) || !(k < spec.tau) {
                return Err(Error::InvalidSpline(format!(
                    "interior knots must be strictly increasing inside (0, {}), got {interior:?}",
                    spec.tau
                )));
            }
            prev = k;
        }
        let mut knots = Vec::with_capacity(spec.interior + 2 * spec.order);
        knots.extend(std::iter::repeat_n(0.0, spec.order));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(spec.tau, spec.order));
        Ok(KnotVector { knots, order: spec.order, tau: spec.tau })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interior(&self) -> &[f64] {
        &self.knots[self.order..self.knots.len() - self.order]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn spec(&self) -> SplineSpec {
        SplineSpec { order: self.order, interior: self.interior().len(), tau: self.tau }
    }
}

/// Places interior knots at the empirical quantiles `j / (m + 1)` of the
/// pooled visit times.
pub fn build_knots(visit_times: &[f64], spec: SplineSpec) -> Result<KnotVector> {
    build_knots_with(visit_times, spec, KnotPlacement::Quantile)
}

pub fn build_knots_with(
    visit_times: &[f64],
    spec: SplineSpec,
    placement: KnotPlacement,
) -> Result<KnotVector> {
    if visit_times.is_empty() {
        return Err(Error::InvalidSpline("no visit times to place knots".into()));
    }
    if let Some(&t) = visit_times.iter().find(|&&t| !(t > 0.0 && t <= spec.tau)) {
        return Err(Error::TimeOutOfDomain { t, tau: spec.tau });
    }
    let m = spec.interior;
    let mut interior: Vec<f64> = match placement {
        KnotPlacement::Equal => (1..=m).map(|j| spec.tau * j as f64 / (m + 1) as f64).collect(),
        KnotPlacement::Quantile => {
            let mut sorted = visit_times.to_vec();
            sorted.sort_by(f64::total_cmp);
            (1..=m).map(|j| quantile_sorted(&sorted, j as f64 / (m + 1) as f64)).collect()
        }
    };
    separate_ties(&mut interior, spec.tau)?;
    KnotVector::from_interior(spec, &interior)
}

/// Linear-interpolation quantile (type 7) of sorted data.
fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Nudges coincident knots apart so the interior sequence is strictly
/// increasing and stays inside (0, τ).
fn separate_ties(knots: &mut [f64], tau: f64) -> Result<()> {
    if knots.is_empty() {
        return Ok(());
    }
    let m = knots.len();
    // spacing small relative to the gaps available in the domain
    let eps = tau * 1e-6;
    for k in knots.iter_mut() {
        *k = k.clamp(eps, tau - eps);
    }
    for i in 1..m {
        if knots[i] <= knots[i - 1] {
            knots[i] = knots[i - 1] + eps;
        }
    }
    // pull back from τ if the forward sweep overshot
    if knots[m - 1] >= tau {
        knots[m - 1] = tau - eps;
        for i in (0..m - 1).rev() {
            if knots[i] >= knots[i + 1] {
                knots[i] = knots[i + 1] - eps;
            }
        }
    }
    if knots[0] <= 0.0 {
        return Err(Error::InvalidSpline("too many interior knots for the domain".into()));
    }
    Ok(())
}

/// B-spline values of order `k` on `knots` at `t`, all `knots.len() - k` of
/// them (Cox-de Boor). `t == knots.last()` belongs to the last nonempty span.
fn bspline_values(knots: &[f64], k: usize, t: f64, out: &mut [f64]) {
    let nb = knots.len() - k;
    debug_assert_eq!(out.len(), nb);
    out.iter_mut().for_each(|v| *v = 0.0);

    // span s with knots[s] <= t < knots[s+1], restricted to the valid range
    let last = knots.len() - k; // first index of the right boundary block
    let mut s = k - 1;
    while s + 1 < last && knots[s + 1] <= t {
        s += 1;
    }

    // local triangular evaluation over the k nonzero functions
    let mut local = [0.0f64; 32];
    let mut left = [0.0f64; 32];
    let mut right = [0.0f64; 32];
    assert!(k <= 32, "spline order too large");
    local[0] = 1.0;
    for j in 1..k {
        left[j] = t - knots[s + 1 - j];
        right[j] = knots[s + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { local[r] / denom } else { 0.0 };
            local[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        local[j] = saved;
    }
    for r in 0..k {
        out[s + 1 - k + r] = local[r];
    }
}

/// Evaluates the I-spline basis at `t`.
pub fn ispline_values(kv: &KnotVector, t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; kv.dim()];
    ispline_values_into(kv, t, &mut out)?;
    Ok(out)
}

/// Writes the I-spline basis at `t` into `out` (length `kv.dim()`).
pub fn ispline_values_into(kv: &KnotVector, t: f64, out: &mut [f64]) -> Result<()> {
    if !(t >= 0.0 && t <= kv.tau) {
        return Err(Error::TimeOutOfDomain { t, tau: kv.tau });
    }
    let l = kv.order;
    let dim = kv.dim();
    // one extra boundary repeat on each side, order l+1
    let mut aug = Vec::with_capacity(kv.knots.len() + 2);
    aug.push(0.0);
    aug.extend_from_slice(&kv.knots);
    aug.push(kv.tau);
    let mut b = vec![0.0; dim + 1];
    bspline_values(&aug, l + 1, t, &mut b);
    let mut tail = 0.0;
    for i in (0..dim).rev() {
        tail += b[i + 1];
        out[i] = tail.clamp(0.0, 1.0);
    }
    Ok(())
}

/// `Λ₀(t) = Σ α_i I_i(t)` for nonnegative coefficients.
pub fn baseline_mean(kv: &KnotVector, coeffs: &[f64], t: f64) -> Result<f64> {
    if coeffs.len() != kv.dim() {
        return Err(Error::InvalidSpline(format!(
            "expected {} coefficients, got {}",
            kv.dim(),
            coeffs.len()
        )));
    }
    if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, &a)| !(a >= 0.0)) {
        return Err(Error::NegativeCoefficient { index, value });
    }
    let basis = ispline_values(kv, t)?;
    Ok(basis.iter().zip(coeffs).map(|(b, a)| b * a).sum())
}
