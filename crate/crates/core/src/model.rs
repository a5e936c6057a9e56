//! Ordinal panel count data, the packed parameterization, and the exact and
//! pseudo log-likelihoods with their gradients.
//!
//! The interval mean for visit `j` of subject `i` is
//! `μ_ij = exp(βᵀx_i) · Σ_l α_l [I_l(T_ij) - I_l(T_i,j-1)]` with `T_i0 = 0`.
//! I-spline increments are computed once per model and reused by every
//! likelihood evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::{level_prob, level_prob_and_slope, Convention, CutPoints, PROB_FLOOR};
use crate::spline::{ispline_values_into, KnotVector};

/// One subject's covariates, visit times and ordinal responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub covariates: Vec<f64>,
    pub visits: Vec<f64>,
    pub responses: Vec<u32>,
}

impl Subject {
    pub fn new(id: impl Into<String>, covariates: Vec<f64>, visits: Vec<f64>, responses: Vec<u32>) -> Self {
        Subject { id: id.into(), covariates, visits, responses }
    }

    pub fn visit_count(&self) -> usize {
        self.visits.len()
    }
}

/// Validated collection of subjects sharing covariate dimension and level count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    subjects: Vec<Subject>,
    covariate_dim: usize,
    levels: u32,
    tau: f64,
}

impl PanelDataset {
    /// Validates and wraps the subjects. `tau` defaults to the largest visit
    /// time.
    pub fn new(subjects: Vec<Subject>, levels: u32, tau: Option<f64>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidData("no subjects".into()));
        }
        if levels < 2 {
            return Err(Error::InvalidData(format!("need at least 2 levels, got {levels}")));
        }
        let covariate_dim = subjects[0].covariates.len();
        let mut max_time = 0.0f64;
        for s in &subjects {
            if s.covariates.len() != covariate_dim {
                return Err(Error::InvalidData(format!(
                    "subject {} has {} covariates, expected {covariate_dim}",
                    s.id,
                    s.covariates.len()
                )));
            }
            if s.covariates.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidData(format!("subject {} has a non-finite covariate", s.id)));
            }
            if s.visits.is_empty() {
                return Err(Error::InvalidData(format!("subject {} has no visits", s.id)));
            }
            if s.visits.len() != s.responses.len() {
                return Err(Error::InvalidData(format!("subject {}: visit and response counts differ", s.id)));
            }
            if !(s.visits[0] > 0.0) || s.visits.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidData(format!("subject {}: visit times must be positive and finite", s.id)));
            }
            if s.visits.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidData(format!("subject {}: visit times must be strictly increasing", s.id)));
            }
            if let Some(&r) = s.responses.iter().find(|&&r| r < 1 || r > levels) {
                return Err(Error::ResponseOutOfRange { subject: s.id.clone(), response: r, levels });
            }
            max_time = max_time.max(*s.visits.last().unwrap());
        }
        let tau = match tau {
            Some(t) if t >= max_time && t.is_finite() => t,
            Some(t) => {
                return Err(Error::InvalidData(format!("tau {t} is smaller than the last visit {max_time}")));
            }
            None => max_time,
        };
        Ok(PanelDataset { subjects, covariate_dim, levels, tau })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Total number of visits.
    pub fn n_obs(&self) -> usize {
        self.subjects.iter().map(Subject::visit_count).sum()
    }

    pub fn pooled_visit_times(&self) -> Vec<f64> {
        self.subjects.iter().flat_map(|s| s.visits.iter().copied()).collect()
    }

    /// Empirical frequency of each level `1..=K`.
    pub fn level_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.levels as usize];
        for s in &self.subjects {
            for &r in &s.responses {
                counts[r as usize - 1] += 1;
            }
        }
        let total = self.n_obs() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    /// Same dataset with subjects in a different order.
    pub fn reordered(&self, order: &[usize]) -> Self {
        PanelDataset {
            subjects: order.iter().map(|&i| self.subjects[i].clone()).collect(),
            ..self.clone()
        }
    }
}

/// Whether cut points are fixed or estimated alongside `(β, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutPointMode {
    Known(CutPoints),
    Estimated,
}

/// Sizes of the blocks in the packed parameter vector `(β, α̃, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub covariates: usize,
    pub basis: usize,
    pub cuts: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        self.covariates + self.basis + self.cuts
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn beta_range(&self) -> std::ops::Range<usize> {
        0..self.covariates
    }

    pub fn alpha_range(&self) -> std::ops::Range<usize> {
        self.covariates..self.covariates + self.basis
    }

    pub fn delta_range(&self) -> std::ops::Range<usize> {
        self.covariates + self.basis..self.len()
    }
}

/// Unconstrained parameters: `α = α̃²`, and cut points from log-increments
/// `γ₁ = exp(δ₁)`, `γ_k = γ_{k-1} + exp(δ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub beta: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ParamVector {
    pub fn layout(&self) -> ParamLayout {
        ParamLayout { covariates: self.beta.len(), basis: self.alpha_tilde.len(), cuts: self.delta.len() }
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().len());
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.alpha_tilde);
        v.extend_from_slice(&self.delta);
        v
    }

    pub fn unpack(layout: ParamLayout, packed: &[f64]) -> Result<Self> {
        if packed.len() != layout.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} packed parameters, got {}",
                layout.len(),
                packed.len()
            )));
        }
        Ok(ParamVector {
            beta: packed[layout.beta_range()].to_vec(),
            alpha_tilde: packed[layout.alpha_range()].to_vec(),
            delta: packed[layout.delta_range()].to_vec(),
        })
    }

    /// Nonnegative spline coefficients.
    pub fn alpha(&self) -> Vec<f64> {
        self.alpha_tilde.iter().map(|a| a * a).collect()
    }

    /// Cut points implied by `δ`, or `None` when no cut points are packed.
    pub fn cutpoints(&self) -> Option<Vec<f64>> {
        (!self.delta.is_empty()).then(|| cutpoints_from_delta(&self.delta))
    }
}

pub fn cutpoints_from_delta(delta: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    delta
        .iter()
        .map(|d| {
            acc += d.exp();
            acc
        })
        .collect()
}

/// Inverse of [`cutpoints_from_delta`]; requires `0 < γ₁ < γ₂ < …`.
pub fn delta_from_cutpoints(gamma: &[f64]) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    gamma
        .iter()
        .map(|&g| {
            let inc = g - prev;
            if !(inc > 0.0) {
                return Err(Error::InvalidCutPoints(format!(
                    "cut points must be positive and strictly increasing for estimation, got {gamma:?}"
                )));
            }
            prev = g;
            Ok(inc.ln())
        })
        .collect()
}

/// Likelihood evaluator bound to one dataset and knot vector.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    data: &'a PanelDataset,
    knots: KnotVector,
    mode: CutPointMode,
    convention: Convention,
    layout: ParamLayout,
    /// Per-visit I-spline increments, `basis` values per visit, flattened.
    increments: Vec<f64>,
    /// Offset of each subject's first visit in `increments / basis`.
    offsets: Vec<usize>,
}

impl<'a> Model<'a> {
    pub fn new(data: &'a PanelDataset, knots: KnotVector, mode: CutPointMode, convention: Convention) -> Result<Self> {
        if knots.tau() < data.tau() {
            return Err(Error::InvalidSpline(format!(
                "spline domain ends at {} before the last visit {}",
                knots.tau(),
                data.tau()
            )));
        }
        if let CutPointMode::Known(cuts) = &mode {
            if cuts.levels() != data.levels() as usize {
                return Err(Error::InvalidCutPoints(format!(
                    "{} cut points give {} levels but the data have {}",
                    cuts.values().len(),
                    cuts.levels(),
                    data.levels()
                )));
            }
            if !cuts.is_integer_valued() {
                return Err(Error::InvalidCutPoints("known cut points must be integers".into()));
            }
        }
        let basis = knots.dim();
        let layout = ParamLayout {
            covariates: data.covariate_dim(),
            basis,
            cuts: match mode {
                CutPointMode::Known(_) => 0,
                CutPointMode::Estimated => data.levels() as usize - 1,
            },
        };
        let mut increments = Vec::with_capacity(data.n_obs() * basis);
        let mut offsets = Vec::with_capacity(data.n_subjects() + 1);
        let mut prev = vec![0.0; basis];
        let mut cur = vec![0.0; basis];
        let mut offset = 0;
        for s in data.subjects() {
            offsets.push(offset);
            prev.iter_mut().for_each(|v| *v = 0.0);
            for &t in &s.visits {
                ispline_values_into(&knots, t, &mut cur)?;
                increments.extend(cur.iter().zip(&prev).map(|(c, p)| c - p));
                std::mem::swap(&mut prev, &mut cur);
            }
            offset += s.visit_count();
        }
        offsets.push(offset);
        Ok(Model { data, knots, mode, convention, layout, increments, offsets })
    }

    pub fn data(&self) -> &'a PanelDataset {
        self.data
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn mode(&self) -> &CutPointMode {
        &self.mode
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    fn visit_increments(&self, subject: usize, visit: usize) -> &[f64] {
        let l = self.layout.basis;
        let row = self.offsets[subject] + visit;
        &self.increments[row * l..(row + 1) * l]
    }

    fn check(&self, packed: &[f64]) -> Result<()> {
        if packed.len() != self.layout.len() {
            return Err(Error::InvalidParams(format!(
                "expected {} packed parameters, got {}",
                self.layout.len(),
                packed.len()
            )));
        }
        Ok(())
    }

    /// Cut points in effect for `packed`.
    pub fn cutpoints(&self, packed: &[f64]) -> Result<CutPoints> {
        match &self.mode {
            CutPointMode::Known(c) => Ok(c.clone()),
            CutPointMode::Estimated => CutPoints::real(&cutpoints_from_delta(&packed[self.layout.delta_range()])),
        }
    }

    fn level_convention(&self) -> Convention {
        match self.mode {
            // exact Poisson CDF
            CutPointMode::Known(_) => Convention::Shifted,
            CutPointMode::Estimated => self.convention,
        }
    }

    /// `μ_ij` for subject `subject` and 0-based visit index `visit`.
    pub fn interval_mean(&self, params: &ParamVector, subject: usize, visit: usize) -> Result<f64> {
        let s = self
            .data
            .subjects()
            .get(subject)
            .ok_or_else(|| Error::InvalidParams(format!("subject index {subject} out of range")))?;
        if visit >= s.visit_count() {
            return Err(Error::InvalidParams(format!("visit index {visit} out of range")));
        }
        self.check(&params.pack())?;
        let scale = linear_predictor(&params.beta, &s.covariates).exp();
        let inc = self.visit_increments(subject, visit);
        Ok(scale * inc.iter().zip(&params.alpha_tilde).map(|(d, a)| d * a * a).sum::<f64>())
    }

    /// All interval means, flattened in subject/visit order.
    fn means(&self, packed: &[f64]) -> Vec<f64> {
        let beta = &packed[self.layout.beta_range()];
        let at = &packed[self.layout.alpha_range()];
        let alpha: Vec<f64> = at.iter().map(|a| a * a).collect();
        let mut out = Vec::with_capacity(self.increments.len() / self.layout.basis.max(1));
        for (i, s) in self.data.subjects().iter().enumerate() {
            let scale = linear_predictor(beta, &s.covariates).exp();
            for j in 0..s.visit_count() {
                let inc = self.visit_increments(i, j);
                out.push(scale * inc.iter().zip(&alpha).map(|(d, a)| d * a).sum::<f64>());
            }
        }
        out
    }

    /// Per-subject log-likelihood contributions from precomputed means.
    fn subject_terms_from_means(&self, means: &[f64], cuts: &CutPoints, out: &mut [f64]) {
        let conv = self.level_convention();
        for (i, s) in self.data.subjects().iter().enumerate() {
            let base = self.offsets[i];
            out[i] = s
                .responses
                .iter()
                .enumerate()
                .map(|(j, &y)| {
                    let (lo, hi) = cuts.bounds(y as usize);
                    level_prob(lo, hi, means[base + j], conv).max(PROB_FLOOR).ln()
                })
                .sum();
        }
    }

    /// Per-subject log-likelihood contributions.
    pub fn subject_logliks(&self, packed: &[f64]) -> Result<Vec<f64>> {
        self.check(packed)?;
        let cuts = self.cutpoints(packed)?;
        let means = self.means(packed);
        let mut out = vec![0.0; self.data.n_subjects()];
        self.subject_terms_from_means(&means, &cuts, &mut out);
        Ok(out)
    }

    /// Log-likelihood: exact when cut points are known, pseudo otherwise.
    pub fn loglik(&self, packed: &[f64]) -> Result<f64> {
        Ok(self.subject_logliks(packed)?.iter().sum())
    }

    /// Log-likelihood and its gradient in packed coordinates.
    ///
    /// `β` and `α̃` components are analytic; `δ` components use central
    /// differences with the interval means held fixed.
    pub fn loglik_and_gradient(&self, packed: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(packed)?;
        let layout = self.layout;
        let cuts = self.cutpoints(packed)?;
        let conv = self.level_convention();
        let beta = &packed[layout.beta_range()];
        let at = &packed[layout.alpha_range()];
        let alpha: Vec<f64> = at.iter().map(|a| a * a).collect();

        let mut grad = vec![0.0; layout.len()];
        let mut total = 0.0;
        let mut means = Vec::with_capacity(self.data.n_obs());
        let mut subject_alpha = vec![0.0; layout.basis];
        for (i, s) in self.data.subjects().iter().enumerate() {
            let scale = linear_predictor(beta, &s.covariates).exp();
            // Σ_j g_ij μ_ij and Σ_j g_ij ΔI_ij for this subject
            let mut beta_weight = 0.0;
            subject_alpha.iter_mut().for_each(|v| *v = 0.0);
            for (j, &y) in s.responses.iter().enumerate() {
                let inc = self.visit_increments(i, j);
                let mu = scale * inc.iter().zip(&alpha).map(|(d, a)| d * a).sum::<f64>();
                means.push(mu);
                let (lo, hi) = cuts.bounds(y as usize);
                let (prob, slope) = level_prob_and_slope(lo, hi, mu, conv);
                if prob < PROB_FLOOR {
                    total += PROB_FLOOR.ln();
                    continue;
                }
                total += prob.ln();
                let g = slope / prob;
                beta_weight += g * mu;
                for (acc, d) in subject_alpha.iter_mut().zip(inc) {
                    *acc += g * d;
                }
            }
            for (gc, x) in grad[layout.beta_range()].iter_mut().zip(&s.covariates) {
                *gc += beta_weight * x;
            }
            for (l, gc) in grad[layout.alpha_range()].iter_mut().enumerate() {
                *gc += subject_alpha[l] * scale * 2.0 * at[l];
            }
        }

        if layout.cuts > 0 {
            let delta = packed[layout.delta_range()].to_vec();
            let mut terms = vec![0.0; self.data.n_subjects()];
            for c in 0..layout.cuts {
                let h = 1e-6 * delta[c].abs().max(1.0);
                let mut shifted = delta.clone();
                shifted[c] = delta[c] + h;
                let up = CutPoints::real(&cutpoints_from_delta(&shifted))?;
                self.subject_terms_from_means(&means, &up, &mut terms);
                let f_up: f64 = terms.iter().sum();
                shifted[c] = delta[c] - h;
                let down = CutPoints::real(&cutpoints_from_delta(&shifted))?;
                self.subject_terms_from_means(&means, &down, &mut terms);
                let f_down: f64 = terms.iter().sum();
                grad[layout.delta_range().start + c] = (f_up - f_down) / (2.0 * h);
            }
        }
        Ok((total, grad))
    }

    /// Gradient only; fails when the likelihood or gradient is not finite.
    pub fn gradient(&self, packed: &[f64]) -> Result<Vec<f64>> {
        let (value, grad) = self.loglik_and_gradient(packed)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteObjective);
        }
        Ok(grad)
    }
}

#[inline]
pub(crate) fn linear_predictor(beta: &[f64], x: &[f64]) -> f64 {
    beta.iter().zip(x).map(|(b, x)| b * x).sum()
}

/// Exact log-likelihood at fixed integer cut points.
pub fn loglik_known(model_knots: &KnotVector, cuts: &CutPoints, params: &ParamVector, data: &PanelDataset) -> Result<f64> {
    let model = Model::new(data, model_knots.clone(), CutPointMode::Known(cuts.clone()), Convention::Shifted)?;
    if !params.delta.is_empty() {
        return Err(Error::InvalidParams("known cut points take no δ parameters".into()));
    }
    model.loglik(&params.pack())
}

/// Pseudo log-likelihood using the continuous Poisson extension; the cut
/// points come from `params.delta`.
pub fn pseudo_loglik(
    model_knots: &KnotVector,
    params: &ParamVector,
    data: &PanelDataset,
    convention: Convention,
) -> Result<f64> {
    let model = Model::new(data, model_knots.clone(), CutPointMode::Estimated, convention)?;
    model.loglik(&params.pack())
}
