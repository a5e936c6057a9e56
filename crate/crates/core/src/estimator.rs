//! Sieve maximum-likelihood fitting and profile likelihood over nuisance
//! parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{delta_from_cutpoints, CutPointMode, Model, PanelDataset, ParamLayout, ParamVector};
use crate::optim::{maximize, BfgsOptions, Termination};
use crate::poisson::{continuous_cdf_with, Convention};
use crate::spline::{baseline_mean, build_knots_with, KnotPlacement, KnotVector, SplineSpec};

/// Which nuisance blocks the profile likelihood maximizes over when cut
/// points are estimated. With known cut points both reduce to `α̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileScope {
    /// Maximize over `(α̃, δ)`.
    #[default]
    AllNuisance,
    /// Maximize over `α̃`, holding `δ` at the full-fit value.
    SplineOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub interior_knots: usize,
    pub order: usize,
    pub placement: KnotPlacement,
    pub mode: CutPointMode,
    pub convention: Convention,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// `c` in the finite-difference step `h_n = c n^{-1/2}`.
    pub h_constant: f64,
    pub profile_scope: ProfileScope,
}

impl FitConfig {
    /// Two interior knots, order 3, 1e-6 tolerances, 500 iterations, `c = 3`.
    pub fn new(mode: CutPointMode) -> Self {
        FitConfig {
            interior_knots: 2,
            order: 3,
            placement: KnotPlacement::Quantile,
            mode,
            convention: Convention::Shifted,
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            grad_tol: 1e-6,
            max_iter: 500,
            h_constant: 3.0,
            profile_scope: ProfileScope::AllNuisance,
        }
    }

    pub fn with_spline(mut self, interior_knots: usize, order: usize) -> Self {
        self.interior_knots = interior_knots;
        self.order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        positive("grad_tol", self.grad_tol)?;
        positive("h_constant", self.h_constant)?;
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.order == 0 {
            return Err(Error::Config("spline order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn bfgs_options(&self) -> BfgsOptions {
        BfgsOptions { abs_tol: self.abs_tol, rel_tol: self.rel_tol, grad_tol: self.grad_tol, max_iter: self.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
    pub cutpoints: Option<Vec<f64>>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Final packed `(β, α̃, δ)`.
    pub params: Vec<f64>,
    pub layout: ParamLayout,
    pub knots: KnotVector,
}

impl FitResult {
    /// Estimated baseline mean `Λ̂₀(t)`.
    pub fn baseline(&self, t: f64) -> Result<f64> {
        baseline_mean(&self.knots, &self.alpha, t)
    }

    /// Free parameter count used by information criteria.
    pub fn n_params(&self) -> usize {
        self.layout.len()
    }
}

/// Profile log-likelihood at one value of `β`.
#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub value: f64,
    pub params: Vec<f64>,
    pub converged: bool,
}

/// Fitting context: a model bound to its dataset plus the configuration.
#[derive(Debug, Clone)]
pub struct Estimator<'a> {
    model: Model<'a>,
    config: FitConfig,
}

impl<'a> Estimator<'a> {
    pub fn new(data: &'a PanelDataset, config: FitConfig) -> Result<Self> {
        config.validate()?;
        let spec = SplineSpec::new(config.order, config.interior_knots, data.tau())?;
        let knots = build_knots_with(&data.pooled_visit_times(), spec, config.placement)?;
        let model = Model::new(data, knots, config.mode.clone(), config.convention)?;
        Ok(Estimator { model, config })
    }

    pub fn model(&self) -> &Model<'a> {
        &self.model
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// Starting values: `β = 0`, a flat unit baseline, and (when estimated)
    /// cut points matching the empirical level frequencies at mean 1.
    pub fn initialize(&self) -> Result<ParamVector> {
        let layout = self.model.layout();
        let data = self.model.data();
        let start = (1.0 / layout.basis as f64).sqrt();
        let delta = match self.config.mode {
            CutPointMode::Known(_) => Vec::new(),
            CutPointMode::Estimated => {
                let gamma = initial_cutpoints(&data.level_frequencies(), self.config.convention)?;
                delta_from_cutpoints(&gamma)?
            }
        };
        Ok(ParamVector { beta: vec![0.0; layout.covariates], alpha_tilde: vec![start; layout.basis], delta })
    }

    pub fn fit(&self) -> Result<FitResult> {
        let start = self.initialize()?.pack();
        self.fit_from(&start)
    }

    pub fn fit_from(&self, start: &[f64]) -> Result<FitResult> {
        let out = maximize(|x| self.model.loglik_and_gradient(x), start, &self.config.bfgs_options())?;
        self.result_from(out.x, out.value, out.iterations, out.termination)
    }

    fn result_from(&self, params: Vec<f64>, loglik: f64, iterations: usize, termination: Termination) -> Result<FitResult> {
        let layout = self.model.layout();
        let pv = ParamVector::unpack(layout, &params)?;
        Ok(FitResult {
            alpha: pv.alpha(),
            cutpoints: pv.cutpoints(),
            beta: pv.beta,
            alpha_tilde: pv.alpha_tilde,
            loglik,
            iterations,
            converged: termination.converged(),
            termination,
            params,
            layout,
            knots: self.model.knots().clone(),
        })
    }

    /// Coordinates the profile maximizes over.
    pub fn nuisance_indices(&self) -> Vec<usize> {
        let layout = self.model.layout();
        let mut idx: Vec<usize> = layout.alpha_range().collect();
        if self.config.profile_scope == ProfileScope::AllNuisance {
            idx.extend(layout.delta_range());
        }
        idx
    }

    /// `max` of the log-likelihood over the nuisance parameters with `β`
    /// fixed, started from `warm` (a full packed vector whose `β` block is
    /// replaced).
    pub fn profile_nuisance(&self, beta: &[f64], warm: &[f64]) -> Result<ProfilePoint> {
        let layout = self.model.layout();
        if beta.len() != layout.covariates {
            return Err(Error::InvalidParams(format!("expected {} coefficients, got {}", layout.covariates, beta.len())));
        }
        let mut start = warm.to_vec();
        start[layout.beta_range()].copy_from_slice(beta);
        self.maximize_over(&start, &self.nuisance_indices())
    }

    /// Maximizes over the coordinates in `free`, holding the rest of `start`
    /// fixed.
    pub fn maximize_over(&self, start: &[f64], free: &[usize]) -> Result<ProfilePoint> {
        let sub0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
        let mut full = start.to_vec();
        let out = maximize(
            |sub| {
                for (&i, &v) in free.iter().zip(sub) {
                    full[i] = v;
                }
                let (f, g) = self.model.loglik_and_gradient(&full)?;
                Ok((f, free.iter().map(|&i| g[i]).collect()))
            },
            &sub0,
            &self.config.bfgs_options(),
        )?;
        let mut params = start.to_vec();
        for (&i, &v) in free.iter().zip(&out.x) {
            params[i] = v;
        }
        Ok(ProfilePoint { value: out.value, params, converged: out.converged() })
    }
}

/// Initial cut points: level `k`'s upper cut point solves
/// `F̃_1(γ_k) = cumulative frequency of levels 1..=k`, then is pushed apart
/// to keep `0 < γ₁ < γ₂ < …`.
pub fn initial_cutpoints(frequencies: &[f64], convention: Convention) -> Result<Vec<f64>> {
    const MIN_GAP: f64 = 0.05;
    const UPPER: f64 = 60.0;
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(frequencies.len().saturating_sub(1));
    let mut prev = 0.0;
    for &f in &frequencies[..frequencies.len() - 1] {
        cumulative += f;
        let target = cumulative.clamp(0.0, 1.0);
        let (mut lo, mut hi) = (-1.0f64, UPPER);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if continuous_cdf_with(mid, 1.0, convention)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let g = (0.5 * (lo + hi)).max(prev + MIN_GAP);
        out.push(g);
        prev = g;
    }
    Ok(out)
}

/// Fits with a fresh estimator; convenience for one-off use.
pub fn fit(data: &PanelDataset, config: FitConfig) -> Result<FitResult> {
    Estimator::new(data, config)?.fit()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Subject;
    use crate::poisson::{continuous_cdf, CutPoints};

    fn small_data() -> PanelDataset {
        let mut subjects = Vec::new();
        for i in 0..30 {
            let x = (i as f64 / 29.0) - 0.5;
            let y1 = if i % 3 == 0 { 2 } else { 1 };
            let y2 = if i % 4 == 0 { 3 } else { 2 };
            subjects.push(Subject::new(format!("{i}"), vec![x], vec![2.0 + (i % 5) as f64 * 0.3, 7.0], vec![y1, y2]));
        }
        PanelDataset::new(subjects, 3, Some(10.0)).unwrap()
    }

    #[test]
    fn initialization_values() {
        let d = small_data();
        let est = Estimator::new(&d, FitConfig::new(CutPointMode::Known(CutPoints::integer(&[0, 2]).unwrap()))).unwrap();
        let p = est.initialize().unwrap();
        assert_eq!(p.beta, vec![0.0]);
        assert_eq!(p.alpha_tilde.len(), 5);
        assert!(p.alpha_tilde.iter().all(|&a| (a - 0.2f64.sqrt()).abs() < 1e-15));
        assert!(p.delta.is_empty());
    }

    #[test]
    fn cutpoint_initialization_matches_frequencies() {
        let freqs = [0.718, 0.215, 0.044, 0.023];
        let g = initial_cutpoints(&freqs, Convention::Shifted).unwrap();
        assert_eq!(g.len(), 3);
        let cum = [0.718, 0.933, 0.977];
        for (gk, c) in g.iter().zip(cum) {
            assert!((continuous_cdf(*gk, 1.0).unwrap() - c).abs() < 1e-9);
        }
        assert!(g[0] > 0.0 && g.windows(2).all(|w| w[1] > w[0]));
        // the discrete Poisson(1) quantiles bracket the continuous ones
        assert!(g[0] > 0.0 && g[0] < 1.0);
        assert!(g[1] > 1.0 && g[1] < 3.0);
        assert!(g[2] > 2.0 && g[2] < 3.0);
        // empty levels still give strictly increasing cut points
        let g = initial_cutpoints(&[0.1, 0.0, 0.0, 0.9], Convention::Shifted).unwrap();
        assert!(g[0] > 0.0 && g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
    }

    #[test]
    fn estimated_initialization_is_valid() {
        let d = small_data();
        let est = Estimator::new(&d, FitConfig::new(CutPointMode::Estimated)).unwrap();
        let p = est.initialize().unwrap();
        let g = p.cutpoints().unwrap();
        assert!(CutPoints::real(&g).is_ok());
        assert!(p.alpha().iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn all_level_one_drives_baseline_to_zero() {
        let subjects: Vec<Subject> = (0..40)
            .map(|i| Subject::new(format!("{i}"), vec![(i % 7) as f64 / 7.0], vec![1.0, 4.0, 8.5], vec![1, 1, 1]))
            .collect();
        let d = PanelDataset::new(subjects, 2, Some(10.0)).unwrap();
        let cfg = FitConfig::new(CutPointMode::Known(CutPoints::integer(&[0]).unwrap()));
        let fit = fit(&d, cfg).unwrap();
        assert!(fit.baseline(10.0).unwrap() < 0.05, "{}", fit.baseline(10.0).unwrap());
    }

    #[test]
    fn profile_at_estimate_equals_maximum() {
        let d = small_data();
        let est = Estimator::new(&d, FitConfig::new(CutPointMode::Known(CutPoints::integer(&[0, 2]).unwrap()))).unwrap();
        let fit = est.fit().unwrap();
        assert!(fit.converged);
        let at = est.profile_nuisance(&fit.beta, &fit.params).unwrap();
        assert!((at.value - fit.loglik).abs() < 1e-6);
        let off = est.profile_nuisance(&[fit.beta[0] + 2.0], &fit.params).unwrap();
        assert!(off.value < fit.loglik);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::new(CutPointMode::Estimated);
        cfg.abs_tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::new(CutPointMode::Estimated);
        cfg.h_constant = -1.0;
        assert!(cfg.validate().is_err());
    }
}
