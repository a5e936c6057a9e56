//! Sandwich covariance from numerical profile-likelihood derivatives,
//! pointwise variance of the baseline estimate, Wald summaries, and
//! information-criterion model selection.
//!
//! Derivatives use forward differences with step `h_n = c / sqrt(n)`:
//! first differences of per-subject contributions for the score outer
//! product, and `[f(ξ) - f(ξ+h e_i) - f(ξ+h e_j) + f(ξ+h e_i+h e_j)] / h²` for
//! the curvature.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{Estimator, FitConfig, FitResult, ProfileScope};
use crate::model::{CutPointMode, PanelDataset};
use crate::spline::ispline_values;

/// Normal quantile used for 95% intervals.
pub const Z_975: f64 = 1.96;

/// Curvature matrices with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichResult {
    pub covariance: Vec<Vec<f64>>,
    /// Second-difference matrix of the (profile) log-likelihood.
    pub curvature: Vec<Vec<f64>>,
    /// `Σ_i D pl_i D pl_iᵀ`.
    pub score_outer: Vec<Vec<f64>>,
    pub step: f64,
    pub condition: f64,
    /// Every inner profile maximization converged.
    pub profiles_converged: bool,
}

/// Perturbation step `h_n = c n^{-1/2}`.
pub fn perturbation_step(config: &FitConfig, n_subjects: usize) -> f64 {
    config.h_constant / (n_subjects as f64).sqrt()
}

/// Per-subject log-likelihood at a stencil point, plus whether the inner
/// maximization converged.
type StencilEval = (Vec<f64>, bool);

/// Assembles the sandwich from a stencil evaluator over `dim` coordinates.
fn numerical_sandwich<F>(dim: usize, step: f64, base: Vec<f64>, eval: F) -> Result<SandwichResult>
where
    F: Fn(&[f64]) -> Result<StencilEval> + Sync,
{
    // stencil offsets: e_i, then e_i + e_j for i <= j
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    for i in 0..dim {
        let mut o = vec![0.0; dim];
        o[i] = step;
        offsets.push(o);
    }
    let mut pairs = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let mut o = vec![0.0; dim];
            o[i] += step;
            o[j] += step;
            offsets.push(o);
            pairs.push((i, j));
        }
    }
    let evals: Vec<StencilEval> = offsets.par_iter().map(|o| eval(o)).collect::<Result<_>>()?;
    let profiles_converged = evals.iter().all(|e| e.1);
    let total = |v: &[f64]| v.iter().sum::<f64>();
    let f0 = total(&base);
    let single: Vec<f64> = evals[..dim].iter().map(|e| total(&e.0)).collect();

    let mut curvature = DMatrix::<f64>::zeros(dim, dim);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let fij = total(&evals[dim + k].0);
        let v = (f0 - single[i] - single[j] + fij) / (step * step);
        curvature[(i, j)] = v;
        curvature[(j, i)] = v;
    }

    let mut outer = DMatrix::<f64>::zeros(dim, dim);
    let mut score = vec![0.0; dim];
    for (s, b) in base.iter().enumerate() {
        for (sc, e) in score.iter_mut().zip(&evals[..dim]) {
            *sc = (e.0[s] - b) / step;
        }
        for i in 0..dim {
            for j in 0..dim {
                outer[(i, j)] += score[i] * score[j];
            }
        }
    }

    let sv = curvature.clone().svd(false, false).singular_values;
    let max_sv = sv.max();
    let min_sv = sv.min();
    let condition = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCurvature { condition });
    }
    let inv = curvature.clone().try_inverse().ok_or(Error::SingularCurvature { condition })?;
    let mut cov = &inv * &outer * &inv;
    // exact symmetry
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] = cov[(i, i)].max(0.0);
    }
    let to_rows = |m: &DMatrix<f64>| (0..dim).map(|i| (0..dim).map(|j| m[(i, j)]).collect()).collect();
    Ok(SandwichResult {
        covariance: to_rows(&cov),
        curvature: to_rows(&curvature),
        score_outer: to_rows(&outer),
        step,
        condition,
        profiles_converged,
    })
}

/// Sandwich covariance of `β̂` from the profile log-likelihood.
pub fn sandwich_cov(est: &Estimator<'_>, fit: &FitResult) -> Result<SandwichResult> {
    let model = est.model();
    let data = model.data();
    let p = fit.beta.len();
    let step = perturbation_step(est.config(), data.n_subjects());
    let base = model.subject_logliks(&fit.params)?;
    numerical_sandwich(p, step, base, |offset| {
        let beta: Vec<f64> = fit.beta.iter().zip(offset).map(|(b, o)| b + o).collect();
        let prof = est.profile_nuisance(&beta, &fit.params)?;
        Ok((model.subject_logliks(&prof.params)?, prof.converged))
    })
}

/// Variances of the spline coefficients `α̂_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCoefVariance {
    /// `Var(α̂_l) ≈ 4 α̃_l² Var(α̃_l)`.
    pub alpha_var: Vec<f64>,
    /// Covariance block of `α̃` from the joint `(β, α̃)` sandwich.
    pub alpha_tilde_cov: Vec<Vec<f64>>,
    pub condition: f64,
}

/// Joint sandwich over `(β, α̃)` (cut points profiled out when estimated),
/// reduced to the `α` variances by the delta method.
pub fn spline_coef_variances(est: &Estimator<'_>, fit: &FitResult) -> Result<SplineCoefVariance> {
    let model = est.model();
    let layout = fit.layout;
    let dim = layout.covariates + layout.basis;
    let step = perturbation_step(est.config(), model.data().n_subjects());
    let base = model.subject_logliks(&fit.params)?;
    let profile_cuts =
        matches!(model.mode(), CutPointMode::Estimated) && est.config().profile_scope == ProfileScope::AllNuisance;
    let cut_idx: Vec<usize> = layout.delta_range().collect();
    let sw = numerical_sandwich(dim, step, base, |offset| {
        let mut params = fit.params.clone();
        for (v, o) in params[..dim].iter_mut().zip(offset) {
            *v += o;
        }
        if profile_cuts {
            let prof = est.maximize_over(&params, &cut_idx)?;
            Ok((model.subject_logliks(&prof.params)?, prof.converged))
        } else {
            Ok((model.subject_logliks(&params)?, true))
        }
    })?;
    let a0 = layout.covariates;
    let alpha_tilde_cov: Vec<Vec<f64>> =
        (0..layout.basis).map(|i| (0..layout.basis).map(|j| sw.covariance[a0 + i][a0 + j]).collect()).collect();
    let alpha_var = fit
        .alpha_tilde
        .iter()
        .enumerate()
        .map(|(l, at)| 4.0 * at * at * alpha_tilde_cov[l][l])
        .collect();
    Ok(SplineCoefVariance { alpha_var, alpha_tilde_cov, condition: sw.condition })
}

/// `Var(Λ̂₀(t)) = Σ_l I_l(t)² Var(α̂_l)`.
pub fn lambda_variance(fit: &FitResult, alpha_var: &SplineCoefVariance, t: f64) -> Result<f64> {
    let basis = ispline_values(&fit.knots, t)?;
    Ok(basis.iter().zip(&alpha_var.alpha_var).map(|(b, v)| b * b * v).sum::<f64>().max(0.0))
}

/// Full delta-method variance `gᵀ Σ_α̃ g` with `g_l = 2 α̃_l I_l(t)`, which
/// keeps the covariances that [`lambda_variance`] drops.
pub fn lambda_variance_full(fit: &FitResult, alpha_var: &SplineCoefVariance, t: f64) -> Result<f64> {
    let basis = ispline_values(&fit.knots, t)?;
    let g: Vec<f64> = basis.iter().zip(&fit.alpha_tilde).map(|(b, a)| 2.0 * a * b).collect();
    let mut v = 0.0;
    for (i, gi) in g.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            v += gi * alpha_var.alpha_tilde_cov[i][j] * gj;
        }
    }
    Ok(v.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided normal p-value for `z`.
pub fn normal_p_value(z: f64) -> f64 {
    let normal = Normal::standard();
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Estimate, SE, 95% CI and Wald p-value per coefficient.
pub fn wald_summary(beta: &[f64], covariance: &[Vec<f64>]) -> Vec<CoefRow> {
    beta.iter()
        .enumerate()
        .map(|(j, &b)| {
            let se = covariance[j][j].max(0.0).sqrt();
            let z = b / se;
            CoefRow {
                estimate: b,
                se,
                ci_low: b - Z_975 * se,
                ci_high: b + Z_975 * se,
                z,
                p_value: if z.is_nan() { f64::NAN } else { normal_p_value(z) },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub loglik: f64,
    pub n_params: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
}

/// AIC and BIC with `q` counting `β`, spline coefficients and any estimated
/// cut points, and `N` the total visit count.
pub fn aic_bic(fit: &FitResult, data: &PanelDataset) -> InfoCriteria {
    info_criteria(fit.loglik, fit.n_params(), data.n_obs())
}

pub fn info_criteria(loglik: f64, n_params: usize, n_obs: usize) -> InfoCriteria {
    let q = n_params as f64;
    InfoCriteria {
        loglik,
        n_params,
        n_obs,
        aic: -2.0 * loglik + 2.0 * q,
        bic: -2.0 * loglik + q * (n_obs as f64).ln(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCell {
    pub interior_knots: usize,
    pub order: usize,
    pub converged: bool,
    pub criteria: Option<InfoCriteria>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub cells: Vec<SelectionCell>,
    /// Index into `cells` of the AIC winner.
    pub best_aic: usize,
    pub best_bic: usize,
}

/// Fits every `(interior_knots, order)` cell and picks the per-criterion
/// minimizer among converged fits; ties go to the earlier cell.
pub fn select_model(data: &PanelDataset, base: &FitConfig, grid: &[(usize, usize)]) -> Result<SelectionReport> {
    if grid.is_empty() {
        return Err(Error::Config("selection grid is empty".into()));
    }
    let cells: Vec<SelectionCell> = grid
        .par_iter()
        .map(|&(m, l)| {
            let cfg = base.clone().with_spline(m, l);
            match Estimator::new(data, cfg).and_then(|e| e.fit()) {
                Ok(fit) => SelectionCell {
                    interior_knots: m,
                    order: l,
                    converged: fit.converged,
                    criteria: Some(aic_bic(&fit, data)),
                    error: None,
                },
                Err(e) => SelectionCell { interior_knots: m, order: l, converged: false, criteria: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let winner = |key: fn(&InfoCriteria) -> f64| {
        cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.converged)
            .filter_map(|(i, c)| c.criteria.as_ref().map(|ic| (i, key(ic))))
            .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
                Some((_, bv)) if bv <= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    };
    let best_aic = winner(|c| c.aic).ok_or(Error::NoConvergedFit)?;
    let best_bic = winner(|c| c.bic).ok_or(Error::NoConvergedFit)?;
    Ok(SelectionReport { cells, best_aic, best_bic })
}

/// Everything computed after a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub sandwich: SandwichResult,
    pub coefficients: Vec<CoefRow>,
    pub spline: SplineCoefVariance,
    pub criteria: InfoCriteria,
}

pub fn infer(est: &Estimator<'_>, fit: &FitResult) -> Result<InferenceResult> {
    let sandwich = sandwich_cov(est, fit)?;
    let coefficients = wald_summary(&fit.beta, &sandwich.covariance);
    let spline = spline_coef_variances(est, fit)?;
    let criteria = aic_bic(fit, est.model().data());
    Ok(InferenceResult { sandwich, coefficients, spline, criteria })
}

/// One row of the pointwise baseline band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub t: f64,
    pub lambda: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `Λ̂₀(t)` with pointwise 95% band on `points` evenly spaced times in `[0, τ]`.
pub fn baseline_band(fit: &FitResult, spline: &SplineCoefVariance, points: usize) -> Result<Vec<BandPoint>> {
    let tau = fit.knots.tau();
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let t = if i + 1 == points { tau } else { tau * i as f64 / (points - 1) as f64 };
            let lambda = fit.baseline(t)?;
            let se = lambda_variance(fit, spline, t)?.sqrt();
            Ok(BandPoint { t, lambda, se, lower: lambda - Z_975 * se, upper: lambda + Z_975 * se })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Estimator;
    use crate::model::{CutPointMode, Subject};
    use crate::poisson::CutPoints;
    use crate::simulation::{replicate_dataset, SimScenario};

    #[test]
    fn wald_examples() {
        let rows = wald_summary(&[0.0, 1.96], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((rows[0].p_value - 1.0).abs() < 1e-12);
        assert!((rows[1].p_value - 0.05).abs() < 1e-4);
        assert!((rows[1].ci_low - 0.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.ci_low <= r.estimate && r.estimate <= r.ci_high));
    }

    #[test]
    fn information_criteria() {
        let small = info_criteria(-100.0, 5, 400);
        let big = info_criteria(-100.0, 7, 400);
        assert!(small.aic < big.aic && small.bic < big.bic);
        assert!((small.aic - 210.0).abs() < 1e-12);
        assert!((small.bic - (200.0 + 5.0 * 400f64.ln())).abs() < 1e-12);
        // BIC penalty exceeds AIC penalty once N > e²
        for n in [8usize, 20, 1000] {
            let ic = info_criteria(0.0, 3, n);
            assert!(ic.bic > ic.aic);
        }
        let ic = info_criteria(0.0, 3, 7);
        assert!(ic.bic < ic.aic);
    }

    /// Scalar brute-force version of the sandwich for one covariate.
    #[test]
    fn scalar_sandwich_matches_brute_force() {
        let subjects: Vec<Subject> = (0..60)
            .map(|i| {
                let x = ((i * 37) % 60) as f64 / 30.0 - 1.0;
                let y1 = 1 + ((i * 7) % 3) as u32;
                let y2 = 1 + ((i * 11 + 1) % 3) as u32;
                Subject::new(format!("{i}"), vec![x], vec![1.5 + (i % 4) as f64, 8.0], vec![y1, y2])
            })
            .collect();
        let d = PanelDataset::new(subjects, 3, Some(10.0)).unwrap();
        let cfg = FitConfig::new(CutPointMode::Known(CutPoints::integer(&[0, 2]).unwrap())).with_spline(1, 2);
        let est = Estimator::new(&d, cfg).unwrap();
        let fit = est.fit().unwrap();
        let sw = sandwich_cov(&est, &fit).unwrap();

        let h = 3.0 / 60f64.sqrt();
        let model = est.model();
        let base = model.subject_logliks(&fit.params).unwrap();
        let p1 = est.profile_nuisance(&[fit.beta[0] + h], &fit.params).unwrap();
        let p2 = est.profile_nuisance(&[fit.beta[0] + 2.0 * h], &fit.params).unwrap();
        let s1 = model.subject_logliks(&p1.params).unwrap();
        let f0: f64 = base.iter().sum();
        let f1: f64 = s1.iter().sum();
        let second = (f0 - 2.0 * f1 + p2.value) / (h * h);
        let score_sq: f64 = base.iter().zip(&s1).map(|(a, b)| ((b - a) / h).powi(2)).sum();
        let want = score_sq / (second * second);
        assert!(((sw.covariance[0][0] - want) / want).abs() < 1e-8, "{} vs {want}", sw.covariance[0][0]);
    }

    #[test]
    fn lambda_variance_vanishes_at_zero_and_is_continuous() {
        let sim = replicate_dataset(&SimScenario::scenario2(), 120, 0).unwrap();
        let cfg = FitConfig::new(CutPointMode::Known(CutPoints::integer(&[3, 10]).unwrap()));
        let est = Estimator::new(&sim.data, cfg).unwrap();
        let fit = est.fit().unwrap();
        let sv = spline_coef_variances(&est, &fit).unwrap();
        assert_eq!(lambda_variance(&fit, &sv, 0.0).unwrap(), 0.0);
        assert!(lambda_variance(&fit, &sv, 10.5).is_err());
        let mut prev = 0.0;
        for i in 1..=1000 {
            let t = 10.0 * i as f64 / 1000.0;
            let v = lambda_variance(&fit, &sv, t).unwrap();
            assert!(v >= 0.0);
            assert!((v - prev).abs() < 0.05 * v.max(1e-3) + 1e-3, "jump at t={t}");
            prev = v;
        }
        let full = lambda_variance_full(&fit, &sv, 5.0).unwrap();
        assert!(full >= 0.0);
    }

    #[test]
    fn sandwich_is_symmetric() {
        let sim = replicate_dataset(&SimScenario::scenario1(), 100, 3).unwrap();
        let cfg = FitConfig::new(CutPointMode::Known(CutPoints::integer(&[1, 3, 8]).unwrap()));
        let est = Estimator::new(&sim.data, cfg).unwrap();
        let fit = est.fit().unwrap();
        let sw = sandwich_cov(&est, &fit).unwrap();
        assert_eq!(sw.covariance[0][1], sw.covariance[1][0]);
        assert!(sw.covariance[0][0] >= 0.0 && sw.covariance[1][1] >= 0.0);
        assert!(sw.curvature[0][0] < 0.0 && sw.curvature[1][1] < 0.0);
    }

    #[test]
    fn selection_single_cell_and_determinism() {
        let sim = replicate_dataset(&SimScenario::scenario2(), 80, 1).unwrap();
        let cfg = FitConfig::new(CutPointMode::Known(CutPoints::integer(&[3, 10]).unwrap()));
        let one = select_model(&sim.data, &cfg, &[(2, 3)]).unwrap();
        assert_eq!(one.best_aic, 0);
        assert_eq!(one.best_bic, 0);
        let grid = [(1, 2), (2, 2), (2, 3), (3, 1)];
        let a = select_model(&sim.data, &cfg, &grid).unwrap();
        let b = select_model(&sim.data, &cfg, &grid).unwrap();
        assert_eq!(a, b);
        assert!(a.cells.iter().all(|c| c.criteria.is_some()));
        assert!(select_model(&sim.data, &cfg, &[]).is_err());
    }
}
