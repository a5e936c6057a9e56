//! BFGS maximizer with backtracking (Armijo) line search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { abs_tol: 1e-6, rel_tol: 1e-6, grad_tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Objective change below both the absolute and relative tolerance.
    FunctionTolerance,
    GradientTolerance,
    MaxIterations,
    /// No step along the search direction improved the objective.
    LineSearchFailed,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::FunctionTolerance | Termination::GradientTolerance)
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective after each accepted iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Maximizes `f`, which returns the objective and its gradient.
///
/// Errors only when the starting point is not finite; failures during the
/// line search count as rejected trial points.
pub fn maximize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (mut fx, mut gx) = f(x0)?;
    if !fx.is_finite() || gx.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteObjective);
    }
    let mut x = x0.to_vec();
    let mut trace = vec![fx];
    if n == 0 {
        return Ok(BfgsOutcome { x, value: fx, gradient: gx, iterations: 0, termination: Termination::GradientTolerance, trace });
    }

    // inverse Hessian of -f, row major
    let initial_scale = |g: &[f64]| 1.0 / sup_norm(g).max(1.0);
    let mut h = scaled_identity(n, initial_scale(&gx));
    let mut fresh = true;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < opts.max_iter {
        if sup_norm(&gx) <= opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut dir = mat_vec(&h, &gx, n);
        let mut slope = dot(&gx, &dir);
        if !(slope > 0.0) {
            h = scaled_identity(n, initial_scale(&gx));
            fresh = true;
            dir = mat_vec(&h, &gx, n);
            slope = dot(&gx, &dir);
        }

        let step = match line_search(&mut f, &x, fx, &dir, slope) {
            Some(s) => s,
            None if !fresh => {
                // retry once along the scaled gradient
                h = scaled_identity(n, initial_scale(&gx));
                fresh = true;
                continue;
            }
            None => {
                termination = Termination::LineSearchFailed;
                break;
            }
        };
        iterations += 1;
        let (x_new, f_new, g_new) = step;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // gradient difference of the minimized function -f
        let y: Vec<f64> = gx.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * (dot(&s, &s) * yy).sqrt() && yy > 0.0 {
            if fresh {
                h = scaled_identity(n, sy / yy);
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy, n);
        }

        let change = f_new - fx;
        x = x_new;
        fx = f_new;
        gx = g_new;
        trace.push(fx);
        if change.abs() <= opts.abs_tol && change.abs() <= opts.rel_tol * fx.abs() {
            termination = Termination::FunctionTolerance;
            break;
        }
    }
    if termination == Termination::MaxIterations && sup_norm(&gx) <= opts.grad_tol {
        termination = Termination::GradientTolerance;
    }
    Ok(BfgsOutcome { x, value: fx, gradient: gx, iterations, termination, trace })
}

type Step = (Vec<f64>, f64, Vec<f64>);

fn line_search<F>(f: &mut F, x: &[f64], fx: f64, dir: &[f64], slope: f64) -> Option<Step>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        if let Ok((ft, gt)) = f(&trial) {
            if ft.is_finite() && gt.iter().all(|g| g.is_finite()) {
                if ft >= fx + ARMIJO_C1 * t * slope {
                    return Some((trial, ft, gt));
                }
                // safeguarded quadratic interpolation
                let denom = 2.0 * (fx + t * slope - ft);
                let t_quad = if denom > 0.0 { slope * t * t / denom } else { 0.5 * t };
                t = t_quad.clamp(0.1 * t, 0.5 * t);
                continue;
            }
        }
        t *= 0.25;
    }
    None
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    // H += ρ²(yᵀHy + sy) s sᵀ - ρ (Hy sᵀ + s yᵀH)
    let coef = rho * rho * (yhy + sy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn scaled_identity(n: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = scale;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
