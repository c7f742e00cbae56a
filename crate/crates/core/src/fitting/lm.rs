//! Damped Gauss–Newton (Levenberg–Marquardt) with box bounds.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-8;
const CHI2_TOL: f64 = 1e-10;

/// A weighted least-squares problem: `eval` fills the weighted residuals
/// `(y − f)/σ` and, when asked, the weighted Jacobian `∂f/∂p / σ`.
pub(crate) trait Problem {
    fn n_points(&self) -> usize;
    fn n_params(&self) -> usize;
    fn eval(&self, p: &[f64], resid: &mut [f64], jac: Option<&mut DMatrix<f64>>);
}

pub(crate) struct Settings {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub free: Vec<bool>,
    /// Typical magnitude of each parameter, for the relative step test when
    /// the parameter itself is near zero.
    pub scale: Vec<f64>,
}

pub(crate) struct Outcome {
    pub params: Vec<f64>,
    /// Parameter covariance; zero rows for fixed parameters and an infinite
    /// diagonal for unidentifiable ones.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub n_iter: usize,
    pub chi2_trace: Vec<f64>,
}

fn chi2_at(problem: &dyn Problem, p: &[f64], buf: &mut [f64]) -> f64 {
    problem.eval(p, buf, None);
    buf.iter().map(|r| r * r).sum()
}

pub(crate) fn minimize(problem: &dyn Problem, p0: &[f64], s: &Settings) -> Result<Outcome> {
    let n = problem.n_params();
    let m = problem.n_points();
    let mut p: Vec<f64> = p0
        .iter()
        .enumerate()
        .map(|(i, &v)| v.clamp(s.lower[i], s.upper[i]))
        .collect();
    let mut r = vec![0.0; m];
    let mut r_try = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, n);
    problem.eval(&p, &mut r, Some(&mut jac));
    let mut chi2: f64 = r.iter().map(|v| v * v).sum();
    if !chi2.is_finite() {
        return Err(Error::domain("initial parameters give a non-finite residual"));
    }
    let mut trace = vec![chi2];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iter = 0;

    while iter < MAX_ITER {
        iter += 1;
        if chi2 <= 1e-28 * m as f64 {
            converged = true;
            break;
        }
        let mut active = active_columns(&jac, &s.free);
        // Parameters pinned at a bound with the descent direction pointing
        // outward are held for this step.
        let (_, g_all) = normal_equations(&jac, &r, &active);
        let pinned: Vec<usize> = active
            .iter()
            .zip(g_all.iter())
            .filter(|(&j, &gj)| (p[j] <= s.lower[j] && gj < 0.0) || (p[j] >= s.upper[j] && gj > 0.0))
            .map(|(&j, _)| j)
            .collect();
        active.retain(|j| !pinned.contains(j));
        if active.is_empty() {
            converged = true;
            break;
        }
        let (a, g) = normal_equations(&jac, &r, &active);
        let mut accepted = false;
        while lambda < 1e20 {
            let mut damped = a.clone();
            for k in 0..active.len() {
                damped[(k, k)] += lambda * a[(k, k)];
            }
            let Some(delta) = damped.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for (k, &j) in active.iter().enumerate() {
                trial[j] = (p[j] + delta[k]).clamp(s.lower[j], s.upper[j]);
            }
            let chi2_try = chi2_at(problem, &trial, &mut r_try);
            if chi2_try.is_finite() && chi2_try < chi2 {
                let rel_step = active
                    .iter()
                    .map(|&j| (trial[j] - p[j]).abs() / (p[j].abs() + s.scale[j]))
                    .fold(0.0, f64::max);
                let rel_chi2 = (chi2 - chi2_try) / chi2;
                // Tiny steps under heavy damping say nothing about the optimum.
                let undamped = lambda <= 1e2;
                p = trial;
                chi2 = chi2_try;
                trace.push(chi2);
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if undamped && (rel_step < STEP_TOL || rel_chi2 < CHI2_TOL) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        problem.eval(&p, &mut r, Some(&mut jac));
        // No descent direction left even with heavy damping: a (bounded)
        // local minimum to working precision.
        if converged || !accepted {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: iter,
            chi2,
            last_params: p,
        });
    }
    let covariance = covariance(&jac, &s.free);
    Ok(Outcome {
        params: p,
        covariance,
        chi2,
        n_iter: iter,
        chi2_trace: trace,
    })
}

/// Free parameters whose Jacobian column is not identically zero.
fn active_columns(jac: &DMatrix<f64>, free: &[bool]) -> Vec<usize> {
    (0..jac.ncols())
        .filter(|&j| free[j] && jac.column(j).iter().any(|v| *v != 0.0))
        .collect()
}

fn normal_equations(jac: &DMatrix<f64>, r: &[f64], active: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let k = active.len();
    let sub = jac.select_columns(active);
    let a = sub.transpose() * &sub;
    let g = sub.transpose() * DVector::from_column_slice(r);
    debug_assert_eq!(a.nrows(), k);
    (a, g)
}

fn covariance(jac: &DMatrix<f64>, free: &[bool]) -> DMatrix<f64> {
    let n = jac.ncols();
    let mut cov = DMatrix::zeros(n, n);
    for j in 0..n {
        if free[j] {
            cov[(j, j)] = f64::INFINITY;
        }
    }
    let active = active_columns(jac, free);
    if active.is_empty() {
        return cov;
    }
    let (a, _) = normal_equations(jac, &vec![0.0; jac.nrows()], &active);
    // Equilibrate before inverting; parameters span many decades.
    let k = active.len();
    let d: Vec<f64> = (0..k).map(|i| a[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| a[(i, j)] / (d[i] * d[j]));
    if let Some(ch) = scaled.cholesky() {
        let inv = ch.inverse();
        for (x, &i) in active.iter().enumerate() {
            for (y, &j) in active.iter().enumerate() {
                cov[(i, j)] = inv[(x, y)] / (d[x] * d[y]);
            }
        }
    }
    cov
}

pub(crate) fn sigma_of(cov: &DMatrix<f64>, j: usize) -> f64 {
    cov[(j, j)].max(0.0).sqrt()
}
