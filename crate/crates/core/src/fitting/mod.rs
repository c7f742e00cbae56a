//! Weighted nonlinear least squares for PLE lines and correlation
//! histograms.
//!
//! Weights are Poisson. Histogram fits use variance `max(counts, 1)`; PLE
//! fits start there and are then reweighted with the fitted expectation
//! `max(model, 1)` until stable, since their background holds only a few
//! counts per point. Uncertainties come
//! from the inverse of the weighted normal matrix at the optimum, so they are
//! absolute (not rescaled by χ²).

mod g2;
mod lm;
mod lorentzian;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use g2::{fit_g2, fit_g2_shared, fit_g2_window, G2Model, G2Panel, SharedFit};
pub use lorentzian::{
    fit_lorentzian, fit_lorentzian_data, fit_lorentzian_window, initial_lorentzian, lorentzian,
    lorentzian_gradient, LorentzianParams, LORENTZIAN_PARAMS,
};

/// Parameters held at given values during a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitConstraints {
    pub fixed: BTreeMap<String, f64>,
}

impl FitConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn fix(mut self, name: &str, value: f64) -> Self {
        self.fixed.insert(name.to_string(), value);
        self
    }

    /// Applies the constraints to `p0`, returning the free mask.
    fn apply(&self, names: &[String], p0: &mut [f64]) -> Result<Vec<bool>> {
        let mut free = vec![true; names.len()];
        for (name, &v) in &self.fixed {
            let i = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Config(format!("unknown fit parameter `{name}`; expected one of {names:?}")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("fixed value of `{name}` must be finite")));
            }
            p0[i] = v;
            free[i] = false;
        }
        Ok(free)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// 1σ; 0 for fixed parameters, infinite where the data do not constrain
    /// the parameter.
    pub sigmas: Vec<f64>,
    pub fixed: Vec<bool>,
    #[serde(skip)]
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// Weighted residual after each accepted step.
    #[serde(skip)]
    pub chi2_trace: Vec<f64>,
}

impl FitResult {
    fn from_outcome(model: String, names: Vec<String>, free: &[bool], n_points: usize, out: lm::Outcome) -> Self {
        let n_free = free.iter().filter(|f| **f).count();
        let dof = n_points.saturating_sub(n_free);
        let sigmas = (0..names.len()).map(|j| lm::sigma_of(&out.covariance, j)).collect();
        let covariance = to_rows(&out.covariance);
        Self {
            model,
            names,
            params: out.params,
            sigmas,
            fixed: free.iter().map(|f| !f).collect(),
            covariance,
            chi2: out.chi2,
            dof,
            chi2_reduced: if dof > 0 { out.chi2 / dof as f64 } else { f64::NAN },
            converged: true,
            n_iter: out.n_iter,
            chi2_trace: out.chi2_trace,
        }
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.sigmas[i])
    }

    /// First-order standard error of a derived quantity with gradient
    /// `grad` (one entry per parameter).
    pub fn propagate(&self, grad: &[f64]) -> f64 {
        let mut var = 0.0;
        for (i, gi) in grad.iter().enumerate() {
            for (j, gj) in grad.iter().enumerate() {
                if *gi == 0.0 || *gj == 0.0 {
                    continue;
                }
                var += gi * self.covariance[i][j] * gj;
            }
        }
        var.max(0.0).sqrt()
    }

    /// JSON report with the settings that produced the fit and their SHA-256.
    pub fn to_json(&self, settings: &serde_json::Value) -> serde_json::Value {
        let map = |v: &[f64]| -> serde_json::Map<String, serde_json::Value> {
            self.names
                .iter()
                .zip(v)
                .map(|(n, x)| (n.clone(), json_number(*x)))
                .collect()
        };
        serde_json::json!({
            "model": self.model,
            "params": map(&self.params),
            "sigmas": map(&self.sigmas),
            "fixed": self.names.iter().zip(&self.fixed).filter(|(_, f)| **f).map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            "chi2": json_number(self.chi2),
            "dof": self.dof,
            "chi2_reduced": json_number(self.chi2_reduced),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "settings": settings,
            "settings_hash": settings_hash(settings),
        })
    }
}

/// Non-finite numbers become strings ("inf", "NaN") rather than `null`.
fn json_number(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::json!(x.to_string())
    }
}

/// Hex SHA-256 of the compact JSON form of `settings`.
pub fn settings_hash(settings: &serde_json::Value) -> String {
    let digest = Sha256::digest(settings.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Standard deviation assigned to a count.
fn poisson_sigma(counts: f64) -> f64 {
    counts.max(1.0).sqrt()
}
