//! Correlation-histogram models.
//!
//! With `g̃(τ) = 1 − (1+a)e^{−|τ|/τ₁} + a·e^{−|τ|/τ₂}`:
//!
//! * auto:  `scale·[1 − amplitude·(1 − g̃)]`
//! * cross: `scale·[1 − amplitude·(1 − ½g̃ − ½(1 − ξ·W))]`,
//!   `W = e^{−2|τ|/width}·cos(2πΔf₀τ)`
//!
//! `amplitude` absorbs uncorrelated counts (it equals ρ_C·ρ_D for a pure
//! background) and `width`, `Δf₀` of the interference feature are held at
//! externally determined values. One `g̃` is shared by both emitters in the
//! cross model. Models are averaged over each histogram bin.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{self, Problem};
use super::{FitConstraints, FitResult};
use crate::error::{Error, Result};
use crate::model::{default_tau_grid, dip_fwhm, interference_feature_width, BaselineWindow, PairConfig, WidthConvention};
use crate::tcspc::{CorrelationHistogram, Normalization};
use crate::units::NS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum G2Model {
    Auto,
    Cross {
        /// 1/e full width of the interference feature (s).
        width: f64,
        /// Mean detuning (Hz).
        delta_f0: f64,
    },
}

const AUTO_NAMES: [&str; 5] = ["amplitude", "a", "tau1", "tau2", "scale"];
const CROSS_NAMES: [&str; 6] = ["amplitude", "xi", "a", "tau1", "tau2", "scale"];

impl G2Model {
    /// Cross model with the feature width of `cfg` under `convention`.
    pub fn cross_for(cfg: &PairConfig, convention: WidthConvention) -> Result<Self> {
        Ok(G2Model::Cross {
            width: interference_feature_width(cfg, convention)?,
            delta_f0: cfg.delta_f0,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            G2Model::Auto => "g2-auto",
            G2Model::Cross { .. } => "g2-cross",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            G2Model::Auto => &AUTO_NAMES,
            G2Model::Cross { .. } => &CROSS_NAMES,
        }
    }

    fn validate(&self) -> Result<()> {
        if let G2Model::Cross { width, delta_f0 } = *self {
            if !(width.is_finite() && width > 0.0 && delta_f0.is_finite()) {
                return Err(Error::domain("cross model needs a finite width > 0 and finite detuning"));
            }
        }
        Ok(())
    }

    /// Model value at `tau`; fills `grad` (one entry per parameter) if given.
    fn point(&self, tau: f64, p: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let t = tau.abs();
        let (amp, xi, a, t1, t2, s) = match self {
            G2Model::Auto => (p[0], 0.0, p[1], p[2], p[3], p[4]),
            G2Model::Cross { .. } => (p[0], p[1], p[2], p[3], p[4], p[5]),
        };
        let e1 = (-t / t1).exp();
        let e2 = (-t / t2).exp();
        let gt = 1.0 - (1.0 + a) * e1 + a * e2;
        let dgt = [e2 - e1, -(1.0 + a) * e1 * t / (t1 * t1), a * e2 * t / (t2 * t2)];
        match *self {
            G2Model::Auto => {
                let inner = 1.0 - amp * (1.0 - gt);
                if let Some(g) = grad {
                    g[0] = -s * (1.0 - gt);
                    for k in 0..3 {
                        g[1 + k] = s * amp * dgt[k];
                    }
                    g[4] = inner;
                }
                s * inner
            }
            G2Model::Cross { width, delta_f0 } => {
                let w = (-2.0 * t / width).exp() * (2.0 * PI * delta_f0 * tau).cos();
                let sig = 0.5 * gt + 0.5 * (1.0 - xi * w);
                let inner = 1.0 - amp * (1.0 - sig);
                if let Some(g) = grad {
                    g[0] = -s * (1.0 - sig);
                    g[1] = -0.5 * s * amp * w;
                    for k in 0..3 {
                        g[2 + k] = 0.5 * s * amp * dgt[k];
                    }
                    g[5] = inner;
                }
                s * inner
            }
        }
    }

    pub fn value(&self, tau: f64, p: &[f64]) -> f64 {
        self.point(tau, p, None)
    }

    pub fn gradient(&self, tau: f64, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        self.point(tau, p, Some(&mut g));
        g
    }

    /// Average over `[lo, hi]` by 3-point Gauss–Legendre, split at τ = 0
    /// where the model has a cusp.
    fn bin(&self, lo: f64, hi: f64, p: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if lo < 0.0 && hi > 0.0 {
            let n = p.len();
            let (wl, wr) = (-lo / (hi - lo), hi / (hi - lo));
            let mut gl = vec![0.0; n];
            let mut gr = vec![0.0; n];
            let want = grad.is_some();
            let vl = self.bin(lo, 0.0, p, want.then_some(gl.as_mut_slice()));
            let vr = self.bin(0.0, hi, p, want.then_some(gr.as_mut_slice()));
            if let Some(g) = grad {
                for k in 0..n {
                    g[k] = wl * gl[k] + wr * gr[k];
                }
            }
            return wl * vl + wr * vr;
        }
        const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut tmp = [0.0; 6];
        let mut v = 0.0;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        for (x, w) in X.iter().zip(W) {
            let want = grad.is_some();
            v += w * self.point(m + h * x, p, want.then_some(&mut tmp[..p.len()]));
            if let Some(g) = grad.as_deref_mut() {
                for k in 0..p.len() {
                    g[k] += w * tmp[k];
                }
            }
        }
        v
    }

    /// Bin-averaged model value over `[lo, hi]` (s).
    pub fn bin_value(&self, lo: f64, hi: f64, p: &[f64]) -> f64 {
        self.bin(lo, hi, p, None)
    }

    pub fn bin_gradient(&self, lo: f64, hi: f64, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        self.bin(lo, hi, p, Some(&mut g));
        g
    }

    /// Fitted curve at τ = 0 with its propagated 1σ.
    pub fn at_zero(&self, fit: &FitResult) -> (f64, f64) {
        let g = self.gradient(0.0, &fit.params);
        (self.value(0.0, &fit.params), fit.propagate(&g))
    }

    /// Half-depth full width of the fitted curve's central dip, sampled on
    /// the default τ grid.
    pub fn dip_fwhm(&self, fit: &FitResult, baseline: BaselineWindow) -> Result<f64> {
        let taus = default_tau_grid();
        let values: Vec<f64> = taus.iter().map(|&t| self.value(t, &fit.params)).collect();
        dip_fwhm(&taus, &values, baseline)
    }

    pub fn curve(&self, fit: &FitResult, taus: &[f64]) -> Vec<f64> {
        taus.iter().map(|&t| self.value(t, &fit.params)).collect()
    }
}

/// One histogram in a (possibly joint) fit.
#[derive(Debug, Clone, Copy)]
pub struct G2Panel<'a> {
    pub hist: &'a CorrelationHistogram,
    pub model: G2Model,
    /// Only bins with `|τ| ≤ max_abs_tau` enter the fit.
    pub max_abs_tau: Option<f64>,
}

struct PanelData {
    lo: Vec<f64>,
    hi: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
    model: G2Model,
    /// Panel parameter index → global parameter index.
    map: Vec<usize>,
}

impl PanelData {
    fn new(panel: &G2Panel) -> Result<Self> {
        panel.model.validate()?;
        let hist = panel.hist;
        let unit = hist.unit_counts()?;
        let cut = panel.max_abs_tau.unwrap_or(f64::INFINITY);
        let (mut lo, mut hi, mut y, mut sigma) = (vec![], vec![], vec![], vec![]);
        for (i, e) in hist.bin_edges_ps.windows(2).enumerate() {
            let (a, b) = (e[0] as f64 * 1e-12, e[1] as f64 * 1e-12);
            if unit[i] <= 0.0 || 0.5 * (a + b).abs() > cut {
                continue;
            }
            let c = hist.counts[i] as f64;
            lo.push(a);
            hi.push(b);
            y.push(c / unit[i]);
            sigma.push(c.max(1.0).sqrt() / unit[i]);
        }
        if y.len() <= panel.model.param_names().len() {
            return Err(Error::domain("too few populated bins for a g2 fit"));
        }
        if hist.total_counts() == 0 {
            return Err(Error::NotFound("histogram holds no coincidences".into()));
        }
        Ok(Self {
            lo,
            hi,
            y,
            sigma,
            model: panel.model,
            map: Vec::new(),
        })
    }

    /// Starting values from the data: tail level, depth at zero and the
    /// half-depth width of the dip.
    fn initial(&self) -> Vec<f64> {
        let n = self.y.len();
        let center = |i: usize| 0.5 * (self.lo[i] + self.hi[i]);
        let tmax = (0..n).map(|i| center(i).abs()).fold(0.0, f64::max);
        let mean_where = |pred: &dyn Fn(f64) -> bool| {
            let v: Vec<f64> = (0..n).filter(|&i| pred(center(i).abs())).map(|i| self.y[i]).collect();
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        let base = mean_where(&|t| t >= 0.8 * tmax).unwrap_or(1.0).max(1e-3);
        let i0 = (0..n)
            .min_by(|&a, &b| center(a).abs().total_cmp(&center(b).abs()))
            .expect("non-empty");
        let g0 = mean_where(&|t| t <= 0.5 * NS).unwrap_or(self.y[i0]);
        // Smoothed outward walk to the half-depth level.
        let half = 0.5 * (g0 + base);
        let smooth = |i: usize| {
            let lo = i.saturating_sub(3);
            let hi = (i + 3).min(n - 1);
            self.y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        };
        let right = (i0..n).find(|&i| smooth(i) >= half).map(|i| center(i).abs());
        let left = (0..=i0).rev().find(|&i| smooth(i) >= half).map(|i| center(i).abs());
        let hw = match (left, right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => 0.1 * tmax,
        }
        .max(0.2 * NS);
        let tau1 = hw / 2f64.ln();
        let depth = ((base - g0) / base).max(0.0);
        match self.model {
            G2Model::Auto => vec![depth.clamp(0.05, 1.0), 0.5, tau1, 10.0 * tau1, base],
            G2Model::Cross { .. } => vec![(depth / 0.65).clamp(0.05, 1.0), 0.3, 0.5, tau1, 10.0 * tau1, base],
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let tmax = self.hi.iter().chain(&self.lo).fold(0.0f64, |m, t| m.max(t.abs()));
        let t_lo = 1e-12;
        let (lower, upper, scale) = match self.model {
            G2Model::Auto => (
                vec![0.0, 0.0, t_lo, t_lo, 0.0],
                vec![1.0, 50.0, 10.0 * tmax, 100.0 * tmax, 10.0],
                vec![1.0, 1.0, NS, NS, 1.0],
            ),
            G2Model::Cross { .. } => (
                vec![0.0, -1.0, 0.0, t_lo, t_lo, 0.0],
                vec![1.0, 1.0, 50.0, 10.0 * tmax, 100.0 * tmax, 10.0],
                vec![1.0, 1.0, 1.0, NS, NS, 1.0],
            ),
        };
        (lower, upper, scale)
    }
}

struct G2Problem {
    panels: Vec<PanelData>,
    n_params: usize,
}

impl Problem for G2Problem {
    fn n_points(&self) -> usize {
        self.panels.iter().map(|p| p.y.len()).sum()
    }
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn eval(&self, p: &[f64], resid: &mut [f64], mut jac: Option<&mut DMatrix<f64>>) {
        if let Some(j) = jac.as_deref_mut() {
            j.fill(0.0);
        }
        let mut row = 0;
        let mut local = [0.0; 6];
        let mut grad = [0.0; 6];
        for panel in &self.panels {
            let k = panel.map.len();
            for (l, &g) in panel.map.iter().enumerate() {
                local[l] = p[g];
            }
            for i in 0..panel.y.len() {
                let s = panel.sigma[i];
                let want = jac.is_some();
                let v = panel
                    .model
                    .bin(panel.lo[i], panel.hi[i], &local[..k], want.then_some(&mut grad[..k]));
                resid[row] = (panel.y[i] - v) / s;
                if let Some(j) = jac.as_deref_mut() {
                    for (l, &g) in panel.map.iter().enumerate() {
                        j[(row, g)] += grad[l] / s;
                    }
                }
                row += 1;
            }
        }
    }
}

/// Fits `model` to a normalised histogram over all bins.
///
/// Under rate-product normalisation the asymptote is 1 by construction, so
/// `scale` is held at 1 unless `constraints` says otherwise; under
/// tail-average normalisation it is free.
pub fn fit_g2(hist: &CorrelationHistogram, model: G2Model, constraints: &FitConstraints) -> Result<FitResult> {
    fit_g2_window(hist, model, constraints, None)
}

pub fn fit_g2_window(
    hist: &CorrelationHistogram,
    model: G2Model,
    constraints: &FitConstraints,
    max_abs_tau: Option<f64>,
) -> Result<FitResult> {
    let mut data = PanelData::new(&G2Panel {
        hist,
        model,
        max_abs_tau,
    })?;
    data.map = (0..model.param_names().len()).collect();
    let names: Vec<String> = model.param_names().iter().map(|s| s.to_string()).collect();
    let mut p0 = data.initial();
    let constraints = default_scale(constraints, hist, "scale");
    let free = constraints.apply(&names, &mut p0)?;
    let (lower, upper, scale) = data.bounds();
    let n_points = data.y.len();
    let problem = G2Problem {
        panels: vec![data],
        n_params: names.len(),
    };
    let out = lm::minimize(&problem, &p0, &lm::Settings { lower, upper, free: free.clone(), scale })?;
    Ok(FitResult::from_outcome(model.name().into(), names, &free, n_points, out))
}

fn default_scale(c: &FitConstraints, hist: &CorrelationHistogram, name: &str) -> FitConstraints {
    let mut c = c.clone();
    if hist.normalization == Normalization::RateProduct && !c.fixed.contains_key(name) {
        c.fixed.insert(name.to_string(), 1.0);
    }
    c
}

/// Result of a joint fit: the combined parameter vector and per-panel views
/// in each panel's own parameter names.
#[derive(Debug, Clone)]
pub struct SharedFit {
    pub combined: FitResult,
    pub panels: Vec<FitResult>,
}

/// Joint fit in which all panels share `a`, `tau1` and `tau2` while
/// `amplitude`, `xi` and `scale` are per panel (named `p<i>.amplitude` etc.
/// in the combined result).
pub fn fit_g2_shared(panels: &[G2Panel], constraints: &FitConstraints) -> Result<SharedFit> {
    if panels.is_empty() {
        return Err(Error::domain("no panels to fit"));
    }
    const SHARED: [&str; 3] = ["a", "tau1", "tau2"];
    let mut names: Vec<String> = SHARED.iter().map(|s| s.to_string()).collect();
    let mut p0 = vec![0.0; 3];
    let mut lower = vec![0.0; 3];
    let mut upper = vec![0.0; 3];
    let mut scale = vec![0.0; 3];
    let mut data = Vec::new();
    let mut c = constraints.clone();
    for (i, panel) in panels.iter().enumerate() {
        let mut d = PanelData::new(panel)?;
        let init = d.initial();
        let (lo, hi, sc) = d.bounds();
        for (l, local_name) in panel.model.param_names().iter().enumerate() {
            let g = match SHARED.iter().position(|s| s == local_name) {
                Some(g) => {
                    if i == 0 {
                        p0[g] = init[l];
                        lower[g] = lo[l];
                        upper[g] = hi[l];
                        scale[g] = sc[l];
                    } else {
                        upper[g] = upper[g].min(hi[l]);
                    }
                    g
                }
                None => {
                    names.push(format!("p{i}.{local_name}"));
                    p0.push(init[l]);
                    lower.push(lo[l]);
                    upper.push(hi[l]);
                    scale.push(sc[l]);
                    names.len() - 1
                }
            };
            d.map.push(g);
        }
        c = default_scale(&c, panel.hist, &format!("p{i}.scale"));
        data.push(d);
    }
    let free = c.apply(&names, &mut p0)?;
    let n_points = data.iter().map(|d| d.y.len()).sum();
    let problem = G2Problem {
        panels: data,
        n_params: names.len(),
    };
    let out = lm::minimize(&problem, &p0, &lm::Settings { lower, upper, free: free.clone(), scale })?;
    let combined = FitResult::from_outcome("g2-shared".into(), names, &free, n_points, out);
    let views = problem
        .panels
        .iter()
        .zip(panels)
        .map(|(d, panel)| {
            let idx = &d.map;
            FitResult {
                model: panel.model.name().into(),
                names: panel.model.param_names().iter().map(|s| s.to_string()).collect(),
                params: idx.iter().map(|&g| combined.params[g]).collect(),
                sigmas: idx.iter().map(|&g| combined.sigmas[g]).collect(),
                fixed: idx.iter().map(|&g| combined.fixed[g]).collect(),
                covariance: idx
                    .iter()
                    .map(|&a| idx.iter().map(|&b| combined.covariance[a][b]).collect())
                    .collect(),
                chi2: combined.chi2,
                dof: combined.dof,
                chi2_reduced: combined.chi2_reduced,
                converged: combined.converged,
                n_iter: combined.n_iter,
                chi2_trace: Vec::new(),
            }
        })
        .collect();
    Ok(SharedFit {
        combined,
        panels: views,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::ClickStream;
    use crate::tcspc::{correlate, CorrelatorConfig};
    use crate::units::ns;

    /// Accurate bin average: split at zero, 32 Gauss panels per side.
    fn bin_average(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        if a < 0.0 && b > 0.0 {
            cuts.push(0.0);
        }
        cuts.push(b);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let h = (w[1] - w[0]) / 32.0;
            for k in 0..32 {
                let lo = w[0] + k as f64 * h;
                total += h * crate::mc::gauss5(f, lo, lo + h);
            }
        }
        total / (b - a)
    }

    /// Histogram whose counts follow `f(τ)` times a large unit count.
    fn synthetic(f: impl Fn(f64) -> f64) -> CorrelationHistogram {
        let cfg = CorrelatorConfig {
            bin_width: 256e-12,
            window: ns(60.0),
            ..Default::default()
        };
        let mut h = correlate(&ClickStream::empty(1.0, 0), &cfg).unwrap();
        let unit = 1e9;
        let w = h.bin_widths()[0];
        h.duration_ps = 1_000_000_000_000;
        h.clicks_c = 1_000_000;
        h.clicks_d = (unit / (1e6 * w)).round() as u64;
        let u = h.clicks_c as f64 * h.clicks_d as f64 * w;
        for (i, e) in h.bin_edges_ps.clone().windows(2).enumerate() {
            let (a, b) = (e[0] as f64 * 1e-12, e[1] as f64 * 1e-12);
            let avg = bin_average(&f, a, b);
            h.counts[i] = (u * avg).round() as u64;
        }
        h.normalize().unwrap()
    }

    #[test]
    fn two_level_round_trip() {
        let tau1 = ns(5.0);
        let h = synthetic(|t| 1.0 - (-t.abs() / tau1).exp());
        let r = fit_g2(&h, G2Model::Auto, &FitConstraints::none()).unwrap();
        assert!(r.get("a").unwrap() < 1e-6);
        assert!((r.get("tau1").unwrap() - tau1).abs() < 1e-6 * tau1);
        assert!((r.get("amplitude").unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(r.get("scale"), Some(1.0));
    }

    #[test]
    fn cross_round_trip() {
        let width = ns(2.887);
        let df = 93e6;
        let truth = [0.86, 0.55, 0.9, ns(7.0), ns(110.0), 1.0];
        let m = G2Model::Cross { width, delta_f0: df };
        let h = synthetic(|t| m.value(t, &truth));
        let r = fit_g2(&h, m, &FitConstraints::none()).unwrap();
        for (k, t) in truth.iter().enumerate() {
            assert!((r.params[k] - t).abs() < 1e-4 * t.abs().max(1e-9), "{}", r.names[k]);
        }
        let (g0, _) = m.at_zero(&r);
        assert!((g0 - (1.0 - 0.86 * (1.0 - 0.5 * 0.45))).abs() < 1e-4);
    }

    #[test]
    fn bin_gradient_matches_finite_difference() {
        let m = G2Model::Cross {
            width: ns(3.0),
            delta_f0: 93e6,
        };
        let p = [0.8, 0.4, 1.1, ns(6.0), ns(120.0), 1.02];
        for (lo, hi) in [(-ns(0.5), ns(0.5)), (ns(2.0), ns(3.0)), (-ns(9.0), -ns(8.0))] {
            let g = m.bin_gradient(lo, hi, &p);
            for k in 0..p.len() {
                let h = 1e-6 * p[k].abs();
                let mut a = p;
                let mut b = p;
                a[k] += h;
                b[k] -= h;
                let fd = (m.bin_value(lo, hi, &a) - m.bin_value(lo, hi, &b)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1e-3), "param {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn shared_fit_splits_panels() {
        let m = G2Model::Cross {
            width: ns(2.887),
            delta_f0: 93e6,
        };
        let par = [0.86, 0.55, 0.9, ns(7.0), ns(110.0), 1.0];
        let perp = [0.86, 0.0, 0.9, ns(7.0), ns(110.0), 1.0];
        let h1 = synthetic(|t| m.value(t, &perp));
        let h2 = synthetic(|t| m.value(t, &par));
        let fit = fit_g2_shared(
            &[
                G2Panel { hist: &h1, model: m, max_abs_tau: None },
                G2Panel { hist: &h2, model: m, max_abs_tau: None },
            ],
            &FitConstraints::none(),
        )
        .unwrap();
        assert!(fit.panels[0].get("xi").unwrap().abs() < 1e-4);
        assert!((fit.panels[1].get("xi").unwrap() - 0.55).abs() < 1e-4);
        assert!((fit.combined.get("tau1").unwrap() - ns(7.0)).abs() < 1e-3 * ns(7.0));
    }

    #[test]
    fn empty_histogram_rejected() {
        let h = correlate(&ClickStream::empty(1.0, 0), &CorrelatorConfig::default()).unwrap();
        assert!(fit_g2(&h, G2Model::Auto, &FitConstraints::none()).is_err());
    }
}
