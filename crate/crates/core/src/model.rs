//! Closed-form correlation functions for one emitter and for a pair of
//! emitters interfering on a balanced 50:50 beamsplitter.
//!
//! Everything here is in SI units (seconds, hertz, s⁻¹) and is a pure
//! function of its inputs.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{NS, PS};

/// Three-level single-emitter autocorrelation parameters,
/// `g(τ) = 1 − (1+a)·exp(−|τ|/τ₁) + a·exp(−|τ|/τ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrParams {
    /// Bunching amplitude.
    pub a: f64,
    /// Antibunching time constant (s).
    pub tau1: f64,
    /// Shelving / bunching time constant (s).
    pub tau2: f64,
}

impl AutocorrParams {
    pub fn new(a: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let p = Self { a, tau1, tau2 };
        p.validate()?;
        Ok(p)
    }

    /// Two-level form (no shelving): `1 − exp(−|τ|/τ₁)`.
    pub fn two_level(tau1: f64) -> Result<Self> {
        Self::new(0.0, tau1, tau1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::domain(format!("bunching amplitude a = {} must be >= 0", self.a)));
        }
        if !(self.tau1.is_finite() && self.tau1 > 0.0) {
            return Err(Error::domain(format!("tau1 = {} must be > 0", self.tau1)));
        }
        if !(self.tau2.is_finite() && self.tau2 > 0.0) {
            return Err(Error::domain(format!("tau2 = {} must be > 0", self.tau2)));
        }
        Ok(())
    }

    /// Unchecked evaluation; callers validate once up front.
    #[inline]
    pub fn eval(&self, tau: f64) -> f64 {
        let t = tau.abs();
        1.0 - (1.0 + self.a) * (-t / self.tau1).exp() + self.a * (-t / self.tau2).exp()
    }

    /// Full width at half depth of the dip for the pure two-level case.
    pub fn two_level_fwhm(&self) -> f64 {
        2.0 * self.tau1 * LN_2
    }
}

/// Optical parameters of one emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterModel {
    /// Centre of the |0⟩↔|Ex⟩ line (Hz).
    pub f_ex: f64,
    /// Centre of the |0⟩↔|Ey⟩ line (Hz).
    pub f_ey: f64,
    /// Radiative decay rate (s⁻¹).
    pub gamma: f64,
    /// Lorentzian spectral-diffusion FWHM of the selected line (Hz).
    pub sd_fwhm: f64,
    pub autocorr: AutocorrParams,
    /// Fraction of collected emission that comes from the selected transition.
    pub spin_purity: f64,
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_ex.is_finite() && self.f_ey.is_finite()) {
            return Err(Error::domain("transition frequencies must be finite"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::domain(format!("gamma = {} must be > 0", self.gamma)));
        }
        if !(self.sd_fwhm.is_finite() && self.sd_fwhm >= 0.0) {
            return Err(Error::domain(format!("sd_fwhm = {} must be >= 0", self.sd_fwhm)));
        }
        if !(0.0..=1.0).contains(&self.spin_purity) {
            return Err(Error::domain(format!(
                "spin_purity = {} must lie in [0, 1]",
                self.spin_purity
            )));
        }
        self.autocorr.validate()
    }
}

/// Two emitters feeding the two input ports of a balanced beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub emitter1: EmitterModel,
    pub emitter2: EmitterModel,
    /// Phenomenological interference amplitude ξ.
    pub xi: f64,
    /// Mean detuning f₁ − f₂ of the selected lines (Hz).
    pub delta_f0: f64,
}

impl PairConfig {
    /// Builds a pair on the Ex lines, deriving the mean detuning from the
    /// emitter centre frequencies.
    pub fn new(emitter1: EmitterModel, emitter2: EmitterModel, xi: f64) -> Result<Self> {
        let cfg = Self {
            emitter1,
            emitter2,
            xi,
            delta_f0: emitter1.f_ex - emitter2.f_ex,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter1.validate()?;
        self.emitter2.validate()?;
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::domain(format!("xi = {} must lie in [0, 1]", self.xi)));
        }
        if !self.delta_f0.is_finite() {
            return Err(Error::domain("delta_f0 must be finite"));
        }
        let implied = self.emitter1.f_ex - self.emitter2.f_ex;
        let tol = 1.0_f64.max(1e-9 * implied.abs().max(self.delta_f0.abs()));
        if (implied - self.delta_f0).abs() > tol {
            return Err(Error::domain(format!(
                "delta_f0 = {} Hz is inconsistent with f_ex1 - f_ex2 = {} Hz",
                self.delta_f0, implied
            )));
        }
        Ok(())
    }

    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        let cfg = Self { xi, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Decay rate of the product g⁽¹⁾₁₁·g⁽¹⁾₂₂.
    pub fn mean_gamma(&self) -> f64 {
        0.5 * (self.emitter1.gamma + self.emitter2.gamma)
    }

    pub fn combined_sd_fwhm(&self) -> f64 {
        self.emitter1.sd_fwhm + self.emitter2.sd_fwhm
    }
}

/// First-order coherence of a radiatively broadened emitter,
/// `exp(−γ|τ|/2)`.
pub fn g1(tau: f64, gamma: f64) -> Result<f64> {
    if !tau.is_finite() {
        return Err(Error::domain(format!("tau = {tau} must be finite")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("gamma = {gamma} must be > 0")));
    }
    Ok((-0.5 * gamma * tau.abs()).exp())
}

pub fn g2_auto(tau: f64, p: &AutocorrParams) -> Result<f64> {
    p.validate()?;
    if !tau.is_finite() {
        return Err(Error::domain(format!("tau = {tau} must be finite")));
    }
    Ok(p.eval(tau))
}

/// Average of `cos(2π(ν₁−ν₂)τ)` over two independent Lorentzian centre
/// frequency distributions. The difference of two Cauchy variables is Cauchy
/// with FWHM `fwhm1 + fwhm2`, whose characteristic function gives
/// `exp(−π·(fwhm1+fwhm2)·|τ|)`.
pub fn dephasing_envelope(tau: f64, fwhm1: f64, fwhm2: f64) -> Result<f64> {
    if !(fwhm1 >= 0.0 && fwhm2 >= 0.0 && fwhm1.is_finite() && fwhm2.is_finite()) {
        return Err(Error::domain(format!(
            "spectral-diffusion widths must be >= 0 (got {fwhm1}, {fwhm2})"
        )));
    }
    if !tau.is_finite() {
        return Err(Error::domain(format!("tau = {tau} must be finite")));
    }
    Ok((-PI * (fwhm1 + fwhm2) * tau.abs()).exp())
}

/// Normalised interference term `g₁₁⁽¹⁾g₂₂⁽¹⁾·cos(2πΔf₀τ)` with the optional
/// spectral-diffusion envelope; unchecked.
#[inline]
pub(crate) fn interference_term(tau: f64, cfg: &PairConfig, envelope_on: bool) -> f64 {
    let t = tau.abs();
    let mut v = (-cfg.mean_gamma() * t).exp() * (2.0 * PI * cfg.delta_f0 * tau).cos();
    if envelope_on {
        v *= (-PI * cfg.combined_sd_fwhm() * t).exp();
    }
    v
}

/// Cross-correlation at the two outputs of a balanced beamsplitter driven by
/// two single-photon sources:
///
/// `g(τ) = ¼g̃₁₁(τ) + ¼g̃₂₂(τ) + ½(1 − ξ·g⁽¹⁾₁₁g⁽¹⁾₂₂·cos(2πΔf₀τ))`
///
/// With `envelope_on` the cosine is additionally averaged over the
/// spectral-diffusion distributions of both lines.
pub fn g2_cross(tau: f64, cfg: &PairConfig, envelope_on: bool) -> Result<f64> {
    cfg.validate()?;
    if !tau.is_finite() {
        return Err(Error::domain(format!("tau = {tau} must be finite")));
    }
    Ok(g2_cross_unchecked(tau, cfg, envelope_on))
}

#[inline]
pub(crate) fn g2_cross_unchecked(tau: f64, cfg: &PairConfig, envelope_on: bool) -> f64 {
    0.25 * cfg.emitter1.autocorr.eval(tau)
        + 0.25 * cfg.emitter2.autocorr.eval(tau)
        + 0.5 * (1.0 - cfg.xi * interference_term(tau, cfg, envelope_on))
}

/// Raises a signal correlation `g` by uncorrelated counts; `rho_c`, `rho_d`
/// are the signal fractions of the two detectors' count rates.
pub fn with_uncorrelated_background(g: f64, rho_c: f64, rho_d: f64) -> f64 {
    let p = rho_c * rho_d;
    p * g + (1.0 - p)
}

/// Which decay contributions enter the 1/e full width of the interference
/// feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WidthConvention {
    /// Product of the first-order coherences and the dephasing envelope.
    #[default]
    IncludeRadiative,
    /// Dephasing envelope from the spectral-diffusion widths only.
    DephasingOnly,
}

/// 1/e full width of the interference feature,
/// `2 / (γ̄ + π·(fwhm1 + fwhm2))` (γ̄ dropped for [`WidthConvention::DephasingOnly`]).
pub fn interference_feature_width(cfg: &PairConfig, convention: WidthConvention) -> Result<f64> {
    cfg.validate()?;
    let gamma = match convention {
        WidthConvention::IncludeRadiative => cfg.mean_gamma(),
        WidthConvention::DephasingOnly => 0.0,
    };
    feature_width_from_rates(gamma, cfg.combined_sd_fwhm())
}

/// Same as [`interference_feature_width`] from raw rates; `gamma_bar` may be 0.
pub fn feature_width_from_rates(gamma_bar: f64, combined_fwhm: f64) -> Result<f64> {
    if gamma_bar < 0.0 || combined_fwhm < 0.0 {
        return Err(Error::domain("rates must be non-negative"));
    }
    let rate = gamma_bar + PI * combined_fwhm;
    if rate <= 0.0 {
        return Err(Error::domain(
            "all decay rates are zero: the interference feature has infinite width",
        ));
    }
    Ok(2.0 / rate)
}

/// Window of |τ| over which the local baseline of a dip is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineWindow {
    pub min_abs_tau: f64,
    pub max_abs_tau: f64,
}

impl BaselineWindow {
    pub fn new(min_abs_tau: f64, max_abs_tau: f64) -> Self {
        Self {
            min_abs_tau,
            max_abs_tau,
        }
    }
}

impl Default for BaselineWindow {
    /// 20–30 ns: past the antibunching dip, well inside the shelving bump.
    fn default() -> Self {
        Self::new(20.0 * NS, 30.0 * NS)
    }
}

/// Full width of a central dip at half depth between the value at τ = 0 and
/// the mean of the curve over the baseline window. Crossings are located by
/// linear interpolation between bracketing samples, walking outward from
/// τ = 0 on each side.
pub fn dip_fwhm(taus: &[f64], values: &[f64], baseline: BaselineWindow) -> Result<f64> {
    if taus.len() != values.len() || taus.len() < 3 {
        return Err(Error::domain("curve needs matching tau/value arrays of length >= 3"));
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("tau samples must be strictly increasing"));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (&t, &v) in taus.iter().zip(values) {
        let a = t.abs();
        if a >= baseline.min_abs_tau && a <= baseline.max_abs_tau {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::domain("baseline window contains no samples"));
    }
    let base = sum / n as f64;
    let i0 = taus
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    let y0 = values[i0];
    let depth = base - y0;
    if !(depth > 1e-9 * base.abs().max(1.0)) {
        return Err(Error::NotFound(format!(
            "no dip: value at tau=0 ({y0:.4}) is not below the baseline ({base:.4})"
        )));
    }
    let half = y0 + 0.5 * depth;
    let right = (i0 + 1..taus.len())
        .find(|&i| values[i] >= half)
        .map(|i| interpolate_crossing(taus[i - 1], values[i - 1], taus[i], values[i], half));
    let left = (0..i0)
        .rev()
        .find(|&i| values[i] >= half)
        .map(|i| interpolate_crossing(taus[i + 1], values[i + 1], taus[i], values[i], half));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::NotFound(
            "dip does not recover to half depth within the sampled range".into(),
        )),
    }
}

fn interpolate_crossing(t0: f64, y0: f64, t1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return t1;
    }
    t0 + (level - y0) * (t1 - t0) / (y1 - y0)
}

/// Symmetric τ grid `−half_span..=half_span` with the given spacing, always
/// containing τ = 0.
pub fn tau_grid(spacing: f64, half_span: f64) -> Result<Vec<f64>> {
    if !(spacing > 0.0 && half_span >= 0.0) {
        return Err(Error::domain("grid spacing must be > 0 and span >= 0"));
    }
    let n = (half_span / spacing + 1e-9).floor() as i64;
    Ok((-n..=n).map(|k| k as f64 * spacing).collect())
}

/// Default grid: 64 ps spacing over ±100 ns.
pub fn default_tau_grid() -> Vec<f64> {
    tau_grid(64.0 * PS, 100.0 * NS).expect("valid constants")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz, ns};
    use approx::assert_relative_eq;

    fn emitter(tau1: f64, sd: f64) -> EmitterModel {
        EmitterModel {
            f_ex: 0.0,
            f_ey: -mhz(2000.0),
            gamma: 1.0 / ns(12.0),
            sd_fwhm: sd,
            autocorr: AutocorrParams::two_level(tau1).unwrap(),
            spin_purity: 1.0,
        }
    }

    #[test]
    fn g1_values() {
        let gamma = 1.0 / ns(12.0);
        assert_eq!(g1(0.0, gamma).unwrap(), 1.0);
        assert_relative_eq!(g1(ns(24.0), gamma).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
        assert_eq!(g1(ns(-24.0), gamma).unwrap(), g1(ns(24.0), gamma).unwrap());
        assert!(g1(f64::NAN, gamma).is_err());
        assert!(g1(0.0, 0.0).is_err());
        assert!(g1(0.0, -1.0).is_err());
    }

    #[test]
    fn g2_auto_values() {
        let p = AutocorrParams::new(0.5, ns(8.0), ns(200.0)).unwrap();
        assert_eq!(g2_auto(0.0, &p).unwrap(), 0.0);
        let expected = 1.0 - 1.5 * (-1.0f64).exp() + 0.5 * (-0.04f64).exp();
        assert_relative_eq!(g2_auto(ns(8.0), &p).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 0.9286, epsilon = 5e-5);
        assert_relative_eq!(g2_auto(1.0, &p).unwrap(), 1.0, epsilon = 1e-12);
        assert!(AutocorrParams::new(-0.1, ns(1.0), ns(1.0)).is_err());
        assert!(AutocorrParams::new(0.0, 0.0, ns(1.0)).is_err());
        assert!(AutocorrParams::new(0.0, ns(1.0), -1.0).is_err());
    }

    #[test]
    fn envelope_values() {
        assert_eq!(dephasing_envelope(0.0, mhz(88.0), mhz(106.0)).unwrap(), 1.0);
        assert_eq!(dephasing_envelope(ns(7.0), 0.0, 0.0).unwrap(), 1.0);
        // 1/e at the half width; the full 1/e width is 2/(π·194 MHz) ≈ 3.28 ns.
        let t = 1.0 / (PI * mhz(194.0));
        assert_relative_eq!(2.0 * t / NS, 3.2813, epsilon = 1e-3);
        assert_relative_eq!(
            dephasing_envelope(2.0 * t, mhz(88.0), mhz(106.0)).unwrap(),
            (-2.0f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            dephasing_envelope(t, mhz(88.0), mhz(106.0)).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-12
        );
        assert!(dephasing_envelope(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn cross_correlation_examples() {
        let mut e1 = emitter(ns(12.0), 0.0);
        e1.f_ex = mhz(93.0);
        let e2 = emitter(ns(12.0), 0.0);
        let cfg = PairConfig::new(e1, e2, 1.0).unwrap();
        assert_eq!(g2_cross(0.0, &cfg, false).unwrap(), 0.0);
        let dist = cfg.with_xi(0.0).unwrap();
        assert_eq!(g2_cross(0.0, &dist, true).unwrap(), 0.5);

        // Independent arithmetic at τ = 3 ns.
        let auto = 1.0 - (-0.25f64).exp();
        let coh = (-0.25f64).exp();
        let phase = 2.0 * PI * 0.093 * 3.0;
        let expected = 0.25 * auto * 2.0 + 0.5 * (1.0 - coh * phase.cos());
        let got = g2_cross(ns(3.0), &cfg, false).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert_relative_eq!(got, 0.681, epsilon = 5e-4);
    }

    #[test]
    fn inconsistent_detuning_rejected() {
        let e = emitter(ns(5.0), 0.0);
        let cfg = PairConfig {
            emitter1: e,
            emitter2: e,
            xi: 0.5,
            delta_f0: mhz(93.0),
        };
        assert!(cfg.validate().is_err());
        assert!(PairConfig::new(e, e, 1.5).is_err());
    }

    #[test]
    fn feature_width_conventions() {
        let e1 = emitter(ns(5.0), mhz(88.0));
        let e2 = emitter(ns(5.0), mhz(106.0));
        let cfg = PairConfig::new(e1, e2, 1.0).unwrap();
        let with_gamma = interference_feature_width(&cfg, WidthConvention::IncludeRadiative).unwrap();
        let dephasing = interference_feature_width(&cfg, WidthConvention::DephasingOnly).unwrap();
        assert_relative_eq!(with_gamma / NS, 2.0 / (1.0 / 12.0 + PI * 0.194), max_relative = 1e-9);
        assert_relative_eq!(with_gamma / NS, 2.887, epsilon = 1e-3);
        assert_relative_eq!(dephasing / NS, 3.281, epsilon = 1e-3);

        let narrow = PairConfig::new(emitter(ns(5.0), 0.0), emitter(ns(5.0), 0.0), 1.0).unwrap();
        assert_relative_eq!(
            interference_feature_width(&narrow, WidthConvention::IncludeRadiative).unwrap(),
            ns(24.0),
            max_relative = 1e-12
        );
        assert!(interference_feature_width(&narrow, WidthConvention::DephasingOnly).is_err());
    }

    #[test]
    fn dip_width_two_level() {
        let p = AutocorrParams::two_level(ns(5.0)).unwrap();
        let taus = tau_grid(ns(0.001), ns(100.0)).unwrap();
        let ys: Vec<f64> = taus.iter().map(|&t| p.eval(t)).collect();
        let w = dip_fwhm(&taus, &ys, BaselineWindow::new(ns(60.0), ns(100.0))).unwrap();
        assert_relative_eq!(w, 2.0 * ns(5.0) * LN_2, max_relative = 1e-4);
        assert_relative_eq!(w / NS, 6.93, epsilon = 5e-3);
    }

    #[test]
    fn dip_width_flat_curve_not_found() {
        let taus = tau_grid(ns(0.1), ns(50.0)).unwrap();
        let ys = vec![1.0; taus.len()];
        assert!(matches!(
            dip_fwhm(&taus, &ys, BaselineWindow::default()),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn default_grid_shape() {
        let g = default_tau_grid();
        assert_eq!(g.len(), 2 * 1562 + 1);
        assert_eq!(g[1562], 0.0);
    }
}
