//! The g⁽²⁾∥(0) noise ledger, HOM visibility and the remote-entanglement
//! waiting time.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub label: String,
    pub delta_g2: f64,
}

/// Ordered additive contributions to g⁽²⁾∥(0) on top of `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub contributions: Vec<Contribution>,
    #[serde(default)]
    pub baseline: f64,
}

/// Beyond this, g⁽²⁾∥(0) would exceed the fully distinguishable value.
pub const DISTINGUISHABLE_BOUND: f64 = 0.5;

impl NoiseBudget {
    pub fn new(baseline: f64) -> Self {
        Self {
            contributions: Vec::new(),
            baseline,
        }
    }

    pub fn with(mut self, label: &str, delta_g2: f64) -> Self {
        self.contributions.push(Contribution {
            label: label.into(),
            delta_g2,
        });
        self
    }

    /// The three-term ledger for the two-emitter experiment: background and
    /// dark counts (80 of 1100 counts/s, 0.1402 rounded to 0.14), emission
    /// from other transitions at 94 % purity, and polarisation rotation in the
    /// fibre beamsplitter.
    pub fn reference() -> Self {
        NoiseBudget::new(0.0)
            .with("background and dark counts", 0.14)
            .with("spectral impurity", 0.13)
            .with("fibre polarisation rotation", 0.07)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline.is_finite() && self.baseline >= 0.0) {
            return Err(Error::Config(format!("budget baseline {} must be >= 0", self.baseline)));
        }
        for c in &self.contributions {
            if !(c.delta_g2.is_finite() && c.delta_g2 >= 0.0) {
                return Err(Error::Config(format!(
                    "budget entry `{}` = {} must be finite and >= 0",
                    c.label, c.delta_g2
                )));
            }
        }
        Ok(())
    }

    /// Human-readable table with a running total.
    pub fn table(&self) -> String {
        let width = self
            .contributions
            .iter()
            .map(|c| c.label.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        let mut s = String::new();
        let mut running = self.baseline;
        let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}", "term", "delta", "total");
        let _ = writeln!(s, "{:<width$}  {:>8}  {:>8.4}", "baseline", "", running);
        for c in &self.contributions {
            running += c.delta_g2;
            let _ = writeln!(s, "{:<width$}  {:>+8.4}  {:>8.4}", c.label, c.delta_g2, running);
        }
        if running > DISTINGUISHABLE_BOUND {
            let _ = writeln!(s, "warning: total exceeds the distinguishable bound {DISTINGUISHABLE_BOUND}");
        }
        s
    }
}

/// Expected g⁽²⁾∥(0): baseline plus the sum of all contributions.
pub fn compose(budget: &NoiseBudget) -> f64 {
    budget.baseline + budget.contributions.iter().map(|c| c.delta_g2).sum::<f64>()
}

/// Rise of g⁽²⁾(0) from uncorrelated counts: with noise fraction
/// `b = noise/signal` in each arm, `1 − (1 − b)² = 2b − b²`.
pub fn background_contribution(signal_total: f64, noise_total: f64) -> Result<f64> {
    if !(signal_total > 0.0 && noise_total >= 0.0 && noise_total <= signal_total) {
        return Err(Error::domain(format!(
            "need 0 <= noise ({noise_total}) <= total ({signal_total}) with total > 0"
        )));
    }
    let b = noise_total / signal_total;
    Ok(1.0 - (1.0 - b) * (1.0 - b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ImpurityMode {
    /// Reproduces the published ledger: 0.13 at 94 % purity, linear in
    /// `1 − purity` through zero.
    #[default]
    PaperLedger,
    /// Only pairs where both photons come from the selected line interfere:
    /// `1 − purity²`.
    Model,
}

const LEDGER_PURITY: f64 = 0.94;
const LEDGER_DELTA: f64 = 0.13;

pub fn spectral_impurity_contribution(purity: f64, mode: ImpurityMode) -> Result<f64> {
    if !(purity > 0.0 && purity <= 1.0) {
        return Err(Error::domain(format!("purity {purity} must lie in (0, 1]")));
    }
    Ok(match mode {
        ImpurityMode::PaperLedger => LEDGER_DELTA * (1.0 - purity) / (1.0 - LEDGER_PURITY),
        ImpurityMode::Model => 1.0 - purity * purity,
    })
}

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub value: f64,
    pub sigma: f64,
}

impl Measurement {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }
}

/// `η = 1 − g∥/g⊥` with independent first-order error propagation.
pub fn visibility(g2_perp: Measurement, g2_par: Measurement) -> Result<Measurement> {
    if !(g2_perp.value > 0.0) {
        return Err(Error::domain(format!("g2_perp(0) = {} must be > 0", g2_perp.value)));
    }
    let (p, q) = (g2_perp.value, g2_par.value);
    let value = 1.0 - q / p;
    let sigma = ((g2_par.sigma / p).powi(2) + (q * g2_perp.sigma / (p * p)).powi(2)).sqrt();
    Ok(Measurement { value, sigma })
}

/// Interference amplitude ξ that makes the parallel g⁽²⁾(0) equal `target`
/// for signal fractions `rho` in the two arms and spin purities `purity`.
/// Inverts `g∥(0) = ρ_Cρ_D·½(1 − ξ·q₁q₂) + 1 − ρ_Cρ_D`.
pub fn interference_amplitude_for_target(target: f64, rho: [f64; 2], purity: [f64; 2]) -> Result<f64> {
    let r = rho[0] * rho[1];
    let q = purity[0] * purity[1];
    if !(r > 0.0 && r <= 1.0 && q > 0.0 && q <= 1.0) {
        return Err(Error::domain("signal fractions and purities must lie in (0, 1]"));
    }
    let xi = (1.0 - 2.0 * (target - (1.0 - r)) / r) / q;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::domain(format!(
            "g2_par(0) = {target} is unreachable with these noise levels (needs xi = {xi:.3})"
        )));
    }
    Ok(xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Probability that an emitted ZPL photon is detected.
    pub collection_efficiency: f64,
    /// Entanglement attempts per second.
    pub rep_rate: f64,
    /// Observed optical linewidth (Hz).
    pub linewidth: f64,
    /// Lifetime-limited linewidth (Hz).
    pub natural_linewidth: f64,
    /// Bell-state measurement success fraction.
    pub success_prefactor: f64,
    /// Multiply by `min(1, natural/observed)` linewidth.
    #[serde(default)]
    pub overlap_penalty: bool,
}

impl RateConfig {
    /// 4×10⁻⁵ collection, 10⁸ attempts/s, 50 MHz lines, ½ prefactor.
    pub fn reference() -> Self {
        Self {
            collection_efficiency: 4e-5,
            rep_rate: 1e8,
            linewidth: 50e6,
            natural_linewidth: 1.0 / (2.0 * std::f64::consts::PI * 12e-9),
            success_prefactor: 0.5,
            overlap_penalty: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("collection_efficiency", self.collection_efficiency),
            ("rep_rate", self.rep_rate),
            ("linewidth", self.linewidth),
            ("natural_linewidth", self.natural_linewidth),
            ("success_prefactor", self.success_prefactor),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.collection_efficiency > 1.0 || self.success_prefactor > 1.0 {
            return Err(Error::Config("efficiency and success prefactor must be <= 1".into()));
        }
        Ok(())
    }

    pub fn success_probability(&self) -> f64 {
        let overlap = if self.overlap_penalty && self.linewidth > 0.0 {
            (self.natural_linewidth / self.linewidth).min(1.0)
        } else {
            1.0
        };
        self.success_prefactor * self.collection_efficiency.powi(2) * overlap
    }
}

/// Mean time to one heralded entangled pair,
/// `1/(rep_rate·prefactor·η²·overlap)`; infinite when any factor is zero.
pub fn entanglement_time(cfg: &RateConfig) -> Result<f64> {
    cfg.validate()?;
    let rate = cfg.rep_rate * cfg.success_probability();
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}
