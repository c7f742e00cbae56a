//! Run configuration files.
//!
//! One TOML (or JSON) document fully determines a run. Quantities are given
//! in lab units: ns, MHz, V, counts/s, and seconds for acquisition times.
//! Everything is converted to SI by the accessor methods here, so the rest
//! of the crate never sees lab units.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::{Contribution, ImpurityMode, Measurement, NoiseBudget, RateConfig};
use crate::error::{Error, Result};
use crate::mc::{
    collection_for_detected_rate, DetectorModel, EmissionDynamics, HbtSetup, HomSetup, PleSettings, Polarization,
    DEFAULT_IMPURITY_DETUNING,
};
use crate::model::{AutocorrParams, BaselineWindow, EmitterModel, PairConfig, WidthConvention};
use crate::stark::{Line, StarkResponse};
use crate::tcspc::{CorrelatorConfig, Normalization};
use crate::units::{mhz, ns, per_ns, to_mhz, MHZ, NS, PS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Ple,
    TuningScan,
    Hom,
    Autocorr,
    Budget,
    Rate,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Ple,
        Scenario::TuningScan,
        Scenario::Hom,
        Scenario::Autocorr,
        Scenario::Budget,
        Scenario::Rate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ple => "ple",
            Scenario::TuningScan => "tuning-scan",
            Scenario::Hom => "hom",
            Scenario::Autocorr => "autocorr",
            Scenario::Budget => "budget",
            Scenario::Rate => "rate",
        }
    }

    /// Whether the scenario draws random numbers (and so needs a seed).
    pub fn is_stochastic(self) -> bool {
        !matches!(self, Scenario::Budget | Scenario::Rate)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|x| x.name()).collect();
                Error::Config(format!("unknown scenario `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Simulated acquisition time (s) for the correlation scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emitters: Option<EmittersSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detectors: Option<DetectorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlator: Option<CorrelatorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hom: Option<HomSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorr: Option<AutocorrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ple: Option<PleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stark: Option<StarkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitterSel {
    #[default]
    Nv1,
    Nv2,
}

impl EmitterSel {
    fn key(self) -> &'static str {
        match self {
            EmitterSel::Nv1 => "nv1",
            EmitterSel::Nv2 => "nv2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmittersSection {
    pub nv1: EmitterSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv2: Option<EmitterSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub f_ex_mhz: f64,
    pub f_ey_mhz: f64,
    #[serde(default = "default_lifetime_ns")]
    pub lifetime_ns: f64,
    /// Spectral-diffusion (PLE) linewidth, FWHM.
    pub linewidth_mhz: f64,
    #[serde(default = "one")]
    pub spin_purity: f64,
    /// Explicit autocorrelation shape; otherwise derived from the dynamics
    /// section, or two-level with `tau1` = lifetime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorr: Option<AutocorrShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutocorrShape {
    pub a: f64,
    pub tau1_ns: f64,
    pub tau2_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub nv1: DynamicsEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv2: Option<DynamicsEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsEntry {
    /// Ground → excited pump rate (1/ns); 0 means a dark emitter.
    pub pump_rate_per_ns: f64,
    #[serde(default)]
    pub shelf_prob: f64,
    #[serde(default = "default_shelf_lifetime_ns")]
    pub shelf_lifetime_ns: f64,
}

/// Both detectors share these settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default)]
    pub dark_cps: f64,
    #[serde(default)]
    pub background_cps: f64,
    #[serde(default = "default_jitter_ps")]
    pub jitter_ps: f64,
    #[serde(default)]
    pub dead_time_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSection {
    #[serde(default = "default_bin_ps")]
    pub bin_ps: i64,
    #[serde(default = "default_window_ns")]
    pub window_ns: f64,
    #[serde(default)]
    pub normalization: Normalization,
    /// Odd factor by which bins are merged before fitting and plotting.
    #[serde(default = "default_rebin")]
    pub fit_rebin: usize,
}

impl Default for CorrelatorSection {
    fn default() -> Self {
        Self {
            bin_ps: default_bin_ps(),
            window_ns: default_window_ns(),
            normalization: Normalization::default(),
            fit_rebin: default_rebin(),
        }
    }
}

/// Fit and dip-width settings shared by the correlation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Only |τ| up to this enters the fit.
    #[serde(default = "default_fit_window_ns")]
    pub fit_window_ns: f64,
    #[serde(default = "default_baseline_ns")]
    pub baseline_ns: [f64; 2],
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            fit_window_ns: default_fit_window_ns(),
            baseline_ns: default_baseline_ns(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSection {
    pub polarization: Polarization,
    /// Interference amplitude of the selected lines.
    pub xi: f64,
    /// Detected signal of each emitter at each output port (counts/s).
    pub signal_cps_per_port: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing_window_ns: Option<f64>,
    #[serde(default = "default_impurity_mhz")]
    pub impurity_detuning_mhz: f64,
    #[serde(default = "default_batch_s")]
    pub batch_s: f64,
    #[serde(default)]
    pub width_convention: WidthConvention,
    #[serde(default)]
    pub analysis: AnalysisSection,
    /// Also write the click stream of the first batch as `clicks.csv`.
    #[serde(default)]
    pub save_clicks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutocorrSection {
    #[serde(default)]
    pub emitter: EmitterSel,
    /// Detected signal at each detector (counts/s).
    pub signal_cps_per_port: f64,
    #[serde(default = "default_batch_s")]
    pub batch_s: f64,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub save_clicks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PleSection {
    #[serde(default)]
    pub emitter: EmitterSel,
    pub scan_start_mhz: f64,
    pub scan_stop_mhz: f64,
    pub scan_step_mhz: f64,
    pub dwell_ms: f64,
    #[serde(default)]
    pub init_pulse_us: f64,
    pub peak_cps: f64,
    #[serde(default)]
    pub background_cps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkSection {
    /// Axial field per volt ((MV/m)/V).
    pub field_per_volt_par: f64,
    #[serde(default)]
    pub field_per_volt_perp: f64,
    /// Common-mode shift (MHz per MV/m).
    pub d_parallel_mhz: f64,
    #[serde(default)]
    pub d_perp_mhz: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// NV1 line that is tuned onto the NV2 Ex line.
    #[serde(default)]
    pub line: Line,
    /// Gate voltages of the scan.
    pub voltages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default)]
    pub baseline: f64,
    #[serde(default)]
    pub entries: Vec<Contribution>,
    /// Terms recomputed from count rates and purity, for comparison with
    /// `entries`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<MeasuredG2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedBudget {
    pub total_cps: f64,
    pub noise_cps: f64,
    pub spin_purity: f64,
    #[serde(default)]
    pub impurity_mode: ImpurityMode,
    #[serde(default)]
    pub polarization_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredG2 {
    pub g2_perp: f64,
    pub g2_perp_sigma: f64,
    pub g2_par: f64,
    pub g2_par_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub collection_efficiency: f64,
    pub rep_rate_hz: f64,
    pub linewidth_mhz: f64,
    /// Defaults to the lifetime limit `1/(2π·lifetime)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub natural_linewidth_mhz: Option<f64>,
    #[serde(default = "default_lifetime_ns")]
    pub lifetime_ns: f64,
    #[serde(default = "half")]
    pub success_prefactor: f64,
    #[serde(default)]
    pub overlap_penalty: bool,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_lifetime_ns() -> f64 {
    12.0
}
fn default_shelf_lifetime_ns() -> f64 {
    250.0
}
fn default_jitter_ps() -> f64 {
    crate::mc::DEFAULT_JITTER_SIGMA / PS
}
fn default_bin_ps() -> i64 {
    64
}
fn default_window_ns() -> f64 {
    100.0
}
fn default_rebin() -> usize {
    1
}
fn default_fit_window_ns() -> f64 {
    60.0
}
fn default_baseline_ns() -> [f64; 2] {
    [20.0, 30.0]
}
fn default_impurity_mhz() -> f64 {
    DEFAULT_IMPURITY_DETUNING / MHZ
}
fn default_batch_s() -> f64 {
    crate::mc::DEFAULT_BATCH_DURATION
}

fn missing(field: &str, scenario: Scenario) -> Error {
    Error::Config(format!("missing field `{field}` (required for scenario `{scenario}`)"))
}

/// Re-labels any error from building a section as a configuration error
/// naming the section.
fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) | Error::Domain(m) | Error::Range(m) | Error::Validity(m) => {
            Error::Config(format!("[{section}]: {m}"))
        }
        other => other,
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` = {v} must be finite and > 0")))
    }
}

impl RunConfig {
    /// Minimal config for `scenario`; sections still have to be filled in.
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            description: None,
            seed: None,
            duration_s: None,
            output_dir: None,
            emitters: None,
            dynamics: None,
            detectors: None,
            correlator: None,
            hom: None,
            autocorr: None,
            ple: None,
            stark: None,
            budget: None,
            rate: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("{e}")))
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises to JSON")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| missing("seed", self.scenario))
    }

    /// Acquisition time in seconds.
    pub fn duration(&self) -> Result<f64> {
        let d = self.duration_s.ok_or_else(|| missing("duration_s", self.scenario))?;
        positive("duration_s", d)?;
        Ok(d)
    }

    /// Checks that every section the scenario needs is present and that all
    /// present sections convert to valid physical parameters.
    pub fn validate(&self) -> Result<()> {
        let s = self.scenario;
        if s.is_stochastic() {
            self.seed()?;
        }
        match s {
            Scenario::Ple => {
                let ple = self.ple.as_ref().ok_or_else(|| missing("ple", s))?;
                self.emitter(ple.emitter)?;
            }
            Scenario::TuningScan => {
                self.ple.as_ref().ok_or_else(|| missing("ple", s))?;
                self.stark.as_ref().ok_or_else(|| missing("stark", s))?;
                self.pair_emitters()?;
            }
            Scenario::Hom => {
                self.duration()?;
                self.hom.as_ref().ok_or_else(|| missing("hom", s))?;
                self.hom_setup()?;
            }
            Scenario::Autocorr => {
                self.duration()?;
                self.autocorr.as_ref().ok_or_else(|| missing("autocorr", s))?;
                self.hbt_setup()?;
            }
            Scenario::Budget => {
                self.budget.as_ref().ok_or_else(|| missing("budget", s))?;
            }
            Scenario::Rate => {
                self.rate.as_ref().ok_or_else(|| missing("rate", s))?;
            }
        }
        // Sections present but unused by the scenario must still be valid.
        if self.ple.is_some() {
            self.ple_settings()?;
            self.ple_scan()?;
        }
        if self.stark.is_some() {
            self.stark_response()?;
        }
        if self.correlator.is_some() {
            self.correlator()?;
        }
        if self.detectors.is_some() {
            self.detector()?;
        }
        if self.budget.is_some() {
            self.noise_budget()?;
            self.measured()?;
        }
        if self.rate.is_some() {
            self.rate_config()?;
        }
        if let Some(e) = &self.emitters {
            self.emitter(EmitterSel::Nv1)?;
            if e.nv2.is_some() {
                self.emitter(EmitterSel::Nv2)?;
            }
        }
        Ok(())
    }

    fn emitter_section(&self, which: EmitterSel) -> Result<&EmitterSection> {
        let e = self.emitters.as_ref().ok_or_else(|| missing("emitters", self.scenario))?;
        match which {
            EmitterSel::Nv1 => Ok(&e.nv1),
            EmitterSel::Nv2 => e.nv2.as_ref().ok_or_else(|| missing("emitters.nv2", self.scenario)),
        }
    }

    fn dynamics_entry(&self, which: EmitterSel) -> Result<Option<&DynamicsEntry>> {
        Ok(match (&self.dynamics, which) {
            (None, _) => None,
            (Some(d), EmitterSel::Nv1) => Some(&d.nv1),
            (Some(d), EmitterSel::Nv2) => d.nv2.as_ref(),
        })
    }

    /// Emitter in SI units.
    pub fn emitter(&self, which: EmitterSel) -> Result<EmitterModel> {
        let sec = format!("emitters.{}", which.key());
        let e = self.emitter_section(which)?;
        in_section(&sec, positive("lifetime_ns", e.lifetime_ns))?;
        let gamma = 1.0 / ns(e.lifetime_ns);
        let autocorr = match (e.autocorr, self.dynamics_entry(which)?) {
            (Some(a), _) => in_section(&sec, AutocorrParams::new(a.a, ns(a.tau1_ns), ns(a.tau2_ns)))?,
            (None, Some(_)) => {
                let d = self.dynamics(which)?;
                if d.is_dark() {
                    in_section(&sec, AutocorrParams::two_level(ns(e.lifetime_ns)))?
                } else {
                    in_section(&format!("dynamics.{}", which.key()), d.autocorr_params())?
                }
            }
            (None, None) => in_section(&sec, AutocorrParams::two_level(ns(e.lifetime_ns)))?,
        };
        let em = EmitterModel {
            f_ex: mhz(e.f_ex_mhz),
            f_ey: mhz(e.f_ey_mhz),
            gamma,
            sd_fwhm: mhz(e.linewidth_mhz),
            autocorr,
            spin_purity: e.spin_purity,
        };
        in_section(&sec, em.validate())?;
        Ok(em)
    }

    pub fn dynamics(&self, which: EmitterSel) -> Result<EmissionDynamics> {
        let key = format!("dynamics.{}", which.key());
        let d = self
            .dynamics_entry(which)?
            .ok_or_else(|| missing(&key, self.scenario))?;
        let e = self.emitter_section(which)?;
        in_section(&key, positive("lifetime_ns", e.lifetime_ns))?;
        let dy = EmissionDynamics {
            pump_rate: per_ns(d.pump_rate_per_ns),
            gamma: 1.0 / ns(e.lifetime_ns),
            shelf_prob: d.shelf_prob,
            shelf_lifetime: ns(d.shelf_lifetime_ns),
        };
        in_section(&key, dy.validate())?;
        Ok(dy)
    }

    /// Both emitters with the interference amplitude of the `hom` section
    /// (0 if there is none).
    pub fn pair_emitters(&self) -> Result<PairConfig> {
        let xi = self.hom.as_ref().map_or(0.0, |h| h.xi);
        let e1 = self.emitter(EmitterSel::Nv1)?;
        let e2 = self.emitter(EmitterSel::Nv2)?;
        in_section("hom", PairConfig::new(e1, e2, xi))
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        let d = self.detectors.as_ref().ok_or_else(|| missing("detectors", self.scenario))?;
        let det = DetectorModel {
            efficiency: d.efficiency,
            dark_rate: d.dark_cps,
            background_rate: d.background_cps,
            jitter_sigma: d.jitter_ps * PS,
            dead_time: ns(d.dead_time_ns),
        };
        in_section("detectors", det.validate())?;
        Ok(det)
    }

    pub fn correlator(&self) -> Result<CorrelatorConfig> {
        let c = self.correlator.unwrap_or_default();
        let cfg = CorrelatorConfig {
            bin_width: c.bin_ps as f64 * PS,
            window: ns(c.window_ns),
            normalization: c.normalization,
        };
        in_section("correlator", cfg.validate())?;
        if c.fit_rebin.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "[correlator]: fit_rebin = {} must be odd so that τ = 0 stays a bin centre",
                c.fit_rebin
            )));
        }
        Ok(cfg)
    }

    pub fn fit_rebin(&self) -> usize {
        self.correlator.unwrap_or_default().fit_rebin
    }

    /// Pair, dynamics and beamsplitter setup of the `hom` scenario.
    pub fn hom_setup(&self) -> Result<(PairConfig, [EmissionDynamics; 2], HomSetup)> {
        let h = self.hom.as_ref().ok_or_else(|| missing("hom", self.scenario))?;
        let pair = self.pair_emitters()?;
        let d1 = self.dynamics(EmitterSel::Nv1)?;
        let d2 = self.dynamics(EmitterSel::Nv2)?;
        let det = self.detector()?;
        in_section("hom", positive("signal_cps_per_port", h.signal_cps_per_port))?;
        in_section("hom", positive("batch_s", h.batch_s))?;
        self.correlator()?;
        analysis_check("hom.analysis", &h.analysis)?;
        let c1 = in_section("hom", collection_for_detected_rate(&d1, h.signal_cps_per_port, det.efficiency))?;
        let c2 = in_section("hom", collection_for_detected_rate(&d2, h.signal_cps_per_port, det.efficiency))?;
        let mut setup = HomSetup::new([c1, c2], [det, det]);
        setup.pairing_window = h.pairing_window_ns.map(ns);
        setup.impurity_detuning = mhz(h.impurity_detuning_mhz);
        in_section("hom", setup.validate())?;
        Ok((pair, [d1, d2], setup))
    }

    /// Emitter, dynamics and splitter setup of the `autocorr` scenario.
    pub fn hbt_setup(&self) -> Result<(EmitterModel, EmissionDynamics, HbtSetup)> {
        let a = self.autocorr.as_ref().ok_or_else(|| missing("autocorr", self.scenario))?;
        let em = self.emitter(a.emitter)?;
        let dy = self.dynamics(a.emitter)?;
        let det = self.detector()?;
        in_section("autocorr", positive("signal_cps_per_port", a.signal_cps_per_port))?;
        in_section("autocorr", positive("batch_s", a.batch_s))?;
        self.correlator()?;
        analysis_check("autocorr.analysis", &a.analysis)?;
        let c = in_section("autocorr", collection_for_detected_rate(&dy, a.signal_cps_per_port, det.efficiency))?;
        Ok((
            em,
            dy,
            HbtSetup {
                collection: c,
                detectors: [det, det],
            },
        ))
    }

    pub fn ple_settings(&self) -> Result<PleSettings> {
        let p = self.ple.as_ref().ok_or_else(|| missing("ple", self.scenario))?;
        let s = PleSettings {
            init_pulse: p.init_pulse_us * 1e-6,
            dwell: p.dwell_ms * 1e-3,
            peak_rate: p.peak_cps,
            background_rate: p.background_cps,
        };
        in_section("ple", s.validate())?;
        Ok(s)
    }

    /// Laser frequencies (Hz) from start to stop inclusive.
    pub fn ple_scan(&self) -> Result<Vec<f64>> {
        let p = self.ple.as_ref().ok_or_else(|| missing("ple", self.scenario))?;
        in_section("ple", positive("scan_step_mhz", p.scan_step_mhz))?;
        let span = p.scan_stop_mhz - p.scan_start_mhz;
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::Config("[ple]: scan_stop_mhz must exceed scan_start_mhz".into()));
        }
        let n = (span / p.scan_step_mhz + 1e-9).floor() as usize + 1;
        if !(5..=1_000_000).contains(&n) {
            return Err(Error::Config(format!("[ple]: scan has {n} points; need 5 to 10^6")));
        }
        Ok((0..n).map(|i| mhz(p.scan_start_mhz + i as f64 * p.scan_step_mhz)).collect())
    }

    pub fn stark_response(&self) -> Result<StarkResponse> {
        let s = self.stark.as_ref().ok_or_else(|| missing("stark", self.scenario))?;
        let r = StarkResponse {
            field_per_volt_par: s.field_per_volt_par,
            field_per_volt_perp: s.field_per_volt_perp,
            d_parallel: mhz(s.d_parallel_mhz),
            d_perp: mhz(s.d_perp_mhz),
            v_range: (s.v_min, s.v_max),
        };
        in_section("stark", r.validate())?;
        if s.voltages.is_empty() {
            return Err(Error::Config("[stark]: `voltages` is empty".into()));
        }
        if let Some(v) = s.voltages.iter().find(|v| !(s.v_min..=s.v_max).contains(*v)) {
            return Err(Error::Config(format!(
                "[stark]: voltage {v} V lies outside [{}, {}] V",
                s.v_min, s.v_max
            )));
        }
        Ok(r)
    }

    pub fn noise_budget(&self) -> Result<NoiseBudget> {
        let b = self.budget.as_ref().ok_or_else(|| missing("budget", self.scenario))?;
        let nb = NoiseBudget {
            contributions: b.entries.clone(),
            baseline: b.baseline,
        };
        in_section("budget", nb.validate())?;
        Ok(nb)
    }

    /// Measured (g⊥(0), g∥(0)) pair for a visibility estimate, if given.
    pub fn measured(&self) -> Result<Option<(Measurement, Measurement)>> {
        let Some(m) = self.budget.as_ref().and_then(|b| b.measured) else {
            return Ok(None);
        };
        for (name, v) in [("g2_perp_sigma", m.g2_perp_sigma), ("g2_par_sigma", m.g2_par_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("[budget.measured]: `{name}` = {v} must be >= 0")));
            }
        }
        in_section("budget.measured", positive("g2_perp", m.g2_perp))?;
        Ok(Some((
            Measurement::new(m.g2_perp, m.g2_perp_sigma),
            Measurement::new(m.g2_par, m.g2_par_sigma),
        )))
    }

    pub fn rate_config(&self) -> Result<RateConfig> {
        let r = self.rate.as_ref().ok_or_else(|| missing("rate", self.scenario))?;
        in_section("rate", positive("lifetime_ns", r.lifetime_ns))?;
        let natural = match r.natural_linewidth_mhz {
            Some(f) => mhz(f),
            None => 1.0 / (2.0 * std::f64::consts::PI * ns(r.lifetime_ns)),
        };
        let cfg = RateConfig {
            collection_efficiency: r.collection_efficiency,
            rep_rate: r.rep_rate_hz,
            linewidth: mhz(r.linewidth_mhz),
            natural_linewidth: natural,
            success_prefactor: r.success_prefactor,
            overlap_penalty: r.overlap_penalty,
        };
        in_section("rate", cfg.validate())?;
        Ok(cfg)
    }
}

fn analysis_check(section: &str, a: &AnalysisSection) -> Result<()> {
    in_section(section, positive("fit_window_ns", a.fit_window_ns))?;
    let [lo, hi] = a.baseline_ns;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(Error::Config(format!("[{section}]: baseline_ns = [{lo}, {hi}] is not an interval")));
    }
    Ok(())
}

impl AnalysisSection {
    pub fn baseline(&self) -> BaselineWindow {
        BaselineWindow::new(self.baseline_ns[0] * NS, self.baseline_ns[1] * NS)
    }

    pub fn fit_window(&self) -> f64 {
        ns(self.fit_window_ns)
    }
}

impl EmitterSection {
    /// Lab-unit description of an emitter model (inverse of
    /// [`RunConfig::emitter`] when the autocorrelation is explicit).
    pub fn from_model(em: &EmitterModel) -> Self {
        Self {
            f_ex_mhz: to_mhz(em.f_ex),
            f_ey_mhz: to_mhz(em.f_ey),
            lifetime_ns: 1.0 / em.gamma / NS,
            linewidth_mhz: to_mhz(em.sd_fwhm),
            spin_purity: em.spin_purity,
            autocorr: Some(AutocorrShape {
                a: em.autocorr.a,
                tau1_ns: em.autocorr.tau1 / NS,
                tau2_ns: em.autocorr.tau2 / NS,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOM: &str = r#"
scenario = "hom"
seed = 3
duration_s = 20.0

[emitters.nv1]
f_ex_mhz = 93.0
f_ey_mhz = 3093.0
linewidth_mhz = 88.0

[emitters.nv2]
f_ex_mhz = 0.0
f_ey_mhz = 3000.0
linewidth_mhz = 106.0

[dynamics.nv1]
pump_rate_per_ns = 0.06
shelf_prob = 0.12

[dynamics.nv2]
pump_rate_per_ns = 0.05

[detectors]
efficiency = 0.6
dark_cps = 50.0

[hom]
polarization = "parallel"
xi = 0.6
signal_cps_per_port = 1000.0
"#;

    #[test]
    fn parses_and_converts_units() {
        let c = RunConfig::from_toml_str(HOM).unwrap();
        c.validate().unwrap();
        let e = c.emitter(EmitterSel::Nv1).unwrap();
        assert_eq!(e.f_ex, 93e6);
        assert!((e.gamma - 1.0 / 12e-9).abs() < 1.0);
        let d = c.dynamics(EmitterSel::Nv1).unwrap();
        assert!((d.pump_rate - 0.06e9).abs() < 1e-3);
        assert!((d.shelf_lifetime - 250e-9).abs() < 1e-18);
        let det = c.detector().unwrap();
        assert!((det.jitter_sigma - 50e-12).abs() < 1e-20);
        assert_eq!(c.correlator().unwrap(), CorrelatorConfig::default());
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = HOM.replace("seed = 3\n", "");
        let c = RunConfig::from_toml_str(&text).unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("`seed`") && err.contains("hom"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let text = HOM.replace("dark_cps = 50.0", "dark_cps = 50.0\ndarkcps = 1.0");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("darkcps") && err.contains("line"), "{err}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        let text = HOM.replace("efficiency = 0.6", "efficiency = 1.6");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("detectors")));
        let text = HOM.replace("duration_s = 20.0\n", "");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("duration_s")));
    }

    #[test]
    fn toml_and_json_round_trip() {
        let c = RunConfig::from_toml_str(HOM).unwrap();
        let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, back);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json_str(&json).unwrap(), c);
    }

    #[test]
    fn budget_needs_no_seed() {
        let c = RunConfig::from_toml_str("scenario = \"budget\"\n[budget]\nentries = []\n").unwrap();
        c.validate().unwrap();
        assert!("nope".parse::<Scenario>().is_err());
        assert_eq!("tuning-scan".parse::<Scenario>().unwrap(), Scenario::TuningScan);
    }
}
