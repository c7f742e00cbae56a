//! Built-in run configurations that reproduce the headline numbers of the
//! two-emitter experiment.
//!
//! Every preset is an ordinary [`RunConfig`]; `homsim presets --show NAME`
//! prints it as TOML for editing.

use crate::budget::{interference_amplitude_for_target, ImpurityMode, NoiseBudget, RateConfig};
use crate::config::*;
use crate::error::{Error, Result};
use crate::mc::Polarization;
use crate::model::WidthConvention;
use crate::stark::{Line, StarkResponse};
use crate::tcspc::Normalization;
use crate::units::to_mhz;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Published values the preset is meant to reproduce.
    pub anchors: &'static [&'static str],
    pub config: RunConfig,
}

/// Total detected rate of each emitter at each beamsplitter output.
pub const HOM_TOTAL_CPS: f64 = 1100.0;
/// Part of [`HOM_TOTAL_CPS`] that is detector dark counts and background.
pub const HOM_NOISE_CPS: f64 = 80.0;
/// Expected g⁽²⁾∥(0) of the noise ledger, used to set ξ.
pub const HOM_TARGET_G2_PAR: f64 = 0.34;
pub const SPIN_PURITY: f64 = 0.94;
/// Three days of acquisition.
pub const HOM_DURATION_S: f64 = 3.0 * 86_400.0;

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "paper-fig2",
            summary: "Stark tuning of NV1 across NV2: stacked PLE scans from -30 V to +50 V",
            anchors: &[
                "NV1 starts 270 MHz above NV2; resonance near -2.9 V",
                "line widths 85 MHz (NV1) and 217 MHz (NV2)",
                "0.5 MV/m at 50 V",
            ],
            config: fig2(),
        },
        Preset {
            name: "paper-ple",
            summary: "Single PLE line of NV1 with an 88 MHz spectral-diffusion width",
            anchors: &["NV1 88 MHz, NV2 106 MHz, 93 MHz apart after tuning"],
            config: ple(),
        },
        Preset {
            name: "paper-fig3a",
            summary: "Sideband autocorrelation of NV1",
            anchors: &["antibunching dip FWHM 7.5 ± 0.1 ns"],
            config: autocorr(0.0832),
        },
        Preset {
            name: "paper-fig3b",
            summary: "Sideband autocorrelation of NV2",
            anchors: &["antibunching dip FWHM 9.5 ± 0.2 ns"],
            config: autocorr(0.0483),
        },
        Preset {
            name: "paper-fig3c",
            summary: "Two-photon interference, crossed polarisations (distinguishable)",
            anchors: &["g2_perp(0) = 0.54 ± 0.04", "dip FWHM 9.2 ± 0.4 ns"],
            config: hom(Polarization::Perpendicular),
        },
        Preset {
            name: "paper-fig3d",
            summary: "Two-photon interference, parallel polarisations (indistinguishable)",
            anchors: &["g2_par(0) = 0.35 ± 0.04", "dip FWHM 5.6 ± 0.3 ns"],
            config: hom(Polarization::Parallel),
        },
        Preset {
            name: "paper-budget",
            summary: "g2_par(0) noise ledger and HOM visibility",
            anchors: &[
                "0.14 background + 0.13 impurity + 0.07 polarisation = 0.34",
                "visibility 35 ± 9 %",
            ],
            config: budget(),
        },
        Preset {
            name: "paper-rate",
            summary: "Waiting time for one heralded remote-entanglement event",
            anchors: &["roughly ten seconds per event"],
            config: rate(),
        },
    ]
}

pub fn names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name).collect()
}

/// Looks a preset up by name. With a scenario, `NAME-SCENARIO` is tried as
/// well, so `--preset paper` works for `run budget`.
pub fn find(name: &str, scenario: Option<Scenario>) -> Result<Preset> {
    let all = presets();
    let mut candidates = vec![name.to_string()];
    if let Some(s) = scenario {
        candidates.push(format!("{name}-{s}"));
    }
    for c in &candidates {
        if let Some(p) = all.iter().find(|p| p.name == c) {
            if let Some(s) = scenario {
                if p.config.scenario != s {
                    return Err(Error::Config(format!(
                        "preset `{}` is a `{}` scenario, not `{s}`",
                        p.name, p.config.scenario
                    )));
                }
            }
            return Ok(p.clone());
        }
    }
    Err(Error::Config(format!(
        "unknown preset `{name}`; available: {}",
        names().join(", ")
    )))
}

fn emitter(f_ex_mhz: f64, linewidth_mhz: f64) -> EmitterSection {
    EmitterSection {
        f_ex_mhz,
        f_ey_mhz: f_ex_mhz + 3000.0,
        lifetime_ns: 12.0,
        linewidth_mhz,
        spin_purity: SPIN_PURITY,
        autocorr: None,
    }
}

fn dynamics(pump: f64) -> DynamicsEntry {
    DynamicsEntry {
        pump_rate_per_ns: pump,
        shelf_prob: 0.12,
        shelf_lifetime_ns: 250.0,
    }
}

fn ple_section(start: f64, stop: f64, step: f64) -> PleSection {
    PleSection {
        emitter: EmitterSel::Nv1,
        scan_start_mhz: start,
        scan_stop_mhz: stop,
        scan_step_mhz: step,
        dwell_ms: 10.0,
        init_pulse_us: 5.0,
        peak_cps: 10_000.0,
        background_cps: 200.0,
    }
}

fn fig2() -> RunConfig {
    let r = StarkResponse::calibrated();
    let mut c = RunConfig::new(Scenario::TuningScan);
    c.description = Some("NV1 Ex tuned through NV2 Ex with the calibrated axial Stark response".into());
    c.seed = Some(2);
    c.emitters = Some(EmittersSection {
        nv1: emitter(270.0, 85.0),
        nv2: Some(emitter(0.0, 217.0)),
    });
    c.ple = Some(ple_section(-3000.0, 5000.0, 10.0));
    c.stark = Some(StarkSection {
        field_per_volt_par: r.field_per_volt_par,
        field_per_volt_perp: r.field_per_volt_perp,
        d_parallel_mhz: to_mhz(r.d_parallel),
        d_perp_mhz: to_mhz(r.d_perp),
        v_min: r.v_range.0,
        v_max: r.v_range.1,
        line: Line::Ex,
        voltages: vec![-30.0, -20.0, -10.0, -2.9, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
    });
    c
}

fn ple() -> RunConfig {
    let mut c = RunConfig::new(Scenario::Ple);
    c.seed = Some(4);
    c.emitters = Some(EmittersSection {
        nv1: emitter(93.0, 88.0),
        nv2: None,
    });
    c.ple = Some(ple_section(-500.0, 700.0, 5.0));
    c
}

fn hbt_detectors() -> DetectorSection {
    DetectorSection {
        efficiency: 0.65,
        dark_cps: 50.0,
        background_cps: 0.0,
        jitter_ps: 50.0,
        dead_time_ns: 22.0,
    }
}

fn autocorr(pump: f64) -> RunConfig {
    let mut c = RunConfig::new(Scenario::Autocorr);
    c.seed = Some(5);
    c.duration_s = Some(4.0 * 3600.0);
    c.emitters = Some(EmittersSection {
        nv1: emitter(0.0, 100.0),
        nv2: None,
    });
    c.dynamics = Some(DynamicsSection {
        nv1: dynamics(pump),
        nv2: None,
    });
    c.detectors = Some(hbt_detectors());
    c.correlator = Some(CorrelatorSection {
        bin_ps: 64,
        window_ns: 100.0,
        normalization: Normalization::RateProduct,
        fit_rebin: 5,
    });
    c.autocorr = Some(AutocorrSection {
        emitter: EmitterSel::Nv1,
        signal_cps_per_port: 5000.0,
        batch_s: 10.0,
        analysis: AnalysisSection::default(),
        save_clicks: false,
    });
    c
}

/// Noise fraction per arm and the ξ that puts the ledger total at
/// [`HOM_TARGET_G2_PAR`].
pub fn hom_xi() -> f64 {
    let rho = (HOM_TOTAL_CPS - HOM_NOISE_CPS) / HOM_TOTAL_CPS;
    interference_amplitude_for_target(HOM_TARGET_G2_PAR, [rho; 2], [SPIN_PURITY; 2])
        .expect("ledger target is reachable")
}

fn hom(pol: Polarization) -> RunConfig {
    let mut c = RunConfig::new(Scenario::Hom);
    c.description = Some(format!(
        "{} polarisations; {} counts/s per emitter per port of which {} are noise",
        match pol {
            Polarization::Parallel => "parallel",
            Polarization::Perpendicular => "crossed",
        },
        HOM_TOTAL_CPS,
        HOM_NOISE_CPS
    ));
    c.seed = Some(1);
    c.duration_s = Some(HOM_DURATION_S);
    c.emitters = Some(EmittersSection {
        nv1: emitter(93.0, 88.0),
        nv2: Some(emitter(0.0, 106.0)),
    });
    c.dynamics = Some(DynamicsSection {
        nv1: dynamics(0.06),
        nv2: Some(dynamics(0.05)),
    });
    // Each detector sees the noise of both input arms: 2 × 80 counts/s.
    c.detectors = Some(DetectorSection {
        efficiency: 0.65,
        dark_cps: 50.0,
        background_cps: 2.0 * HOM_NOISE_CPS - 50.0,
        jitter_ps: 50.0,
        dead_time_ns: 22.0,
    });
    c.correlator = Some(CorrelatorSection {
        bin_ps: 64,
        window_ns: 100.0,
        normalization: Normalization::RateProduct,
        fit_rebin: 15,
    });
    c.hom = Some(HomSection {
        polarization: pol,
        xi: hom_xi(),
        signal_cps_per_port: HOM_TOTAL_CPS - HOM_NOISE_CPS,
        pairing_window_ns: None,
        impurity_detuning_mhz: 3000.0,
        batch_s: 10.0,
        width_convention: WidthConvention::IncludeRadiative,
        analysis: AnalysisSection::default(),
        save_clicks: false,
    });
    c
}

fn budget() -> RunConfig {
    let mut c = RunConfig::new(Scenario::Budget);
    let b = NoiseBudget::reference();
    c.budget = Some(BudgetSection {
        baseline: b.baseline,
        entries: b.contributions.clone(),
        derived: Some(DerivedBudget {
            total_cps: HOM_TOTAL_CPS,
            noise_cps: HOM_NOISE_CPS,
            spin_purity: SPIN_PURITY,
            impurity_mode: ImpurityMode::PaperLedger,
            polarization_delta: 0.07,
        }),
        measured: Some(MeasuredG2 {
            g2_perp: 0.54,
            g2_perp_sigma: 0.04,
            g2_par: 0.35,
            g2_par_sigma: 0.04,
        }),
    });
    c
}

fn rate() -> RunConfig {
    let r = RateConfig::reference();
    let mut c = RunConfig::new(Scenario::Rate);
    c.rate = Some(RateSection {
        collection_efficiency: r.collection_efficiency,
        rep_rate_hz: r.rep_rate,
        linewidth_mhz: to_mhz(r.linewidth),
        natural_linewidth_mhz: None,
        lifetime_ns: 12.0,
        success_prefactor: r.success_prefactor,
        overlap_penalty: r.overlap_penalty,
    });
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate_and_round_trip() {
        let all = presets();
        assert!(all.len() >= 6);
        for p in all {
            p.config.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            let toml = p.config.to_toml_string().unwrap();
            assert_eq!(RunConfig::from_toml_str(&toml).unwrap(), p.config, "{}", p.name);
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(find("paper", Some(Scenario::Budget)).unwrap().name, "paper-budget");
        assert_eq!(find("paper-fig3d", Some(Scenario::Hom)).unwrap().name, "paper-fig3d");
        assert!(find("paper-fig3d", Some(Scenario::Budget)).is_err());
        assert!(find("nope", None).is_err());
    }

    #[test]
    fn hom_xi_matches_ledger() {
        assert!((hom_xi() - 0.6057).abs() < 1e-3);
    }

    #[test]
    fn rate_preset_is_lifetime_limited() {
        let c = find("paper-rate", None).unwrap().config;
        assert_eq!(c.rate_config().unwrap(), RateConfig::reference());
    }
}
