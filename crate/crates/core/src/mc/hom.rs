//! Two-photon interference at a balanced fibre beamsplitter, simulated pair
//! by pair.
//!
//! Photons from the two emitters are merged in time. A photon followed
//! within the pairing window by a photon from the other emitter forms a
//! pair that leaves through different ports with probability
//! `½[1 − ξ_eff·e^{−γ̄|Δt|}·cos(2π(ν₁−ν₂)Δt)]` and through a common,
//! uniformly chosen port otherwise. All other photons pick a port with
//! probability ½. Averaged over the pair statistics this reproduces the
//! two-source cross-correlation of [`crate::model::g2_cross`] as long as
//! photon overlaps within a window are rare, which is checked up front.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dynamics::{CollectedStreamSampler, Spectral};
use super::{
    rng_for, Click, ClickStream, Detector, DetectorModel, EmissionDynamics, EmitterId,
    PhotonRecord, Provenance, DEFAULT_IMPURITY_DETUNING,
};
use crate::error::{Error, Result};
use crate::model::{
    g2_cross_unchecked, interference_feature_width, with_uncorrelated_background, EmitterModel,
    PairConfig, WidthConvention,
};
use crate::tcspc::{correlate, CorrelationHistogram, CorrelatorConfig};
use crate::units::{to_ps, PS};

/// Length of the independently simulated segments of a long acquisition.
pub const DEFAULT_BATCH_DURATION: f64 = 10.0;

/// Largest accepted expected number of photons arriving within one pairing
/// window.
pub const DEFAULT_MAX_OVERLAP: f64 = 0.01;

/// Half-wave-plate setting at the beamsplitter input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    #[default]
    Parallel,
    /// Orthogonal polarisations: photons are distinguishable, ξ_eff = 0.
    Perpendicular,
}

/// Optical path from the two emitters to the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomSetup {
    /// Probability that an emitted photon reaches its beamsplitter input.
    pub collection: [f64; 2],
    /// Detectors on output ports C and D.
    pub detectors: [DetectorModel; 2],
    /// Pair-matching window (s); defaults to five interference widths.
    pub pairing_window: Option<f64>,
    /// Frequency offset assigned to photons from non-selected transitions.
    pub impurity_detuning: f64,
    pub max_overlap: f64,
}

impl HomSetup {
    pub fn new(collection: [f64; 2], detectors: [DetectorModel; 2]) -> Self {
        Self {
            collection,
            detectors,
            pairing_window: None,
            impurity_detuning: DEFAULT_IMPURITY_DETUNING,
            max_overlap: DEFAULT_MAX_OVERLAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &c) in self.collection.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!(
                    "collection efficiency of emitter {} = {c} must lie in [0, 1]",
                    i + 1
                )));
            }
        }
        for d in &self.detectors {
            d.validate()?;
        }
        if let Some(w) = self.pairing_window {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("pairing window {w} must be > 0")));
            }
        }
        if !(self.max_overlap > 0.0) {
            return Err(Error::Config("max_overlap must be > 0".into()));
        }
        Ok(())
    }

    pub fn pairing_window_for(&self, cfg: &PairConfig) -> Result<f64> {
        match self.pairing_window {
            Some(w) => Ok(w),
            None => Ok(5.0 * interference_feature_width(cfg, WidthConvention::IncludeRadiative)?),
        }
    }
}

/// Single-emitter Hanbury Brown–Twiss arrangement (PSB light on a 50:50
/// splitter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtSetup {
    pub collection: f64,
    pub detectors: [DetectorModel; 2],
}

/// Collection efficiency giving `detected_per_port` signal counts/s from one
/// emitter at each output port.
pub fn collection_for_detected_rate(
    dyn_: &EmissionDynamics,
    detected_per_port: f64,
    detector_efficiency: f64,
) -> Result<f64> {
    dyn_.validate()?;
    if !(detected_per_port > 0.0) || !(detector_efficiency > 0.0) || dyn_.is_dark() {
        return Err(Error::Config(
            "target rate, detector efficiency and pump rate must all be > 0".into(),
        ));
    }
    let eta = 2.0 * detected_per_port / (detector_efficiency * dyn_.emission_rate());
    if eta > 1.0 {
        return Err(Error::Config(format!(
            "{detected_per_port} counts/s per port needs collection efficiency {eta:.3} > 1"
        )));
    }
    Ok(eta)
}

/// Analytic counterpart of a [`simulate_hom`] run: closed-form cross
/// correlation with ξ scaled by the spin purities (impurity photons never
/// interfere) and raised by the uncorrelated detector counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomExpectation {
    /// Pair configuration with the effective ξ and with autocorrelations
    /// implied by the emission dynamics.
    pub effective: PairConfig,
    /// Signal fraction of each detector's count rate.
    pub rho: [f64; 2],
    /// Expected click rate of each detector (counts/s, dead time ignored).
    pub rates: [f64; 2],
    /// Collected photon rate of each emitter at the beamsplitter.
    pub photon_rates: [f64; 2],
}

impl HomExpectation {
    pub fn new(
        cfg: &PairConfig,
        dyn1: &EmissionDynamics,
        dyn2: &EmissionDynamics,
        setup: &HomSetup,
        polarization: Polarization,
    ) -> Result<Self> {
        cfg.validate()?;
        setup.validate()?;
        check_gamma(&cfg.emitter1, dyn1)?;
        check_gamma(&cfg.emitter2, dyn2)?;
        let mut effective = *cfg;
        if !dyn1.is_dark() {
            effective.emitter1.autocorr = dyn1.autocorr_params()?;
        }
        if !dyn2.is_dark() {
            effective.emitter2.autocorr = dyn2.autocorr_params()?;
        }
        effective.xi = match polarization {
            Polarization::Parallel => cfg.xi * cfg.emitter1.spin_purity * cfg.emitter2.spin_purity,
            Polarization::Perpendicular => 0.0,
        };
        let photon_rates = [
            setup.collection[0] * dyn1.emission_rate(),
            setup.collection[1] * dyn2.emission_rate(),
        ];
        let total = photon_rates[0] + photon_rates[1];
        let mut rho = [0.0; 2];
        let mut rates = [0.0; 2];
        for (j, det) in setup.detectors.iter().enumerate() {
            let signal = det.efficiency * 0.5 * total;
            rates[j] = signal + det.noise_rate();
            rho[j] = if rates[j] > 0.0 { signal / rates[j] } else { 0.0 };
        }
        Ok(Self {
            effective,
            rho,
            rates,
            photon_rates,
        })
    }

    /// Normalised coincidence rate expected at delay `tau`.
    pub fn g2(&self, tau: f64) -> f64 {
        let sig = g2_cross_unchecked(tau, &self.effective, true);
        with_uncorrelated_background(sig, self.rho[0], self.rho[1])
    }

    /// Bin-averaged [`HomExpectation::g2`] (5-point Gauss–Legendre).
    pub fn g2_bin_average(&self, lo: f64, hi: f64) -> f64 {
        gauss5(|t| self.g2(t), lo, hi)
    }
}

pub(crate) fn gauss5(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683, 0.538_469_310_105_683, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.478_628_670_499_366, 0.236_926_885_056_189, 0.236_926_885_056_189];
    let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    0.5 * X.iter().zip(W).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
}

fn check_gamma(em: &EmitterModel, dyn_: &EmissionDynamics) -> Result<()> {
    if (em.gamma - dyn_.gamma).abs() > 1e-9 * em.gamma {
        return Err(Error::Config(format!(
            "emitter gamma {} s^-1 differs from its dynamics gamma {} s^-1",
            em.gamma, dyn_.gamma
        )));
    }
    Ok(())
}

struct Source {
    sampler: CollectedStreamSampler,
    spectral: Spectral,
    id: EmitterId,
}

struct Pairing {
    window: f64,
    xi_eff: f64,
    gamma_bar: f64,
}

/// Everything needed to simulate one segment; built once per run.
struct Plan {
    sources: Vec<Source>,
    pairing: Option<Pairing>,
    detectors: [DetectorModel; 2],
}

impl Plan {
    fn hom(
        cfg: &PairConfig,
        dyn1: &EmissionDynamics,
        dyn2: &EmissionDynamics,
        setup: &HomSetup,
        polarization: Polarization,
    ) -> Result<Self> {
        let expect = HomExpectation::new(cfg, dyn1, dyn2, setup, polarization)?;
        let window = setup.pairing_window_for(cfg)?;
        let overlap = (expect.photon_rates[0] + expect.photon_rates[1]) * window;
        if overlap > setup.max_overlap {
            return Err(Error::Validity(format!(
                "photon flux too high for pairwise interference: {overlap:.2e} expected photons per \
                 {:.1} ns pairing window exceeds {:.2e}",
                window / 1e-9,
                setup.max_overlap
            )));
        }
        let mut sources = Vec::new();
        for (i, (em, d)) in [(&cfg.emitter1, dyn1), (&cfg.emitter2, dyn2)].into_iter().enumerate() {
            if d.is_dark() || setup.collection[i] == 0.0 {
                continue;
            }
            sources.push(Source {
                sampler: CollectedStreamSampler::new(d, setup.collection[i])?,
                spectral: Spectral::new(em, setup.impurity_detuning)?,
                id: if i == 0 { EmitterId::One } else { EmitterId::Two },
            });
        }
        Ok(Self {
            sources,
            pairing: Some(Pairing {
                window,
                xi_eff: match polarization {
                    Polarization::Parallel => cfg.xi,
                    Polarization::Perpendicular => 0.0,
                },
                gamma_bar: cfg.mean_gamma(),
            }),
            detectors: setup.detectors,
        })
    }

    fn hbt(em: &EmitterModel, dyn_: &EmissionDynamics, setup: &HbtSetup) -> Result<Self> {
        em.validate()?;
        check_gamma(em, dyn_)?;
        for d in &setup.detectors {
            d.validate()?;
        }
        let mut sources = Vec::new();
        if !dyn_.is_dark() && setup.collection > 0.0 {
            sources.push(Source {
                sampler: CollectedStreamSampler::new(dyn_, setup.collection)?,
                spectral: Spectral::new(em, DEFAULT_IMPURITY_DETUNING)?,
                id: EmitterId::One,
            });
        }
        Ok(Self {
            sources,
            pairing: None,
            detectors: setup.detectors,
        })
    }

    fn segment<R: Rng + ?Sized>(&self, duration: f64, seed: u64, rng: &mut R) -> Result<ClickStream> {
        let mut photons: Vec<PhotonRecord> = Vec::new();
        for src in &self.sources {
            src.sampler.sample(duration, src.id, &src.spectral, rng, &mut photons);
        }
        photons.sort_by(|a, b| a.emit_time.total_cmp(&b.emit_time));

        let mut ports: [Vec<(f64, Provenance)>; 2] = [Vec::new(), Vec::new()];
        let prov = |p: &PhotonRecord| match p.emitter_id {
            EmitterId::One => Provenance::Signal1,
            EmitterId::Two => Provenance::Signal2,
        };
        let mut i = 0;
        while i < photons.len() {
            let a = &photons[i];
            if let (Some(pairing), Some(b)) = (&self.pairing, photons.get(i + 1)) {
                let dt = b.emit_time - a.emit_time;
                if b.emitter_id != a.emitter_id && dt <= pairing.window {
                    let v = if a.selected_line && b.selected_line && pairing.xi_eff > 0.0 {
                        pairing.xi_eff
                            * (-pairing.gamma_bar * dt).exp()
                            * (2.0 * PI * (a.center_freq - b.center_freq) * dt).cos()
                    } else {
                        0.0
                    };
                    let split = rng.random::<f64>() < 0.5 * (1.0 - v);
                    let first_to_c = rng.random::<bool>();
                    let (pa, pb) = if split {
                        if first_to_c {
                            (0, 1)
                        } else {
                            (1, 0)
                        }
                    } else if first_to_c {
                        (0, 0)
                    } else {
                        (1, 1)
                    };
                    ports[pa].push((a.emit_time, prov(a)));
                    ports[pb].push((b.emit_time, prov(b)));
                    i += 2;
                    continue;
                }
            }
            let port = usize::from(!rng.random::<bool>());
            ports[port].push((a.emit_time, prov(a)));
            i += 1;
        }

        let end_ps = to_ps(duration);
        let mut clicks = Vec::new();
        for (j, (arrivals, det)) in ports.iter().zip(&self.detectors).enumerate() {
            let detector = if j == 0 { Detector::C } else { Detector::D };
            detect(arrivals, det, detector, duration, end_ps, rng, &mut clicks)?;
        }
        clicks.sort_by_key(|c| (c.time_ps, c.detector));
        Ok(ClickStream {
            clicks,
            duration,
            seed,
        })
    }
}

fn detect<R: Rng + ?Sized>(
    arrivals: &[(f64, Provenance)],
    det: &DetectorModel,
    detector: Detector,
    duration: f64,
    end_ps: i64,
    rng: &mut R,
    out: &mut Vec<Click>,
) -> Result<()> {
    let jitter = if det.jitter_sigma > 0.0 {
        Some(Normal::new(0.0, det.jitter_sigma).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };
    let mut raw: Vec<(i64, Provenance)> = Vec::with_capacity(arrivals.len() + 16);
    for &(t, p) in arrivals {
        if det.efficiency < 1.0 && rng.random::<f64>() >= det.efficiency {
            continue;
        }
        let t = match &jitter {
            Some(n) => t + n.sample(rng),
            None => t,
        };
        raw.push((to_ps(t), p));
    }
    for (rate, p) in [(det.dark_rate, Provenance::Dark), (det.background_rate, Provenance::Background)] {
        if rate <= 0.0 {
            continue;
        }
        let n = Poisson::new(rate * duration)
            .map_err(|e| Error::domain(e.to_string()))?
            .sample(rng) as usize;
        for _ in 0..n {
            raw.push((to_ps(rng.random::<f64>() * duration), p));
        }
    }
    raw.retain(|&(t, _)| (0..=end_ps).contains(&t));
    raw.sort_by_key(|&(t, _)| t);
    let dead_ps = to_ps(det.dead_time).max(1);
    let mut last: Option<i64> = None;
    for (t, p) in raw {
        if let Some(l) = last {
            if t - l < dead_ps {
                continue;
            }
        }
        last = Some(t);
        out.push(Click {
            detector,
            time_ps: t,
            provenance: p,
        });
    }
    Ok(())
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::domain(format!("duration = {duration} must be > 0")));
    }
    if duration / PS > 9.0e18 {
        return Err(Error::domain("duration overflows 64-bit picosecond timestamps"));
    }
    Ok(())
}

/// Simulates the two-detector click stream behind the beamsplitter.
/// `polarization` selects ξ_eff = ξ (parallel) or 0 (perpendicular).
#[allow(clippy::too_many_arguments)]
pub fn simulate_hom(
    cfg: &PairConfig,
    dyn1: &EmissionDynamics,
    dyn2: &EmissionDynamics,
    setup: &HomSetup,
    duration: f64,
    seed: u64,
    polarization: Polarization,
) -> Result<ClickStream> {
    check_duration(duration)?;
    let plan = Plan::hom(cfg, dyn1, dyn2, setup, polarization)?;
    plan.segment(duration, seed, &mut rng_for(seed, 0))
}

/// Long acquisition as independent segments of `batch_duration`, each with
/// its own RNG stream `(seed, batch index)`, correlated and merged. Segment
/// boundaries drop pairs straddling them (a fraction ~window/batch).
#[allow(clippy::too_many_arguments)]
pub fn simulate_hom_histogram(
    cfg: &PairConfig,
    dyn1: &EmissionDynamics,
    dyn2: &EmissionDynamics,
    setup: &HomSetup,
    duration: f64,
    seed: u64,
    polarization: Polarization,
    correlator: &CorrelatorConfig,
    batch_duration: f64,
) -> Result<CorrelationHistogram> {
    check_duration(duration)?;
    let plan = Plan::hom(cfg, dyn1, dyn2, setup, polarization)?;
    run_batches(&plan, duration, seed, correlator, batch_duration)
}

pub fn simulate_hbt(
    em: &EmitterModel,
    dyn_: &EmissionDynamics,
    setup: &HbtSetup,
    duration: f64,
    seed: u64,
) -> Result<ClickStream> {
    check_duration(duration)?;
    let plan = Plan::hbt(em, dyn_, setup)?;
    plan.segment(duration, seed, &mut rng_for(seed, 0))
}

pub fn simulate_hbt_histogram(
    em: &EmitterModel,
    dyn_: &EmissionDynamics,
    setup: &HbtSetup,
    duration: f64,
    seed: u64,
    correlator: &CorrelatorConfig,
    batch_duration: f64,
) -> Result<CorrelationHistogram> {
    check_duration(duration)?;
    let plan = Plan::hbt(em, dyn_, setup)?;
    run_batches(&plan, duration, seed, correlator, batch_duration)
}

fn run_batches(
    plan: &Plan,
    duration: f64,
    seed: u64,
    correlator: &CorrelatorConfig,
    batch_duration: f64,
) -> Result<CorrelationHistogram> {
    correlator.validate()?;
    if !(batch_duration > 0.0) {
        return Err(Error::domain("batch duration must be > 0"));
    }
    let n = (duration / batch_duration).ceil().max(1.0) as u64;
    (0..n)
        .into_par_iter()
        .map(|b| {
            let len = (duration - b as f64 * batch_duration).min(batch_duration);
            let stream = plan.segment(len, seed, &mut rng_for(seed, b))?;
            correlate(&stream, correlator)
        })
        .try_reduce_with(|mut acc, h| {
            acc.merge(&h)?;
            Ok(acc)
        })
        .expect("at least one batch")
}
