//! Photoluminescence-excitation scans: a narrow laser stepped across the
//! zero-phonon transitions while red-shifted sideband photons are counted.
//! Each point is preceded by a green initialisation pulse that pumps the
//! spin into m_s = 0, so only the m_s = 0 lines (Ex, Ey) fluoresce.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::model::EmitterModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleSettings {
    /// Green initialisation pulse per scan point (s); costs acquisition time
    /// but contributes no counts.
    pub init_pulse: f64,
    /// Probe time per scan point (s).
    pub dwell: f64,
    /// Count rate on resonance, background excluded (counts/s).
    pub peak_rate: f64,
    /// Off-resonant count rate (counts/s).
    pub background_rate: f64,
}

impl PleSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dwell.is_finite() && self.dwell > 0.0) {
            return Err(Error::domain(format!("dwell = {} must be > 0", self.dwell)));
        }
        for (name, v) in [
            ("init_pulse", self.init_pulse),
            ("peak_rate", self.peak_rate),
            ("background_rate", self.background_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// One Lorentzian line of a PLE spectrum, peak-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleLine {
    pub center: f64,
    pub fwhm: f64,
    /// Peak count rate of this line (counts/s).
    pub peak_rate: f64,
}

impl PleLine {
    /// Peak-normalised Lorentzian, 1 at the centre.
    pub fn shape(&self, f: f64) -> f64 {
        let hw = 0.5 * self.fwhm;
        if hw == 0.0 {
            return if f == self.center { 1.0 } else { 0.0 };
        }
        let d = f - self.center;
        hw * hw / (d * d + hw * hw)
    }
}

/// Laser frequency → photon counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub counts: Vec<u64>,
    pub dwell: f64,
    /// Wall-clock time including initialisation pulses (s).
    pub acquisition_time: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Points with `lo <= f <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Spectrum {
        let (freqs, counts) = self
            .freqs
            .iter()
            .zip(&self.counts)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, c)| (*f, *c))
            .unzip();
        Spectrum {
            freqs,
            counts,
            dwell: self.dwell,
            acquisition_time: self.acquisition_time,
        }
    }
}

/// Noise-free counts at laser frequency `f`:
/// `dwell·Σ peak_rate·L(f) + dwell·background`.
pub fn expected_ple_counts(lines: &[PleLine], f: f64, settings: &PleSettings) -> f64 {
    settings.dwell
        * (lines.iter().map(|l| l.peak_rate * l.shape(f)).sum::<f64>() + settings.background_rate)
}

fn validate_scan(scan: &[f64]) -> Result<()> {
    if scan.is_empty() {
        return Err(Error::domain("PLE scan grid is empty"));
    }
    let increasing = scan.windows(2).all(|w| w[1] > w[0]);
    let decreasing = scan.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) || scan.iter().any(|f| !f.is_finite()) {
        return Err(Error::domain("PLE scan grid must be finite and strictly monotone"));
    }
    Ok(())
}

/// Scan over the selected (Ex) line of one emitter with FWHM `sd_fwhm`.
pub fn simulate_ple(em: &EmitterModel, scan: &[f64], settings: &PleSettings, seed: u64) -> Result<Spectrum> {
    em.validate()?;
    let line = PleLine {
        center: em.f_ex,
        fwhm: em.sd_fwhm,
        peak_rate: settings.peak_rate,
    };
    simulate_ple_lines(&[line], scan, settings, seed)
}

/// Poisson-sampled spectrum of several lines sharing one background.
pub fn simulate_ple_lines(lines: &[PleLine], scan: &[f64], settings: &PleSettings, seed: u64) -> Result<Spectrum> {
    settings.validate()?;
    validate_scan(scan)?;
    for l in lines {
        if !(l.fwhm >= 0.0 && l.peak_rate >= 0.0 && l.center.is_finite()) {
            return Err(Error::domain("PLE line needs finite centre, fwhm >= 0 and rate >= 0"));
        }
    }
    let mut rng = rng_for(seed, 0);
    let counts = scan
        .iter()
        .map(|&f| sample_poisson(expected_ple_counts(lines, f, settings), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        freqs: scan.to_vec(),
        counts,
        dwell: settings.dwell,
        acquisition_time: scan.len() as f64 * (settings.dwell + settings.init_pulse),
    })
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let p = Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?;
    Ok(p.sample(rng) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AutocorrParams;
    use crate::units::{mhz, ns, US};

    fn em() -> EmitterModel {
        EmitterModel {
            f_ex: 0.0,
            f_ey: mhz(-3000.0),
            gamma: 1.0 / ns(12.0),
            sd_fwhm: mhz(88.0),
            autocorr: AutocorrParams::two_level(ns(6.0)).unwrap(),
            spin_purity: 0.94,
        }
    }

    fn settings(peak: f64) -> PleSettings {
        PleSettings {
            init_pulse: 5.0 * US,
            dwell: 0.01,
            peak_rate: peak,
            background_rate: 500.0,
        }
    }

    #[test]
    fn zero_peak_is_background_only() {
        let scan: Vec<f64> = (0..201).map(|i| mhz(-500.0 + 5.0 * i as f64)).collect();
        let s = simulate_ple(&em(), &scan, &settings(0.0), 4).unwrap();
        let mean = s.counts.iter().sum::<u64>() as f64 / s.len() as f64;
        // Background expectation 5 counts per point.
        assert!((mean - 5.0).abs() < 3.0 * (5.0f64 / 201.0).sqrt());
    }

    #[test]
    fn noiseless_centre_expectation() {
        let s = settings(20_000.0);
        let line = PleLine {
            center: 0.0,
            fwhm: mhz(88.0),
            peak_rate: s.peak_rate,
        };
        assert_eq!(expected_ple_counts(&[line], 0.0, &s), s.dwell * s.peak_rate + s.dwell * s.background_rate);
        assert!((line.shape(mhz(44.0)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(simulate_ple(&em(), &[], &settings(1.0), 0).is_err());
        assert!(simulate_ple(&em(), &[0.0, 2.0, 1.0], &settings(1.0), 0).is_err());
        let mut s = settings(1.0);
        s.dwell = 0.0;
        assert!(simulate_ple(&em(), &[0.0, 1.0], &s, 0).is_err());
    }

    #[test]
    fn deterministic_and_timed() {
        let scan: Vec<f64> = (0..50).map(|i| mhz(i as f64)).collect();
        let a = simulate_ple(&em(), &scan, &settings(1e4), 9).unwrap();
        let b = simulate_ple(&em(), &scan, &settings(1e4), 9).unwrap();
        assert_eq!(a, b);
        assert!((a.acquisition_time - 50.0 * (0.01 + 5e-6)).abs() < 1e-12);
    }
}
