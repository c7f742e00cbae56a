//! Time-correlated single photon counting: coincidence histograms between
//! detectors C and D and their normalisation to g⁽²⁾(τ).
//!
//! Delays are `τ = t_D − t_C`. Every (C, D) pair within the window is
//! counted (all-pairs, not start–stop), and bin edges are integers in
//! picoseconds so binning is exact.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{ClickStream, Detector};
use crate::units::{from_ps, to_ps, NS, PS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by `r_C·r_D·T·Δτ`, the accidental rate of uncorrelated streams.
    #[default]
    RateProduct,
    /// Divide by the mean count density over `0.8 ≤ |τ|/window ≤ 1`.
    TailAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorConfig {
    /// Bin width (s); an even number of picoseconds.
    pub bin_width: f64,
    /// Largest |τ| (s).
    pub window: f64,
    pub normalization: Normalization,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        Self {
            bin_width: 64.0 * PS,
            window: 100.0 * NS,
            normalization: Normalization::RateProduct,
        }
    }
}

impl CorrelatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bw = to_ps(self.bin_width);
        if !(self.bin_width.is_finite() && bw > 0) {
            return Err(Error::domain(format!("bin width {} s must be >= 1 ps", self.bin_width)));
        }
        if bw % 2 != 0 {
            return Err(Error::domain(format!(
                "bin width {bw} ps must be an even number of picoseconds"
            )));
        }
        if !(self.window.is_finite() && self.window >= self.bin_width) {
            return Err(Error::domain("correlation window must be >= bin width"));
        }
        Ok(())
    }

    fn bin_width_ps(&self) -> i64 {
        to_ps(self.bin_width)
    }

    /// Bins on each side of the central one.
    fn half_bins(&self) -> i64 {
        to_ps(self.window) / self.bin_width_ps()
    }
}

/// Coincidence counts versus delay, with normalised g⁽²⁾ and shot-noise
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    /// Bin edges in picoseconds; bin `i` is `[edges[i], edges[i+1])`.
    pub bin_edges_ps: Vec<i64>,
    pub counts: Vec<u64>,
    pub duration_ps: i64,
    pub clicks_c: u64,
    pub clicks_d: u64,
    pub window_ps: i64,
    pub normalization: Normalization,
    pub g2: Vec<f64>,
    /// `g2/√counts`; `None` where a bin is empty.
    pub g2_err: Vec<Option<f64>>,
}

/// JSON sidecar written next to the histogram CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramHeader {
    pub bin_width_ps: i64,
    pub window_ps: i64,
    pub n_bins: usize,
    pub normalization: Normalization,
    pub duration_s: f64,
    pub rate_c: f64,
    pub rate_d: f64,
    pub total_coincidences: u64,
    pub seed: Option<u64>,
}

impl CorrelationHistogram {
    fn empty(cfg: &CorrelatorConfig, duration_ps: i64) -> Self {
        let bw = cfg.bin_width_ps();
        let n = cfg.half_bins();
        let h = bw / 2;
        let bin_edges_ps: Vec<i64> = (-n..=n + 1).map(|k| k * bw - h).collect();
        let nb = bin_edges_ps.len() - 1;
        Self {
            bin_edges_ps,
            counts: vec![0; nb],
            duration_ps,
            clicks_c: 0,
            clicks_d: 0,
            window_ps: to_ps(cfg.window),
            normalization: cfg.normalization,
            g2: vec![0.0; nb],
            g2_err: vec![None; nb],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin centres (s).
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges_ps
            .windows(2)
            .map(|e| from_ps(e[0] + e[1]) * 0.5)
            .collect()
    }

    pub fn bin_centers_ps(&self) -> Vec<i64> {
        self.bin_edges_ps.windows(2).map(|e| (e[0] + e[1]) / 2).collect()
    }

    /// Bin widths (s).
    pub fn bin_widths(&self) -> Vec<f64> {
        self.bin_edges_ps.windows(2).map(|e| from_ps(e[1] - e[0])).collect()
    }

    pub fn center_index(&self) -> usize {
        self.n_bins() / 2
    }

    pub fn duration(&self) -> f64 {
        from_ps(self.duration_ps)
    }

    pub fn rate_c(&self) -> f64 {
        rate(self.clicks_c, self.duration_ps)
    }

    pub fn rate_d(&self) -> f64 {
        rate(self.clicks_d, self.duration_ps)
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts expected per bin for uncorrelated streams at the recorded
    /// rates, `N_C·N_D·Δτ/T`.
    pub fn accidental_counts(&self) -> Vec<f64> {
        let t = self.duration();
        let scale = if t > 0.0 {
            self.clicks_c as f64 * self.clicks_d as f64 / t
        } else {
            0.0
        };
        self.bin_widths().into_iter().map(|w| scale * w).collect()
    }

    /// Adds another histogram with identical binning (e.g. from a disjoint
    /// time segment) and renormalises. Integer bookkeeping keeps the result
    /// independent of merge order.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<()> {
        if self.bin_edges_ps != other.bin_edges_ps || self.normalization != other.normalization {
            return Err(Error::domain("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.duration_ps += other.duration_ps;
        self.clicks_c += other.clicks_c;
        self.clicks_d += other.clicks_d;
        self.apply_normalization()
    }

    /// Recomputes `g2`/`g2_err` under the histogram's normalisation mode.
    pub fn normalize(&self) -> Result<CorrelationHistogram> {
        let mut h = self.clone();
        h.apply_normalization()?;
        Ok(h)
    }

    pub fn normalized_with(&self, mode: Normalization) -> Result<CorrelationHistogram> {
        let mut h = self.clone();
        h.normalization = mode;
        h.apply_normalization()?;
        Ok(h)
    }

    /// Counts each bin would hold for g⁽²⁾ = 1 under the histogram's
    /// normalisation mode. All zeros when there is nothing to normalise by.
    pub fn unit_counts(&self) -> Result<Vec<f64>> {
        let widths = self.bin_widths();
        let density = match self.normalization {
            Normalization::RateProduct => {
                if self.duration_ps <= 0 || self.clicks_c == 0 || self.clicks_d == 0 {
                    0.0
                } else {
                    self.clicks_c as f64 * self.clicks_d as f64 / self.duration()
                }
            }
            Normalization::TailAverage => {
                let lo = 0.8 * self.window_ps as f64;
                let hi = self.window_ps as f64;
                let (mut c, mut w) = (0u64, 0.0);
                for (i, center) in self.bin_centers_ps().into_iter().enumerate() {
                    let a = center.unsigned_abs() as f64;
                    if a >= lo && a <= hi {
                        c += self.counts[i];
                        w += widths[i];
                    }
                }
                if w > 0.0 {
                    c as f64 / w
                } else {
                    0.0
                }
            }
        };
        let total = self.total_counts();
        if density <= 0.0 && total > 0 {
            return Err(Error::Validity(format!(
                "{total} coincidences recorded but the {:?} normalisation is zero",
                self.normalization
            )));
        }
        Ok(widths.into_iter().map(|w| density * w).collect())
    }

    fn apply_normalization(&mut self) -> Result<()> {
        let unit = self.unit_counts()?;
        for (i, u) in unit.into_iter().enumerate() {
            let c = self.counts[i];
            if u > 0.0 {
                self.g2[i] = c as f64 / u;
                self.g2_err[i] = (c > 0).then(|| self.g2[i] / (c as f64).sqrt());
            } else {
                self.g2[i] = 0.0;
                self.g2_err[i] = None;
            }
        }
        Ok(())
    }

    /// Sums `factor` adjacent bins, keeping τ = 0 inside a central group.
    /// `factor` must be odd; when the bin count is not a multiple of it the
    /// outermost group on each side is narrower, so counts are always
    /// conserved.
    pub fn rebin(&self, factor: usize) -> Result<CorrelationHistogram> {
        if factor == 0 || factor.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "rebin factor {factor} must be odd so the central bin stays centred on zero"
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let c = self.center_index() as i64;
        let f = factor as i64;
        let half = (f - 1) / 2;
        let group = |i: usize| (i as i64 - c + half).div_euclid(f);
        let mut edges = vec![self.bin_edges_ps[0]];
        let mut counts = Vec::new();
        let mut current = group(0);
        let mut acc = 0u64;
        for i in 0..self.n_bins() {
            let g = group(i);
            if g != current {
                counts.push(acc);
                edges.push(self.bin_edges_ps[i]);
                acc = 0;
                current = g;
            }
            acc += self.counts[i];
        }
        counts.push(acc);
        edges.push(*self.bin_edges_ps.last().expect("non-empty"));
        let nb = counts.len();
        let mut h = CorrelationHistogram {
            bin_edges_ps: edges,
            counts,
            g2: vec![0.0; nb],
            g2_err: vec![None; nb],
            ..self.clone()
        };
        h.apply_normalization()?;
        Ok(h)
    }

    /// `Σ|n(τ) − n(−τ)| / Σn` over mirrored bin pairs.
    pub fn asymmetry(&self) -> f64 {
        let total = self.total_counts();
        if total == 0 {
            return 0.0;
        }
        let n = self.n_bins();
        let diff: u64 = (0..n / 2)
            .map(|i| self.counts[i].abs_diff(self.counts[n - 1 - i]))
            .sum();
        diff as f64 / total as f64
    }

    pub fn header(&self, seed: Option<u64>) -> HistogramHeader {
        let bw = self
            .bin_edges_ps
            .get(self.center_index() + 1)
            .zip(self.bin_edges_ps.get(self.center_index()))
            .map(|(b, a)| b - a)
            .unwrap_or(0);
        HistogramHeader {
            bin_width_ps: bw,
            window_ps: self.window_ps,
            n_bins: self.n_bins(),
            normalization: self.normalization,
            duration_s: self.duration(),
            rate_c: self.rate_c(),
            rate_d: self.rate_d(),
            total_coincidences: self.total_counts(),
            seed,
        }
    }

    /// CSV `tau_ps,counts,g2,g2_err`; empty bins leave `g2_err` blank.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau_ps", "counts", "g2", "g2_err"])?;
        for (i, tau) in self.bin_centers_ps().into_iter().enumerate() {
            wr.write_record([
                tau.to_string(),
                self.counts[i].to_string(),
                format!("{:.9}", self.g2[i]),
                self.g2_err[i].map(|e| format!("{e:.9}")).unwrap_or_default(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

fn rate(n: u64, duration_ps: i64) -> f64 {
    if duration_ps > 0 {
        n as f64 / from_ps(duration_ps)
    } else {
        0.0
    }
}

/// Coincidence histogram of a click stream.
pub fn correlate(stream: &ClickStream, cfg: &CorrelatorConfig) -> Result<CorrelationHistogram> {
    let c = stream.times(Detector::C);
    let d = stream.times(Detector::D);
    correlate_times(&c, &d, stream.duration_ps(), cfg)
}

/// Coincidence histogram from sorted per-detector timestamps (ps).
pub fn correlate_times(c: &[i64], d: &[i64], duration_ps: i64, cfg: &CorrelatorConfig) -> Result<CorrelationHistogram> {
    cfg.validate()?;
    if duration_ps < 0 {
        return Err(Error::domain("negative duration"));
    }
    if c.windows(2).any(|w| w[1] < w[0]) || d.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("timestamps must be sorted per detector"));
    }
    let mut h = CorrelationHistogram::empty(cfg, duration_ps);
    h.clicks_c = c.len() as u64;
    h.clicks_d = d.len() as u64;
    let bw = cfg.bin_width_ps();
    let n = cfg.half_bins();
    let half = bw / 2;
    let lo = h.bin_edges_ps[0];
    let hi = *h.bin_edges_ps.last().expect("non-empty");
    let mut start = 0usize;
    for &tc in c {
        while start < d.len() && d[start] - tc < lo {
            start += 1;
        }
        for &td in &d[start..] {
            let delta = td - tc;
            if delta >= hi {
                break;
            }
            let k = (delta + half).div_euclid(bw) + n;
            h.counts[k as usize] += 1;
        }
    }
    h.apply_normalization()?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{Click, Provenance};

    fn stream(c: &[i64], d: &[i64], duration: f64) -> ClickStream {
        let mut clicks: Vec<Click> = c
            .iter()
            .map(|&t| Click {
                detector: Detector::C,
                time_ps: t,
                provenance: Provenance::Signal1,
            })
            .chain(d.iter().map(|&t| Click {
                detector: Detector::D,
                time_ps: t,
                provenance: Provenance::Signal2,
            }))
            .collect();
        clicks.sort_by_key(|c| (c.time_ps, c.detector));
        ClickStream {
            clicks,
            duration,
            seed: 0,
        }
    }

    fn cfg(window_ns: f64) -> CorrelatorConfig {
        CorrelatorConfig {
            window: window_ns * NS,
            ..Default::default()
        }
    }

    #[test]
    fn single_pair_lands_in_its_bin() {
        let h = correlate(&stream(&[0], &[5_000], 1e-6), &cfg(50.0)).unwrap();
        assert_eq!(h.total_counts(), 1);
        let k = h.counts.iter().position(|&c| c == 1).unwrap();
        let (a, b) = (h.bin_edges_ps[k], h.bin_edges_ps[k + 1]);
        assert!(a <= 5_000 && 5_000 < b);
        // Negative delay goes to the mirrored side.
        let h = correlate(&stream(&[5_000], &[0], 1e-6), &cfg(50.0)).unwrap();
        let k = h.counts.iter().position(|&c| c == 1).unwrap();
        assert!(h.bin_edges_ps[k] <= -5_000 && -5_000 < h.bin_edges_ps[k + 1]);
    }

    #[test]
    fn zero_delay_is_central_bin() {
        let h = correlate(&stream(&[100], &[100], 1e-6), &cfg(10.0)).unwrap();
        assert_eq!(h.counts[h.center_index()], 1);
        assert_eq!(h.bin_centers_ps()[h.center_index()], 0);
    }

    #[test]
    fn out_of_window_pairs_ignored() {
        let h = correlate(&stream(&[0], &[60_000], 1e-6), &cfg(50.0)).unwrap();
        assert_eq!(h.total_counts(), 0);
    }

    #[test]
    fn empty_stream_gives_zero_histogram() {
        let h = correlate(&ClickStream::empty(1.0, 0), &CorrelatorConfig::default()).unwrap();
        assert_eq!(h.total_counts(), 0);
        assert!(h.g2.iter().all(|&g| g == 0.0));
        assert!(h.g2_err.iter().all(Option::is_none));
        assert_eq!(h.n_bins(), 3125);
    }

    #[test]
    fn invalid_config() {
        let mut c = CorrelatorConfig {
            bin_width: 63e-12,
            ..CorrelatorConfig::default()
        };
        assert!(c.validate().is_err());
        c.bin_width = 64e-12;
        c.window = 10e-12;
        assert!(c.validate().is_err());
        c.bin_width = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rebin_odd_only_and_conserves() {
        let h = correlate(&stream(&[0, 10_000, 30_000], &[1_000, 12_000, 29_000], 1e-6), &cfg(50.0)).unwrap();
        assert!(h.rebin(2).is_err());
        assert!(h.rebin(0).is_err());
        assert_eq!(h.rebin(1).unwrap(), h);
        for f in [3, 5, 7, 15, 101] {
            let r = h.rebin(f).unwrap();
            assert_eq!(r.total_counts(), h.total_counts());
            assert_eq!(r.bin_centers_ps()[r.center_index()], 0);
            assert_eq!(r.bin_edges_ps.first(), h.bin_edges_ps.first());
            assert_eq!(r.bin_edges_ps.last(), h.bin_edges_ps.last());
        }
    }

    #[test]
    fn inconsistent_normalisation() {
        let mut h = correlate(&stream(&[0], &[64], 1e-6), &cfg(10.0)).unwrap();
        h.clicks_d = 0;
        assert!(matches!(h.normalize(), Err(Error::Validity(_))));
    }

    #[test]
    fn csv_layout() {
        let h = correlate(&stream(&[0], &[0], 1e-6), &cfg(0.2)).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tau_ps,counts,g2,g2_err");
        assert_eq!(lines.len(), 1 + h.n_bins());
        assert!(lines[1].ends_with(','));
    }
}
