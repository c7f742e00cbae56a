//! DC Stark tuning with a linear voltage → field response.
//!
//! The field at the emitter is `E = k·V` with separate coefficients along
//! and perpendicular to the defect axis. The axial component shifts both
//! transitions together; the perpendicular one pushes Ex and Ey apart by
//! `±d_perp·|E_perp|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{simulate_ple_lines, PleLine, PleSettings, Spectrum};
use crate::model::EmitterModel;
use crate::units::mhz;

/// Vertical offset between successive spectra in a tuning-scan plot
/// (counts/s). Presentation only; the data are not shifted.
pub const SCAN_DISPLAY_OFFSET: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Line {
    #[default]
    Ex,
    Ey,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkResponse {
    /// Axial field per applied volt ((MV/m)/V).
    pub field_per_volt_par: f64,
    /// Perpendicular field per applied volt ((MV/m)/V).
    pub field_per_volt_perp: f64,
    /// Common-mode shift (Hz per MV/m).
    pub d_parallel: f64,
    /// Ex/Ey splitting coefficient (Hz per MV/m).
    pub d_perp: f64,
    /// Allowed gate voltages (V).
    pub v_range: (f64, f64),
}

impl StarkResponse {
    /// Purely axial response calibrated so that +50 V gives 0.5 MV/m and a
    /// −2.9 V gate moves the line by −245 MHz (270 → 25 MHz detuning).
    pub fn calibrated() -> Self {
        let field_per_volt = 0.5 / 50.0;
        let slope = mhz(270.0 - 25.0) / 2.9;
        Self {
            field_per_volt_par: field_per_volt,
            field_per_volt_perp: 0.0,
            d_parallel: slope / field_per_volt,
            d_perp: 0.0,
            v_range: (-30.0, 50.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.v_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("voltage range ({lo}, {hi}) is empty")));
        }
        for (name, v) in [
            ("field_per_volt_par", self.field_per_volt_par),
            ("field_per_volt_perp", self.field_per_volt_perp),
            ("d_parallel", self.d_parallel),
            ("d_perp", self.d_perp),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("Stark coefficient {name} is not finite")));
            }
        }
        Ok(())
    }

    fn check_voltage(&self, v: f64) -> Result<()> {
        let (lo, hi) = self.v_range;
        if !(v >= lo && v <= hi) {
            return Err(Error::Range(format!("gate voltage {v} V outside [{lo}, {hi}] V")));
        }
        Ok(())
    }

    /// Slopes (Hz/V) of the chosen line for V < 0 and V > 0.
    fn slopes(&self, line: Line) -> (f64, f64) {
        let common = self.d_parallel * self.field_per_volt_par;
        let split = self.d_perp * self.field_per_volt_perp.abs();
        let sign = match line {
            Line::Ex => 1.0,
            Line::Ey => -1.0,
        };
        (common - sign * split, common + sign * split)
    }

    fn line_freq(&self, base: f64, line: Line, v: f64) -> f64 {
        let (neg, pos) = self.slopes(line);
        base + if v < 0.0 { neg * v } else { pos * v }
    }
}

/// `(f_Ex, f_Ey)` at gate voltage `v` for zero-field frequencies `base`.
pub fn transition_freqs(resp: &StarkResponse, base: (f64, f64), v: f64) -> Result<(f64, f64)> {
    resp.validate()?;
    resp.check_voltage(v)?;
    let e_par = resp.field_per_volt_par * v;
    let e_perp = (resp.field_per_volt_perp * v).abs();
    let common = resp.d_parallel * e_par;
    let split = resp.d_perp * e_perp;
    Ok((base.0 + common + split, base.1 + common - split))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub v_opt: f64,
    /// `|f_line(V_opt) − f_target|` (Hz).
    pub residual: f64,
    /// True when the unconstrained optimum lies outside the voltage range.
    pub clipped: bool,
}

/// Gate voltage minimising `|f_line(V) − target|` for one tuned emitter
/// against a fixed one. The response is piecewise linear (kink at 0 V from
/// `|E_perp|`), so each half-line is solved exactly and the best of the
/// roots, the kink and the range ends wins; ties go to the smaller |V|.
pub fn tune_to_resonance(resp: &StarkResponse, nv1_base: (f64, f64), target: f64, line: Line) -> Result<Tuning> {
    resp.validate()?;
    let base = match line {
        Line::Ex => nv1_base.0,
        Line::Ey => nv1_base.1,
    };
    let (lo, hi) = resp.v_range;
    let (neg, pos) = resp.slopes(line);
    let mut candidates = vec![lo, hi];
    if lo <= 0.0 && hi >= 0.0 {
        candidates.push(0.0);
    }
    for (slope, on_half) in [(neg, -1.0), (pos, 1.0)] {
        if slope != 0.0 {
            let v = (target - base) / slope;
            if v * on_half >= 0.0 && v >= lo && v <= hi {
                candidates.push(v);
            }
        }
    }
    let score = |v: f64| (resp.line_freq(base, line, v) - target).abs();
    let v_opt = candidates
        .into_iter()
        .min_by(|&a, &b| score(a).total_cmp(&score(b)).then(a.abs().total_cmp(&b.abs())))
        .expect("non-empty");
    let residual = score(v_opt);
    Ok(Tuning {
        v_opt,
        residual,
        clipped: residual > 0.0 && (v_opt == lo || v_opt == hi),
    })
}

/// Two emitters seen in one PLE scan: the tuned NV1 and the fixed NV2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSetup {
    pub nv1: EmitterModel,
    pub nv2: EmitterModel,
    /// Transition of NV1 that is tuned onto NV2's Ex line.
    pub line: Line,
    /// Laser frequencies (Hz).
    pub scan: Vec<f64>,
    pub settings: PleSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningScan {
    pub voltages: Vec<f64>,
    pub spectra: Vec<Spectrum>,
    /// NV1 line centre at each voltage (Hz).
    pub nv1_freqs: Vec<f64>,
    pub nv2_freq: f64,
    /// Plot offset between successive spectra (counts/s).
    pub display_offset: f64,
}

impl TuningScan {
    /// Voltage where the NV1 line crosses NV2, interpolated between grid
    /// points. `None` if it never does on this grid.
    pub fn crossing_voltage(&self) -> Option<f64> {
        let d: Vec<f64> = self.nv1_freqs.iter().map(|f| f - self.nv2_freq).collect();
        for i in 0..d.len() {
            if d[i] == 0.0 {
                return Some(self.voltages[i]);
            }
            if i + 1 < d.len() && d[i].signum() != d[i + 1].signum() && d[i + 1] != 0.0 {
                let t = d[i] / (d[i] - d[i + 1]);
                return Some(self.voltages[i] + t * (self.voltages[i + 1] - self.voltages[i]));
            }
        }
        None
    }

    /// Number of sign changes of the NV1 − NV2 detuning along the grid.
    pub fn crossings(&self) -> usize {
        let s: Vec<f64> = self
            .nv1_freqs
            .iter()
            .map(|f| f - self.nv2_freq)
            .filter(|d| *d != 0.0)
            .map(f64::signum)
            .collect();
        s.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// One two-line PLE spectrum per gate voltage. Line widths never depend on
/// the voltage. Spectrum `i` uses seed `seed + i`.
pub fn simulate_tuning_scan(resp: &StarkResponse, setup: &ScanSetup, v_grid: &[f64], seed: u64) -> Result<TuningScan> {
    resp.validate()?;
    setup.nv1.validate()?;
    setup.nv2.validate()?;
    if v_grid.is_empty() {
        return Err(Error::domain("voltage grid is empty"));
    }
    let base = (setup.nv1.f_ex, setup.nv1.f_ey);
    let mut spectra = Vec::with_capacity(v_grid.len());
    let mut nv1_freqs = Vec::with_capacity(v_grid.len());
    for (i, &v) in v_grid.iter().enumerate() {
        let (ex, ey) = transition_freqs(resp, base, v)?;
        let f1 = match setup.line {
            Line::Ex => ex,
            Line::Ey => ey,
        };
        let lines = [
            PleLine {
                center: f1,
                fwhm: setup.nv1.sd_fwhm,
                peak_rate: setup.settings.peak_rate,
            },
            PleLine {
                center: setup.nv2.f_ex,
                fwhm: setup.nv2.sd_fwhm,
                peak_rate: setup.settings.peak_rate,
            },
        ];
        spectra.push(simulate_ple_lines(&lines, &setup.scan, &setup.settings, seed.wrapping_add(i as u64))?);
        nv1_freqs.push(f1);
    }
    Ok(TuningScan {
        voltages: v_grid.to_vec(),
        spectra,
        nv1_freqs,
        nv2_freq: setup.nv2.f_ex,
        display_offset: SCAN_DISPLAY_OFFSET,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn split_response() -> StarkResponse {
        StarkResponse {
            field_per_volt_par: 0.01,
            field_per_volt_perp: 0.004,
            d_parallel: mhz(5000.0),
            d_perp: mhz(3000.0),
            v_range: (-30.0, 50.0),
        }
    }

    #[test]
    fn zero_volts_is_identity() {
        let base = (mhz(270.0), mhz(-3000.0));
        assert_eq!(transition_freqs(&split_response(), base, 0.0).unwrap(), base);
    }

    #[test]
    fn common_mode_only_keeps_splitting() {
        let mut r = split_response();
        r.d_perp = 0.0;
        let base = (mhz(1.0), mhz(-2.0));
        for v in [-30.0, -1.0, 7.5, 50.0] {
            let (a, b) = transition_freqs(&r, base, v).unwrap();
            assert_relative_eq!(a - b, base.0 - base.1, max_relative = 1e-12);
        }
    }

    #[test]
    fn calibrated_anchor_points() {
        let r = StarkResponse::calibrated();
        let (ex, _) = transition_freqs(&r, (mhz(270.0), 0.0), -2.9).unwrap();
        assert_relative_eq!(ex, mhz(25.0), max_relative = 1e-9);
        assert_relative_eq!(r.field_per_volt_par * 50.0, 0.5);
    }

    #[test]
    fn out_of_range_voltage() {
        assert!(matches!(
            transition_freqs(&split_response(), (0.0, 0.0), 60.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn already_resonant() {
        let t = tune_to_resonance(&split_response(), (mhz(5.0), 0.0), mhz(5.0), Line::Ex).unwrap();
        assert_eq!(t.v_opt, 0.0);
        assert_eq!(t.residual, 0.0);
        assert!(!t.clipped);
    }

    #[test]
    fn clipping_reports_residual() {
        let r = StarkResponse::calibrated();
        // Needs about −35.5 V, below the −30 V limit.
        let t = tune_to_resonance(&r, (mhz(3000.0), 0.0), 0.0, Line::Ex).unwrap();
        assert_eq!(t.v_opt, -30.0);
        assert!(t.clipped);
        assert_relative_eq!(t.residual, mhz(3000.0) - 30.0 * mhz(245.0) / 2.9, max_relative = 1e-12);
    }

    #[test]
    fn kinked_response_finds_both_halves() {
        let r = split_response();
        let base = (mhz(100.0), mhz(-100.0));
        for target in [mhz(-500.0), mhz(0.0), mhz(900.0), mhz(3000.0)] {
            for line in [Line::Ex, Line::Ey] {
                let t = tune_to_resonance(&r, base, target, line).unwrap();
                let f = |v: f64| {
                    let (a, b) = transition_freqs(&r, base, v).unwrap();
                    (if line == Line::Ex { a } else { b } - target).abs()
                };
                assert!((f(t.v_opt) - t.residual).abs() < 1.0);
                for i in 0..=800 {
                    let v = -30.0 + 0.1 * i as f64;
                    assert!(t.residual <= f(v) + 1e-3);
                }
            }
        }
    }
}
