use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{self, Problem};
use super::{poisson_sigma, FitConstraints, FitResult};
use crate::error::{Error, Result};
use crate::mc::Spectrum;

const REWEIGHT_PASSES: usize = 20;

pub const LORENTZIAN_PARAMS: [&str; 4] = ["offset", "amplitude", "center", "fwhm"];

/// `offset + amplitude·(fwhm/2)²/((f − center)² + (fwhm/2)²)`, in counts per
/// scan point and Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub offset: f64,
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
}

impl LorentzianParams {
    fn to_vec(self) -> Vec<f64> {
        vec![self.offset, self.amplitude, self.center, self.fwhm]
    }
}

pub fn lorentzian(f: f64, p: &[f64]) -> f64 {
    let h = 0.5 * p[3];
    let d = f - p[2];
    p[0] + p[1] * h * h / (d * d + h * h)
}

pub fn lorentzian_gradient(f: f64, p: &[f64]) -> [f64; 4] {
    let (a, h) = (p[1], 0.5 * p[3]);
    let d = f - p[2];
    let q = d * d + h * h;
    [
        1.0,
        h * h / q,
        2.0 * a * d * h * h / (q * q),
        a * h * d * d / (q * q),
    ]
}

struct LorentzProblem<'a> {
    f: &'a [f64],
    y: &'a [f64],
    sigma: Vec<f64>,
}

impl Problem for LorentzProblem<'_> {
    fn n_points(&self) -> usize {
        self.f.len()
    }
    fn n_params(&self) -> usize {
        4
    }
    fn eval(&self, p: &[f64], resid: &mut [f64], mut jac: Option<&mut DMatrix<f64>>) {
        for i in 0..self.f.len() {
            let s = self.sigma[i];
            resid[i] = (self.y[i] - lorentzian(self.f[i], p)) / s;
            if let Some(j) = jac.as_deref_mut() {
                for (k, g) in lorentzian_gradient(self.f[i], p).into_iter().enumerate() {
                    j[(i, k)] = g / s;
                }
            }
        }
    }
}

/// Data-driven starting point: offset from the lowest quartile of counts,
/// centre at the (3-point smoothed) maximum, width from the half-maximum
/// crossings around it.
pub fn initial_lorentzian(freqs: &[f64], counts: &[f64]) -> Result<LorentzianParams> {
    let n = counts.len();
    let mut sorted = counts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = (n / 4).max(1);
    let offset = sorted[..q].iter().sum::<f64>() / q as f64;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let (imax, &peak) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let amplitude = peak - offset;
    if !(amplitude > 3.0 * offset.max(1.0).sqrt()) {
        return Err(Error::NotFound(format!(
            "no significant peak: maximum {peak:.1} against baseline {offset:.1} counts"
        )));
    }
    let half = offset + 0.5 * amplitude;
    let left = (0..imax).rev().find(|&i| smooth[i] < half);
    let right = (imax + 1..n).find(|&i| smooth[i] < half);
    let span = (freqs[n - 1] - freqs[0]).abs();
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => (freqs[r] - freqs[l]).abs(),
        (Some(l), None) => 2.0 * (freqs[imax] - freqs[l]).abs(),
        (None, Some(r)) => 2.0 * (freqs[r] - freqs[imax]).abs(),
        (None, None) => 0.25 * span,
    };
    Ok(LorentzianParams {
        offset,
        amplitude,
        center: freqs[imax],
        fwhm: fwhm.max(span / n as f64),
    })
}

/// Fits one Lorentzian line plus constant offset to a whole spectrum.
pub fn fit_lorentzian(spectrum: &Spectrum, init: Option<LorentzianParams>) -> Result<FitResult> {
    let counts: Vec<f64> = spectrum.counts.iter().map(|&c| c as f64).collect();
    fit_lorentzian_data(&spectrum.freqs, &counts, init, &FitConstraints::none())
}

/// Fits only the points with `lo ≤ f ≤ hi`, e.g. one line of a two-line
/// spectrum.
pub fn fit_lorentzian_window(
    spectrum: &Spectrum,
    lo: f64,
    hi: f64,
    init: Option<LorentzianParams>,
) -> Result<FitResult> {
    fit_lorentzian(&spectrum.window(lo, hi), init)
}

/// Fits counts (which may be non-integer, e.g. noiseless expectations).
pub fn fit_lorentzian_data(
    freqs: &[f64],
    counts: &[f64],
    init: Option<LorentzianParams>,
    constraints: &FitConstraints,
) -> Result<FitResult> {
    if freqs.len() != counts.len() {
        return Err(Error::domain("frequency and count arrays differ in length"));
    }
    if freqs.len() < 5 {
        return Err(Error::domain(format!(
            "Lorentzian fit needs at least 5 points, got {}",
            freqs.len()
        )));
    }
    if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || freqs.iter().any(|f| !f.is_finite()) {
        return Err(Error::domain("counts must be finite and non-negative"));
    }
    let init = match init {
        Some(p) => p,
        None => initial_lorentzian(freqs, counts)?,
    };
    let names: Vec<String> = LORENTZIAN_PARAMS.iter().map(|s| s.to_string()).collect();
    let mut p0 = init.to_vec();
    let free = constraints.apply(&names, &mut p0)?;
    let (fmin, fmax) = freqs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    let span = fmax - fmin;
    let settings = lm::Settings {
        lower: vec![f64::NEG_INFINITY, 0.0, fmin, 1e-6 * span],
        upper: vec![f64::INFINITY, f64::INFINITY, fmax, 10.0 * span],
        free: free.clone(),
        scale: vec![
            init.offset.abs().max(1.0),
            init.amplitude.abs().max(1.0),
            init.fwhm,
            init.fwhm,
        ],
    };
    let mut problem = LorentzProblem {
        f: freqs,
        y: counts,
        sigma: counts.iter().map(|&c| poisson_sigma(c)).collect(),
    };
    let mut out = lm::minimize(&problem, &p0, &settings)?;
    // Count-based weights favour low points and bias sparse spectra. Reweight
    // with the fitted expectation until the fit stops moving, which lands on
    // the Poisson maximum-likelihood solution.
    for _ in 0..REWEIGHT_PASSES {
        problem.sigma = freqs.iter().map(|&f| poisson_sigma(lorentzian(f, &out.params))).collect();
        let next = lm::minimize(&problem, &out.params, &settings)?;
        let moved = next
            .params
            .iter()
            .zip(&out.params)
            .zip(&settings.scale)
            .any(|((a, b), sc)| (a - b).abs() > 1e-7 * a.abs().max(*sc));
        out = next;
        if !moved {
            break;
        }
    }
    Ok(FitResult::from_outcome("lorentzian".into(), names, &free, freqs.len(), out))
}
