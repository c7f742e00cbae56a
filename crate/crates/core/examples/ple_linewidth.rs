//! Simulate a PLE scan over one spectrally diffusing line and fit it.
//!
//! cargo run --release --example ple_linewidth -- [seed]

use homsim::fitting::fit_lorentzian;
use homsim::mc::{simulate_ple, PleSettings};
use homsim::model::{AutocorrParams, EmitterModel};
use homsim::units::{mhz, ns, to_mhz, US};

fn main() -> homsim::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let em = EmitterModel {
        f_ex: mhz(93.0),
        f_ey: mhz(3093.0),
        gamma: 1.0 / ns(12.0),
        sd_fwhm: mhz(88.0),
        autocorr: AutocorrParams::two_level(ns(12.0))?,
        spin_purity: 1.0,
    };
    let settings = PleSettings {
        init_pulse: 5.0 * US,
        dwell: 10e-3,
        peak_rate: 10_000.0,
        background_rate: 200.0,
    };
    let scan: Vec<f64> = (-100..=140).map(|k| mhz(5.0 * k as f64)).collect();
    let spec = simulate_ple(&em, &scan, &settings, seed)?;
    let fit = fit_lorentzian(&spec, None)?;

    println!("{} points, {:.2} s acquisition", spec.len(), spec.acquisition_time);
    for name in ["center", "fwhm"] {
        let (v, s) = (fit.get(name).unwrap(), fit.sigma(name).unwrap());
        println!("{name:>7} = {:8.2} ± {:.2} MHz", to_mhz(v), to_mhz(s));
    }
    println!("chi2/dof = {:.3}", fit.chi2_reduced);
    Ok(())
}
