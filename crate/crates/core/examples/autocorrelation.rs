//! Single-emitter autocorrelation: simulate a Hanbury Brown–Twiss
//! measurement from a preset, correlate, fit the three-level model.
//!
//! cargo run --release --example autocorrelation -- [seconds]

use homsim::fitting::{fit_g2_window, FitConstraints, G2Model};
use homsim::mc::simulate_hbt_histogram;
use homsim::presets;
use homsim::units::{ns, to_ns};

fn main() -> homsim::Result<()> {
    let duration: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1800.0);
    let cfg = presets::find("paper-fig3a", None)?.config;
    let (em, dy, setup) = cfg.hbt_setup()?;
    let corr = cfg.correlator()?;

    let shape = dy.autocorr_params()?;
    println!(
        "dynamics imply a = {:.3}, tau1 = {:.2} ns, tau2 = {:.1} ns",
        shape.a,
        to_ns(shape.tau1),
        to_ns(shape.tau2)
    );

    let hist = simulate_hbt_histogram(&em, &dy, &setup, duration, cfg.seed()?, &corr, 10.0)?;
    let shown = hist.rebin(cfg.fit_rebin())?;
    let model = G2Model::Auto;
    let fit = fit_g2_window(&shown, model, &FitConstraints::none(), Some(ns(60.0)))?;
    let (g0, s0) = model.at_zero(&fit);
    println!("{duration} s, {} coincidences", hist.total_counts());
    println!("g2(0) = {g0:.3} ± {s0:.3}");
    for name in ["a", "tau1", "tau2"] {
        let (v, s) = (fit.get(name).unwrap(), fit.sigma(name).unwrap());
        let (v, s) = if name == "a" { (v, s) } else { (to_ns(v), to_ns(s)) };
        println!("{name:>5} = {v:.3} ± {s:.3}");
    }
    Ok(())
}
