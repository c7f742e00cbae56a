//! Tune one emitter onto another with a gate voltage and simulate the
//! two-line PLE scans along the way.
//!
//! cargo run --release --example stark_tuning

use homsim::fitting::fit_lorentzian_window;
use homsim::mc::PleSettings;
use homsim::model::{AutocorrParams, EmitterModel};
use homsim::stark::{simulate_tuning_scan, transition_freqs, tune_to_resonance, Line, ScanSetup, StarkResponse};
use homsim::units::{mhz, ns, to_mhz, US};

fn emitter(f_ex_mhz: f64, fwhm_mhz: f64) -> homsim::Result<EmitterModel> {
    Ok(EmitterModel {
        f_ex: mhz(f_ex_mhz),
        f_ey: mhz(f_ex_mhz + 3000.0),
        gamma: 1.0 / ns(12.0),
        sd_fwhm: mhz(fwhm_mhz),
        autocorr: AutocorrParams::two_level(ns(12.0))?,
        spin_purity: 1.0,
    })
}

fn main() -> homsim::Result<()> {
    let resp = StarkResponse::calibrated();
    let nv1 = emitter(270.0, 85.0)?;
    let nv2 = emitter(0.0, 217.0)?;

    let t = tune_to_resonance(&resp, (nv1.f_ex, nv1.f_ey), nv2.f_ex, Line::Ex)?;
    println!("V_opt = {:.3} V, residual {:.1} MHz, clipped: {}", t.v_opt, to_mhz(t.residual), t.clipped);
    let (ex, _) = transition_freqs(&resp, (nv1.f_ex, nv1.f_ey), -2.9)?;
    println!("at -2.9 V NV1 sits {:.1} MHz from NV2", to_mhz(ex - nv2.f_ex));

    let setup = ScanSetup {
        nv1,
        nv2,
        line: Line::Ex,
        scan: (-300..=500).map(|k| mhz(10.0 * k as f64)).collect(),
        settings: PleSettings {
            init_pulse: 5.0 * US,
            dwell: 10e-3,
            peak_rate: 10_000.0,
            background_rate: 200.0,
        },
    };
    let volts = [-30.0, -20.0, -10.0, -2.9, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0];
    let scan = simulate_tuning_scan(&resp, &setup, &volts, 2)?;
    println!("\n  V (V)   NV1 (MHz)   fitted NV1 (MHz)");
    for (i, v) in scan.voltages.iter().enumerate() {
        let f1 = scan.nv1_freqs[i];
        // Only fit NV1 where it is well clear of the NV2 line.
        let clear = (f1 - scan.nv2_freq).abs() > mhz(500.0);
        let fitted = if clear {
            fit_lorentzian_window(&scan.spectra[i], f1 - mhz(300.0), f1 + mhz(300.0), None)
                .ok()
                .and_then(|f| f.get("center"))
                .map(|c| format!("{:10.1}", to_mhz(c)))
        } else {
            None
        };
        println!("{v:7.1} {:11.1}   {}", to_mhz(f1), fitted.unwrap_or_else(|| (if clear { "  no fit" } else { "   overlap" }).into()));
    }
    if let Some(vc) = scan.crossing_voltage() {
        println!("\nlines cross at {vc:.2} V");
    }
    Ok(())
}
