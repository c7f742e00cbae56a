//! Tabulate the closed-form correlation functions for a pair of emitters.
//!
//! cargo run --example model_curves > curves.csv

use homsim::model::{
    dephasing_envelope, g2_auto, g2_cross, interference_feature_width, AutocorrParams, EmitterModel, PairConfig,
    WidthConvention,
};
use homsim::units::{mhz, ns, to_ns};

fn main() -> homsim::Result<()> {
    let emitter = |f_ex: f64, fwhm: f64| -> homsim::Result<EmitterModel> {
        Ok(EmitterModel {
            f_ex: mhz(f_ex),
            f_ey: mhz(f_ex + 3000.0),
            gamma: 1.0 / ns(12.0),
            sd_fwhm: mhz(fwhm),
            autocorr: AutocorrParams::new(0.9, ns(7.2), ns(118.0))?,
            spin_purity: 1.0,
        })
    };
    let pair = PairConfig::new(emitter(93.0, 88.0)?, emitter(0.0, 106.0)?, 1.0)?;
    for conv in [WidthConvention::IncludeRadiative, WidthConvention::DephasingOnly] {
        eprintln!("feature width ({conv:?}): {:.3} ns", to_ns(interference_feature_width(&pair, conv)?));
    }

    println!("tau_ns,g2_auto,envelope,g2_cross,g2_cross_no_envelope");
    for k in -400..=400 {
        let t = ns(0.1 * k as f64);
        println!(
            "{:.1},{:.6},{:.6},{:.6},{:.6}",
            to_ns(t),
            g2_auto(t, &pair.emitter1.autocorr)?,
            dephasing_envelope(t, pair.emitter1.sd_fwhm, pair.emitter2.sd_fwhm)?,
            g2_cross(t, &pair, true)?,
            g2_cross(t, &pair, false)?
        );
    }
    Ok(())
}
