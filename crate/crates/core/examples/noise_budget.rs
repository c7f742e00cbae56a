//! The g2_par(0) noise ledger and the visibility it implies.
//!
//! cargo run --example noise_budget

use homsim::budget::{
    background_contribution, compose, spectral_impurity_contribution, visibility, ImpurityMode, Measurement,
    NoiseBudget,
};

fn main() -> homsim::Result<()> {
    let b = NoiseBudget::reference();
    print!("{}", b.table());
    println!("total g2_par(0) = {:.2}", compose(&b));

    println!("\nbackground term from 80 of 1100 cps: {:.4}", background_contribution(1100.0, 80.0)?);
    for mode in [ImpurityMode::PaperLedger, ImpurityMode::Model] {
        println!(
            "impurity term at 94% purity ({mode:?}): {:.4}",
            spectral_impurity_contribution(0.94, mode)?
        );
    }

    let eta = visibility(Measurement::new(0.54, 0.04), Measurement::new(0.35, 0.04))?;
    println!("\nvisibility = {:.2} ± {:.2}", eta.value, eta.sigma);
    Ok(())
}
