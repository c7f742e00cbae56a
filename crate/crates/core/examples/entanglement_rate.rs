//! Waiting time for one heralded remote entangled pair versus collection
//! efficiency.
//!
//! cargo run --example entanglement_rate

use homsim::budget::{entanglement_time, RateConfig};

fn main() -> homsim::Result<()> {
    let base = RateConfig::reference();
    println!("default: {:.1} s", entanglement_time(&base)?);
    let penalised = RateConfig {
        overlap_penalty: true,
        ..base
    };
    println!("with linewidth overlap penalty: {:.1} s", entanglement_time(&penalised)?);

    println!("\n  collection   time (s)");
    for eta in [1e-5, 2e-5, 4e-5, 1e-4, 1e-3, 1e-2] {
        let cfg = RateConfig {
            collection_efficiency: eta,
            ..base
        };
        println!("  {eta:9.0e}   {:10.3e}", entanglement_time(&cfg)?);
    }
    Ok(())
}
