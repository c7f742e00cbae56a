//! Event-driven Monte Carlo: emitter photon streams, pairwise two-photon
//! interference at the beamsplitter, detector imperfections and PLE scans.

mod dynamics;
mod hom;
mod ple;
mod stream;

pub use dynamics::{simulate_emitter_stream, CollectedStreamSampler, EmissionDynamics};
pub use hom::{
    collection_for_detected_rate, simulate_hbt, simulate_hbt_histogram, simulate_hom,
    simulate_hom_histogram, HbtSetup, HomExpectation, HomSetup, Polarization,
    DEFAULT_BATCH_DURATION, DEFAULT_MAX_OVERLAP,
};
pub use ple::{expected_ple_counts, simulate_ple, simulate_ple_lines, PleLine, PleSettings, Spectrum};
pub use stream::{Click, ClickStream, Detector, Provenance};
#[cfg(test)]
pub(crate) use hom::gauss5;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{GHZ, PS};

/// Offset of photons from non-selected transitions; they never interfere.
pub const DEFAULT_IMPURITY_DETUNING: f64 = 3.0 * GHZ;

/// Default Gaussian timing jitter per detector.
pub const DEFAULT_JITTER_SIGMA: f64 = 50.0 * PS;

/// RNG stream keyed by `(seed, stream)`; batches use their index as stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmitterId {
    One,
    Two,
}

/// One emitted (or collected) photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    pub emit_time: f64,
    /// Centre frequency sampled for this emission (Hz).
    pub center_freq: f64,
    pub emitter_id: EmitterId,
    /// False for photons from other transitions (spin impurity).
    pub selected_line: bool,
}

/// Single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Detector dark counts (counts/s).
    pub dark_rate: f64,
    /// Sample fluorescence and stray light reaching this detector (counts/s).
    pub background_rate: f64,
    /// Gaussian timing spread (s).
    pub jitter_sigma: f64,
    /// Non-paralysable dead time (s).
    pub dead_time: f64,
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            background_rate: 0.0,
            jitter_sigma: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("efficiency", self.efficiency),
            ("dark_rate", self.dark_rate),
            ("background_rate", self.background_rate),
            ("jitter_sigma", self.jitter_sigma),
            ("dead_time", self.dead_time),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("detector {name} = {v} must be finite and >= 0")));
            }
        }
        if self.efficiency > 1.0 {
            return Err(Error::Config(format!(
                "detector efficiency {} exceeds 1",
                self.efficiency
            )));
        }
        Ok(())
    }

    pub fn noise_rate(&self) -> f64 {
        self.dark_rate + self.background_rate
    }
}
