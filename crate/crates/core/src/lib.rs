//! Two-photon interference between remote solid-state single-photon
//! emitters with inhomogeneous, diffusing optical lines.
//!
//! The crate covers the chain from physics to numbers:
//!
//! * [`model`]: closed-form correlation functions (autocorrelation,
//!   first-order coherence, beamsplitter cross-correlation, dephasing).
//! * [`mc`]: Monte Carlo photon streams, pairwise two-photon interference,
//!   detector imperfections and PLE scans.
//! * [`tcspc`]: coincidence histograms and g⁽²⁾ normalisation.
//! * [`fitting`]: Levenberg–Marquardt fits of Lorentzian lines and g⁽²⁾.
//! * [`stark`]: linear DC Stark response and detuning minimisation.
//! * [`budget`]: g⁽²⁾(0) noise ledger, visibility and entanglement rate.
//! * [`config`], [`presets`], [`pipeline`], [`plot`]: file-driven scenario
//!   runs with CSV/JSON/SVG output, as used by the `homsim` binary.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod config;
pub mod error;
pub mod fitting;
pub mod mc;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod presets;
pub mod stark;
pub mod tcspc;
pub mod units;

pub use error::{Error, Result};
