//! Robust fractional-order reset control.
//!
//! The crate covers the whole design loop for CRONE reset controllers:
//!
//! - [`lti`]: rational transfer functions, state-space models, frequency
//!   responses and the band-limited fractional-power approximation.
//! - [`crone`]: first and second generation CRONE synthesis.
//! - [`reset`]: splitting a CRONE controller into reset and non-reset parts,
//!   partial reset (γ) and reset percentage (p).
//! - [`df`]: sinusoidal-input describing functions, analytic and numeric.
//! - [`design`]: the three-step CRONE reset pipeline (linear design, reset
//!   phase lead, slope retuning).
//! - [`stability`]: closed-loop assembly and the H_β certificate search.
//! - [`sim`]: fixed-step hybrid simulation, reference generation, metrics and
//!   stepped-sine sensitivity estimation.
//! - [`export`]: CSV writers for traces and responses.
//! - [`plant`]: the identified precision positioning stage used as fixture.

pub mod crone;
pub mod design;
pub mod df;
pub mod error;
pub mod export;
pub mod lti;
pub mod plant;
pub mod reset;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
