//! Radar PRI pulse-train simulation and a domain-generalizing emitter
//! classifier.
//!
//! * [`sim`] synthesizes labeled PRI datasets under missing-pulse,
//!   spurious-pulse and measurement-error conditions.
//! * [`augment`] holds the noise generators that turn a recorded sequence
//!   into one from a simulated environment.
//! * [`nn`] is the small tensor/layer library everything trains on.
//! * [`model`] is the feature extractor, label classifier and
//!   gradient-reversed domain classifier, plus the composite loss.
//! * [`train`] runs training and few-shot fine-tuning.
//! * [`eval`] computes per-scenario, per-modulation and per-emitter
//!   accuracy tables and writes reports.
//! * [`experiment`] runs the multi-seed comparison against a plain classifier.
//! * [`io`] reads and writes datasets and checkpoints.

pub mod augment;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod model;
pub mod nn;
pub mod seed;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
