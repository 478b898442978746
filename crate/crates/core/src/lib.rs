//! Next-POI forecasting that survives new venues.
//!
//! A visit-sequence encoder predicts the *category* of a user's next visit;
//! a proximity prior over trip distances then spreads that category mass over
//! concrete POIs. Because no POI-specific output unit is involved, venues
//! that never appeared in training can still be ranked. A direct
//! POI-classifier baseline and an unseen-POI evaluation harness are included.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod geo;
pub mod encoder;
pub mod nn;
mod output;
pub mod pipeline;
pub mod ranker;
pub mod synthetic;

pub use error::{Error, Result};
