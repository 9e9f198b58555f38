//! User verification from historical geo-location traces.
//!
//! Raw fixes are resampled, clustered into per-user location clusters and
//! encoded as discrete observation symbols (cluster label x time zone x
//! day type, plus a day separator). Three verifiers score windows of those
//! symbols: sequence matching, a first-order Markov chain and an HMM trained
//! with marginal or Laplace emission smoothing. The evaluation module runs
//! the genuine/impostor protocol and reports equal error rates.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod io;
pub mod observation;
pub mod pipeline;
pub mod synth;
pub mod verifier;

pub use error::{Error, Result};
