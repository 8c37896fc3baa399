//! Experiment harness for learning latent LQG controllers from observations.
//!
//! The numerics live in [`lqg_latent_core`]; this crate adds configuration,
//! file formats, parallel sweeps and the command-line interface.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use error::{HarnessError, HarnessResult};
pub use lqg_latent_core as core;
