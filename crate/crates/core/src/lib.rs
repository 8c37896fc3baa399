//! Cost-driven latent model learning for finite-horizon, partially observed
//! linear-quadratic-Gaussian control.
//!
//! The crate is `no_std` with `alloc`. It contains the ground-truth simulator
//! and baselines, the representation learner, latent system identification,
//! certainty-equivalent planning and the evaluation metrics. File formats and
//! the command-line driver live in the companion `lqg-latent` crate.
#![no_std]

extern crate alloc;

pub mod corel;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod normalization;
pub mod oracle;
pub mod quadreg;
pub mod sim;
pub mod sysid;
pub mod system;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
