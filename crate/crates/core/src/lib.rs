//! Sparse-array adaptive beamformer design.
//!
//! Selects `L` of `M` sensors of a uniform linear array by solving an
//! ℓ1-penalized minimum-output-power problem with ADMM, then re-solves MVDR
//! on the chosen subarray. Baselines (exhaustive enumeration, fixed
//! geometries) and a seeded experiment harness are included.

pub mod admm;
pub mod beamformer;
pub mod config;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod selection;
pub mod signal_model;

pub use error::{Error, Result};
