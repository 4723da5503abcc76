//! Difference-based estimation of time-varying autocovariances with
//! simultaneous confidence bands.
//!
//! For a series `y_i = mu(i/n) + e_i` with a possibly discontinuous mean and
//! locally stationary errors, the squared lag-`k` differences satisfy
//! `E (y_{i+k} - y_i)^2 ~ 2 (gamma_0(t) - gamma_k(t))` away from mean jumps.
//! Smoothing them with local-linear weights yields `gamma_0` (from a lag `h`
//! beyond the dependence range) and `gamma_k = gamma_0 - (gamma_0 - gamma_k)`.

pub mod acov;
pub mod cli;
pub mod diffseries;
pub mod error;
pub mod kernel;
pub mod locallinear;
pub mod lrv;
pub mod pipeline;
pub mod procgen;
pub mod rng;
pub mod scb;
pub mod study;
pub mod tuning;

/// Shortest series accepted by the estimation entry points.
pub const MIN_SERIES_LEN: usize = 50;

pub use error::{Error, ErrorCategory, Result};
pub use kernel::Kernel;
