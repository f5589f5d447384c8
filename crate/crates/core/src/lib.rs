//! Adaptive replica-exchange stochastic gradient Langevin dynamics.
//!
//! Two Langevin chains run at temperatures `tau_low < tau_high` on an
//! energy that is only observed through noisy estimates. Swaps use the rate
//!
//! ```text
//! exp(gap * (U_low - U_high - gap * sigma_hat_sq / F)),   gap = 1/tau_low - 1/tau_high
//! ```
//!
//! where `sigma_hat_sq` is a stochastic-approximation estimate of the
//! energy-noise variance and `F >= 1` trades bias for swap frequency.
//!
//! Modules:
//! - [`target`]: Gaussian-mixture energies with injected noise
//! - [`kernels`]: SGLD step and schedules
//! - [`adaptation`]: variance estimator and correction term
//! - [`exchange`]: swap rates and the full pair iteration
//! - [`diagnostics`]: W2 / density metrics and the discretisation sweep
//! - [`config`], [`presets`], [`run`]: scenarios and artifacts
//! - [`rng`]: reproducible per-purpose streams

pub mod adaptation;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exchange;
pub mod kernels;
pub mod presets;
pub mod rng;
pub mod run;
pub mod target;
pub mod verify;

pub use error::{Error, Result};
