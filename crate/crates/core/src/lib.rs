//! Short-maturity pricing under a rough (Riemann–Liouville) stochastic
//! volatility model.
//!
//! The crate is `no_std` with `alloc`. It contains the pure numerical
//! layer: special functions, the power-law Volterra kernel, the
//! large-deviation energy (Taylor jet and a direct minimiser), the
//! moderate-deviation implied-volatility formulas, Black–Scholes helpers,
//! and the exact-covariance Monte Carlo engine. Parallel execution, file
//! formats and the command line live in the `roughmd` crate.
#![cfg_attr(not(test), no_std)]
// domain checks are written `!(x > 0.0)` on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod blackscholes;
pub mod energy;
mod error;
pub mod kernel;
pub mod simulation;
pub mod specialfn;

pub use error::{Error, Result};
