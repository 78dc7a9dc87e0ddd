//! Exact-covariance Monte Carlo for the rough exponential-volatility model
//!
//! ```text
//! dX_t = -½σ²(B̂_t)dt + σ(B̂_t)dZ_t,   Z = ρ̄W + ρB,   B̂_t = ∫₀ᵗ K(t,s)dB_s,
//! ```
//!
//! with `σ(x) = σ₀·exp(ηx/2)`. The pair `(Z, B̂)` is Gaussian with a known
//! covariance on any time grid, so it is sampled exactly through a Cholesky
//! factor; only the log-price is discretised.

mod covariance;
mod pricing;
mod sampling;

pub use covariance::{
    bhat_covariance, build_covariance, cholesky_factor, cross_covariance, g_function, JitterPolicy,
    JointCovariance,
};
pub use pricing::{
    mc_call_price, mc_smile, mc_smile_with, Executor, IvFailure, MCEstimate, MonteCarloPricer,
    Sequential, SmilePoint, CHUNK_PATHS,
};
pub use sampling::{euler_logprice, path_rng, sample_paths, PathBundle};

use crate::energy::{check_rho, ExpVol};
use crate::kernel::KernelSpec;
use crate::{Error, Result};

/// Model parameters; the kernel normalisation defaults to `√(2H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub hurst: f64,
    pub rho: f64,
    pub eta: f64,
    pub sigma0: f64,
    pub kernel_normalization: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, rho: f64, eta: f64, sigma0: f64) -> Result<Self> {
        Self::with_normalization(hurst, rho, eta, sigma0, libm::sqrt(2.0 * hurst.max(0.0)))
    }

    pub fn with_normalization(
        hurst: f64,
        rho: f64,
        eta: f64,
        sigma0: f64,
        kernel_normalization: f64,
    ) -> Result<Self> {
        KernelSpec::new(hurst, kernel_normalization)?;
        check_rho(rho)?;
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::domain("eta", eta, "[0, inf)"));
        }
        ExpVol::new(sigma0, eta)?;
        Ok(Self {
            hurst,
            rho,
            eta,
            sigma0,
            kernel_normalization,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::new(self.hurst, self.kernel_normalization)
            .expect("parameters validated at construction")
    }

    pub fn vol(&self) -> ExpVol {
        ExpVol::new(self.sigma0, self.eta).expect("parameters validated at construction")
    }

    /// `ρ̄ = √(1 - ρ²)`.
    pub fn rho_bar(&self) -> f64 {
        libm::sqrt(1.0 - self.rho * self.rho)
    }
}

/// Uniform grid `t_i = i·T/n`, `i = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub n_steps: usize,
    pub horizon: f64,
}

impl SimGrid {
    pub fn new(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::Validation("grid needs at least 2 steps"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("horizon", horizon, "(0, inf)"));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// Grid time `t_i` for `i = 0..=n`; the last node is exactly `T`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.3, -0.7571, 0.2928, 0.2557).is_ok());
        assert!(ModelParams::new(0.0, 0.0, 0.1, 0.2).is_err());
        assert!(ModelParams::new(0.6, 0.0, 0.1, 0.2).is_err());
        assert!(ModelParams::new(0.3, 1.0, 0.1, 0.2).is_err());
        assert!(ModelParams::new(0.3, 0.0, -0.1, 0.2).is_err());
        assert!(ModelParams::new(0.3, 0.0, 0.1, 0.0).is_err());
        assert!(ModelParams::with_normalization(0.3, 0.0, 0.1, 0.2, 0.0).is_err());
        let p = ModelParams::new(0.3, 0.6, 0.1, 0.2).unwrap();
        assert!((p.kernel_normalization - 0.6f64.sqrt()).abs() < 1e-16);
        assert!((p.rho_bar() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(SimGrid::new(1, 1.0).is_err());
        assert!(SimGrid::new(4, 0.0).is_err());
        let g = SimGrid::new(3, 0.3).unwrap();
        assert_eq!(g.time(3), 0.3);
        assert_eq!(g.time(0), 0.0);
    }
}
