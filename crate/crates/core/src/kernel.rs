//! Power-law Volterra kernel `K(t,s) = c·(t-s)^{H-1/2}` and the integral
//! functionals of it that enter the energy expansion.
//!
//! All functionals are linear in the normalisation `c`. The model kernel uses
//! `c = √(2H)` (unit-variance Riemann–Liouville fBM at `t = 1`); `c = 1` gives
//! the bare power kernel.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    hurst: f64,
    normalization: f64,
}

impl KernelSpec {
    pub fn new(hurst: f64, normalization: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 0.5) {
            return Err(Error::domain("hurst", hurst, "(0, 1/2]"));
        }
        if !(normalization > 0.0) || !normalization.is_finite() {
            return Err(Error::domain(
                "kernel normalization",
                normalization,
                "(0, inf)",
            ));
        }
        Ok(Self {
            hurst,
            normalization,
        })
    }

    /// Model kernel with `c = √(2H)`.
    pub fn model(hurst: f64) -> Result<Self> {
        Self::new(hurst, libm::sqrt(2.0 * hurst.max(0.0)))
    }

    /// Bare kernel with `c = 1`.
    pub fn bare(hurst: f64) -> Result<Self> {
        Self::new(hurst, 1.0)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Exponent `H - 1/2` of the kernel.
    pub fn exponent(&self) -> f64 {
        self.hurst - 0.5
    }

    /// `K(t, s)` for `0 ≤ s < t`.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain("s", s, "[0, t)"));
        }
        if !(s < t) {
            return Err(Error::domain("s", s, "[0, t)"));
        }
        Ok(self.normalization * libm::pow(t - s, self.exponent()))
    }

    /// `∫_a^b K(t, s) ds` for `0 ≤ a ≤ b ≤ t`, exact.
    pub fn integral(&self, t: f64, a: f64, b: f64) -> f64 {
        let p = self.exponent() + 1.0;
        self.normalization / p * (libm::pow(t - a, p) - libm::pow(t - b, p))
    }

    /// `(K1)(t) = ∫_0^t K(t, s) ds = c·t^{H+1/2}/(H+1/2)`.
    pub fn apply_to_one(&self, t: f64) -> f64 {
        let p = self.exponent() + 1.0;
        self.normalization * libm::pow(t.max(0.0), p) / p
    }

    /// `⟨K1, 1⟩ = c/((H+1/2)(H+3/2))`.
    pub fn inner_k1_one(&self) -> f64 {
        self.normalization / self.double_integral_denominator()
    }

    /// `⟨K1, 1_[0,t]⟩ = c·t^{H+3/2}/((H+1/2)(H+3/2))` for `t ∈ [0, 1]`.
    pub fn inner_k1_indicator(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        let q = self.exponent() + 2.0;
        Ok(self.normalization * libm::pow(t, q) / self.double_integral_denominator())
    }

    /// `⟨K1_[0,t], 1⟩ = c·(1 - (1-t)^{H+3/2})/((H+1/2)(H+3/2))` for `t ∈ [0, 1]`.
    pub fn inner_k_indicator_one(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        let q = self.exponent() + 2.0;
        Ok(self.normalization * (1.0 - libm::pow(1.0 - t, q)) / self.double_integral_denominator())
    }

    /// `d/dt ⟨K1_[0,t], 1⟩ = ∫_t^1 K(u, t) du = c·(1-t)^{H+1/2}/(H+1/2)`.
    pub fn tail_integral(&self, t: f64) -> f64 {
        let p = self.exponent() + 1.0;
        self.normalization * libm::pow((1.0 - t).max(0.0), p) / p
    }

    fn double_integral_denominator(&self) -> f64 {
        let g = self.exponent();
        (1.0 + g) * (2.0 + g)
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("t", t, "[0, 1]"))
    }
}
