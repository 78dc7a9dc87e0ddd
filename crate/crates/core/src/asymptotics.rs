//! Moderate-deviation asymptotics for log-strikes `k_t = k·t^{1/2-H+β}`.
//!
//! Everything here is a closed-form consequence of the energy jet
//! `I''(0)`, `I'''(0)`: the log call price, the implied-variance series,
//! the first-order implied volatility and its skew, and the leading
//! Gao–Lee transfer from `-log c` to implied volatility.

use crate::energy::{check_rho, EnergyCoefficients, VolFunction};
use crate::kernel::KernelSpec;
use crate::{Error, Result};

/// A point `(k, β, t)` of the moderate-deviation regime together with the
/// number of energy derivatives kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MDQuery {
    pub k: f64,
    pub beta: f64,
    pub t: f64,
    pub order: u8,
}

impl MDQuery {
    /// Validates `k ≥ 0`, `t > 0`, `order ∈ {2, 3}` and the `β` range of
    /// that order for Hurst index `hurst`: `(0, H)` for order 2 and
    /// `(0, 2H/3)` for order 3.
    pub fn new(k: f64, beta: f64, t: f64, order: u8, hurst: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::domain("k", k, "[0, inf)"));
        }
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain("t", t, "(0, inf)"));
        }
        let upper = match order {
            2 => hurst,
            3 => 2.0 * hurst / 3.0,
            _ => return Err(Error::Validation("order must be 2 or 3")),
        };
        check_beta(beta, upper, "(0, beta_max(order, H))")?;
        Ok(Self { k, beta, t, order })
    }
}

fn check_beta(beta: f64, upper: f64, domain: &'static str) -> Result<()> {
    if beta > 0.0 && beta < upper {
        Ok(())
    } else {
        Err(Error::domain("beta", beta, domain))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("t", t, "(0, inf)"))
    }
}

/// `k_t = k·t^{1/2-H+β}`.
pub fn log_strike(query: &MDQuery, hurst: f64) -> f64 {
    query.k * libm::pow(query.t, 0.5 - hurst + query.beta)
}

/// `-log c(k_t, t) ≈ I''(0)k²/(2t^{2H-2β}) + I'''(0)k³/(6t^{2H-3β})`, the
/// cubic term only for order 3.
pub fn log_call_md(coeffs: &EnergyCoefficients, query: &MDQuery, hurst: f64) -> f64 {
    let (k, b, t) = (query.k, query.beta, query.t);
    let quadratic = coeffs.i2 * k * k / (2.0 * libm::pow(t, 2.0 * hurst - 2.0 * b));
    if query.order == 2 {
        quadratic
    } else {
        quadratic + coeffs.i3 * k * k * k / (6.0 * libm::pow(t, 2.0 * hurst - 3.0 * b))
    }
}

/// `L_t = I(k·t^β)/t^{2H}` from an energy value computed elsewhere, e.g. by
/// the numerical minimiser at `x = k·t^β`.
pub fn log_call_from_energy(energy: f64, t: f64, hurst: f64) -> Result<f64> {
    check_t(t)?;
    if !(energy >= 0.0) || !energy.is_finite() {
        return Err(Error::domain("energy", energy, "[0, inf)"));
    }
    Ok(energy / libm::pow(t, 2.0 * hurst))
}

/// Implied-variance series truncated after `n` energy derivatives:
///
/// ```text
/// σ² = Σ_{j=0}^{n-2} (-1)^j 2^j / I''(0)^{j+1} · (Σ_{i=3}^{n} I^{(i)}(0)/i! · k^{i-2} t^{(i-2)β})^j
/// ```
///
/// `derivs[i-2]` holds `I^{(i)}(0)` for `i = 2..=n`. Requires `β < 2H/n`.
pub fn implied_variance_series(
    derivs: &[f64],
    k: f64,
    t: f64,
    beta: f64,
    hurst: f64,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Validation("series order must be at least 2"));
    }
    if derivs.len() < n - 1 {
        return Err(Error::Validation(
            "series needs one energy derivative per order",
        ));
    }
    check_t(t)?;
    check_beta(beta, 2.0 * hurst / n as f64, "(0, 2H/n)")?;
    let i2 = derivs[0];
    if !(i2 > 0.0) {
        return Err(Error::domain("I''(0)", i2, "(0, inf)"));
    }
    let scale = k * libm::pow(t, beta);
    let mut inner = 0.0;
    let mut factorial = 2.0;
    let mut power = 1.0;
    for i in 3..=n {
        factorial *= i as f64;
        power *= scale;
        inner += derivs[i - 2] / factorial * power;
    }
    let mut total = 0.0;
    let mut term = 1.0 / i2;
    for _ in 0..=n - 2 {
        total += term;
        term *= -2.0 * inner / i2;
    }
    Ok(total)
}

/// `σ_impl ≈ σ₀ + ρ(σ₀'/σ₀)⟨K1,1⟩·k·t^β`, for `β ∈ (0, 2H/3)`.
pub fn implied_vol_first_order<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
    k: f64,
    t: f64,
    beta: f64,
) -> Result<f64> {
    check_rho(rho)?;
    check_t(t)?;
    check_beta(beta, 2.0 * kernel.hurst() / 3.0, "(0, 2H/3)")?;
    let s0 = vol.sigma0();
    Ok(s0 + rho * vol.sigma0_prime() / s0 * kernel.inner_k1_one() * k * libm::pow(t, beta))
}

/// Skew `ρ(σ₀'/σ₀)⟨K1,1⟩·t^{H-1/2}` of the first-order implied volatility
/// with respect to the log-strike.
pub fn skew_md<V: VolFunction>(vol: &V, rho: f64, kernel: &KernelSpec, t: f64) -> Result<f64> {
    check_rho(rho)?;
    check_t(t)?;
    Ok(rho * vol.sigma0_prime() / vol.sigma0()
        * kernel.inner_k1_one()
        * libm::pow(t, kernel.exponent()))
}

/// Leading-order transfer from `L = -log c` to implied volatility,
/// `σ = k_t/√(2Lt)`.
pub fn gao_lee_iv(k_t: f64, t: f64, l: f64) -> Result<f64> {
    if !(k_t > 0.0) {
        return Err(Error::domain("k_t", k_t, "(0, inf)"));
    }
    check_t(t)?;
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::domain("L", l, "(0, inf)"));
    }
    Ok(k_t / libm::sqrt(2.0 * l * t))
}
