//! Black–Scholes call prices (zero rates), implied-volatility inversion and
//! the closed-form `J` factor of the constant-volatility pricing identity
//!
//! ```text
//! c(x, ε²) = exp(-x²/(2σ²ε²)) · exp(x) · J(ε, x).
//! ```
//!
//! Out-of-the-money prices are formed from differences of the scaled
//! complementary error function so that deep wings keep full relative
//! accuracy; that matters for inverting Monte Carlo prices of options a few
//! standard deviations out of the money.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::specialfn::{erfcx_diff_centered, normal_cdf, normal_pdf};
use crate::{Error, Result};

const IV_LOWER: f64 = 1e-6;
const IV_UPPER: f64 = 5.0;
const IV_BISECTION_WIDTH: f64 = 1e-4;
const IV_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSQuote {
    pub spot: f64,
    pub strike: f64,
    pub vol: f64,
    pub t: f64,
}

impl BSQuote {
    pub fn new(spot: f64, strike: f64, vol: f64, t: f64) -> Result<Self> {
        positive("spot", spot)?;
        positive("strike", strike)?;
        positive("vol", vol)?;
        positive("t", t)?;
        Ok(Self {
            spot,
            strike,
            vol,
            t,
        })
    }

    pub fn intrinsic(&self) -> f64 {
        (self.spot - self.strike).max(0.0)
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, v, "(0, inf)"))
    }
}

/// Undiscounted call price.
pub fn bs_call(quote: &BSQuote) -> f64 {
    let total_vol = quote.vol * libm::sqrt(quote.t);
    let otm = otm_price(quote.spot, quote.strike, total_vol);
    if quote.strike >= quote.spot {
        otm
    } else {
        otm + (quote.spot - quote.strike)
    }
}

/// `∂c/∂σ`.
pub fn bs_vega(quote: &BSQuote) -> f64 {
    let sqrt_t = libm::sqrt(quote.t);
    let v = quote.vol * sqrt_t;
    let d1 = -libm::log(quote.strike / quote.spot) / v + 0.5 * v;
    quote.spot * normal_pdf(d1) * sqrt_t
}

/// Price of the out-of-the-money option at this strike: the call when
/// `strike ≥ spot`, the put otherwise. `total_vol = σ√t`.
fn otm_price(spot: f64, strike: f64, total_vol: f64) -> f64 {
    let k = libm::log(strike / spot);
    let v = total_vol;
    if k >= 0.0 {
        let d1 = -k / v + 0.5 * v;
        let d2 = d1 - v;
        if d1 <= 0.0 {
            0.5 * spot
                * libm::exp(-0.5 * d1 * d1)
                * erfcx_diff_centered(k / v * FRAC_1_SQRT_2, 0.5 * v * FRAC_1_SQRT_2)
        } else {
            spot * normal_cdf(d1) - strike * normal_cdf(d2)
        }
    } else {
        let d2 = -k / v - 0.5 * v;
        let d1 = d2 + v;
        if d2 >= 0.0 {
            0.5 * strike
                * libm::exp(-0.5 * d2 * d2)
                * erfcx_diff_centered(-k / v * FRAC_1_SQRT_2, 0.5 * v * FRAC_1_SQRT_2)
        } else {
            strike * normal_cdf(-d2) - spot * normal_cdf(-d1)
        }
    }
}

/// Implied volatility of an undiscounted call.
///
/// Bisection on `[1e-6, 5]` down to a bracket of width `1e-4`, then Newton
/// on the logarithm of the out-of-the-money price (put-call parity maps
/// in-the-money calls to puts), falling back to bisection whenever a step
/// leaves the bracket.
pub fn bs_implied_vol(price: f64, spot: f64, strike: f64, t: f64) -> Result<f64> {
    positive("spot", spot)?;
    positive("strike", strike)?;
    positive("t", t)?;
    if !price.is_finite() {
        return Err(Error::domain("price", price, "finite"));
    }
    let intrinsic = (spot - strike).max(0.0);
    if price <= intrinsic {
        return Err(Error::BelowIntrinsic { price, intrinsic });
    }
    if price >= spot {
        return Err(Error::AboveSpot { price, spot });
    }
    let target = if strike >= spot {
        price
    } else {
        price - (spot - strike)
    };
    if !(target > 0.0) {
        return Err(Error::BelowIntrinsic { price, intrinsic });
    }
    let sqrt_t = libm::sqrt(t);
    let ln_target = libm::log(target);
    let price_at = |sigma: f64| otm_price(spot, strike, sigma * sqrt_t);

    let mut lo = IV_LOWER;
    let mut hi = IV_UPPER;
    while price_at(hi) < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::NonConvergence {
                what: "implied volatility bracket",
                iterations: 0,
            });
        }
    }
    while price_at(lo) > target {
        lo *= 0.1;
        if lo < 1e-12 {
            return Err(Error::NonConvergence {
                what: "implied volatility bracket",
                iterations: 0,
            });
        }
    }

    let mut iterations = 0;
    while hi - lo > IV_BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if price_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let mut sigma = 0.5 * (lo + hi);
    while iterations < IV_MAX_ITER {
        iterations += 1;
        let p = price_at(sigma);
        let residual = libm::log(p) - ln_target;
        if residual == 0.0 {
            return Ok(sigma);
        }
        if residual < 0.0 {
            lo = sigma;
        } else {
            hi = sigma;
        }
        let v = sigma * sqrt_t;
        let d1 = -libm::log(strike / spot) / v + 0.5 * v;
        let vega = spot * normal_pdf(d1) * sqrt_t;
        let mut next = sigma - residual * p / vega;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - sigma).abs();
        sigma = next;
        if step <= 4.0 * f64::EPSILON * sigma || hi - lo <= 4.0 * f64::EPSILON * sigma {
            return Ok(sigma);
        }
    }
    Err(Error::NonConvergence {
        what: "implied volatility",
        iterations,
    })
}

/// Closed-form `J(ε, x)` for constant volatility `σ`:
/// `J = exp(-(εσ)²/2)·M(-α+εσ) - M(-α)` with `M(β) = exp(β²/2)·Φ(β - εσ/2)`
/// and `α = x/(σε)`.
///
/// Evaluated as `½·exp(-x/2 - (εσ)²/8)·[erfcx((α-εσ/2)/√2) - erfcx((α+εσ/2)/√2)]`,
/// which never forms the overflowing factor `exp(α²/2)`.
pub fn bs_j(epsilon: f64, x: f64, sigma: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    positive("sigma", sigma)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain("x", x, "[0, inf)"));
    }
    let v = epsilon * sigma;
    let alpha = x / v;
    Ok(0.5
        * libm::exp(-0.5 * x - 0.125 * v * v)
        * erfcx_diff_centered(alpha * FRAC_1_SQRT_2, 0.5 * v * FRAC_1_SQRT_2))
}

/// Leading asymptote `ε^{3-4β}σ³/(x²√(2π))` of `J(ε, x·ε^{2β})` as `ε → 0`,
/// valid for `β ∈ [0, 1/2)`.
pub fn bs_j_moderate(epsilon: f64, x: f64, sigma: f64, beta: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    positive("x", x)?;
    positive("sigma", sigma)?;
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::domain("beta", beta, "[0, 1/2)"));
    }
    Ok(libm::pow(epsilon, 3.0 - 4.0 * beta) * sigma * sigma * sigma
        / (x * x * libm::sqrt(2.0 * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn call(s: f64, k: f64, vol: f64, t: f64) -> f64 {
        bs_call(&BSQuote::new(s, k, vol, t).unwrap())
    }

    /// Undiscounted call by direct integration of the lognormal payoff,
    /// E[(S_T - K)^+] = ∫ (S e^{-v²/2 + v z} - K)^+ φ(z) dz.
    fn call_by_quadrature(s: f64, k: f64, vol: f64, t: f64) -> f64 {
        let v = vol * t.sqrt();
        let z0 = ((k / s).ln() + 0.5 * v * v) / v;
        let n = 200_000;
        let upper = z0.max(0.0) + 12.0;
        let h = (upper - z0) / n as f64;
        let f = |z: f64| (s * (-0.5 * v * v + v * z).exp() - k).max(0.0) * normal_pdf(z);
        let mut acc = f(z0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(z0 + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn atm_identity() {
        let expected = 2.0 * normal_cdf(0.1) - 1.0;
        assert!((call(1.0, 1.0, 0.2, 1.0) - expected).abs() < 1e-15);
        assert!((call(1.0, 1.0, 0.2, 1.0) - 0.079_655_674_554_058).abs() < 1e-14);
    }

    #[test]
    fn matches_payoff_quadrature() {
        for &(k, vol, t) in &[
            (0.9, 0.2, 0.5),
            (1.0, 0.3, 0.1),
            (1.3, 0.25, 0.25),
            (0.7, 0.4, 1.0),
        ] {
            let q = call_by_quadrature(1.0, k, vol, t);
            let c = call(1.0, k, vol, t);
            assert!((c - q).abs() < 1e-12, "K={k}: {c} vs {q}");
        }
    }

    #[test]
    fn vanishing_vol_gives_intrinsic() {
        assert_eq!(call(1.0, 0.9, 1e-12, 1.0), 1.0 - 0.9);
        assert_eq!(call(1.0, 1.1, 1e-12, 1.0), 0.0);
        assert!(call(1.0, 1.0, 1e-12, 1.0) < 1e-12);
    }

    #[test]
    fn deep_otm_keeps_relative_accuracy() {
        // reference values from 50-digit arithmetic
        let c = call(1.0, 2.0, 0.2, 0.01);
        let reference = 1.409_759_184_996_046_8e-266;
        assert!((c - reference).abs() < 1e-12 * reference, "{c:e}");

        let c = call(1.0, 1.25, 0.2, 0.04);
        let reference = 9.174_777_879_671_166_7e-11;
        assert!((c - reference).abs() < 1e-12 * reference, "{c:e}");
        let q = call_by_quadrature(1.0, 1.25, 0.2, 0.04);
        assert!((c - q).abs() < 1e-8 * q);
    }

    #[test]
    fn far_wing_underflows_to_zero_not_negative() {
        assert_eq!(call(1.0, 20.0, 0.01, 0.01), 0.0);
    }

    #[test]
    fn implied_vol_round_trip() {
        let p = call(1.0, 1.0, 0.2557, 0.5);
        let iv = bs_implied_vol(p, 1.0, 1.0, 0.5).unwrap();
        assert!((iv - 0.2557).abs() < 1e-10);

        let iv = bs_implied_vol(0.079_655_7, 1.0, 1.0, 1.0).unwrap();
        assert!((iv - 0.2).abs() < 1e-4);
    }

    #[test]
    fn implied_vol_boundaries() {
        assert!(matches!(
            bs_implied_vol(1.0 - 0.9, 1.0, 0.9, 1.0),
            Err(Error::BelowIntrinsic { .. })
        ));
        assert!(matches!(
            bs_implied_vol(0.0, 1.0, 1.1, 1.0),
            Err(Error::BelowIntrinsic { .. })
        ));
        assert!(matches!(
            bs_implied_vol(1.0, 1.0, 1.1, 1.0),
            Err(Error::AboveSpot { .. })
        ));
    }

    #[test]
    fn implied_vol_reprices_to_spot_tolerance() {
        for &k in &[0.5, 0.8, 1.0, 1.2, 1.8] {
            for &vol in &[0.01, 0.1, 0.5, 2.0] {
                let p = call(1.0, k, vol, 0.5);
                if p <= (1.0 - k).max(0.0) || p <= 0.0 {
                    continue;
                }
                let iv = bs_implied_vol(p, 1.0, k, 0.5).unwrap();
                assert!((call(1.0, k, iv, 0.5) - p).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn j_at_money_and_fixed_strike_asymptotes() {
        let sigma = 0.2;
        let eps: f64 = 2f64.powi(-12);
        let j0 = bs_j(eps, 0.0, sigma).unwrap();
        let ratio = j0 * (2.0 * PI).sqrt() / (eps * sigma);
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");

        let x: f64 = 0.1;
        let mut previous = f64::INFINITY;
        for j in 4..=12 {
            let eps = 2f64.powi(-j);
            let r = bs_j(eps, x, sigma).unwrap() * x * x * (2.0 * PI).sqrt() * (0.5 * x).exp()
                / (eps * sigma).powi(3);
            let err = (r - 1.0).abs();
            assert!(err < previous);
            previous = err;
        }
        assert!(previous < 1e-3);
    }

    #[test]
    fn j_reproduces_call_prices() {
        for &sigma in &[0.2, 0.2557] {
            for &x in &[0.01, 0.1, 0.3] {
                for &eps in &[0.05, 0.2] {
                    let j = bs_j(eps, x, sigma).unwrap();
                    let lhs = (-x * x / (2.0 * sigma * sigma * eps * eps)).exp() * x.exp() * j;
                    let rhs = call(1.0, x.exp(), sigma, eps * eps);
                    assert!((lhs - rhs).abs() <= 1e-12 * rhs, "x={x} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn moderate_asymptote_properties() {
        let beta = 0.2;
        let a = bs_j_moderate(0.1, 0.4, 0.2557, beta).unwrap();
        let b = bs_j_moderate(0.05, 0.4, 0.2557, beta).unwrap();
        assert!((b / a - 2f64.powf(-(3.0 - 4.0 * beta))).abs() < 1e-14);
        assert!(bs_j_moderate(0.1, 0.4, 0.2, 0.5).is_err());
        let fixed = bs_j_moderate(0.1, 0.4, 0.2, 0.0).unwrap();
        assert!((fixed - 0.001 * 0.008 / (0.16 * (2.0 * PI).sqrt())).abs() < 1e-18);
    }

    #[test]
    fn moderate_ratio_tends_to_one() {
        let (x, sigma, beta) = (0.4, 0.2557, 0.2);
        let mut last = f64::NAN;
        for j in 2..=10 {
            let eps = 2f64.powi(-j);
            let r = bs_j(eps, x * eps.powf(2.0 * beta), sigma).unwrap()
                / bs_j_moderate(eps, x, sigma, beta).unwrap();
            last = r;
        }
        assert!((last - 1.0).abs() < 0.02, "{last}");
    }

    #[test]
    fn log_j_is_subpolynomial() {
        let (x, sigma, beta, theta) = (0.4, 0.2557, 0.2, 0.1);
        let scaled = |j: i32| {
            let eps = 2f64.powi(-j);
            let jv = bs_j(eps, x * eps.powf(2.0 * beta), sigma).unwrap();
            eps.powf(theta) * jv.ln().abs()
        };
        let mid = scaled(60);
        let far = scaled(200);
        let farther = scaled(400);
        assert!(far < mid && farther < far, "{mid} {far} {farther}");
    }

    proptest! {
        #[test]
        fn call_within_no_arbitrage_bounds(k in 0.2f64..5.0, vol in 0.01f64..2.0, t in 0.001f64..3.0) {
            let c = call(1.0, k, vol, t);
            prop_assert!(c >= (1.0 - k).max(0.0) - 1e-15);
            prop_assert!(c <= 1.0);
        }

        #[test]
        fn call_monotone_in_vol_and_time(k in 0.5f64..2.0, vol in 0.05f64..1.0, t in 0.01f64..2.0) {
            prop_assert!(call(1.0, k, vol * 1.01, t) >= call(1.0, k, vol, t));
            prop_assert!(call(1.0, k, vol, t * 1.01) >= call(1.0, k, vol, t));
        }

        #[test]
        fn call_convex_in_strike(k in 0.6f64..1.6, vol in 0.1f64..0.8, t in 0.05f64..1.0) {
            let h = 0.01;
            let second = call(1.0, k - h, vol, t) - 2.0 * call(1.0, k, vol, t) + call(1.0, k + h, vol, t);
            prop_assert!(second >= -1e-14);
        }

        #[test]
        fn implied_vol_recovers_vol(vol in 0.01f64..2.0, k in 0.7f64..1.4) {
            let p = call(1.0, k, vol, 0.5);
            // below this vega the price no longer determines σ to 1e-10
            prop_assume!(bs_vega(&BSQuote::new(1.0, k, vol, 0.5).unwrap()) > 1e-4);
            let iv = bs_implied_vol(p, 1.0, k, 0.5).unwrap();
            prop_assert!((iv - vol).abs() < 1e-10, "iv={} vol={}", iv, vol);
        }
    }
}
