//! Special functions used by the covariance assembly and the Black–Scholes
//! layer: the Gauss hypergeometric series `2F1(1, 1+γ; 3-γ; z)`, the normal
//! cdf and the scaled complementary error function.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;

/// Above this argument `2F1` is evaluated through the linear transformation
/// to `1 - z`.
const TRANSFORM_THRESHOLD: f64 = 0.95;

/// Switch point between `exp(x²)·erfc(x)` and the continued fraction.
const ERFCX_CF_THRESHOLD: f64 = 4.0;

/// Truncation controls for power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_terms: 10_000,
        }
    }
}

impl SeriesConfig {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !rel_tol.is_finite() {
            return Err(Error::Validation("series rel_tol must be positive"));
        }
        if max_terms == 0 {
            return Err(Error::Validation("series max_terms must be at least 1"));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

/// `2F1(1, 1+γ; 3-γ; z)` for `0 ≤ γ < 1/2` and `0 ≤ z ≤ 1`.
///
/// The series converges at `z = 1` because `c - a - b = 1 - 2γ > 0`; there
/// Gauss's summation gives `(2-γ)/(1-2γ)`. For `z > 0.95` the linear
/// transformation to `1 - z` is used, otherwise the forward term recurrence.
pub fn gauss_2f1_special(gamma: f64, z: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::domain("gamma", gamma, "[0, 1/2)"));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain("z", z, "[0, 1]"));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z == 1.0 {
        return Ok(gauss_sum_at_one(gamma));
    }
    if z <= TRANSFORM_THRESHOLD {
        return series_a_one(1.0 + gamma, 3.0 - gamma, z, cfg);
    }
    if gamma == 0.0 {
        // c - a - b = 1 is an integer and the transformation degenerates;
        // 2F1(1, 1; 3; z) has a closed form instead.
        let w = 1.0 - z;
        return Ok(2.0 * (w * libm::log(w) + z) / (z * z));
    }
    let w = 1.0 - z;
    // the regular part is about (2-γ)/(1-2γ) times larger than the result
    // and cancels against the singular part, so it needs a tighter tolerance
    let gauss = gauss_sum_at_one(gamma);
    let inner = SeriesConfig {
        rel_tol: (cfg.rel_tol / gauss).max(0.5 * f64::EPSILON),
        max_terms: cfg.max_terms,
    };
    let regular = gauss * series_a_one(1.0 + gamma, 2.0 * gamma, w, &inner)?;
    let singular_coeff =
        libm::tgamma(3.0 - gamma) * libm::tgamma(2.0 * gamma - 1.0) / libm::tgamma(1.0 + gamma);
    let singular = libm::pow(w, 1.0 - 2.0 * gamma) * singular_coeff * libm::pow(z, gamma - 2.0);
    Ok(regular + singular)
}

/// Gauss summation `Γ(c)Γ(c-a-b) / (Γ(c-a)Γ(c-b))` for `a = 1`, `b = 1+γ`,
/// `c = 3-γ`, which reduces to `(2-γ)/(1-2γ)`.
fn gauss_sum_at_one(gamma: f64) -> f64 {
    (2.0 - gamma) / (1.0 - 2.0 * gamma)
}

/// `2F1(1, b; c; w)` by forward recurrence. Every term is positive for the
/// parameters used here; the loop stops once a geometric bound on the
/// remaining tail drops below `rel_tol · sum`.
fn series_a_one(b: f64, c: f64, w: f64, cfg: &SeriesConfig) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..cfg.max_terms {
        let nf = n as f64;
        let ratio = (b + nf) / (c + nf) * w;
        term *= ratio;
        sum += term;
        // ratios approach w monotonically, from above when b > c
        let bound = if ratio > w { ratio } else { w };
        if bound < 1.0 && term * bound / (1.0 - bound) <= cfg.rel_tol * sum {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        what: "hypergeometric series",
        iterations: cfg.max_terms,
    })
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Standard normal cdf via `erfc`, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < ERFCX_CF_THRESHOLD {
        exp_square(x) * libm::erfc(x)
    } else {
        0.5 * FRAC_2_SQRT_PI / erfc_fraction(x, 1)
    }
}

/// `erfcx(a) - erfcx(b)` for `b ≥ a`, without the cancellation of the naive
/// difference when `b - a` is small compared with `a`.
pub fn erfcx_diff(a: f64, b: f64) -> f64 {
    erfcx_diff_centered(0.5 * (a + b), 0.5 * (b - a))
}

/// `erfcx(mid - half) - erfcx(mid + half)` for `half ≥ 0`. Taking the
/// half-width separately keeps it exact when it is below the resolution of
/// `mid`.
pub fn erfcx_diff_centered(mid: f64, half: f64) -> f64 {
    let a = mid - half;
    if a >= 0.5 && 2.0 * half <= 0.25 * a {
        let integral: f64 = GL8_NODES
            .iter()
            .zip(GL8_WEIGHTS.iter())
            .map(|(&node, &weight)| weight * erfcx_derivative(mid + half * node))
            .sum();
        -half * integral
    } else {
        erfcx(a) - erfcx(mid + half)
    }
}

/// `d/dx erfcx(x) = 2x·erfcx(x) - 2/√π`. In the continued-fraction regime it
/// is formed from the fraction tail so that the two leading terms never
/// cancel.
fn erfcx_derivative(x: f64) -> f64 {
    if x < ERFCX_CF_THRESHOLD {
        2.0 * x * erfcx(x) - FRAC_2_SQRT_PI
    } else {
        let tail = 0.5 / erfc_fraction(x, 2);
        -FRAC_2_SQRT_PI * tail / (x + tail)
    }
}

/// `x + (k/2)/(x + ((k+1)/2)/(x + ...))` by the modified Lentz method.
fn erfc_fraction(x: f64, first: usize) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in first..first + 2000 {
        let a = 0.5 * n as f64;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// `exp(x²)` with the rounding error of `x²` carried separately.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = libm::fma(x, x, -hi);
    libm::exp(hi) * (1.0 + lo)
}

const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_series(gamma: f64, z: f64, terms: usize) -> f64 {
        // (1)_n (1+γ)_n / ((3-γ)_n n!) z^n with (1)_n = n!
        let mut sum = 0.0;
        let mut term = 1.0;
        for n in 0..terms {
            sum += term;
            let nf = n as f64;
            term *= (1.0 + gamma + nf) / (3.0 - gamma + nf) * z;
        }
        sum
    }

    #[test]
    fn hypergeometric_at_zero_is_one() {
        let cfg = SeriesConfig::default();
        assert_eq!(gauss_2f1_special(0.2, 0.0, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn hypergeometric_matches_brute_force_partial_sums() {
        let cfg = SeriesConfig::default();
        let expected = brute_force_series(0.2, 0.5, 200);
        let got = gauss_2f1_special(0.2, 0.5, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn hypergeometric_gauss_summation_at_one() {
        let cfg = SeriesConfig::default();
        let g = statrs::function::gamma::gamma;
        let expected = g(2.8) * g(0.6) / (g(1.8) * g(1.6));
        let got = gauss_2f1_special(0.2, 1.0, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn transformation_is_continuous_across_threshold() {
        // Long brute-force sums converge at z slightly above the switch.
        let cfg = SeriesConfig::default();
        for &gamma in &[0.0, 0.05, 0.2, 0.35, 0.49] {
            for &z in &[0.951, 0.96, 0.97] {
                let expected = brute_force_series(gamma, z, 5000);
                let got = gauss_2f1_special(gamma, z, &cfg).unwrap();
                assert!(
                    (got - expected).abs() < 1e-12 * expected,
                    "gamma={gamma} z={z}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn transformation_near_one() {
        // z = 1 - 2^-40 is exact in binary, so 1 - z carries no rounding;
        // references from 40-digit arithmetic
        let cfg = SeriesConfig::default();
        let z = 1.0 - 2f64.powi(-40);
        for &(gamma, reference) in &[
            (0.05, 2.166_666_666_385_440_2),
            (0.2, 2.999_999_597_661_617_3),
            (0.4, 7.963_361_477_921_321_5),
        ] {
            let got = gauss_2f1_special(gamma, z, &cfg).unwrap();
            assert!(
                (got - reference).abs() < 1e-13 * reference,
                "gamma={gamma}: {got}"
            );
            // the singular part w^{1-2γ} makes the approach to the Gauss sum slow
            let at_one = gauss_2f1_special(gamma, 1.0, &cfg).unwrap();
            assert!(got < at_one);
        }
    }

    #[test]
    fn hypergeometric_rejects_bad_domain() {
        let cfg = SeriesConfig::default();
        assert!(matches!(
            gauss_2f1_special(0.5, 0.3, &cfg),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            gauss_2f1_special(-0.1, 0.3, &cfg),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            gauss_2f1_special(0.2, 1.5, &cfg),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn hypergeometric_reports_non_convergence() {
        let cfg = SeriesConfig::new(1e-13, 5).unwrap();
        assert!(matches!(
            gauss_2f1_special(0.2, 0.9, &cfg),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn series_config_validation() {
        assert!(SeriesConfig::new(0.0, 10).is_err());
        assert!(SeriesConfig::new(1e-10, 0).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // 0.5 + ∫_0^0.1 φ by composite Simpson with 2000 panels
        let n = 2000;
        let h = 0.1 / n as f64;
        let mut s = normal_pdf(0.0) + normal_pdf(0.1);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * normal_pdf(i as f64 * h);
        }
        let expected = 0.5 + s * h / 3.0;
        assert!((normal_cdf(0.1) - expected).abs() < 1e-15);
        assert!((normal_cdf(0.1) - 0.539_827_837_277_029).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_far_tail_matches_asymptotic_series() {
        // Φ(-x) = φ(x)/x · Σ (-1)^k (2k-1)!! / x^{2k}
        let x: f64 = 8.0;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 0..12 {
            sum += term;
            term *= -((2 * k + 1) as f64) / (x * x);
        }
        let expected = normal_pdf(x) / x * sum;
        let got = normal_cdf(-x);
        assert!(got > 0.0 && got < 1e-14);
        assert!((got - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn erfcx_agrees_across_switch() {
        for &x in &[0.0, 1.0, 3.9, 4.0, 4.1, 6.0] {
            let direct = libm::exp(x * x) * libm::erfc(x);
            assert!((erfcx(x) - direct).abs() < 1e-13 * direct, "x={x}");
        }
        // asymptotic 1/(x√π)(1 - 1/(2x²) + 3/(4x⁴))
        let x: f64 = 1e3;
        let asym = (1.0 - 0.5 / (x * x) + 0.75 / x.powi(4)) / (x * PI.sqrt());
        assert!((erfcx(x) - asym).abs() < 1e-15 * asym);
    }

    #[test]
    fn erfcx_diff_matches_high_precision_difference() {
        // Reference via the Taylor series of erfcx around a, whose
        // derivatives follow f^(n+1) = 2x f^(n) + 2n f^(n-1).
        for &(a, h) in &[(0.8f64, 0.01f64), (2.0, 1e-3), (5.0, 1e-4), (30.0, 1e-3)] {
            let f0 = erfcx(a);
            let mut derivs = [0.0f64; 12];
            derivs[0] = f0;
            derivs[1] = 2.0 * a * f0 - FRAC_2_SQRT_PI;
            for n in 1..11 {
                derivs[n + 1] = 2.0 * a * derivs[n] + 2.0 * n as f64 * derivs[n - 1];
            }
            let mut taylor = 0.0;
            let mut fact = 1.0;
            for n in 1..12 {
                fact *= n as f64;
                taylor += derivs[n] * h.powi(n as i32) / fact;
            }
            let got = erfcx_diff(a, a + h);
            assert!(
                (got + taylor).abs() < 1e-9 * taylor.abs(),
                "a={a}: {got} vs {}",
                -taylor
            );
        }
    }

    proptest! {
        #[test]
        fn hypergeometric_partial_sums_increase(gamma in 0.0f64..0.499, z in 0.001f64..1.0) {
            let cfg = SeriesConfig::default();
            let v = gauss_2f1_special(gamma, z, &cfg).unwrap();
            prop_assert!(v > 1.0);
            // positive terms: the first few partial sums are a lower bound
            prop_assert!(v >= brute_force_series(gamma, z, 20) * (1.0 - cfg.rel_tol));
        }

        #[test]
        fn normal_cdf_is_symmetric(x in -10.0f64..10.0) {
            prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn normal_cdf_is_monotone(x in -12.0f64..12.0, dx in 0.0f64..1.0) {
            prop_assert!(normal_cdf(x + dx) >= normal_cdf(x));
        }
    }
}
