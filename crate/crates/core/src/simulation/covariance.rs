//! Joint covariance of `(Z, B̂)` on a grid and its Cholesky factor.
//!
//! Index map of the `2n`-vector: entry `i` is `Z(t_{i+1})` and entry `n + i`
//! is `B̂(t_{i+1})`, for `i = 0..n`.

use alloc::vec;
use alloc::vec::Vec;

use super::{ModelParams, SimGrid};
use crate::specialfn::{gauss_2f1_special, SeriesConfig};
use crate::{Error, Result};

/// `G(x)` for `x ≥ 1`, defined by `Cov[B̂_s, B̂_t] = t^{2H}·G(s/t)` for the
/// `√(2H)`-normalised kernel, `s ≥ t`. With `γ = 1/2 - H`:
///
/// ```text
/// G(x) = 2H·( x^{-γ}/(1-γ) + γ/((1-γ)(2-γ))·x^{-(1+γ)}·₂F₁(1, 1+γ; 3-γ; 1/x) ).
/// ```
pub fn g_function(hurst: f64, x: f64) -> Result<f64> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::domain("x", x, "[1, inf)"));
    }
    if !(hurst > 0.0 && hurst <= 0.5) {
        return Err(Error::domain("hurst", hurst, "(0, 1/2]"));
    }
    let gamma = 0.5 - hurst;
    let lead = libm::pow(x, -gamma) / (1.0 - gamma);
    if gamma == 0.0 {
        return Ok(2.0 * hurst * lead);
    }
    let f = gauss_2f1_special(gamma, 1.0 / x, &SeriesConfig::default())?;
    let tail = gamma / ((1.0 - gamma) * (2.0 - gamma)) * libm::pow(x, -(1.0 + gamma)) * f;
    Ok(2.0 * hurst * (lead + tail))
}

/// `Cov[B̂_s, B̂_t]` for the model's kernel normalisation `c`, which scales
/// the `√(2H)` result by `c²/(2H)`.
pub fn bhat_covariance(params: &ModelParams, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0) || !(t >= 0.0) {
        return Err(Error::domain("time", s.min(t), "[0, inf)"));
    }
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    let h = params.hurst;
    let scale = params.kernel_normalization * params.kernel_normalization / (2.0 * h);
    let g = if lo == hi {
        1.0
    } else {
        g_function(h, hi / lo)?
    };
    Ok(scale * libm::pow(lo, 2.0 * h) * g)
}

/// `Cov[B̂_s, Z_t] = ρ·c/(H+1/2)·(s^{H+1/2} - (s - min(s,t))^{H+1/2})`.
pub fn cross_covariance(params: &ModelParams, s: f64, t: f64) -> f64 {
    let p = params.hurst + 0.5;
    let m = s.min(t).max(0.0);
    params.rho * params.kernel_normalization / p
        * (libm::pow(s, p) - libm::pow((s - m).max(0.0), p))
}

/// Dense symmetric `2n × 2n` covariance, optionally with its lower
/// Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    n: usize,
    matrix: Vec<f64>,
    factor: Option<Vec<f64>>,
    jitter_applied: f64,
}

impl JointCovariance {
    /// Wraps an arbitrary symmetric matrix of even dimension `2n`,
    /// row-major.
    pub fn from_matrix(n: usize, matrix: Vec<f64>) -> Result<Self> {
        if n == 0 || matrix.len() != 4 * n * n {
            return Err(Error::Validation("covariance must be a 2n x 2n matrix"));
        }
        let dim = 2 * n;
        for i in 0..dim {
            for j in 0..i {
                if matrix[i * dim + j] != matrix[j * dim + i] {
                    return Err(Error::Validation("covariance must be symmetric"));
                }
            }
        }
        Ok(Self {
            n,
            matrix,
            factor: None,
            jitter_applied: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }

    /// Row-major entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Row-major lower-triangular factor, once computed.
    pub fn factor(&self) -> Option<&[f64]> {
        self.factor.as_deref()
    }

    /// Diagonal shift that made the factorisation succeed.
    pub fn jitter_applied(&self) -> f64 {
        self.jitter_applied
    }

    pub fn z_index(&self, i: usize) -> usize {
        i
    }

    pub fn bhat_index(&self, i: usize) -> usize {
        self.n + i
    }
}

pub fn build_covariance(params: &ModelParams, grid: &SimGrid) -> Result<JointCovariance> {
    let n = grid.n_steps;
    let dim = 2 * n;
    let mut m = vec![0.0; dim * dim];
    let times: Vec<f64> = (1..=n).map(|i| grid.time(i)).collect();
    for i in 0..n {
        for j in 0..=i {
            m[i * dim + j] = times[j].min(times[i]);
        }
    }
    for i in 0..n {
        let row = n + i;
        for j in 0..n {
            m[row * dim + j] = cross_covariance(params, times[i], times[j]);
        }
        for j in 0..=i {
            m[row * dim + n + j] = bhat_covariance(params, times[i], times[j])?;
        }
    }
    for i in 0..dim {
        for j in 0..i {
            m[j * dim + i] = m[i * dim + j];
        }
    }
    Ok(JointCovariance {
        n,
        matrix: m,
        factor: None,
        jitter_applied: 0.0,
    })
}

/// Diagonal jitter schedule for [`cholesky_factor`]: no jitter first, then
/// `start_scale·trace/dim` multiplied by `growth` up to `max_escalations`
/// times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub start_scale: f64,
    pub growth: f64,
    pub max_escalations: u32,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            start_scale: 1e-12,
            growth: 10.0,
            max_escalations: 6,
        }
    }
}

pub fn cholesky_factor(mut cov: JointCovariance, policy: &JitterPolicy) -> Result<JointCovariance> {
    let dim = cov.dim();
    let trace: f64 = (0..dim).map(|i| cov.get(i, i)).sum();
    let mut jitter = 0.0;
    let mut next = policy.start_scale * trace / dim as f64;
    for attempt in 0..=policy.max_escalations + 1 {
        if let Some(l) = try_cholesky(&cov.matrix, dim, jitter) {
            cov.factor = Some(l);
            cov.jitter_applied = jitter;
            return Ok(cov);
        }
        if attempt > policy.max_escalations {
            break;
        }
        jitter = next;
        next *= policy.growth;
    }
    Err(Error::NotPositiveDefinite { max_jitter: jitter })
}

fn try_cholesky(a: &[f64], dim: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let (ri, rj) = (&l[i * dim..i * dim + j], &l[j * dim..j * dim + j]);
            let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
            let mut v = a[i * dim + j] - dot;
            if i == j {
                v += jitter;
                if !(v > 0.0) {
                    return None;
                }
                l[i * dim + i] = libm::sqrt(v);
            } else {
                l[i * dim + j] = v / l[j * dim + j];
            }
        }
    }
    Some(l)
}
