//! Call prices, implied volatilities and smiles from simulated paths.

use alloc::vec;
use alloc::vec::Vec;

use super::covariance::{build_covariance, cholesky_factor, JitterPolicy, JointCovariance};
use super::sampling::{check_paths, draw_block, euler_terminal, BLOCK_PATHS};
use super::{ModelParams, SimGrid};
use crate::asymptotics::implied_vol_first_order;
use crate::blackscholes::bs_implied_vol;
use crate::{Error, Result};

/// Paths per work unit. Fixed, so that the partition of paths, and with it
/// every result, is independent of the number of workers.
pub const CHUNK_PATHS: usize = 1024;

/// Runs independent work units and returns their results in unit order.
pub trait Executor {
    fn map_chunks<T, F>(&self, n_chunks: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every unit on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<T, F>(&self, n_chunks: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n_chunks).map(task).collect()
    }
}

/// Why a Monte Carlo price has no implied volatility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvFailure {
    BelowIntrinsic,
    AboveSpot,
    NonConvergence,
}

impl IvFailure {
    pub fn as_str(&self) -> &'static str {
        match self {
            IvFailure::BelowIntrinsic => "below_intrinsic",
            IvFailure::AboveSpot => "above_spot",
            IvFailure::NonConvergence => "no_convergence",
        }
    }
}

fn invert(price: f64, strike: f64, t: f64) -> core::result::Result<f64, IvFailure> {
    bs_implied_vol(price, 1.0, strike, t).map_err(|e| match e {
        Error::AboveSpot { .. } => IvFailure::AboveSpot,
        Error::BelowIntrinsic { .. } => IvFailure::BelowIntrinsic,
        _ => IvFailure::NonConvergence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub strike: f64,
    pub t: f64,
    pub price: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub implied_vol: Option<f64>,
    pub iv_failure: Option<IvFailure>,
    pub seed: u64,
}

/// A factorised covariance for one model and grid, reusable across
/// strikes, seeds and path counts.
#[derive(Debug, Clone)]
pub struct MonteCarloPricer {
    params: ModelParams,
    grid: SimGrid,
    cov: JointCovariance,
}

impl MonteCarloPricer {
    pub fn new(params: ModelParams, grid: SimGrid) -> Result<Self> {
        let cov = cholesky_factor(build_covariance(&params, &grid)?, &JitterPolicy::default())?;
        Ok(Self { params, grid, cov })
    }

    pub fn covariance(&self) -> &JointCovariance {
        &self.cov
    }

    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    /// `X_T` of paths `0..n_paths`, in path order.
    pub fn terminal_log_prices<E: Executor>(
        &self,
        n_paths: usize,
        seed: u64,
        antithetic: bool,
        exec: &E,
    ) -> Result<Vec<f64>> {
        check_paths(n_paths, antithetic)?;
        let dim = self.cov.dim();
        let factor = self.cov.factor().expect("factorised at construction");
        let vol = self.params.vol();
        let grid = self.grid;
        let n_chunks = n_paths.div_ceil(CHUNK_PATHS);
        let chunks = exec.map_chunks(n_chunks, |c| {
            let start = c * CHUNK_PATHS;
            let end = (start + CHUNK_PATHS).min(n_paths);
            let mut normals = vec![0.0; dim * BLOCK_PATHS];
            let mut samples = vec![0.0; dim * BLOCK_PATHS];
            let mut x = Vec::with_capacity(end - start);
            let mut first = start;
            while first < end {
                let len = (end - first).min(BLOCK_PATHS) * dim;
                draw_block(
                    factor,
                    dim,
                    seed,
                    first,
                    antithetic,
                    &mut normals[..len],
                    &mut samples[..len],
                );
                x.extend(
                    samples[..len]
                        .chunks_exact(dim)
                        .map(|s| euler_terminal(s, &grid, &vol)),
                );
                first += BLOCK_PATHS;
            }
            x
        });
        Ok(chunks.concat())
    }

    /// Prices calls at every strike from one set of paths.
    pub fn price_strikes<E: Executor>(
        &self,
        strikes: &[f64],
        n_paths: usize,
        seed: u64,
        antithetic: bool,
        exec: &E,
    ) -> Result<Vec<MCEstimate>> {
        if let Some(&bad) = strikes.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::domain("strike", bad, "(0, inf)"));
        }
        if n_paths < 2 {
            return Err(Error::Validation(
                "need at least two paths for a standard error",
            ));
        }
        let x = self.terminal_log_prices(n_paths, seed, antithetic, exec)?;
        let spots: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
        Ok(strikes
            .iter()
            .map(|&strike| self.estimate(&spots, strike, antithetic, seed))
            .collect())
    }

    fn estimate(&self, spots: &[f64], strike: f64, antithetic: bool, seed: u64) -> MCEstimate {
        let payoff = |s: f64| (s - strike).max(0.0);
        // antithetic pairs are one sample each
        let (mean, var, count) = if antithetic {
            welford(
                spots
                    .chunks_exact(2)
                    .map(|p| 0.5 * (payoff(p[0]) + payoff(p[1]))),
            )
        } else {
            welford(spots.iter().map(|&s| payoff(s)))
        };
        let stderr = libm::sqrt(var / count as f64);
        let t = self.grid.horizon;
        let (implied_vol, iv_failure) = match invert(mean, strike, t) {
            Ok(v) => (Some(v), None),
            Err(f) => (None, Some(f)),
        };
        MCEstimate {
            strike,
            t,
            price: mean,
            stderr,
            n_samples: spots.len(),
            implied_vol,
            iv_failure,
            seed,
        }
    }
}

/// Mean, unbiased variance and count.
fn welford(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

/// Single-strike price on the calling thread.
pub fn mc_call_price(
    params: &ModelParams,
    grid: &SimGrid,
    strike: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate> {
    let pricer = MonteCarloPricer::new(*params, *grid)?;
    let mut out = pricer.price_strikes(&[strike], n_paths, seed, false, &Sequential)?;
    Ok(out.remove(0))
}

/// One maturity of a Monte Carlo smile against its first-order asymptote.
#[derive(Debug, Clone, PartialEq)]
pub struct SmilePoint {
    pub t: f64,
    pub k_t: f64,
    pub price: f64,
    pub stderr: f64,
    pub iv_mc: Option<f64>,
    /// Implied vols of `price ∓ 1.96·stderr`.
    pub iv_lo: Option<f64>,
    pub iv_hi: Option<f64>,
    pub iv_asym: f64,
    pub failure: Option<IvFailure>,
}

/// Prices the moderate-deviation strike `exp(k·t^{1/2-H+β})` at every
/// maturity with the same seed, on a fresh `n_steps` grid over `[0, t]`.
#[allow(clippy::too_many_arguments)]
pub fn mc_smile_with<E: Executor>(
    exec: &E,
    params: &ModelParams,
    t_values: &[f64],
    k: f64,
    beta: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    antithetic: bool,
) -> Result<Vec<SmilePoint>> {
    if let Some(&bad) = t_values.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::domain("t", bad, "(0, inf)"));
    }
    let vol = params.vol();
    let kernel = params.kernel();
    // validate the asymptote's range before spending time on simulation
    implied_vol_first_order(&vol, params.rho, &kernel, k, 1.0, beta)?;
    let mut out = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let k_t = k * libm::pow(t, 0.5 - params.hurst + beta);
        let strike = libm::exp(k_t);
        let pricer = MonteCarloPricer::new(*params, SimGrid::new(n_steps, t)?)?;
        let est = pricer
            .price_strikes(&[strike], n_paths, seed, antithetic, exec)?
            .remove(0);
        let band = 1.96 * est.stderr;
        out.push(SmilePoint {
            t,
            k_t,
            price: est.price,
            stderr: est.stderr,
            iv_mc: est.implied_vol,
            iv_lo: invert(est.price - band, strike, t).ok(),
            iv_hi: invert(est.price + band, strike, t).ok(),
            iv_asym: implied_vol_first_order(&vol, params.rho, &kernel, k, t, beta)?,
            failure: est.iv_failure,
        });
    }
    Ok(out)
}

/// [`mc_smile_with`] on the calling thread without antithetic pairs.
pub fn mc_smile(
    params: &ModelParams,
    t_values: &[f64],
    k: f64,
    beta: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<SmilePoint>> {
    mc_smile_with(
        &Sequential,
        params,
        t_values,
        k,
        beta,
        n_paths,
        n_steps,
        seed,
        false,
    )
}
