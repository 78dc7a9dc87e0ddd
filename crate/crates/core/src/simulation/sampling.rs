//! Correlated Gaussian draws and the log-Euler scheme.
//!
//! Path `p` draws its normals from ChaCha20 seeded with `seed` on stream
//! `p` (stream `p/2` when antithetic, the odd member negated), so any path
//! can be regenerated on its own, in any order, on any worker.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{JointCovariance, ModelParams, SimGrid};
use crate::energy::{ExpVol, VolFunction};
use crate::{Error, Result};

/// Generator for one path (or antithetic pair).
pub fn path_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Paths drawn together so that each factor row is reused from cache.
pub(crate) const BLOCK_PATHS: usize = 8;

/// Standard normals of path `index`.
fn fill_normals(seed: u64, index: usize, antithetic: bool, normals: &mut [f64]) {
    let (stream, sign) = if antithetic {
        ((index / 2) as u64, if index % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (index as u64, 1.0)
    };
    let mut rng = path_rng(seed, stream);
    for g in normals.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *g = sign * z;
    }
}

/// Draws `L·g` for the paths `first..first + out.len()/dim` into `out`,
/// using `normals` (same length) as scratch.
pub(crate) fn draw_block(
    factor: &[f64],
    dim: usize,
    seed: u64,
    first: usize,
    antithetic: bool,
    normals: &mut [f64],
    out: &mut [f64],
) {
    for (b, g) in normals.chunks_exact_mut(dim).enumerate() {
        fill_normals(seed, first + b, antithetic, g);
    }
    let count = out.len() / dim;
    for i in 0..dim {
        let row = &factor[i * dim..i * dim + i + 1];
        for b in 0..count {
            out[b * dim + i] = dot(row, &normals[b * dim..b * dim + i + 1]);
        }
    }
}

/// Dot product over eight independent lanes so that it vectorises; the
/// summation order is fixed, so results stay bit-reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let (a8, a_rest) = a.split_at(a.len() - a.len() % 8);
    let (b8, b_rest) = b.split_at(a8.len());
    for (x, y) in a8.chunks_exact(8).zip(b8.chunks_exact(8)) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in a_rest.iter().zip(b_rest) {
        tail += x * y;
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5]))
        + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7]))
        + tail
}

/// Terminal log-price of one joint sample `[Z(t_1..t_n) | B̂(t_1..t_n)]`,
/// with `σ` frozen at the left endpoint of every step.
pub(crate) fn euler_terminal(sample: &[f64], grid: &SimGrid, vol: &ExpVol) -> f64 {
    let n = grid.n_steps;
    let mut x = 0.0;
    let mut z_prev = 0.0;
    let mut b_prev = 0.0;
    let mut t_prev = 0.0;
    for i in 0..n {
        let t = grid.time(i + 1);
        let s = vol.value(b_prev);
        let z = sample[i];
        x += -0.5 * s * s * (t - t_prev) + s * (z - z_prev);
        z_prev = z;
        b_prev = sample[n + i];
        t_prev = t;
    }
    x
}

/// Joint samples, one `2n`-vector per path, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    dim: usize,
    data: Vec<f64>,
}

impl PathBundle {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

pub(crate) fn check_paths(n_paths: usize, antithetic: bool) -> Result<()> {
    if n_paths == 0 {
        return Err(Error::Validation("need at least one path"));
    }
    if antithetic && n_paths % 2 == 1 {
        return Err(Error::Validation(
            "antithetic sampling needs an even path count",
        ));
    }
    Ok(())
}

/// Materialises `n_paths` draws of `L·g`, `g` standard normal.
pub fn sample_paths(
    cov: &JointCovariance,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<PathBundle> {
    check_paths(n_paths, antithetic)?;
    let factor = cov
        .factor()
        .ok_or(Error::Validation("covariance has not been factorised"))?;
    let dim = cov.dim();
    let mut data = vec![0.0; dim * n_paths];
    let mut normals = vec![0.0; dim * BLOCK_PATHS];
    for (b, out) in data.chunks_mut(dim * BLOCK_PATHS).enumerate() {
        let len = out.len();
        draw_block(
            factor,
            dim,
            seed,
            b * BLOCK_PATHS,
            antithetic,
            &mut normals[..len],
            out,
        );
    }
    Ok(PathBundle { dim, data })
}

/// Terminal log-prices `X_T` of every path in the bundle.
pub fn euler_logprice(
    bundle: &PathBundle,
    params: &ModelParams,
    grid: &SimGrid,
) -> Result<Vec<f64>> {
    if bundle.dim() != 2 * grid.n_steps {
        return Err(Error::Validation("path bundle does not match the grid"));
    }
    let vol = params.vol();
    Ok((0..bundle.n_paths())
        .map(|p| euler_terminal(bundle.path(p), grid, &vol))
        .collect())
}
