//! The large-deviation rate function of the log-price.
//!
//! With driver `Z = ρ̄W + ρB` and volatility `σ(B̂)`, the energy of reaching
//! log-moneyness `x` reduces to an infimum over paths `f ∈ H₀¹`:
//!
//! ```text
//! I(x) = inf_f  (x - ρ⟨σ(f̂), ḟ⟩)² / (2ρ̄²⟨σ²(f̂), 1⟩) + ½∫ḟ²,   f̂ = Kḟ.
//! ```
//!
//! This module provides the analytic Taylor jet `I''(0)`, `I'''(0)`, the
//! second-order expansion of the optimal path, and a direct minimiser of the
//! discretised functional that serves as an independent check of the jet.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernel::KernelSpec;
use crate::{Error, Result};

/// Largest log-moneyness accepted by [`minimize_rate`].
pub const MAX_ABS_X: f64 = 0.5;
/// Smallest grid accepted by [`minimize_rate`].
pub const MIN_GRID: usize = 16;

/// A smooth, positive volatility function of the driving Gaussian process.
pub trait VolFunction {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;

    /// `σ₀ = σ(0)`.
    fn sigma0(&self) -> f64 {
        self.value(0.0)
    }

    /// `σ₀' = σ'(0)`.
    fn sigma0_prime(&self) -> f64 {
        self.derivative(0.0)
    }
}

/// `σ(x) = σ₀·exp(ηx/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpVol {
    sigma0: f64,
    eta: f64,
}

impl ExpVol {
    /// `eta` may be negative here; the model itself restricts it to `η ≥ 0`.
    pub fn new(sigma0: f64, eta: f64) -> Result<Self> {
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return Err(Error::domain("sigma0", sigma0, "(0, inf)"));
        }
        if !eta.is_finite() {
            return Err(Error::domain("eta", eta, "finite"));
        }
        Ok(Self { sigma0, eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl VolFunction for ExpVol {
    fn value(&self, x: f64) -> f64 {
        self.sigma0 * libm::exp(0.5 * self.eta * x)
    }

    fn derivative(&self, x: f64) -> f64 {
        0.5 * self.eta * self.value(x)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        0.25 * self.eta * self.eta * self.value(x)
    }

    fn sigma0(&self) -> f64 {
        self.sigma0
    }

    fn sigma0_prime(&self) -> f64 {
        0.5 * self.eta * self.sigma0
    }
}

/// `I''(0)` and `I'''(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCoefficients {
    pub i2: f64,
    pub i3: f64,
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho > -1.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Validation("correlation must lie in (-1, 1)"))
    }
}

/// `I''(0) = 1/σ₀²`, `I'''(0) = -6ρ(σ₀'/σ₀⁴)⟨K1,1⟩`.
pub fn energy_coefficients<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
) -> Result<EnergyCoefficients> {
    check_rho(rho)?;
    let s0 = vol.sigma0();
    let s0p = vol.sigma0_prime();
    Ok(EnergyCoefficients {
        i2: 1.0 / (s0 * s0),
        i3: -6.0 * rho * s0p / (s0 * s0 * s0 * s0) * kernel.inner_k1_one(),
    })
}

/// Third-order Taylor polynomial `I2·x²/2 + I3·x³/6`.
pub fn energy_taylor(coeffs: &EnergyCoefficients, x: f64) -> f64 {
    x * x * (0.5 * coeffs.i2 + coeffs.i3 * x / 6.0)
}

/// `(α_t, β_t)` of the expansion `f_t = α_t·x + β_t·x²/2 + O(x³)` of the
/// minimising path.
pub fn optimal_path_coefficients<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
    t: f64,
) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let s0 = vol.sigma0();
    let s0p = vol.sigma0_prime();
    let r2 = rho * rho;
    let alpha = rho / s0 * t;
    let bracket = r2 * kernel.inner_k1_indicator(t)? + kernel.inner_k_indicator_one(t)?
        - 3.0 * r2 * t * kernel.inner_k1_one();
    Ok((alpha, 2.0 * s0p / (s0 * s0 * s0) * bracket))
}

/// Second-order value of the minimising path at time `t ∈ [0, 1]`.
pub fn optimal_path<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
    x: f64,
    t: f64,
) -> Result<f64> {
    let (alpha, beta) = optimal_path_coefficients(vol, rho, kernel, t)?;
    Ok(alpha * x + 0.5 * beta * x * x)
}

/// Piecewise-constant `ḟ` on `m` uniform cells of `[0, 1]`; `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    slopes: Vec<f64>,
}

impl DiscretePath {
    pub fn new(slopes: Vec<f64>) -> Result<Self> {
        if slopes.is_empty() {
            return Err(Error::Validation("path needs at least one cell"));
        }
        if let Some(&bad) = slopes.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("path slope", bad, "finite"));
        }
        Ok(Self { slopes })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            slopes: vec![0.0; m.max(1)],
        }
    }

    /// Cell averages of the derivative of the second-order optimal path.
    pub fn taylor_initializer<V: VolFunction>(
        vol: &V,
        rho: f64,
        kernel: &KernelSpec,
        x: f64,
        m: usize,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Validation("path needs at least one cell"));
        }
        let h = 1.0 / m as f64;
        let mut slopes = Vec::with_capacity(m);
        let mut previous = optimal_path(vol, rho, kernel, x, 0.0)?;
        for j in 1..=m {
            let t = if j == m { 1.0 } else { j as f64 * h };
            let next = optimal_path(vol, rho, kernel, x, t)?;
            slopes.push((next - previous) / h);
            previous = next;
        }
        Self::new(slopes)
    }

    pub fn m(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `f` at the grid nodes `0, h, …, 1`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = 1.0 / self.m() as f64;
        let mut out = Vec::with_capacity(self.m() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &s in &self.slopes {
            acc += s * h;
            out.push(acc);
        }
        out
    }
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];
/// Geometric refinement levels towards `t = 0` inside the first cell, where
/// `f̂` behaves like `t^{H+1/2}`.
const FIRST_CELL_LEVELS: usize = 24;

/// The discretised reduced functional for fixed `x` and grid, with the
/// quadrature nodes and the matrix `W[p, j] = ∫_{cell j ∩ [0,t_p]} K(t_p, s) ds`
/// precomputed, so that `f̂(t_p) = Σ_j W[p, j]·ḟ_j` exactly for piecewise
/// constant `ḟ`.
struct RateProblem<'a, V> {
    vol: &'a V,
    rho: f64,
    x: f64,
    m: usize,
    h: f64,
    weights: Vec<f64>,
    cell: Vec<usize>,
    /// Column-major `P × m`.
    w: Vec<f64>,
}

struct Evaluation {
    value: f64,
    gradient: Vec<f64>,
}

impl<'a, V: VolFunction> RateProblem<'a, V> {
    fn new(vol: &'a V, rho: f64, kernel: &KernelSpec, x: f64, m: usize) -> Result<Self> {
        check_rho(rho)?;
        if m == 0 {
            return Err(Error::Validation("path needs at least one cell"));
        }
        let h = 1.0 / m as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut cell = Vec::new();
        let mut push_interval = |a: f64, b: f64, j: usize| {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&z, &w) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
                nodes.push(mid + half * z);
                weights.push(half * w);
                cell.push(j);
            }
        };
        let mut upper = h;
        for _ in 0..FIRST_CELL_LEVELS {
            push_interval(0.5 * upper, upper, 0);
            upper *= 0.5;
        }
        push_interval(0.0, upper, 0);
        for j in 1..m {
            push_interval(j as f64 * h, (j + 1) as f64 * h, j);
        }

        let p_count = nodes.len();
        let mut w = vec![0.0; p_count * m];
        for (p, (&t, &own)) in nodes.iter().zip(cell.iter()).enumerate() {
            for j in 0..own {
                w[j * p_count + p] = kernel.integral(t, j as f64 * h, (j + 1) as f64 * h);
            }
            w[own * p_count + p] = kernel.integral(t, own as f64 * h, t);
        }
        Ok(Self {
            vol,
            rho,
            x,
            m,
            h,
            weights,
            cell,
            w,
        })
    }

    fn points(&self) -> usize {
        self.weights.len()
    }

    fn f_hat(&self, u: &[f64]) -> Vec<f64> {
        let p_count = self.points();
        let mut out = vec![0.0; p_count];
        for (j, &uj) in u.iter().enumerate() {
            if uj == 0.0 {
                continue;
            }
            let col = &self.w[j * p_count..(j + 1) * p_count];
            for (o, &wv) in out.iter_mut().zip(col) {
                *o += wv * uj;
            }
        }
        out
    }

    /// `(G, F, E)` where `G = ⟨σ(f̂), ḟ⟩`, `F = ⟨σ²(f̂), 1⟩`, `E = ∫ḟ²`.
    fn integrals(&self, u: &[f64], f_hat: &[f64]) -> (f64, f64, f64) {
        let mut g = 0.0;
        let mut f = 0.0;
        for p in 0..self.points() {
            let s = self.vol.value(f_hat[p]);
            g += self.weights[p] * s * u[self.cell[p]];
            f += self.weights[p] * s * s;
        }
        let e = self.h * u.iter().map(|v| v * v).sum::<f64>();
        (g, f, e)
    }

    fn combine(&self, g: f64, f: f64, e: f64) -> Result<f64> {
        let rho_bar2 = 1.0 - self.rho * self.rho;
        let denom = 2.0 * rho_bar2 * f;
        if !(denom > f64::MIN_POSITIVE) || !denom.is_finite() {
            return Err(Error::Numeric("variance denominator underflow"));
        }
        let r = self.x - self.rho * g;
        Ok(r * r / denom + 0.5 * e)
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        let f_hat = self.f_hat(u);
        let (g, f, e) = self.integrals(u, &f_hat);
        self.combine(g, f, e)
    }

    /// Value and exact gradient with respect to the cell slopes.
    fn evaluate(&self, u: &[f64]) -> Result<Evaluation> {
        let p_count = self.points();
        let f_hat = self.f_hat(u);
        let (g, f, e) = self.integrals(u, &f_hat);
        let value = self.combine(g, f, e)?;

        let rho_bar2 = 1.0 - self.rho * self.rho;
        let r = self.x - self.rho * g;
        let dg_coef = -self.rho * r / (rho_bar2 * f);
        let df_coef = -r * r / (2.0 * rho_bar2 * f * f);

        // per-node sensitivities of the integrands to f̂
        let mut node_sens = vec![0.0; p_count];
        let mut gradient = vec![0.0; self.m];
        for p in 0..p_count {
            let s = self.vol.value(f_hat[p]);
            let ds = self.vol.derivative(f_hat[p]);
            let own = self.cell[p];
            node_sens[p] = self.weights[p] * ds * (dg_coef * u[own] + df_coef * 2.0 * s);
            gradient[own] += dg_coef * self.weights[p] * s;
        }
        for (j, gj) in gradient.iter_mut().enumerate() {
            let col = &self.w[j * p_count..(j + 1) * p_count];
            let through_f_hat: f64 = col.iter().zip(&node_sens).map(|(a, b)| a * b).sum();
            *gj += through_f_hat + self.h * u[j];
        }
        Ok(Evaluation { value, gradient })
    }
}

/// The reduced functional `𝓘ₓ(f)` on a discretised path.
pub fn rate_functional<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
    x: f64,
    path: &DiscretePath,
) -> Result<f64> {
    RateProblem::new(vol, rho, kernel, x, path.m())?.value(path.slopes())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizerConfig {
    /// Euclidean norm of `∂𝓘/∂ḟ_j` at which to stop.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMinimum {
    pub value: f64,
    pub path: DiscretePath,
    pub grad_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap or a stalled line search ended the run;
    /// `value` and `path` are then the best iterate found.
    pub converged: bool,
}

/// Minimises the discretised functional over `m`-cell paths with BFGS,
/// starting from the cell-averaged second-order optimal path.
pub fn minimize_rate<V: VolFunction>(
    vol: &V,
    rho: f64,
    kernel: &KernelSpec,
    x: f64,
    m: usize,
    config: &MinimizerConfig,
) -> Result<RateMinimum> {
    if !(x.abs() <= MAX_ABS_X) {
        return Err(Error::domain("x", x, "[-0.5, 0.5]"));
    }
    if m < MIN_GRID {
        return Err(Error::Validation("grid size must be at least 16"));
    }
    if !(config.tol > 0.0) || config.max_iterations == 0 {
        return Err(Error::Validation(
            "minimizer tolerance and iteration cap must be positive",
        ));
    }
    let problem = RateProblem::new(vol, rho, kernel, x, m)?;
    let start = DiscretePath::taylor_initializer(vol, rho, kernel, x, m)?;
    let mut u = start.slopes;
    let mut current = problem.evaluate(&u)?;

    // inverse Hessian, row-major m × m; the energy term alone has Hessian h·I
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0 / problem.h;
    }

    let mut iterations = 0;
    let mut grad_norm = norm(&current.gradient);
    while grad_norm > config.tol && iterations < config.max_iterations {
        iterations += 1;
        let mut direction = mat_vec(&inv, &current.gradient, m);
        direction.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&direction, &current.gradient);
        if !(slope < 0.0) {
            // lost descent: restart from steepest descent with the base scaling
            reset_inverse(&mut inv, m, 1.0 / problem.h);
            for (d, g) in direction.iter_mut().zip(&current.gradient) {
                *d = -g / problem.h;
            }
            slope = dot(&direction, &current.gradient);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&direction)
                .map(|(a, d)| a + step * d)
                .collect();
            if let Ok(eval) = problem.evaluate(&trial) {
                let armijo = eval.value <= current.value + 1e-4 * step * slope;
                // Near the optimum the decrease drops below the rounding of
                // the value; there a smaller gradient decides instead.
                let flat = eval.value <= current.value + 64.0 * f64::EPSILON * current.value.abs()
                    && norm(&eval.gradient) < grad_norm;
                if armijo || flat {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next_u, next)) = accepted else {
            break;
        };

        let s: Vec<f64> = next_u.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next
            .gradient
            .iter()
            .zip(&current.gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            bfgs_update(&mut inv, &s, &y, sy, m);
        }
        u = next_u;
        current = next;
        grad_norm = norm(&current.gradient);
    }

    Ok(RateMinimum {
        value: current.value,
        path: DiscretePath::new(u)?,
        grad_norm,
        iterations,
        converged: grad_norm <= config.tol,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn mat_vec(a: &[f64], v: &[f64], m: usize) -> Vec<f64> {
    a.chunks_exact(m).map(|row| dot(row, v)).collect()
}

fn reset_inverse(inv: &mut [f64], m: usize, scale: f64) {
    inv.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..m {
        inv[i * m + i] = scale;
    }
}

/// `H ← (I - ρsyᵀ)H(I - ρysᵀ) + ρssᵀ` with `ρ = 1/sᵀy`.
fn bfgs_update(inv: &mut [f64], s: &[f64], y: &[f64], sy: f64, m: usize) {
    let hy = mat_vec(inv, y, m);
    let yhy = dot(y, &hy);
    let r = 1.0 / sy;
    let coef = (1.0 + yhy * r) * r;
    for i in 0..m {
        for j in 0..m {
            inv[i * m + j] += coef * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
