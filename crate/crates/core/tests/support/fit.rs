//! Ordinary least squares on a small polynomial basis.

#![allow(dead_code)]

/// Coefficients `c` minimising `Σ (y - Σ_k c_k x^{p_k})²` over the given
/// powers, via normal equations solved by Gaussian elimination with
/// partial pivoting. Fine for the handful of well-scaled columns used here.
pub fn polyfit(x: &[f64], y: &[f64], powers: &[i32]) -> Vec<f64> {
    let k = powers.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (&xi, &yi) in x.iter().zip(y) {
        let basis: Vec<f64> = powers.iter().map(|&p| xi.powi(p)).collect();
        for r in 0..k {
            for c in 0..k {
                a[r][c] += basis[r] * basis[c];
            }
            a[r][k] += basis[r] * yi;
        }
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=k {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..k).map(|r| a[r][k] / a[r][r]).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    polyfit(&lx, &ly, &[0, 1])[1]
}
