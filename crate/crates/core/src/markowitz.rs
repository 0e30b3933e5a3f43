//! Long-only mean-variance allocation
//!
//! Maximises `⟨π, μ⟩ + (γ/2)·πᵀΣπ` over the simplex for `γ < 0` by
//! enumerating support sets and solving each equality-constrained KKT
//! system exactly.

use alloc::vec::Vec;

use crate::entropic::RiskParameter;
use crate::error::{Error, Result};
use crate::geometry::{PortfolioWeights, MAX_DIM};

const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanVarianceSolution {
    pub weights: PortfolioWeights,
    pub objective: f64,
    /// Multiplier of the budget constraint.
    pub budget_multiplier: f64,
}

pub fn mean_variance_objective(pi: &[f64], mean: &[f64], cov: &[f64], gamma: f64) -> f64 {
    let d = mean.len();
    let lin: f64 = pi.iter().zip(mean).map(|(p, m)| p * m).sum();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += pi[i] * cov[i * d + j] * pi[j];
        }
    }
    lin + 0.5 * gamma * quad
}

/// `cov` is row-major `d×d`.
pub fn solve_mean_variance(mean: &[f64], cov: &[f64], gamma: RiskParameter) -> Result<MeanVarianceSolution> {
    let d = mean.len();
    let g = gamma.value();
    if !(g < 0.0) {
        return Err(Error::validation("mean-variance allocation needs a negative risk parameter"));
    }
    if d == 0 || d > MAX_DIM || cov.len() != d * d {
        return Err(Error::validation("mean/covariance shape mismatch"));
    }
    let mut best: Option<MeanVarianceSolution> = None;
    for mask in 1u32..(1u32 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let Some((pi, nu)) = solve_support(mean, cov, g, &support) else {
            continue;
        };
        if pi.iter().any(|p| *p < -FEAS_TOL) {
            continue;
        }
        // inactive coordinates must not improve the objective
        let grad = gradient(&pi, mean, cov, g);
        let scale = 1.0 + nu.abs();
        if (0..d).any(|i| mask & (1 << i) == 0 && grad[i] > nu + 1e-10 * scale) {
            continue;
        }
        let mut pi = pi;
        pi.iter_mut().for_each(|p| *p = p.max(0.0));
        let objective = mean_variance_objective(&pi, mean, cov, g);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(MeanVarianceSolution {
                weights: PortfolioWeights::new(pi)?,
                objective,
                budget_multiplier: nu,
            });
        }
    }
    best.ok_or_else(|| Error::numeric("no support set satisfied the optimality conditions"))
}

fn gradient(pi: &[f64], mean: &[f64], cov: &[f64], g: f64) -> Vec<f64> {
    let d = mean.len();
    (0..d)
        .map(|i| mean[i] + g * (0..d).map(|j| cov[i * d + j] * pi[j]).sum::<f64>())
        .collect()
}

/// Stationarity on `support`: `μ_S + γΣ_SS π_S = ν·1`, `Σπ_S = 1`.
fn solve_support(mean: &[f64], cov: &[f64], g: f64, support: &[usize]) -> Option<(Vec<f64>, f64)> {
    let d = mean.len();
    let k = support.len();
    let n = k + 1;
    let mut a = alloc::vec![0.0; n * n];
    let mut b = alloc::vec![0.0; n];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r * n + c] = g * cov[i * d + j];
        }
        a[r * n + k] = -1.0;
        b[r] = -mean[i];
    }
    for c in 0..k {
        a[k * n + c] = 1.0;
    }
    b[k] = 1.0;
    let x = gauss_solve(&mut a, &mut b, n)?;
    let mut pi = alloc::vec![0.0; d];
    for (r, &i) in support.iter().enumerate() {
        pi[i] = x[r];
    }
    Some((pi, x[k]))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = alloc::vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * n + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}
