//! Entropic utility (certainty equivalent) of finitely supported laws.
//!
//! For a risk parameter `γ ≠ 0` the entropic utility of `X` is
//! `(1/γ) ln E[exp(γX)]`; `γ = 0` is the risk-neutral limit `E[X]`.
//! Negative `γ` is risk averse, positive `γ` risk seeking.

use alloc::vec::Vec;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Probability masses must add up to one within this slack.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Risk-sensitivity parameter `γ`. Zero means risk neutral.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RiskParameter(f64);

impl RiskParameter {
    pub const NEUTRAL: RiskParameter = RiskParameter(0.0);

    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::validation("risk parameter must be finite"));
        }
        Ok(RiskParameter(gamma))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_neutral(self) -> bool {
        self.0 == 0.0
    }

    /// Geometric deflation `γ·e^{-α}` used by the discounted recursion.
    pub fn deflate(self, alpha: f64) -> RiskParameter {
        RiskParameter(self.0 * (-alpha).exp())
    }
}

/// Finite weighted sample representing the law of a real random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("sample is empty"));
        }
        if values.len() != probs.len() {
            return Err(Error::validation(alloc::format!(
                "sample has {} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(alloc::format!("sample value {i} is not finite")));
        }
        check_distribution(&probs, PROB_SUM_TOL)?;
        Ok(WeightedSample { values, probs })
    }

    /// Equally weighted sample.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::validation("sample is empty"));
        }
        let p = 1.0 / n as f64;
        let probs = alloc::vec![p; n];
        // 1/n summed n times drifts by a few ulps; renormalisation is not needed
        // within PROB_SUM_TOL for any realistic n.
        Self::new(values, probs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }
}

pub(crate) fn check_distribution(probs: &[f64], tol: f64) -> Result<()> {
    if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::validation(alloc::format!(
            "probability {i} is negative or not finite"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::validation(alloc::format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Entropic utility of a validated sample.
pub fn entropic_utility(sample: &WeightedSample, gamma: RiskParameter) -> f64 {
    certainty_equivalent(&sample.values, &sample.probs, gamma.value())
}

/// Unchecked kernel behind [`entropic_utility`].
///
/// `probs` must be a distribution. Uses a max shift so `|γx|` in the
/// hundreds does not overflow, and `ln_1p`/`exp_m1` so small `γ` keeps
/// full relative precision.
pub fn certainty_equivalent(values: &[f64], probs: &[f64], gamma: f64) -> f64 {
    debug_assert_eq!(values.len(), probs.len());
    if gamma == 0.0 {
        return values.iter().zip(probs).map(|(x, p)| x * p).sum();
    }
    let shift = values
        .iter()
        .zip(probs)
        .filter(|(_, p)| **p > 0.0)
        .map(|(x, _)| gamma * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let excess: f64 = values
        .iter()
        .zip(probs)
        .map(|(x, p)| p * (gamma * x - shift).exp_m1())
        .sum();
    (shift + excess.ln_1p()) / gamma
}

/// Entropic utility of an equally weighted sample.
pub fn certainty_equivalent_uniform(values: &[f64], gamma: f64) -> f64 {
    let n = values.len() as f64;
    if gamma == 0.0 {
        return values.iter().sum::<f64>() / n;
    }
    let shift = values
        .iter()
        .map(|x| gamma * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let excess: f64 = values.iter().map(|x| (gamma * x - shift).exp_m1()).sum::<f64>() / n;
    (shift + excess.ln_1p()) / gamma
}

/// Exact entropic utility of a Gaussian: `m + γσ²/2`.
pub fn gaussian_entropic(mean: f64, variance: f64, gamma: RiskParameter) -> Result<f64> {
    mean_variance_form(mean, variance, gamma)
}

/// Second-order expansion `E[X] + (γ/2) Var[X]`, reported next to the
/// entropic utility in metric tables. Numerically identical to
/// [`gaussian_entropic`].
pub fn taylor_proxy(mean: f64, variance: f64, gamma: RiskParameter) -> Result<f64> {
    mean_variance_form(mean, variance, gamma)
}

fn mean_variance_form(mean: f64, variance: f64, gamma: RiskParameter) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::validation("variance must be nonnegative"));
    }
    Ok(mean + 0.5 * gamma.value() * variance)
}
