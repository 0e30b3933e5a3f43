//! Proportional transaction costs.
//!
//! Rebalancing from pre-trade weights `x` to post-trade weights `y` leaves
//! the fraction `s` of wealth that solves `s + d(s·y − x) = 1`, where
//! `d(z) = ⟨c, z⁺⟩ + ⟨h, z⁻⟩` charges buys at `c` and sells at `h`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::PortfolioWeights;

pub const DEFAULT_DECAY_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Per-asset buy (`c`) and sell (`h`) cost rates, each in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSchedule {
    buy: Vec<f64>,
    sell: Vec<f64>,
}

impl CostSchedule {
    pub fn new(buy: Vec<f64>, sell: Vec<f64>) -> Result<Self> {
        if buy.is_empty() || buy.len() != sell.len() {
            return Err(Error::validation("buy and sell rates must be nonempty and of equal length"));
        }
        for (name, rates) in [("buy", &buy), ("sell", &sell)] {
            if let Some(j) = rates.iter().position(|r| !(*r > 0.0 && *r < 1.0)) {
                return Err(Error::validation(alloc::format!(
                    "{name} rate {j} = {} must lie strictly between 0 and 1",
                    rates[j]
                )));
            }
        }
        Ok(CostSchedule { buy, sell })
    }

    /// Same rate `rate` on every side of every asset.
    pub fn flat(d: usize, rate: f64) -> Result<Self> {
        Self::new(alloc::vec![rate; d], alloc::vec![rate; d])
    }

    pub fn dim(&self) -> usize {
        self.buy.len()
    }

    pub fn buy(&self) -> &[f64] {
        &self.buy
    }

    pub fn sell(&self) -> &[f64] {
        &self.sell
    }

    /// Largest single rate `m`.
    pub fn max_rate(&self) -> f64 {
        self.buy.iter().chain(&self.sell).copied().fold(0.0, f64::max)
    }

    #[inline]
    pub(crate) fn penalty_unchecked(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((xj, c), h) in x.iter().zip(&self.buy).zip(&self.sell) {
            if *xj > 0.0 {
                total += c * xj;
            } else {
                total -= h * xj;
            }
        }
        total
    }

    /// `F(w) = w + d(w·post − pre)`.
    #[inline]
    fn residual_map(&self, w: f64, pre: &[f64], post: &[f64]) -> f64 {
        let mut total = w;
        for (((x, y), c), h) in pre.iter().zip(post).zip(&self.buy).zip(&self.sell) {
            let z = w * y - x;
            if z > 0.0 {
                total += c * z;
            } else {
                total -= h * z;
            }
        }
        total
    }

    /// Root of `F(w) = 1` on `[s̃, 1]`. Inputs are assumed to be on the
    /// simplex; `pre == post` returns exactly 1.
    pub(crate) fn decay_unchecked(&self, pre: &[f64], post: &[f64], tol: f64) -> Result<f64> {
        if pre == post {
            return Ok(1.0);
        }
        let floor = decay_lower_bound(self);
        let mut lo = floor * (1.0 - 1e-6);
        let mut hi = 1.0 + 1e-12;
        let f_lo = self.residual_map(lo, pre, post) - 1.0;
        let f_hi = self.residual_map(hi, pre, post) - 1.0;
        if f_lo > 0.0 || f_hi < 0.0 {
            return Err(Error::Internal(alloc::format!(
                "decay bracket failed: F(lo)-1 = {f_lo:e}, F(hi)-1 = {f_hi:e}"
            )));
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..MAX_BISECTIONS {
            mid = 0.5 * (lo + hi);
            let r = self.residual_map(mid, pre, post) - 1.0;
            if r.abs() <= tol {
                break;
            }
            if r > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(mid.clamp(floor, 1.0))
    }
}

/// `d(x) = ⟨c, x⁺⟩ + ⟨h, x⁻⟩`.
pub fn penalty(x: &[f64], schedule: &CostSchedule) -> Result<f64> {
    if x.len() != schedule.dim() {
        return Err(Error::validation("trade vector dimension does not match cost schedule"));
    }
    Ok(schedule.penalty_unchecked(x))
}

/// A lower bound `s̃ = (1 − m)/(1 + m)` on every decay factor, with `m` the
/// largest rate. Since `d(w·y − x) ≤ m(w + 1)` on the simplex,
/// `F(s̃) ≤ s̃ + m(s̃ + 1) = 1`.
pub fn decay_lower_bound(schedule: &CostSchedule) -> f64 {
    let m = schedule.max_rate();
    (1.0 - m) / (1.0 + m)
}

/// Fraction of wealth kept after rebalancing from `pre` to `post`.
pub fn decay_factor(
    pre: &PortfolioWeights,
    post: &PortfolioWeights,
    schedule: &CostSchedule,
    tol: f64,
) -> Result<f64> {
    if pre.dim() != schedule.dim() || post.dim() != schedule.dim() {
        return Err(Error::validation("weight dimension does not match cost schedule"));
    }
    if !(tol > 0.0) {
        return Err(Error::validation("decay tolerance must be positive"));
    }
    schedule.decay_unchecked(pre, post, tol)
}
