//! Trading strategies and the cost-aware wealth recursion
//!
//! ```text
//! ln W(t+1−) − ln W(t−) = ln s(π(t−), π(t)) + ln⟨π(t), w(t+1)⟩
//! π(t+1−) = G(π(t), w(t+1))
//! ```

use alloc::sync::Arc;
use alloc::vec::Vec;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;

use crate::costs::{CostSchedule, DEFAULT_DECAY_TOL};
use crate::error::{Error, Result};
use crate::geometry::{drift_into, l1, InterpolationMode, Policy, PortfolioWeights, MAX_DIM};
use crate::market::GrossPath;

/// Default ℓ₁ distance below which a Bellman target is treated as "stay".
pub const DEFAULT_SNAP: f64 = 1e-3;
/// Post-trade weights this close (ℓ₁) to pre-trade weights count as no trade.
const TRADE_EPS: f64 = 1e-12;

/// Stationary rule read off a Bellman selector.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanRule {
    pub policy: Arc<Policy>,
    pub snap: f64,
    pub interpolation: InterpolationMode,
    pub initial: PortfolioWeights,
}

impl BellmanRule {
    pub fn new(policy: Arc<Policy>) -> Result<Self> {
        let d = policy.grid().dim();
        Ok(BellmanRule {
            policy,
            snap: DEFAULT_SNAP,
            interpolation: InterpolationMode::Simplicial,
            initial: PortfolioWeights::uniform(d)?,
        })
    }

    pub fn with_snap(mut self, snap: f64) -> Result<Self> {
        if !(snap >= 0.0) {
            return Err(Error::validation("snap threshold must be nonnegative"));
        }
        self.snap = snap;
        Ok(self)
    }

    pub fn with_initial(mut self, initial: PortfolioWeights) -> Result<Self> {
        if initial.dim() != self.policy.grid().dim() {
            return Err(Error::validation("initial weights dimension mismatch"));
        }
        self.initial = initial;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Hold asset `asset` forever; never trades.
    BuyAndHold { asset: usize },
    /// Rebalance to `target` every period, starting from `initial`.
    FixedMix { target: PortfolioWeights, initial: PortfolioWeights },
    Bellman(BellmanRule),
    /// Let weights drift from `initial`; never trades.
    None { initial: PortfolioWeights },
}

impl Strategy {
    /// Fixed mix starting from uniform weights.
    pub fn fixed_mix(target: PortfolioWeights) -> Result<Self> {
        let initial = PortfolioWeights::uniform(target.dim())?;
        Ok(Strategy::FixedMix { target, initial })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Strategy::BuyAndHold { .. } => None,
            Strategy::FixedMix { target, .. } => Some(target.dim()),
            Strategy::Bellman(rule) => Some(rule.policy.grid().dim()),
            Strategy::None { initial } => Some(initial.dim()),
        }
    }

    pub fn initial_weights(&self, d: usize) -> Result<PortfolioWeights> {
        match self {
            Strategy::BuyAndHold { asset } => PortfolioWeights::vertex(d, *asset),
            Strategy::FixedMix { initial, .. } | Strategy::None { initial } => Ok(initial.clone()),
            Strategy::Bellman(rule) => Ok(rule.initial.clone()),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if let Strategy::BuyAndHold { asset } = self {
            if *asset >= d {
                return Err(Error::validation(alloc::format!(
                    "buy-and-hold asset {asset} out of range for d={d}"
                )));
            }
        }
        match self.dim() {
            Some(k) if k != d => Err(Error::validation(alloc::format!(
                "strategy dimension {k} does not match market dimension {d}"
            ))),
            _ => Ok(()),
        }
    }

    /// Writes the post-trade weights for pre-trade weights `pre` into `out`.
    pub fn decide_into(&self, pre: &[f64], out: &mut [f64]) {
        match self {
            Strategy::BuyAndHold { .. } | Strategy::None { .. } => out.copy_from_slice(pre),
            Strategy::FixedMix { target, .. } => out.copy_from_slice(target),
            Strategy::Bellman(rule) => {
                rule.policy.target_at(pre, rule.interpolation, out);
                if l1(out, pre) <= rule.snap {
                    out.copy_from_slice(pre);
                }
            }
        }
    }
}

/// Post-trade weights chosen by `strategy` at pre-trade weights `pre`.
pub fn decide(strategy: &Strategy, pre: &PortfolioWeights) -> Result<PortfolioWeights> {
    strategy.check_dim(pre.dim())?;
    let mut out = alloc::vec![0.0; pre.dim()];
    strategy.decide_into(pre, &mut out);
    PortfolioWeights::new(out)
}

/// Per-period record of a simulated strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    /// `ln W(t−)` for `t = 0..=T`, starting at `ln W(0)`.
    pub log_wealth: Vec<f64>,
    pub pre_weights: Vec<PortfolioWeights>,
    pub post_weights: Vec<PortfolioWeights>,
    pub decays: Vec<f64>,
    pub traded: Vec<bool>,
}

impl WealthPath {
    pub fn horizon(&self) -> usize {
        self.decays.len()
    }

    pub fn terminal_log_wealth(&self) -> f64 {
        *self.log_wealth.last().expect("log_wealth is never empty")
    }
}

/// Summary of a path without per-period storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// `ln W(T) − ln W(0)`.
    pub log_growth: f64,
    pub days_traded: usize,
    pub log_cumulative_decay: f64,
}

/// Runs `strategy` along `path` from wealth `w0`, recording everything.
pub fn simulate_wealth(strategy: &Strategy, path: &GrossPath, schedule: &CostSchedule, w0: f64) -> Result<WealthPath> {
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(Error::validation("initial wealth must be positive"));
    }
    let t_len = path.len();
    let mut rec = WealthPath {
        log_wealth: Vec::with_capacity(t_len + 1),
        pre_weights: Vec::with_capacity(t_len),
        post_weights: Vec::with_capacity(t_len),
        decays: Vec::with_capacity(t_len),
        traded: Vec::with_capacity(t_len),
    };
    rec.log_wealth.push(w0.ln());
    run(strategy, path, schedule, |pre, post, decay, traded, increment| {
        let last = *rec.log_wealth.last().unwrap();
        rec.log_wealth.push(last + increment);
        rec.pre_weights.push(PortfolioWeights::new(pre.to_vec())?);
        rec.post_weights.push(PortfolioWeights::new(post.to_vec())?);
        rec.decays.push(decay);
        rec.traded.push(traded);
        Ok(())
    })?;
    Ok(rec)
}

/// Terminal log-growth and trade counts only.
pub fn simulate_outcome(strategy: &Strategy, path: &GrossPath, schedule: &CostSchedule) -> Result<PathOutcome> {
    let mut out = PathOutcome { log_growth: 0.0, days_traded: 0, log_cumulative_decay: 0.0 };
    run(strategy, path, schedule, |_, _, decay, traded, increment| {
        out.log_growth += increment;
        if traded {
            out.days_traded += 1;
            out.log_cumulative_decay += decay.ln();
        }
        Ok(())
    })?;
    Ok(out)
}

fn run(
    strategy: &Strategy,
    path: &GrossPath,
    schedule: &CostSchedule,
    mut record: impl FnMut(&[f64], &[f64], f64, bool, f64) -> Result<()>,
) -> Result<()> {
    let d = path.dim();
    if schedule.dim() != d {
        return Err(Error::validation("cost schedule dimension does not match path"));
    }
    strategy.check_dim(d)?;
    let mut pre = [0.0; MAX_DIM];
    let mut post = [0.0; MAX_DIM];
    pre[..d].copy_from_slice(&strategy.initial_weights(d)?);
    for (t, w) in path.steps().enumerate() {
        strategy.decide_into(&pre[..d], &mut post[..d]);
        let traded = l1(&pre[..d], &post[..d]) > TRADE_EPS;
        let decay = if traded {
            schedule.decay_unchecked(&pre[..d], &post[..d], DEFAULT_DECAY_TOL)?
        } else {
            post[..d].copy_from_slice(&pre[..d]);
            1.0
        };
        let mut next = [0.0; MAX_DIM];
        let growth = drift_into(&post[..d], w, &mut next[..d]);
        let increment = growth.ln() + decay.ln();
        if !increment.is_finite() {
            return Err(Error::numeric(alloc::format!("log-wealth increment not finite at t={t}")));
        }
        record(&pre[..d], &post[..d], decay, traded, increment)?;
        pre = next;
    }
    Ok(())
}

/// One rebalancing step carried out in share volumes and prices.
///
/// Solves `W = W(t−) − d((N(t) − N(t−1))·S(t))` with
/// `N(t) = W·target / S(t)` for the post-trade wealth `W`, by bisection in
/// wealth units. Returns the new volumes and `W`.
pub fn volume_oracle_step(
    n_prev: &[f64],
    prices: &[f64],
    target: &PortfolioWeights,
    schedule: &CostSchedule,
) -> Result<(Vec<f64>, f64)> {
    let d = n_prev.len();
    if prices.len() != d || target.dim() != d || schedule.dim() != d {
        return Err(Error::validation("volume step dimension mismatch"));
    }
    if prices.iter().any(|p| !(*p > 0.0)) || n_prev.iter().any(|n| !(*n >= 0.0)) {
        return Err(Error::validation("prices must be positive and volumes nonnegative"));
    }
    let holdings: Vec<f64> = n_prev.iter().zip(prices).map(|(n, p)| n * p).collect();
    let wealth_pre: f64 = holdings.iter().sum();
    let trade = |wealth: f64| -> f64 {
        let dollars: Vec<f64> = target.iter().zip(&holdings).map(|(t, h)| wealth * t - h).collect();
        wealth + schedule.penalty_unchecked(&dollars) - wealth_pre
    };
    let (mut lo, mut hi) = (0.0, wealth_pre * (1.0 + 1e-12));
    if trade(lo) > 0.0 || trade(hi) < 0.0 {
        return Err(Error::Internal("self-financing root not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if trade(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * wealth_pre {
            break;
        }
    }
    let wealth = 0.5 * (lo + hi);
    let volumes = target.iter().zip(prices).map(|(t, p)| wealth * t / p).collect();
    Ok((volumes, wealth))
}
