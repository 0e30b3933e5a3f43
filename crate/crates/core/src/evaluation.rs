//! Monte Carlo strategy evaluation, trading-intensity statistics and
//! no-trade region extraction.
//!
//! All per-period metrics are time normalised: for terminal log-growth
//! `L = ln W(T) − ln W(0)` the table reports `E[L]/T`, `Std[L]/T`,
//! `μ^γ(L)/T` and `(E[L] + (γ/2)Var[L])/T`.

use alloc::vec::Vec;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::costs::CostSchedule;
use crate::entropic::{certainty_equivalent_uniform, taylor_proxy, RiskParameter};
use crate::error::{Error, Result};
use crate::geometry::{l1, PortfolioWeights};
use crate::market::ReturnModel;
use crate::parallel::par_map;
use crate::strategies::{simulate_outcome, BellmanRule, Strategy, WealthPath};

pub const DEFAULT_BOOTSTRAP: usize = 200;
/// ChaCha stream for bootstrap resampling, disjoint from path streams.
const BOOTSTRAP_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mean: f64,
    pub std: f64,
    pub entropy: f64,
    pub taylor: f64,
    pub n_paths: usize,
    pub horizon: usize,
    pub stderr_mean: f64,
    /// Bootstrap standard error of `entropy`; zero when not requested.
    pub stderr_entropy: f64,
    /// Average fraction of periods with a trade.
    pub fraction_traded: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub bootstrap: usize,
}

impl EvalConfig {
    pub fn new(horizon: usize, n_paths: usize, seed: u64) -> Self {
        EvalConfig { horizon, n_paths, seed, bootstrap: DEFAULT_BOOTSTRAP }
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Metrics of a sample of terminal log-growths over `horizon` periods.
pub fn metrics_from_log_growth(
    log_growth: &[f64],
    horizon: usize,
    gamma: RiskParameter,
    bootstrap: usize,
    seed: u64,
) -> Result<Metrics> {
    let n = log_growth.len();
    if n < 2 {
        return Err(Error::validation("metrics need at least two paths"));
    }
    if horizon == 0 {
        return Err(Error::validation("horizon must be positive"));
    }
    if log_growth.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("terminal log-wealth is not finite"));
    }
    let t = horizon as f64;
    let nf = n as f64;
    let mean_u = pairwise_sum(log_growth) / nf;
    let dev: Vec<f64> = log_growth.iter().map(|x| (x - mean_u) * (x - mean_u)).collect();
    let var_u = pairwise_sum(&dev) / (nf - 1.0);
    let entropy_u = certainty_equivalent_uniform(log_growth, gamma.value());
    let stderr_entropy = if bootstrap > 0 {
        bootstrap_entropy_stderr(log_growth, gamma.value(), bootstrap, seed) / t
    } else {
        0.0
    };
    Ok(Metrics {
        mean: mean_u / t,
        std: var_u.sqrt() / t,
        entropy: entropy_u / t,
        taylor: taylor_proxy(mean_u, var_u, gamma)? / t,
        n_paths: n,
        horizon,
        stderr_mean: (var_u / nf).sqrt() / t,
        stderr_entropy,
        fraction_traded: 0.0,
    })
}

fn bootstrap_entropy_stderr(xs: &[f64], gamma: f64, resamples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOOTSTRAP_STREAM);
    let n = xs.len();
    let mut buf = alloc::vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            // 64-bit multiply-shift: bias below 2^-40 for any realistic n
            let k = ((rng.next_u64() as u128 * n as u128) >> 64) as usize;
            *b = xs[k];
        }
        stats.push(certainty_equivalent_uniform(&buf, gamma));
    }
    let m = pairwise_sum(&stats) / resamples as f64;
    let dev: Vec<f64> = stats.iter().map(|s| (s - m) * (s - m)).collect();
    (pairwise_sum(&dev) / (resamples as f64 - 1.0).max(1.0)).sqrt()
}

/// Simulates paths `0..n_paths` under `seed` and reduces them to metrics.
/// Every strategy evaluated with the same seed sees the same return paths.
pub fn evaluate_mc(
    strategy: &Strategy,
    model: &ReturnModel,
    config: &EvalConfig,
    gamma: RiskParameter,
    schedule: &CostSchedule,
) -> Result<Metrics> {
    let outcomes = simulate_outcomes(strategy, model, config, schedule)?;
    let growth: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let mut m = metrics_from_log_growth(&growth, config.horizon, gamma, config.bootstrap, config.seed)?;
    let traded: Vec<f64> = outcomes.iter().map(|o| o.1 as f64).collect();
    m.fraction_traded = pairwise_sum(&traded) / (config.n_paths as f64 * config.horizon as f64);
    Ok(m)
}

/// Terminal log-growth and trade count per path.
pub fn simulate_outcomes(
    strategy: &Strategy,
    model: &ReturnModel,
    config: &EvalConfig,
    schedule: &CostSchedule,
) -> Result<Vec<(f64, usize)>> {
    if config.horizon == 0 || config.n_paths < 2 {
        return Err(Error::validation("evaluation needs horizon >= 1 and at least two paths"));
    }
    let per_path = par_map(config.n_paths, |k| {
        let path = model.sample_path(config.seed, k as u64, config.horizon);
        simulate_outcome(strategy, &path, schedule).map(|o| (o.log_growth, o.days_traded))
    });
    per_path.into_iter().collect()
}

/// Fixed-mix target with the best average terminal log-wealth on the
/// evaluation path set, scanned over a simplex grid of `step`.
pub fn best_fixed_mix(
    model: &ReturnModel,
    config: &EvalConfig,
    schedule: &CostSchedule,
    step: f64,
) -> Result<(PortfolioWeights, f64)> {
    let grid = crate::geometry::SimplexGrid::new(model.dim(), step)?;
    let mut best: Option<(PortfolioWeights, f64)> = None;
    for i in 0..grid.len() {
        let s = Strategy::fixed_mix(grid.weights(i))?;
        let outs = simulate_outcomes(&s, model, config, schedule)?;
        let growth: Vec<f64> = outs.iter().map(|o| o.0).collect();
        let avg = pairwise_sum(&growth) / growth.len() as f64;
        if best.as_ref().is_none_or(|b| avg > b.1) {
            best = Some((grid.weights(i), avg));
        }
    }
    Ok(best.expect("grid is never empty"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeStats {
    pub days_traded: usize,
    pub fraction_traded: f64,
    /// Product of the decay factors over the path.
    pub cumulative_decay: f64,
}

pub fn trading_stats(path: &WealthPath) -> TradeStats {
    let days_traded = path.traded.iter().filter(|t| **t).count();
    let horizon = path.horizon();
    let log_decay: f64 = path.decays.iter().map(|s| s.ln()).sum();
    TradeStats {
        days_traded,
        fraction_traded: if horizon == 0 { 0.0 } else { days_traded as f64 / horizon as f64 },
        cumulative_decay: log_decay.exp(),
    }
}

/// Grid points where the Bellman rule does not trade, plus the targets
/// ("shift points") of those where it does.
#[derive(Debug, Clone, PartialEq)]
pub struct NoTradeRegion {
    pub eta: f64,
    /// Grid ordinals of no-action points.
    pub members: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub shift_points: Vec<PortfolioWeights>,
    grid: alloc::sync::Arc<crate::geometry::SimplexGrid>,
    member_mask: Vec<bool>,
}

impl NoTradeRegion {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.members.iter().map(move |&i| self.grid.point(i))
    }

    /// True when every vertex of the grid cell containing `pi` is a member.
    pub fn contains(&self, pi: &[f64]) -> bool {
        let st = self.grid.locate(pi);
        (0..st.len).all(|k| self.member_mask[st.index[k]])
    }
}

/// No-action set of `rule` on its grid: `‖decide(π) − π‖₁ ≤ eta`.
pub fn no_trade_region(rule: &BellmanRule, eta: f64) -> Result<NoTradeRegion> {
    if !(eta > 0.0) {
        return Err(Error::validation("eta must be positive"));
    }
    let grid = rule.policy.grid().clone();
    let d = grid.dim();
    let strategy = Strategy::Bellman(rule.clone());
    let mut members = Vec::new();
    let mut member_mask = alloc::vec![false; grid.len()];
    let mut shift_points: Vec<PortfolioWeights> = Vec::new();
    let mut lower = alloc::vec![f64::INFINITY; d];
    let mut upper = alloc::vec![f64::NEG_INFINITY; d];
    let mut out = alloc::vec![0.0; d];
    for (i, p) in grid.points().enumerate() {
        strategy.decide_into(p, &mut out);
        if l1(&out, p) <= eta {
            members.push(i);
            member_mask[i] = true;
            for j in 0..d {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        } else {
            let t = PortfolioWeights::new(out.clone())?;
            if !shift_points.iter().any(|s| l1(s, &t) <= 1e-12) {
                shift_points.push(t);
            }
        }
    }
    if members.is_empty() {
        lower.iter_mut().for_each(|x| *x = f64::NAN);
        upper.iter_mut().for_each(|x| *x = f64::NAN);
    }
    Ok(NoTradeRegion { eta, members, lower, upper, shift_points, grid, member_mask })
}
