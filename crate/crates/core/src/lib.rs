//! Long-run risk-sensitive portfolio rebalancing under proportional
//! transaction costs.
//!
//! The controlled state is the vector of portfolio weights on the unit
//! simplex. The optimal stationary trading rule comes from the ergodic
//! entropic Bellman equation
//!
//! ```text
//! λ + v(π) = sup_{π′} μ^γ( ln⟨π′, w⟩ + ln s(π, π′) + v(G(π′, w)) )
//! ```
//!
//! solved by span-seminorm value iteration on a lattice grid. Strategies
//! are then evaluated by Monte Carlo on the cost-aware log-wealth recursion.
//!
//! The crate is `no_std` + `alloc` without the default `std` feature; with
//! it, grid sweeps and path simulation run on rayon.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod bellman;
pub mod costs;
pub mod entropic;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod market;
pub mod markowitz;
mod parallel;
pub mod strategies;

pub use bellman::{
    apply_operator, center, solve_discounted, solve_ergodic, span, step_value, z_bounds, BellmanOperator,
    DiscountedDiagnostics, Problem, SearchConfig, SolveReport, StopRule, ZBounds,
};
pub use costs::{decay_factor, decay_lower_bound, penalty, CostSchedule};
pub use entropic::{entropic_utility, gaussian_entropic, taylor_proxy, RiskParameter, WeightedSample};
pub use error::{Error, Result};
pub use evaluation::{evaluate_mc, no_trade_region, trading_stats, EvalConfig, Metrics, NoTradeRegion, TradeStats};
pub use geometry::{drift, InterpolationMode, Policy, PortfolioWeights, SimplexGrid, ValueFunction};
pub use market::{
    scenarios_from_discrete, scenarios_from_gaussian, DiscreteReturnModel, GaussianReturnModel, GrossPath,
    ReturnModel, ScenarioSet,
};
pub use markowitz::{solve_mean_variance, MeanVarianceSolution};
pub use strategies::{decide, simulate_wealth, volume_oracle_step, BellmanRule, Strategy, WealthPath};
