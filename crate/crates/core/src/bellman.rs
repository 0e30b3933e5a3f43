//! Ergodic entropic Bellman operator on a simplex grid.
//!
//! For a value table `v` the operator is
//!
//! ```text
//! Tv(π) = sup_{π′} [ ln s(π, π′) + μ^γ( ln⟨π′, w⟩ + v(G(π′, w)) ) ]
//! ```
//!
//! with `w` ranging over a scenario set. Values are in log-wealth units, so
//! at the fixed point `λ + v = Tv` the constant `λ` is directly the optimal
//! long-run certainty-equivalent growth rate per period.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;

use crate::costs::{decay_lower_bound, CostSchedule, DEFAULT_DECAY_TOL};
use crate::entropic::{certainty_equivalent, RiskParameter};
use crate::error::{Error, Result};
use crate::geometry::{drift_into, InterpolationMode, Policy, PortfolioWeights, SimplexGrid, ValueFunction, MAX_DIM};
use crate::market::ScenarioSet;
use crate::parallel::par_map;

/// Above this many grid pairs the decay table is recomputed per sweep
/// instead of cached.
const DECAY_CACHE_LIMIT: usize = 16_000_000;

/// Inputs shared by every Bellman computation.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub scenarios: &'a ScenarioSet,
    pub gamma: RiskParameter,
    pub schedule: &'a CostSchedule,
}

impl<'a> Problem<'a> {
    pub fn new(scenarios: &'a ScenarioSet, gamma: RiskParameter, schedule: &'a CostSchedule) -> Result<Self> {
        if scenarios.dim() != schedule.dim() {
            return Err(Error::validation("scenario and cost schedule dimensions differ"));
        }
        Ok(Problem { scenarios, gamma, schedule })
    }

    pub fn dim(&self) -> usize {
        self.scenarios.dim()
    }
}

/// How the supremum over post-trade weights is searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Local coordinate-descent refinement after the grid argmax.
    pub refine: bool,
    /// Number of step halvings below the grid step (6 reaches step/64).
    pub refine_levels: u32,
    pub interpolation: InterpolationMode,
    pub decay_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            refine: true,
            refine_levels: 6,
            interpolation: InterpolationMode::Simplicial,
            decay_tol: DEFAULT_DECAY_TOL,
        }
    }
}

impl SearchConfig {
    pub fn grid_only() -> Self {
        SearchConfig { refine: false, ..Self::default() }
    }
}

/// When value iteration stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Until `span(Tv − v) ≤ tol`, failing after `max_iter` applications.
    Tolerance { tol: f64, max_iter: usize },
    /// Exactly `n` applications from `v ≡ 0`, then read off the selector.
    Fixed(usize),
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Tolerance { tol: 1e-6, max_iter: 200 }
    }
}

/// Outcome of ergodic value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Centered `v` after `iterations` applications.
    pub value: ValueFunction,
    /// Selector of `T` at `value`.
    pub policy: Policy,
    /// Midpoint of the range of `Tv − v`.
    pub lambda_hat: f64,
    /// Half-width of that range; equals `residual_span`.
    pub lambda_halfwidth: f64,
    pub iterations: usize,
    /// `span(T v_k − v_k)` for `k = 0, 1, …`.
    pub span_history: Vec<f64>,
    pub residual_span: f64,
    pub converged: bool,
}

/// A priori bounds on one-step certainty equivalents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZBounds {
    pub z_minus: f64,
    pub z_plus: f64,
}

/// `‖v‖_sp = (max v − min v) / 2`.
pub fn span(vf: &ValueFunction) -> f64 {
    span_of(vf.values())
}

pub fn span_of(values: &[f64]) -> f64 {
    let (lo, hi) = min_max(values);
    0.5 * (hi - lo)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

/// Subtracts the midpoint `(max + min)/2`; the result has sup norm equal to
/// the span of the input.
pub fn center(vf: &ValueFunction) -> (ValueFunction, f64) {
    let (lo, hi) = min_max(vf.values());
    let c = 0.5 * (lo + hi);
    let values = vf.values().iter().map(|v| v - c).collect();
    (ValueFunction::new(vf.grid().clone(), values).expect("finite"), c)
}

/// `μ^γ(ln⟨post, w⟩) + ln s(pre, post)`.
pub fn step_value(pre: &PortfolioWeights, post: &PortfolioWeights, problem: &Problem<'_>) -> Result<f64> {
    let d = problem.dim();
    if pre.dim() != d || post.dim() != d {
        return Err(Error::validation("weight dimension does not match problem"));
    }
    let logs: Vec<f64> = problem
        .scenarios
        .iter()
        .map(|(w, _)| post.iter().zip(w).map(|(p, g)| p * g).sum::<f64>().ln())
        .collect();
    let ce = certainty_equivalent(&logs, problem.scenarios.weights(), problem.gamma.value());
    let decay = problem.schedule.decay_unchecked(pre, post, DEFAULT_DECAY_TOL)?;
    let out = ce + decay.ln();
    if !out.is_finite() {
        return Err(Error::numeric("step value is not finite"));
    }
    Ok(out)
}

/// `z⁻ = −|min_i μ^γ(r_i)| − d·max_i E|r_i| − ln d/|γ| + ln s̃` and
/// `z⁺ = |max_i μ^γ(r_i)| + d·max_i E|r_i| + ln d/|γ|`.
pub fn z_bounds(problem: &Problem<'_>) -> Result<ZBounds> {
    let gamma = problem.gamma.value();
    if gamma == 0.0 {
        return Err(Error::validation("z bounds need a nonzero risk parameter"));
    }
    let d = problem.dim();
    let probs = problem.scenarios.weights();
    let mut ce_min = f64::INFINITY;
    let mut ce_max = f64::NEG_INFINITY;
    let mut abs_mean_max: f64 = 0.0;
    for j in 0..d {
        let r = problem.scenarios.asset_log_returns(j);
        let ce = certainty_equivalent(&r, probs, gamma);
        ce_min = ce_min.min(ce);
        ce_max = ce_max.max(ce);
        let abs_mean: f64 = r.iter().zip(probs).map(|(x, p)| p * x.abs()).sum();
        abs_mean_max = abs_mean_max.max(abs_mean);
    }
    let dn = d as f64;
    let slack = dn.ln() / gamma.abs();
    let z_minus = -ce_min.abs() - dn * abs_mean_max - slack + decay_lower_bound(problem.schedule).ln();
    let z_plus = ce_max.abs() + dn * abs_mean_max + slack;
    if !(z_minus.is_finite() && z_plus.is_finite()) {
        return Err(Error::numeric("z bounds are not finite"));
    }
    Ok(ZBounds { z_minus, z_plus })
}

/// Reusable operator: caches the grid decay table across sweeps.
pub struct BellmanOperator<'a> {
    grid: Arc<SimplexGrid>,
    problem: Problem<'a>,
    search: SearchConfig,
    log_decay: Option<Vec<f64>>,
}

/// Result of one application of `T`.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub values: Vec<f64>,
    /// Flat `len × d` argmax table.
    pub targets: Vec<f64>,
}

impl<'a> BellmanOperator<'a> {
    pub fn new(grid: Arc<SimplexGrid>, problem: Problem<'a>, search: SearchConfig) -> Result<Self> {
        if grid.dim() != problem.dim() {
            return Err(Error::validation("grid dimension does not match problem"));
        }
        if !(search.decay_tol > 0.0) {
            return Err(Error::validation("decay tolerance must be positive"));
        }
        let n = grid.len();
        let log_decay = if n * n <= DECAY_CACHE_LIMIT {
            let rows = par_map(n, |i| decay_row(&grid, problem.schedule, i, search.decay_tol));
            let mut table = Vec::with_capacity(n * n);
            for row in rows {
                table.extend(row?);
            }
            Some(table)
        } else {
            None
        };
        Ok(BellmanOperator { grid, problem, search, log_decay })
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn problem(&self) -> &Problem<'a> {
        &self.problem
    }

    /// One Jacobi sweep of `T` over every grid point.
    pub fn sweep(&self, values: &[f64]) -> Result<Sweep> {
        self.sweep_with(values, self.problem.gamma.value(), 1.0)
    }

    /// Sweep with the continuation value scaled by `scale` inside the
    /// certainty equivalent and risk parameter `gamma`.
    fn sweep_with(&self, values: &[f64], gamma: f64, scale: f64) -> Result<Sweep> {
        let grid = &*self.grid;
        let n = grid.len();
        let d = grid.dim();
        let eval = Evaluator {
            grid,
            values,
            scenarios: self.problem.scenarios,
            gamma,
            scale,
            mode: self.search.interpolation,
        };
        let ce_grid: Vec<f64> = par_map(n, |j| eval.certainty_equivalent(grid.point(j)));
        if let Some(j) = ce_grid.iter().position(|x| !x.is_finite()) {
            return Err(Error::numeric(alloc::format!(
                "continuation value not finite at candidate grid point {j}"
            )));
        }
        let per_state = par_map(n, |i| -> Result<(f64, [f64; MAX_DIM])> {
            let row_owned;
            let row: &[f64] = match &self.log_decay {
                Some(t) => &t[i * n..(i + 1) * n],
                None => {
                    row_owned = decay_row(grid, self.problem.schedule, i, self.search.decay_tol)?;
                    &row_owned
                }
            };
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (j, (ls, ce)) in row.iter().zip(&ce_grid).enumerate() {
                let v = ls + ce;
                if v > best_val {
                    best_val = v;
                    best = j;
                }
            }
            let mut target = [0.0; MAX_DIM];
            target[..d].copy_from_slice(grid.point(best));
            if self.search.refine {
                best_val = self.refine(&eval, grid.point(i), &mut target[..d], best_val)?;
            }
            if !best_val.is_finite() {
                return Err(Error::numeric(alloc::format!("operator value not finite at grid point {i}")));
            }
            Ok((best_val, target))
        });
        let mut out = Sweep { values: Vec::with_capacity(n), targets: Vec::with_capacity(n * d) };
        for r in per_state {
            let (v, t) = r?;
            out.values.push(v);
            out.targets.extend_from_slice(&t[..d]);
        }
        Ok(out)
    }

    /// Best-improvement coordinate descent over moves `h(e_i − e_j)` with
    /// `h` halving from step/2 down to step/2^levels.
    fn refine(&self, eval: &Evaluator<'_>, pre: &[f64], cur: &mut [f64], mut cur_val: f64) -> Result<f64> {
        let d = cur.len();
        let mut h = self.grid.step();
        let mut cand = [0.0; MAX_DIM];
        let mut best_move = [0.0; MAX_DIM];
        for _ in 0..self.search.refine_levels {
            h *= 0.5;
            for _pass in 0..64 {
                let mut improved = false;
                let mut best_val = cur_val;
                for i in 0..d {
                    for j in 0..d {
                        if i == j || cur[j] <= 0.0 {
                            continue;
                        }
                        let a = h.min(cur[j]);
                        cand[..d].copy_from_slice(cur);
                        cand[i] += a;
                        cand[j] -= a;
                        if a == cur[j] {
                            cand[j] = 0.0;
                        }
                        let v = self.objective(eval, pre, &cand[..d])?;
                        if v > best_val {
                            best_val = v;
                            best_move[..d].copy_from_slice(&cand[..d]);
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
                cur.copy_from_slice(&best_move[..d]);
                cur_val = best_val;
            }
        }
        Ok(cur_val)
    }

    fn objective(&self, eval: &Evaluator<'_>, pre: &[f64], post: &[f64]) -> Result<f64> {
        let s = self.problem.schedule.decay_unchecked(pre, post, self.search.decay_tol)?;
        Ok(s.ln() + eval.certainty_equivalent(post))
    }

    /// Applies `T` to `vf`, returning `Tv` and its selector.
    pub fn apply(&self, vf: &ValueFunction) -> Result<(ValueFunction, Policy)> {
        if !Arc::ptr_eq(vf.grid(), &self.grid) && **vf.grid() != *self.grid {
            return Err(Error::validation("value function lives on a different grid"));
        }
        let sweep = self.sweep(vf.values())?;
        Ok((
            ValueFunction::new(self.grid.clone(), sweep.values)?,
            Policy::new(self.grid.clone(), sweep.targets)?,
        ))
    }
}

fn decay_row(grid: &SimplexGrid, schedule: &CostSchedule, i: usize, tol: f64) -> Result<Vec<f64>> {
    let pre = grid.point(i);
    grid.points()
        .map(|post| schedule.decay_unchecked(pre, post, tol).map(|s| s.ln()))
        .collect()
}

/// Certainty equivalent of `ln⟨π′, w⟩ + scale·v(G(π′, w))` over scenarios.
struct Evaluator<'a> {
    grid: &'a SimplexGrid,
    values: &'a [f64],
    scenarios: &'a ScenarioSet,
    gamma: f64,
    scale: f64,
    mode: InterpolationMode,
}

impl Evaluator<'_> {
    fn certainty_equivalent(&self, post: &[f64]) -> f64 {
        let d = post.len();
        let mut drifted = [0.0; MAX_DIM];
        let mut xs = Vec::with_capacity(self.scenarios.len());
        for (w, _) in self.scenarios.iter() {
            let growth = drift_into(post, w, &mut drifted[..d]);
            let cont = match self.mode {
                InterpolationMode::Simplicial => {
                    let st = self.grid.locate(&drifted[..d]);
                    (0..st.len).map(|k| st.weight[k] * self.values[st.index[k]]).sum::<f64>()
                }
                InterpolationMode::Nearest => self.values[self.grid.nearest(&drifted[..d])],
            };
            xs.push(growth.ln() + self.scale * cont);
        }
        certainty_equivalent(&xs, self.scenarios.weights(), self.gamma)
    }
}

/// One application of `T` (builds a fresh operator; prefer
/// [`BellmanOperator`] when iterating).
pub fn apply_operator(
    vf: &ValueFunction,
    problem: &Problem<'_>,
    search: &SearchConfig,
) -> Result<(ValueFunction, Policy)> {
    BellmanOperator::new(vf.grid().clone(), *problem, *search)?.apply(vf)
}

/// Value iteration `v ← center(Tv)` from `v ≡ 0`.
pub fn solve_ergodic(
    problem: &Problem<'_>,
    grid: Arc<SimplexGrid>,
    search: &SearchConfig,
    stop: StopRule,
) -> Result<SolveReport> {
    let op = BellmanOperator::new(grid, *problem, *search)?;
    solve_with(&op, stop)
}

/// Value iteration with a prepared operator.
pub fn solve_with(op: &BellmanOperator<'_>, stop: StopRule) -> Result<SolveReport> {
    let (tol, max_iter, fixed) = match stop {
        StopRule::Tolerance { tol, max_iter } => {
            if !(tol > 0.0) {
                return Err(Error::validation("tolerance must be positive"));
            }
            (tol, max_iter, None)
        }
        StopRule::Fixed(n) => (f64::NEG_INFINITY, n, Some(n)),
    };
    let n = op.grid.len();
    let mut v = alloc::vec![0.0; n];
    let mut history = Vec::new();
    let mut k = 0usize;
    loop {
        let sweep = op.sweep(&v)?;
        let diff: Vec<f64> = sweep.values.iter().zip(&v).map(|(a, b)| a - b).collect();
        let (lo, hi) = min_max(&diff);
        let residual = 0.5 * (hi - lo);
        history.push(residual);
        let done_fixed = fixed == Some(k);
        let converged = residual <= tol;
        if done_fixed || converged || (fixed.is_none() && k >= max_iter) {
            let report = SolveReport {
                value: ValueFunction::new(op.grid.clone(), v)?,
                policy: Policy::new(op.grid.clone(), sweep.targets)?,
                lambda_hat: 0.5 * (lo + hi),
                lambda_halfwidth: residual,
                iterations: k,
                span_history: history,
                residual_span: residual,
                converged: converged || done_fixed,
            };
            if report.converged {
                return Ok(report);
            }
            return Err(Error::NonConvergence(alloc::boxed::Box::new(report)));
        }
        let (lo_t, hi_t) = min_max(&sweep.values);
        let mid = 0.5 * (lo_t + hi_t);
        v = sweep.values.into_iter().map(|x| x - mid).collect();
        k += 1;
    }
}

/// Diagnostics of discounted value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedDiagnostics {
    /// Number of deflation stages below the first, `K`.
    pub stages: usize,
    /// Risk parameters `γ e^{−kα}`, `k = 0..=K`.
    pub stage_gammas: Vec<f64>,
    /// `‖T^{n+1}0 − T^n0‖_sup` over grid and stages, `n = 0, 1, …`.
    pub sup_distances: Vec<f64>,
    /// `(z⁺ − z⁻)|γ| e^{−nα} / (1 − e^{−α})` for the same `n`.
    pub tail_bounds: Vec<f64>,
    pub z: ZBounds,
}

/// Discounted iteration with risk parameter deflated by `e^{−α}` per step.
///
/// Values follow the γ-scaled convention: stage `k` holds
/// `v(·, δ_k) = δ_k · sup μ^{δ_k}(ln⟨π′,w⟩ + ln s + v(G, δ_{k+1})/δ_k)`.
/// Stages stop at the first `K` with `|γ| e^{−αK} ≤ 1e-6`; stage `K`
/// continues into itself. Returns the stage-0 value after `n_iter`
/// applications.
pub fn solve_discounted(
    problem: &Problem<'_>,
    grid: Arc<SimplexGrid>,
    search: &SearchConfig,
    alpha: f64,
    n_iter: usize,
) -> Result<(ValueFunction, DiscountedDiagnostics)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation("discount rate must be positive"));
    }
    let gamma = problem.gamma.value();
    if gamma == 0.0 {
        return Err(Error::validation("discounted iteration needs a nonzero risk parameter"));
    }
    let z = z_bounds(problem)?;
    let stages = ((gamma.abs() / 1e-6).ln() / alpha).ceil().max(0.0) as usize;
    let stage_gammas: Vec<f64> = (0..=stages).map(|k| gamma * (-(k as f64) * alpha).exp()).collect();
    let op = BellmanOperator::new(grid.clone(), *problem, *search)?;
    let n = grid.len();
    let mut table = alloc::vec![alloc::vec![0.0; n]; stages + 1];
    let mut sup_distances = Vec::with_capacity(n_iter);
    let mut tail_bounds = Vec::with_capacity(n_iter);
    let q = (-alpha).exp();
    for it in 0..n_iter {
        let mut next = Vec::with_capacity(stages + 1);
        for (k, delta) in stage_gammas.iter().enumerate() {
            let cont = &table[(k + 1).min(stages)];
            let sweep = op.sweep_with(cont, *delta, 1.0 / delta)?;
            next.push(sweep.values.into_iter().map(|x| delta * x).collect::<Vec<f64>>());
        }
        let dist = next
            .iter()
            .zip(&table)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        sup_distances.push(dist);
        tail_bounds.push((z.z_plus - z.z_minus) * gamma.abs() * q.powi(it as i32) / (1.0 - q));
        table = next;
    }
    let value = ValueFunction::new(grid, table.swap_remove(0))?;
    Ok((value, DiscountedDiagnostics { stages, stage_gammas, sup_distances, tail_bounds, z }))
}
