//! Experiment configuration (TOML).
//!
//! Every table rejects unknown keys. Defaults are filled in at parse time so
//! the echoed config in `report.json` is enough to reproduce a run.

use std::path::{Path, PathBuf};

use ergoport_core::{
    scenarios_from_discrete, scenarios_from_gaussian, CostSchedule, DiscreteReturnModel, GaussianReturnModel,
    InterpolationMode, ReturnModel, RiskParameter, ScenarioSet, SearchConfig, StopRule,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gamma: f64,
    pub model: ModelConfig,
    pub costs: CostConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub region: RegionConfig,
    #[serde(default, rename = "strategy")]
    pub strategies: Vec<StrategyConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    /// Finitely many gross-return vectors with probabilities.
    Discrete { outcomes: Vec<Vec<f64>>, probabilities: Vec<f64> },
    /// Gaussian log-returns; the Bellman expectation uses a sampled scenario set.
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
        #[serde(default = "default_scenarios")]
        n_scenarios: usize,
        #[serde(default = "default_scenario_seed")]
        scenario_seed: u64,
        #[serde(default)]
        antithetic: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub buy: Vec<f64>,
    pub sell: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Simplicial,
    Nearest,
}

impl From<Interpolation> for InterpolationMode {
    fn from(i: Interpolation) -> Self {
        match i {
            Interpolation::Simplicial => InterpolationMode::Simplicial,
            Interpolation::Nearest => InterpolationMode::Nearest,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Apply the operator exactly this many times instead of iterating to `tol`.
    #[serde(default)]
    pub fixed_iters: Option<usize>,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "default_interpolation")]
    pub interpolation: Interpolation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            fixed_iters: None,
            refine: true,
            interpolation: default_interpolation(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    /// Risk parameter of the entropy column; defaults to `gamma`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// No-trade snap of Bellman rules, in l1 weight distance.
    #[serde(default = "default_snap")]
    pub snap: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            horizon: default_horizon(),
            n_paths: default_paths(),
            seed: default_seed(),
            bootstrap: default_bootstrap(),
            gamma: None,
            snap: default_snap(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_sim_horizon")]
    pub horizon: usize,
    #[serde(default = "default_sim_seed")]
    pub seed: u64,
    #[serde(default = "default_index")]
    pub path_index: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { horizon: default_sim_horizon(), seed: default_sim_seed(), path_index: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default = "default_snap")]
    pub eta: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { eta: default_snap() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Hold the initial position in one asset (1-based).
    BuyAndHold { name: String, asset: usize },
    FixedMix { name: String, weights: Vec<f64> },
    /// Fixed mix chosen by scanning targets on the evaluation paths.
    BestFixedMix {
        name: String,
        #[serde(default = "default_mix_step")]
        step: f64,
    },
    /// Fixed mix at the mean-variance optimum of the log-returns.
    Markowitz { name: String },
    /// Stationary Bellman rule. Reads `policy` (default `<out>/policy.csv`),
    /// or solves in-process when `gamma` is given.
    Bellman {
        name: String,
        #[serde(default)]
        policy: Option<PathBuf>,
        #[serde(default)]
        gamma: Option<f64>,
    },
}

impl StrategyConfig {
    pub fn name(&self) -> &str {
        match self {
            StrategyConfig::BuyAndHold { name, .. }
            | StrategyConfig::FixedMix { name, .. }
            | StrategyConfig::BestFixedMix { name, .. }
            | StrategyConfig::Markowitz { name }
            | StrategyConfig::Bellman { name, .. } => name,
        }
    }

    /// File-name friendly form of the name.
    pub fn slug(&self) -> String {
        let mut out = String::new();
        for c in self.name().chars() {
            if c.is_ascii_alphanumeric() {
                out.push(c.to_ascii_lowercase());
            } else if !out.ends_with('_') {
                out.push('_');
            }
        }
        out.trim_matches('_').to_string()
    }
}

fn default_scenarios() -> usize {
    4096
}
fn default_scenario_seed() -> u64 {
    7
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    200
}
fn yes() -> bool {
    true
}
fn default_interpolation() -> Interpolation {
    Interpolation::Simplicial
}
fn default_horizon() -> usize {
    250
}
fn default_paths() -> usize {
    20_000
}
fn default_seed() -> u64 {
    7
}
fn default_bootstrap() -> usize {
    ergoport_core::evaluation::DEFAULT_BOOTSTRAP
}
fn default_snap() -> f64 {
    ergoport_core::strategies::DEFAULT_SNAP
}
fn default_sim_horizon() -> usize {
    5000
}
fn default_sim_seed() -> u64 {
    11
}
fn default_index() -> u64 {
    0
}
fn default_mix_step() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let field_err = |field: &str, why: String| CliError::Config(format!("field `{field}`: {why}"));
        let bad = |field: &str, why: String| Err(field_err(field, why));
        RiskParameter::new(self.gamma).map_err(|e| field_err("gamma", e.to_string()))?;
        let d = self.dim();
        if d < 2 {
            return bad("model", "at least two assets are required".into());
        }
        self.return_model().map_err(|e| field_err("model", e.to_string()))?;
        if self.costs.buy.len() != d || self.costs.sell.len() != d {
            return bad("costs", format!("expected {d} buy and sell rates"));
        }
        self.schedule().map_err(|e| field_err("costs", e.to_string()))?;
        ergoport_core::SimplexGrid::new(d, self.grid.step).map_err(|e| field_err("grid.step", e.to_string()))?;
        if !(self.solver.tol > 0.0) {
            return bad("solver.tol", "must be positive".into());
        }
        if !(self.evaluation.snap > 0.0) {
            return bad("evaluation.snap", "must be positive".into());
        }
        if !(self.region.eta > 0.0) {
            return bad("region.eta", "must be positive".into());
        }
        if let Some(g) = self.evaluation.gamma {
            RiskParameter::new(g).map_err(|e| field_err("evaluation.gamma", e.to_string()))?;
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.strategies {
            if !names.insert(s.slug()) {
                return bad("strategy.name", format!("duplicate strategy name `{}`", s.name()));
            }
            match s {
                StrategyConfig::BuyAndHold { asset, .. } if *asset == 0 || *asset > d => {
                    return bad("strategy.asset", format!("asset {asset} is not in 1..={d}"));
                }
                StrategyConfig::FixedMix { weights, .. } => {
                    if weights.len() != d {
                        return bad("strategy.weights", format!("expected {d} weights"));
                    }
                    ergoport_core::PortfolioWeights::new(weights.clone())
                        .map_err(|e| field_err("strategy.weights", e.to_string()))?;
                }
                StrategyConfig::BestFixedMix { step, .. } => {
                    ergoport_core::SimplexGrid::new(d, *step).map_err(|e| field_err("strategy.step", e.to_string()))?;
                }
                StrategyConfig::Bellman { gamma: Some(g), .. } => {
                    RiskParameter::new(*g).map_err(|e| field_err("strategy.gamma", e.to_string()))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            ModelConfig::Discrete { outcomes, .. } => outcomes.first().map_or(0, Vec::len),
            ModelConfig::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn risk(&self) -> RiskParameter {
        RiskParameter::new(self.gamma).expect("validated")
    }

    pub fn eval_risk(&self) -> RiskParameter {
        RiskParameter::new(self.evaluation.gamma.unwrap_or(self.gamma)).expect("validated")
    }

    pub fn schedule(&self) -> ergoport_core::Result<CostSchedule> {
        CostSchedule::new(self.costs.buy.clone(), self.costs.sell.clone())
    }

    pub fn return_model(&self) -> ergoport_core::Result<ReturnModel> {
        match &self.model {
            ModelConfig::Discrete { outcomes, probabilities } => {
                if outcomes.len() != probabilities.len() {
                    return Err(ergoport_core::Error::Validation(String::from("outcomes and probabilities differ in length")));
                }
                let mut out = Vec::with_capacity(outcomes.len());
                for (g, p) in outcomes.iter().zip(probabilities) {
                    if g.iter().any(|x| !(*x > 0.0)) {
                        return Err(ergoport_core::Error::Validation(String::from("gross returns must be positive")));
                    }
                    out.push((g.iter().map(|x| x.ln()).collect(), *p));
                }
                Ok(ReturnModel::Discrete(DiscreteReturnModel::new(out)?))
            }
            ModelConfig::Gaussian { mean, cov, .. } => {
                let d = mean.len();
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return Err(ergoport_core::Error::Validation(String::from("covariance must be a square matrix matching mean")));
                }
                Ok(ReturnModel::Gaussian(GaussianReturnModel::new(mean.clone(), cov.concat())?))
            }
        }
    }

    pub fn scenarios(&self) -> ergoport_core::Result<ScenarioSet> {
        match (&self.model, self.return_model()?) {
            (_, ReturnModel::Discrete(m)) => Ok(scenarios_from_discrete(&m)),
            (ModelConfig::Gaussian { n_scenarios, scenario_seed, antithetic, .. }, ReturnModel::Gaussian(m)) => {
                scenarios_from_gaussian(&m, *n_scenarios, *scenario_seed, *antithetic)
            }
            _ => unreachable!("model kinds agree"),
        }
    }

    /// Mean and row-major covariance of the one-period log-returns.
    pub fn log_return_moments(&self) -> ergoport_core::Result<(Vec<f64>, Vec<f64>)> {
        match self.return_model()? {
            ReturnModel::Gaussian(m) => Ok((m.mean().to_vec(), m.cov().to_vec())),
            ReturnModel::Discrete(m) => {
                let d = m.dim();
                let mut mean = vec![0.0; d];
                for k in 0..m.len() {
                    for (j, r) in m.outcome(k).iter().enumerate() {
                        mean[j] += m.probs()[k] * r;
                    }
                }
                let mut cov = vec![0.0; d * d];
                for k in 0..m.len() {
                    let r = m.outcome(k);
                    for a in 0..d {
                        for b in 0..d {
                            cov[a * d + b] += m.probs()[k] * (r[a] - mean[a]) * (r[b] - mean[b]);
                        }
                    }
                }
                Ok((mean, cov))
            }
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            refine: self.solver.refine,
            interpolation: self.solver.interpolation.into(),
            ..SearchConfig::default()
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        match self.solver.fixed_iters {
            Some(n) => StopRule::Fixed(n),
            None => StopRule::Tolerance { tol: self.solver.tol, max_iter: self.solver.max_iter },
        }
    }
}
