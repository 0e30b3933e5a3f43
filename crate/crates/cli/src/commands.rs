use std::path::{Path, PathBuf};
use std::sync::Arc;

use ergoport_core::evaluation::best_fixed_mix;
use ergoport_core::{
    evaluate_mc, no_trade_region, simulate_wealth, solve_ergodic, solve_mean_variance, trading_stats, z_bounds,
    BellmanRule, EvalConfig, Error, Metrics, Policy, PortfolioWeights, Problem, SimplexGrid, SolveReport, Strategy,
};
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, StrategyConfig};
use crate::error::CliError;
use crate::io;

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    /// Overrides the default `<out>/policy.csv`.
    pub policy: Option<PathBuf>,
}

impl Context {
    fn grid(&self) -> Result<Arc<SimplexGrid>, CliError> {
        Ok(Arc::new(SimplexGrid::new(self.config.dim(), self.config.grid.step)?))
    }

    fn policy_path(&self) -> PathBuf {
        self.policy.clone().unwrap_or_else(|| self.out.join("policy.csv"))
    }

    fn load_policy(&self, path: &Path) -> Result<Policy, CliError> {
        if !path.exists() {
            return Err(CliError::Io(format!("{}: policy file not found (run `solve` first)", path.display())));
        }
        io::read_policy_csv(path, self.grid()?)
    }

    fn rule(&self, policy: Policy) -> Result<BellmanRule, CliError> {
        let mut rule = BellmanRule::new(Arc::new(policy))?.with_snap(self.config.evaluation.snap)?;
        rule.interpolation = self.config.solver.interpolation.into();
        Ok(rule)
    }

    fn solve_at(&self, gamma: f64) -> Result<SolveReport, CliError> {
        let scenarios = self.config.scenarios()?;
        let schedule = self.config.schedule()?;
        let problem = Problem::new(&scenarios, ergoport_core::RiskParameter::new(gamma)?, &schedule)?;
        match solve_ergodic(&problem, self.grid()?, &self.config.search(), self.config.stop_rule()) {
            Ok(r) => Ok(r),
            Err(Error::NonConvergence(r)) => Err(CliError::NonConvergence(format!(
                "gamma {gamma}: residual span {:e} after {} iterations",
                r.residual_span, r.iterations
            ))),
            Err(e) => Err(e.into()),
        }
    }

    /// Merges `section` into `report.json`, refreshing the config echo.
    fn record(&self, key: &str, section: Value) -> Result<(), CliError> {
        let path = self.out.join("report.json");
        let mut root = std::fs::read_to_string(&path)
            .ok()
            .and_then(|s| serde_json::from_str::<Map<String, Value>>(&s).ok())
            .unwrap_or_default();
        root.insert("config".into(), serde_json::to_value(&self.config).expect("config serializes"));
        root.insert(key.into(), section);
        io::write_json(&path, &root)
    }

    fn strategies(&self) -> Result<Vec<(String, String, Strategy)>, CliError> {
        if self.config.strategies.is_empty() {
            return Err(CliError::Config("field `strategy`: at least one strategy is required".into()));
        }
        let mut out = Vec::new();
        for s in &self.config.strategies {
            let strategy = match s {
                StrategyConfig::BuyAndHold { asset, .. } => Strategy::BuyAndHold { asset: asset - 1 },
                StrategyConfig::FixedMix { weights, .. } => Strategy::fixed_mix(PortfolioWeights::new(weights.clone())?)?,
                StrategyConfig::BestFixedMix { step, .. } => {
                    let (w, _) = best_fixed_mix(
                        &self.config.return_model()?,
                        &self.eval_config(),
                        &self.config.schedule()?,
                        *step,
                    )?;
                    Strategy::fixed_mix(w)?
                }
                StrategyConfig::Markowitz { .. } => Strategy::fixed_mix(self.markowitz()?.0)?,
                StrategyConfig::Bellman { policy, gamma, .. } => {
                    let policy = match (policy, gamma) {
                        (_, Some(g)) => self.solve_at(*g)?.policy,
                        (Some(p), None) => self.load_policy(p)?,
                        (None, None) => self.load_policy(&self.policy_path())?,
                    };
                    Strategy::Bellman(self.rule(policy)?)
                }
            };
            out.push((s.name().to_string(), s.slug(), strategy));
        }
        Ok(out)
    }

    fn eval_config(&self) -> EvalConfig {
        let e = &self.config.evaluation;
        EvalConfig { horizon: e.horizon, n_paths: e.n_paths, seed: e.seed, bootstrap: e.bootstrap }
    }

    fn markowitz(&self) -> Result<(PortfolioWeights, f64), CliError> {
        let (mean, cov) = self.config.log_return_moments()?;
        let sol = solve_mean_variance(&mean, &cov, self.config.risk())?;
        Ok((sol.weights, sol.objective))
    }
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let scenarios = ctx.config.scenarios()?;
    let schedule = ctx.config.schedule()?;
    let problem = Problem::new(&scenarios, ctx.config.risk(), &schedule)?;
    let grid = ctx.grid()?;
    let (report, converged) =
        match solve_ergodic(&problem, grid.clone(), &ctx.config.search(), ctx.config.stop_rule()) {
            Ok(r) => (r, true),
            Err(Error::NonConvergence(r)) => (*r, false),
            Err(e) => return Err(e.into()),
        };
    io::write_value_csv(&ctx.out.join("value.csv"), &report.value)?;
    io::write_policy_csv(&ctx.out.join("policy.csv"), &report.policy)?;
    let z = if ctx.config.gamma != 0.0 {
        let z = z_bounds(&problem)?;
        json!({ "z_minus": z.z_minus, "z_plus": z.z_plus })
    } else {
        Value::Null
    };
    ctx.record(
        "solve",
        json!({
            "grid_points": grid.len(),
            "scenarios": scenarios.len(),
            "iterations": report.iterations,
            "converged": converged,
            "lambda_hat": report.lambda_hat,
            "lambda_halfwidth": report.lambda_halfwidth,
            "residual_span": report.residual_span,
            "span_history": report.span_history,
            "z_bounds": z,
        }),
    )?;
    println!(
        "solve: {} iterations on {} nodes, lambda {:.6} (residual span {:.3e})",
        report.iterations,
        grid.len(),
        report.lambda_hat,
        report.residual_span
    );
    if !converged {
        return Err(CliError::NonConvergence(format!(
            "residual span {:e} after {} iterations",
            report.residual_span, report.iterations
        )));
    }
    Ok(())
}

fn metrics_table(rows: &[(String, Metrics)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Strategy".len());
    let mut s = format!(
        "{:<width$}  {:>10}  {:>10}  {:>14}  {:>10}  {:>8}\n",
        "Strategy", "Mean", "Std", "Mean+g/2*Var", "Entropy", "Traded"
    );
    for (name, m) in rows {
        s += &format!(
            "{:<width$}  {:>10.5}  {:>10.5}  {:>14.5}  {:>10.5}  {:>8.4}\n",
            name, m.mean, m.std, m.taylor, m.entropy, m.fraction_traded
        );
    }
    s
}

pub fn evaluate(ctx: &Context) -> Result<(), CliError> {
    let strategies = ctx.strategies()?;
    let model = ctx.config.return_model()?;
    let schedule = ctx.config.schedule()?;
    let cfg = ctx.eval_config();
    let mut rows = Vec::new();
    for (name, _, s) in &strategies {
        rows.push((name.clone(), evaluate_mc(s, &model, &cfg, ctx.config.eval_risk(), &schedule)?));
    }

    let path = ctx.out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut write = |rec: Vec<String>| w.write_record(rec).map_err(|e| CliError::Io(format!("{}: {e}", path.display())));
    write(
        ["strategy", "mean", "std", "taylor", "entropy", "stderr_mean", "stderr_entropy", "fraction_traded", "n_paths", "horizon"]
            .map(String::from)
            .to_vec(),
    )?;
    for (name, m) in &rows {
        write(vec![
            name.clone(),
            m.mean.to_string(),
            m.std.to_string(),
            m.taylor.to_string(),
            m.entropy.to_string(),
            m.stderr_mean.to_string(),
            m.stderr_entropy.to_string(),
            m.fraction_traded.to_string(),
            m.n_paths.to_string(),
            m.horizon.to_string(),
        ])?;
    }
    w.flush()?;
    let table = metrics_table(&rows);
    io::write_text(&ctx.out.join("metrics.txt"), &table)?;
    print!("{table}");
    let section: Vec<Value> = rows
        .iter()
        .map(|(n, m)| json!({ "strategy": n, "mean": m.mean, "std": m.std, "taylor": m.taylor, "entropy": m.entropy,
            "stderr_mean": m.stderr_mean, "stderr_entropy": m.stderr_entropy, "fraction_traded": m.fraction_traded }))
        .collect();
    ctx.record("evaluate", Value::Array(section))
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let sim = &ctx.config.simulate;
    if sim.horizon == 0 {
        return Err(CliError::Config("field `simulate.horizon`: must be at least 1".into()));
    }
    let strategies = ctx.strategies()?;
    let model = ctx.config.return_model()?;
    let schedule = ctx.config.schedule()?;
    let path = model.sample_path(sim.seed, sim.path_index, sim.horizon);
    let mut section = Vec::new();
    for (name, slug, s) in &strategies {
        let rec = simulate_wealth(s, &path, &schedule, 1.0)?;
        io::write_path_csv(&ctx.out.join(format!("path_{slug}.csv")), &path, &rec)?;
        let stats = trading_stats(&rec);
        println!(
            "{name}: ln W(T) {:.4}, traded on {} of {} days, cumulative decay {:.4}",
            rec.terminal_log_wealth(),
            stats.days_traded,
            rec.horizon(),
            stats.cumulative_decay
        );
        section.push(json!({
            "strategy": name,
            "file": format!("path_{slug}.csv"),
            "terminal_log_wealth": rec.terminal_log_wealth(),
            "days_traded": stats.days_traded,
            "fraction_traded": stats.fraction_traded,
            "cumulative_decay": stats.cumulative_decay,
        }));
    }
    ctx.record("simulate", Value::Array(section))
}

pub fn region(ctx: &Context, eta: Option<f64>) -> Result<(), CliError> {
    let eta = eta.unwrap_or(ctx.config.region.eta);
    if !(eta > 0.0) {
        return Err(CliError::Config(format!("eta must be positive, got {eta}")));
    }
    let rule = ctx.rule(ctx.load_policy(&ctx.policy_path())?)?;
    let region = no_trade_region(&rule, eta)?;
    let members: Vec<&[f64]> = region.member_points().collect();
    let shifts: Vec<&[f64]> = region.shift_points.iter().map(|p| p.as_slice()).collect();
    let markowitz = ctx.markowitz().ok().map(|(w, _)| {
        json!({ "weights": w.as_slice(), "inside": region.contains(&w) })
    });
    let doc = json!({
        "eta": eta,
        "lower": region.lower,
        "upper": region.upper,
        "members": members,
        "shift_points": shifts,
        "markowitz": markowitz,
    });
    io::write_json(&ctx.out.join("region.json"), &doc)?;
    println!(
        "region: {} no-action nodes, bounds {:?} .. {:?}",
        region.members.len(),
        region.lower,
        region.upper
    );
    ctx.record("region", json!({ "eta": eta, "members": region.members.len(), "lower": region.lower, "upper": region.upper }))
}

pub fn markowitz(ctx: &Context) -> Result<(), CliError> {
    let (w, objective) = ctx.markowitz()?;
    let doc = json!({ "gamma": ctx.config.gamma, "weights": w.as_slice(), "objective": objective });
    io::write_json(&ctx.out.join("markowitz.json"), &doc)?;
    println!("markowitz: {:?}", w.as_slice());
    ctx.record("markowitz", doc)
}
