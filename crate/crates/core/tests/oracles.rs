mod common;

use std::sync::Arc;

use common::*;
use ergoport_core::entropic::certainty_equivalent;
use ergoport_core::evaluation::metrics_from_log_growth;
use ergoport_core::*;

fn gamma(g: f64) -> RiskParameter {
    RiskParameter::new(g).unwrap()
}

fn w(v: &[f64]) -> PortfolioWeights {
    PortfolioWeights::new(v.to_vec()).unwrap()
}

/// Brute-force `max_{p} ln s(π, p) + μ^γ(ln⟨p, w⟩)` over a univariate scan.
fn scan_t0(pi: f64, problem: &Problem<'_>, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for k in (0..=n).map(|k| k as f64 * step).chain([pi]) {
        let v = step_value(&w(&[pi, 1.0 - pi]), &w(&[k, 1.0 - k]), problem).unwrap();
        best = best.max(v);
    }
    best
}

#[test]
fn first_iterate_matches_dense_scan() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.005).unwrap());
    let (t0, _) = apply_operator(&ValueFunction::zeros(grid.clone()), &problem, &SearchConfig::default()).unwrap();
    for i in (0..grid.len()).step_by(10) {
        let pi = grid.point(i)[0];
        let oracle = scan_t0(pi, &problem, 1e-4);
        let got = t0.values()[i];
        assert!((got - oracle).abs() <= 1e-6, "π={pi}: {got} vs scan {oracle}");
    }
}

#[test]
fn step_value_two_point_closed_form() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let e1 = w(&[1.0, 0.0]);
    let expected = -2.0 * (0.5 * 1.5f64.powf(-0.5) + 0.5 * 0.6f64.powf(-0.5)).ln();
    assert!((step_value(&e1, &e1, &problem).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn example1_optimal_value_and_policy() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.005).unwrap());
    let rep = solve_ergodic(&problem, grid, &SearchConfig::default(), StopRule::default()).unwrap();
    assert!(rep.converged);
    assert!((rep.lambda_hat - 0.044).abs() <= 0.005, "lambda {}", rep.lambda_hat);

    let rule = Strategy::Bellman(BellmanRule::new(Arc::new(rep.policy)).unwrap());
    assert_eq!(decide(&rule, &w(&[0.5, 0.5])).unwrap().as_slice(), &[0.5, 0.5]);
    let high = decide(&rule, &w(&[0.9, 0.1])).unwrap();
    assert!((high[0] - 0.75).abs() <= 0.03, "upper barrier {}", high[0]);
}

#[test]
fn fixed_iteration_count_is_reported() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.01).unwrap());
    let rep = solve_ergodic(&problem, grid, &SearchConfig::grid_only(), StopRule::Fixed(8)).unwrap();
    assert_eq!(rep.iterations, 8);
    assert_eq!(rep.span_history.len(), 9);
}

#[test]
fn risk_seeking_value_dominates_risk_averse() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let grid = Arc::new(SimplexGrid::new(2, 0.005).unwrap());
    let solve = |g: f64| {
        let problem = Problem::new(&sc, gamma(g), &sched).unwrap();
        solve_ergodic(&problem, grid.clone(), &SearchConfig::default(), StopRule::default()).unwrap()
    };
    let (seek, averse) = (solve(0.5), solve(-0.5));
    assert!(seek.converged);
    assert!(seek.lambda_hat >= averse.lambda_hat);
}

#[test]
fn costless_problem_is_static() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = CostSchedule::flat(2, 1e-9).unwrap();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.01).unwrap());
    let rep = solve_ergodic(&problem, grid.clone(), &SearchConfig::default(), StopRule::default()).unwrap();

    // Static optimum of μ^γ(ln⟨π, w⟩) by a dense scan.
    let (mut best, mut best_x) = (f64::NEG_INFINITY, 0.0);
    for k in 0..=100_000 {
        let x = k as f64 * 1e-5;
        let v = step_value(&w(&[x, 1.0 - x]), &w(&[x, 1.0 - x]), &problem).unwrap();
        if v > best {
            best = v;
            best_x = x;
        }
    }
    assert!((rep.lambda_hat - best).abs() <= 1e-6, "{} vs {best}", rep.lambda_hat);
    assert!(span(&rep.value) <= 1e-6);
    for i in 0..grid.len() {
        assert!((rep.policy.target(i)[0] - best_x).abs() <= 1e-3);
    }
    let rule = BellmanRule::new(Arc::new(rep.policy)).unwrap();
    let region = no_trade_region(&rule, strategies::DEFAULT_SNAP).unwrap();
    assert!(region.members.len() <= 1, "{:?}", region.members);
    assert!(region.upper[0] - region.lower[0] <= grid.step());
}

#[test]
fn discounted_values_approach_ergodic_solution() {
    let sc = scenarios_from_discrete(&example1_model());
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.01).unwrap());
    let search = SearchConfig::grid_only();
    let ergodic = solve_ergodic(&problem, grid.clone(), &search, StopRule::default()).unwrap();
    let (target, _) = center(&ergodic.value);

    let mut distances = Vec::new();
    for alpha in [0.2, 0.1, 0.05] {
        let n_iter = (12.0 / alpha) as usize;
        let (vf, _) = solve_discounted(&problem, grid.clone(), &search, alpha, n_iter).unwrap();
        // Undo the γ scaling before centering.
        let unscaled = ValueFunction::new(grid.clone(), vf.values().iter().map(|x| x / -0.5).collect()).unwrap();
        let (c, _) = center(&unscaled);
        let dist = c.values().iter().zip(target.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        distances.push(dist);
    }
    assert!(distances.windows(2).all(|d| d[1] < d[0]), "{distances:?}");
}

#[test]
fn gaussian_scenarios_match_model_moments() {
    let model = example2_model();
    let n = 4096;
    let sc = scenarios_from_gaussian(&model, n, 7, false).unwrap();
    let cov = example2_cov();
    let logs: Vec<Vec<f64>> = (0..3).map(|j| sc.asset_log_returns(j)).collect();
    let means: Vec<f64> = logs.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    for j in 0..3 {
        let stderr = (cov[j * 3 + j] / n as f64).sqrt();
        assert!((means[j] - EX2_MEAN[j]).abs() <= 4.0 * stderr, "asset {j}");
    }
    for a in 0..3 {
        for b in 0..3 {
            let c: f64 =
                logs[a].iter().zip(&logs[b]).map(|(x, y)| (x - means[a]) * (y - means[b])).sum::<f64>() / (n as f64 - 1.0);
            // Var of a sample covariance is (σ_aa σ_bb + σ_ab²) / n.
            let se = ((cov[a * 3 + a] * cov[b * 3 + b] + cov[a * 3 + b].powi(2)) / n as f64).sqrt();
            assert!((c - cov[a * 3 + b]).abs() <= 4.0 * se, "cov({a},{b}) {c}");
        }
    }
}

#[test]
fn gaussian_entropic_matches_large_sample() {
    let model = GaussianReturnModel::new(vec![0.01], vec![0.04]).unwrap();
    let sc = scenarios_from_gaussian(&model, 200_000, 3, true).unwrap();
    let xs = sc.asset_log_returns(0);
    let g = -2.0;
    let mc = certainty_equivalent(&xs, sc.weights(), g);
    let exact = gaussian_entropic(0.01, 0.04, gamma(g)).unwrap();
    assert!((mc - exact).abs() <= 2e-3, "{mc} vs {exact}");
}

#[test]
fn buy_and_hold_entropy_matches_closed_form() {
    // μ^γ of an i.i.d. sum is T times the one-step value.
    let model = ReturnModel::Discrete(example1_model());
    let sched = example1_schedule();
    let cfg = EvalConfig::new(250, 20_000, 5);
    let m = evaluate_mc(&Strategy::BuyAndHold { asset: 0 }, &model, &cfg, gamma(-0.5), &sched).unwrap();
    let exact = certainty_equivalent(&[1.5f64.ln(), 0.6f64.ln()], &[0.5, 0.5], -0.5);
    assert!((m.entropy - exact).abs() <= 3.0 * m.stderr_entropy, "{} vs {exact} ± {}", m.entropy, m.stderr_entropy);
    assert_eq!(m.fraction_traded, 0.0);
}

#[test]
fn bellman_rule_beats_buy_and_hold() {
    let model = example1_model();
    let sc = scenarios_from_discrete(&model);
    let sched = example1_schedule();
    let problem = Problem::new(&sc, gamma(-0.5), &sched).unwrap();
    let grid = Arc::new(SimplexGrid::new(2, 0.01).unwrap());
    let rep = solve_ergodic(&problem, grid, &SearchConfig::grid_only(), StopRule::default()).unwrap();
    let model = ReturnModel::Discrete(model);
    let cfg = EvalConfig::new(250, 500, 9);
    let rule = Strategy::Bellman(BellmanRule::new(Arc::new(rep.policy)).unwrap());
    let ours = evaluate_mc(&rule, &model, &cfg, gamma(-0.5), &sched).unwrap();
    for asset in 0..2 {
        let bh = evaluate_mc(&Strategy::BuyAndHold { asset }, &model, &cfg, gamma(-0.5), &sched).unwrap();
        assert!(ours.entropy >= bh.entropy);
    }
}

#[test]
fn one_step_decay_matches_volume_space() {
    let sched = example2_schedule();
    let pre = w(&[0.2, 0.5, 0.3]);
    let post = w(&[0.45, 0.15, 0.4]);
    let prices = [1.7, 0.4, 2.2];
    let volumes: Vec<f64> = pre.iter().zip(&prices).map(|(p, s)| 3.0 * p / s).collect();
    let (_, wealth) = volume_oracle_step(&volumes, &prices, &post, &sched).unwrap();
    let s = decay_factor(&pre, &post, &sched, 1e-13).unwrap();
    assert!((wealth / 3.0 - s).abs() <= 1e-9);
}

#[test]
fn metrics_are_time_normalised() {
    let lg = vec![0.5, 1.0, 1.5, 2.0];
    let m = metrics_from_log_growth(&lg, 10, gamma(-1.0), 0, 1).unwrap();
    assert!((m.mean - 0.125).abs() < 1e-15);
    let sample_var = [0.5, 1.0, 1.5, 2.0].iter().map(|x: &f64| (x - 1.25).powi(2)).sum::<f64>() / 3.0;
    assert!((m.std - sample_var.sqrt() / 10.0).abs() < 1e-15);
    let ce = certainty_equivalent(&lg, &[0.25; 4], -1.0);
    assert!((m.entropy - ce / 10.0).abs() < 1e-15);
    assert!((m.taylor - (1.25 - 0.5 * sample_var) / 10.0).abs() < 1e-15);
}
