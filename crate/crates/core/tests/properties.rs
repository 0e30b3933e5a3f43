use std::sync::Arc;

use ergoport_core::entropic::certainty_equivalent;
use ergoport_core::geometry::drift_into;
use ergoport_core::{penalty, CostSchedule, InterpolationMode, PortfolioWeights, SimplexGrid, ValueFunction};
use proptest::prelude::*;

fn distribution(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len)
        .prop_flat_map(|n| (prop::collection::vec(-5.0..5.0f64, n), prop::collection::vec(0.01..1.0f64, n)))
        .prop_map(|(xs, ws)| {
            let total: f64 = ws.iter().sum();
            (xs, ws.iter().map(|w| w / total).collect())
        })
}

fn simplex_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001..1.0f64, d).prop_map(|xs| {
        let total: f64 = xs.iter().sum();
        xs.iter().map(|x| x / total).collect()
    })
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn certainty_equivalent_within_support((xs, ps) in distribution(20), g in -20.0..20.0f64) {
        let ce = certainty_equivalent(&xs, &ps, g);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= ce && ce <= hi + 1e-12);
    }

    #[test]
    fn additive_over_independent_sums((xs, ps) in distribution(8), (ys, qs) in distribution(8), g in -5.0..5.0f64) {
        let mut sums = Vec::new();
        let mut probs = Vec::new();
        for (x, p) in xs.iter().zip(&ps) {
            for (y, q) in ys.iter().zip(&qs) {
                sums.push(x + y);
                probs.push(p * q);
            }
        }
        let joint = certainty_equivalent(&sums, &probs, g);
        let split = certainty_equivalent(&xs, &ps, g) + certainty_equivalent(&ys, &qs, g);
        prop_assert!((joint - split).abs() <= 1e-10 * (1.0 + split.abs()), "{joint} vs {split}");
    }

    #[test]
    fn penalty_is_positively_homogeneous(
        x in prop::collection::vec(-1.0..1.0f64, 3),
        a in 0.0..10.0f64,
        buy in prop::collection::vec(1e-4..0.5f64, 3),
        sell in prop::collection::vec(1e-4..0.5f64, 3),
    ) {
        let sched = CostSchedule::new(buy, sell).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
        let lhs = penalty(&scaled, &sched).unwrap();
        let rhs = a * penalty(&x, &sched).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        prop_assert!(lhs >= 0.0);
    }

    #[test]
    fn drift_stays_on_simplex_and_ignores_scale(
        pi in simplex_point(4),
        w in prop::collection::vec(0.1..3.0f64, 4),
        a in 0.01..100.0f64,
    ) {
        let mut out = vec![0.0; 4];
        let mut scaled_out = vec![0.0; 4];
        drift_into(&pi, &w, &mut out);
        let scaled: Vec<f64> = w.iter().map(|v| a * v).collect();
        drift_into(&pi, &scaled, &mut scaled_out);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(out.iter().all(|v| *v >= 0.0));
        for (u, v) in out.iter().zip(&scaled_out) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_affine_functions(
        d in 2..=4usize,
        divisions in 1..=12usize,
        coef in prop::collection::vec(-3.0..3.0f64, 4),
        raw in prop::collection::vec(0.001..1.0f64, 4),
    ) {
        let grid = Arc::new(SimplexGrid::new(d, 1.0 / divisions as f64).unwrap());
        let f = |p: &[f64]| p.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>();
        let values = grid.points().map(f).collect();
        let vf = ValueFunction::new(grid.clone(), values).unwrap();
        let total: f64 = raw[..d].iter().sum();
        let pi: Vec<f64> = raw[..d].iter().map(|x| x / total).collect();
        let got = vf.interpolate_with(&pi, InterpolationMode::Simplicial);
        prop_assert!((got - f(&pi)).abs() <= 1e-10, "{got} vs {}", f(&pi));
    }

    #[test]
    fn interpolation_is_bounded_by_grid_values(
        values in prop::collection::vec(-10.0..10.0f64, 66),
        pi in simplex_point(3),
        nearest in any::<bool>(),
    ) {
        let grid = Arc::new(SimplexGrid::new(3, 0.1).unwrap());
        let vf = ValueFunction::new(grid, values).unwrap();
        let mode = if nearest { InterpolationMode::Nearest } else { InterpolationMode::Simplicial };
        let got = vf.interpolate_with(&pi, mode);
        prop_assert!(vf.min() - 1e-12 <= got && got <= vf.max() + 1e-12);
    }

    #[test]
    fn grid_size_matches_binomial(d in 2..=5usize, divisions in 1..=20usize) {
        let grid = SimplexGrid::new(d, 1.0 / divisions as f64).unwrap();
        prop_assert_eq!(grid.len(), binomial(divisions + d - 1, d - 1));
        for i in (0..grid.len()).step_by(7) {
            prop_assert!(PortfolioWeights::new(grid.point(i).to_vec()).is_ok());
        }
    }
}
