#![allow(dead_code)]

use ergoport_core::*;

pub const EX2_MEAN: [f64; 3] = [0.0025, 0.0015, 0.0020];

pub fn example1_model() -> DiscreteReturnModel {
    DiscreteReturnModel::new(vec![
        (vec![1.5f64.ln(), 0.5f64.ln()], 0.5),
        (vec![0.6f64.ln(), 1.8f64.ln()], 0.5),
    ])
    .unwrap()
}

pub fn example1_schedule() -> CostSchedule {
    CostSchedule::new(vec![0.1, 0.2], vec![0.2, 0.1]).unwrap()
}

pub fn example2_cov() -> Vec<f64> {
    [3.0, -1.0, -0.5, -1.0, 1.5, 0.5, -0.5, 0.5, 2.0].iter().map(|x| 0.0008 * x).collect()
}

pub fn example2_model() -> GaussianReturnModel {
    GaussianReturnModel::new(EX2_MEAN.to_vec(), example2_cov()).unwrap()
}

pub fn example2_schedule() -> CostSchedule {
    let c = [2.0, 1.6, 1.0].iter().map(|x| 0.004 * x).collect();
    let h = [1.0, 1.6, 2.0].iter().map(|x| 0.004 * x).collect();
    CostSchedule::new(c, h).unwrap()
}

/// Wealth after each period computed in share volumes and prices, starting
/// from unit prices. Mirrors the weight-space simulator's trade decisions.
pub fn volume_space_log_wealth(path: &GrossPath, rec: &WealthPath, schedule: &CostSchedule, w0: f64) -> Vec<f64> {
    let d = path.dim();
    let mut prices = vec![1.0; d];
    let mut volumes: Vec<f64> = rec.pre_weights[0].iter().map(|p| w0 * p).collect();
    let mut out = vec![w0.ln()];
    for t in 0..path.len() {
        if rec.traded[t] {
            let (v, _) = volume_oracle_step(&volumes, &prices, &rec.post_weights[t], schedule).unwrap();
            volumes = v;
        }
        for (p, g) in prices.iter_mut().zip(path.step(t)) {
            *p *= g;
        }
        let wealth: f64 = volumes.iter().zip(&prices).map(|(n, p)| n * p).sum();
        out.push(wealth.ln());
    }
    out
}

/// Coefficient of determination of a least-squares line through `ys`
/// against `0, 1, 2, …`.
pub fn linear_r2(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        let dy = y - ym;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
