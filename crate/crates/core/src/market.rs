//! One-step log-return models, scenario sets for expectations, and
//! reproducible path simulation.

use alloc::vec::Vec;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

use crate::entropic::check_distribution;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const CHOLESKY_JITTER: f64 = 1e-12;
const SCENARIO_WEIGHT_TOL: f64 = 1e-10;
/// ChaCha stream reserved for scenario generation, disjoint from path streams.
const SCENARIO_STREAM: u64 = u64::MAX;

/// Finitely many log-return vectors with probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteReturnModel {
    dim: usize,
    log_returns: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteReturnModel {
    pub fn new(outcomes: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = outcomes.first().map(|(r, _)| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::validation("discrete model needs at least one outcome of dimension >= 1"));
        }
        let mut log_returns = Vec::with_capacity(outcomes.len() * dim);
        let mut probs = Vec::with_capacity(outcomes.len());
        for (k, (r, p)) in outcomes.into_iter().enumerate() {
            if r.len() != dim {
                return Err(Error::validation(alloc::format!(
                    "outcome {k} has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(alloc::format!("outcome {k} has a non-finite log-return")));
            }
            log_returns.extend_from_slice(&r);
            probs.push(p);
        }
        check_distribution(&probs, 1e-12)?;
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(DiscreteReturnModel { dim, log_returns, probs, cumulative })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn outcome(&self, k: usize) -> &[f64] {
        &self.log_returns[k * self.dim..(k + 1) * self.dim]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn draw_index<R: rand_core::RngCore>(&self, rng: &mut R) -> usize {
        let u: f64 = StandardUniform.sample(rng);
        self.cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.probs.len() - 1)
    }
}

/// Multivariate normal per-step log-returns `r ~ N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReturnModel {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
}

impl GaussianReturnModel {
    /// `cov` is row-major `d×d`.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::validation("gaussian model needs dimension >= 1"));
        }
        if cov.len() != d * d {
            return Err(Error::validation(alloc::format!(
                "covariance has {} entries, expected {}",
                cov.len(),
                d * d
            )));
        }
        if mean.iter().chain(&cov).any(|x| !x.is_finite()) {
            return Err(Error::validation("gaussian model has non-finite entries"));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[i * d + j] - cov[j * d + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::validation(alloc::format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let chol = cholesky(&cov, d)?;
        Ok(GaussianReturnModel { mean, cov, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    /// Lower Cholesky factor, row-major.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// Writes `mean + L z` into `out`.
    fn transform(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            out[i] = self.mean[i] + row.iter().zip(z).map(|(l, z)| l * z).sum::<f64>();
        }
    }
}

/// Lower Cholesky factor of a symmetric PSD matrix. Pivots within the
/// jitter of zero are treated as exact zeros (rank deficiency); pivots below
/// `-PSD_TOL` reject the matrix.
fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = alloc::vec![0.0; d * d];
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(1.0, f64::max);
    for j in 0..d {
        let mut pivot = a[j * d + j];
        for k in 0..j {
            pivot -= l[j * d + k] * l[j * d + k];
        }
        if pivot < -PSD_TOL * scale {
            return Err(Error::numeric("covariance is not positive semidefinite"));
        }
        if pivot <= CHOLESKY_JITTER * scale {
            // zero column; remaining entries must vanish for a PSD input
            for i in j + 1..d {
                let mut off = a[i * d + j];
                for k in 0..j {
                    off -= l[i * d + k] * l[j * d + k];
                }
                if off.abs() > PSD_TOL.sqrt() * scale {
                    return Err(Error::numeric("covariance is not positive semidefinite"));
                }
            }
            continue;
        }
        let diag = pivot.sqrt();
        l[j * d + j] = diag;
        for i in j + 1..d {
            let mut off = a[i * d + j];
            for k in 0..j {
                off -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = off / diag;
        }
    }
    Ok(l)
}

/// Return law for simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum ReturnModel {
    Discrete(DiscreteReturnModel),
    Gaussian(GaussianReturnModel),
}

impl ReturnModel {
    pub fn dim(&self) -> usize {
        match self {
            ReturnModel::Discrete(m) => m.dim(),
            ReturnModel::Gaussian(m) => m.dim(),
        }
    }

    /// Path `index` under `seed`: `horizon` gross-return vectors. Depends
    /// only on `(seed, index)`, never on which other paths were drawn.
    pub fn sample_path(&self, seed: u64, index: u64, horizon: usize) -> GrossPath {
        let d = self.dim();
        let mut rng = path_rng(seed, index);
        let mut data = alloc::vec![0.0; horizon * d];
        match self {
            ReturnModel::Discrete(m) => {
                for step in data.chunks_exact_mut(d) {
                    let k = m.draw_index(&mut rng);
                    for (w, r) in step.iter_mut().zip(m.outcome(k)) {
                        *w = r.exp();
                    }
                }
            }
            ReturnModel::Gaussian(m) => {
                let mut z = alloc::vec![0.0; d];
                for step in data.chunks_exact_mut(d) {
                    for zi in z.iter_mut() {
                        *zi = StandardNormal.sample(&mut rng);
                    }
                    m.transform(&z, step);
                    for w in step.iter_mut() {
                        *w = w.exp();
                    }
                }
            }
        }
        GrossPath { dim: d, data }
    }

    /// Paths `0..n_paths`, lazily generated.
    pub fn sample_paths(
        &self,
        horizon: usize,
        n_paths: usize,
        seed: u64,
    ) -> Result<impl Iterator<Item = GrossPath> + '_> {
        if horizon == 0 || n_paths == 0 {
            return Err(Error::validation("horizon and path count must be positive"));
        }
        Ok((0..n_paths as u64).map(move |k| self.sample_path(seed, k, horizon)))
    }
}

fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A realised sequence of gross-return vectors `w(1), …, w(T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrossPath {
    dim: usize,
    data: Vec<f64>,
}

impl GrossPath {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::validation("path data length is not a multiple of the dimension"));
        }
        if data.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation("gross returns must be positive and finite"));
        }
        Ok(GrossPath { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn step(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn steps(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }
}

/// Finite weighted set of gross-return vectors `w = e^r` standing in for
/// the one-step return law inside expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    dim: usize,
    gross: Vec<f64>,
    weights: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(dim: usize, gross: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || gross.len() != dim * weights.len() || weights.is_empty() {
            return Err(Error::validation("scenario set shape mismatch"));
        }
        if gross.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation("gross returns must be positive and finite"));
        }
        check_distribution(&weights, SCENARIO_WEIGHT_TOL)?;
        Ok(ScenarioSet { dim, gross, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn gross(&self, k: usize) -> &[f64] {
        &self.gross[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.gross.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Log-returns of asset `j` across scenarios.
    pub fn asset_log_returns(&self, j: usize) -> Vec<f64> {
        self.gross.chunks_exact(self.dim).map(|w| w[j].ln()).collect()
    }
}

/// Exact scenario set of a discrete model: one scenario per outcome.
pub fn scenarios_from_discrete(model: &DiscreteReturnModel) -> ScenarioSet {
    let gross = model.log_returns.iter().map(|r| r.exp()).collect();
    ScenarioSet { dim: model.dim, gross, weights: model.probs.clone() }
}

/// `n` equally weighted draws `exp(mean + L z)` from a seeded stream.
/// With `antithetic`, draws come in `(z, -z)` pairs.
pub fn scenarios_from_gaussian(
    model: &GaussianReturnModel,
    n: usize,
    seed: u64,
    antithetic: bool,
) -> Result<ScenarioSet> {
    if n < 2 {
        return Err(Error::validation("gaussian scenario count must be at least 2"));
    }
    let d = model.dim();
    let mut rng = path_rng(seed, SCENARIO_STREAM);
    let mut gross = alloc::vec![0.0; n * d];
    let mut z = alloc::vec![0.0; d];
    for (k, out) in gross.chunks_exact_mut(d).enumerate() {
        if antithetic && k % 2 == 1 {
            z.iter_mut().for_each(|x| *x = -*x);
        } else {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
        }
        model.transform(&z, out);
        for w in out.iter_mut() {
            *w = w.exp();
        }
    }
    let weights = alloc::vec![1.0 / n as f64; n];
    Ok(ScenarioSet { dim: d, gross, weights })
}
