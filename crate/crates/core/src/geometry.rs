//! The unit simplex as a state space: weights, the drift map, lattice
//! grids and piecewise-linear interpolation over them.
//!
//! Grid points are the lattice `{k·step : k ∈ ℕ₀ᵈ, Σk = N}` with
//! `N = 1/step`, ordered lexicographically in `k`. Interpolation uses the
//! Freudenthal (Kuhn) triangulation in cumulative coordinates
//! `u_i = N·(π_1 + … + π_i)`, `i < d`, which maps the simplex onto the
//! ordered region `0 ≤ u_1 ≤ … ≤ u_{d-1} ≤ N` and the lattice onto ℤ^{d-1}.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Deref;
#[cfg(not(any(feature = "std", test)))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Largest supported number of assets.
pub const MAX_DIM: usize = 8;
/// Tolerance on `Σπ = 1` for accepted weights.
pub const SIMPLEX_TOL: f64 = 1e-10;
/// Negative components down to this are treated as rounding noise.
pub const NEGATIVE_CLAMP: f64 = -1e-12;
/// Cumulative coordinates this close to an integer are put on the lattice,
/// so grid points interpolate to their stored value exactly.
const LATTICE_SNAP: f64 = 1e-9;

/// A point on the unit simplex: long-only portfolio loading factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    /// Validates and renormalises. Components in `[NEGATIVE_CLAMP, 0)` are
    /// set to zero; anything further off the simplex is rejected.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let mut w = w;
        normalize_in_place(&mut w)?;
        Ok(PortfolioWeights(w))
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::validation("dimension must be positive"));
        }
        Ok(PortfolioWeights(alloc::vec![1.0 / d as f64; d]))
    }

    /// All weight on asset `i`.
    pub fn vertex(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::validation(alloc::format!("asset index {i} out of range for d={d}")));
        }
        let mut w = alloc::vec![0.0; d];
        w[i] = 1.0;
        Ok(PortfolioWeights(w))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// ℓ₁ distance.
    pub fn l1_distance(&self, other: &PortfolioWeights) -> f64 {
        l1(&self.0, &other.0)
    }
}

impl Deref for PortfolioWeights {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn normalize_in_place(w: &mut [f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::validation("weights are empty"));
    }
    for (j, x) in w.iter_mut().enumerate() {
        if !x.is_finite() || *x < NEGATIVE_CLAMP {
            return Err(Error::validation(alloc::format!(
                "weight component {j} = {x} is not on the simplex"
            )));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::validation(alloc::format!("weights sum to {total}, expected 1")));
    }
    if total != 1.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    Ok(())
}

/// Post-return weights `π·w / ⟨π, w⟩` before any trading.
pub fn drift(pi: &PortfolioWeights, w: &[f64]) -> Result<PortfolioWeights> {
    if w.len() != pi.dim() {
        return Err(Error::validation("gross-return dimension mismatch"));
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::validation("gross returns must be strictly positive"));
    }
    let mut out = alloc::vec![0.0; pi.dim()];
    drift_into(pi, w, &mut out);
    Ok(PortfolioWeights(out))
}

/// Unchecked drift into a caller buffer; returns `⟨π, w⟩`.
#[inline]
pub fn drift_into(pi: &[f64], w: &[f64], out: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for ((o, p), g) in out.iter_mut().zip(pi).zip(w) {
        *o = p * g;
        total += *o;
    }
    let inv = 1.0 / total;
    out.iter_mut().for_each(|o| *o *= inv);
    total
}

/// Lattice points of the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexGrid {
    dim: usize,
    divisions: usize,
    points: Vec<f64>,
    binom: Vec<u64>,
}

/// Barycentric stencil of a point: up to `d` grid indices with weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub len: usize,
    pub index: [usize; MAX_DIM],
    pub weight: [f64; MAX_DIM],
}

impl Stencil {
    /// Vertex carrying the largest weight (lowest index on ties).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for k in 1..self.len {
            let (w, b) = (self.weight[k], self.weight[best]);
            if w > b || (w == b && self.index[k] < self.index[best]) {
                best = k;
            }
        }
        self.index[best]
    }
}

impl SimplexGrid {
    pub fn new(dim: usize, step: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::validation(alloc::format!(
                "grid dimension must be in 2..={MAX_DIM}, got {dim}"
            )));
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::validation("grid step must lie in (0, 1]"));
        }
        let ratio = 1.0 / step;
        let divisions = ratio.round();
        if (ratio - divisions).abs() > 1e-9 {
            return Err(Error::validation(alloc::format!("1/step = {ratio} is not an integer")));
        }
        let divisions = divisions as usize;
        let binom = binomial_table(divisions + dim);
        let mut grid = SimplexGrid { dim, divisions, points: Vec::new(), binom };
        let count = grid.expected_len();
        let mut points = Vec::with_capacity(count * dim);
        let mut k = alloc::vec![0usize; dim];
        enumerate_compositions(&mut k, 0, divisions, &mut |k| {
            points.extend(k.iter().map(|&ki| ki as f64 / divisions as f64));
        });
        grid.points = points;
        debug_assert_eq!(grid.len(), count);
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N = 1/step`.
    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn step(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `C(N + d − 1, d − 1)`.
    pub fn expected_len(&self) -> usize {
        self.choose(self.divisions + self.dim - 1, self.dim - 1) as usize
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> core::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.dim)
    }

    pub fn weights(&self, i: usize) -> PortfolioWeights {
        PortfolioWeights(self.point(i).to_vec())
    }

    fn choose(&self, n: usize, r: usize) -> u64 {
        if r > n {
            return 0;
        }
        self.binom[n * (MAX_DIM + 1) + r]
    }

    /// Ordinal of lattice coordinates `k` (must sum to `N`).
    pub fn index_of(&self, k: &[usize]) -> usize {
        debug_assert_eq!(k.len(), self.dim);
        let mut rank = 0u64;
        let mut remaining = self.divisions;
        for (i, &ki) in k.iter().enumerate().take(self.dim - 1) {
            let parts = self.dim - i - 1;
            // compositions of `remaining - a` into `parts + 1` cells, a < ki
            rank += self.choose(remaining + parts, parts)
                - self.choose(remaining + parts - ki, parts);
            remaining -= ki;
        }
        rank as usize
    }

    /// Barycentric stencil of `pi` in the Freudenthal triangulation.
    pub fn locate(&self, pi: &[f64]) -> Stencil {
        let d = self.dim;
        let m = d - 1;
        let n = self.divisions as f64;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        let mut acc = 0.0;
        let mut prev_base = 0usize;
        for i in 0..m {
            acc += pi[i].max(0.0);
            let mut u = (acc * n).clamp(0.0, n);
            let r = u.round();
            if (u - r).abs() <= LATTICE_SNAP {
                u = r;
            }
            let mut b = u.floor();
            if b >= n {
                b = n - 1.0;
            }
            let mut b = b as usize;
            if b < prev_base {
                b = prev_base;
            }
            base[i] = b;
            frac[i] = (u - b as f64).clamp(0.0, 1.0);
            prev_base = b;
        }
        let mut order = [0usize; MAX_DIM];
        for (i, o) in order.iter_mut().enumerate().take(m) {
            *o = i;
        }
        // descending fraction, later coordinate first on ties
        order[..m].sort_unstable_by(|&a, &b| {
            frac[b].partial_cmp(&frac[a]).unwrap_or(core::cmp::Ordering::Equal).then(b.cmp(&a))
        });
        let mut stencil = Stencil { len: 0, index: [0; MAX_DIM], weight: [0.0; MAX_DIM] };
        let mut vertex = base;
        let push = |vertex: &[usize; MAX_DIM], w: f64, st: &mut Stencil| {
            if w <= 0.0 {
                return;
            }
            let mut k = [0usize; MAX_DIM];
            let mut prev = 0usize;
            for i in 0..m {
                k[i] = vertex[i] - prev;
                prev = vertex[i];
            }
            k[m] = self.divisions - prev;
            st.index[st.len] = self.index_of(&k[..d]);
            st.weight[st.len] = w;
            st.len += 1;
        };
        let first = if m > 0 { 1.0 - frac[order[0]] } else { 1.0 };
        push(&vertex, first, &mut stencil);
        for step in 0..m {
            let axis = order[step];
            vertex[axis] += 1;
            let next = if step + 1 < m { frac[order[step + 1]] } else { 0.0 };
            push(&vertex, frac[axis] - next, &mut stencil);
        }
        stencil
    }

    /// Nearest lattice point in the sense of the dominant barycentric vertex.
    pub fn nearest(&self, pi: &[f64]) -> usize {
        self.locate(pi).dominant()
    }
}

fn binomial_table(max_n: usize) -> Vec<u64> {
    let stride = MAX_DIM + 1;
    let mut t = alloc::vec![0u64; (max_n + 1) * stride];
    for n in 0..=max_n {
        t[n * stride] = 1;
        for r in 1..=MAX_DIM.min(n) {
            let left = t[(n - 1) * stride + r - 1];
            let right = if r <= n - 1 { t[(n - 1) * stride + r] } else { 0 };
            t[n * stride + r] = left + right;
        }
    }
    t
}

fn enumerate_compositions(k: &mut [usize], pos: usize, remaining: usize, emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == k.len() {
        k[pos] = remaining;
        emit(k);
        return;
    }
    for v in 0..=remaining {
        k[pos] = v;
        enumerate_compositions(k, pos + 1, remaining - v, emit);
    }
}

/// How off-grid points read grid tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterpolationMode {
    /// Piecewise-linear on the Freudenthal triangulation.
    #[default]
    Simplicial,
    /// Value of the dominant vertex.
    Nearest,
}

/// Grid-indexed value table `v(π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    grid: Arc<SimplexGrid>,
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(grid: Arc<SimplexGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation("value table length does not match grid"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(alloc::format!("value at grid point {i} is not finite")));
        }
        Ok(ValueFunction { grid, values })
    }

    pub fn zeros(grid: Arc<SimplexGrid>) -> Self {
        let values = alloc::vec![0.0; grid.len()];
        ValueFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interpolate(&self, pi: &PortfolioWeights) -> f64 {
        self.interpolate_with(pi, InterpolationMode::Simplicial)
    }

    pub fn interpolate_with(&self, pi: &[f64], mode: InterpolationMode) -> f64 {
        match mode {
            InterpolationMode::Simplicial => {
                let st = self.grid.locate(pi);
                (0..st.len).map(|k| st.weight[k] * self.values[st.index[k]]).sum()
            }
            InterpolationMode::Nearest => self.values[self.grid.nearest(pi)],
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Grid-indexed target weights: the trading rule `π ↦ π′`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    grid: Arc<SimplexGrid>,
    targets: Vec<f64>,
}

impl Policy {
    /// `targets` is flat, `grid.len() × d`.
    pub fn new(grid: Arc<SimplexGrid>, targets: Vec<f64>) -> Result<Self> {
        let d = grid.dim();
        if targets.len() != grid.len() * d {
            return Err(Error::validation("policy table length does not match grid"));
        }
        let mut targets = targets;
        for (i, t) in targets.chunks_exact_mut(d).enumerate() {
            normalize_in_place(t).map_err(|e| {
                Error::validation(alloc::format!("policy target at grid point {i}: {e}"))
            })?;
        }
        Ok(Policy { grid, targets })
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.targets[i * d..(i + 1) * d]
    }

    pub fn targets(&self) -> core::slice::ChunksExact<'_, f64> {
        self.targets.chunks_exact(self.grid.dim())
    }

    /// Target at an arbitrary state. Simplicial mode interpolates grid
    /// targets; nearest mode moves `pi` by the nearest node's displacement.
    pub fn target_at(&self, pi: &[f64], mode: InterpolationMode, out: &mut [f64]) {
        let d = self.grid.dim();
        match mode {
            InterpolationMode::Simplicial => {
                let st = self.grid.locate(pi);
                out.iter_mut().for_each(|o| *o = 0.0);
                for k in 0..st.len {
                    let t = &self.targets[st.index[k] * d..(st.index[k] + 1) * d];
                    for (o, x) in out.iter_mut().zip(t) {
                        *o += st.weight[k] * x;
                    }
                }
                let s: f64 = out.iter().sum();
                out.iter_mut().for_each(|o| *o /= s);
            }
            InterpolationMode::Nearest => {
                // Shift by the nearest node's displacement so that states
                // near a no-action node stay put.
                let i = self.grid.nearest(pi);
                let node = self.grid.point(i);
                let t = self.target(i);
                for k in 0..d {
                    out[k] = (pi[k] + t[k] - node[k]).max(0.0);
                }
                let s: f64 = out.iter().sum();
                out.iter_mut().for_each(|o| *o /= s);
            }
        }
    }
}
