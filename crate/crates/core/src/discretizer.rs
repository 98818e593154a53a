//! Euler discretization of controlled diffusions on rectangular grids.
//!
//! For `dx = a(x) dt + σ B(x) dω` the one-step passive kernel is
//! `𝒩(x + a(x)h, σ²h B(x)B(x)ᵀ)`, evaluated at grid cell centers within a
//! truncation box of [`TRUNCATION_SIGMAS`] standard deviations per noisy
//! dimension, clamped into the grid and renormalized. Dimensions that receive
//! no noise are advanced deterministically.
//!
//! States enumerate the grid in row-major order (see [`GridInfo::flat_index`]):
//! for the hill car, state `ip * n_v + iv` is position cell `ip`, velocity
//! cell `iv`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::divergence::Distribution;
use crate::model::{CostModel, GridInfo, HorizonKind, ProblemSpec, StateSpace};
use crate::sparse::SparseRowStochasticMatrix;
use crate::{Error, Result};

pub const TRUNCATION_SIGMAS: f64 = 4.0;

pub type VectorField = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Returns a `d × m` matrix for an `m`-dimensional Brownian input.
pub type MatrixField = Box<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// How noise-free dimensions land on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeterministicAxis {
    /// Split mass between the two bracketing cell centers so the mean is kept.
    #[default]
    Interpolate,
    /// Round to the nearest cell center.
    Nearest,
}

pub struct DiffusionModel {
    drift: VectorField,
    control_matrix: MatrixField,
    sigma: f64,
    h: f64,
    grid: GridInfo,
    deterministic_axis: DeterministicAxis,
}

impl std::fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("sigma", &self.sigma)
            .field("h", &self.h)
            .field("grid", &self.grid)
            .field("deterministic_axis", &self.deterministic_axis)
            .finish_non_exhaustive()
    }
}

impl DiffusionModel {
    pub fn new(
        drift: VectorField,
        control_matrix: MatrixField,
        sigma: f64,
        h: f64,
        bounds: &[(f64, f64)],
        grid_shape: &[usize],
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidProblem(format!("sigma must be positive, got {sigma}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidProblem(format!("h must be positive, got {h}")));
        }
        if bounds.is_empty() || bounds.len() != grid_shape.len() {
            return Err(Error::Dimension(format!(
                "{} bounds for {} grid dimensions",
                bounds.len(),
                grid_shape.len()
            )));
        }
        for (d, (&(lo, hi), &n)) in bounds.iter().zip(grid_shape).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "dimension {d}: bounds [{lo}, {hi}] are not an interval"
                )));
            }
            if n < 2 {
                return Err(Error::InvalidProblem(format!(
                    "dimension {d}: grid needs at least 2 cells, got {n}"
                )));
            }
        }
        Ok(Self {
            drift,
            control_matrix,
            sigma,
            h,
            grid: GridInfo {
                shape: grid_shape.to_vec(),
                low: bounds.iter().map(|b| b.0).collect(),
                high: bounds.iter().map(|b| b.1).collect(),
            },
            deterministic_axis: DeterministicAxis::default(),
        })
    }

    pub fn with_deterministic_axis(mut self, mode: DeterministicAxis) -> Self {
        self.deterministic_axis = mode;
        self
    }

    pub fn grid(&self) -> &GridInfo {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_states(&self) -> usize {
        self.grid.n_points()
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    /// Sparse kernel row for grid point `state`: sorted `(next state, prob)`.
    pub fn kernel_row(&self, state: usize) -> Result<Vec<(usize, f64)>> {
        let grid = &self.grid;
        let dim = grid.shape.len();
        let x = grid.coordinates(state);
        let a = (self.drift)(&x);
        let b = (self.control_matrix)(&x);
        if a.len() != dim || b.nrows() != dim {
            return Err(Error::Dimension(format!(
                "drift has {} and control matrix {} rows for a {dim}-dimensional grid",
                a.len(),
                b.nrows()
            )));
        }
        let mean: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| xi + ai * self.h).collect();
        if let Some(d) = mean.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite(format!("kernel mean at state {state}, dimension {d}")));
        }
        let cov = &b * b.transpose() * (self.sigma * self.sigma * self.h);

        let noisy: Vec<usize> = (0..dim).filter(|&d| cov[(d, d)] > 0.0).collect();
        let quiet: Vec<usize> = (0..dim).filter(|&d| cov[(d, d)] <= 0.0).collect();

        // Deterministic dimensions: per-dimension index/weight lists.
        let quiet_parts: Vec<Vec<(usize, f64)>> = quiet
            .iter()
            .map(|&d| self.deterministic_split(d, mean[d]))
            .collect();

        // Joint Gaussian over the noisy dimensions.
        let noisy_part: Vec<(Vec<usize>, f64)> = if noisy.is_empty() {
            vec![(Vec::new(), 1.0)]
        } else {
            self.gaussian_part(state, &noisy, &mean, &cov)?
        };

        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut multi = vec![0usize; dim];
        for_each_combination(&quiet_parts, |idx, w_quiet| {
            for (&d, &i) in quiet.iter().zip(idx) {
                multi[d] = i;
            }
            for (noisy_idx, w) in &noisy_part {
                for (&d, &i) in noisy.iter().zip(noisy_idx) {
                    multi[d] = i;
                }
                entries.push((grid.flat_index(&multi), w_quiet * w));
            }
        });
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (c, p) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += p,
                _ => merged.push((c, p)),
            }
        }
        merged.retain(|e| e.1 > 0.0);
        let total: f64 = merged.iter().map(|e| e.1).sum();
        merged.iter_mut().for_each(|e| e.1 /= total);
        Ok(merged)
    }

    fn deterministic_split(&self, d: usize, m: f64) -> Vec<(usize, f64)> {
        let n = self.grid.shape[d];
        let clamp = |i: i64| i.clamp(0, n as i64 - 1) as usize;
        // fractional cell-center coordinate
        let t = (m - self.grid.low[d]) / self.grid.spacing(d) - 0.5;
        match self.deterministic_axis {
            DeterministicAxis::Nearest => vec![(clamp(t.round() as i64), 1.0)],
            DeterministicAxis::Interpolate => {
                let k0 = t.floor();
                let w = t - k0;
                let (i0, i1) = (clamp(k0 as i64), clamp(k0 as i64 + 1));
                if i0 == i1 || w == 0.0 {
                    vec![(i0, 1.0)]
                } else {
                    vec![(i0, 1.0 - w), (i1, w)]
                }
            }
        }
    }

    fn gaussian_part(
        &self,
        state: usize,
        noisy: &[usize],
        mean: &[f64],
        cov: &DMatrix<f64>,
    ) -> Result<Vec<(Vec<usize>, f64)>> {
        let k = noisy.len();
        let sub = DMatrix::from_fn(k, k, |i, j| cov[(noisy[i], noisy[j])]);
        let chol = sub.clone().cholesky().ok_or_else(|| {
            Error::DegenerateCovariance(format!(
                "noise covariance on dimensions {noisy:?} is singular at state {state}"
            ))
        })?;
        let grid = &self.grid;
        let ranges: Vec<(i64, i64)> = noisy
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let s = sub[(i, i)].sqrt();
                let step = grid.spacing(d);
                let to_index = |y: f64| (y - grid.low[d]) / step - 0.5;
                let lo = to_index(mean[d] - TRUNCATION_SIGMAS * s).ceil() as i64;
                let hi = to_index(mean[d] + TRUNCATION_SIGMAS * s).floor() as i64;
                if lo > hi {
                    let nearest = to_index(mean[d]).round() as i64;
                    (nearest, nearest)
                } else {
                    (lo, hi)
                }
            })
            .collect();
        let lists: Vec<Vec<(i64, f64)>> = ranges
            .iter()
            .map(|&(lo, hi)| (lo..=hi).map(|i| (i, 1.0)).collect())
            .collect();
        let mut out = Vec::new();
        let mut delta = DVector::zeros(k);
        for_each_combination(&lists, |idx, _| {
            for (i, (&d, &vi)) in noisy.iter().zip(idx).enumerate() {
                delta[i] = grid.center(d, vi) - mean[d];
            }
            let maha = delta.dot(&chol.solve(&delta));
            let w = (-0.5 * maha).exp();
            let clamped: Vec<usize> = noisy
                .iter()
                .zip(idx)
                .map(|(&d, &vi)| vi.clamp(0, grid.shape[d] as i64 - 1) as usize)
                .collect();
            out.push((clamped, w));
        });
        let total: f64 = out.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::Numerical(format!(
                "kernel at state {state} has no mass inside the truncation box"
            )));
        }
        Ok(out)
    }
}

// Odometer over the Cartesian product of weighted index lists; the callback
// receives the chosen indices and the product of their weights.
fn for_each_combination<I: Copy>(lists: &[Vec<(I, f64)>], mut f: impl FnMut(&[I], f64)) {
    if lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut pos = vec![0usize; lists.len()];
    let mut idx: Vec<I> = lists.iter().map(|l| l[0].0).collect();
    loop {
        let mut w = 1.0;
        for (d, l) in lists.iter().enumerate() {
            idx[d] = l[pos[d]].0;
            w *= l[pos[d]].1;
        }
        f(&idx, w);
        let mut d = lists.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            pos[d] += 1;
            if pos[d] < lists[d].len() {
                break;
            }
            pos[d] = 0;
        }
    }
}

/// The one-step passive distribution from grid point `state`, over all states.
pub fn euler_kernel(model: &DiffusionModel, state: usize) -> Result<Distribution> {
    if state >= model.n_states() {
        return Err(Error::InvalidProblem(format!(
            "state {state} is outside a grid of {} points",
            model.n_states()
        )));
    }
    let mut dense = vec![0.0; model.n_states()];
    for (c, p) in model.kernel_row(state)? {
        dense[c] = p;
    }
    Distribution::from_weights(dense)
}

/// Stacks kernel rows into a problem; `q` is sampled at cell centers.
pub fn build_grid_problem(
    model: &DiffusionModel,
    q: &(dyn Fn(&[f64]) -> f64 + Sync),
    kind: HorizonKind,
    alpha: f64,
) -> Result<ProblemSpec> {
    let n = model.n_states();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|s| model.kernel_row(s))
        .collect::<Result<_>>()?;
    let passive = SparseRowStochasticMatrix::from_rows(rows, false)?;
    let costs: Vec<f64> = (0..n).map(|s| q(&model.grid.coordinates(s))).collect();
    ProblemSpec::new(
        StateSpace::new(n, None)?,
        passive,
        CostModel::stationary(costs),
        alpha,
        kind,
    )?
    .with_grid(model.grid.clone())
}

/// Two-hill terrain `f(x) = exp(−v1(x−0.9)²/2) + r·exp(−v2(x+0.9)²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainModel {
    pub r: f64,
    pub v1: f64,
    pub v2: f64,
    pub g: f64,
}

impl Default for TerrainModel {
    fn default() -> Self {
        Self {
            r: 0.95,
            v1: 12.5,
            v2: 3.4,
            g: 9.81,
        }
    }
}

pub const HILL_CENTERS: [f64; 2] = [0.9, -0.9];

impl TerrainModel {
    pub fn height(&self, x: f64) -> f64 {
        (-self.v1 * (x - 0.9).powi(2) / 2.0).exp()
            + self.r * (-self.v2 * (x + 0.9).powi(2) / 2.0).exp()
    }

    pub fn slope(&self, x: f64) -> f64 {
        -self.v1 * (x - 0.9) * (-self.v1 * (x - 0.9).powi(2) / 2.0).exp()
            - self.r * self.v2 * (x + 0.9) * (-self.v2 * (x + 0.9).powi(2) / 2.0).exp()
    }
}

/// Hill-car parameters with the defaults used throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct HillCarConfig {
    pub terrain: TerrainModel,
    pub sigma: f64,
    pub h: f64,
    pub grid_shape: [usize; 2],
    pub deterministic_axis: DeterministicAxis,
}

impl Default for HillCarConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainModel::default(),
            sigma: 2.0,
            h: 0.02,
            grid_shape: [101, 101],
            deterministic_axis: DeterministicAxis::Interpolate,
        }
    }
}

pub const HILL_CAR_BOUNDS: [(f64, f64); 2] = [(-3.0, 3.0), (-6.0, 6.0)];

/// The hill-car diffusion: state `(p, v)`, noise on velocity only.
pub fn hill_car_model(config: &HillCarConfig) -> Result<DiffusionModel> {
    let t = config.terrain;
    if !(t.g > 0.0) {
        return Err(Error::InvalidProblem(format!("g must be positive, got {}", t.g)));
    }
    let drift: VectorField = Box::new(move |x: &[f64]| {
        let s = t.slope(x[0]);
        let norm = (1.0 + s * s).sqrt();
        vec![x[1] / norm, -t.g * s / norm]
    });
    let control: MatrixField = Box::new(|_: &[f64]| DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
    Ok(DiffusionModel::new(
        drift,
        control,
        config.sigma,
        config.h,
        &HILL_CAR_BOUNDS,
        &config.grid_shape,
    )?
    .with_deterministic_axis(config.deterministic_axis))
}

/// Average-cost hill-car problem with `q(p, v) = 1 − f(p)`, built at α = 0.
pub fn build_hill_car(
    terrain: TerrainModel,
    sigma: f64,
    h: f64,
    grid_shape: [usize; 2],
) -> Result<ProblemSpec> {
    build_hill_car_with(&HillCarConfig {
        terrain,
        sigma,
        h,
        grid_shape,
        ..HillCarConfig::default()
    })
}

pub fn build_hill_car_with(config: &HillCarConfig) -> Result<ProblemSpec> {
    let model = hill_car_model(config)?;
    let terrain = config.terrain;
    build_grid_problem(
        &model,
        &move |x: &[f64]| 1.0 - terrain.height(x[0]),
        HorizonKind::InfiniteHorizonAverage,
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn isotropic(shape: &[usize], drift: [f64; 2], sigma: f64, h: f64) -> DiffusionModel {
        DiffusionModel::new(
            Box::new(move |_: &[f64]| drift.to_vec()),
            Box::new(|_: &[f64]| DMatrix::identity(2, 2)),
            sigma,
            h,
            &[(-1.0, 1.0), (-1.0, 1.0)],
            shape,
        )
        .unwrap()
    }

    #[test]
    fn centered_kernel_is_symmetric() {
        let m = isotropic(&[21, 21], [0.0, 0.0], 1.0, 0.01);
        let center = m.grid().flat_index(&[10, 10]);
        let k = euler_kernel(&m, center).unwrap();
        let argmax = (0..k.len())
            .max_by(|&a, &b| k.probs()[a].total_cmp(&k.probs()[b]))
            .unwrap();
        assert_eq!(argmax, center);
        for s in 0..k.len() {
            let mirror = m.n_states() - 1 - s;
            assert!((k.probs()[s] - k.probs()[mirror]).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let m = isotropic(&[7, 9], [3.0, -2.0], 1.5, 0.05);
        for s in 0..m.n_states() {
            let row = m.kernel_row(s).unwrap();
            let total: f64 = row.iter().map(|e| e.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_noise_is_rejected() {
        let m = DiffusionModel::new(
            Box::new(|_: &[f64]| vec![0.0, 0.0]),
            Box::new(|_: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])),
            1.0,
            0.1,
            &[(-1.0, 1.0), (-1.0, 1.0)],
            &[5, 5],
        )
        .unwrap();
        assert!(matches!(m.kernel_row(0), Err(Error::DegenerateCovariance(_))));
    }

    #[test]
    fn model_parameter_checks() {
        let mk = |sigma: f64, h: f64, shape: &[usize]| {
            DiffusionModel::new(
                Box::new(|_: &[f64]| vec![0.0]),
                Box::new(|_: &[f64]| DMatrix::identity(1, 1)),
                sigma,
                h,
                &[(0.0, 1.0)],
                shape,
            )
        };
        assert!(mk(1.0, 0.1, &[4]).is_ok());
        assert!(mk(0.0, 0.1, &[4]).is_err());
        assert!(mk(1.0, -0.1, &[4]).is_err());
        assert!(mk(1.0, 0.1, &[1]).is_err());
    }

    #[test]
    fn interpolation_preserves_deterministic_mean() {
        let cfg = HillCarConfig {
            grid_shape: [41, 41],
            ..HillCarConfig::default()
        };
        let m = hill_car_model(&cfg).unwrap();
        let g = m.grid().clone();
        let s = g.flat_index(&[20, 25]);
        let x = g.coordinates(s);
        let expected = x[0] + m.drift(&x)[0] * m.h();
        let mean: f64 = m
            .kernel_row(s)
            .unwrap()
            .iter()
            .map(|&(c, p)| p * g.coordinates(c)[0])
            .sum();
        assert!((mean - expected).abs() < 1e-12);
    }

    #[test]
    fn terrain_peak_value() {
        let t = TerrainModel::default();
        let expected = 1.0 + 0.95 * (-3.4f64 * 1.8 * 1.8 / 2.0).exp();
        assert!((t.height(0.9) - expected).abs() < 1e-15);
    }
}
