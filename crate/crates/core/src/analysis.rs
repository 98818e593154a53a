//! Computations layered on solver output: composition of solutions,
//! passive-dynamics path integrals, trajectory sampling, stationary
//! distributions of controlled chains, the adversary of the equivalent
//! zero-sum game and a brute-force check of that game on tiny instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::divergence::{log_sum_exp, renyi_any, Distribution, LIMIT_THRESHOLD};
use crate::linalg::stationary_vector;
use crate::model::{CostModel, HorizonKind, Policy, ProblemSpec, RunningCost};
use crate::solver::{bellman_residual, ValueFunction, ZFunction};
use crate::sparse::SparseRowStochasticMatrix;
use crate::{Error, Result};

/// Largest residual a composed solution may leave.
pub const COMPOSITION_TOL: f64 = 1e-10;

/// Components sharing dynamics, running cost and `α`, with mixing weights.
#[derive(Debug, Clone)]
pub struct CompositionRequest {
    pub components: Vec<ZFunction>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Composition {
    pub z: ZFunction,
    /// Composite boundary cost. For FE problems only terminal entries matter
    /// and the others are zero.
    pub final_cost: Vec<f64>,
    /// Bellman residual of the composite against the composite final cost.
    pub residual: f64,
}

fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count || count == 0 {
        return Err(Error::Dimension(format!(
            "{} weights for {count} components",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidProblem("weights must be finite and nonnegative".into()));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::InvalidProblem("at least one weight must be positive".into()));
    }
    Ok(())
}

fn boundary_stage(spec: &ProblemSpec) -> Result<usize> {
    match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } => Ok(*horizon),
        HorizonKind::FirstExit { .. } => Ok(0),
        HorizonKind::InfiniteHorizonAverage => Err(Error::InvalidProblem(
            "composition needs a final cost (finite-horizon or first-exit)".into(),
        )),
    }
}

/// `z = Σ wᵢ zᵢ` and the final cost `log(Σ wᵢ exp((α−1)q_fⁱ))/(α−1)` it
/// solves. `spec` supplies the shared dynamics and running cost; its own
/// final cost is not used.
pub fn compose(spec: &ProblemSpec, req: &CompositionRequest) -> Result<Composition> {
    let alpha = spec.alpha();
    let a = alpha - 1.0;
    if a.abs() < LIMIT_THRESHOLD {
        return Err(Error::InvalidProblem(
            "z-space composition is undefined at alpha = 1; use compose_linear".into(),
        ));
    }
    check_weights(&req.weights, req.components.len())?;
    let boundary = boundary_stage(spec)?;
    let n = spec.n_states();
    for (i, c) in req.components.iter().enumerate() {
        if c.alpha != alpha {
            return Err(Error::InvalidProblem(format!(
                "component {i} has alpha {} but the problem has {alpha}",
                c.alpha
            )));
        }
        if c.log_stages.len() != boundary + 1 || c.log_stages.iter().any(|s| s.len() != n) {
            return Err(Error::Dimension(format!(
                "component {i} does not match the problem's stages and states"
            )));
        }
    }
    let first = &req.components[0];
    if req.components.iter().any(|c| c.log_multiplier != first.log_multiplier) {
        return Err(Error::InvalidProblem("components have different running costs".into()));
    }

    let mut terms = Vec::with_capacity(req.components.len());
    let log_stages: Vec<Vec<f64>> = (0..=boundary)
        .map(|t| {
            (0..n)
                .map(|x| {
                    terms.clear();
                    for (c, &w) in req.components.iter().zip(&req.weights) {
                        if w > 0.0 {
                            terms.push(w.ln() + c.log_stages[t][x]);
                        }
                    }
                    log_sum_exp(&terms)
                })
                .collect()
        })
        .collect();
    let z = ZFunction {
        alpha,
        log_stages,
        log_multiplier: first.log_multiplier.clone(),
    };

    let mask = spec.terminal_mask();
    let fe = matches!(spec.kind(), HorizonKind::FirstExit { .. });
    let final_cost: Vec<f64> = (0..n)
        .map(|x| {
            if fe && !mask[x] {
                0.0
            } else {
                z.log_stages[boundary][x] / a
            }
        })
        .collect();

    let composite_costs = CostModel {
        running: spec.costs().running.clone(),
        final_cost: Some(final_cost.clone()),
    };
    let running_fixed = match (&composite_costs.running, spec.kind()) {
        // a time-varying cost that carried q(·,T) must drop that stage now
        (RunningCost::TimeVarying(qs), HorizonKind::FiniteHorizon { horizon })
            if qs.len() == horizon + 1 =>
        {
            CostModel {
                running: RunningCost::TimeVarying(qs[..*horizon].to_vec()),
                final_cost: Some(final_cost.clone()),
            }
        }
        _ => composite_costs,
    };
    let composite_spec = spec.with_costs(running_fixed)?;
    let v = z.to_values()?;
    let residual = bellman_residual(&composite_spec, &v, None);
    if !(residual <= COMPOSITION_TOL) {
        return Err(Error::Numerical(format!(
            "composed solution leaves residual {residual:e} (limit {COMPOSITION_TOL:e})"
        )));
    }
    Ok(Composition {
        z,
        final_cost,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct LinearComposition {
    pub values: ValueFunction,
    pub costs: CostModel,
    pub residual: f64,
}

/// `α = 1`: `Σ wᵢ vᵢ` solves the problem with running cost `Σ wᵢ qᵢ` and
/// final cost `Σ wᵢ q_fⁱ`. `spec` supplies dynamics and kind.
pub fn compose_linear(
    spec: &ProblemSpec,
    components: &[(ValueFunction, CostModel)],
    weights: &[f64],
) -> Result<LinearComposition> {
    if (spec.alpha() - 1.0).abs() >= LIMIT_THRESHOLD {
        return Err(Error::InvalidProblem("linear composition needs alpha = 1".into()));
    }
    check_weights(weights, components.len())?;
    let n = spec.n_states();
    let n_stages = components[0].0.n_stages();
    if components
        .iter()
        .any(|(v, _)| v.n_stages() != n_stages || v.stages.iter().any(|s| s.len() != n))
    {
        return Err(Error::Dimension("components have different shapes".into()));
    }
    let mix = |pick: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; n];
        for (i, &w) in weights.iter().enumerate() {
            for (a, b) in acc.iter_mut().zip(pick(i)) {
                *a += w * b;
            }
        }
        acc
    };
    let stages: Vec<Vec<f64>> = (0..n_stages)
        .map(|t| mix(&|i| components[i].0.stages[t].clone()))
        .collect();
    let running = match &components[0].1.running {
        RunningCost::Stationary(_) => RunningCost::Stationary(mix(&|i| match &components[i].1.running {
            RunningCost::Stationary(q) => q.clone(),
            RunningCost::TimeVarying(qs) => qs[0].clone(),
        })),
        RunningCost::TimeVarying(qs0) => RunningCost::TimeVarying(
            (0..qs0.len())
                .map(|t| {
                    mix(&|i| match &components[i].1.running {
                        RunningCost::Stationary(q) => q.clone(),
                        RunningCost::TimeVarying(qs) => qs[t].clone(),
                    })
                })
                .collect(),
        ),
    };
    let final_cost = if components.iter().all(|(_, c)| c.final_cost.is_some()) {
        Some(mix(&|i| components[i].1.final_cost.clone().unwrap()))
    } else {
        None
    };
    let costs = CostModel {
        running,
        final_cost,
    };
    let composite_spec = spec.with_costs(costs.clone())?;
    let values = ValueFunction {
        alpha: spec.alpha(),
        stages,
    };
    let residual = bellman_residual(&composite_spec, &values, None);
    let scale = 1.0 + values.stages.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(residual <= COMPOSITION_TOL * scale) {
        return Err(Error::Numerical(format!(
            "linearly composed solution leaves residual {residual:e}"
        )));
    }
    Ok(LinearComposition {
        values,
        costs,
        residual,
    })
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub start: usize,
    pub states: Vec<usize>,
    /// `Σ_t q(x_t)` including the boundary summand (see [`sample_trajectories`]).
    pub accumulated_cost: f64,
    /// FE: entered the terminal set before the cap. Always true for FH.
    pub terminated: bool,
    /// Number of transitions taken.
    pub length: usize,
}

fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn step(kernel: &SparseRowStochasticMatrix, x: usize, rng: &mut ChaCha8Rng) -> usize {
    let (cols, probs) = kernel.row(x);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (&c, &p) in cols.iter().zip(probs) {
        acc += p;
        if u < acc {
            return c;
        }
    }
    *cols.last().expect("rows are nonempty")
}

// Simulates trajectory `index` from `start`. FH: exactly T steps, the last
// summand is q(x_T, T). FE: until the first terminal state (its final cost is
// the last summand) or `t_max` steps. IH: `t_max` steps of running cost.
#[allow(clippy::too_many_arguments)]
fn simulate(
    spec: &ProblemSpec,
    kernel: &SparseRowStochasticMatrix,
    mask: &[bool],
    start: usize,
    seed: u64,
    index: u64,
    t_max: usize,
    keep_states: bool,
) -> TrajectorySample {
    let mut rng = trajectory_rng(seed, index);
    let mut states = Vec::new();
    let mut x = start;
    if keep_states {
        states.push(x);
    }
    let mut cost = 0.0;
    let (terminated, length) = match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } => {
            for t in 0..*horizon {
                cost += spec.running_cost(t)[x];
                x = step(kernel, x, &mut rng);
                if keep_states {
                    states.push(x);
                }
            }
            cost += spec.final_cost()[x];
            (true, *horizon)
        }
        HorizonKind::FirstExit { .. } => {
            let q = spec.running_cost(0);
            let mut t = 0;
            let mut done = mask[x];
            while !done && t < t_max {
                cost += q[x];
                x = step(kernel, x, &mut rng);
                t += 1;
                if keep_states {
                    states.push(x);
                }
                done = mask[x];
            }
            if done {
                cost += spec.final_cost()[x];
            }
            (done, t)
        }
        HorizonKind::InfiniteHorizonAverage => {
            let q = spec.running_cost(0);
            for _ in 0..t_max {
                cost += q[x];
                x = step(kernel, x, &mut rng);
                if keep_states {
                    states.push(x);
                }
            }
            (false, t_max)
        }
    };
    TrajectorySample {
        start,
        states,
        accumulated_cost: cost,
        terminated,
        length,
    }
}

/// `n` trajectories per start state under `kernel` (the passive matrix or a
/// policy). Trajectory `k` of start `i` uses the ChaCha8 stream
/// `i * n + k` of `seed`, so output is independent of thread scheduling.
pub fn sample_trajectories(
    spec: &ProblemSpec,
    kernel: &SparseRowStochasticMatrix,
    starts: &[usize],
    n: usize,
    seed: u64,
    t_max: usize,
) -> Result<Vec<TrajectorySample>> {
    if n == 0 {
        return Err(Error::InvalidProblem("sample count must be at least 1".into()));
    }
    if kernel.n() != spec.n_states() {
        return Err(Error::Dimension("kernel and problem sizes differ".into()));
    }
    if let Some(&s) = starts.iter().find(|&&s| s >= spec.n_states()) {
        return Err(Error::InvalidProblem(format!("start state {s} out of range")));
    }
    let total = starts.len() * n;
    let mask = spec.terminal_mask();
    Ok((0..total)
        .into_par_iter()
        .map(|k| simulate(spec, kernel, &mask, starts[k / n], seed, k as u64, t_max, true))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathIntegralEstimate {
    pub start: usize,
    pub alpha: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub truncated_fraction: f64,
    pub n_samples: usize,
    pub n_used: usize,
}

/// Monte-Carlo value at `start` from passive rollouts:
/// `log mean exp((α−1)S) / (α−1)`, or the mean of `S` at `α = 1`, with a
/// delta-method standard error. Truncated FE paths are dropped and counted.
pub fn path_integral_estimate(
    spec: &ProblemSpec,
    start: usize,
    n: usize,
    seed: u64,
    t_max: usize,
) -> Result<PathIntegralEstimate> {
    if matches!(spec.kind(), HorizonKind::InfiniteHorizonAverage) {
        return Err(Error::InvalidProblem(
            "path integrals need a finite-horizon or first-exit problem".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidProblem("sample count must be at least 1".into()));
    }
    if start >= spec.n_states() {
        return Err(Error::InvalidProblem(format!("start state {start} out of range")));
    }
    let mask = spec.terminal_mask();
    let costs: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let s = simulate(spec, spec.passive(), &mask, start, seed, k as u64, t_max, false);
            s.terminated.then_some(s.accumulated_cost)
        })
        .collect();
    let used: Vec<f64> = costs.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::AllTruncated);
    }
    let m = used.len() as f64;
    let a = spec.alpha() - 1.0;
    let (estimate, std_error) = if a.abs() < LIMIT_THRESHOLD {
        let mean = used.iter().sum::<f64>() / m;
        let var = if used.len() > 1 {
            used.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        (mean, (var / m).sqrt())
    } else {
        let shift = used.iter().map(|c| a * c).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = used.iter().map(|c| (a * c - shift).exp()).collect();
        let mean_w = w.iter().sum::<f64>() / m;
        let var_w = if used.len() > 1 {
            w.iter().map(|x| (x - mean_w).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        (
            (shift + mean_w.ln()) / a,
            (var_w / m).sqrt() / (mean_w * a.abs()),
        )
    };
    Ok(PathIntegralEstimate {
        start,
        alpha: spec.alpha(),
        estimate,
        std_error,
        truncated_fraction: 1.0 - m / n as f64,
        n_samples: n,
        n_used: used.len(),
    })
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    pub distribution: Distribution,
    /// `‖μᵀP − μᵀ‖₁`.
    pub residual: f64,
    pub iterations: usize,
    pub accelerated: bool,
}

/// Stationary law of a policy's chain: lazy power iteration on `Pᵀ`, with a
/// shifted-resolvent fallback for slowly mixing chains.
pub fn stationary_distribution(policy: &Policy, tol: f64, max_iter: usize) -> Result<StationaryReport> {
    stationary_of_matrix(&policy.matrix, tol, max_iter)
}

pub fn stationary_of_matrix(
    p: &SparseRowStochasticMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryReport> {
    let classes = p.class_structure();
    if !classes.unichain() {
        return Err(Error::Reducible(format!(
            "chain has {} closed classes; the stationary law is not unique",
            classes.closed_classes.len()
        )));
    }
    let r = stationary_vector(p, tol, max_iter, 1000.min(max_iter))?;
    Ok(StationaryReport {
        distribution: Distribution::from_weights(r.mu)?,
        residual: r.residual,
        iterations: r.iterations,
        accelerated: r.accelerated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryPolicy {
    pub matrix: SparseRowStochasticMatrix,
    pub alpha: f64,
}

/// `π_a(x′|x) ∝ π₀(x′|x) exp((α−1)v(x′))`, using `v_1` for FH problems.
pub fn adversary_policy(spec: &ProblemSpec, v: &ValueFunction) -> Result<AdversaryPolicy> {
    if v.alpha != spec.alpha() {
        return Err(Error::InvalidProblem(format!(
            "value function is for alpha = {} but the problem has alpha = {}",
            v.alpha,
            spec.alpha()
        )));
    }
    if v.alpha.abs() < LIMIT_THRESHOLD {
        return Err(Error::InvalidProblem("the adversary is undefined at alpha = 0".into()));
    }
    let next = match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } if *horizon > 0 => v.stage(1),
        _ => v.values(),
    };
    if next.len() != spec.n_states() {
        return Err(Error::Dimension("value vector does not match the problem".into()));
    }
    let a = v.alpha - 1.0;
    let log_w: Vec<f64> = next.iter().map(|x| a * x).collect();
    Ok(AdversaryPolicy {
        matrix: spec.passive().reweighted_by_log(&log_w)?,
        alpha: v.alpha,
    })
}

/// Argument order of the controller's divergence in the game cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DivergenceOrder {
    /// `D_α(π₀‖u_c)`, the order under which the game value equals the
    /// optimal value for every `α`.
    #[default]
    PassiveFirst,
    /// `D_α(u_c‖π₀)`; agrees with the above at `α = 1/2`.
    ControlFirst,
}

#[derive(Debug, Clone)]
pub struct GameCheckOptions {
    pub order: DivergenceOrder,
    /// Cap on (controller, adversary) pair evaluations.
    pub max_evaluations: u64,
}

impl Default for GameCheckOptions {
    fn default() -> Self {
        Self {
            order: DivergenceOrder::default(),
            max_evaluations: 500_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameCheckReport {
    pub grid_step: f64,
    pub order: DivergenceOrder,
    /// Brute-force upper value `v_0`.
    pub game_values: Vec<f64>,
    pub solver_values: Vec<f64>,
    /// Sup-norm gap between the two.
    pub gap: f64,
    pub evaluations: u64,
}

// All points of the k-simplex with coordinates on multiples of 1/m.
fn simplex_grid(k: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if k == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k - 1, left - c, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, m, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1u64, |acc, i| acc.saturating_mul(n + 1 - i) / i)
}

/// Upper value of the zero-sum game by exhaustive min-max over simplex grids
/// of step `grid_step` for both players, compared with [`solve_fh`]'s value.
/// The stage cost is `q + D_α(·) − KL(u_a‖u_c)/α` and the continuation is
/// `E_{u_a}[v_{t+1}]` with the game's own `v_{t+1}`.
///
/// [`solve_fh`]: crate::solver::solve_fh
pub fn game_bruteforce_check(
    spec: &ProblemSpec,
    grid_step: f64,
    opts: &GameCheckOptions,
) -> Result<GameCheckReport> {
    let HorizonKind::FiniteHorizon { horizon } = *spec.kind() else {
        return Err(Error::InvalidProblem("the game check needs a finite-horizon problem".into()));
    };
    let alpha = spec.alpha();
    if spec.n_states() > 4 || horizon > 3 {
        return Err(Error::ResourceCap(format!(
            "the game check is limited to 4 states and horizon 3 (got {} and {horizon})",
            spec.n_states()
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidProblem("the zero-sum game needs alpha > 0".into()));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidProblem(format!("grid step {grid_step} is not in (0, 1]")));
    }
    let m = (1.0 / grid_step).round() as usize;
    if ((m as f64) * grid_step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProblem(format!(
            "grid step {grid_step} does not divide 1"
        )));
    }
    let p = spec.passive();
    let n = spec.n_states();
    let per_stage: u64 = (0..n)
        .map(|x| {
            let k = p.row(x).0.len() as u64;
            binomial(m as u64 + k - 1, k - 1).saturating_pow(2)
        })
        .fold(0u64, |a, b| a.saturating_add(b));
    let planned = per_stage.saturating_mul(horizon as u64);
    if planned > opts.max_evaluations {
        return Err(Error::ResourceCap(format!(
            "{planned} evaluations exceed the cap of {}",
            opts.max_evaluations
        )));
    }

    let grids: Vec<Vec<Vec<f64>>> = (0..n).map(|x| simplex_grid(p.row(x).0.len(), m)).collect();
    let mut v_next = spec.final_cost().to_vec();
    let mut evaluations = 0u64;
    for t in (0..horizon).rev() {
        let q = spec.running_cost(t);
        let mut v_t = vec![0.0; n];
        for x in 0..n {
            let (cols, p0) = p.row(x);
            let cont: Vec<f64> = cols.iter().map(|&c| v_next[c]).collect();
            let grid = &grids[x];
            // adversary-side constants: E_{u_a}[v] and Σ u_a log u_a
            let adv: Vec<(f64, f64, &Vec<f64>)> = grid
                .iter()
                .map(|ua| {
                    let ev: f64 = ua.iter().zip(&cont).map(|(u, v)| u * v).sum();
                    let neg_ent: f64 = ua.iter().filter(|u| **u > 0.0).map(|u| u * u.ln()).sum();
                    (ev, neg_ent, ua)
                })
                .collect();
            let mut best = f64::INFINITY;
            for uc in grid {
                let d = match opts.order {
                    DivergenceOrder::PassiveFirst => renyi_any(p0, uc, alpha),
                    DivergenceOrder::ControlFirst => renyi_any(uc, p0, alpha),
                };
                let Ok(d) = d else { continue };
                if !d.is_finite() {
                    continue;
                }
                let log_uc: Vec<f64> = uc.iter().map(|u| u.ln()).collect();
                let mut worst = f64::NEG_INFINITY;
                for (ev, neg_ent, ua) in &adv {
                    let mut cross = 0.0;
                    let mut ok = true;
                    for (u, l) in ua.iter().zip(&log_uc) {
                        if *u > 0.0 {
                            if l.is_infinite() {
                                ok = false;
                                break;
                            }
                            cross += u * l;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let kl = neg_ent - cross;
                    worst = worst.max(ev - kl / alpha);
                }
                evaluations += grid.len() as u64;
                best = best.min(d + worst);
            }
            v_t[x] = q[x] + best;
        }
        v_next = v_t;
    }
    let (solved, _) = crate::solver::solve_fh(spec)?;
    let gap = v_next
        .iter()
        .zip(solved.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(GameCheckReport {
        grid_step,
        order: opts.order,
        game_values: v_next,
        solver_values: solved.values().to_vec(),
        gap,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StateSpace;

    fn uniform2() -> SparseRowStochasticMatrix {
        SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)],
            false,
        )
        .unwrap()
    }

    fn spec2(alpha: f64, kind: HorizonKind) -> ProblemSpec {
        ProblemSpec::new(
            StateSpace::new(2, None).unwrap(),
            uniform2(),
            CostModel::stationary(vec![0.0, 1.0]),
            alpha,
            kind,
        )
        .unwrap()
    }

    #[test]
    fn simplex_grid_counts() {
        assert_eq!(simplex_grid(2, 100).len(), 101);
        assert_eq!(simplex_grid(3, 10).len() as u64, binomial(12, 2));
        assert!(simplex_grid(3, 7)
            .iter()
            .all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn adversary_hand_row() {
        let s = spec2(2.0, HorizonKind::InfiniteHorizonAverage);
        let v = ValueFunction {
            alpha: 2.0,
            stages: vec![vec![0.0, 2f64.ln()]],
        };
        let a = adversary_policy(&s, &v).unwrap();
        assert!((a.matrix.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.matrix.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        let v0 = ValueFunction {
            alpha: 0.0,
            stages: vec![vec![0.0, 1.0]],
        };
        assert!(adversary_policy(&s, &v0).is_err());
    }

    #[test]
    fn fh_zero_horizon_path_integral_is_exact() {
        let s = spec2(0.5, HorizonKind::FiniteHorizon { horizon: 0 });
        let e = path_integral_estimate(&s, 1, 100, 3, 10).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn stationary_hand_example() {
        let p = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.9), (0, 1, 0.1), (1, 0, 0.5), (1, 1, 0.5)],
            false,
        )
        .unwrap();
        let r = stationary_distribution(&Policy::new(p, 0.0), 1e-14, 100_000).unwrap();
        assert!((r.distribution.probs()[0] - 5.0 / 6.0).abs() < 1e-13);
        let id = SparseRowStochasticMatrix::identity(2);
        assert!(matches!(
            stationary_distribution(&Policy::new(id, 0.0), 1e-12, 100),
            Err(Error::Reducible(_))
        ));
    }

    #[test]
    fn sampling_is_deterministic_for_point_masses() {
        let p = SparseRowStochasticMatrix::from_triplets(2, [(0, 1, 1.0), (1, 0, 1.0)], false)
            .unwrap();
        let s = ProblemSpec::new(
            StateSpace::new(2, None).unwrap(),
            p.clone(),
            CostModel::stationary(vec![1.0, 2.0]),
            0.0,
            HorizonKind::FiniteHorizon { horizon: 3 },
        )
        .unwrap();
        let out = sample_trajectories(&s, &p, &[0], 20, 11, 100).unwrap();
        assert!(out.iter().all(|t| t == &out[0]));
        assert_eq!(out[0].states, vec![0, 1, 0, 1]);
        assert_eq!(out[0].accumulated_cost, 1.0 + 2.0 + 1.0 + 2.0);
    }
}
