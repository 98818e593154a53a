//! Linear Bellman solvers for finite-horizon (FH), first-exit (FE) and
//! average-cost (IH) problems, policy extraction and fixed-policy evaluation.
//!
//! Conventions: `z = exp((α−1)v)`, `Q = exp((α−1)q)`, `ρ = exp((α−1)c̄)`.
//! The optimal Bellman equation is `v = q + Ψ^{α−1}_{π₀}[v]` (plus `c̄` on
//! the left for IH), which in z-space reads `z = Q ⊙ (π₀ z)`. FH and FE are
//! iterated in v-space with log-sum-exp backups, which is the log-domain
//! form of the z recursion and covers `α = 1` without a special case.

use rayon::prelude::*;
use serde::Serialize;

use crate::divergence::{psi_weighted, renyi_any, LIMIT_THRESHOLD};
use crate::linalg::{perron_eigenpair, EigenOptions};
use crate::model::{HorizonKind, Policy, ProblemSpec};
use crate::sparse::SparseRowStochasticMatrix;
use crate::{Error, Result};

/// Rows per rayon task below which backups run serially.
const PARALLEL_MIN_STATES: usize = 4096;
/// Iterations over which a fixed-point iteration must make progress.
const DIVERGENCE_WINDOW: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Target sup-norm Bellman residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Switch IH power iteration to the shifted resolvent when it stalls.
    pub accelerate: bool,
    /// Plain power iterations before acceleration kicks in.
    pub plain_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            accelerate: true,
            plain_budget: 1000,
        }
    }
}

/// `v⁽ᵅ⁾`. FH problems carry `T+1` stages `v_0 … v_T`; FE and IH one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction {
    pub alpha: f64,
    pub stages: Vec<Vec<f64>>,
}

impl ValueFunction {
    /// `v_0` for FH, the stationary value otherwise.
    pub fn values(&self) -> &[f64] {
        &self.stages[0]
    }

    pub fn stage(&self, t: usize) -> &[f64] {
        &self.stages[t]
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }
}

/// `z⁽ᵅ⁾ = exp((α−1)v)` with its multiplier `Q = exp((α−1)q)`, both kept as
/// logarithms because the exponentials leave floating-point range easily.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZFunction {
    pub alpha: f64,
    pub log_stages: Vec<Vec<f64>>,
    /// `(α−1)q(·, t)`, one entry per stage that has a running cost.
    pub log_multiplier: Vec<Vec<f64>>,
}

impl ZFunction {
    pub fn from_values(spec: &ProblemSpec, v: &ValueFunction) -> Self {
        let a = v.alpha - 1.0;
        let log_stages = v
            .stages
            .iter()
            .map(|s| s.iter().map(|x| a * x).collect())
            .collect();
        let n_running = match spec.kind() {
            HorizonKind::FiniteHorizon { horizon } => *horizon,
            _ => 1,
        };
        let log_multiplier = (0..n_running.max(1))
            .map(|t| spec.running_cost(t).iter().map(|x| a * x).collect())
            .collect();
        Self {
            alpha: v.alpha,
            log_stages,
            log_multiplier,
        }
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_stages[0]
    }

    /// `z` itself; entries may underflow to zero or overflow to infinity.
    pub fn values(&self) -> Vec<f64> {
        self.log_stages[0].iter().map(|l| l.exp()).collect()
    }

    /// Back to `v = log z / (α−1)`. Undefined at `α = 1`.
    pub fn to_values(&self) -> Result<ValueFunction> {
        let a = self.alpha - 1.0;
        if a.abs() < LIMIT_THRESHOLD {
            return Err(Error::InvalidProblem(
                "the z transform is degenerate at alpha = 1".into(),
            ));
        }
        Ok(ValueFunction {
            alpha: self.alpha,
            stages: self
                .log_stages
                .iter()
                .map(|s| s.iter().map(|l| l / a).collect())
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub kind: String,
    pub alpha: f64,
    /// `c̄` (IH only).
    pub average_cost: Option<f64>,
    pub iterations: usize,
    /// Sup-norm residual of the Bellman equation at the returned solution.
    pub final_residual: f64,
    /// Principal eigenvalue `ρ` of `diag(Q)π₀` (IH, `α ≠ 1`).
    pub spectral_estimate: Option<f64>,
    pub log_spectral_estimate: Option<f64>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            kind: spec.kind().short_name().into(),
            alpha: spec.alpha(),
            average_cost: None,
            iterations: 0,
            final_residual: 0.0,
            spectral_estimate: None,
            log_spectral_estimate: None,
            warnings: Vec::new(),
        }
    }
}

/// Dispatches on the problem kind.
pub fn solve(spec: &ProblemSpec, opts: &SolverOptions) -> Result<(ValueFunction, SolveReport)> {
    match spec.kind() {
        HorizonKind::FiniteHorizon { .. } => solve_fh(spec),
        HorizonKind::FirstExit { .. } => solve_fe(spec, opts),
        HorizonKind::InfiniteHorizonAverage => solve_ih(spec, opts),
    }
}

// out[x] = q[x] + Ψ^β_{P(·|x)}[next] for every row.
fn backup(p: &SparseRowStochasticMatrix, q: &[f64], next: &[f64], beta: f64, out: &mut [f64]) {
    let row = |x: usize, scratch: &mut Vec<f64>| {
        let (cols, probs) = p.row(x);
        scratch.clear();
        scratch.extend(cols.iter().map(|&c| next[c]));
        q[x] + psi_weighted(probs, scratch, beta)
    };
    if out.len() >= PARALLEL_MIN_STATES {
        out.par_iter_mut()
            .enumerate()
            .for_each_init(Vec::new, |scratch, (x, o)| *o = row(x, scratch));
    } else {
        let mut scratch = Vec::new();
        for (x, o) in out.iter_mut().enumerate() {
            *o = row(x, &mut scratch);
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} at state {i} is {}", v[i]))),
        None => Ok(()),
    }
}

/// Backward recursion `v_t = q(·,t) + Ψ^{α−1}_{π₀}[v_{t+1}]` from `v_T = q(·,T)`.
pub fn solve_fh(spec: &ProblemSpec) -> Result<(ValueFunction, SolveReport)> {
    let HorizonKind::FiniteHorizon { horizon } = *spec.kind() else {
        return Err(Error::InvalidProblem("solve_fh needs a finite-horizon problem".into()));
    };
    let beta = spec.alpha() - 1.0;
    let n = spec.n_states();
    let mut stages = vec![vec![0.0; n]; horizon + 1];
    stages[horizon] = spec.final_cost().to_vec();
    for t in (0..horizon).rev() {
        let (head, tail) = stages.split_at_mut(t + 1);
        backup(spec.passive(), spec.running_cost(t), &tail[0], beta, &mut head[t]);
        check_finite(&head[t], &format!("v_{t}"))?;
    }
    let v = ValueFunction {
        alpha: spec.alpha(),
        stages,
    };
    let mut report = SolveReport::new(spec);
    report.iterations = horizon;
    report.final_residual = bellman_residual(spec, &v, None);
    Ok((v, report))
}

fn check_reachability(spec: &ProblemSpec, terminal: &[usize]) -> Result<()> {
    let mask = spec.terminal_mask();
    let stuck: Vec<usize> = spec
        .passive()
        .states_not_reaching(terminal)
        .into_iter()
        .filter(|&s| !mask[s])
        .collect();
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(Error::Unreachable { states: stuck })
    }
}

/// Shared first-exit fixed-point loop: `step` maps the current iterate to the
/// next one on non-terminal states (terminal entries must stay untouched).
fn fe_iterate(
    n: usize,
    init: Vec<f64>,
    opts: &SolverOptions,
    mut step: impl FnMut(&[f64], &mut [f64]),
) -> Result<(Vec<f64>, usize, f64)> {
    let mut v = init;
    let mut next = v.clone();
    let mut history: Vec<f64> = Vec::new();
    let _ = n;
    for it in 1..=opts.max_iter {
        step(&v, &mut next);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { iterations: it });
        }
        let change = sup_diff(&next, &v);
        std::mem::swap(&mut v, &mut next);
        if change <= opts.tol {
            return Ok((v, it, change));
        }
        history.push(change);
        if history.len() > DIVERGENCE_WINDOW {
            let old = history[history.len() - 1 - DIVERGENCE_WINDOW];
            if change >= old {
                return Err(Error::Diverged { iterations: it });
            }
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// First-exit solve: `v = q_f` on terminal states and the fixed point of
/// `v = q + Ψ^{α−1}_{π₀}[v]` elsewhere.
pub fn solve_fe(spec: &ProblemSpec, opts: &SolverOptions) -> Result<(ValueFunction, SolveReport)> {
    let HorizonKind::FirstExit { terminal_states } = spec.kind() else {
        return Err(Error::InvalidProblem("solve_fe needs a first-exit problem".into()));
    };
    check_reachability(spec, terminal_states)?;
    let mut report = SolveReport::new(spec);
    if !(spec.costs().is_nonnegative() && spec.alpha() <= 1.0) {
        report.warnings.push(
            "q >= 0 and alpha <= 1 does not hold; convergence is not guaranteed".into(),
        );
    }
    let mask = spec.terminal_mask();
    let q = spec.running_cost(0);
    let qf = spec.final_cost();
    let init: Vec<f64> = (0..spec.n_states())
        .map(|x| if mask[x] { qf[x] } else { 0.0 })
        .collect();
    let beta = spec.alpha() - 1.0;
    let p = spec.passive();
    let (v, iterations, _) = fe_iterate(spec.n_states(), init, opts, |cur, out| {
        backup(p, q, cur, beta, out);
        for x in 0..out.len() {
            if mask[x] {
                out[x] = qf[x];
            }
        }
    })?;
    let v = ValueFunction {
        alpha: spec.alpha(),
        stages: vec![v],
    };
    report.iterations = iterations;
    report.final_residual = bellman_residual(spec, &v, None);
    Ok((v, report))
}

/// Average-cost solve. For `α ≠ 1` the principal eigenpair of
/// `diag(Q)π₀` gives `c̄ = log ρ/(α−1)` and `v = log z/(α−1)` with `min v = 0`.
/// At `α = 1` it solves `v + c̄ = q + π₀v` with `Σv = 0`.
pub fn solve_ih(spec: &ProblemSpec, opts: &SolverOptions) -> Result<(ValueFunction, SolveReport)> {
    if !matches!(spec.kind(), HorizonKind::InfiniteHorizonAverage) {
        return Err(Error::InvalidProblem("solve_ih needs an average-cost problem".into()));
    }
    let classes = spec.passive().class_structure();
    if !classes.unichain() {
        return Err(Error::Reducible(format!(
            "passive chain has {} closed classes; the solution is not unique",
            classes.closed_classes.len()
        )));
    }
    let mut report = SolveReport::new(spec);
    if !classes.irreducible() {
        report.warnings.push(format!(
            "passive chain has {} strong components (one closed class); transient states are solved as well",
            classes.n_components
        ));
    }
    let a = spec.alpha() - 1.0;
    let q = spec.running_cost(0);
    let (v, c_bar) = if a.abs() < LIMIT_THRESHOLD {
        let (v, c, it) = relative_value_iteration(spec.passive(), q, opts)?;
        report.iterations = it;
        (v, c)
    } else {
        let log_q: Vec<f64> = q.iter().map(|x| a * x).collect();
        let eig = perron_eigenpair(
            spec.passive(),
            &log_q,
            &EigenOptions {
                tol: (0.5 * opts.tol * a.abs()).max(4e-15),
                max_iter: opts.max_iter,
                plain_budget: opts.plain_budget,
                accelerate: opts.accelerate,
            },
        )?;
        report.iterations = eig.iterations;
        report.log_spectral_estimate = Some(eig.log_rho);
        report.spectral_estimate = Some(eig.log_rho.exp());
        if eig.factorizations > 0 {
            report.warnings.push(format!(
                "power iteration accelerated by {} shifted factorizations",
                eig.factorizations
            ));
        }
        let mut v: Vec<f64> = eig.log_z.iter().map(|l| l / a).collect();
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        v.iter_mut().for_each(|x| *x -= m);
        (v, eig.log_rho / a)
    };
    let v = ValueFunction {
        alpha: spec.alpha(),
        stages: vec![v],
    };
    report.average_cost = Some(c_bar);
    report.final_residual = bellman_residual(spec, &v, Some(c_bar));
    if report.final_residual > opts.tol {
        report.warnings.push(format!(
            "Bellman residual {:e} is above the tolerance {:e}",
            report.final_residual, opts.tol
        ));
    }
    Ok((v, report))
}

// Relative value iteration on the lazy chain (I + π₀)/2, which has the same
// solution and removes periodicity: S(v) = q/2 + π_L v, then re-centre.
fn relative_value_iteration(
    p: &SparseRowStochasticMatrix,
    q: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = p.n();
    let mut v = vec![0.0; n];
    let mut pv = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        p.mul_vec(&v, &mut pv);
        let mean_v = v.iter().sum::<f64>() / n as f64;
        let mut s: Vec<f64> = (0..n).map(|x| 0.5 * q[x] + 0.5 * (v[x] + pv[x])).collect();
        let mean_s = s.iter().sum::<f64>() / n as f64;
        let c = 2.0 * (mean_s - mean_v);
        // residual of v + c = q + π₀ v at the current iterate
        residual = (0..n)
            .map(|x| (v[x] + c - q[x] - pv[x]).abs())
            .fold(0.0, f64::max);
        if residual <= opts.tol {
            return Ok((v, c, it));
        }
        s.iter_mut().for_each(|x| *x -= mean_s);
        v = s;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("relative value iteration overflowed".into()));
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual,
    })
}

/// Sup-norm residual of the optimal Bellman equation with the minimum in
/// closed form: `v_t − q(·,t) − Ψ^{α−1}_{π₀}[v_{t+1}]` for FH, the same with
/// `v_{t+1} = v` on non-terminal states for FE, and with `+ c̄` for IH.
pub fn bellman_residual(spec: &ProblemSpec, v: &ValueFunction, average_cost: Option<f64>) -> f64 {
    let beta = v.alpha - 1.0;
    let p = spec.passive();
    let n = spec.n_states();
    let mut out = vec![0.0; n];
    match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } => {
            let mut worst = sup_diff(&v.stages[*horizon], spec.final_cost());
            for t in 0..*horizon {
                backup(p, spec.running_cost(t), &v.stages[t + 1], beta, &mut out);
                worst = worst.max(sup_diff(&out, &v.stages[t]));
            }
            worst
        }
        HorizonKind::FirstExit { .. } => {
            let mask = spec.terminal_mask();
            let qf = spec.final_cost();
            backup(p, spec.running_cost(0), v.values(), beta, &mut out);
            (0..n)
                .map(|x| {
                    if mask[x] {
                        (v.values()[x] - qf[x]).abs()
                    } else {
                        (v.values()[x] - out[x]).abs()
                    }
                })
                .fold(0.0, f64::max)
        }
        HorizonKind::InfiniteHorizonAverage => {
            let c = average_cost.unwrap_or(0.0);
            backup(p, spec.running_cost(0), v.values(), beta, &mut out);
            (0..n)
                .map(|x| (v.values()[x] + c - out[x]).abs())
                .fold(0.0, f64::max)
        }
    }
}

/// `π*(x′|x) ∝ π₀(x′|x) exp(−v(x′))` for a given next-step value vector.
pub fn policy_from_values(spec: &ProblemSpec, next_values: &[f64], alpha: f64) -> Result<Policy> {
    if next_values.len() != spec.n_states() {
        return Err(Error::Dimension(format!(
            "value vector has {} entries for {} states",
            next_values.len(),
            spec.n_states()
        )));
    }
    check_finite(next_values, "value")?;
    let neg: Vec<f64> = next_values.iter().map(|x| -x).collect();
    Ok(Policy::new(spec.passive().reweighted_by_log(&neg)?, alpha))
}

/// Optimal stationary policy (FE/IH), or the first-step policy built from
/// `v_1` for FH (see [`extract_policy_schedule`] for every step).
pub fn extract_policy(spec: &ProblemSpec, v: &ValueFunction) -> Result<Policy> {
    let next = match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } if *horizon > 0 => v.stage(1),
        _ => v.values(),
    };
    policy_from_values(spec, next, v.alpha)
}

/// FH policies `π*_t` for `t = 0 … T−1`, each built from `v_{t+1}`.
pub fn extract_policy_schedule(spec: &ProblemSpec, v: &ValueFunction) -> Result<Vec<Policy>> {
    (1..v.n_stages())
        .map(|t| policy_from_values(spec, v.stage(t), v.alpha))
        .collect()
}

// Per-row aligned (π₀, π) probabilities over supp π₀, and D_α(π₀‖π).
struct AlignedPolicy {
    weights: Vec<f64>,
    divergence: Vec<f64>,
}

fn align_policy(spec: &ProblemSpec, policy: &Policy, alpha_eval: f64) -> Result<AlignedPolicy> {
    policy.check_support(spec.passive())?;
    let p = spec.passive();
    let mut weights = Vec::with_capacity(p.nnz());
    let mut divergence = Vec::with_capacity(p.n());
    for x in 0..p.n() {
        let (cols, p0) = p.row(x);
        let start = weights.len();
        weights.extend(cols.iter().map(|&c| policy.matrix.get(x, c)));
        let d = renyi_any(p0, &weights[start..], alpha_eval).map_err(|e| match e {
            Error::Support { outcome, detail } => Error::Support {
                outcome: outcome.map(|k| cols[k]),
                detail: format!("row {x}: {detail}"),
            },
            other => other,
        })?;
        divergence.push(d);
    }
    Ok(AlignedPolicy {
        weights,
        divergence,
    })
}

fn policy_backup(
    p: &SparseRowStochasticMatrix,
    aligned: &AlignedPolicy,
    q: &[f64],
    next: &[f64],
    alpha_eval: f64,
    out: &mut [f64],
) {
    let mut start = 0;
    let mut scratch = Vec::new();
    for (x, o) in out.iter_mut().enumerate() {
        let (cols, _) = p.row(x);
        let w = &aligned.weights[start..start + cols.len()];
        start += cols.len();
        scratch.clear();
        scratch.extend(cols.iter().map(|&c| next[c]));
        *o = q[x] + aligned.divergence[x] + psi_weighted(w, &scratch, alpha_eval);
    }
}

/// Value of a fixed policy under
/// `v(x) = q(x) + D_{α}(π₀(·|x)‖π(·|x)) + Ψ^{α}_{π(·|x)}[v_next]` with
/// `α = alpha_eval`: backward recursion for FH, fixed-point iteration for FE.
pub fn evaluate_policy(
    spec: &ProblemSpec,
    policy: &Policy,
    alpha_eval: f64,
    opts: &SolverOptions,
) -> Result<ValueFunction> {
    if !alpha_eval.is_finite() {
        return Err(Error::NonFinite(format!("alpha = {alpha_eval}")));
    }
    let aligned = align_policy(spec, policy, alpha_eval)?;
    let p = spec.passive();
    let n = spec.n_states();
    match spec.kind() {
        HorizonKind::FiniteHorizon { horizon } => {
            let mut stages = vec![vec![0.0; n]; horizon + 1];
            stages[*horizon] = spec.final_cost().to_vec();
            for t in (0..*horizon).rev() {
                let (head, tail) = stages.split_at_mut(t + 1);
                policy_backup(p, &aligned, spec.running_cost(t), &tail[0], alpha_eval, &mut head[t]);
                check_finite(&head[t], &format!("v_{t}"))?;
            }
            Ok(ValueFunction {
                alpha: alpha_eval,
                stages,
            })
        }
        HorizonKind::FirstExit { terminal_states } => {
            check_reachability(spec, terminal_states)?;
            let mask = spec.terminal_mask();
            let q = spec.running_cost(0);
            let qf = spec.final_cost();
            let init: Vec<f64> = (0..n).map(|x| if mask[x] { qf[x] } else { 0.0 }).collect();
            let (v, _, _) = fe_iterate(n, init, opts, |cur, out| {
                policy_backup(p, &aligned, q, cur, alpha_eval, out);
                for x in 0..n {
                    if mask[x] {
                        out[x] = qf[x];
                    }
                }
            })?;
            Ok(ValueFunction {
                alpha: alpha_eval,
                stages: vec![v],
            })
        }
        HorizonKind::InfiniteHorizonAverage => Err(Error::InvalidProblem(
            "fixed-policy evaluation is only defined for finite-horizon and first-exit problems"
                .into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostModel, StateSpace};

    fn uniform2() -> SparseRowStochasticMatrix {
        SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)],
            false,
        )
        .unwrap()
    }

    fn spec(p: SparseRowStochasticMatrix, q: Vec<f64>, alpha: f64, kind: HorizonKind) -> ProblemSpec {
        let n = p.n();
        ProblemSpec::new(StateSpace::new(n, None).unwrap(), p, CostModel::stationary(q), alpha, kind)
            .unwrap()
    }

    #[test]
    fn fh_zero_horizon_is_final_cost() {
        let s = spec(uniform2(), vec![0.3, 0.7], 0.5, HorizonKind::FiniteHorizon { horizon: 0 });
        let (v, _) = solve_fh(&s).unwrap();
        assert_eq!(v.values(), &[0.3, 0.7]);
    }

    #[test]
    fn fh_lmdp_hand_value() {
        let s = spec(uniform2(), vec![0.0, 0.0], 0.0, HorizonKind::FiniteHorizon { horizon: 1 })
            .with_costs(CostModel::stationary(vec![0.0, 0.0]).with_final(vec![0.0, 1.0]))
            .unwrap();
        let (v, _) = solve_fh(&s).unwrap();
        let expected = -((1.0 + (-1.0f64).exp()) / 2.0).ln();
        for x in 0..2 {
            assert!((v.values()[x] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn fe_scalar_closed_form() {
        let p_exit = 0.3;
        let p = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 1.0 - p_exit), (0, 1, p_exit), (1, 1, 1.0)],
            false,
        )
        .unwrap();
        let s = spec(p, vec![1.0, 0.0], 0.0, HorizonKind::FirstExit { terminal_states: vec![1] });
        let (v, r) = solve_fe(&s, &SolverOptions::default()).unwrap();
        let e = (-1.0f64).exp();
        let z = e * p_exit / (1.0 - e * (1.0 - p_exit));
        assert!((v.values()[0] - (-z.ln())).abs() < 1e-11);
        assert_eq!(v.values()[1], 0.0);
        assert!(r.final_residual <= 1e-12);
    }

    #[test]
    fn fe_divergence_is_reported() {
        // negative cost with a slow exit makes z grow without bound
        let p = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.99), (0, 1, 0.01), (1, 1, 1.0)],
            false,
        )
        .unwrap();
        let s = spec(p, vec![-1.0, 0.0], 0.5, HorizonKind::FirstExit { terminal_states: vec![1] });
        let err = solve_fe(&s, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
        assert!(err.to_string().contains("q >= 0 and alpha <= 1"));
    }

    #[test]
    fn ih_two_state_eigenvalue() {
        let s = spec(uniform2(), vec![0.0, 1.0], 0.5, HorizonKind::InfiniteHorizonAverage);
        let (v, r) = solve_ih(&s, &SolverOptions::default()).unwrap();
        let e = (-0.5f64).exp();
        let rho = 0.5 * (1.0 + e);
        assert!((r.average_cost.unwrap() - (-2.0 * rho.ln())).abs() < 1e-12);
        assert!(r.final_residual <= 1e-12);
        assert_eq!(v.values()[0], 0.0);
    }

    #[test]
    fn ih_constant_cost() {
        for alpha in [-0.5, 0.0, 0.5, 1.0, 2.0] {
            let s = spec(uniform2(), vec![0.7, 0.7], alpha, HorizonKind::InfiniteHorizonAverage);
            let (v, r) = solve_ih(&s, &SolverOptions::default()).unwrap();
            assert!((r.average_cost.unwrap() - 0.7).abs() < 1e-12, "alpha {alpha}");
            assert!(v.values().iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn policy_from_hand_values() {
        let s = spec(uniform2(), vec![0.0, 0.0], 0.5, HorizonKind::InfiniteHorizonAverage);
        let pol = policy_from_values(&s, &[0.0, 3f64.ln()], 0.5).unwrap();
        assert!((pol.matrix.get(0, 0) - 0.75).abs() < 1e-15);
        assert!((pol.matrix.get(1, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn evaluation_support_violation() {
        let p = SparseRowStochasticMatrix::from_triplets(2, [(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5)], false)
            .unwrap();
        let s = spec(uniform2(), vec![0.0, 0.0], 0.5, HorizonKind::FiniteHorizon { horizon: 2 });
        // α_e ≥ 1 needs supp π₀ within supp π
        let pol = Policy::new(p, 0.0);
        let err = evaluate_policy(&s, &pol, 2.0, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Support { outcome: Some(1), .. }), "{err}");
        assert!(evaluate_policy(&s, &pol, -0.5, &SolverOptions::default()).is_ok());
    }
}
