#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::VecDeque;

use common::*;
use rand::Rng;
use rslc::analysis::{
    adversary_policy, compose, game_bruteforce_check, path_integral_estimate, sample_trajectories,
    stationary_of_matrix, CompositionRequest, GameCheckOptions,
};
use rslc::divergence::{psi, renyi_divergence, Distribution};
use rslc::model::validate;
use rslc::solver::{evaluate_policy, solve_fe, solve_fh, solve_ih};
use rslc::specfile::{parse_spec, SpecFormat};
use rslc::{
    CostModel, HorizonKind, Policy, ProblemSpec, SolverOptions, SparseRowStochasticMatrix,
    ValueFunction, ZFunction,
};

fn matrix(rows: Vec<Vec<(usize, f64)>>) -> SparseRowStochasticMatrix {
    SparseRowStochasticMatrix::from_rows(rows, false).unwrap()
}

#[test]
fn validation_reports_irreducibility() {
    let uniform = spec(
        matrix(vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]]),
        CostModel::stationary(vec![0.0, 1.0]),
        0.0,
        HorizonKind::InfiniteHorizonAverage,
    );
    assert!(validate(&uniform).irreducible);
    let identity = spec(
        SparseRowStochasticMatrix::identity(2),
        CostModel::stationary(vec![0.0, 1.0]),
        0.0,
        HorizonKind::InfiniteHorizonAverage,
    );
    assert!(!validate(&identity).irreducible);
}

#[test]
fn validation_lists_states_that_cannot_reach_the_terminal_set() {
    let mut r = rng(11);
    for _ in 0..20 {
        let n = 9;
        // Sparse random chain, terminal state n-1, no ring so some states are cut off.
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|x| {
                let mut t = vec![x];
                if r.random_bool(0.6) {
                    t.push(r.random_range(0..n));
                }
                t.sort_unstable();
                t.dedup();
                let w = 1.0 / t.len() as f64;
                t.into_iter().map(|j| (j, w)).collect()
            })
            .collect();
        let p = matrix(rows);
        let s = spec(
            p.clone(),
            CostModel::stationary(vec![1.0; n]),
            0.5,
            HorizonKind::FirstExit { terminal_states: vec![n - 1] },
        );
        // Reverse breadth-first search from the terminal state.
        let mut reaches = vec![false; n];
        reaches[n - 1] = true;
        let mut queue = VecDeque::from([n - 1]);
        while let Some(y) = queue.pop_front() {
            for x in 0..n {
                if !reaches[x] && p.get(x, y) > 0.0 {
                    reaches[x] = true;
                    queue.push_back(x);
                }
            }
        }
        let expected: Vec<usize> = (0..n).filter(|&x| !reaches[x]).collect();
        assert_eq!(validate(&s).unreachable_terminal, expected);
    }
}

#[test]
fn risk_neutral_average_cost_file_solves_the_lmdp_equation() {
    let text = r#"{
        "n_states": 3, "alpha": 0, "kind": "ih",
        "q": [0.2, 1.0, 0.5],
        "passive": [
            {"from": 0, "to": 0, "prob": 0.5}, {"from": 0, "to": 1, "prob": 0.5},
            {"from": 1, "to": 1, "prob": 0.25}, {"from": 1, "to": 2, "prob": 0.75},
            {"from": 2, "to": 0, "prob": 1.0}
        ]
    }"#;
    let spec = parse_spec(text, SpecFormat::Json, false).unwrap();
    let (v, report) = solve_ih(&spec, &SolverOptions::default()).unwrap();
    let c = report.average_cost.unwrap();
    let q = [0.2, 1.0, 0.5];
    let v = v.values();
    // v + c = q - log E_{p0}[exp(-v)]
    for x in 0..3 {
        let (cols, probs) = spec.passive().row(x);
        let e: f64 = cols.iter().zip(probs).map(|(&j, p)| p * (-v[j]).exp()).sum();
        assert!((v[x] + c - q[x] + e.ln()).abs() < 1e-10);
    }
}

#[test]
fn finite_horizon_matches_a_bruteforce_bellman_recursion() {
    let alpha = 0.5;
    let horizon = 3;
    let mut r = rng(12);
    let p = random_passive(&mut r, 5, 1);
    let q = random_costs(&mut r, 5, 0.0, 1.0);
    let qf = random_costs(&mut r, 5, 0.0, 2.0);
    let s = spec(
        p.clone(),
        CostModel::stationary(q.clone()).with_final(qf.clone()),
        alpha,
        HorizonKind::FiniteHorizon { horizon },
    );
    let (v, _) = solve_fh(&s).unwrap();
    let steps = 200;
    let mut next = qf;
    for t in (0..horizon).rev() {
        let cur: Vec<f64> = (0..5)
            .map(|x| {
                let (cols, probs) = p.row(x);
                let pi0 = Distribution::new(probs.to_vec()).unwrap();
                let f: Vec<f64> = cols.iter().map(|&c| next[c]).collect();
                let best = simplex_grid(cols.len(), steps)
                    .into_iter()
                    .filter_map(|u| {
                        let u = Distribution::new(u).ok()?;
                        let d = renyi_divergence(&pi0, &u, alpha).ok()?;
                        Some(d + psi(&u, &f, alpha).ok()?)
                    })
                    .fold(f64::INFINITY, f64::min);
                q[x] + best
            })
            .collect();
        // The grid can only overshoot the true minimum.
        for x in 0..5 {
            assert!(cur[x] >= v.stage(t)[x] - 1e-12);
            assert!(cur[x] - v.stage(t)[x] < 2e-3 * (horizon - t) as f64);
        }
        next = cur;
    }
}

#[test]
fn risk_neutral_limit_is_continuous() {
    let opts = SolverOptions::default();
    let spec = random_ih(&mut rng(13), 20, 0.0);
    let (v0, _) = solve_ih(&spec, &opts).unwrap();
    let (v1, _) = solve_ih(&spec.with_alpha(1e-6).unwrap(), &opts).unwrap();
    assert!(sup_diff(v0.values(), v1.values()) < 1e-4);
}

#[test]
fn first_exit_terminal_states_carry_the_final_cost() {
    let spec = random_fe(&mut rng(14), 8, 2, 0.5);
    let (v, _) = solve_fe(&spec, &SolverOptions::default()).unwrap();
    for x in [6, 7] {
        assert_eq!(v.values()[x], spec.final_cost()[x]);
    }
}

#[test]
fn policy_evaluation_matches_monte_carlo() {
    let alpha = 0.3;
    let horizon = 3;
    let mut r = rng(15);
    let spec = random_fh(&mut r, 4, horizon, alpha);
    // Random policy on the passive support.
    let rows: Vec<Vec<(usize, f64)>> = (0..4)
        .map(|x| {
            let (cols, _) = spec.passive().row(x);
            let w: Vec<f64> = cols.iter().map(|_| r.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            cols.iter().zip(w).map(|(&c, wi)| (c, wi / s)).collect()
        })
        .collect();
    let policy = Policy::new(matrix(rows), alpha);
    let v = evaluate_policy(&spec, &policy, alpha, &SolverOptions::default()).unwrap();

    // Per-step cost q + D(passive row || policy row), final cost at T.
    let step_cost: Vec<f64> = (0..4)
        .map(|x| {
            let p0 = Distribution::new(spec.passive().row(x).1.to_vec()).unwrap();
            let u = Distribution::new(policy.matrix.row(x).1.to_vec()).unwrap();
            spec.running_cost(0)[x] + renyi_divergence(&p0, &u, alpha).unwrap()
        })
        .collect();
    let augmented = spec
        .with_costs(CostModel::stationary(step_cost).with_final(spec.final_cost().to_vec()))
        .unwrap();
    let n = 1_000_000;
    let paths = sample_trajectories(&augmented, &policy.matrix, &[0], n, 21, horizon).unwrap();
    let shift = paths.iter().map(|p| alpha * p.accumulated_cost).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = paths.iter().map(|p| (alpha * p.accumulated_cost - shift).exp()).collect();
    let m = w.iter().sum::<f64>() / n as f64;
    let var = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let estimate = (shift + m.ln()) / alpha;
    let se = (var / n as f64).sqrt() / (m * alpha);
    assert!((estimate - v.stage(0)[0]).abs() < 3.0 * se, "{estimate} vs {}", v.stage(0)[0]);
}

#[test]
fn single_component_composition_is_the_identity() {
    let spec = random_fe(&mut rng(16), 6, 2, 0.5);
    let (v, _) = solve_fe(&spec, &SolverOptions::default()).unwrap();
    let z = ZFunction::from_values(&spec, &v);
    let c = compose(&spec, &CompositionRequest { components: vec![z.clone()], weights: vec![1.0] }).unwrap();
    assert!(sup_diff(c.z.log_values(), z.log_values()) < 1e-14);
    for x in [4, 5] {
        assert!((c.final_cost[x] - spec.final_cost()[x]).abs() < 1e-14);
    }
}

#[test]
fn equal_components_shift_the_final_cost_by_log_two() {
    for alpha in [-1.0, 0.5, 2.0] {
        let mut r = rng(17);
        let base = random_fe(&mut r, 6, 2, alpha);
        // Small running costs keep the alpha = 2 problem solvable.
        let q = random_costs(&mut r, 6, 0.0, 0.2);
        let spec = base
            .with_costs(CostModel::stationary(q).with_final(base.final_cost().to_vec()))
            .unwrap();
        let (v, _) = solve_fe(&spec, &SolverOptions::default()).unwrap();
        let z = ZFunction::from_values(&spec, &v);
        let c = compose(
            &spec,
            &CompositionRequest { components: vec![z.clone(), z], weights: vec![1.0, 1.0] },
        )
        .unwrap();
        for x in [4, 5] {
            let expected = spec.final_cost()[x] + 2f64.ln() / (alpha - 1.0);
            assert!((c.final_cost[x] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn deterministic_kernels_give_identical_trajectories() {
    let p = matrix(vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(0, 1.0)]]);
    let s = spec(
        p.clone(),
        CostModel::stationary(vec![1.0, 2.0, 3.0]),
        0.5,
        HorizonKind::FiniteHorizon { horizon: 5 },
    );
    let paths = sample_trajectories(&s, &p, &[0], 50, 3, 10).unwrap();
    assert!(paths.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(paths[0].states, vec![0, 1, 2, 0, 1, 2]);
}

#[test]
fn absorbing_terminal_is_always_reached() {
    let s = spec(
        matrix(vec![vec![(0, 0.7), (1, 0.3)], vec![(1, 0.5), (2, 0.5)], vec![(2, 1.0)]]),
        CostModel::stationary(vec![1.0, 1.0, 0.0]),
        0.5,
        HorizonKind::FirstExit { terminal_states: vec![2] },
    );
    let paths = sample_trajectories(&s, s.passive(), &[0], 2_000, 4, 10_000).unwrap();
    assert!(paths.iter().all(|p| p.terminated && *p.states.last().unwrap() == 2));
}

#[test]
fn one_step_frequencies_match_the_kernel() {
    let spec = random_fh(&mut rng(18), 6, 1, 0.5);
    let n = 1_000_000;
    let paths = sample_trajectories(&spec, spec.passive(), &[2], n, 5, 1).unwrap();
    let mut counts = [0usize; 6];
    for p in &paths {
        counts[p.states[1]] += 1;
    }
    for (j, c) in counts.iter().enumerate() {
        let freq = *c as f64 / n as f64;
        assert!((freq - spec.passive().get(2, j)).abs() < 4.0 / (n as f64).sqrt());
    }
}

#[test]
fn path_integral_matches_passive_policy_evaluation() {
    let spec = random_fh(&mut rng(19), 5, 3, 0.5);
    let passive = Policy::new(spec.passive().clone(), -0.5);
    let v = evaluate_policy(&spec, &passive, -0.5, &SolverOptions::default()).unwrap();
    for start in 0..5 {
        let est = path_integral_estimate(&spec, start, 100_000, 8, 10).unwrap();
        assert!((est.estimate - v.stage(0)[start]).abs() < 3.0 * est.std_error);
    }
}

#[test]
fn stationary_of_uniform_chain_is_uniform() {
    let p = matrix(vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]]);
    let st = stationary_of_matrix(&p, 1e-12, 1000).unwrap();
    assert!(sup_diff(st.distribution.probs(), &[0.5, 0.5]) < 1e-12);
}

#[test]
fn adversary_is_passive_when_it_has_nothing_to_exploit() {
    let mut r = rng(20);
    let base = random_fh(&mut r, 5, 2, 1.0);
    let v = ValueFunction {
        alpha: 1.0,
        stages: vec![random_costs(&mut r, 5, 0.0, 3.0); 3],
    };
    let adv = adversary_policy(&base, &v).unwrap();
    assert!(adv.matrix.max_row_sum_deviation() < 1e-12);
    for (i, j, p) in adv.matrix.triplets() {
        assert!((p - base.passive().get(i, j)).abs() < 1e-15);
    }
    let spec = base.with_alpha(2.0).unwrap();
    let flat = ValueFunction { alpha: 2.0, stages: vec![vec![1.5; 5]; 3] };
    let adv = adversary_policy(&spec, &flat).unwrap();
    for (i, j, p) in adv.matrix.triplets() {
        assert!((p - spec.passive().get(i, j)).abs() < 1e-15);
    }
    let zero = ValueFunction { alpha: 0.0, stages: vec![vec![1.5; 5]; 3] };
    assert!(adversary_policy(&spec.with_alpha(0.0).unwrap(), &zero).is_err());
    assert!(adversary_policy(&spec.with_alpha(0.5).unwrap(), &flat).is_err());
}

#[test]
fn game_on_deterministic_dynamics_has_no_gap() {
    let s = spec(
        matrix(vec![vec![(1, 1.0)], vec![(0, 1.0)]]),
        CostModel::stationary(vec![0.3, 1.0]),
        0.5,
        HorizonKind::FiniteHorizon { horizon: 2 },
    );
    let report = game_bruteforce_check(&s, 0.01, &GameCheckOptions::default()).unwrap();
    assert!(report.gap < 1e-12);
}

#[test]
fn game_gap_shrinks_on_random_instances() {
    let mut r = rng(22);
    for alpha in [0.3, 0.5, 2.0] {
        let p = random_passive(&mut r, 3, 1);
        let q = random_costs(&mut r, 3, 0.0, 1.0);
        let s: ProblemSpec = spec(
            p,
            CostModel::stationary(q),
            alpha,
            HorizonKind::FiniteHorizon { horizon: 1 },
        );
        let opts = GameCheckOptions::default();
        let coarse = game_bruteforce_check(&s, 0.02, &opts).unwrap();
        let fine = game_bruteforce_check(&s, 0.01, &opts).unwrap();
        assert!(fine.gap <= coarse.gap + 1e-12, "alpha {alpha}: {} > {}", fine.gap, coarse.gap);
        assert!(coarse.gap < 1e-2);
    }
}
