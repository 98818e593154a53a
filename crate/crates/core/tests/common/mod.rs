#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rslc::divergence::Distribution;
use rslc::{CostModel, HorizonKind, ProblemSpec, SparseRowStochasticMatrix, StateSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    Distribution::from_weights(w).unwrap()
}

/// Irreducible sparse chain: every row keeps itself and its ring successor
/// plus `extra` random targets.
pub fn random_passive(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> SparseRowStochasticMatrix {
    let rows = (0..n)
        .map(|x| {
            let mut targets = vec![x, (x + 1) % n];
            for _ in 0..extra {
                targets.push(rng.random_range(0..n));
            }
            targets.sort_unstable();
            targets.dedup();
            let w: Vec<f64> = targets.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            targets.into_iter().zip(w).map(|(j, wj)| (j, wj / s)).collect()
        })
        .collect();
    SparseRowStochasticMatrix::from_rows(rows, false).unwrap()
}

pub fn random_costs(rng: &mut ChaCha8Rng, n: usize, low: f64, high: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(low..high)).collect()
}

pub fn spec(
    passive: SparseRowStochasticMatrix,
    costs: CostModel,
    alpha: f64,
    kind: HorizonKind,
) -> ProblemSpec {
    let n = passive.n();
    ProblemSpec::new(StateSpace::new(n, None).unwrap(), passive, costs, alpha, kind).unwrap()
}

pub fn random_fh(rng: &mut ChaCha8Rng, n: usize, horizon: usize, alpha: f64) -> ProblemSpec {
    let p = random_passive(rng, n, 3);
    let q = random_costs(rng, n, 0.0, 1.0);
    let qf = random_costs(rng, n, 0.0, 2.0);
    spec(
        p,
        CostModel::stationary(q).with_final(qf),
        alpha,
        HorizonKind::FiniteHorizon { horizon },
    )
}

/// First-exit problem whose last `n_terminal` states are absorbing-terminal.
pub fn random_fe(rng: &mut ChaCha8Rng, n: usize, n_terminal: usize, alpha: f64) -> ProblemSpec {
    let p = random_passive(rng, n, 3);
    let q = random_costs(rng, n, 0.0, 1.0);
    let qf = random_costs(rng, n, 0.0, 2.0);
    spec(
        p,
        CostModel::stationary(q).with_final(qf),
        alpha,
        HorizonKind::FirstExit {
            terminal_states: (n - n_terminal..n).collect(),
        },
    )
}

pub fn random_ih(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> ProblemSpec {
    let p = random_passive(rng, n, 3);
    let q = random_costs(rng, n, 0.0, 1.0);
    spec(p, CostModel::stationary(q), alpha, HorizonKind::InfiniteHorizonAverage)
}

/// All points of the probability simplex in `dim` coordinates whose entries
/// are multiples of `1/steps`.
pub fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if dim == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dim - 1, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, steps, &mut Vec::new(), &mut out);
    out
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
