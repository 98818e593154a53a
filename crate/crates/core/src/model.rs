//! Problem representation: states, passive dynamics, costs, horizon and risk.

use std::collections::HashSet;

use serde::Serialize;

use crate::sparse::{SparseRowStochasticMatrix, ROW_SUM_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    n_states: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(n_states: usize, labels: Option<Vec<String>>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidProblem("state space is empty".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n_states {
                return Err(Error::InvalidProblem(format!(
                    "{} labels for {n_states} states",
                    l.len()
                )));
            }
            let unique: HashSet<_> = l.iter().collect();
            if unique.len() != l.len() {
                return Err(Error::InvalidProblem("state labels are not unique".into()));
            }
        }
        Ok(Self { n_states, labels })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
}

/// Running state cost `q(x)` or, for finite-horizon problems, `q(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RunningCost {
    Stationary(Vec<f64>),
    /// Indexed `[t][x]`.
    TimeVarying(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub running: RunningCost,
    /// FH: cost at time `T` for every state. FE: cost on terminal states
    /// (entries on non-terminal states are ignored). Defaults to the running
    /// cost when absent.
    pub final_cost: Option<Vec<f64>>,
}

impl CostModel {
    pub fn stationary(q: Vec<f64>) -> Self {
        Self {
            running: RunningCost::Stationary(q),
            final_cost: None,
        }
    }

    pub fn with_final(mut self, q_final: Vec<f64>) -> Self {
        self.final_cost = Some(q_final);
        self
    }

    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        let running: Box<dyn Iterator<Item = f64>> = match &self.running {
            RunningCost::Stationary(q) => Box::new(q.iter().copied()),
            RunningCost::TimeVarying(qs) => Box::new(qs.iter().flatten().copied()),
        };
        running.chain(self.final_cost.iter().flatten().copied())
    }

    /// True when every running and final cost is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.all_values().all(|v| v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HorizonKind {
    FiniteHorizon { horizon: usize },
    FirstExit { terminal_states: Vec<usize> },
    InfiniteHorizonAverage,
}

impl HorizonKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            HorizonKind::FiniteHorizon { .. } => "fh",
            HorizonKind::FirstExit { .. } => "fe",
            HorizonKind::InfiniteHorizonAverage => "ih",
        }
    }
}

/// Rectangular grid metadata attached to discretized problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub shape: Vec<usize>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl GridInfo {
    pub fn n_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self, dim: usize) -> f64 {
        (self.high[dim] - self.low[dim]) / self.shape[dim] as f64
    }

    /// Cell-center coordinate `i` along `dim`. May be called with indices
    /// outside the grid to extend the lattice virtually.
    pub fn center(&self, dim: usize, i: i64) -> f64 {
        self.low[dim] + (i as f64 + 0.5) * self.spacing(dim)
    }

    /// Row-major flat index (first dimension varies slowest).
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for d in (0..self.shape.len()).rev() {
            out[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        out
    }

    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.center(d, i as i64))
            .collect()
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    state_space: StateSpace,
    passive: SparseRowStochasticMatrix,
    costs: CostModel,
    alpha: f64,
    kind: HorizonKind,
    grid: Option<GridInfo>,
}

impl ProblemSpec {
    pub fn new(
        state_space: StateSpace,
        passive: SparseRowStochasticMatrix,
        costs: CostModel,
        alpha: f64,
        kind: HorizonKind,
    ) -> Result<Self> {
        let n = state_space.n_states();
        if passive.n() != n {
            return Err(Error::Dimension(format!(
                "passive matrix is {}x{0} but there are {n} states",
                passive.n()
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("alpha = {alpha}")));
        }
        let check_len = |what: &str, v: &[f64]| -> Result<()> {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "{what} has {} entries, expected {n}",
                    v.len()
                )));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{what}[{i}] = {}", v[i])));
            }
            Ok(())
        };
        match &costs.running {
            RunningCost::Stationary(q) => check_len("q", q)?,
            RunningCost::TimeVarying(qs) => {
                let HorizonKind::FiniteHorizon { horizon } = kind else {
                    return Err(Error::InvalidProblem(
                        "time-varying costs are only supported for finite-horizon problems".into(),
                    ));
                };
                let needed = if costs.final_cost.is_some() {
                    horizon
                } else {
                    horizon + 1
                };
                if qs.len() != needed {
                    return Err(Error::InvalidProblem(format!(
                        "time-varying cost has {} stages, expected {needed}",
                        qs.len()
                    )));
                }
                for (t, q) in qs.iter().enumerate() {
                    check_len(&format!("q(., {t})"), q)?;
                }
            }
        }
        if let Some(f) = &costs.final_cost {
            check_len("q_final", f)?;
            if matches!(kind, HorizonKind::InfiniteHorizonAverage) {
                return Err(Error::InvalidProblem(
                    "infinite-horizon problems have no final cost".into(),
                ));
            }
        }
        if let HorizonKind::FirstExit { terminal_states } = &kind {
            if terminal_states.is_empty() {
                return Err(Error::InvalidProblem("terminal set is empty".into()));
            }
            let set: HashSet<_> = terminal_states.iter().collect();
            if set.len() != terminal_states.len() {
                return Err(Error::InvalidProblem("terminal states repeat".into()));
            }
            if let Some(t) = terminal_states.iter().find(|&&t| t >= n) {
                return Err(Error::InvalidProblem(format!("terminal state {t} out of range")));
            }
            if set.len() == n {
                return Err(Error::InvalidProblem(
                    "every state is terminal; the non-terminal set is empty".into(),
                ));
            }
        }
        Ok(Self {
            state_space,
            passive,
            costs,
            alpha,
            kind,
            grid: None,
        })
    }

    pub fn with_grid(mut self, grid: GridInfo) -> Result<Self> {
        if grid.n_points() != self.n_states() {
            return Err(Error::Dimension(format!(
                "grid has {} points for {} states",
                grid.n_points(),
                self.n_states()
            )));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    /// Same problem at a different risk parameter.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("alpha = {alpha}")));
        }
        let mut out = self.clone();
        out.alpha = alpha;
        Ok(out)
    }

    /// Same problem with a different cost model, checked like [`ProblemSpec::new`].
    pub fn with_costs(&self, costs: CostModel) -> Result<Self> {
        let out = Self::new(
            self.state_space.clone(),
            self.passive.clone(),
            costs,
            self.alpha,
            self.kind.clone(),
        )?;
        Ok(Self {
            grid: self.grid.clone(),
            ..out
        })
    }

    pub fn n_states(&self) -> usize {
        self.state_space.n_states()
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.state_space
    }

    pub fn passive(&self) -> &SparseRowStochasticMatrix {
        &self.passive
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kind(&self) -> &HorizonKind {
        &self.kind
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    /// Running cost at stage `t` (the stationary cost ignores `t`).
    pub fn running_cost(&self, t: usize) -> &[f64] {
        match &self.costs.running {
            RunningCost::Stationary(q) => q,
            RunningCost::TimeVarying(qs) => &qs[t],
        }
    }

    /// Boundary cost: `q(·, T)` for FH, the exit cost for FE (read on
    /// terminal states), the running cost otherwise.
    pub fn final_cost(&self) -> &[f64] {
        if let Some(f) = &self.costs.final_cost {
            return f;
        }
        match (&self.kind, &self.costs.running) {
            (HorizonKind::FiniteHorizon { horizon }, RunningCost::TimeVarying(qs)) => &qs[*horizon],
            (_, RunningCost::Stationary(q)) => q,
            (_, RunningCost::TimeVarying(qs)) => &qs[0],
        }
    }

    pub fn terminal_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_states()];
        if let HorizonKind::FirstExit { terminal_states } = &self.kind {
            for &t in terminal_states {
                mask[t] = true;
            }
        }
        mask
    }
}

/// A stationary control law `π(x′|x)` with the risk parameter it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub matrix: SparseRowStochasticMatrix,
    pub alpha: f64,
}

impl Policy {
    pub fn new(matrix: SparseRowStochasticMatrix, alpha: f64) -> Self {
        Self { matrix, alpha }
    }

    /// Checks `supp π(·|x) ⊆ supp π₀(·|x)` for every row.
    pub fn check_support(&self, passive: &SparseRowStochasticMatrix) -> Result<()> {
        if passive.n() != self.matrix.n() {
            return Err(Error::Dimension("policy and passive sizes differ".into()));
        }
        for x in 0..passive.n() {
            let (pc, _) = passive.row(x);
            for &c in self.matrix.row(x).0 {
                if pc.binary_search(&c).is_err() {
                    return Err(Error::support(
                        Some(c),
                        format!("policy row {x} moves to {c}, outside the passive support"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Output of [`validate`]. Never mutates or rejects the spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_states: usize,
    pub nnz: usize,
    pub kind: String,
    pub alpha: f64,
    /// Rows whose sum deviates from one by more than the row tolerance.
    pub row_sum_violations: Vec<(usize, f64)>,
    pub irreducible: bool,
    pub strong_components: usize,
    pub closed_classes: usize,
    /// FE only: non-terminal states with no path to the terminal set.
    pub unreachable_terminal: Vec<usize>,
    pub q_nonnegative: bool,
    /// FE only: whether `q ≥ 0` and `α ≤ 1`, the sufficient solvability condition.
    pub fe_solvability_condition: Option<bool>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    /// True when the problem meets the preconditions of its solver.
    pub fn is_solvable(&self) -> bool {
        self.row_sum_violations.is_empty()
            && self.unreachable_terminal.is_empty()
            && (self.kind != "ih" || self.closed_classes == 1)
    }
}

pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let p = spec.passive();
    let row_sum_violations: Vec<(usize, f64)> = (0..p.n())
        .filter_map(|r| {
            let s: f64 = p.row(r).1.iter().sum();
            ((s - 1.0).abs() > ROW_SUM_TOL).then_some((r, s))
        })
        .collect();
    let classes = p.class_structure();
    let q_nonnegative = spec.costs().is_nonnegative();
    let mut warnings = Vec::new();

    let (unreachable_terminal, fe_condition) = match spec.kind() {
        HorizonKind::FirstExit { terminal_states } => {
            let terminal = spec.terminal_mask();
            let bad: Vec<usize> = p
                .states_not_reaching(terminal_states)
                .into_iter()
                .filter(|&s| !terminal[s])
                .collect();
            let cond = q_nonnegative && spec.alpha() <= 1.0;
            if !cond {
                warnings.push(
                    "q >= 0 and alpha <= 1 does not hold; the first-exit solution may not exist"
                        .into(),
                );
            }
            (bad, Some(cond))
        }
        _ => (Vec::new(), None),
    };
    if matches!(spec.kind(), HorizonKind::InfiniteHorizonAverage) {
        if !classes.unichain() {
            warnings.push(format!(
                "{} closed classes: the principal eigenvector is not unique",
                classes.closed_classes.len()
            ));
        } else if !classes.irreducible() {
            warnings.push(format!(
                "passive chain is not irreducible ({} strong components, one closed class)",
                classes.n_components
            ));
        }
    }

    ValidationReport {
        n_states: spec.n_states(),
        nnz: p.nnz(),
        kind: spec.kind().short_name().into(),
        alpha: spec.alpha(),
        row_sum_violations,
        irreducible: classes.irreducible(),
        strong_components: classes.n_components,
        closed_classes: classes.closed_classes.len(),
        unreachable_terminal,
        q_nonnegative,
        fe_solvability_condition: fe_condition,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: &[(usize, usize, f64)]) -> SparseRowStochasticMatrix {
        SparseRowStochasticMatrix::from_triplets(2, p.iter().copied(), false).unwrap()
    }

    #[test]
    fn validate_irreducibility() {
        let uniform = two_state(&[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]);
        let spec = ProblemSpec::new(
            StateSpace::new(2, None).unwrap(),
            uniform,
            CostModel::stationary(vec![0.0, 1.0]),
            0.5,
            HorizonKind::InfiniteHorizonAverage,
        )
        .unwrap();
        let r = validate(&spec);
        assert!(r.irreducible);
        assert!(r.is_solvable());

        let spec = ProblemSpec::new(
            StateSpace::new(2, None).unwrap(),
            SparseRowStochasticMatrix::identity(2),
            CostModel::stationary(vec![0.0, 1.0]),
            0.5,
            HorizonKind::InfiniteHorizonAverage,
        )
        .unwrap();
        let r = validate(&spec);
        assert!(!r.irreducible);
        assert!(!r.is_solvable());
        assert_eq!(r, validate(&spec));
    }

    #[test]
    fn validate_reachability_lists_stuck_state() {
        // 0 -> 1 (terminal); 2 <-> 3 never leave
        let p = SparseRowStochasticMatrix::from_triplets(
            4,
            [(0, 1, 1.0), (1, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0)],
            false,
        )
        .unwrap();
        let spec = ProblemSpec::new(
            StateSpace::new(4, None).unwrap(),
            p,
            CostModel::stationary(vec![1.0; 4]),
            0.0,
            HorizonKind::FirstExit {
                terminal_states: vec![1],
            },
        )
        .unwrap();
        let r = validate(&spec);
        assert_eq!(r.unreachable_terminal, vec![2, 3]);
        assert_eq!(r.fe_solvability_condition, Some(true));
        assert!(!r.is_solvable());
    }

    #[test]
    fn fe_condition_flags_negative_costs() {
        let p = two_state(&[(0, 1, 1.0), (1, 1, 1.0)]);
        let spec = ProblemSpec::new(
            StateSpace::new(2, None).unwrap(),
            p,
            CostModel::stationary(vec![-1.0, 0.0]),
            0.5,
            HorizonKind::FirstExit {
                terminal_states: vec![1],
            },
        )
        .unwrap();
        let r = validate(&spec);
        assert!(!r.q_nonnegative);
        assert_eq!(r.fe_solvability_condition, Some(false));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn spec_construction_errors() {
        let p = two_state(&[(0, 1, 1.0), (1, 1, 1.0)]);
        let ss = StateSpace::new(2, None).unwrap();
        let fe = |t: Vec<usize>| HorizonKind::FirstExit { terminal_states: t };
        let q = CostModel::stationary(vec![0.0, 0.0]);
        assert!(ProblemSpec::new(ss.clone(), p.clone(), q.clone(), 0.0, fe(vec![])).is_err());
        assert!(ProblemSpec::new(ss.clone(), p.clone(), q.clone(), 0.0, fe(vec![0, 1])).is_err());
        assert!(ProblemSpec::new(ss.clone(), p.clone(), q.clone(), 0.0, fe(vec![5])).is_err());
        assert!(ProblemSpec::new(
            ss.clone(),
            p.clone(),
            CostModel::stationary(vec![0.0]),
            0.0,
            fe(vec![1])
        )
        .is_err());
        assert!(ProblemSpec::new(
            ss.clone(),
            p.clone(),
            CostModel {
                running: RunningCost::TimeVarying(vec![vec![0.0; 2]]),
                final_cost: None
            },
            0.0,
            HorizonKind::InfiniteHorizonAverage
        )
        .is_err());
        assert!(StateSpace::new(2, Some(vec!["a".into(), "a".into()])).is_err());
        assert!(StateSpace::new(0, None).is_err());
    }

    #[test]
    fn grid_index_round_trip() {
        let g = GridInfo {
            shape: vec![3, 4],
            low: vec![0.0, -1.0],
            high: vec![3.0, 1.0],
        };
        for flat in 0..12 {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
        }
        assert_eq!(g.flat_index(&[1, 2]), 6);
        assert_eq!(g.coordinates(0), vec![0.5, -0.75]);
    }

    #[test]
    fn policy_support_check() {
        let passive = two_state(&[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5)]);
        let bad = Policy::new(two_state(&[(0, 1, 1.0), (1, 1, 1.0)]), 0.0);
        assert!(bad.check_support(&passive).is_err());
        let ok = Policy::new(two_state(&[(0, 0, 1.0), (1, 1, 1.0)]), 0.0);
        assert!(ok.check_support(&passive).is_ok());
    }
}
