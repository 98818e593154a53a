//! Row-compressed row-stochastic matrices and the graph queries the solvers
//! need (strong components, closed classes, reachability).

use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::divergence::Distribution;
use crate::{Error, Result};

/// Tolerance on every row sum.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// An `n × n` row-stochastic matrix in CSR form. Only strictly positive
/// entries are stored; column indices are sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowStochasticMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRowStochasticMatrix {
    /// Builds from `(row, col, prob)` triplets.
    ///
    /// Zero entries are dropped. Duplicates, negative or non-finite entries,
    /// empty rows and rows that do not sum to one are rejected, unless
    /// `renormalize` is set, in which case row sums are rescaled.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        renormalize: bool,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, p) in triplets {
            if r >= n || c >= n {
                return Err(Error::InvalidProblem(format!(
                    "entry ({r}, {c}) is outside a {n}-state matrix"
                )));
            }
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("entry ({r}, {c}) is {p}")));
            }
            if p < 0.0 {
                return Err(Error::InvalidProblem(format!(
                    "entry ({r}, {c}) is negative ({p})"
                )));
            }
            if p > 0.0 {
                rows[r].push((c, p));
            }
        }
        Self::from_rows(rows, renormalize)
    }

    /// Builds from per-row `(col, prob)` lists.
    pub fn from_rows(mut rows: Vec<Vec<(usize, f64)>>, renormalize: bool) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidProblem("matrix has no states".into()));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (r, row) in rows.iter_mut().enumerate() {
            row.retain(|&(_, p)| p > 0.0);
            row.sort_by_key(|&(c, _)| c);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidProblem(format!(
                    "duplicate entry ({r}, {})",
                    w[0].0
                )));
            }
            if let Some(&(c, p)) = row.iter().find(|(c, p)| *c >= n || !p.is_finite()) {
                return Err(Error::InvalidProblem(format!("bad entry ({r}, {c}) = {p}")));
            }
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if row.is_empty() {
                return Err(Error::RowSum { row: r, sum: 0.0 });
            }
            let scale = if (sum - 1.0).abs() > ROW_SUM_TOL {
                if !renormalize {
                    return Err(Error::RowSum { row: r, sum });
                }
                1.0 / sum
            } else {
                1.0
            };
            for &(c, p) in row.iter() {
                cols.push(c);
                vals.push(p * scale);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and probabilities of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Row `i` as a dense distribution over all states.
    pub fn row_distribution(&self, i: usize) -> Distribution {
        let mut dense = vec![0.0; self.n];
        let (cols, vals) = self.row(i);
        for (&c, &p) in cols.iter().zip(vals) {
            dense[c] = p;
        }
        Distribution::new(dense).expect("rows are validated at construction")
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &p)| (r, c, p))
        })
    }

    /// Largest `|Σ_j P(i, j) − 1|` over rows.
    pub fn max_row_sum_deviation(&self) -> f64 {
        (0..self.n)
            .map(|r| (self.row(r).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `y = P x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &p)| p * x[c]).sum();
        }
    }

    /// `y = Pᵀ x` (propagates a row vector of mass one step forward).
    pub fn mul_vec_transposed(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &p) in cols.iter().zip(vals) {
                y[c] += p * xr;
            }
        }
    }

    /// Keeps the sparsity pattern and reweights each row by `exp(log_w[col])`,
    /// renormalizing in the log domain.
    pub fn reweighted_by_log(&self, log_w: &[f64]) -> Result<Self> {
        let mut vals = Vec::with_capacity(self.vals.len());
        let mut scratch = Vec::new();
        for r in 0..self.n {
            let (cols, probs) = self.row(r);
            scratch.clear();
            scratch.extend(cols.iter().zip(probs).map(|(&c, &p)| p.ln() + log_w[c]));
            let lse = crate::divergence::log_sum_exp(&scratch);
            if !lse.is_finite() {
                return Err(Error::Numerical(format!(
                    "row {r} cannot be renormalized (log-normalizer {lse})"
                )));
            }
            let start = vals.len();
            vals.extend(scratch.iter().map(|l| (l - lse).exp()));
            let total: f64 = vals[start..].iter().sum();
            vals[start..].iter_mut().for_each(|v| *v /= total);
        }
        let mut out = Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals,
        };
        out.drop_underflow();
        Ok(out)
    }

    // exp can underflow to exact zero in extreme reweightings; keep the
    // "stored entries are positive" invariant.
    fn drop_underflow(&mut self) {
        if self.vals.iter().all(|v| *v > 0.0) {
            return;
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.n {
            let (c, v) = self.row(r);
            for (&cc, &vv) in c.iter().zip(v) {
                if vv > 0.0 {
                    cols.push(cc);
                    vals.push(vv);
                }
            }
            row_ptr.push(cols.len());
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    /// Lower and upper bandwidth of the sparsity pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for (r, c, _) in self.triplets() {
            if c < r {
                lower = lower.max(r - c);
            } else {
                upper = upper.max(c - r);
            }
        }
        (lower, upper)
    }

    /// Strongly connected components of the sparsity graph.
    pub fn strong_components(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.n, self.nnz());
        let nodes: Vec<_> = (0..self.n).map(|_| g.add_node(())).collect();
        for (r, c, _) in self.triplets() {
            g.add_edge(nodes[r], nodes[c], ());
        }
        tarjan_scc(&g)
            .into_iter()
            .map(|comp| {
                let mut v: Vec<usize> = comp.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    /// Summary of the communicating-class structure.
    pub fn class_structure(&self) -> ClassStructure {
        let comps = self.strong_components();
        let mut comp_of = vec![0; self.n];
        for (k, comp) in comps.iter().enumerate() {
            for &s in comp {
                comp_of[s] = k;
            }
        }
        let mut closed = vec![true; comps.len()];
        for (r, c, _) in self.triplets() {
            if comp_of[r] != comp_of[c] {
                closed[comp_of[r]] = false;
            }
        }
        let closed_classes: Vec<Vec<usize>> = comps
            .iter()
            .zip(&closed)
            .filter(|(_, c)| **c)
            .map(|(comp, _)| comp.clone())
            .collect();
        ClassStructure {
            n_components: comps.len(),
            closed_classes,
        }
    }

    /// States from which no path reaches `targets`.
    pub fn states_not_reaching(&self, targets: &[usize]) -> Vec<usize> {
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (r, c, _) in self.triplets() {
            incoming[c].push(r);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        for &t in targets {
            if t < self.n && !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &p in &incoming[s] {
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(p);
                }
            }
        }
        (0..self.n).filter(|&s| !seen[s]).collect()
    }
}

/// Communicating classes of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStructure {
    pub n_components: usize,
    pub closed_classes: Vec<Vec<usize>>,
}

impl ClassStructure {
    pub fn irreducible(&self) -> bool {
        self.n_components == 1
    }

    /// Exactly one closed class: unique stationary law and Perron vector.
    pub fn unichain(&self) -> bool {
        self.closed_classes.len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rows() {
        let err = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.5), (0, 1, 0.4), (1, 1, 1.0)],
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RowSum { row: 0, .. }), "{err}");
        assert!(SparseRowStochasticMatrix::from_triplets(2, [(0, 0, 1.0)], false).is_err());
        assert!(SparseRowStochasticMatrix::from_triplets(
            1,
            [(0, 0, 0.5), (0, 0, 0.5)],
            false
        )
        .is_err());
        assert!(SparseRowStochasticMatrix::from_triplets(1, [(0, 0, -1.0)], false).is_err());
    }

    #[test]
    fn renormalize_opt_in() {
        let m = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.45), (0, 1, 0.45), (1, 0, 2.0)],
            true,
        )
        .unwrap();
        assert_eq!(m.get(0, 0), 0.5);
        assert_eq!(m.get(1, 0), 1.0);
        assert!(m.max_row_sum_deviation() < 1e-15);
    }

    #[test]
    fn drops_explicit_zeros() {
        let m = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 1.0), (0, 1, 0.0), (1, 1, 1.0)],
            false,
        )
        .unwrap();
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn irreducibility_examples() {
        let full = SparseRowStochasticMatrix::from_triplets(
            2,
            [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)],
            false,
        )
        .unwrap();
        assert!(full.class_structure().irreducible());
        let id = SparseRowStochasticMatrix::identity(2);
        let cs = id.class_structure();
        assert!(!cs.irreducible());
        assert_eq!(cs.closed_classes.len(), 2);
    }

    #[test]
    fn transient_state_is_unichain() {
        // 0 -> 1 <-> 2, nothing enters 0
        let m = SparseRowStochasticMatrix::from_triplets(
            3,
            [(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
            false,
        )
        .unwrap();
        let cs = m.class_structure();
        assert!(!cs.irreducible());
        assert!(cs.unichain());
        assert_eq!(cs.closed_classes[0], vec![1, 2]);
    }

    #[test]
    fn reachability() {
        // 0 -> 1 -> 2 (terminal); 3 loops on itself
        let m = SparseRowStochasticMatrix::from_triplets(
            4,
            [(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0), (3, 3, 1.0)],
            false,
        )
        .unwrap();
        assert_eq!(m.states_not_reaching(&[2]), vec![3]);
    }

    #[test]
    fn transposed_product_conserves_mass() {
        let m = SparseRowStochasticMatrix::from_triplets(
            3,
            [(0, 1, 0.3), (0, 2, 0.7), (1, 0, 1.0), (2, 2, 0.4), (2, 0, 0.6)],
            false,
        )
        .unwrap();
        let x = [0.2, 0.5, 0.3];
        let mut y = [0.0; 3];
        m.mul_vec_transposed(&x, &mut y);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(m.bandwidth(), (2, 2));
    }
}
