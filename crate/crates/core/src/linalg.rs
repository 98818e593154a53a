//! Eigen-solvers behind the average-cost solver and stationary distributions.
//!
//! Both problems are "find the dominant eigenvector of a nonnegative sparse
//! matrix". Plain power iteration is tried first. If it has not converged
//! within a budget, iteration switches to the resolvent `(σI − M)⁻¹` with
//! `σ` above the spectral radius: `σI − M` is then a nonsingular M-matrix,
//! so it factors stably by banded LU without pivoting and its inverse is
//! nonnegative with the same Perron vector, while the subdominant part is
//! damped by `(σ−ρ)/(σ−λ₂)` per step.

use crate::divergence::log_sum_exp;
use crate::sparse::SparseRowStochasticMatrix;
use crate::{Error, Result};

/// Largest band storage (entries) the resolvent path will allocate.
pub const MAX_BAND_ENTRIES: usize = 40_000_000;

/// A square band matrix stored row-major, `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Result<Self> {
        let width = kl + ku + 1;
        let entries = n.saturating_mul(width);
        if entries > MAX_BAND_ENTRIES {
            return Err(Error::ResourceCap(format!(
                "band storage of {entries} entries exceeds {MAX_BAND_ENTRIES}"
            )));
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; entries],
        })
    }

    /// `σI − M` for `M` given by triplets lying inside the band.
    pub fn shifted_identity_minus(
        n: usize,
        kl: usize,
        ku: usize,
        sigma: f64,
        entries: impl Iterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut b = Self::zeros(n, kl, ku)?;
        for i in 0..n {
            *b.at_mut(i, i) = sigma;
        }
        for (i, j, v) in entries {
            *b.at_mut(i, j) -= v;
        }
        Ok(b)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    /// LU factorization without pivoting. Fails on a non-positive pivot,
    /// which for an M-matrix means `σ` was not above the spectral radius.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::Numerical(format!("non-positive pivot {pivot:e} at row {k}")));
            }
            let last_col = (k + ku).min(n - 1);
            let seg = last_col - k;
            let (head, tail) = self.data.split_at_mut((k + 1) * w);
            let urow = &head[k * w + kl + 1..k * w + kl + 1 + seg];
            for i in k + 1..=(k + kl).min(n - 1) {
                let base = (i - k - 1) * w;
                let lk = base + (k + kl - i);
                let l = tail[lk] / pivot;
                tail[lk] = l;
                if l != 0.0 {
                    let start = lk + 1;
                    for (a, &u) in tail[start..start + seg].iter_mut().zip(urow) {
                        *a -= l * u;
                    }
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let BandedMatrix {
            n,
            kl,
            ku,
            width: w,
            ref data,
        } = self.m;
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let row = &data[i * w..];
            let mut s = b[i];
            for j in lo..i {
                s -= row[j + kl - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + ku).min(n - 1);
            let row = &data[i * w..];
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= row[j + kl - i] * b[j];
            }
            b[i] = s / row[kl];
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Target for `log(max(Mz/z) / min(Mz/z))`.
    pub tol: f64,
    pub max_iter: usize,
    /// Plain iterations before switching to the resolvent.
    pub plain_budget: usize,
    pub accelerate: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 100_000,
            plain_budget: 1000,
            accelerate: true,
        }
    }
}

/// Perron eigenpair of `M = diag(exp(log_q)) · P`.
#[derive(Debug, Clone)]
pub struct PerronPair {
    /// Log of the eigenvector, normalized so its maximum is zero.
    pub log_z: Vec<f64>,
    pub log_rho: f64,
    /// Total matrix-vector products and resolvent solves.
    pub iterations: usize,
    /// Final `log(max ratio / min ratio)` bracket width.
    pub gap: f64,
    pub factorizations: usize,
    pub log_domain: bool,
}

// Log-range above which z is carried in the log domain.
const LINEAR_RANGE_LIMIT: f64 = 600.0;
const UNDERFLOW_FLOOR: f64 = 1e-280;
const MAX_FACTORIZATIONS: usize = 6;

pub fn perron_eigenpair(
    p: &SparseRowStochasticMatrix,
    log_q: &[f64],
    opts: &EigenOptions,
) -> Result<PerronPair> {
    let n = p.n();
    let shift = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = log_q.iter().copied().fold(f64::INFINITY, f64::min);
    let scaled: Vec<f64> = log_q.iter().map(|l| l - shift).collect();
    let mut out = if shift - min > LINEAR_RANGE_LIMIT {
        perron_log_domain(p, &scaled, vec![0.0; n], 0, opts)?
    } else {
        perron_linear(p, &scaled, opts)?
    };
    out.log_rho += shift;
    Ok(out)
}

struct Bracket {
    lower: f64,
    upper: f64,
}

impl Bracket {
    fn log_gap(&self) -> f64 {
        (self.upper / self.lower).ln()
    }
}

// y = diag(qd) P z and the Collatz–Wielandt bounds min/max y_i / z_i.
fn apply(p: &SparseRowStochasticMatrix, qd: &[f64], z: &[f64], y: &mut [f64]) -> Bracket {
    p.mul_vec(z, y);
    let mut lower = f64::INFINITY;
    let mut upper = 0.0f64;
    for i in 0..z.len() {
        y[i] *= qd[i];
        let r = y[i] / z[i];
        lower = lower.min(r);
        upper = upper.max(r);
    }
    Bracket { lower, upper }
}

fn normalize_max(y: &mut [f64]) -> f64 {
    let m = y.iter().copied().fold(0.0, f64::max);
    y.iter_mut().for_each(|v| *v /= m);
    m
}

fn perron_linear(
    p: &SparseRowStochasticMatrix,
    scaled_log_q: &[f64],
    opts: &EigenOptions,
) -> Result<PerronPair> {
    let n = p.n();
    let qd: Vec<f64> = scaled_log_q.iter().map(|l| l.exp()).collect();
    let mut z = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut iterations = 0;
    let mut bracket = Bracket {
        lower: 0.0,
        upper: f64::INFINITY,
    };

    let finish = |z: Vec<f64>, b: &Bracket, iterations, factorizations| {
        let log_z: Vec<f64> = z.iter().map(|v| v.ln()).collect();
        PerronPair {
            log_z,
            log_rho: (b.upper * b.lower).sqrt().ln(),
            iterations,
            gap: b.log_gap(),
            factorizations,
            log_domain: false,
        }
    };

    // Damping for periodic chains when no resolvent is available.
    let mut damping = 0.0;
    let plain_limit = if opts.accelerate {
        opts.plain_budget.min(opts.max_iter)
    } else {
        opts.max_iter
    };
    while iterations < opts.max_iter {
        bracket = apply(p, &qd, &z, &mut y);
        iterations += 1;
        if bracket.log_gap() <= opts.tol {
            return Ok(finish(z, &bracket, iterations, 0));
        }
        if damping > 0.0 {
            for (yi, zi) in y.iter_mut().zip(&z) {
                *yi += damping * zi;
            }
        }
        normalize_max(&mut y);
        std::mem::swap(&mut z, &mut y);
        if z.iter().any(|&v| v < UNDERFLOW_FLOOR) {
            let log_z: Vec<f64> = z.iter().map(|v| v.ln()).collect();
            return perron_log_domain(p, scaled_log_q, log_z, iterations, opts);
        }
        if iterations == plain_limit && plain_limit < opts.max_iter {
            match resolvent_phase(p, &qd, &mut z, &mut iterations, opts) {
                Ok((b, f)) => return Ok(finish(z, &b, iterations, f)),
                Err(Error::ResourceCap(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if iterations == opts.plain_budget && damping == 0.0 {
            // periodic chains never settle without a shift
            damping = 0.5 * bracket.upper;
        }
    }
    Err(Error::NotConverged {
        iterations,
        residual: bracket.log_gap(),
    })
}

fn resolvent_phase(
    p: &SparseRowStochasticMatrix,
    qd: &[f64],
    z: &mut Vec<f64>,
    iterations: &mut usize,
    opts: &EigenOptions,
) -> Result<(Bracket, usize)> {
    let n = p.n();
    let (kl, ku) = p.bandwidth();
    if n.saturating_mul(kl + ku + 1) > MAX_BAND_ENTRIES {
        return Err(Error::ResourceCap("matrix bandwidth too large for the resolvent".into()));
    }
    let mut y = vec![0.0; n];
    let mut bracket = apply(p, qd, z, &mut y);
    let mut factorizations = 0;
    let mut rel_shift = 1e-9;
    while factorizations < MAX_FACTORIZATIONS && *iterations < opts.max_iter {
        let margin = (bracket.upper - bracket.lower).max(rel_shift * bracket.upper);
        let sigma = bracket.upper + margin;
        let lu = BandedMatrix::shifted_identity_minus(
            n,
            kl,
            ku,
            sigma,
            p.triplets().map(|(i, j, v)| (i, j, qd[i] * v)),
        )?
        .factor();
        factorizations += 1;
        let lu = match lu {
            Ok(lu) => lu,
            Err(Error::Numerical(_)) => {
                rel_shift *= 100.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        let sigma_gap = sigma - bracket.lower;
        for _ in 0..500 {
            y.copy_from_slice(z);
            lu.solve_in_place(&mut y);
            *iterations += 1;
            if y.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                // rounding broke positivity; a wider shift is safer
                rel_shift *= 100.0;
                break;
            }
            normalize_max(&mut y);
            std::mem::swap(z, &mut y);
            let prev = bracket.log_gap();
            bracket = apply(p, qd, z, &mut y);
            if bracket.log_gap() <= opts.tol {
                return Ok((bracket, factorizations));
            }
            if *iterations >= opts.max_iter {
                break;
            }
            // refactor once the eigenvalue bracket is well inside the shift
            if bracket.upper - bracket.lower < 0.05 * sigma_gap
                && factorizations < MAX_FACTORIZATIONS
            {
                break;
            }
            if bracket.log_gap() >= prev {
                // stagnation at rounding level
                if bracket.log_gap() <= 1e3 * opts.tol.max(f64::EPSILON) {
                    return Ok((bracket, factorizations));
                }
            }
        }
    }
    Err(Error::NotConverged {
        iterations: *iterations,
        residual: bracket.log_gap(),
    })
}

// Plain power iteration in log space; slow but immune to under/overflow.
fn perron_log_domain(
    p: &SparseRowStochasticMatrix,
    scaled_log_q: &[f64],
    mut log_z: Vec<f64>,
    mut iterations: usize,
    opts: &EigenOptions,
) -> Result<PerronPair> {
    let n = p.n();
    let mut next = vec![0.0; n];
    let mut scratch = Vec::new();
    let mut gap = f64::INFINITY;
    let mut log_ratio_mid = 0.0;
    while iterations < opts.max_iter {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let (cols, vals) = p.row(i);
            scratch.clear();
            scratch.extend(cols.iter().zip(vals).map(|(&c, &v)| v.ln() + log_z[c]));
            next[i] = scaled_log_q[i] + log_sum_exp(&scratch);
            let r = next[i] - log_z[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        iterations += 1;
        gap = hi - lo;
        log_ratio_mid = 0.5 * (hi + lo);
        if gap <= opts.tol {
            return Ok(PerronPair {
                log_z,
                log_rho: log_ratio_mid,
                iterations,
                gap,
                factorizations: 0,
                log_domain: true,
            });
        }
        let m = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (z, v) in log_z.iter_mut().zip(&next) {
            *z = v - m;
        }
    }
    let _ = log_ratio_mid;
    Err(Error::NotConverged {
        iterations,
        residual: gap,
    })
}

#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub mu: Vec<f64>,
    /// `‖μᵀP − μᵀ‖₁`.
    pub residual: f64,
    pub iterations: usize,
    pub accelerated: bool,
}

/// Left Perron vector of a unichain stochastic matrix: lazy power iteration
/// `μ ← ½μ + ½Pᵀμ`, then the resolvent of `Pᵀ` if the budget runs out.
pub fn stationary_vector(
    p: &SparseRowStochasticMatrix,
    tol: f64,
    max_iter: usize,
    plain_budget: usize,
) -> Result<StationaryResult> {
    let n = p.n();
    let mut mu = vec![1.0 / n as f64; n];
    let mut pt = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    while iterations < max_iter {
        p.mul_vec_transposed(&mu, &mut pt);
        residual = l1(&pt, &mu);
        if residual <= tol {
            return Ok(StationaryResult {
                mu,
                residual,
                iterations,
                accelerated: false,
            });
        }
        for (m, t) in mu.iter_mut().zip(&pt) {
            *m = 0.5 * *m + 0.5 * t;
        }
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= s);
        iterations += 1;
        if iterations == plain_budget {
            match stationary_resolvent(p, &mut mu, &mut iterations, tol, max_iter) {
                Ok(r) => {
                    return Ok(StationaryResult {
                        mu,
                        residual: r,
                        iterations,
                        accelerated: true,
                    })
                }
                Err(Error::ResourceCap(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NotConverged {
        iterations,
        residual,
    })
}

fn stationary_resolvent(
    p: &SparseRowStochasticMatrix,
    mu: &mut Vec<f64>,
    iterations: &mut usize,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let n = p.n();
    let (kl, ku) = p.bandwidth();
    let mut shift = 1e-8;
    let mut pt = vec![0.0; n];
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        // transpose swaps the band sides
        let lu = match BandedMatrix::shifted_identity_minus(
            n,
            ku,
            kl,
            1.0 + shift,
            p.triplets().map(|(i, j, v)| (j, i, v)),
        )?
        .factor()
        {
            Ok(lu) => lu,
            Err(Error::Numerical(_)) => {
                shift *= 100.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        for _ in 0..200 {
            let mut y = mu.clone();
            lu.solve_in_place(&mut y);
            *iterations += 1;
            if y.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                // clip rounding noise on states with no stationary mass
                y.iter_mut().for_each(|v| {
                    if !v.is_finite() {
                        *v = 0.0
                    } else {
                        *v = v.max(0.0)
                    }
                });
            }
            let s: f64 = y.iter().sum();
            if !(s > 0.0) {
                break;
            }
            y.iter_mut().for_each(|v| *v /= s);
            *mu = y;
            p.mul_vec_transposed(mu, &mut pt);
            let r: f64 = pt.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).sum();
            if r <= tol {
                return Ok(r);
            }
            if r >= best && r < 1e3 * tol {
                return Ok(r);
            }
            best = best.min(r);
            if *iterations >= max_iter {
                return Err(Error::NotConverged {
                    iterations: *iterations,
                    residual: r,
                });
            }
        }
        shift *= 100.0;
    }
    Err(Error::NotConverged {
        iterations: *iterations,
        residual: best,
    })
}
