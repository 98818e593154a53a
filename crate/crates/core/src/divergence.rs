//! Rényi and KL divergences, the `Ψ` operator, and the closed-form
//! minimizer of `D_α(π₀‖π) + Ψ^α_π[f]`.
//!
//! The Rényi divergence here carries the `1/(α(α−1))` scaling, so it is
//! defined and nonnegative for every real `α`, with
//! `D₀(p‖q) = KL(q‖p)` and `D₁(p‖q) = KL(p‖q)` as its limits.
//!
//! All sums of exponentials are evaluated in the log domain. Near the
//! poles `α ∈ {0, 1}` the limit branches take over (see [`LIMIT_THRESHOLD`]).

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Below this distance from 0 (or 1) the KL limit branches are used.
pub const LIMIT_THRESHOLD: f64 = 1e-8;

/// Absolute tolerance on `Σ p = 1` for a [`Distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest exponent fed to `exp`/`expm1` before switching to the max-shifted
/// log-sum-exp form.
const EXP_SAFE: f64 = 700.0;

/// A probability vector over a finite outcome set.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty outcome set".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("probability {i} is {p}")));
            }
            if p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {i} is negative ({p})"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be nonnegative with a positive finite total".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// Softmax of log-weights; `-inf` entries become structural zeros.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::NonFinite("log-weight is NaN or +inf".into()));
        }
        let lse = log_sum_exp(log_weights);
        if !lse.is_finite() {
            return Err(Error::InvalidDistribution("all log-weights are -inf".into()));
        }
        let probs: Vec<f64> = log_weights.iter().map(|w| (w - lse).exp()).collect();
        // exp rounding can leave the total a few ulps from one
        let total: f64 = probs.iter().sum();
        Self::new(probs.into_iter().map(|p| p / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty outcome set".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Indices with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, _)| i)
    }
}

/// `log Σ exp(xᵢ)` with max-shift; returns `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_same_len(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!(
            "distributions have {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite(format!("alpha = {alpha}")));
    }
    Ok(())
}

/// `D_α(p‖q) = log(Σ p^α q^{1−α}) / (α(α−1))`, with KL limits at `α ∈ {0, 1}`.
///
/// Support conditions: `supp p ⊆ supp q` for `α ≥ 1`, `supp q ⊆ supp p` for
/// `α ≤ 0`, overlapping supports for `0 < α < 1`. Violations are errors.
pub fn renyi_divergence(p: &Distribution, q: &Distribution, alpha: f64) -> Result<f64> {
    check_same_len(p, q)?;
    check_alpha(alpha)?;
    if alpha.abs() < LIMIT_THRESHOLD {
        return kl_divergence(q, p);
    }
    if (alpha - 1.0).abs() < LIMIT_THRESHOLD {
        return kl_divergence(p, q);
    }
    renyi_slices(p.probs(), q.probs(), alpha)
}

/// [`renyi_divergence`] on raw aligned slices, limit branches included.
pub(crate) fn renyi_any(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    if alpha.abs() < LIMIT_THRESHOLD {
        kl_slices(q, p)
    } else if (alpha - 1.0).abs() < LIMIT_THRESHOLD {
        kl_slices(p, q)
    } else {
        renyi_slices(p, q, alpha)
    }
}

/// Rényi divergence on raw probability slices (away from the poles).
pub(crate) fn renyi_slices(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    let mut overlap = false;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if alpha > 1.0 && pi > 0.0 && qi == 0.0 {
            return Err(Error::support(
                Some(i),
                "p has mass where q has none (alpha >= 1 needs supp p within supp q)",
            ));
        }
        if alpha < 0.0 && qi > 0.0 && pi == 0.0 {
            return Err(Error::support(
                Some(i),
                "q has mass where p has none (alpha <= 0 needs supp q within supp p)",
            ));
        }
        overlap |= pi > 0.0 && qi > 0.0;
    }
    if !overlap {
        return Err(Error::support(None, "supports of p and q are disjoint"));
    }

    // S = Σ_{p,q>0} q (p/q)^α; outcomes outside the common support add nothing.
    let max_exp = p
        .iter()
        .zip(q)
        .filter(|(pi, qi)| **pi > 0.0 && **qi > 0.0)
        .map(|(pi, qi)| alpha * (pi / qi).ln())
        .fold(f64::NEG_INFINITY, f64::max);

    let log_s = if max_exp <= EXP_SAFE {
        // log1p(S − 1) stays exact as p → q.
        let mut s_minus_one = 0.0;
        for (&pi, &qi) in p.iter().zip(q) {
            if qi > 0.0 {
                if pi > 0.0 {
                    s_minus_one += qi * (alpha * (pi / qi).ln()).exp_m1();
                } else {
                    s_minus_one -= qi;
                }
            }
        }
        s_minus_one.ln_1p()
    } else {
        let terms: Vec<f64> = p
            .iter()
            .zip(q)
            .filter(|(pi, qi)| **pi > 0.0 && **qi > 0.0)
            .map(|(pi, qi)| alpha * pi.ln() + (1.0 - alpha) * qi.ln())
            .collect();
        log_sum_exp(&terms)
    };
    Ok(log_s / (alpha * (alpha - 1.0)))
}

/// `KL(p‖q) = Σ p log(p/q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same_len(p, q)?;
    kl_slices(p.probs(), q.probs())
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi == 0.0 {
                return Err(Error::support(
                    Some(i),
                    "p has mass where q has none (KL needs supp p within supp q)",
                ));
            }
            acc += pi * (pi / qi).ln();
        }
    }
    Ok(acc)
}

/// `Ψ^α_π[f] = α⁻¹ log E_π[exp(α f)]`, and `E_π[f]` for `|α| < LIMIT_THRESHOLD`.
pub fn psi(pi: &Distribution, f: &[f64], alpha: f64) -> Result<f64> {
    if f.len() != pi.len() {
        return Err(Error::Dimension(format!(
            "f has {} entries, distribution has {}",
            f.len(),
            pi.len()
        )));
    }
    check_alpha(alpha)?;
    let mut weights = Vec::new();
    let mut values = Vec::new();
    for i in pi.support() {
        if !f[i].is_finite() {
            return Err(Error::NonFinite(format!("f[{i}] = {} on the support", f[i])));
        }
        weights.push(pi.probs()[i]);
        values.push(f[i]);
    }
    Ok(psi_weighted(&weights, &values, alpha))
}

/// `Ψ` over aligned (probability, value) pairs. Weights are assumed positive
/// and normalized, values finite.
pub(crate) fn psi_weighted(weights: &[f64], values: &[f64], alpha: f64) -> f64 {
    let mean: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    if alpha.abs() < LIMIT_THRESHOLD {
        return mean;
    }
    let max_exp = values
        .iter()
        .map(|v| alpha * (v - mean))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_exp <= EXP_SAFE {
        let s: f64 = weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * (alpha * (v - mean)).exp_m1())
            .sum();
        mean + s.ln_1p() / alpha
    } else {
        let m = values
            .iter()
            .map(|v| alpha * v)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * (alpha * v - m).exp())
            .sum();
        (m + s.ln()) / alpha
    }
}

/// Minimizer and minimum of `π ↦ D_α(π₀‖π) + Ψ^α_π[f]`.
///
/// The minimizer `π*(x) ∝ π₀(x) exp(−f(x))` does not depend on `α`; the
/// minimum is `Ψ^{α−1}_{π₀}[f]`.
pub fn variational_minimizer(
    pi0: &Distribution,
    f: &[f64],
    alpha: f64,
) -> Result<(Distribution, f64)> {
    let value = psi(pi0, f, alpha - 1.0)?;
    let log_w: Vec<f64> = pi0
        .probs()
        .iter()
        .zip(f)
        .map(|(&p, &fx)| if p > 0.0 { p.ln() - fx } else { f64::NEG_INFINITY })
        .collect();
    Ok((Distribution::from_log_weights(&log_w)?, value))
}

/// Mean and covariance of a multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!(
                "mean has {d} entries but covariance is not {d}x{d}"
            )));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        if cov.iter().chain(mean.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidProblem(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if cov.clone().cholesky().is_none() {
            return Err(Error::DegenerateCovariance(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance: cov,
        })
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mean], vec![vec![variance]])
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// Rényi divergence between two Gaussians sharing a covariance `C`:
/// `(μ₁−μ₂)ᵀ C⁻¹ (μ₁−μ₂) / 2`, the same for every `α`.
pub fn gaussian_renyi(g1: &GaussianParams, g2: &GaussianParams, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if g1.mean.len() != g2.mean.len() {
        return Err(Error::Dimension("gaussians have different dimensions".into()));
    }
    let max_diff = (&g1.covariance - &g2.covariance).abs().max();
    if max_diff > 1e-12 {
        return Err(Error::CovarianceMismatch(format!(
            "covariances differ by up to {max_diff:e}"
        )));
    }
    let delta = &g1.mean - &g2.mean;
    let chol = g1
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateCovariance("covariance is not positive definite".into()))?;
    let solved = chol.solve(&delta);
    Ok(delta.dot(&solved) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn renyi_identical_is_zero() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(renyi_divergence(&p, &p, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn renyi_alpha_two_hand_value() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        let expected = 0.5 * (0.25f64 / 0.25 + 0.25 / 0.75).ln();
        assert_abs_diff_eq!(renyi_divergence(&p, &q, 2.0).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.5 * (4.0f64 / 3.0).ln(), epsilon = 1e-15);
    }

    #[test]
    fn renyi_near_zero_is_reverse_kl() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        let kl_qp = 0.25 * (0.25f64 / 0.5).ln() + 0.75 * (0.75f64 / 0.5).ln();
        assert_abs_diff_eq!(renyi_divergence(&p, &q, 1e-12).unwrap(), kl_qp, epsilon = 1e-6);
    }

    #[test]
    fn renyi_support_errors_name_outcome() {
        let p = d(&[0.5, 0.5, 0.0]);
        let q = d(&[0.5, 0.0, 0.5]);
        match renyi_divergence(&p, &q, 2.0) {
            Err(Error::Support { outcome: Some(1), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match renyi_divergence(&p, &q, -1.0) {
            Err(Error::Support { outcome: Some(2), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // partial overlap is fine strictly between 0 and 1
        assert!(renyi_divergence(&p, &q, 0.5).unwrap() > 0.0);
        let disjoint = d(&[0.0, 0.0, 1.0]);
        let other = d(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            renyi_divergence(&disjoint, &other, 0.5),
            Err(Error::Support { outcome: None, .. })
        ));
    }

    #[test]
    fn renyi_rejects_non_finite_alpha() {
        let p = d(&[0.5, 0.5]);
        assert!(matches!(
            renyi_divergence(&p, &p, f64::NAN),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let atom = d(&[1.0, 0.0]);
        let half = d(&[0.5, 0.5]);
        assert_abs_diff_eq!(kl_divergence(&atom, &half).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(kl_divergence(&half, &atom).is_err());
    }

    #[test]
    fn kl_matches_renyi_at_one() {
        let p = d(&[0.1, 0.6, 0.3]);
        let q = d(&[0.4, 0.4, 0.2]);
        assert_eq!(
            kl_divergence(&p, &q).unwrap(),
            renyi_divergence(&p, &q, 1.0).unwrap()
        );
    }

    #[test]
    fn psi_examples() {
        let pi = d(&[0.5, 0.5]);
        assert_abs_diff_eq!(psi(&pi, &[0.0, 1.0], 0.0).unwrap(), 0.5, epsilon = 1e-15);
        let expected = ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert_abs_diff_eq!(psi(&pi, &[0.0, 1.0], 1.0).unwrap(), expected, epsilon = 1e-15);
        let pi3 = d(&[0.2, 0.3, 0.5]);
        for alpha in [-5.0, -0.3, 0.0, 0.7, 4.0] {
            assert_abs_diff_eq!(psi(&pi3, &[2.5; 3], alpha).unwrap(), 2.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn psi_large_alpha_does_not_overflow() {
        let pi = d(&[0.5, 0.5]);
        let v = psi(&pi, &[0.0, 1000.0], 50.0).unwrap();
        assert_abs_diff_eq!(v, 1000.0 + 0.5f64.ln() / 50.0, epsilon = 1e-10);
        let v = psi(&pi, &[0.0, 1000.0], -50.0).unwrap();
        assert_abs_diff_eq!(v, 0.5f64.ln() / -50.0, epsilon = 1e-10);
    }

    #[test]
    fn psi_ignores_values_off_support() {
        let pi = d(&[1.0, 0.0]);
        assert_eq!(psi(&pi, &[3.0, f64::INFINITY], 0.4).unwrap(), 3.0);
        let full = d(&[0.5, 0.5]);
        assert!(psi(&full, &[3.0, f64::INFINITY], 0.4).is_err());
    }

    #[test]
    fn minimizer_examples() {
        let pi0 = d(&[0.5, 0.5]);
        let (pi, _) = variational_minimizer(&pi0, &[0.0, 3f64.ln()], 0.7).unwrap();
        assert_abs_diff_eq!(pi.probs()[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(pi.probs()[1], 0.25, epsilon = 1e-15);

        let pi0 = d(&[0.2, 0.3, 0.5]);
        let (pi, value) = variational_minimizer(&pi0, &[1.5; 3], -2.0).unwrap();
        for (a, b) in pi.probs().iter().zip(pi0.probs()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(value, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn minimizer_achieves_its_value() {
        let pi0 = d(&[0.2, 0.3, 0.5]);
        let f = [0.3, -1.2, 2.0];
        for alpha in [-1.0, -0.5, 0.3, 0.5, 2.0] {
            let (pi, value) = variational_minimizer(&pi0, &f, alpha).unwrap();
            let achieved = renyi_divergence(&pi0, &pi, alpha).unwrap() + psi(&pi, &f, alpha).unwrap();
            assert_abs_diff_eq!(achieved, value, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_closed_form() {
        let a = GaussianParams::scalar(1.0, 1.0).unwrap();
        let b = GaussianParams::scalar(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(gaussian_renyi(&a, &b, 0.3).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(gaussian_renyi(&a, &a, 2.0).unwrap(), 0.0);

        let c = GaussianParams::scalar(0.0, 2.0).unwrap();
        assert!(matches!(
            gaussian_renyi(&a, &c, 0.5),
            Err(Error::CovarianceMismatch(_))
        ));
    }

    #[test]
    fn gaussian_two_dimensional() {
        let cov = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let a = GaussianParams::new(vec![1.0, -1.0], cov.clone()).unwrap();
        let b = GaussianParams::new(vec![0.0, 0.0], cov).unwrap();
        // C⁻¹ = [[1, -0.5], [-0.5, 2]] / 1.75
        let expected = (1.0 + 1.0 + 2.0) / 1.75 / 2.0;
        assert_abs_diff_eq!(gaussian_renyi(&a, &b, 1.7).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_rejects_bad_covariance() {
        assert!(GaussianParams::new(vec![0.0, 0.0], vec![vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(GaussianParams::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        let w = Distribution::from_weights(vec![1.0, 3.0]).unwrap();
        assert_eq!(w.probs(), &[0.25, 0.75]);
        let l = Distribution::from_log_weights(&[f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(l.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_abs_diff_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln(), epsilon = 1e-12);
    }
}
