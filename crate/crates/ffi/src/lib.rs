//! C ABI over the `rslc` solver.
//!
//! Problems and solutions are opaque heap handles released with their `_free`
//! functions. Every entry point returns an [`RslcStatus`]; on failure the
//! message is available from [`rslc_last_error`] on the same thread. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rslc::analysis::stationary_distribution;
use rslc::discretizer::{build_hill_car_with, HillCarConfig, TerrainModel};
use rslc::divergence::{renyi_divergence, Distribution};
use rslc::solver::{extract_policy, solve};
use rslc::specfile::load_spec;
use rslc::{
    CostModel, Error, HorizonKind, Policy, ProblemSpec, SolveReport, SolverOptions,
    SparseRowStochasticMatrix, StateSpace, ValueFunction,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RslcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RslcKind {
    FiniteHorizon = 0,
    FirstExit = 1,
    AverageCost = 2,
}

/// A problem: passive dynamics, costs, horizon kind and risk parameter.
pub struct RslcProblem {
    spec: ProblemSpec,
}

/// The result of one solve.
pub struct RslcSolution {
    spec: ProblemSpec,
    values: ValueFunction,
    report: SolveReport,
    policy: Option<Policy>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn from_error(e: Error) -> RslcStatus {
    let status = if e.is_numerical() {
        RslcStatus::NumericalFailure
    } else {
        RslcStatus::InvalidInput
    };
    set_error(e.to_string());
    status
}

fn guard(f: impl FnOnce() -> Result<(), RslcStatus>) -> RslcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RslcStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            RslcStatus::Panic
        }
    }
}

fn null(what: &str) -> RslcStatus {
    set_error(format!("{what} is null"));
    RslcStatus::NullPointer
}

unsafe fn ref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, RslcStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_const<'a, T>(p: *const T, what: &str) -> Result<&'a T, RslcStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], RslcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], RslcStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn copy_out(src: &[f64], dst: &mut [f64]) -> Result<(), RslcStatus> {
    if dst.len() < src.len() {
        set_error(format!("buffer holds {} values, need {}", dst.len(), src.len()));
        return Err(RslcStatus::BufferTooSmall);
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

fn store<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn rslc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rslc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a problem file (JSON, or TOML by `.toml` extension).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_load(
    path: *const c_char,
    renormalize: bool,
    out: *mut *mut RslcProblem,
) -> RslcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            set_error("path is not UTF-8");
            RslcStatus::InvalidInput
        })?;
        let spec = load_spec(path, renormalize).map_err(from_error)?;
        store(out, RslcProblem { spec });
        Ok(())
    })
}

/// Builds a problem from passive transition triplets `(from[k], to[k],
/// prob[k])` and a per-state running cost.
///
/// `final_cost` may be null (defaults to `cost`). `horizon` is used only by
/// finite-horizon problems and `terminal` (length `n_terminal`) only by
/// first-exit problems.
///
/// # Safety
/// Array arguments must point to at least the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_from_triplets(
    n_states: usize,
    from: *const usize,
    to: *const usize,
    prob: *const f64,
    nnz: usize,
    cost: *const f64,
    final_cost: *const f64,
    kind: RslcKind,
    horizon: usize,
    terminal: *const usize,
    n_terminal: usize,
    alpha: f64,
    out: *mut *mut RslcProblem,
) -> RslcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let from = input_slice(from, nnz, "from")?;
        let to = input_slice(to, nnz, "to")?;
        let prob = input_slice(prob, nnz, "prob")?;
        let q = input_slice(cost, n_states, "cost")?.to_vec();
        let kind = match kind {
            RslcKind::FiniteHorizon => HorizonKind::FiniteHorizon { horizon },
            RslcKind::FirstExit => HorizonKind::FirstExit {
                terminal_states: input_slice(terminal, n_terminal, "terminal")?.to_vec(),
            },
            RslcKind::AverageCost => HorizonKind::InfiniteHorizonAverage,
        };
        let mut costs = CostModel::stationary(q);
        if !final_cost.is_null() {
            costs = costs.with_final(slice::from_raw_parts(final_cost, n_states).to_vec());
        }
        let triplets = (0..nnz).map(|k| (from[k], to[k], prob[k]));
        let passive =
            SparseRowStochasticMatrix::from_triplets(n_states, triplets, false).map_err(from_error)?;
        let states = StateSpace::new(n_states, None).map_err(from_error)?;
        let spec = ProblemSpec::new(states, passive, costs, alpha, kind).map_err(from_error)?;
        store(out, RslcProblem { spec });
        Ok(())
    })
}

/// Builds the two-hill car problem on an `n_position x n_velocity` grid
/// (average cost, alpha 0). Non-positive or non-finite physical parameters
/// take their defaults.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_hill_car(
    r: f64,
    v1: f64,
    v2: f64,
    sigma: f64,
    h: f64,
    g: f64,
    n_position: usize,
    n_velocity: usize,
    out: *mut *mut RslcProblem,
) -> RslcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = HillCarConfig::default();
        let pick = |x: f64, default: f64| if x.is_finite() && x > 0.0 { x } else { default };
        let config = HillCarConfig {
            terrain: TerrainModel {
                r: pick(r, d.terrain.r),
                v1: pick(v1, d.terrain.v1),
                v2: pick(v2, d.terrain.v2),
                g: pick(g, d.terrain.g),
            },
            sigma: pick(sigma, d.sigma),
            h: pick(h, d.h),
            grid_shape: [n_position, n_velocity],
            ..d
        };
        let spec = build_hill_car_with(&config).map_err(from_error)?;
        store(out, RslcProblem { spec });
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_n_states(
    problem: *const RslcProblem,
    out: *mut usize,
) -> RslcStatus {
    guard(|| {
        let p = ref_const(problem, "problem")?;
        *ref_mut(out, "out")? = p.spec.n_states();
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_set_alpha(problem: *mut RslcProblem, alpha: f64) -> RslcStatus {
    guard(|| {
        let p = ref_mut(problem, "problem")?;
        p.spec = p.spec.with_alpha(alpha).map_err(from_error)?;
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn rslc_problem_free(problem: *mut RslcProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the problem at its current alpha. `tol <= 0` and `max_iter == 0`
/// select the defaults.
///
/// # Safety
/// `problem` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_solve(
    problem: *const RslcProblem,
    tol: f64,
    max_iter: usize,
    out: *mut *mut RslcSolution,
) -> RslcStatus {
    guard(|| {
        let p = ref_const(problem, "problem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts = SolverOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let (values, report) = solve(&p.spec, &opts).map_err(from_error)?;
        store(
            out,
            RslcSolution {
                spec: p.spec.clone(),
                values,
                report,
                policy: None,
            },
        );
        Ok(())
    })
}

/// Number of stored value stages (`T + 1` for finite horizon, else 1).
///
/// # Safety
/// `solution` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_n_stages(
    solution: *const RslcSolution,
    out: *mut usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_const(solution, "solution")?;
        *ref_mut(out, "out")? = s.values.n_stages();
        Ok(())
    })
}

/// Copies the value function at `stage` into `buf` (at least `n_states`
/// entries).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_values(
    solution: *const RslcSolution,
    stage: usize,
    buf: *mut f64,
    len: usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_const(solution, "solution")?;
        if stage >= s.values.n_stages() {
            set_error(format!("stage {stage} out of range"));
            return Err(RslcStatus::InvalidInput);
        }
        copy_out(s.values.stage(stage), output_slice(buf, len, "buf")?)
    })
}

/// Average cost per step. Fails for problems that are not average-cost.
///
/// # Safety
/// `solution` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_average_cost(
    solution: *const RslcSolution,
    out: *mut f64,
) -> RslcStatus {
    guard(|| {
        let s = ref_const(solution, "solution")?;
        let out = ref_mut(out, "out")?;
        match s.report.average_cost {
            Some(c) => {
                *out = c;
                Ok(())
            }
            None => {
                set_error("not an average-cost problem");
                Err(RslcStatus::InvalidInput)
            }
        }
    })
}

/// Bellman residual and iteration count of the solve. Either output may be
/// null.
///
/// # Safety
/// `solution` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_diagnostics(
    solution: *const RslcSolution,
    residual: *mut f64,
    iterations: *mut usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_const(solution, "solution")?;
        if let Some(r) = residual.as_mut() {
            *r = s.report.final_residual;
        }
        if let Some(i) = iterations.as_mut() {
            *i = s.report.iterations;
        }
        Ok(())
    })
}

fn policy_of(s: &mut RslcSolution) -> Result<&Policy, RslcStatus> {
    if s.policy.is_none() {
        s.policy = Some(extract_policy(&s.spec, &s.values).map_err(from_error)?);
    }
    Ok(s.policy.as_ref().expect("just set"))
}

/// Number of nonzero transitions in the optimal (first-step) policy.
///
/// # Safety
/// `solution` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_policy_nnz(
    solution: *mut RslcSolution,
    out: *mut usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_mut(solution, "solution")?;
        let out = ref_mut(out, "out")?;
        *out = policy_of(s)?.matrix.nnz();
        Ok(())
    })
}

/// Writes the optimal policy as triplets into three arrays of length `cap`
/// (at least the value from [`rslc_solution_policy_nnz`]).
///
/// # Safety
/// Output arrays must each hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_policy(
    solution: *mut RslcSolution,
    from: *mut usize,
    to: *mut usize,
    prob: *mut f64,
    cap: usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_mut(solution, "solution")?;
        let triplets: Vec<_> = policy_of(s)?.matrix.triplets().collect();
        if cap < triplets.len() {
            set_error(format!("buffer holds {cap} entries, need {}", triplets.len()));
            return Err(RslcStatus::BufferTooSmall);
        }
        let from = output_slice(from, cap, "from")?;
        let to = output_slice(to, cap, "to")?;
        let prob = output_slice(prob, cap, "prob")?;
        for (k, (i, j, v)) in triplets.into_iter().enumerate() {
            from[k] = i;
            to[k] = j;
            prob[k] = v;
        }
        Ok(())
    })
}

/// Stationary distribution of the optimally controlled chain (average-cost
/// problems). `tol <= 0` and `max_iter == 0` select the defaults.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_stationary(
    solution: *mut RslcSolution,
    tol: f64,
    max_iter: usize,
    buf: *mut f64,
    len: usize,
) -> RslcStatus {
    guard(|| {
        let s = ref_mut(solution, "solution")?;
        if !matches!(s.spec.kind(), HorizonKind::InfiniteHorizonAverage) {
            set_error("stationary distributions need an average-cost problem");
            return Err(RslcStatus::InvalidInput);
        }
        let d = SolverOptions::default();
        let tol = if tol > 0.0 { tol } else { d.tol };
        let max_iter = if max_iter > 0 { max_iter } else { d.max_iter };
        let report = stationary_distribution(policy_of(s)?, tol, max_iter).map_err(from_error)?;
        copy_out(report.distribution.probs(), output_slice(buf, len, "buf")?)
    })
}

/// # Safety
/// `solution` must come from this library and not be used afterwards. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn rslc_solution_free(solution: *mut RslcSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Rényi divergence of order `alpha` between two distributions of length `n`.
///
/// # Safety
/// `p` and `q` must each point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn rslc_renyi_divergence(
    p: *const f64,
    q: *const f64,
    n: usize,
    alpha: f64,
    out: *mut f64,
) -> RslcStatus {
    guard(|| {
        let p = Distribution::new(input_slice(p, n, "p")?.to_vec()).map_err(from_error)?;
        let q = Distribution::new(input_slice(q, n, "q")?.to_vec()).map_err(from_error)?;
        let d = renyi_divergence(&p, &q, alpha).map_err(from_error)?;
        *ref_mut(out, "out")? = d;
        Ok(())
    })
}
