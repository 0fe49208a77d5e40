//! Damped Newton iteration on square nonlinear systems, shared by the
//! variational and optimal-control solvers.
//!
//! The Jacobian is assembled column by column from forward differences of
//! the residual closure and factored by partial-pivot LU. Steps are damped
//! by halving until the residual 2-norm strictly decreases; non-monotone
//! steps are never accepted. Callers can opt into a truncated-SVD fallback
//! for exactly singular Jacobians, which takes the minimum-norm Newton step
//! instead of failing; problems whose stationary points form a continuum
//! (the Jacobian stays rank-deficient at the solution) are then reported as
//! degenerate rather than as errors.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::EvalError;

/// Forward-difference step scale for Jacobian columns.
const FD_STEP_SCALE: f64 = 1e-7;
/// LU pivots below this are treated as a singular system.
const PIVOT_TOL: f64 = 1e-13;
/// Singular values below this fraction of the largest are truncated in the
/// SVD fallback, and a final Jacobian this rank-deficient flags degeneracy.
const SV_RATIO_TOL: f64 = 1e-8;
/// Maximum step halvings in the damped line search.
const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Convergence tolerance on the max absolute residual.
    pub tol: f64,
    /// Newton iteration cap.
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-11,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("no convergence after {iters} iterations: max residual {residual:e} exceeds tolerance {tol:e}")]
    DidNotConverge {
        iters: usize,
        residual: f64,
        tol: f64,
    },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("the time scale needs at least {needed} points for this solve, it has {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug)]
pub(crate) struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub iters: usize,
    /// Rank-deficiency of the Jacobian at the accepted solution; only
    /// computed when the SVD fallback is enabled.
    pub degenerate: bool,
}

/// Whether a singular Jacobian aborts the solve or degrades to minimum-norm
/// steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SingularPolicy {
    Fail,
    MinNormStep,
}

/// Residual closure of a square stationarity system.
pub(crate) type ResidualFn<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>, EvalError> + 'a;

fn norm2_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn newton_solve(
    residual: &ResidualFn,
    x0: Vec<f64>,
    opts: &SolverOptions,
    on_singular: SingularPolicy,
) -> Result<NewtonOutcome, SolverError> {
    let n = x0.len();
    let mut x = x0;
    let mut r = residual(&x)?;
    assert_eq!(r.len(), n, "residual dimension must match unknowns");

    let mut iters = 0;
    loop {
        if max_abs(&r) <= opts.tol {
            let degenerate = match on_singular {
                SingularPolicy::MinNormStep => jacobian_is_rank_deficient(residual, &x, &r)?,
                SingularPolicy::Fail => false,
            };
            return Ok(NewtonOutcome {
                solution: x,
                iters,
                degenerate,
            });
        }
        if iters >= opts.max_iters {
            return Err(SolverError::DidNotConverge {
                iters,
                residual: max_abs(&r),
                tol: opts.tol,
            });
        }

        let jac = assemble_jacobian(residual, &x, &r)?;
        let delta = solve_step(jac, &r, on_singular)?;

        // damped update: halve until the residual norm strictly decreases
        let base_norm = norm2_sq(&r);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(&delta)
                .map(|(xi, di)| xi + lambda * di)
                .collect();
            // a trial stepping outside an expression's domain is treated as
            // an infinitely bad step, not an error
            if let Ok(r_trial) = residual(&trial) {
                if norm2_sq(&r_trial) < base_norm {
                    accepted = Some((trial, r_trial));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((x_new, r_new)) => {
                x = x_new;
                r = r_new;
                iters += 1;
            }
            None => {
                return Err(SolverError::DidNotConverge {
                    iters,
                    residual: max_abs(&r),
                    tol: opts.tol,
                })
            }
        }
    }
}

fn assemble_jacobian(
    residual: &ResidualFn,
    x: &[f64],
    r: &[f64],
) -> Result<DMatrix<f64>, SolverError> {
    let n = x.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut x_pert = x.to_vec();
    for j in 0..n {
        let h = FD_STEP_SCALE * x[j].abs().max(1.0);
        x_pert[j] = x[j] + h;
        let r_pert = residual(&x_pert)?;
        x_pert[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (r_pert[i] - r[i]) / h;
        }
    }
    Ok(jac)
}

fn solve_step(
    jac: DMatrix<f64>,
    r: &[f64],
    on_singular: SingularPolicy,
) -> Result<Vec<f64>, SolverError> {
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    let svd_fallback = |jac: DMatrix<f64>| -> Result<Vec<f64>, SolverError> {
        let svd = jac.svd(true, true);
        let sigma_max = svd.singular_values.max();
        if !sigma_max.is_finite() || sigma_max <= 0.0 {
            return Err(SolverError::SingularSystem(
                "zero or non-finite Jacobian".into(),
            ));
        }
        let delta = svd
            .solve(&rhs, SV_RATIO_TOL * sigma_max)
            .map_err(|e| SolverError::SingularSystem(e.to_string()))?;
        Ok(delta.iter().copied().collect())
    };

    let lu = jac.clone().lu();
    let min_pivot = lu.u().diagonal().amin();
    if min_pivot < PIVOT_TOL {
        return match on_singular {
            SingularPolicy::Fail => Err(SolverError::SingularSystem(format!(
                "LU pivot {min_pivot:e} below {PIVOT_TOL:e}; the stationarity system is rank-deficient \
                 (for control problems this can indicate an abnormal extremizer or a continuum of extremals)"
            ))),
            SingularPolicy::MinNormStep => svd_fallback(jac),
        };
    }
    match lu.solve(&rhs) {
        Some(delta) if delta.iter().all(|d| d.is_finite()) => Ok(delta.iter().copied().collect()),
        _ => match on_singular {
            SingularPolicy::Fail => Err(SolverError::SingularSystem(
                "LU back-substitution failed".into(),
            )),
            SingularPolicy::MinNormStep => svd_fallback(jac),
        },
    }
}

/// Smallest-to-largest singular value check of the Jacobian at `x`.
fn jacobian_is_rank_deficient(
    residual: &ResidualFn,
    x: &[f64],
    r: &[f64],
) -> Result<bool, SolverError> {
    let jac = assemble_jacobian(residual, x, r)?;
    let sv = jac.svd(false, false).singular_values;
    let largest = sv.max();
    let smallest = sv.min();
    if largest.is_finite() && largest > 0.0 {
        Ok(smallest < SV_RATIO_TOL * largest)
    } else {
        Ok(true)
    }
}
