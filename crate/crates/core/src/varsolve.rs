//! Variational problems whose action may depend on the free endpoint
//! values, and their first-order stationarity system.
//!
//! The action of a trajectory `x` on the scale `{t_0 < … < t_N}` is the
//! exact sum
//!
//! ```text
//! ℒ[x] = Σ_{i=1..N} ν(t_i) · f(t_i, x(ρ(t_i)), x^∇(t_i), x(t_0), x(t_N))
//! ```
//!
//! with the integrand's `z` and `s` slots bound to the endpoint values. A
//! stationary trajectory satisfies, in exact arithmetic,
//!
//! * the Euler–Lagrange equation `(f_v)^∇ = f_x` at the interior κ-points
//!   `t_2 … t_N`,
//! * when `x(t_0)` is free, the eliminated boundary condition
//!   `f_v(t_1) − ν(t_1)·f_x(t_1) = ∫ f_z ∇t`,
//! * when `x(t_N)` is free, `f_v(t_N) = −∫ f_s ∇t`.
//!
//! The boundary condition at `t_0` deserves a note: the continuum statement
//! evaluates `f_v` at `t_0` itself, which on a discrete scale would need a
//! sample left of the interval (a ghost point). Imposing the Euler–Lagrange
//! equation at `t_1` with a ghost unknown and eliminating it algebraically
//! yields the form above, which is also exactly the partial derivative of
//! the discrete action with respect to `x(t_0)`. The equivalence of the two
//! forms is a tested property, not an assumption.
//!
//! The residuals listed above, taken together, are (up to per-equation
//! scaling by −ν) the exact gradient of the discrete action with respect to
//! the non-fixed grid values, so a solution of this system is a genuine
//! stationary point of the discrete problem, not just an approximation of
//! the continuum conditions.

use thiserror::Error;

use crate::expr::{EvalError, EvalPoint, Expression, Params, SensValue, Var};
use crate::nabla::{CompensatedSum, GridFunction};
use crate::solver::{newton_solve, SingularPolicy, SolverError, SolverOptions};
use crate::timescale::TimeScale;

/// Endpoint value constraint: pinned to a value or left to the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointCondition {
    Fixed(f64),
    Free,
}

impl EndpointCondition {
    pub fn is_free(&self) -> bool {
        matches!(self, EndpointCondition::Free)
    }

    pub(crate) fn fixed_value(&self) -> Option<f64> {
        match self {
            EndpointCondition::Fixed(v) => Some(*v),
            EndpointCondition::Free => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("the {which} of a {kind} problem may not use variable '{var}'")]
    IllegalVariable {
        kind: &'static str,
        which: &'static str,
        var: char,
    },
    #[error("parameter '{0}' is referenced but not bound")]
    UnboundParameter(String),
    #[error("fixed endpoint values must be finite")]
    NonFiniteEndpoint,
}

#[derive(Debug, Error, PartialEq)]
pub enum ActionError {
    #[error("trajectory grid does not match the problem's time scale")]
    Misaligned,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub(crate) fn validate_expression(
    e: &Expression,
    kind: &'static str,
    which: &'static str,
    illegal: Var,
    illegal_name: char,
    params: &Params,
) -> Result<(), ProblemError> {
    if e.uses(illegal) {
        return Err(ProblemError::IllegalVariable {
            kind,
            which,
            var: illegal_name,
        });
    }
    for name in e.parameters() {
        if !params.contains_key(name) {
            return Err(ProblemError::UnboundParameter(name.clone()));
        }
    }
    Ok(())
}

pub(crate) fn validate_endpoints(
    at_a: &EndpointCondition,
    at_b: &EndpointCondition,
) -> Result<(), ProblemError> {
    for c in [at_a, at_b] {
        if let EndpointCondition::Fixed(v) = c {
            if !v.is_finite() {
                return Err(ProblemError::NonFiniteEndpoint);
            }
        }
    }
    Ok(())
}

/// Minimize/extremize `Σ ν·f(t, x^ρ, x^∇, x(a), x(b))` subject to optional
/// fixed endpoint values.
#[derive(Debug, Clone)]
pub struct LagrangeProblem {
    integrand: Expression,
    ts: TimeScale,
    at_a: EndpointCondition,
    at_b: EndpointCondition,
    params: Params,
}

/// Residuals of the stationarity system along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Euler–Lagrange residuals at the interior κ-points `t_2 … t_N`.
    pub el_residuals: Vec<f64>,
    /// Boundary residual at `a`; present only when `x(a)` is free.
    pub trans_a: Option<f64>,
    /// Boundary residual at `b`; present only when `x(b)` is free.
    pub trans_b: Option<f64>,
    /// Max absolute value over every residual listed above.
    pub max_abs: f64,
    /// Newton iterations spent producing the trajectory (0 for externally
    /// supplied trajectories).
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct ExtremalSolution {
    pub x: GridFunction,
    pub objective: f64,
    pub report: ResidualReport,
}

impl LagrangeProblem {
    pub fn new(
        integrand: Expression,
        ts: TimeScale,
        at_a: EndpointCondition,
        at_b: EndpointCondition,
        params: Params,
    ) -> Result<LagrangeProblem, ProblemError> {
        validate_expression(&integrand, "variational", "integrand", Var::U, 'u', &params)?;
        validate_endpoints(&at_a, &at_b)?;
        Ok(LagrangeProblem {
            integrand,
            ts,
            at_a,
            at_b,
            params,
        })
    }

    pub fn integrand(&self) -> &Expression {
        &self.integrand
    }

    pub fn ts(&self) -> &TimeScale {
        &self.ts
    }

    pub fn at_a(&self) -> EndpointCondition {
        self.at_a
    }

    pub fn at_b(&self) -> EndpointCondition {
        self.at_b
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn check_aligned(&self, x: &GridFunction) -> Result<(), ActionError> {
        if x.ts() == &self.ts {
            Ok(())
        } else {
            Err(ActionError::Misaligned)
        }
    }

    /// Integrand value and partials at every κ-point of the trajectory
    /// `xs` (full grid values, endpoint slots included).
    fn kappa_sens(&self, xs: &[f64]) -> Result<Vec<SensValue>, EvalError> {
        let pts = self.ts.points();
        let m = pts.len();
        let (z, s) = (xs[0], xs[m - 1]);
        (0..m - 1)
            .map(|i| {
                let nu = pts[i + 1] - pts[i];
                let at = EvalPoint {
                    t: pts[i + 1],
                    x: xs[i],
                    v: (xs[i + 1] - xs[i]) / nu,
                    z,
                    s,
                };
                self.integrand.eval_with_sens(&at, &self.params)
            })
            .collect()
    }

    /// The exact discrete action `Σ ν·f`.
    pub fn evaluate_action(&self, x: &GridFunction) -> Result<f64, ActionError> {
        self.check_aligned(x)?;
        Ok(action_from_sens(&self.ts, &self.kappa_sens(x.values())?))
    }

    /// Euler–Lagrange residuals `(f_v)^∇ − f_x` at the interior κ-points;
    /// empty when the scale has only two points.
    pub fn el_residuals(&self, x: &GridFunction) -> Result<Vec<f64>, ActionError> {
        self.check_aligned(x)?;
        let sens = self.kappa_sens(x.values())?;
        Ok(el_from_sens(&self.ts, &sens))
    }

    /// Boundary residuals for the free endpoints (fixed endpoints
    /// contribute `None`).
    pub fn transversality_residuals(
        &self,
        x: &GridFunction,
    ) -> Result<(Option<f64>, Option<f64>), ActionError> {
        self.check_aligned(x)?;
        let sens = self.kappa_sens(x.values())?;
        Ok(self.trans_from_sens(&sens))
    }

    fn trans_from_sens(&self, sens: &[SensValue]) -> (Option<f64>, Option<f64>) {
        let trans_a = self.at_a.is_free().then(|| {
            let nu_1 = self.ts.nu_at_kappa(0);
            let mut zint = CompensatedSum::new();
            for (i, sv) in sens.iter().enumerate() {
                zint.add(self.ts.nu_at_kappa(i) * sv.d_z());
            }
            sens[0].d_v() - nu_1 * sens[0].d_x() - zint.total()
        });
        let trans_b = self.at_b.is_free().then(|| {
            let mut sint = CompensatedSum::new();
            for (i, sv) in sens.iter().enumerate() {
                sint.add(self.ts.nu_at_kappa(i) * sv.d_s());
            }
            sens[sens.len() - 1].d_v() + sint.total()
        });
        (trans_a, trans_b)
    }

    /// Full residual vector in solver order: Euler–Lagrange at the interior
    /// κ-points, then the free-endpoint boundary residuals.
    fn assemble_residuals(&self, xs: &[f64]) -> Result<Vec<f64>, EvalError> {
        let sens = self.kappa_sens(xs)?;
        let mut out = el_from_sens(&self.ts, &sens);
        let (ta, tb) = self.trans_from_sens(&sens);
        out.extend(ta);
        out.extend(tb);
        Ok(out)
    }

    /// Residual report for an externally supplied trajectory.
    pub fn residual_report(&self, x: &GridFunction) -> Result<ResidualReport, ActionError> {
        self.check_aligned(x)?;
        let sens = self.kappa_sens(x.values())?;
        let el_residuals = el_from_sens(&self.ts, &sens);
        let (trans_a, trans_b) = self.trans_from_sens(&sens);
        Ok(build_report(el_residuals, trans_a, trans_b, 0))
    }

    /// Solves the stationarity system by damped Newton iteration. Unknowns
    /// are the non-fixed grid values; the initial guess interpolates
    /// affinely between the endpoint guesses (fixed values where given,
    /// otherwise 0 at `a` and 1 at `b`).
    pub fn solve(&self, opts: &SolverOptions) -> Result<ExtremalSolution, SolverError> {
        let m = self.ts.len();
        if m < 3 {
            return Err(SolverError::TooFewPoints { needed: 3, got: m });
        }
        let template = self.initial_grid();
        let free_idx: Vec<usize> = (0..m)
            .filter(|&i| {
                (i != 0 || self.at_a.is_free()) && (i != m - 1 || self.at_b.is_free())
            })
            .collect();
        let x0: Vec<f64> = free_idx.iter().map(|&i| template[i]).collect();

        let residual = |unknowns: &[f64]| {
            let mut xs = template.clone();
            for (k, &i) in free_idx.iter().enumerate() {
                xs[i] = unknowns[k];
            }
            self.assemble_residuals(&xs)
        };
        let outcome = newton_solve(&residual, x0, opts, SingularPolicy::Fail)?;

        let mut xs = template.clone();
        for (k, &i) in free_idx.iter().enumerate() {
            xs[i] = outcome.solution[k];
        }
        let sens = self.kappa_sens(&xs).map_err(SolverError::Eval)?;
        let el_residuals = el_from_sens(&self.ts, &sens);
        let (trans_a, trans_b) = self.trans_from_sens(&sens);
        let objective = action_from_sens(&self.ts, &sens);
        let x = GridFunction::new(self.ts.clone(), xs)
            .expect("solver produces aligned finite values");
        Ok(ExtremalSolution {
            x,
            objective,
            report: build_report(el_residuals, trans_a, trans_b, outcome.iters),
        })
    }

    /// Affine interpolation between the endpoint guesses.
    fn initial_grid(&self) -> Vec<f64> {
        let pts = self.ts.points();
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        let ga = self.at_a.fixed_value().unwrap_or(0.0);
        let gb = self.at_b.fixed_value().unwrap_or(1.0);
        pts.iter()
            .map(|&t| ga + (gb - ga) * (t - a) / (b - a))
            .collect()
    }
}

pub(crate) fn action_from_sens(ts: &TimeScale, sens: &[SensValue]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (i, sv) in sens.iter().enumerate() {
        acc.add(ts.nu_at_kappa(i) * sv.value);
    }
    acc.total()
}

fn el_from_sens(ts: &TimeScale, sens: &[SensValue]) -> Vec<f64> {
    (1..sens.len())
        .map(|i| (sens[i].d_v() - sens[i - 1].d_v()) / ts.nu_at_kappa(i) - sens[i].d_x())
        .collect()
}

pub(crate) fn build_max_abs(parts: &[&[f64]]) -> f64 {
    parts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn build_report(
    el_residuals: Vec<f64>,
    trans_a: Option<f64>,
    trans_b: Option<f64>,
    newton_iters: usize,
) -> ResidualReport {
    let boundary: Vec<f64> = trans_a.iter().chain(trans_b.iter()).copied().collect();
    let max_abs = build_max_abs(&[&el_residuals[..], &boundary[..]]);
    ResidualReport {
        el_residuals,
        trans_a,
        trans_b,
        max_abs,
        newton_iters,
    }
}
