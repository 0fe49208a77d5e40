//! Variational problems and optimal control on finite time scales.
//!
//! A time scale here is a finite set of real points. Derivatives are
//! backward difference quotients against the previous point, integrals are
//! graininess-weighted sums, and both collapse to the classical objects as
//! grids refine while staying exact on a fixed grid. On top of that
//! calculus, this crate solves two problem families whose integrands may
//! depend on the (free) initial and terminal state values:
//!
//! * [`varsolve`]: Lagrange problems `extremize Σ ν·f(t, x^ρ, x^∇, x(a), x(b))`
//!   via their Euler–Lagrange and natural boundary equations;
//! * [`octrl`]: optimal control problems `extremize Σ ν·f(t, x^ρ, u^ρ, x(a), x(b))`
//!   under the state equation `x^∇ = g(t, x^ρ, u^ρ, x(a), x(b))` via the
//!   Hamiltonian stationarity system, plus a sampling-based convexity
//!   certifier for global optimality.
//!
//! Expressions are parsed from a small arithmetic grammar ([`expr`]) with
//! exact forward-mode sensitivities; the nonlinear systems are solved by a
//! damped Newton method ([`solver`]) with a minimum-norm fallback for
//! problems whose extremals form a continuum.

pub mod expr;
pub mod nabla;
pub mod octrl;
pub mod solver;
pub mod timescale;
pub mod varsolve;

pub use expr::{EvalError, EvalPoint, Expression, Params, ParseError, SensValue, Var};
pub use nabla::{GridError, GridFunction, KappaGrid};
pub use octrl::{
    Certificate, ControlEvalError, ControlExtremal, ControlProblem, ControlReport,
    RegressivityCheck, Verdict,
};
pub use solver::{SolverError, SolverOptions};
pub use timescale::{TimeScale, TimeScaleError, TimeScaleSpec};
pub use varsolve::{
    ActionError, EndpointCondition, ExtremalSolution, LagrangeProblem, ProblemError,
    ResidualReport,
};
