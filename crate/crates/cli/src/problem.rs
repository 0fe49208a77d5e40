//! Problem-file loading: JSON description → a solvable core problem.
//!
//! A problem file is a single JSON object:
//!
//! ```json
//! {
//!   "kind": "lagrange",
//!   "timescale": { "type": "uniform", "a": 0.0, "b": 1.0, "n": 10 },
//!   "lagrangian": "v^2 + alpha*z^2 + beta*(s-1)^2",
//!   "params": { "alpha": 2.0, "beta": 2.0 },
//!   "x_a": "free",
//!   "x_b": { "fixed": 1.0 },
//!   "solver": { "tol": 1e-11, "max_iters": 50 }
//! }
//! ```
//!
//! Control problems use `"kind": "control"` with `integrand` and `dynamics`
//! in place of `lagrangian`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use varnabla::{
    ControlProblem, EndpointCondition, Expression, LagrangeProblem, TimeScaleSpec,
};

use crate::Failure;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    kind: String,
    timescale: TimeScaleSpec,
    #[serde(default)]
    lagrangian: Option<String>,
    #[serde(default)]
    integrand: Option<String>,
    #[serde(default)]
    dynamics: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    x_a: EndpointSpec,
    x_b: EndpointSpec,
    #[serde(default)]
    solver: SolverSpec,
}

/// Endpoint condition as written in the file: the string `"free"` or an
/// object `{ "fixed": value }`.
#[derive(Deserialize)]
#[serde(untagged)]
enum EndpointSpec {
    Word(String),
    Fixed { fixed: f64 },
}

impl EndpointSpec {
    fn resolve(&self, field: &str) -> Result<EndpointCondition, Failure> {
        match self {
            EndpointSpec::Word(w) if w == "free" => Ok(EndpointCondition::Free),
            EndpointSpec::Word(w) => Err(Failure::input(format!(
                "field '{field}': expected \"free\" or {{\"fixed\": value}}, got \"{w}\""
            ))),
            EndpointSpec::Fixed { fixed } => Ok(EndpointCondition::Fixed(*fixed)),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

pub enum Problem {
    Lagrange(LagrangeProblem),
    Control(ControlProblem),
}

fn parse_expr(src: &str, field: &str) -> Result<Expression, Failure> {
    Expression::parse(src).map_err(|e| Failure::input(format!("field '{field}': {e}")))
}

fn reject(field: &str, value: &Option<String>, kind: &str) -> Result<(), Failure> {
    if value.is_some() {
        return Err(Failure::input(format!(
            "field '{field}' does not apply to \"kind\": \"{kind}\""
        )));
    }
    Ok(())
}

/// Read and validate a problem file. Input-shape problems map to exit
/// code 2, unconstructible time scales to 4.
pub fn load(path: &Path) -> Result<(Problem, SolverSpec), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;

    let ts = file
        .timescale
        .build()
        .map_err(|e| Failure::timescale(format!("field 'timescale': {e}")))?;
    let at_a = file.x_a.resolve("x_a")?;
    let at_b = file.x_b.resolve("x_b")?;

    let problem = match file.kind.as_str() {
        "lagrange" => {
            reject("integrand", &file.integrand, "lagrange")?;
            reject("dynamics", &file.dynamics, "lagrange")?;
            let src = file.lagrangian.as_deref().ok_or_else(|| {
                Failure::input("\"kind\": \"lagrange\" requires a 'lagrangian' field")
            })?;
            let expr = parse_expr(src, "lagrangian")?;
            let prob = LagrangeProblem::new(expr, ts, at_a, at_b, file.params)
                .map_err(|e| Failure::input(e.to_string()))?;
            Problem::Lagrange(prob)
        }
        "control" => {
            reject("lagrangian", &file.lagrangian, "control")?;
            let f_src = file.integrand.as_deref().ok_or_else(|| {
                Failure::input("\"kind\": \"control\" requires an 'integrand' field")
            })?;
            let g_src = file.dynamics.as_deref().ok_or_else(|| {
                Failure::input("\"kind\": \"control\" requires a 'dynamics' field")
            })?;
            let f = parse_expr(f_src, "integrand")?;
            let g = parse_expr(g_src, "dynamics")?;
            let prob = ControlProblem::new(f, g, ts, at_a, at_b, file.params)
                .map_err(|e| Failure::input(e.to_string()))?;
            Problem::Control(prob)
        }
        other => {
            return Err(Failure::input(format!(
                "field 'kind': expected \"lagrange\" or \"control\", got \"{other}\""
            )));
        }
    };

    Ok((problem, file.solver))
}
