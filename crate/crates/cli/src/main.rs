//! Command-line front end for the time-scale variational toolkit.
//!
//! Subcommands: `solve` (writes solution artifacts), `check` (residuals of a
//! stored trajectory), `eval` (action/objective of a stored trajectory),
//! `integrate` and `differentiate` (calculus over an expression of `t`).
//!
//! Exit codes, stable for scripting:
//!   0  success
//!   2  unreadable or invalid input (JSON, expression, CSV, alignment)
//!   3  solver did not converge
//!   4  invalid time scale description
//!   5  residual or endpoint tolerance exceeded in `check`

mod output;
mod problem;
mod trajectory;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use problem::Problem;
use varnabla::expr::EvalPoint;
use varnabla::{Expression, GridFunction, Params, SolverError, SolverOptions, TimeScaleSpec};

use output::fmt17;

/// Hessian draws per κ-point used by the convexity certificate.
const CERT_SAMPLES: usize = 40;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    pub fn timescale(message: impl Into<String>) -> Failure {
        Failure {
            code: 4,
            message: message.into(),
        }
    }

    pub fn tolerance(message: impl Into<String>) -> Failure {
        Failure {
            code: 5,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "varnabla",
    version,
    about = "Variational problems and optimal control on finite time scales"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a problem file and write `<stem>.solution.json` and
    /// `<stem>.trajectory.csv` next to it (or into --out-dir).
    Solve {
        problem: PathBuf,
        /// Max absolute residual accepted as converged (overrides the file).
        #[arg(long)]
        tol: Option<f64>,
        /// Newton iteration cap (overrides the file).
        #[arg(long)]
        max_iters: Option<usize>,
        /// Directory for the output artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Which artifacts to write.
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
        /// Seed for convexity-certificate sampling (control problems).
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Evaluate the stationarity residuals of a stored trajectory; exit 0
    /// when every residual (and fixed-endpoint deviation) is within
    /// tolerance, 5 otherwise.
    Check {
        problem: PathBuf,
        trajectory: PathBuf,
        /// Residual tolerance (overrides the file's solver tolerance).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print the action (objective) of a stored trajectory.
    Eval {
        problem: PathBuf,
        trajectory: PathBuf,
    },
    /// Integrate an expression of t over a time scale (file holding a
    /// timescale description).
    Integrate {
        timescale: PathBuf,
        expr: String,
        /// Lower limit (default: the scale minimum).
        #[arg(long)]
        from: Option<f64>,
        /// Upper limit (default: the scale maximum).
        #[arg(long)]
        to: Option<f64>,
        /// Parameter binding, repeatable: --param name=value
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
    },
    /// Print t, value, and backward difference quotient columns for an
    /// expression of t on a time scale.
    Differentiate {
        timescale: PathBuf,
        expr: String,
        /// Parameter binding, repeatable: --param name=value
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
    },
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got '{s}'"))?;
    let parsed: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value in '{s}': {e}"))?;
    Ok((name.trim().to_string(), parsed))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Solve {
            problem,
            tol,
            max_iters,
            out_dir,
            format,
            seed,
        } => cmd_solve(&problem, tol, max_iters, out_dir, format, seed),
        Cmd::Check {
            problem,
            trajectory,
            tol,
        } => cmd_check(&problem, &trajectory, tol),
        Cmd::Eval {
            problem,
            trajectory,
        } => cmd_eval(&problem, &trajectory),
        Cmd::Integrate {
            timescale,
            expr,
            from,
            to,
            params,
        } => cmd_integrate(&timescale, &expr, from, to, params),
        Cmd::Differentiate {
            timescale,
            expr,
            params,
        } => cmd_differentiate(&timescale, &expr, params),
    }
}

fn solver_options(
    tol: Option<f64>,
    max_iters: Option<usize>,
    file: &problem::SolverSpec,
) -> SolverOptions {
    let defaults = SolverOptions::default();
    SolverOptions {
        tol: tol.or(file.tol).unwrap_or(defaults.tol),
        max_iters: max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
    }
}

fn map_solver_error(err: SolverError) -> Failure {
    match err {
        SolverError::TooFewPoints { .. } => Failure::input(err.to_string()),
        _ => Failure::solver(err.to_string()),
    }
}

fn cmd_solve(
    path: &Path,
    tol: Option<f64>,
    max_iters: Option<usize>,
    out_dir: Option<PathBuf>,
    format: Format,
    seed: u64,
) -> Result<(), Failure> {
    let (prob, spec) = problem::load(path)?;
    let opts = solver_options(tol, max_iters, &spec);

    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    let dir = out_dir.unwrap_or_else(|| {
        path.parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf()
    });
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    let json_path = dir.join(format!("{stem}.solution.json"));
    let csv_path = dir.join(format!("{stem}.trajectory.csv"));

    let (json_value, csv_text) = match &prob {
        Problem::Lagrange(p) => {
            let sol = p.solve(&opts).map_err(map_solver_error)?;
            println!("converged in {} newton iterations", sol.report.newton_iters);
            println!("max residual {}", fmt17(sol.report.max_abs));
            println!("objective {}", fmt17(sol.objective));
            (
                output::lagrange_solution_json(p, &sol),
                trajectory::lagrange_csv(p, &sol),
            )
        }
        Problem::Control(p) => {
            let sol = p.solve(&opts).map_err(map_solver_error)?;
            let cert = p.certify_convexity(&sol, CERT_SAMPLES, seed);
            println!("converged in {} newton iterations", sol.report.newton_iters);
            println!("max residual {}", fmt17(sol.report.max_abs));
            println!("objective {}", fmt17(sol.objective));
            if sol.report.degenerate_family {
                println!(
                    "note: stationarity system is rank-deficient; the extremal \
                     belongs to a continuum and one member is reported"
                );
            }
            if !sol.regressivity_ok {
                println!(
                    "warning: dynamics fail the nu-regressivity margin along \
                     the solution; the costate may not be unique"
                );
            }
            println!(
                "certificate: {} (min eigenvalue {}, min costate {})",
                output::verdict_name(cert.verdict),
                fmt17(cert.min_eigenvalue),
                fmt17(cert.min_costate)
            );
            (
                output::control_solution_json(p, &sol, &cert),
                trajectory::control_csv(p, &sol),
            )
        }
    };

    if matches!(format, Format::Json | Format::Both) {
        let text = serde_json::to_string_pretty(&json_value).expect("serializable") + "\n";
        fs::write(&json_path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", json_path.display())))?;
        println!("wrote {}", json_path.display());
    }
    if matches!(format, Format::Csv | Format::Both) {
        fs::write(&csv_path, csv_text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", csv_path.display())))?;
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn cmd_check(path: &Path, traj: &Path, tol: Option<f64>) -> Result<(), Failure> {
    let (prob, spec) = problem::load(path)?;
    let tol = tol.or(spec.tol).unwrap_or(SolverOptions::default().tol);

    let (max_abs, endpoint_dev) = match &prob {
        Problem::Lagrange(p) => {
            let x = trajectory::read_lagrange(traj, p.ts())?;
            let report = p
                .residual_report(&x)
                .map_err(|e| Failure::input(e.to_string()))?;
            let dev = endpoint_deviation(p.at_a(), p.at_b(), x.values());
            output::print_lagrange_report(&report, dev);
            (report.max_abs, dev)
        }
        Problem::Control(p) => {
            let (x, w, costate) = trajectory::read_control(traj, p.ts())?;
            let costate = costate.ok_or_else(|| {
                Failure::input(format!(
                    "{}: missing column 'p' (needed for residual checks)",
                    traj.display()
                ))
            })?;
            let report = p
                .residual_report(&x, &w, &costate)
                .map_err(|e| Failure::input(e.to_string()))?;
            let dev = endpoint_deviation(p.at_a(), p.at_b(), x.values());
            output::print_control_report(&report, dev);
            (report.max_abs, dev)
        }
    };

    let worst = max_abs.max(endpoint_dev);
    if worst <= tol {
        println!("ok: max residual {} within tolerance {}", fmt17(worst), fmt17(tol));
        Ok(())
    } else {
        Err(Failure::tolerance(format!(
            "max residual {} exceeds tolerance {}",
            fmt17(worst),
            fmt17(tol)
        )))
    }
}

fn endpoint_deviation(
    at_a: varnabla::EndpointCondition,
    at_b: varnabla::EndpointCondition,
    xs: &[f64],
) -> f64 {
    let dev = |cond: varnabla::EndpointCondition, value: f64| match cond {
        varnabla::EndpointCondition::Fixed(want) => (value - want).abs(),
        varnabla::EndpointCondition::Free => 0.0,
    };
    dev(at_a, xs[0]).max(dev(at_b, xs[xs.len() - 1]))
}

fn cmd_eval(path: &Path, traj: &Path) -> Result<(), Failure> {
    let (prob, _) = problem::load(path)?;
    let value = match &prob {
        Problem::Lagrange(p) => {
            let x = trajectory::read_lagrange(traj, p.ts())?;
            p.evaluate_action(&x)
                .map_err(|e| Failure::input(e.to_string()))?
        }
        Problem::Control(p) => {
            let (x, w, _) = trajectory::read_control(traj, p.ts())?;
            p.evaluate_objective(&x, &w)
                .map_err(|e| Failure::input(e.to_string()))?
        }
    };
    println!("{}", fmt17(value));
    Ok(())
}

fn load_timescale(path: &Path) -> Result<varnabla::TimeScale, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let spec: TimeScaleSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    spec.build()
        .map_err(|e| Failure::timescale(e.to_string()))
}

fn time_expression(src: &str, params: &Params) -> Result<Expression, Failure> {
    let expr = Expression::parse(src).map_err(|e| Failure::input(e.to_string()))?;
    for var in [
        varnabla::Var::X,
        varnabla::Var::V,
        varnabla::Var::U,
        varnabla::Var::Z,
        varnabla::Var::S,
    ] {
        if expr.uses(var) {
            return Err(Failure::input(format!(
                "expression may reference only t and parameters; found '{}'",
                var.name()
            )));
        }
    }
    for name in expr.parameters() {
        if !params.contains_key(name) {
            return Err(Failure::input(format!(
                "parameter '{name}' is not bound; pass --param {name}=value"
            )));
        }
    }
    Ok(expr)
}

fn sample_over(
    ts: &varnabla::TimeScale,
    expr: &Expression,
    params: &Params,
) -> Result<GridFunction, Failure> {
    let values: Result<Vec<f64>, _> = ts
        .points()
        .iter()
        .map(|&t| expr.eval(&EvalPoint::new(t, 0.0, 0.0, 0.0, 0.0), params))
        .collect();
    let values = values.map_err(|e| Failure::input(e.to_string()))?;
    GridFunction::new(ts.clone(), values).map_err(|e| Failure::input(e.to_string()))
}

fn cmd_integrate(
    ts_path: &Path,
    expr_src: &str,
    from: Option<f64>,
    to: Option<f64>,
    params: Vec<(String, f64)>,
) -> Result<(), Failure> {
    let ts = load_timescale(ts_path)?;
    let params: Params = params.into_iter().collect();
    let expr = time_expression(expr_src, &params)?;
    let f = sample_over(&ts, &expr, &params)?;
    let a = from.unwrap_or_else(|| ts.min());
    let b = to.unwrap_or_else(|| ts.max());
    let value = f
        .nabla_integral(a, b)
        .map_err(|e| Failure::input(e.to_string()))?;
    println!("{}", fmt17(value));
    Ok(())
}

fn cmd_differentiate(
    ts_path: &Path,
    expr_src: &str,
    params: Vec<(String, f64)>,
) -> Result<(), Failure> {
    let ts = load_timescale(ts_path)?;
    let params: Params = params.into_iter().collect();
    let expr = time_expression(expr_src, &params)?;
    let f = sample_over(&ts, &expr, &params)?;
    let df = f.nabla_derivative();
    println!("t,value,nabla");
    for (i, &t) in ts.points().iter().enumerate() {
        let nabla = if i == 0 {
            String::new()
        } else {
            fmt17(df.values()[i - 1])
        };
        println!("{},{},{}", fmt17(t), fmt17(f.values()[i]), nabla);
    }
    Ok(())
}
