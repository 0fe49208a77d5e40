//! Rendering: solution JSON documents and check-report printing.

use serde_json::{json, Value};

use varnabla::octrl::{Certificate, ControlExtremal, ControlProblem, ControlReport, Verdict};
use varnabla::varsolve::{ExtremalSolution, LagrangeProblem, ResidualReport};

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn verdict_name(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::CertifiedMinimum => "certified-minimum",
        Verdict::CertifiedMaximum => "certified-maximum",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn lagrange_solution_json(prob: &LagrangeProblem, sol: &ExtremalSolution) -> Value {
    json!({
        "kind": "lagrange",
        "objective": sol.objective,
        "t": prob.ts().points(),
        "x": sol.x.values(),
        "report": {
            "el_residuals": sol.report.el_residuals,
            "trans_a": sol.report.trans_a,
            "trans_b": sol.report.trans_b,
            "max_abs": sol.report.max_abs,
            "newton_iters": sol.report.newton_iters,
        },
    })
}

pub fn control_solution_json(
    prob: &ControlProblem,
    sol: &ControlExtremal,
    cert: &Certificate,
) -> Value {
    json!({
        "kind": "control",
        "objective": sol.objective,
        "t": prob.ts().points(),
        "x": sol.x.values(),
        "u_rho": sol.w.values(),
        "p": sol.p.values(),
        "report": {
            "r1": sol.report.r1,
            "r2": sol.report.r2,
            "r3": sol.report.r3,
            "trans_a": sol.report.trans_a,
            "trans_b": sol.report.trans_b,
            "max_abs": sol.report.max_abs,
            "newton_iters": sol.report.newton_iters,
            "degenerate_family": sol.report.degenerate_family,
        },
        "regressivity_ok": sol.regressivity_ok,
        "certificate": {
            "verdict": verdict_name(cert.verdict),
            "samples_per_point": cert.samples_per_point,
            "seed": cert.seed,
            "box_halfwidths": cert.box_halfwidths,
            "min_eigenvalue": cert.min_eigenvalue,
            "max_eigenvalue": cert.max_eigenvalue,
            "min_costate": cert.min_costate,
            "g_is_nonlinear": cert.g_is_nonlinear,
            "sampling_complete": cert.sampling_complete,
        },
    })
}

fn max_abs_of(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn print_boundary(name: &str, value: Option<f64>) {
    match value {
        Some(v) => println!("{name} {}", fmt17(v)),
        None => println!("{name} (endpoint fixed; no condition)"),
    }
}

pub fn print_lagrange_report(report: &ResidualReport, endpoint_dev: f64) {
    println!(
        "euler-lagrange max {}",
        fmt17(max_abs_of(&report.el_residuals))
    );
    print_boundary("boundary residual at a:", report.trans_a);
    print_boundary("boundary residual at b:", report.trans_b);
    println!("fixed-endpoint deviation {}", fmt17(endpoint_dev));
    println!("max residual {}", fmt17(report.max_abs));
}

pub fn print_control_report(report: &ControlReport, endpoint_dev: f64) {
    println!("state-equation max {}", fmt17(max_abs_of(&report.r1)));
    println!("costate-equation max {}", fmt17(max_abs_of(&report.r2)));
    println!("stationarity max {}", fmt17(max_abs_of(&report.r3)));
    print_boundary("costate boundary at a:", report.trans_a);
    print_boundary("costate boundary at b:", report.trans_b);
    println!("fixed-endpoint deviation {}", fmt17(endpoint_dev));
    println!("max residual {}", fmt17(report.max_abs));
}
