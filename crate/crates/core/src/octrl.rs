//! Optimal control on finite time scales: Hamiltonian stationarity system,
//! costate transversality, ν-regressivity diagnostics, and a sampling-based
//! convexity certifier for global optimality.
//!
//! The problem is to extremize `Σ ν·f(t, x^ρ, u^ρ, x(a), x(b))` subject to
//! the state equation `x^∇(t) = g(t, x^ρ(t), u^ρ(t), x(a), x(b))` and
//! optional fixed endpoint values. Only the ρ-composed control samples
//! `w_i = u(ρ(t_i))` enter any formula, so only those are represented;
//! `u(b)` never appears. With the Hamiltonian `H = f + p·g`, a normal
//! extremal satisfies at every κ-point `t_i`
//!
//! ```text
//! r1: x^∇(t_i) = g(t_i, x^ρ, w_i, z, s)          (H_p recovers the dynamics)
//! r2: p^∇(t_i) = −(f_x + p(t_i)·g_x)
//! r3: 0        =   f_u + p(t_i)·g_u
//! ```
//!
//! plus, per free endpoint, the costate boundary conditions
//! `p(a) = −∫(f_z + p·g_z)∇t` and `p(b) = ∫(f_s + p·g_s)∇t`. This system is
//! exactly the Karush–Kuhn–Tucker system of the discrete problem (with
//! multiplier `−p(t_i)` on the step-`i` state equation), so solutions are
//! true stationary points of the discrete program.
//!
//! Problems whose extremals form a continuum (the stationarity system is
//! rank-deficient) are solved with minimum-norm Newton steps and flagged as
//! a degenerate family instead of failing.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{EvalError, EvalPoint, Expression, Params, SensValue, Var};
use crate::nabla::{CompensatedSum, GridFunction, KappaGrid};
use crate::solver::{newton_solve, SingularPolicy, SolverError, SolverOptions};
use crate::timescale::TimeScale;
use crate::varsolve::{validate_endpoints, validate_expression, EndpointCondition, ProblemError};

/// Eigenvalues of sampled Hessians may dip this far below zero and still
/// count as positive semidefinite (mirrored for the concave test).
pub const EIGENVALUE_TOL: f64 = 1e-8;
/// Costate sign tolerance for the certifier.
pub const COSTATE_TOL: f64 = 1e-10;
/// ν-regressivity margin threshold: |1 − ν·g_x| must exceed this.
pub const REGRESSIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ControlEvalError {
    #[error("trajectory grid does not match the problem's time scale")]
    Misaligned,
    #[error("implicit endpoint iteration did not converge while integrating the dynamics")]
    ImplicitEndpoint,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Extremize `Σ ν·f` subject to `x^∇ = g` and optional endpoint conditions.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    integrand: Expression,
    dynamics: Expression,
    ts: TimeScale,
    at_a: EndpointCondition,
    at_b: EndpointCondition,
    params: Params,
}

/// Per-κ-point residual vectors in system order: state equation, costate
/// equation, stationarity.
pub type ResidualTriple = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Residuals of the Hamiltonian stationarity system along one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlReport {
    /// State-equation residuals `x^∇ − g` per κ-point.
    pub r1: Vec<f64>,
    /// Costate-equation residuals `p^∇ + f_x + p·g_x` per κ-point.
    pub r2: Vec<f64>,
    /// Stationarity residuals `f_u + p·g_u` per κ-point.
    pub r3: Vec<f64>,
    /// Costate boundary residual at `a`; present when `x(a)` is free.
    pub trans_a: Option<f64>,
    /// Costate boundary residual at `b`; present when `x(b)` is free.
    pub trans_b: Option<f64>,
    /// Max absolute value over all residuals above.
    pub max_abs: f64,
    /// Newton iterations spent (0 for externally supplied candidates).
    pub newton_iters: usize,
    /// The stationarity system stayed rank-deficient at the solution: the
    /// extremal belongs to a continuum and the reported one is just the
    /// member the iteration reached. Only computed by `solve`.
    pub degenerate_family: bool,
}

/// A solved extremal triple.
#[derive(Debug, Clone)]
pub struct ControlExtremal {
    pub x: GridFunction,
    /// ρ-composed control samples `w_i = u(ρ(t_i))`, κ-aligned.
    pub w: KappaGrid,
    /// Costate trajectory on every grid point.
    pub p: GridFunction,
    pub objective: f64,
    pub report: ControlReport,
    /// Whether `|1 − ν·g_x| > 1e−10` held at every κ-point of the solution.
    pub regressivity_ok: bool,
}

/// Per-point margins `|1 − ν(t)·g_x(t)|` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressivityCheck {
    pub ok: bool,
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedMinimum,
    CertifiedMaximum,
    Inconclusive,
}

/// Outcome of sampling-based convexity certification. This is evidence, not
/// proof: it records how the box around the trajectory was sampled and the
/// extreme Hessian eigenvalues seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    /// Random samples drawn per κ-point.
    pub samples_per_point: usize,
    pub seed: u64,
    /// Half-widths of the sampling box around the trajectory, per
    /// coordinate (x, u, z, s): 1 plus 10% of the trajectory range.
    pub box_halfwidths: [f64; 4],
    /// Smallest eigenvalue seen over all sampled Hessians of f and g.
    pub min_eigenvalue: f64,
    /// Largest eigenvalue seen over all sampled Hessians of f and g.
    pub max_eigenvalue: f64,
    /// Smallest costate value along the trajectory.
    pub min_costate: f64,
    /// Whether any sampled Hessian of the dynamics was nonzero. When the
    /// dynamics are affine in (x, u, z, s), the costate sign cannot affect
    /// the Hamiltonian's convexity and is not required.
    pub g_is_nonlinear: bool,
    /// False when sampling aborted on an expression domain error (the
    /// verdict is then `Inconclusive`).
    pub sampling_complete: bool,
}

impl ControlProblem {
    pub fn new(
        integrand: Expression,
        dynamics: Expression,
        ts: TimeScale,
        at_a: EndpointCondition,
        at_b: EndpointCondition,
        params: Params,
    ) -> Result<ControlProblem, ProblemError> {
        validate_expression(&integrand, "control", "integrand", Var::V, 'v', &params)?;
        validate_expression(&dynamics, "control", "dynamics", Var::V, 'v', &params)?;
        validate_endpoints(&at_a, &at_b)?;
        Ok(ControlProblem {
            integrand,
            dynamics,
            ts,
            at_a,
            at_b,
            params,
        })
    }

    pub fn integrand(&self) -> &Expression {
        &self.integrand
    }

    pub fn dynamics(&self) -> &Expression {
        &self.dynamics
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

    fn check_aligned(&self, ts: &TimeScale) -> Result<(), ControlEvalError> {
        if ts == &self.ts {
            Ok(())
        } else {
            Err(ControlEvalError::Misaligned)
        }
    }

    /// (f, g) values and partials at every κ-point for the candidate
    /// `(xs, ws)`; `xs` spans the whole grid, `ws` the κ-points.
    fn kappa_sens(&self, xs: &[f64], ws: &[f64]) -> Result<Vec<(SensValue, SensValue)>, EvalError> {
        let pts = self.ts.points();
        let m = pts.len();
        let (z, s) = (xs[0], xs[m - 1]);
        (0..m - 1)
            .map(|i| {
                let at = EvalPoint {
                    t: pts[i + 1],
                    x: xs[i],
                    v: ws[i],
                    z,
                    s,
                };
                Ok((
                    self.integrand.eval_with_sens(&at, &self.params)?,
                    self.dynamics.eval_with_sens(&at, &self.params)?,
                ))
            })
            .collect()
    }

    /// `Σ ν·f` along a candidate pair.
    pub fn evaluate_objective(
        &self,
        x: &GridFunction,
        w: &KappaGrid,
    ) -> Result<f64, ControlEvalError> {
        self.check_aligned(x.ts())?;
        self.check_aligned(w.ts())?;
        let sens = self.kappa_sens(x.values(), w.values())?;
        let mut acc = CompensatedSum::new();
        for (i, (f, _)) in sens.iter().enumerate() {
            acc.add(self.ts.nu_at_kappa(i) * f.value);
        }
        Ok(acc.total())
    }

    /// The three κ-pointwise residual families (state equation, costate
    /// equation, stationarity) for an externally supplied triple.
    pub fn hamiltonian_residuals(
        &self,
        x: &GridFunction,
        w: &KappaGrid,
        p: &GridFunction,
    ) -> Result<ResidualTriple, ControlEvalError> {
        self.check_aligned(x.ts())?;
        self.check_aligned(w.ts())?;
        self.check_aligned(p.ts())?;
        let sens = self.kappa_sens(x.values(), w.values())?;
        Ok(self.pointwise_residuals(x.values(), p.values(), &sens))
    }

    fn pointwise_residuals(
        &self,
        xs: &[f64],
        ps: &[f64],
        sens: &[(SensValue, SensValue)],
    ) -> ResidualTriple {
        let k = sens.len();
        let mut r1 = Vec::with_capacity(k);
        let mut r2 = Vec::with_capacity(k);
        let mut r3 = Vec::with_capacity(k);
        for (i, (f, g)) in sens.iter().enumerate() {
            let nu = self.ts.nu_at_kappa(i);
            r1.push((xs[i + 1] - xs[i]) / nu - g.value);
            r2.push((ps[i + 1] - ps[i]) / nu + f.d_x() + ps[i + 1] * g.d_x());
            r3.push(f.d_u() + ps[i + 1] * g.d_u());
        }
        (r1, r2, r3)
    }

    /// Costate boundary residuals `p(a) + ∫H_z ∇t` and `p(b) − ∫H_s ∇t` for
    /// the free endpoints.
    pub fn transversality_costate(
        &self,
        x: &GridFunction,
        w: &KappaGrid,
        p: &GridFunction,
    ) -> Result<(Option<f64>, Option<f64>), ControlEvalError> {
        self.check_aligned(x.ts())?;
        self.check_aligned(w.ts())?;
        self.check_aligned(p.ts())?;
        let sens = self.kappa_sens(x.values(), w.values())?;
        Ok(self.trans_from_sens(p.values(), &sens))
    }

    fn trans_from_sens(
        &self,
        ps: &[f64],
        sens: &[(SensValue, SensValue)],
    ) -> (Option<f64>, Option<f64>) {
        let trans_a = self.at_a.is_free().then(|| {
            let mut acc = CompensatedSum::new();
            for (i, (f, g)) in sens.iter().enumerate() {
                acc.add(self.ts.nu_at_kappa(i) * (f.d_z() + ps[i + 1] * g.d_z()));
            }
            ps[0] + acc.total()
        });
        let trans_b = self.at_b.is_free().then(|| {
            let mut acc = CompensatedSum::new();
            for (i, (f, g)) in sens.iter().enumerate() {
                acc.add(self.ts.nu_at_kappa(i) * (f.d_s() + ps[i + 1] * g.d_s()));
            }
            ps[ps.len() - 1] - acc.total()
        });
        (trans_a, trans_b)
    }

    fn assemble_residuals(&self, xs: &[f64], ws: &[f64], ps: &[f64]) -> Result<Vec<f64>, EvalError> {
        let sens = self.kappa_sens(xs, ws)?;
        let (r1, r2, r3) = self.pointwise_residuals(xs, ps, &sens);
        let (ta, tb) = self.trans_from_sens(ps, &sens);
        let mut out = r1;
        out.extend(r2);
        out.extend(r3);
        out.extend(ta);
        out.extend(tb);
        Ok(out)
    }

    /// Residual report for an externally supplied triple.
    pub fn residual_report(
        &self,
        x: &GridFunction,
        w: &KappaGrid,
        p: &GridFunction,
    ) -> Result<ControlReport, ControlEvalError> {
        let (r1, r2, r3) = self.hamiltonian_residuals(x, w, p)?;
        let sens = self.kappa_sens(x.values(), w.values())?;
        let (trans_a, trans_b) = self.trans_from_sens(p.values(), &sens);
        Ok(build_report(r1, r2, r3, trans_a, trans_b, 0, false))
    }

    /// `|1 − ν(t)·g_x| > 1e−10` at every κ-point along the candidate. This
    /// is the solvability margin of the backward costate recursion.
    pub fn check_regressivity(
        &self,
        x: &GridFunction,
        w: &KappaGrid,
    ) -> Result<RegressivityCheck, ControlEvalError> {
        self.check_aligned(x.ts())?;
        self.check_aligned(w.ts())?;
        let sens = self.kappa_sens(x.values(), w.values())?;
        let margins: Vec<f64> = sens
            .iter()
            .enumerate()
            .map(|(i, (_, g))| (1.0 - self.ts.nu_at_kappa(i) * g.d_x()).abs())
            .collect();
        let ok = margins.iter().all(|&m| m > REGRESSIVITY_TOL);
        Ok(RegressivityCheck { ok, margins })
    }

    /// Integrates the state equation forward from `x(a) = x_a` under the
    /// control samples `w`. The endpoint value `x(b)` also feeds back into
    /// the dynamics (the `s` slot), so it is resolved by fixed-point
    /// iteration; the result satisfies the state equation to roughly 1e−13.
    pub fn integrate_dynamics(
        &self,
        w: &KappaGrid,
        x_a: f64,
    ) -> Result<GridFunction, ControlEvalError> {
        self.check_aligned(w.ts())?;
        let pts = self.ts.points();
        let m = pts.len();
        let mut s = x_a;
        for _ in 0..200 {
            let mut xs = Vec::with_capacity(m);
            xs.push(x_a);
            for i in 0..m - 1 {
                let at = EvalPoint {
                    t: pts[i + 1],
                    x: xs[i],
                    v: w.values()[i],
                    z: x_a,
                    s,
                };
                let gv = self.dynamics.eval(&at, &self.params)?;
                xs.push(xs[i] + self.ts.nu_at_kappa(i) * gv);
            }
            let s_new = xs[m - 1];
            if (s_new - s).abs() <= 1e-13 * s_new.abs().max(1.0) {
                return GridFunction::new(self.ts.clone(), xs)
                    .map_err(|_| ControlEvalError::ImplicitEndpoint);
            }
            s = s_new;
        }
        Err(ControlEvalError::ImplicitEndpoint)
    }

    /// Solves the Hamiltonian stationarity system by damped Newton
    /// iteration. Unknowns are the non-fixed state values, all κ control
    /// samples, and the full costate; the initial guess is an affine state,
    /// zero control, zero costate. Rank-deficient systems fall back to
    /// minimum-norm steps and set `degenerate_family`.
    pub fn solve(&self, opts: &SolverOptions) -> Result<ControlExtremal, SolverError> {
        let m = self.ts.len();
        if m < 3 {
            return Err(SolverError::TooFewPoints { needed: 3, got: m });
        }
        let k = m - 1;
        let pts = self.ts.points();
        let (a, b) = (pts[0], pts[m - 1]);
        let ga = self.at_a.fixed_value().unwrap_or(0.0);
        let gb = self.at_b.fixed_value().unwrap_or(1.0);
        let x_template: Vec<f64> = pts
            .iter()
            .map(|&t| ga + (gb - ga) * (t - a) / (b - a))
            .collect();
        let free_idx: Vec<usize> = (0..m)
            .filter(|&i| (i != 0 || self.at_a.is_free()) && (i != m - 1 || self.at_b.is_free()))
            .collect();
        let nx = free_idx.len();

        let mut u0: Vec<f64> = free_idx.iter().map(|&i| x_template[i]).collect();
        u0.resize(nx + k + m, 0.0); // w ≡ 0, p ≡ 0

        let unpack = |u: &[f64]| {
            let mut xs = x_template.clone();
            for (j, &i) in free_idx.iter().enumerate() {
                xs[i] = u[j];
            }
            (xs, u[nx..nx + k].to_vec(), u[nx + k..].to_vec())
        };
        let residual = |u: &[f64]| {
            let (xs, ws, ps) = unpack(u);
            self.assemble_residuals(&xs, &ws, &ps)
        };
        let outcome = newton_solve(&residual, u0, opts, SingularPolicy::MinNormStep)?;

        let (xs, ws, ps) = unpack(&outcome.solution);
        let sens = self.kappa_sens(&xs, &ws).map_err(SolverError::Eval)?;
        let (r1, r2, r3) = self.pointwise_residuals(&xs, &ps, &sens);
        let (trans_a, trans_b) = self.trans_from_sens(&ps, &sens);
        let mut objective = CompensatedSum::new();
        for (i, (f, _)) in sens.iter().enumerate() {
            objective.add(self.ts.nu_at_kappa(i) * f.value);
        }
        let margins_ok = sens
            .iter()
            .enumerate()
            .all(|(i, (_, g))| (1.0 - self.ts.nu_at_kappa(i) * g.d_x()).abs() > REGRESSIVITY_TOL);

        let x = GridFunction::new(self.ts.clone(), xs).expect("aligned finite state");
        let w = KappaGrid::new(self.ts.clone(), ws).expect("aligned finite control");
        let p = GridFunction::new(self.ts.clone(), ps).expect("aligned finite costate");
        Ok(ControlExtremal {
            x,
            w,
            p,
            objective: objective.total(),
            report: build_report(
                r1,
                r2,
                r3,
                trans_a,
                trans_b,
                outcome.iters,
                outcome.degenerate,
            ),
            regressivity_ok: margins_ok,
        })
    }

    /// Samples Hessians of `f` and `g` in a box around the solved
    /// trajectory and checks the convexity (resp. concavity) hypotheses for
    /// global optimality, including the costate sign where it matters. The
    /// verdict is evidence from `samples` draws per κ-point, reproducible
    /// from `seed`; it is not a proof.
    pub fn certify_convexity(
        &self,
        sol: &ControlExtremal,
        samples: usize,
        seed: u64,
    ) -> Certificate {
        let pts = self.ts.points();
        let m = pts.len();
        let xs = sol.x.values();
        let ws = sol.w.values();
        let (z, s) = (xs[0], xs[m - 1]);

        let range = |vals: &[f64]| -> f64 {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        };
        let box_halfwidths = [
            1.0 + 0.1 * range(&xs[..m - 1]),
            1.0 + 0.1 * range(ws),
            1.0,
            1.0,
        ];

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        let mut min_eig_f = f64::INFINITY;
        let mut max_eig_f = f64::NEG_INFINITY;
        let mut min_eig_g = f64::INFINITY;
        let mut max_eig_g = f64::NEG_INFINITY;
        let mut complete = true;

        'sampling: for i in 0..m - 1 {
            let center = [xs[i], ws[i], z, s];
            for _ in 0..samples {
                let mut draw = [0.0; 4];
                for (c, d) in draw.iter_mut().enumerate() {
                    *d = center[c] + rng.random_range(-1.0..=1.0) * box_halfwidths[c];
                }
                let at = EvalPoint {
                    t: pts[i + 1],
                    x: draw[0],
                    v: draw[1],
                    z: draw[2],
                    s: draw[3],
                };
                let hf = self.integrand.sample_hessian(&at, &self.params);
                let hg = self.dynamics.sample_hessian(&at, &self.params);
                let (Ok(hf), Ok(hg)) = (hf, hg) else {
                    complete = false;
                    break 'sampling;
                };
                for (h, lo, hi) in [
                    (hf, &mut min_eig_f, &mut max_eig_f),
                    (hg, &mut min_eig_g, &mut max_eig_g),
                ] {
                    let mat = Matrix4::from_fn(|r, c| h[r][c]);
                    for ev in mat.symmetric_eigen().eigenvalues.iter() {
                        *lo = lo.min(*ev);
                        *hi = hi.max(*ev);
                        min_eig = min_eig.min(*ev);
                        max_eig = max_eig.max(*ev);
                    }
                }
            }
        }

        let min_costate = sol
            .p
            .values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let g_is_nonlinear = min_eig_g < -EIGENVALUE_TOL || max_eig_g > EIGENVALUE_TOL;
        let costate_ok = !g_is_nonlinear || min_costate >= -COSTATE_TOL;
        let verdict = if !complete || samples == 0 {
            Verdict::Inconclusive
        } else if min_eig_f >= -EIGENVALUE_TOL && min_eig_g >= -EIGENVALUE_TOL && costate_ok {
            Verdict::CertifiedMinimum
        } else if max_eig_f <= EIGENVALUE_TOL && max_eig_g <= EIGENVALUE_TOL && costate_ok {
            Verdict::CertifiedMaximum
        } else {
            Verdict::Inconclusive
        };
        Certificate {
            verdict,
            samples_per_point: samples,
            seed,
            box_halfwidths,
            min_eigenvalue: min_eig,
            max_eigenvalue: max_eig,
            min_costate,
            g_is_nonlinear,
            sampling_complete: complete,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    trans_a: Option<f64>,
    trans_b: Option<f64>,
    newton_iters: usize,
    degenerate_family: bool,
) -> ControlReport {
    let boundary: Vec<f64> = trans_a.iter().chain(trans_b.iter()).copied().collect();
    let max_abs = crate::varsolve::build_max_abs(&[&r1[..], &r2[..], &r3[..], &boundary[..]]);
    ControlReport {
        r1,
        r2,
        r3,
        trans_a,
        trans_b,
        max_abs,
        newton_iters,
        degenerate_family,
    }
}
