//! Evaluation with forward-propagated first-order sensitivities.
//!
//! Every node carries a value and a fixed 4-slot gradient over
//! `(x, v|u, z, s)`; `t` and parameters are constants of the
//! differentiation. The propagation is the chain rule on the tree, so the
//! partials are exact up to floating-point rounding.

use thiserror::Error;

use super::{BinOp, Func, Node, Params};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("parameter '{0}' is not bound")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Where to evaluate. The `v` slot holds `x^∇(t)` for Lagrange integrands
/// and `u(ρ(t))` for control integrands/dynamics; the expression variables
/// `v` and `u` both read it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub t: f64,
    pub x: f64,
    pub v: f64,
    pub z: f64,
    pub s: f64,
}

impl EvalPoint {
    pub fn new(t: f64, x: f64, v: f64, z: f64, s: f64) -> EvalPoint {
        EvalPoint { t, x, v, z, s }
    }
}

/// Value and exact first partials with respect to `(x, v|u, z, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensValue {
    pub value: f64,
    /// Gradient slots in order x, v|u, z, s.
    pub grad: [f64; 4],
}

impl SensValue {
    fn constant(value: f64) -> SensValue {
        SensValue {
            value,
            grad: [0.0; 4],
        }
    }

    pub fn d_x(&self) -> f64 {
        self.grad[0]
    }

    /// Partial with respect to the shared v|u slot, under its Lagrange name.
    pub fn d_v(&self) -> f64 {
        self.grad[1]
    }

    /// Partial with respect to the shared v|u slot, under its control name.
    pub fn d_u(&self) -> f64 {
        self.grad[1]
    }

    pub fn d_z(&self) -> f64 {
        self.grad[2]
    }

    pub fn d_s(&self) -> f64 {
        self.grad[3]
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }

    fn map2(a: &SensValue, b: &SensValue, value: f64, df_da: f64, df_db: f64) -> SensValue {
        SensValue {
            value,
            grad: std::array::from_fn(|i| df_da * a.grad[i] + df_db * b.grad[i]),
        }
    }

    fn map1(a: &SensValue, value: f64, df_da: f64) -> SensValue {
        SensValue {
            value,
            grad: std::array::from_fn(|i| df_da * a.grad[i]),
        }
    }
}

pub(super) fn eval(node: &Node, at: &EvalPoint, params: &Params) -> Result<SensValue, EvalError> {
    let out = eval_node(node, at, params)?;
    if !out.is_finite() {
        return Err(EvalError::Domain(
            "evaluation produced a non-finite value".into(),
        ));
    }
    Ok(out)
}

fn eval_node(node: &Node, at: &EvalPoint, params: &Params) -> Result<SensValue, EvalError> {
    use super::Var;
    Ok(match node {
        Node::Num(n) => SensValue::constant(*n),
        Node::Var(Var::T) => SensValue::constant(at.t),
        Node::Var(Var::X) => SensValue {
            value: at.x,
            grad: [1.0, 0.0, 0.0, 0.0],
        },
        Node::Var(Var::V) | Node::Var(Var::U) => SensValue {
            value: at.v,
            grad: [0.0, 1.0, 0.0, 0.0],
        },
        Node::Var(Var::Z) => SensValue {
            value: at.z,
            grad: [0.0, 0.0, 1.0, 0.0],
        },
        Node::Var(Var::S) => SensValue {
            value: at.s,
            grad: [0.0, 0.0, 0.0, 1.0],
        },
        Node::Param(name) => SensValue::constant(
            *params
                .get(name)
                .ok_or_else(|| EvalError::UnboundParameter(name.clone()))?,
        ),
        Node::Neg(a) => {
            let a = eval_node(a, at, params)?;
            SensValue::map1(&a, -a.value, -1.0)
        }
        Node::Call(func, a) => {
            let a = eval_node(a, at, params)?;
            apply_func(*func, &a)?
        }
        Node::Bin(op, a, b) => {
            let a = eval_node(a, at, params)?;
            let b = eval_node(b, at, params)?;
            apply_bin(*op, &a, &b)?
        }
    })
}

fn apply_func(func: Func, a: &SensValue) -> Result<SensValue, EvalError> {
    Ok(match func {
        Func::Sin => SensValue::map1(a, a.value.sin(), a.value.cos()),
        Func::Cos => SensValue::map1(a, a.value.cos(), -a.value.sin()),
        Func::Exp => {
            let e = a.value.exp();
            SensValue::map1(a, e, e)
        }
        Func::Ln => {
            if a.value <= 0.0 {
                return Err(EvalError::Domain(format!(
                    "ln of non-positive value {}",
                    a.value
                )));
            }
            SensValue::map1(a, a.value.ln(), 1.0 / a.value)
        }
        Func::Sqrt => {
            if a.value < 0.0 {
                return Err(EvalError::Domain(format!(
                    "sqrt of negative value {}",
                    a.value
                )));
            }
            let r = a.value.sqrt();
            if a.value == 0.0 {
                // finite only when the argument does not vary
                if a.grad != [0.0; 4] {
                    return Err(EvalError::Domain(
                        "sqrt has an unbounded derivative at zero".into(),
                    ));
                }
                SensValue::constant(0.0)
            } else {
                SensValue::map1(a, r, 0.5 / r)
            }
        }
    })
}

fn apply_bin(op: BinOp, a: &SensValue, b: &SensValue) -> Result<SensValue, EvalError> {
    Ok(match op {
        BinOp::Add => SensValue::map2(a, b, a.value + b.value, 1.0, 1.0),
        BinOp::Sub => SensValue::map2(a, b, a.value - b.value, 1.0, -1.0),
        BinOp::Mul => SensValue::map2(a, b, a.value * b.value, b.value, a.value),
        BinOp::Div => {
            if b.value == 0.0 {
                return Err(EvalError::Domain("division by zero".into()));
            }
            SensValue::map2(
                a,
                b,
                a.value / b.value,
                1.0 / b.value,
                -a.value / (b.value * b.value),
            )
        }
        BinOp::Pow => pow(a, b)?,
    })
}

/// `a ^ b`. A constant integer exponent with |n| ≤ 8 is computed by repeated
/// multiplication, which keeps negative bases legal (`(-2)^3 = -8`). Every
/// other case goes through `exp(b·ln a)` and needs a positive base.
fn pow(a: &SensValue, b: &SensValue) -> Result<SensValue, EvalError> {
    let b_is_const = b.grad == [0.0; 4];
    if b_is_const && b.value.fract() == 0.0 && b.value.abs() <= 8.0 {
        let n = b.value as i32;
        if n == 0 {
            return Ok(SensValue::constant(1.0));
        }
        if n < 0 && a.value == 0.0 {
            return Err(EvalError::Domain(
                "zero base with a negative exponent".into(),
            ));
        }
        let value = a.value.powi(n);
        let dcoef = f64::from(n) * a.value.powi(n - 1);
        return Ok(SensValue::map1(a, value, dcoef));
    }
    if a.value <= 0.0 {
        return Err(EvalError::Domain(format!(
            "power with non-positive base {}: only constant integer exponents of magnitude ≤ 8 are defined there",
            a.value
        )));
    }
    let value = a.value.powf(b.value);
    let ln_a = a.value.ln();
    Ok(SensValue {
        value,
        grad: std::array::from_fn(|i| {
            value * (b.grad[i] * ln_a + b.value * a.grad[i] / a.value)
        }),
    })
}

const HESS_STEP_SCALE: f64 = 1e-4;

pub(super) fn sample_hessian(
    node: &Node,
    at: &EvalPoint,
    params: &Params,
) -> Result<[[f64; 4]; 4], EvalError> {
    let coords = [at.x, at.v, at.z, at.s];
    let mut h = [[0.0; 4]; 4];
    for j in 0..4 {
        let step = HESS_STEP_SCALE * coords[j].abs().max(1.0);
        let plus = eval(node, &shifted(at, j, step), params)?.grad;
        let minus = eval(node, &shifted(at, j, -step), params)?.grad;
        for i in 0..4 {
            h[i][j] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    #[allow(clippy::needless_range_loop)] // mirrored (i,j)/(j,i) writes
    for i in 0..4 {
        for j in 0..i {
            let m = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = m;
            h[j][i] = m;
        }
    }
    Ok(h)
}

fn shifted(at: &EvalPoint, slot: usize, delta: f64) -> EvalPoint {
    let mut p = *at;
    match slot {
        0 => p.x += delta,
        1 => p.v += delta,
        2 => p.z += delta,
        3 => p.s += delta,
        _ => unreachable!("gradient has exactly 4 slots"),
    }
    p
}
