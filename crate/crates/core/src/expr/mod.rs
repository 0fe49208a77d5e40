//! A small expression language for integrands and dynamics.
//!
//! Expressions are scalar functions of the fixed variable set `{t, x, v, u,
//! z, s}` plus named parameters. The names mirror the arguments of the
//! problem data: `t` is time, `x` the state sample `x(ρ(t))`, `v` the nabla
//! derivative `x^∇(t)`, `u` the control sample `u(ρ(t))`, and `z`, `s` the
//! endpoint values `x(a)`, `x(b)`. `v` and `u` are aliases for the same
//! evaluation slot; which one is legal depends on the problem kind and is
//! enforced by the problem constructors, not here.
//!
//! Evaluation returns the value together with exact first partials with
//! respect to `(x, v|u, z, s)`, propagated forward through the tree. `t` is
//! never differentiated. Second-order information is sampled by central
//! finite differences of those exact partials.

mod eval;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

pub use eval::{EvalError, EvalPoint, SensValue};
pub use parse::ParseError;

/// Parameter bindings for evaluation. Ordered map so iteration (and any
/// derived output) is deterministic.
pub type Params = BTreeMap<String, f64>;

/// The evaluation variables. `V` and `U` are distinct names sharing one
/// sensitivity slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    V,
    U,
    Z,
    S,
}

impl Var {
    pub(crate) fn from_name(name: &str) -> Option<Var> {
        match name {
            "t" => Some(Var::T),
            "x" => Some(Var::X),
            "v" => Some(Var::V),
            "u" => Some(Var::U),
            "z" => Some(Var::Z),
            "s" => Some(Var::S),
            _ => None,
        }
    }

    /// Source-level spelling of the variable.
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::V => "v",
            Var::U => "u",
            Var::Z => "z",
            Var::S => "s",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Var::T => 1,
            Var::X => 2,
            Var::V => 4,
            Var::U => 8,
            Var::Z => 16,
            Var::S => 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
}

/// A parsed, immutable expression. Cheap to clone; evaluation is pure.
#[derive(Debug, Clone)]
pub struct Expression {
    root: Node,
    params: Vec<String>,
    var_mask: u8,
}

impl PartialEq for Expression {
    /// Structural equality of the syntax trees.
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expression {
    /// Parses source text. See the grammar notes on [`parse`](Self::parse)
    /// errors: precedence is `^` (right-assoc), then unary minus, then
    /// `*` `/`, then `+` `-`.
    pub fn parse(source: &str) -> Result<Expression, ParseError> {
        let root = parse::parse(source)?;
        let mut params = Vec::new();
        let mut var_mask = 0u8;
        collect(&root, &mut params, &mut var_mask);
        params.sort();
        params.dedup();
        Ok(Expression {
            root,
            params,
            var_mask,
        })
    }

    /// Names of the free parameters (identifiers outside the variable set),
    /// sorted and de-duplicated.
    pub fn parameters(&self) -> &[String] {
        &self.params
    }

    /// Whether the variable occurs anywhere in the expression.
    pub fn uses(&self, var: Var) -> bool {
        self.var_mask & var.bit() != 0
    }

    /// Value only; partials discarded.
    pub fn eval(&self, at: &EvalPoint, params: &Params) -> Result<f64, EvalError> {
        Ok(self.eval_with_sens(at, params)?.value)
    }

    /// Value plus exact first partials with respect to `(x, v|u, z, s)`.
    pub fn eval_with_sens(&self, at: &EvalPoint, params: &Params) -> Result<SensValue, EvalError> {
        eval::eval(&self.root, at, params)
    }

    /// Sampled Hessian over `(x, v|u, z, s)`: central finite differences of
    /// the exact gradient, symmetrized as `(H + Hᵀ)/2`. Exact on quadratics
    /// up to rounding.
    pub fn sample_hessian(
        &self,
        at: &EvalPoint,
        params: &Params,
    ) -> Result<[[f64; 4]; 4], EvalError> {
        eval::sample_hessian(&self.root, at, params)
    }
}

fn collect(node: &Node, params: &mut Vec<String>, var_mask: &mut u8) {
    match node {
        Node::Num(_) => {}
        Node::Var(v) => *var_mask |= v.bit(),
        Node::Param(name) => params.push(name.clone()),
        Node::Neg(a) | Node::Call(_, a) => collect(a, params, var_mask),
        Node::Bin(_, a, b) => {
            collect(a, params, var_mask);
            collect(b, params, var_mask);
        }
    }
}

// Printing uses minimal parentheses so that re-parsing the output yields a
// structurally identical tree. Precedence levels: + - (1), * / (2), unary
// minus (3), ^ (4), atoms (5).

fn prec(node: &Node) -> u8 {
    match node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Num(n) if *n < 0.0 => 0, // cannot arise from parsing; print defensively
        Node::Num(_) | Node::Var(_) | Node::Param(_) | Node::Call(..) => 5,
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, min: u8) -> fmt::Result {
    let p = prec(node);
    if p < min {
        write!(f, "(")?;
        write_node(f, node, 0)?;
        return write!(f, ")");
    }
    match node {
        Node::Num(n) => write!(f, "{n}"),
        Node::Var(v) => write!(f, "{}", v.name()),
        Node::Param(name) => write!(f, "{name}"),
        Node::Neg(a) => {
            write!(f, "-")?;
            // operand must bind tighter than unary minus, except ^ which
            // outranks it: -x^2 prints without parens and means -(x^2)
            write_node(f, a, p + 1)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a, 0)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            // Left-associative ops need the right child strictly tighter:
            // `a + (b - c)` and `a * (b / c)` must keep their parentheses
            // because +,- and *,/ share precedence levels.
            let (sym, la, ra) = match op {
                BinOp::Add => ("+", p, p + 1),
                BinOp::Sub => ("-", p, p + 1),
                BinOp::Mul => ("*", p, p + 1),
                BinOp::Div => ("/", p, p + 1),
                BinOp::Pow => ("^", p + 1, p), // right-associative
            };
            write_node(f, a, la)?;
            write!(f, " {sym} ")?;
            write_node(f, b, ra)
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, 0)
    }
}
