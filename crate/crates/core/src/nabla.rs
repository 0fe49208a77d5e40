//! Backward-difference calculus of grid functions: the nabla derivative,
//! the nabla integral, and ρ-composition.
//!
//! On a finite scale every formula of the calculus is an exact finite
//! expression: the derivative is the backward difference quotient
//! `f^∇(t) = (f(t) − f(ρ(t)))/ν(t)` on κ-points, and the integral is the
//! exact sum `∫_a^b f ∇t = Σ_{t ∈ (a,b]} ν(t)·f(t)`. No quadrature is
//! involved, so the classical identities (reconstruction, product rules,
//! fundamental theorem, integration by parts) hold to rounding error; sums
//! are compensated to keep that true on long grids.

use thiserror::Error;

use crate::timescale::{TimeScale, TimeScaleError};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid has {got} values but the time scale expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid value at index {0} is not finite")]
    NonFinite(usize),
}

/// Neumaier-compensated accumulator: the error of every addition is captured
/// and folded back in at the end.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> CompensatedSum {
        CompensatedSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// A real-valued function sampled on every point of a time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    ts: TimeScale,
    values: Vec<f64>,
}

/// A real-valued function defined only on the κ-points (every point except
/// the scale minimum). This is the natural home of nabla derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaGrid {
    ts: TimeScale,
    values: Vec<f64>,
}

fn check_values(values: &[f64], expected: usize) -> Result<(), GridError> {
    if values.len() != expected {
        return Err(GridError::LengthMismatch {
            expected,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(GridError::NonFinite(i));
    }
    Ok(())
}

impl GridFunction {
    pub fn new(ts: TimeScale, values: Vec<f64>) -> Result<GridFunction, GridError> {
        check_values(&values, ts.len())?;
        Ok(GridFunction { ts, values })
    }

    /// Samples a closure at every point.
    pub fn sample(ts: &TimeScale, f: impl Fn(f64) -> f64) -> Result<GridFunction, GridError> {
        let values: Vec<f64> = ts.points().iter().map(|&t| f(t)).collect();
        GridFunction::new(ts.clone(), values)
    }

    pub fn ts(&self) -> &TimeScale {
        &self.ts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, t: f64) -> Result<f64, TimeScaleError> {
        Ok(self.values[self.ts.index_of(t)?])
    }

    /// Backward difference quotient `(f(t) − f(ρ(t)))/ν(t)` at every κ-point.
    pub fn nabla_derivative(&self) -> KappaGrid {
        let values = (0..self.ts.len() - 1)
            .map(|i| (self.values[i + 1] - self.values[i]) / self.ts.nu_at_kappa(i))
            .collect();
        KappaGrid {
            ts: self.ts.clone(),
            values,
        }
    }

    /// `f ∘ ρ`: shifts every value one point back; the minimum keeps its own
    /// value because ρ fixes it.
    pub fn rho_compose(&self) -> GridFunction {
        let mut values = Vec::with_capacity(self.values.len());
        values.push(self.values[0]);
        values.extend_from_slice(&self.values[..self.values.len() - 1]);
        GridFunction {
            ts: self.ts.clone(),
            values,
        }
    }

    /// Oriented exact integral `Σ_{t ∈ (a,b]} ν(t)·f(t)`; `a = b` gives 0 and
    /// swapping the limits flips the sign.
    pub fn nabla_integral(&self, a: f64, b: f64) -> Result<f64, TimeScaleError> {
        oriented_sum(&self.ts, a, b, |kappa_index| self.values[kappa_index + 1])
    }
}

impl KappaGrid {
    pub fn new(ts: TimeScale, values: Vec<f64>) -> Result<KappaGrid, GridError> {
        check_values(&values, ts.len() - 1)?;
        Ok(KappaGrid { ts, values })
    }

    pub fn ts(&self) -> &TimeScale {
        &self.ts
    }

    /// Values in κ-point order (aligned with `ts.kappa_points()`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a κ-point; `None` at the scale minimum or off-scale times.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        match self.ts.index_of(t) {
            Ok(i) if i >= 1 => Some(self.values[i - 1]),
            _ => None,
        }
    }

    pub fn nabla_integral(&self, a: f64, b: f64) -> Result<f64, TimeScaleError> {
        oriented_sum(&self.ts, a, b, |kappa_index| self.values[kappa_index])
    }
}

fn oriented_sum(
    ts: &TimeScale,
    a: f64,
    b: f64,
    value_at_kappa: impl Fn(usize) -> f64,
) -> Result<f64, TimeScaleError> {
    let ia = ts.index_of(a)?;
    let ib = ts.index_of(b)?;
    if ia == ib {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if ia < ib {
        (ia, ib, 1.0)
    } else {
        (ib, ia, -1.0)
    };
    let mut acc = CompensatedSum::new();
    for i in lo..hi {
        acc.add(ts.nu_at_kappa(i) * value_at_kappa(i));
    }
    Ok(sign * acc.total())
}
