//! Finite time scales and their structural operators.
//!
//! A time scale is represented here as a finite, strictly increasing set of
//! real points. The backward jump `ρ`, forward jump `σ`, backward graininess
//! `ν(t) = t − ρ(t)`, and the κ-restriction (the scale minus its minimum) are
//! all exact queries on that point set. The classical scales of interest are
//! covered by constructors:
//!
//! * [`TimeScale::uniform`] — `{a + i·(b−a)/n}`, the `hℤ` pattern; for large
//!   `n` it approximates the continuum,
//! * [`TimeScale::qscale`] — `{q^k}` for `q > 1`, the quantum-calculus scale,
//! * [`TimeScale::from_points`] / [`TimeScale::union_of`] — arbitrary finite
//!   sets such as `[−1, 4] ∪ ℕ` sampled at desk scale.
//!
//! Values are unit-agnostic. Membership is exact equality against the stored
//! points; constructors deduplicate within `1e-12` and reject degenerate gaps
//! below that threshold.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two points closer than this are merged at construction; surviving gaps
/// below it are rejected as degenerate graininess.
pub const MIN_GAP: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum TimeScaleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {0} is not a member of the time scale")]
    NotAMember(f64),
}

/// A finite, strictly increasing set of time points.
///
/// Immutable after construction and cheap to clone (the point set is shared).
#[derive(Debug, Clone)]
pub struct TimeScale {
    points: Arc<[f64]>,
}

impl PartialEq for TimeScale {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points == other.points
    }
}

impl TimeScale {
    /// Builds a time scale from an arbitrary point list. The list is sorted,
    /// de-duplicated within [`MIN_GAP`], and must leave at least two finite
    /// points.
    pub fn from_points(mut points: Vec<f64>) -> Result<Self, TimeScaleError> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(TimeScaleError::InvalidArgument(
                "time scale points must be finite".into(),
            ));
        }
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite points compare"));
        let mut merged: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match merged.last() {
                Some(&last) if p - last <= MIN_GAP => {}
                _ => merged.push(p),
            }
        }
        Self::from_sorted(merged)
    }

    /// `{a + i·(b−a)/n : i = 0..n}` — a uniform grid with `n` steps.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self, TimeScaleError> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(TimeScaleError::InvalidArgument(format!(
                "uniform scale needs finite a < b, got a={a}, b={b}"
            )));
        }
        if n == 0 {
            return Err(TimeScaleError::InvalidArgument(
                "uniform scale needs at least one step".into(),
            ));
        }
        let h = (b - a) / n as f64;
        let mut points: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
        points[n] = b;
        Self::from_sorted(points)
    }

    /// `{q^k : k = kmin..kmax}` for `q > 1`.
    pub fn qscale(q: f64, kmin: i32, kmax: i32) -> Result<Self, TimeScaleError> {
        if !q.is_finite() || q <= 1.0 {
            return Err(TimeScaleError::InvalidArgument(format!(
                "q-scale needs q > 1, got q={q}"
            )));
        }
        if kmin > kmax {
            return Err(TimeScaleError::InvalidArgument(format!(
                "q-scale needs kmin <= kmax, got {kmin} > {kmax}"
            )));
        }
        let points: Vec<f64> = (kmin..=kmax).map(|k| q.powi(k)).collect();
        Self::from_sorted(points)
    }

    /// Union of pieces: concatenates, re-sorts, and de-duplicates.
    pub fn union_of<I: IntoIterator<Item = TimeScale>>(pieces: I) -> Result<Self, TimeScaleError> {
        let mut points = Vec::new();
        for piece in pieces {
            points.extend_from_slice(piece.points());
        }
        Self::from_points(points)
    }

    fn from_sorted(points: Vec<f64>) -> Result<Self, TimeScaleError> {
        if points.len() < 2 {
            return Err(TimeScaleError::InvalidArgument(format!(
                "a time scale needs at least 2 distinct points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(TimeScaleError::InvalidArgument(
                "time scale points must be finite".into(),
            ));
        }
        for w in points.windows(2) {
            if w[1] - w[0] < MIN_GAP {
                return Err(TimeScaleError::InvalidArgument(format!(
                    "degenerate graininess: gap {:e} between {} and {} is below {MIN_GAP:e}",
                    w[1] - w[0],
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Self {
            points: points.into(),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least two points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("nonempty")
    }

    /// Index of a member point, by exact equality.
    pub fn index_of(&self, t: f64) -> Result<usize, TimeScaleError> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).expect("finite"))
            .map_err(|_| TimeScaleError::NotAMember(t))
    }

    /// Backward jump: the previous point, with `ρ(min) = min`.
    pub fn rho(&self, t: f64) -> Result<f64, TimeScaleError> {
        let i = self.index_of(t)?;
        Ok(self.points[i.saturating_sub(1)])
    }

    /// Forward jump: the next point, with `σ(max) = max`.
    pub fn sigma(&self, t: f64) -> Result<f64, TimeScaleError> {
        let i = self.index_of(t)?;
        Ok(self.points[(i + 1).min(self.points.len() - 1)])
    }

    /// Backward graininess `ν(t) = t − ρ(t)`; zero only at the minimum.
    pub fn nu(&self, t: f64) -> Result<f64, TimeScaleError> {
        Ok(t - self.rho(t)?)
    }

    /// The κ-set: every point except the (right-scattered) minimum.
    pub fn kappa_points(&self) -> &[f64] {
        &self.points[1..]
    }

    /// Graininess at the κ-point with index `i` (0-based into
    /// [`kappa_points`](Self::kappa_points)).
    pub(crate) fn nu_at_kappa(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    /// The sub-scale on `[a, b]`; both ends must be member points.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self, TimeScaleError> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        if ia >= ib {
            return Err(TimeScaleError::InvalidArgument(format!(
                "restriction needs a < b, got a={a}, b={b}"
            )));
        }
        Self::from_sorted(self.points[ia..=ib].to_vec())
    }
}

/// Serializable descriptor for building a [`TimeScale`].
///
/// ```json
/// {"type":"uniform","a":0,"b":1,"n":10}
/// {"type":"qscale","q":2,"kmin":0,"kmax":3}
/// {"type":"points","values":[0,0.5,1]}
/// {"type":"union","pieces":[...]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TimeScaleSpec {
    Uniform { a: f64, b: f64, n: usize },
    Qscale { q: f64, kmin: i32, kmax: i32 },
    Points { values: Vec<f64> },
    Union { pieces: Vec<TimeScaleSpec> },
}

impl TimeScaleSpec {
    pub fn build(&self) -> Result<TimeScale, TimeScaleError> {
        match self {
            TimeScaleSpec::Uniform { a, b, n } => TimeScale::uniform(*a, *b, *n),
            TimeScaleSpec::Qscale { q, kmin, kmax } => TimeScale::qscale(*q, *kmin, *kmax),
            TimeScaleSpec::Points { values } => TimeScale::from_points(values.clone()),
            TimeScaleSpec::Union { pieces } => {
                let built: Result<Vec<_>, _> = pieces.iter().map(|p| p.build()).collect();
                TimeScale::union_of(built?)
            }
        }
    }
}
