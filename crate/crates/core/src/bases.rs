//! B-spline and Fourier basis systems on a closed interval.
//!
//! A [`BasisSystem`] is immutable once built. Evaluating it at a set of points
//! produces a [`BasisMatrix`] whose entry `(j, k)` is `B_k(t_j)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default spline order (cubic).
pub const DEFAULT_ORDER: usize = 4;

/// Closed interval `[lower, upper]` with `lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || upper - lower <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "domain [{lower}, {upper}] must be finite with positive length"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lower && t <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    BSpline,
    Fourier,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bspline" | "b-spline" | "bsplines" => Ok(Self::BSpline),
            "fourier" => Ok(Self::Fourier),
            other => Err(Error::InvalidConfig(format!("unknown basis kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// Clamped knot vector of length `num_bases + order`.
    BSpline { order: usize, knots: Vec<f64> },
    Fourier { period: f64 },
}

/// A family of `K` basis functions on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    domain: Interval,
    num_bases: usize,
    family: Family,
}

impl BasisSystem {
    /// Clamped B-spline basis with equally spaced interior knots.
    ///
    /// There are `num_bases - order` interior knots; the boundary knots are
    /// repeated `order` times so the first and last basis functions equal one
    /// at the respective endpoints.
    pub fn bspline(domain: Interval, num_bases: usize, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("spline order must be positive".into()));
        }
        if num_bases < order {
            return Err(Error::InvalidConfig(format!(
                "B-spline basis needs K >= order (K = {num_bases}, order = {order})"
            )));
        }
        let interior = num_bases - order;
        let (a, b) = (domain.lower(), domain.upper());
        let mut knots = Vec::with_capacity(num_bases + order);
        knots.extend(std::iter::repeat_n(a, order));
        for j in 1..=interior {
            knots.push(a + domain.length() * (j as f64 / (interior + 1) as f64));
        }
        knots.extend(std::iter::repeat_n(b, order));
        Ok(Self {
            domain,
            num_bases,
            family: Family::BSpline { order, knots },
        })
    }

    /// Fourier basis `(c, sin ωt, cos ωt, sin 2ωt, cos 2ωt, …)` with `ω = 2π/period`.
    ///
    /// Each function has unit L² norm over one period: the constant is
    /// `1/√period` and the trigonometric terms are scaled by `√(2/period)`.
    pub fn fourier(domain: Interval, num_bases: usize, period: f64) -> Result<Self> {
        if num_bases == 0 {
            return Err(Error::InvalidConfig("Fourier basis needs K >= 1".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Fourier period must be positive, got {period}"
            )));
        }
        Ok(Self {
            domain,
            num_bases,
            family: Family::Fourier { period },
        })
    }

    /// Fourier basis whose period is the domain length.
    pub fn fourier_on(domain: Interval, num_bases: usize) -> Result<Self> {
        Self::fourier(domain, num_bases, domain.length())
    }

    pub fn kind(&self) -> BasisKind {
        match self.family {
            Family::BSpline { .. } => BasisKind::BSpline,
            Family::Fourier { .. } => BasisKind::Fourier,
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn num_bases(&self) -> usize {
        self.num_bases
    }

    /// Spline order, `None` for Fourier systems.
    pub fn order(&self) -> Option<usize> {
        match &self.family {
            Family::BSpline { order, .. } => Some(*order),
            Family::Fourier { .. } => None,
        }
    }

    /// Full clamped knot vector, `None` for Fourier systems.
    pub fn knots(&self) -> Option<&[f64]> {
        match &self.family {
            Family::BSpline { knots, .. } => Some(knots),
            Family::Fourier { .. } => None,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.family {
            Family::Fourier { period } => Some(period),
            Family::BSpline { .. } => None,
        }
    }

    /// Values of all `K` basis functions at `t`, written into `out`.
    fn fill_row(&self, t: f64, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.num_bases);
        if !t.is_finite() {
            return Err(Error::Domain(format!("evaluation point {t} is not finite")));
        }
        match &self.family {
            Family::BSpline { order, knots } => {
                if !self.domain.contains(t) {
                    return Err(Error::OutOfDomain {
                        point: t,
                        lower: self.domain.lower(),
                        upper: self.domain.upper(),
                    });
                }
                out.iter_mut().for_each(|v| *v = 0.0);
                let span = find_span(knots, self.num_bases, *order, t);
                let local = cox_de_boor(knots, *order, span, t);
                let first = span + 1 - order;
                out[first..=span].copy_from_slice(&local);
            }
            Family::Fourier { period } => {
                let omega = 2.0 * PI / period;
                let trig_scale = (2.0 / period).sqrt();
                out[0] = 1.0 / period.sqrt();
                for k in 1..self.num_bases {
                    let harmonic = k.div_ceil(2) as f64;
                    let arg = harmonic * omega * t;
                    out[k] = trig_scale * if k % 2 == 1 { arg.sin() } else { arg.cos() };
                }
            }
        }
        Ok(())
    }

    /// Values of all basis functions at a single point.
    pub fn evaluate_at(&self, t: f64) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.num_bases];
        self.fill_row(t, &mut row)?;
        Ok(row)
    }

    /// Evaluation matrix with entry `(j, k) = B_k(points[j])`.
    ///
    /// B-spline systems reject points outside the domain; the right endpoint
    /// takes the left limit, so the last basis function equals one there.
    pub fn evaluate(&self, points: &[f64]) -> Result<BasisMatrix> {
        let k = self.num_bases;
        let mut values = DMatrix::zeros(points.len(), k);
        let mut row = vec![0.0; k];
        for (j, &t) in points.iter().enumerate() {
            self.fill_row(t, &mut row)?;
            for (c, v) in row.iter().enumerate() {
                values[(j, c)] = *v;
            }
        }
        Ok(BasisMatrix {
            values,
            eval_points: points.to_vec(),
        })
    }
}

/// Index `s` of the knot span with `knots[s] <= t < knots[s + 1]`, clamped so
/// that the right endpoint falls into the last non-empty span.
fn find_span(knots: &[f64], num_bases: usize, order: usize, t: f64) -> usize {
    let last = num_bases - 1;
    if t >= knots[last + 1] {
        return last;
    }
    // knots[order - 1..=last + 1] is nondecreasing; binary search the span.
    let (mut lo, mut hi) = (order - 1, last + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if t < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// The `order` nonzero basis values on span `span`, via the triangular
/// Cox–de Boor recursion.
fn cox_de_boor(knots: &[f64], order: usize, span: usize, t: f64) -> Vec<f64> {
    let degree = order - 1;
    let mut values = vec![0.0; order];
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    values
}

/// Basis functions evaluated on a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    values: DMatrix<f64>,
    eval_points: Vec<f64>,
}

impl BasisMatrix {
    /// Wraps an explicit matrix; rows correspond to `eval_points`.
    pub fn from_values(values: DMatrix<f64>, eval_points: Vec<f64>) -> Result<Self> {
        if values.nrows() != eval_points.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} evaluation points",
                values.nrows(),
                eval_points.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("basis matrix has non-finite entries".into()));
        }
        Ok(Self {
            values,
            eval_points,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    pub fn num_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_bases(&self) -> usize {
        self.values.ncols()
    }
}
