//! Continuous piecewise-linear functions and their MILP encoding.

use crate::error::MilpError;
use crate::problem::{ConstraintSense, MilpProblem, VarId};
use crate::Scalar;

/// Big-M for indicator constraints.
pub const DEFAULT_BIG_M: f64 = 100.0;

/// Breakpoints `(x, y)` with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCurve<T> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> PiecewiseCurve<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self, MilpError> {
        if points.len() < 2 {
            return Err(MilpError::Curve(format!(
                "need at least 2 breakpoints, got {}",
                points.len()
            )));
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(MilpError::Curve(format!("breakpoint {i} is not finite")));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(MilpError::Curve(format!(
                    "x must be strictly increasing (breakpoints {i} and {})",
                    i + 1
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn num_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn domain(&self) -> (T, T) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation on the segment containing `x`.
    pub fn eval(&self, x: T) -> Result<T, MilpError> {
        let (first, last) = self.domain();
        if !(x >= first && x <= last) {
            return Err(MilpError::Curve(format!(
                "{} outside domain [{}, {}]",
                x, first, last
            )));
        }
        // Last segment whose left end is <= x; at a shared breakpoint both sides agree.
        let seg = self
            .points
            .windows(2)
            .position(|w| x <= w[1].0)
            .unwrap_or(self.num_segments() - 1);
        let (x0, y0) = self.points[seg];
        let (x1, y1) = self.points[seg + 1];
        if x == x1 {
            return Ok(y1);
        }
        let t = (x - x0) / (x1 - x0);
        Ok(y0 + t * (y1 - y0))
    }

    /// Same breakpoints with every `y` multiplied by `factor`.
    pub fn scale_values(&self, factor: T) -> Self {
        Self {
            points: self.points.iter().map(|&(x, y)| (x, y * factor)).collect(),
        }
    }

    pub fn max_abs_value(&self) -> T {
        self.points
            .iter()
            .fold(T::zero(), |acc, &(_, y)| acc.max(y.abs()))
    }
}

/// Adds `y = curve(x)` to `problem` and returns the handle of `y`.
pub fn encode_piecewise<T: Scalar>(
    problem: &mut MilpProblem<T>,
    x: VarId,
    curve: &PiecewiseCurve<T>,
) -> Result<VarId, MilpError> {
    encode_piecewise_with_big_m(problem, x, curve, T::lit(DEFAULT_BIG_M))
}

/// Segment-selection encoding: one binary `z_b` per segment with `Σ z_b = 1`,
/// interpolation weights `λ_i` over the breakpoints with `Σ λ_i = 1`, and
/// Big-M activation rows `λ_i ≤ M·(z_{i-1} + z_i)` so only the two ends of the
/// chosen segment may carry weight. In any integral solution `y` equals the
/// curve at `x` exactly.
pub fn encode_piecewise_with_big_m<T: Scalar>(
    problem: &mut MilpProblem<T>,
    x: VarId,
    curve: &PiecewiseCurve<T>,
    big_m: T,
) -> Result<VarId, MilpError> {
    let (first, last) = curve.domain();
    let xv = problem.var(x).clone();
    if xv.lower < first || xv.upper > last {
        return Err(MilpError::CurveDomain {
            name: xv.name,
            lower: xv.lower.as_f64(),
            upper: xv.upper.as_f64(),
            first: first.as_f64(),
            last: last.as_f64(),
        });
    }
    let magnitude = curve.max_abs_value();
    if big_m < T::one() || magnitude > big_m {
        return Err(MilpError::CurveScale {
            magnitude: magnitude.as_f64(),
            big_m: big_m.as_f64(),
        });
    }

    let pts = curve.points();
    let name = &xv.name;
    let (y_lo, y_hi) = pts
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    let y = problem.add_continuous(format!("{name}_pw_y"), y_lo, y_hi);
    let weights: Vec<VarId> = (0..pts.len())
        .map(|i| problem.add_continuous(format!("{name}_pw_l{i}"), T::zero(), T::one()))
        .collect();
    let segments: Vec<VarId> = (0..curve.num_segments())
        .map(|b| problem.add_binary(format!("{name}_pw_z{b}")))
        .collect();

    problem.add_constraint(
        format!("{name}_pw_convex"),
        weights.iter().map(|&l| (l, T::one())).collect(),
        ConstraintSense::Eq,
        T::one(),
    );
    let mut x_row = vec![(x, T::one())];
    x_row.extend(weights.iter().zip(pts).map(|(&l, &(px, _))| (l, -px)));
    problem.add_constraint(format!("{name}_pw_x"), x_row, ConstraintSense::Eq, T::zero());
    let mut y_row = vec![(y, T::one())];
    y_row.extend(weights.iter().zip(pts).map(|(&l, &(_, py))| (l, -py)));
    problem.add_constraint(format!("{name}_pw_y"), y_row, ConstraintSense::Eq, T::zero());
    problem.add_constraint(
        format!("{name}_pw_select"),
        segments.iter().map(|&z| (z, T::one())).collect(),
        ConstraintSense::Eq,
        T::one(),
    );
    for (i, &l) in weights.iter().enumerate() {
        let mut row = vec![(l, T::one())];
        if i > 0 {
            row.push((segments[i - 1], -big_m));
        }
        if i < segments.len() {
            row.push((segments[i], -big_m));
        }
        problem.add_constraint(format!("{name}_pw_act{i}"), row, ConstraintSense::Le, T::zero());
    }
    Ok(y)
}
