//! Mixed-integer linear programming with binary variables.
//!
//! The solver is self-contained: a dense bounded-variable tableau drives a
//! two-phase primal simplex for LP relaxations and a dual simplex for
//! reoptimizing branch-and-bound nodes after bound changes. Incumbents come
//! from rounding dives and are improved by a local search that moves the
//! 1 inside each `sum = 1` row of binaries. Everything is
//! generic over the floating point type through [`Scalar`]; the `f64`
//! aliases at the bottom of this file are what most callers want.

mod bnb;
mod error;
mod lp_format;
mod piecewise;
mod problem;
mod simplex;

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use bnb::{solve_lp, solve_milp, solve_milp_with_hints, MilpSolution, PivotContext, SolveStatus, SolverOptions};
pub use error::MilpError;
pub use lp_format::write_lp;
pub use piecewise::{encode_piecewise, encode_piecewise_with_big_m, PiecewiseCurve, DEFAULT_BIG_M};
pub use problem::{Constraint, ConstraintSense, MilpProblem, VarId, VarKind, Variable};

/// Floating point types the solver and the models built on top of it accept.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Lossy view as `f64`, for diagnostics and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type Problem = MilpProblem<f64>;
pub type Solution = MilpSolution<f64>;
pub type Curve = PiecewiseCurve<f64>;
