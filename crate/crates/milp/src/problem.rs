use crate::error::MilpError;
use crate::Scalar;

/// Handle to a variable inside one [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    Le,
    Eq,
    Ge,
}

impl ConstraintSense {
    pub fn symbol(self) -> &'static str {
        match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Eq => "=",
            ConstraintSense::Ge => ">=",
        }
    }
}

/// Sparse linear row `Σ coeff·x  sense  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub coeffs: Vec<(VarId, T)>,
    pub sense: ConstraintSense,
    pub rhs: T,
}

/// A minimization problem over bounded continuous and binary variables.
///
/// Every variable must carry finite bounds; the simplex engine relies on
/// all columns being boxed.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem<T> {
    vars: Vec<Variable<T>>,
    constraints: Vec<Constraint<T>>,
    objective: Vec<T>,
    objective_constant: T,
}

impl<T: Scalar> Default for MilpProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> MilpProblem<T> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: T::zero(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T, kind: VarKind) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.objective.push(T::zero());
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: T, upper: T) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, T::zero(), T::one(), VarKind::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, T)>,
        sense: ConstraintSense,
        rhs: T,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds `coeff` to the objective coefficient of `var`.
    pub fn add_objective_term(&mut self, var: VarId, coeff: T) {
        self.objective[var.0] = self.objective[var.0] + coeff;
    }

    pub fn set_objective_coeff(&mut self, var: VarId, coeff: T) {
        self.objective[var.0] = coeff;
    }

    pub fn set_objective_constant(&mut self, constant: T) {
        self.objective_constant = constant;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: T, upper: T) {
        let v = &mut self.vars[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    /// Pins `var` to `value` by collapsing its bounds.
    pub fn fix(&mut self, var: VarId, value: T) {
        self.set_bounds(var, value, value);
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var(&self, id: VarId) -> &Variable<T> {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[Variable<T>] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn objective_constant(&self) -> T {
        self.objective_constant
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    /// Same problem with every binary relaxed to a continuous `[lower, upper]` variable.
    pub fn relaxed(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.vars {
            v.kind = VarKind::Continuous;
        }
        out
    }

    pub fn evaluate_objective(&self, values: &[T]) -> T {
        self.objective
            .iter()
            .zip(values)
            .fold(self.objective_constant, |acc, (&c, &x)| acc + c * x)
    }

    pub fn row_activity(&self, row: &Constraint<T>, values: &[T]) -> T {
        row.coeffs
            .iter()
            .fold(T::zero(), |acc, &(v, c)| acc + c * values[v.0])
    }

    /// Largest violation of any bound or row by `values` (zero when feasible).
    pub fn max_violation(&self, values: &[T]) -> T {
        let mut worst = T::zero();
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.constraints {
            let act = self.row_activity(row, values);
            let viol = match row.sense {
                ConstraintSense::Le => act - row.rhs,
                ConstraintSense::Ge => row.rhs - act,
                ConstraintSense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        for v in &self.vars {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(MilpError::InvalidBounds {
                    name: v.name.clone(),
                    lower: v.lower.as_f64(),
                    upper: v.upper.as_f64(),
                });
            }
            if v.lower > v.upper {
                return Err(MilpError::InvalidBounds {
                    name: v.name.clone(),
                    lower: v.lower.as_f64(),
                    upper: v.upper.as_f64(),
                });
            }
            if v.kind == VarKind::Binary && (v.lower < T::zero() || v.upper > T::one()) {
                return Err(MilpError::BinaryBounds {
                    name: v.name.clone(),
                    lower: v.lower.as_f64(),
                    upper: v.upper.as_f64(),
                });
            }
        }
        for (i, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(MilpError::NonFinite {
                    context: format!("objective coefficient of `{}`", self.vars[i].name),
                });
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(MilpError::NonFinite {
                context: "objective constant".into(),
            });
        }
        for row in &self.constraints {
            if !row.rhs.is_finite() {
                return Err(MilpError::NonFinite {
                    context: format!("right-hand side of `{}`", row.name),
                });
            }
            for &(v, c) in &row.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(MilpError::UnknownVariable {
                        context: format!("constraint `{}`", row.name),
                        index: v.0,
                    });
                }
                if !c.is_finite() {
                    return Err(MilpError::NonFinite {
                        context: format!("constraint `{}`", row.name),
                    });
                }
            }
        }
        Ok(())
    }
}
