//! Dense bounded-variable simplex tableau.
//!
//! Every column (structural, slack, artificial) is boxed, so any basis can be
//! made dual feasible by parking nonbasic columns at the bound matching the
//! sign of their reduced cost. That property is what lets branch-and-bound
//! reuse one tableau across arbitrary nodes: change bounds, move the affected
//! nonbasics, and let the dual simplex restore primal feasibility.
//!
//! The tableau stores `B⁻¹A` row-major with `B⁻¹b` as the trailing column.
//! Pivots only touch the nonzero pattern of the pivot row, which keeps the
//! time-chained horizon models cheap despite the dense storage.

use crate::bnb::PivotContext;
use crate::problem::{ConstraintSense, MilpProblem};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances<T> {
    pub feas: T,
    pub opt: T,
    pub pivot: T,
    pub drop: T,
}

impl<T: Scalar> Tolerances<T> {
    pub fn new(feasibility: T) -> Self {
        let eps = T::epsilon();
        Self {
            feas: feasibility.max(eps * T::lit(1e4)),
            opt: T::lit(1e-9).max(eps * T::lit(1e3)),
            pivot: T::lit(1e-9).max(eps * T::lit(1e3)),
            drop: eps * T::lit(64.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// Dual objective crossed the caller's cutoff; the node cannot improve the incumbent.
    Cutoff,
    Breakdown(PivotContext),
}

/// Columns `[0, n_struct)` are the problem variables, then one slack per row,
/// then whatever artificial columns survived phase 1.
#[derive(Debug, Clone)]
pub(crate) struct LpEngine<T> {
    m: usize,
    n_struct: usize,
    ncols: usize,
    width: usize,
    tab: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    status: Vec<Status>,
    // Original data, kept for refactorization.
    rows: Vec<Vec<(usize, T)>>,
    rhs: Vec<T>,
    artificials: Vec<(usize, T)>,
    struct_cost: Vec<T>,
    tol: Tolerances<T>,
    pivots_since_refactor: usize,
    iterations: usize,
    phase: &'static str,
    nz: Vec<(usize, T)>,
}

const REFACTOR_INTERVAL: usize = 2_000;
const DEGENERACY_LIMIT: usize = 60;

impl<T: Scalar> LpEngine<T> {
    /// Builds the engine and runs both simplex phases. The problem is read as
    /// an LP: binary kinds are ignored and their `[lower, upper]` box is used.
    pub fn solve_from_scratch(problem: &MilpProblem<T>, tol: Tolerances<T>) -> (Self, LpOutcome) {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let rows: Vec<Vec<(usize, T)>> = problem
            .constraints()
            .iter()
            .map(|c| merge_duplicates(c.coeffs.iter().map(|&(v, a)| (v.0, a))))
            .collect();
        let rhs: Vec<T> = problem.constraints().iter().map(|c| c.rhs).collect();

        let mut lower: Vec<T> = problem.vars().iter().map(|v| v.lower).collect();
        let mut upper: Vec<T> = problem.vars().iter().map(|v| v.upper).collect();
        let mut x: Vec<T> = lower.clone();

        // Slack s_i = b_i - a_i·x, boxed by the activity range of the row.
        let mut infeasible_row = false;
        let mut slack_bounds = Vec::with_capacity(m);
        for (i, c) in problem.constraints().iter().enumerate() {
            let (mut lo_act, mut hi_act) = (T::zero(), T::zero());
            for &(j, a) in &rows[i] {
                let (p, q) = (a * lower[j], a * upper[j]);
                lo_act = lo_act + p.min(q);
                hi_act = hi_act + p.max(q);
            }
            let (sl, su) = match c.sense {
                ConstraintSense::Le => (T::zero(), rhs[i] - lo_act),
                ConstraintSense::Ge => (rhs[i] - hi_act, T::zero()),
                ConstraintSense::Eq => (T::zero(), T::zero()),
            };
            if sl > su + tol.feas {
                infeasible_row = true;
            }
            slack_bounds.push((sl, su.max(sl)));
        }

        let mut art_rows = Vec::new();
        let mut slack_values = Vec::with_capacity(m);
        for i in 0..m {
            let act = rows[i].iter().fold(T::zero(), |acc, &(j, a)| acc + a * x[j]);
            let r = rhs[i] - act;
            let (sl, su) = slack_bounds[i];
            if r >= sl - tol.feas && r <= su + tol.feas {
                slack_values.push((r, None));
            } else {
                let s = r.max(sl).min(su);
                let v = r - s;
                let sign = if v > T::zero() { T::one() } else { -T::one() };
                art_rows.push((i, sign));
                slack_values.push((s, Some((art_rows.len() - 1, v.abs()))));
            }
        }

        let k = art_rows.len();
        let ncols = n + m + k;
        let width = ncols + 1;
        let mut tab = vec![T::zero(); m * width];
        let mut basis = vec![0usize; m];
        let mut status = vec![Status::Lower; ncols];
        x.resize(ncols, T::zero());
        for &(sl, su) in &slack_bounds {
            lower.push(sl);
            upper.push(su);
        }
        for _ in 0..k {
            lower.push(T::zero());
            upper.push(T::infinity());
        }

        for i in 0..m {
            let row = &mut tab[i * width..(i + 1) * width];
            for &(j, a) in &rows[i] {
                row[j] = a;
            }
            row[n + i] = T::one();
            row[ncols] = rhs[i];
            let (s, art) = slack_values[i];
            x[n + i] = s;
            match art {
                None => {
                    basis[i] = n + i;
                    status[n + i] = Status::Basic;
                }
                Some((a_idx, value)) => {
                    let sign = art_rows[a_idx].1;
                    let col = n + m + a_idx;
                    row[col] = sign;
                    if sign < T::zero() {
                        for v in row.iter_mut() {
                            *v = -*v;
                        }
                    }
                    basis[i] = col;
                    status[col] = Status::Basic;
                    x[col] = value;
                    let (sl, su) = slack_bounds[i];
                    status[n + i] = if (s - sl).abs() <= (s - su).abs() {
                        Status::Lower
                    } else {
                        Status::Upper
                    };
                }
            }
        }

        let mut struct_cost = problem.objective().to_vec();
        struct_cost.truncate(n);

        let mut engine = LpEngine {
            m,
            n_struct: n,
            ncols,
            width,
            tab,
            cost: vec![T::zero(); ncols],
            d: vec![T::zero(); ncols],
            lower,
            upper,
            x,
            basis,
            status,
            rows,
            rhs,
            artificials: art_rows,
            struct_cost,
            tol,
            pivots_since_refactor: 0,
            iterations: 0,
            phase: "phase 1",
            nz: Vec::with_capacity(ncols + 1),
        };

        if infeasible_row {
            return (engine, LpOutcome::Infeasible);
        }

        if k > 0 {
            let mut c1 = vec![T::zero(); ncols];
            for a in 0..k {
                c1[n + m + a] = T::one();
            }
            engine.set_costs(c1);
            match engine.primal() {
                LpOutcome::Optimal => {}
                LpOutcome::Unbounded => {
                    // Phase 1 is bounded below by zero; this is a numerical failure.
                    let ctx = engine.context(0, 0, T::zero(), "phase 1 reported unbounded");
                    return (engine, LpOutcome::Breakdown(ctx));
                }
                other => return (engine, other),
            }
            let worst = (0..k)
                .map(|a| engine.x[n + m + a])
                .fold(T::zero(), |acc, v| acc.max(v));
            if worst > engine.tol.feas {
                return (engine, LpOutcome::Infeasible);
            }
            engine.retire_artificials();
        }

        engine.phase = "phase 2";
        let mut c2 = vec![T::zero(); engine.ncols];
        c2[..n].copy_from_slice(&engine.struct_cost);
        engine.set_costs(c2);
        let outcome = engine.primal();
        let outcome = engine.finish(outcome);
        (engine, outcome)
    }

    pub fn struct_values(&self) -> Vec<T> {
        self.x[..self.n_struct].to_vec()
    }

    pub fn struct_value(&self, j: usize) -> T {
        self.x[j]
    }

    /// Objective of the current point, without the problem's constant term.
    pub fn objective(&self) -> T {
        (0..self.ncols).fold(T::zero(), |acc, j| {
            if self.cost[j] == T::zero() {
                acc
            } else {
                acc + self.cost[j] * self.x[j]
            }
        })
    }

    /// Changes the box of structural column `j`, keeping the basis dual feasible.
    pub fn set_struct_bounds(&mut self, j: usize, lo: T, hi: T) {
        if self.lower[j] == lo && self.upper[j] == hi {
            return;
        }
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.status[j] == Status::Basic {
            return;
        }
        let dj = self.d[j];
        let (target, st) = if dj > self.tol.opt {
            (lo, Status::Lower)
        } else if dj < -self.tol.opt {
            (hi, Status::Upper)
        } else if self.status[j] == Status::Upper {
            (hi, Status::Upper)
        } else {
            (lo, Status::Lower)
        };
        self.status[j] = st;
        self.shift_nonbasic(j, target);
    }

    /// Restores primal feasibility after bound changes. `cutoff` stops early once
    /// the (monotone) dual objective exceeds it.
    pub fn reoptimize(&mut self, cutoff: Option<T>) -> LpOutcome {
        self.phase = "dual";
        if self.pivots_since_refactor > REFACTOR_INTERVAL {
            if let Err(ctx) = self.refactor() {
                return LpOutcome::Breakdown(ctx);
            }
        }
        let outcome = self.dual(cutoff);
        let outcome = match outcome {
            LpOutcome::Optimal => {
                self.phase = "cleanup";
                self.primal()
            }
            other => other,
        };
        self.finish(outcome)
    }

    fn finish(&mut self, outcome: LpOutcome) -> LpOutcome {
        if outcome != LpOutcome::Optimal {
            return outcome;
        }
        // Guard against drift: verify against the original rows, refactor once if needed.
        for attempt in 0..2 {
            let residual = self.max_residual();
            let scale = T::one() + self.rhs.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
            if residual <= self.tol.feas * scale && self.max_bound_violation() <= self.tol.feas {
                return LpOutcome::Optimal;
            }
            if attempt == 1 {
                break;
            }
            if let Err(ctx) = self.refactor() {
                return LpOutcome::Breakdown(ctx);
            }
            self.phase = "repair";
            match self.dual(None) {
                LpOutcome::Optimal => {}
                other => return other,
            }
            match self.primal() {
                LpOutcome::Optimal => {}
                other => return other,
            }
        }
        let ctx = self.context(0, 0, T::zero(), "residual check failed after refactorization");
        LpOutcome::Breakdown(ctx)
    }

    fn set_costs(&mut self, c: Vec<T>) {
        self.cost = c;
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.tab[i * self.width..i * self.width + self.ncols];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                if a != T::zero() {
                    *dj = *dj - cb * a;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = T::zero();
        }
    }

    fn shift_nonbasic(&mut self, j: usize, target: T) {
        let delta = target - self.x[j];
        if delta == T::zero() {
            return;
        }
        self.x[j] = target;
        for i in 0..self.m {
            let a = self.tab[i * self.width + j];
            if a != T::zero() {
                let b = self.basis[i];
                self.x[b] = self.x[b] - a * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let inv = T::one() / self.tab[r * w + q];
        self.nz.clear();
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != T::zero() {
                    *v = *v * inv;
                    self.nz.push((j, *v));
                }
            }
            row[q] = T::one();
        }
        let drop = self.tol.drop;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + q];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &(j, v) in &self.nz {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < drop { T::zero() } else { nv };
            }
            row[q] = T::zero();
        }
        let f = self.d[q];
        if f != T::zero() {
            for &(j, v) in &self.nz {
                if j < self.ncols {
                    self.d[j] = self.d[j] - f * v;
                }
            }
        }
        self.d[q] = T::zero();
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        self.d[leaving] = -f * inv;
        self.pivots_since_refactor += 1;
    }

    /// Bounded primal simplex from a primal feasible basis.
    fn primal(&mut self) -> LpOutcome {
        let limit = self.iterations + 50 * (self.m + self.ncols) + 1_000;
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > limit {
                return LpOutcome::Breakdown(self.context(0, 0, T::zero(), "primal iteration limit"));
            }
            let bland = degenerate > DEGENERACY_LIMIT;
            let Some((q, dir)) = self.price(bland) else {
                return LpOutcome::Optimal;
            };

            let flip = self.upper[q] - self.lower[q];
            let w = self.width;
            // Harris pass 1: loosened bound on the step.
            let mut theta1 = T::infinity();
            for i in 0..self.m {
                let a = self.tab[i * w + q];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let rate = if dir { -a } else { a };
                let b = self.basis[i];
                let lim = if rate < T::zero() {
                    (self.x[b] - self.lower[b] + self.tol.feas) / -rate
                } else {
                    if self.upper[b].is_infinite() {
                        continue;
                    }
                    (self.upper[b] + self.tol.feas - self.x[b]) / rate
                };
                theta1 = theta1.min(lim);
            }

            if flip <= theta1 && flip.is_finite() {
                // Bound flip of the entering column, no basis change.
                let target = if dir { self.upper[q] } else { self.lower[q] };
                self.status[q] = if dir { Status::Upper } else { Status::Lower };
                self.shift_nonbasic(q, target);
                degenerate = 0;
                continue;
            }
            if theta1.is_infinite() {
                return LpOutcome::Unbounded;
            }

            // Pass 2: largest pivot among rows whose exact ratio fits under theta1.
            let mut best: Option<(usize, T, T, bool)> = None;
            for i in 0..self.m {
                let a = self.tab[i * w + q];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let rate = if dir { -a } else { a };
                let b = self.basis[i];
                let (ratio, to_lower) = if rate < T::zero() {
                    ((self.x[b] - self.lower[b]) / -rate, true)
                } else {
                    if self.upper[b].is_infinite() {
                        continue;
                    }
                    ((self.upper[b] - self.x[b]) / rate, false)
                };
                if ratio > theta1 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, ba, _, _)) => {
                        if bland {
                            b < self.basis[bi]
                        } else {
                            a.abs() > ba.abs()
                        }
                    }
                };
                if better {
                    best = Some((i, a, ratio, to_lower));
                }
            }
            let Some((r, _, ratio, to_lower)) = best else {
                return LpOutcome::Breakdown(self.context(0, q, T::zero(), "ratio test found no pivot row"));
            };
            let theta = ratio.max(T::zero());
            if theta <= self.tol.feas {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let step = if dir { theta } else { -theta };
            self.x[q] = self.x[q] + step;
            for i in 0..self.m {
                let col = self.tab[i * w + q];
                if col != T::zero() {
                    let b = self.basis[i];
                    self.x[b] = self.x[b] - col * step;
                }
            }
            let leaving = self.basis[r];
            self.pivot(r, q);
            if to_lower {
                self.x[leaving] = self.lower[leaving];
                self.status[leaving] = Status::Lower;
            } else {
                self.x[leaving] = self.upper[leaving];
                self.status[leaving] = Status::Upper;
            }
        }
    }

    /// Entering column and direction (`true` = increase).
    fn price(&self, bland: bool) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_score = T::zero();
        for j in 0..self.ncols {
            let (score, dir) = match self.status[j] {
                Status::Basic => continue,
                Status::Lower => (-self.d[j], true),
                Status::Upper => (self.d[j], false),
            };
            if score <= self.tol.opt || self.upper[j] <= self.lower[j] {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Bounded dual simplex from a dual feasible basis.
    fn dual(&mut self, cutoff: Option<T>) -> LpOutcome {
        let limit = self.iterations + 50 * (self.m + self.ncols) + 1_000;
        let mut degenerate = 0usize;
        let w = self.width;
        loop {
            self.iterations += 1;
            if self.iterations > limit {
                return LpOutcome::Breakdown(self.context(0, 0, T::zero(), "dual iteration limit"));
            }
            if let Some(c) = cutoff {
                if self.objective() > c {
                    return LpOutcome::Cutoff;
                }
            }
            let bland = degenerate > DEGENERACY_LIMIT;

            let mut leave: Option<(usize, T, bool)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let (inf, to_lower) = if self.x[b] < self.lower[b] - self.tol.feas {
                    (self.lower[b] - self.x[b], true)
                } else if self.x[b] > self.upper[b] + self.tol.feas {
                    (self.x[b] - self.upper[b], false)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, linf, _)) => {
                        if bland {
                            b < self.basis[li]
                        } else {
                            inf > linf
                        }
                    }
                };
                if better {
                    leave = Some((i, inf, to_lower));
                }
            }
            let Some((r, _, to_lower)) = leave else {
                return LpOutcome::Optimal;
            };

            let row = &self.tab[r * w..r * w + self.ncols];
            let eligible = |a: T, st: Status| -> bool {
                match (st, to_lower) {
                    (Status::Lower, true) | (Status::Upper, false) => a < T::zero(),
                    (Status::Upper, true) | (Status::Lower, false) => a > T::zero(),
                    (Status::Basic, _) => false,
                }
            };
            let signed_d = |j: usize, st: Status| -> T {
                let dj = if st == Status::Lower { self.d[j] } else { -self.d[j] };
                dj.max(T::zero())
            };
            let mut t1 = T::infinity();
            for (j, &a) in row.iter().enumerate() {
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let st = self.status[j];
                if !eligible(a, st) || self.upper[j] <= self.lower[j] {
                    continue;
                }
                t1 = t1.min((signed_d(j, st) + self.tol.opt) / a.abs());
            }
            if t1.is_infinite() {
                return LpOutcome::Infeasible;
            }
            let mut enter: Option<(usize, T)> = None;
            for (j, &a) in row.iter().enumerate() {
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let st = self.status[j];
                if !eligible(a, st) || self.upper[j] <= self.lower[j] {
                    continue;
                }
                if signed_d(j, st) / a.abs() > t1 {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some((_, ba)) => !bland && a.abs() > ba.abs(),
                };
                if better {
                    enter = Some((j, a));
                }
            }
            let (q, alpha) = enter.expect("pass 1 found a candidate");
            if signed_d(q, self.status[q]) <= self.tol.opt {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            let leaving = self.basis[r];
            let bound = if to_lower {
                self.lower[leaving]
            } else {
                self.upper[leaving]
            };
            let dx = (self.x[leaving] - bound) / alpha;
            self.x[q] = self.x[q] + dx;
            for i in 0..self.m {
                let col = self.tab[i * w + q];
                if col != T::zero() {
                    let b = self.basis[i];
                    self.x[b] = self.x[b] - col * dx;
                }
            }
            if alpha.abs() < self.tol.pivot * T::lit(10.0) {
                // Tiny pivots are legal but poison the tableau; refactor right after.
                self.pivot(r, q);
                self.settle_leaving(leaving, bound, to_lower);
                if let Err(ctx) = self.refactor() {
                    return LpOutcome::Breakdown(ctx);
                }
                continue;
            }
            self.pivot(r, q);
            self.settle_leaving(leaving, bound, to_lower);
        }
    }

    fn settle_leaving(&mut self, leaving: usize, bound: T, to_lower: bool) {
        self.x[leaving] = bound;
        self.status[leaving] = if to_lower { Status::Lower } else { Status::Upper };
        // Enforce dual feasibility of the leaving column against round-off.
        let dl = self.d[leaving];
        if (to_lower && dl < T::zero()) || (!to_lower && dl > T::zero()) {
            self.d[leaving] = T::zero();
        }
    }

    /// Drives basic artificials out after phase 1 and drops the artificial
    /// columns that are no longer needed.
    fn retire_artificials(&mut self) {
        let first_art = self.n_struct + self.m;
        for i in 0..self.m {
            let b = self.basis[i];
            if b < first_art {
                continue;
            }
            let w = self.width;
            let mut best: Option<(usize, T)> = None;
            for j in 0..first_art {
                if self.status[j] == Status::Basic {
                    continue;
                }
                let a = self.tab[i * w + j];
                if a.abs() > self.tol.pivot && best.map_or(true, |(_, ba)| a.abs() > ba.abs()) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                // Degenerate pivot: the artificial sits at (numerically) zero.
                self.x[b] = T::zero();
                self.pivot(i, j);
                self.status[b] = Status::Lower;
            }
        }
        for a in first_art..self.ncols {
            self.upper[a] = T::zero();
            self.x[a] = T::zero();
        }

        // Keep only artificial columns still basic (redundant rows).
        let keep: Vec<usize> = (first_art..self.ncols)
            .filter(|&c| self.status[c] == Status::Basic)
            .collect();
        let new_ncols = first_art + keep.len();
        if new_ncols == self.ncols {
            return;
        }
        let mut remap = vec![usize::MAX; self.ncols];
        for j in 0..first_art {
            remap[j] = j;
        }
        for (k, &c) in keep.iter().enumerate() {
            remap[c] = first_art + k;
        }
        let new_width = new_ncols + 1;
        let mut tab = vec![T::zero(); self.m * new_width];
        for i in 0..self.m {
            let src = &self.tab[i * self.width..(i + 1) * self.width];
            let dst = &mut tab[i * new_width..(i + 1) * new_width];
            for (j, &v) in src[..self.ncols].iter().enumerate() {
                if remap[j] != usize::MAX {
                    dst[remap[j]] = v;
                }
            }
            dst[new_ncols] = src[self.ncols];
        }
        let pick = |v: &Vec<T>| -> Vec<T> {
            let mut out = vec![T::zero(); new_ncols];
            for (j, &val) in v.iter().enumerate() {
                if remap[j] != usize::MAX {
                    out[remap[j]] = val;
                }
            }
            out
        };
        self.lower = pick(&self.lower);
        self.upper = pick(&self.upper);
        self.x = pick(&self.x);
        self.cost = pick(&self.cost);
        self.d = pick(&self.d);
        let mut status = vec![Status::Lower; new_ncols];
        for (j, &s) in self.status.iter().enumerate() {
            if remap[j] != usize::MAX {
                status[remap[j]] = s;
            }
        }
        self.status = status;
        for b in &mut self.basis {
            *b = remap[*b];
        }
        self.artificials = keep
            .iter()
            .map(|&c| self.artificials[c - first_art])
            .collect();
        self.tab = tab;
        self.ncols = new_ncols;
        self.width = new_width;
    }

    /// Rebuilds `B⁻¹A` from the original rows for the current basis. A basis
    /// that drift has made singular is repaired: columns that no longer have
    /// a pivot are swapped for logicals (or the largest remaining entry of an
    /// uncovered row) and parked at their nearest bound. Nonbasics are then
    /// moved to the bound their reduced cost asks for, so the dual simplex
    /// can pick up from the result.
    fn refactor(&mut self) -> Result<(), PivotContext> {
        let w = self.width;
        let n = self.n_struct;
        let mut tab = vec![T::zero(); self.m * w];
        for i in 0..self.m {
            let row = &mut tab[i * w..(i + 1) * w];
            for &(j, a) in &self.rows[i] {
                row[j] = a;
            }
            row[n + i] = T::one();
            row[self.ncols] = self.rhs[i];
        }
        for (k, &(r, sign)) in self.artificials.iter().enumerate() {
            tab[r * w + n + self.m + k] = sign;
        }
        let wanted = std::mem::take(&mut self.basis);
        self.tab = tab;
        let mut assigned = vec![false; self.m];
        let mut basis = vec![usize::MAX; self.m];
        let mut in_basis = vec![false; self.ncols];
        let mut dropped = Vec::new();
        // Slack columns first: they are unit vectors and pivot trivially.
        let mut order: Vec<usize> = wanted.clone();
        order.sort_by_key(|&c| if c >= n && c < n + self.m { 0 } else { 1 });
        for &c in &order {
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.m {
                if assigned[i] {
                    continue;
                }
                let a = self.tab[i * w + c];
                if a.abs() > self.tol.pivot && best.map_or(true, |(_, ba)| a.abs() > ba.abs()) {
                    best = Some((i, a));
                }
            }
            let Some((r, _)) = best else {
                dropped.push(c);
                continue;
            };
            self.pivot_refactor(r, c);
            assigned[r] = true;
            basis[r] = c;
            in_basis[c] = true;
        }
        for &c in &dropped {
            self.status[c] = if (self.x[c] - self.lower[c]).abs() <= (self.upper[c] - self.x[c]).abs() {
                Status::Lower
            } else {
                Status::Upper
            };
            self.x[c] = if self.status[c] == Status::Lower { self.lower[c] } else { self.upper[c] };
        }
        for r in 0..self.m {
            if assigned[r] {
                continue;
            }
            let logical = n + r;
            let mut best: Option<(usize, T)> = None;
            if !in_basis[logical] && self.tab[r * w + logical].abs() > self.tol.pivot {
                best = Some((logical, self.tab[r * w + logical]));
            } else {
                for j in 0..self.ncols {
                    let a = self.tab[r * w + j];
                    if !in_basis[j] && a.abs() > self.tol.pivot && best.map_or(true, |(_, ba)| a.abs() > ba.abs()) {
                        best = Some((j, a));
                    }
                }
            }
            let Some((c, _)) = best else {
                self.basis = wanted;
                return Err(self.context(r, 0, T::zero(), "singular basis during refactorization"));
            };
            self.pivot_refactor(r, c);
            assigned[r] = true;
            basis[r] = c;
            in_basis[c] = true;
        }
        self.basis = basis;
        for i in 0..self.m {
            self.status[self.basis[i]] = Status::Basic;
        }
        self.recompute_basics();
        self.recompute_reduced_costs();
        if self.park_by_reduced_cost() {
            self.recompute_basics();
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Basic values from `B⁻¹b` minus the nonbasic contributions.
    fn recompute_basics(&mut self) {
        let w = self.width;
        for i in 0..self.m {
            let row = &self.tab[i * w..(i + 1) * w];
            let mut v = row[self.ncols];
            for j in 0..self.ncols {
                let a = row[j];
                if a != T::zero() && self.status[j] != Status::Basic {
                    v = v - a * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Moves nonbasics sitting at the wrong bound for their reduced cost;
    /// true when anything moved.
    fn park_by_reduced_cost(&mut self) -> bool {
        let mut moved = false;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let (target, st) = match self.status[j] {
                Status::Lower if dj < -self.tol.opt && self.upper[j].is_finite() => (self.upper[j], Status::Upper),
                Status::Upper if dj > self.tol.opt && self.lower[j].is_finite() => (self.lower[j], Status::Lower),
                _ => continue,
            };
            self.status[j] = st;
            self.x[j] = target;
            moved = true;
        }
        moved
    }

    fn pivot_refactor(&mut self, r: usize, q: usize) {
        let w = self.width;
        let inv = T::one() / self.tab[r * w + q];
        self.nz.clear();
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != T::zero() {
                    *v = *v * inv;
                    self.nz.push((j, *v));
                }
            }
            row[q] = T::one();
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + q];
            if f == T::zero() {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &(j, v) in &self.nz {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < self.tol.drop { T::zero() } else { nv };
            }
            row[q] = T::zero();
        }
    }

    fn max_residual(&self) -> T {
        let n = self.n_struct;
        let mut worst = T::zero();
        let mut art_of_row = vec![None; self.m];
        for (k, &(r, s)) in self.artificials.iter().enumerate() {
            art_of_row[r] = Some((n + self.m + k, s));
        }
        for i in 0..self.m {
            let mut act = self.rows[i]
                .iter()
                .fold(T::zero(), |acc, &(j, a)| acc + a * self.x[j]);
            act = act + self.x[n + i];
            if let Some((c, s)) = art_of_row[i] {
                act = act + s * self.x[c];
            }
            worst = worst.max((act - self.rhs[i]).abs());
        }
        worst
    }

    fn max_bound_violation(&self) -> T {
        (0..self.ncols).fold(T::zero(), |acc, j| {
            acc.max(self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j])
        })
    }

    fn context(&self, row: usize, col: usize, pivot: T, reason: &str) -> PivotContext {
        PivotContext {
            phase: self.phase.to_string(),
            iteration: self.iterations,
            row,
            column: col,
            pivot: pivot.as_f64(),
            reason: reason.to_string(),
        }
    }
}

fn merge_duplicates<T: Scalar>(coeffs: impl Iterator<Item = (usize, T)>) -> Vec<(usize, T)> {
    let mut v: Vec<(usize, T)> = coeffs.collect();
    v.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, T)> = Vec::with_capacity(v.len());
    for (j, a) in v {
        match out.last_mut() {
            Some((lj, la)) if *lj == j => *la = *la + a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != T::zero());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ConstraintSense::Le;

    #[test]
    fn singular_basis_is_repaired() {
        // x and y have identical columns, so no basis may hold both.
        let mut p = MilpProblem::<f64>::new();
        let x = p.add_continuous("x", 0.0, 3.0);
        let y = p.add_continuous("y", 0.0, 3.0);
        p.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Le, 4.0);
        p.add_constraint("b", vec![(x, 2.0), (y, 2.0)], Le, 8.0);
        p.set_objective_coeff(x, -1.0);
        p.set_objective_coeff(y, -2.0);
        let (mut e, out) = LpEngine::solve_from_scratch(&p, Tolerances::new(1e-9));
        assert_eq!(out, LpOutcome::Optimal);
        assert!((e.objective() + 7.0).abs() < 1e-9);

        for (i, &c) in [x.0, y.0].iter().enumerate() {
            let old = e.basis[i];
            e.status[old] = Status::Lower;
            e.basis[i] = c;
            e.status[c] = Status::Basic;
        }
        e.refactor().unwrap();
        let mut seen = e.basis.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 2);
        assert!(!(e.basis.contains(&x.0) && e.basis.contains(&y.0)));
        assert_eq!(e.reoptimize(None), LpOutcome::Optimal);
        assert!((e.objective() + 7.0).abs() < 1e-9);
    }
}
