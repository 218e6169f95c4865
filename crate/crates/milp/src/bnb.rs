//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::{Arc, Condvar, Mutex};

use crate::error::MilpError;
use crate::problem::{ConstraintSense, MilpProblem};
use crate::simplex::{LpEngine, LpOutcome, Tolerances};
use crate::Scalar;


#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The node limit stopped the search; `values` hold the best incumbent
    /// (empty when none was found) and `gap` the remaining relative gap.
    GapLimit,
    /// The simplex lost numerical control; see [`MilpSolution::breakdown`].
    NumericalBreakdown,
}

/// Where the simplex gave up.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotContext {
    pub phase: String,
    pub iteration: usize,
    pub row: usize,
    pub column: usize,
    pub pivot: f64,
    pub reason: String,
}

impl std::fmt::Display for PivotContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} at iteration {} (row {}, column {}, pivot {:e}): {}",
            self.phase, self.iteration, self.row, self.column, self.pivot, self.reason
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution<T> {
    pub status: SolveStatus,
    pub values: Vec<T>,
    /// Includes the problem's objective constant. `+inf` when there is no solution.
    pub objective: T,
    /// `(incumbent - best bound) / max(|incumbent|, 1)`.
    pub gap: T,
    pub nodes: usize,
    pub breakdown: Option<PivotContext>,
}

impl<T: Scalar> MilpSolution<T> {
    fn without_values(status: SolveStatus, nodes: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: T::infinity(),
            gap: T::infinity(),
            nodes,
            breakdown: None,
        }
    }

    pub fn has_values(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: crate::VarId) -> T {
        self.values[var.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub feasibility_tol: T,
    pub integrality_tol: T,
    pub relative_gap: T,
    pub node_limit: usize,
    /// Sequential, reproducible node processing. Turning it off with
    /// `threads > 1` solves nodes concurrently; the objective is still
    /// optimal but node counts and tie-broken solutions may vary.
    pub deterministic: bool,
    pub threads: usize,
    /// Rounding dive from the root to seed an incumbent before the best-first search.
    pub dive: bool,
    /// When nonzero (and `dive` is on), also dive from every this-many-th
    /// processed node to look for better incumbents. Sequential search only.
    pub dive_interval: usize,
    /// Local search around every new incumbent of the sequential search.
    pub polish: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            feasibility_tol: T::lit(1e-7),
            integrality_tol: T::lit(1e-6),
            relative_gap: T::lit(1e-6),
            node_limit: 1_000_000,
            deterministic: true,
            threads: 1,
            dive: true,
            dive_interval: 0,
            polish: true,
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<(), MilpError> {
        if !(self.feasibility_tol > T::zero()) {
            return Err(MilpError::Tolerance("feasibility_tol"));
        }
        if !(self.integrality_tol > T::zero()) {
            return Err(MilpError::Tolerance("integrality_tol"));
        }
        if !(self.relative_gap > T::zero()) {
            return Err(MilpError::Tolerance("relative_gap"));
        }
        if self.node_limit == 0 {
            return Err(MilpError::Tolerance("node_limit"));
        }
        Ok(())
    }
}

/// Solves the LP relaxation (binaries relaxed to their box) with the two-phase simplex.
pub fn solve_lp<T: Scalar>(
    problem: &MilpProblem<T>,
    opts: &SolverOptions<T>,
) -> Result<MilpSolution<T>, MilpError> {
    problem.validate()?;
    opts.validate()?;
    let tol = Tolerances::new(opts.feasibility_tol);
    let (engine, outcome) = LpEngine::solve_from_scratch(problem, tol);
    Ok(match outcome {
        LpOutcome::Optimal => MilpSolution {
            status: SolveStatus::Optimal,
            values: engine.struct_values(),
            objective: engine.objective() + problem.objective_constant(),
            gap: T::zero(),
            nodes: 0,
            breakdown: None,
        },
        LpOutcome::Infeasible | LpOutcome::Cutoff => {
            MilpSolution::without_values(SolveStatus::Infeasible, 0)
        }
        LpOutcome::Unbounded => MilpSolution {
            objective: T::neg_infinity(),
            ..MilpSolution::without_values(SolveStatus::Unbounded, 0)
        },
        LpOutcome::Breakdown(ctx) => MilpSolution {
            breakdown: Some(ctx),
            ..MilpSolution::without_values(SolveStatus::NumericalBreakdown, 0)
        },
    })
}

#[derive(Debug, Clone)]
struct Node<T> {
    bound: T,
    seq: u64,
    fixings: Arc<Vec<(usize, T)>>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Node<T> {}
impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Node<T> {
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent<T> {
    objective: T,
    values: Vec<T>,
}

struct Search<'a, T> {
    problem: &'a MilpProblem<T>,
    binaries: Vec<usize>,
    /// Binaries tied by a `sum = 1` row of unit coefficients.
    groups: Vec<Vec<usize>>,
    /// Binaries in no group.
    loose: Vec<usize>,
    root_bounds: Vec<(T, T)>,
    opts: SolverOptions<T>,
}

impl<T: Scalar> Search<'_, T> {
    fn gap_abs(&self, incumbent: T) -> T {
        self.opts.relative_gap * incumbent.abs().max(T::one())
    }

    fn apply(&self, engine: &mut LpEngine<T>, fixings: &[(usize, T)]) {
        for (k, &j) in self.binaries.iter().enumerate() {
            let (lo, hi) = self.root_bounds[k];
            let fixed = fixings.iter().rev().find(|&&(v, _)| v == j);
            match fixed {
                Some(&(_, val)) => engine.set_struct_bounds(j, val, val),
                None => engine.set_struct_bounds(j, lo, hi),
            }
        }
    }

    /// Most fractional binary, lowest index on ties; `None` when integral.
    fn branch_var(&self, engine: &LpEngine<T>) -> Option<(usize, T)> {
        let half = T::lit(0.5);
        let mut best: Option<(usize, T, T)> = None;
        for &j in &self.binaries {
            let v = engine.struct_value(j);
            let frac = v - v.floor();
            let dist = frac.min(T::one() - frac);
            if dist <= self.opts.integrality_tol {
                continue;
            }
            let score = (frac - half).abs();
            if best.map_or(true, |(_, _, s)| score < s) {
                best = Some((j, v, score));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    fn snapshot(&self, engine: &LpEngine<T>) -> Incumbent<T> {
        let mut values = engine.struct_values();
        for &j in &self.binaries {
            values[j] = values[j].round();
        }
        Incumbent {
            objective: engine.objective() + self.problem.objective_constant(),
            values,
        }
    }

    /// Least fractional binary, lowest index on ties; `None` when integral.
    fn dive_var(&self, engine: &LpEngine<T>) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for &j in &self.binaries {
            let v = engine.struct_value(j);
            let frac = v - v.floor();
            let dist = frac.min(T::one() - frac);
            if dist <= self.opts.integrality_tol {
                continue;
            }
            if best.map_or(true, |(_, _, d)| dist < d) {
                best = Some((j, v, dist));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    /// First-improvement local search around `inc`: with every binary fixed,
    /// move the 1 of each partition group to another member, or flip a
    /// binary outside any group, keeping moves whose LP improves the
    /// objective. Stops after a pass without improvement.
    fn polish(&self, engine: &mut LpEngine<T>, inc: Incumbent<T>) -> Incumbent<T> {
        let constant = self.problem.objective_constant();
        let mut best = inc;
        let fix = |engine: &mut LpEngine<T>, j: usize, v: T| engine.set_struct_bounds(j, v, v);
        for &j in &self.binaries {
            fix(engine, j, best.values[j]);
        }
        let improves = |obj: T, best: T| obj < best - T::lit(1e-9) * best.abs().max(T::one());
        for _ in 0..POLISH_PASSES {
            let mut improved = false;
            for group in &self.groups {
                let Some(&on) = group.iter().find(|&&j| best.values[j] > T::lit(0.5)) else {
                    continue;
                };
                for &j in group.iter().filter(|&&j| j != on) {
                    fix(engine, on, T::zero());
                    fix(engine, j, T::one());
                    let cutoff = best.objective - constant;
                    if engine.reoptimize(Some(cutoff)) == LpOutcome::Optimal
                        && improves(engine.objective() + constant, best.objective)
                    {
                        best = self.snapshot(engine);
                        improved = true;
                        break;
                    }
                    fix(engine, j, T::zero());
                    fix(engine, on, T::one());
                }
            }
            for &j in &self.loose {
                let v = best.values[j];
                fix(engine, j, T::one() - v);
                let cutoff = best.objective - constant;
                if engine.reoptimize(Some(cutoff)) == LpOutcome::Optimal
                    && improves(engine.objective() + constant, best.objective)
                {
                    best = self.snapshot(engine);
                    improved = true;
                } else {
                    fix(engine, j, v);
                }
            }
            if !improved {
                break;
            }
        }
        best
    }

    /// Rounds the least fractional binary to its nearest value, falling back
    /// to the other side once, until the LP turns integral or both sides fail.
    /// Starts from `base` fixings (those of the node being dived from).
    fn dive(&self, engine: &mut LpEngine<T>, base: &[(usize, T)]) -> Option<Incumbent<T>> {
        let mut fixings: Vec<(usize, T)> = base.to_vec();
        loop {
            let Some((j, v)) = self.dive_var(engine) else {
                return Some(self.snapshot(engine));
            };
            let first = if v >= T::lit(0.5) { T::one() } else { T::zero() };
            let mut ok = false;
            for val in [first, T::one() - first] {
                fixings.push((j, val));
                self.apply(engine, &fixings);
                if engine.reoptimize(None) == LpOutcome::Optimal {
                    ok = true;
                    break;
                }
                fixings.pop();
            }
            if !ok {
                return None;
            }
        }
    }
}

const POLISH_PASSES: usize = 50;

fn partition_groups<T: Scalar>(problem: &MilpProblem<T>, binaries: &[usize]) -> Vec<Vec<usize>> {
    let mut taken = vec![false; problem.num_vars()];
    let mut groups = Vec::new();
    for c in problem.constraints() {
        let unit = c.sense == ConstraintSense::Eq
            && c.rhs == T::one()
            && c.coeffs.len() > 1
            && c.coeffs.iter().all(|&(v, a)| a == T::one() && binaries.contains(&v.0) && !taken[v.0]);
        if unit {
            let g: Vec<usize> = c.coeffs.iter().map(|&(v, _)| v.0).collect();
            // Duplicate entries would make the row something other than a partition.
            if g.iter().enumerate().all(|(i, j)| !g[..i].contains(j)) {
                for &j in &g {
                    taken[j] = true;
                }
                groups.push(g);
            }
        }
    }
    groups
}

/// Best-first branch-and-bound: nodes ordered by their parent's LP bound with
/// FIFO tie-break, most-fractional branching with lowest-index tie-break.
pub fn solve_milp<T: Scalar>(
    problem: &MilpProblem<T>,
    opts: &SolverOptions<T>,
) -> Result<MilpSolution<T>, MilpError> {
    solve_milp_with_hints(problem, opts, &[])
}

/// [`solve_milp`] seeded with guesses for some binaries, such as the previous
/// solution of a related problem or a rule of thumb. Each guess is rounded,
/// completed by a dive and polished; the best only ever serves as an
/// incumbent, so a bad or infeasible hint costs time but never changes the
/// optimum.
pub fn solve_milp_with_hints<T: Scalar>(
    problem: &MilpProblem<T>,
    opts: &SolverOptions<T>,
    hints: &[Vec<(crate::VarId, T)>],
) -> Result<MilpSolution<T>, MilpError> {
    problem.validate()?;
    opts.validate()?;
    let tol = Tolerances::new(opts.feasibility_tol);
    let binaries: Vec<usize> = problem.binaries().map(|v| v.0).collect();
    let root_bounds = binaries
        .iter()
        .map(|&j| {
            let v = problem.var(crate::VarId(j));
            // Tighten fractional boxes of binaries to the integers they admit.
            (v.lower.ceil(), v.upper.floor())
        })
        .collect::<Vec<_>>();
    if root_bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(MilpSolution::without_values(SolveStatus::Infeasible, 0));
    }
    let mut tightened = problem.clone();
    for (k, &j) in binaries.iter().enumerate() {
        tightened.set_bounds(crate::VarId(j), root_bounds[k].0, root_bounds[k].1);
    }

    let (mut engine, outcome) = LpEngine::solve_from_scratch(&tightened, tol);
    match outcome {
        LpOutcome::Optimal => {}
        LpOutcome::Infeasible | LpOutcome::Cutoff => {
            return Ok(MilpSolution::without_values(SolveStatus::Infeasible, 1))
        }
        LpOutcome::Unbounded => {
            return Ok(MilpSolution {
                objective: T::neg_infinity(),
                ..MilpSolution::without_values(SolveStatus::Unbounded, 1)
            })
        }
        LpOutcome::Breakdown(ctx) => {
            return Ok(MilpSolution {
                breakdown: Some(ctx),
                ..MilpSolution::without_values(SolveStatus::NumericalBreakdown, 1)
            })
        }
    }

    let groups = partition_groups(&tightened, &binaries);
    let loose = binaries
        .iter()
        .copied()
        .filter(|j| !groups.iter().any(|g| g.contains(j)))
        .collect();
    let search = Search {
        problem: &tightened,
        binaries,
        groups,
        loose,
        root_bounds,
        opts: *opts,
    };
    let root_obj = engine.objective() + problem.objective_constant();
    if search.branch_var(&engine).is_none() {
        let inc = search.snapshot(&engine);
        return Ok(finish(inc, root_obj, SolveStatus::Optimal, 1));
    }

    let mut incumbent: Option<Incumbent<T>> = None;
    if opts.dive {
        incumbent = search.dive(&mut engine, &[]);
    }
    if opts.polish {
        incumbent = incumbent.map(|inc| search.polish(&mut engine, inc));
    }
    for hint in hints {
        let seed: Vec<(usize, T)> = hint
            .iter()
            .filter(|(v, _)| search.binaries.contains(&v.0))
            .map(|&(v, x)| (v.0, if x >= T::lit(0.5) { T::one() } else { T::zero() }))
            .collect();
        if seed.is_empty() {
            continue;
        }
        search.apply(&mut engine, &seed);
        if engine.reoptimize(None) != LpOutcome::Optimal {
            continue;
        }
        if let Some(mut found) = search.dive(&mut engine, &seed) {
            if opts.polish {
                found = search.polish(&mut engine, found);
            }
            if incumbent.as_ref().map_or(true, |inc| found.objective < inc.objective) {
                incumbent = Some(found);
            }
        }
    }

    let root = Node {
        bound: root_obj,
        seq: 0,
        fixings: Arc::new(Vec::new()),
    };

    if opts.threads > 1 && !opts.deterministic {
        return Ok(parallel(&search, engine, root, incumbent));
    }

    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut seq = 1u64;
    let mut nodes = 0usize;
    let constant = problem.objective_constant();

    while let Some(node) = heap.peek() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - search.gap_abs(inc.objective) {
                // Best-first: every remaining node is at least this bad.
                heap.clear();
                break;
            }
        }
        if nodes >= opts.node_limit {
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;

        search.apply(&mut engine, &node.fixings);
        let cutoff = incumbent
            .as_ref()
            .map(|inc| inc.objective - search.gap_abs(inc.objective) - constant);
        match engine.reoptimize(cutoff) {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible | LpOutcome::Cutoff => continue,
            LpOutcome::Unbounded => {
                return Ok(MilpSolution {
                    objective: T::neg_infinity(),
                    ..MilpSolution::without_values(SolveStatus::Unbounded, nodes)
                })
            }
            LpOutcome::Breakdown(ctx) => {
                return Ok(MilpSolution {
                    breakdown: Some(ctx),
                    ..MilpSolution::without_values(SolveStatus::NumericalBreakdown, nodes)
                })
            }
        }
        let obj = engine.objective() + constant;
        if let Some(inc) = &incumbent {
            if obj >= inc.objective - search.gap_abs(inc.objective) {
                continue;
            }
        }
        match search.branch_var(&engine) {
            None => {
                let found = search.snapshot(&engine);
                incumbent = Some(if opts.polish {
                    search.polish(&mut engine, found)
                } else {
                    found
                });
            }
            Some((j, _)) => {
                if opts.dive && opts.dive_interval > 0 && nodes % opts.dive_interval == 0 {
                    if let Some(found) = search.dive(&mut engine, &node.fixings) {
                        if incumbent.as_ref().map_or(true, |inc| found.objective < inc.objective) {
                            incumbent = Some(if opts.polish {
                                search.polish(&mut engine, found)
                            } else {
                                found
                            });
                        }
                    }
                }
                for val in [T::zero(), T::one()] {
                    let mut f = (*node.fixings).clone();
                    f.push((j, val));
                    heap.push(Node {
                        bound: obj,
                        seq,
                        fixings: Arc::new(f),
                    });
                    seq += 1;
                }
            }
        }
    }

    let best_bound = heap.iter().map(|n| n.bound).fold(T::infinity(), T::min);
    Ok(match incumbent {
        Some(inc) if heap.is_empty() => {
            let bound = inc.objective;
            finish(inc, bound, SolveStatus::Optimal, nodes)
        }
        Some(inc) => finish(inc, best_bound, SolveStatus::GapLimit, nodes),
        None if heap.is_empty() => MilpSolution::without_values(SolveStatus::Infeasible, nodes),
        None => MilpSolution::without_values(SolveStatus::GapLimit, nodes),
    })
}

fn finish<T: Scalar>(inc: Incumbent<T>, bound: T, status: SolveStatus, nodes: usize) -> MilpSolution<T> {
    let gap = ((inc.objective - bound) / inc.objective.abs().max(T::one())).max(T::zero());
    MilpSolution {
        status,
        values: inc.values,
        objective: inc.objective,
        gap,
        nodes,
        breakdown: None,
    }
}

struct Shared<T> {
    heap: BinaryHeap<Node<T>>,
    incumbent: Option<Incumbent<T>>,
    in_flight: usize,
    nodes: usize,
    seq: u64,
    failure: Option<(SolveStatus, Option<PivotContext>)>,
}

fn parallel<T: Scalar>(
    search: &Search<'_, T>,
    engine: LpEngine<T>,
    root: Node<T>,
    incumbent: Option<Incumbent<T>>,
) -> MilpSolution<T> {
    let constant = search.problem.objective_constant();
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let state = Mutex::new(Shared {
        heap,
        incumbent,
        in_flight: 0,
        nodes: 0,
        seq: 1,
        failure: None,
    });
    let cv = Condvar::new();

    std::thread::scope(|scope| {
        for _ in 0..search.opts.threads {
            let mut engine = engine.clone();
            let (state, cv) = (&state, &cv);
            scope.spawn(move || loop {
                let (node, cutoff) = {
                    let mut s = state.lock().expect("solver state poisoned");
                    loop {
                        if s.failure.is_some() {
                            return;
                        }
                        let prune = match (s.heap.peek(), &s.incumbent) {
                            (Some(n), Some(inc)) => {
                                n.bound >= inc.objective - search.gap_abs(inc.objective)
                            }
                            _ => false,
                        };
                        if prune {
                            s.heap.clear();
                        }
                        if s.nodes >= search.opts.node_limit && !s.heap.is_empty() {
                            cv.notify_all();
                            return;
                        }
                        if let Some(node) = s.heap.pop() {
                            s.nodes += 1;
                            s.in_flight += 1;
                            let cutoff = s.incumbent.as_ref().map(|inc| {
                                inc.objective - search.gap_abs(inc.objective) - constant
                            });
                            break (node, cutoff);
                        }
                        if s.in_flight == 0 {
                            cv.notify_all();
                            return;
                        }
                        s = cv.wait(s).expect("solver state poisoned");
                    }
                };

                search.apply(&mut engine, &node.fixings);
                let outcome = engine.reoptimize(cutoff);
                let mut s = state.lock().expect("solver state poisoned");
                s.in_flight -= 1;
                match outcome {
                    LpOutcome::Optimal => {
                        let obj = engine.objective() + constant;
                        let dominated = s
                            .incumbent
                            .as_ref()
                            .map_or(false, |inc| obj >= inc.objective - search.gap_abs(inc.objective));
                        if !dominated {
                            match search.branch_var(&engine) {
                                None => s.incumbent = Some(search.snapshot(&engine)),
                                Some((j, _)) => {
                                    for val in [T::zero(), T::one()] {
                                        let mut f = (*node.fixings).clone();
                                        f.push((j, val));
                                        let seq = s.seq;
                                        s.seq += 1;
                                        s.heap.push(Node {
                                            bound: obj,
                                            seq,
                                            fixings: Arc::new(f),
                                        });
                                    }
                                }
                            }
                        }
                    }
                    LpOutcome::Infeasible | LpOutcome::Cutoff => {}
                    LpOutcome::Unbounded => s.failure = Some((SolveStatus::Unbounded, None)),
                    LpOutcome::Breakdown(ctx) => {
                        s.failure = Some((SolveStatus::NumericalBreakdown, Some(ctx)))
                    }
                }
                cv.notify_all();
            });
        }
    });

    let s = state.into_inner().expect("solver state poisoned");
    if let Some((status, ctx)) = s.failure {
        return MilpSolution {
            breakdown: ctx,
            ..MilpSolution::without_values(status, s.nodes)
        };
    }
    let best_bound = s.heap.iter().map(|n| n.bound).fold(T::infinity(), T::min);
    match s.incumbent {
        Some(inc) if s.heap.is_empty() => {
            let bound = inc.objective;
            finish(inc, bound, SolveStatus::Optimal, s.nodes)
        }
        Some(inc) => finish(inc, best_bound, SolveStatus::GapLimit, s.nodes),
        None if s.heap.is_empty() => MilpSolution::without_values(SolveStatus::Infeasible, s.nodes),
        None => MilpSolution::without_values(SolveStatus::GapLimit, s.nodes),
    }
}
