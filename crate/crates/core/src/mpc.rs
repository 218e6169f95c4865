//! Horizon MILP construction and the receding-horizon simulation loop.

use gridmpc_milp::{
    encode_piecewise, solve_milp_with_hints, ConstraintSense, MilpProblem, MilpSolution, Scalar, SolveStatus,
    SolverOptions, VarId,
};

use crate::battery::{soc_update, switching_cost, BatteryMode, BatteryParams, BlcCurve};
use crate::error::{Error, Result};
use crate::forecast::{comm_loss_rmse, fill_window, LoadHistory};
use crate::metrics::{summarize, SimulationResult};
use crate::scenario::{window, ScenarioTimeSeries, ScenarioWindow, DEFAULT_LOOKAHEAD, DEFAULT_SIMULATION_HOURS};

use BatteryMode::{Charge, Discharge, Idle};
use ConstraintSense::{Eq, Le};

/// Objective weights. The first four scale the battery-switching,
/// lifecycle, imbalance, and resilience terms; the last two rank the load
/// classes inside the resilience term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights<T> {
    pub w_bat: T,
    pub w_blc: T,
    pub w_t: T,
    pub w_r: T,
    pub w_essential: T,
    pub w_regular: T,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Self {
            w_bat: T::lit(1.0),
            w_blc: T::lit(0.0002),
            w_t: T::lit(0.5),
            w_r: T::lit(1.0),
            w_essential: T::lit(0.9),
            w_regular: T::lit(0.1),
        }
    }
}

impl<T: Scalar> Weights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("w_bat", self.w_bat),
            ("w_blc", self.w_blc),
            ("w_t", self.w_t),
            ("w_r", self.w_r),
            ("w_essential", self.w_essential),
            ("w_regular", self.w_regular),
        ];
        for (name, w) in all {
            if !(w >= T::zero() && w <= T::one()) {
                return Err(Error::Weights(format!("{name} = {w} outside [0, 1]")));
            }
        }
        if self.w_essential <= self.w_regular {
            return Err(Error::Weights(format!(
                "w_essential ({}) must exceed w_regular ({})",
                self.w_essential, self.w_regular
            )));
        }
        Ok(())
    }

    pub fn weighted(&self, essential: T, regular: T) -> T {
        self.w_essential * essential + self.w_regular * regular
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrideMode {
    /// Re-plan every hour and commit only the first.
    #[default]
    Hour,
    /// Re-plan once per horizon and commit every planned hour.
    Day,
}

#[derive(Debug, Clone)]
pub struct MpcConfig<T> {
    pub weights: Weights<T>,
    pub params: BatteryParams<T>,
    pub curve: BlcCurve<T>,
    pub simulation_hours: usize,
    pub horizon: usize,
    pub stride: StrideMode,
    /// Linear pieces per side of the imbalance penalty.
    pub imbalance_segments: usize,
    pub solver: SolverOptions<T>,
}

impl<T: Scalar> Default for MpcConfig<T> {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            params: BatteryParams::default(),
            curve: BlcCurve::default(),
            simulation_hours: DEFAULT_SIMULATION_HOURS,
            horizon: DEFAULT_LOOKAHEAD,
            stride: StrideMode::Hour,
            imbalance_segments: 4,
            // Horizon problems rarely close their gap; a bounded search seeded
            // by dives, local search and the previous plan keeps a 72-hour run
            // well under a minute.
            solver: SolverOptions {
                relative_gap: T::lit(1e-4),
                node_limit: 300,
                dive_interval: 50,
                ..SolverOptions::default()
            },
        }
    }
}

impl<T: Scalar> MpcConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.params.validate()?;
        self.solver.validate()?;
        if self.horizon == 0 || self.simulation_hours == 0 || self.imbalance_segments == 0 {
            return Err(Error::Scenario(
                "horizon, simulation hours, and imbalance segments must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-hour data a horizon problem is built from. Loads are whatever the
/// controller believes, which during comm loss are forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonInputs<T> {
    pub generation: Vec<T>,
    pub essential: Vec<T>,
    pub regular: Vec<T>,
}

impl<T: Scalar> HorizonInputs<T> {
    pub fn new(generation: Vec<T>, essential: Vec<T>, regular: Vec<T>) -> Result<Self> {
        let n = generation.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for len in [essential.len(), regular.len()] {
            if len != n {
                return Err(Error::LengthMismatch(n, len));
            }
        }
        let ok = |v: &T| v.is_finite() && *v >= T::zero();
        if !(generation.iter().all(ok) && essential.iter().all(ok) && regular.iter().all(ok)) {
            return Err(Error::Scenario("horizon powers must be finite and nonnegative".into()));
        }
        Ok(Self {
            generation,
            essential,
            regular,
        })
    }

    /// Actual data of the window, ignoring availability.
    pub fn actual(w: &ScenarioWindow<'_, T>) -> Self {
        Self {
            generation: (0..w.len()).map(|k| w.generation(k)).collect(),
            essential: w.essential().to_vec(),
            regular: w.regular().to_vec(),
        }
    }

    /// Actual generation with loads filled in by the forecaster where hidden.
    pub fn observed(w: &ScenarioWindow<'_, T>, history: &LoadHistory<T>) -> Result<Self> {
        let (essential, regular) = fill_window(w, history)?;
        Ok(Self {
            generation: (0..w.len()).map(|k| w.generation(k)).collect(),
            essential,
            regular,
        })
    }

    pub fn len(&self) -> usize {
        self.generation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generation.is_empty()
    }
}

#[derive(Debug, Clone)]
struct HourVars {
    p_ch: VarId,
    p_dis: VarId,
    mode: [VarId; 3],
    soc: VarId,
    blc: VarId,
    essential_shed: VarId,
    regular_shed: VarId,
    surplus: VarId,
}

fn mode_index(m: BatteryMode) -> usize {
    match m {
        Charge => 0,
        Discharge => 1,
        Idle => 2,
    }
}

/// A built horizon problem together with the handles needed to read a plan
/// back out of its solution.
#[derive(Debug, Clone)]
pub struct HorizonModel<T> {
    pub problem: MilpProblem<T>,
    hours: Vec<HourVars>,
    inputs: HorizonInputs<T>,
    weighted_load: Vec<T>,
    weights: Weights<T>,
    params: BatteryParams<T>,
}

/// Builds the MILP for one horizon.
///
/// Per hour `k`: charge/discharge powers gated by one-hot mode binaries, the
/// SOC chain, depth of discharge `1 - soc` mapped through the normalized
/// lifecycle curve, shed per load class, curtailed surplus, and the power
/// balance `gen + p_dis - p_ch + shed = load + surplus`. The objective is
///
/// ```text
/// sum_k  w_bat * switching(k) - w_blc * c_bat * blc(k) + w_t * imbalance(k)
///      + w_r * (w_essential * shed_e(k) + w_regular * shed_r(k)) / weighted_load(k)
/// ```
///
/// where the last term is the variable part of `-w_r * J_R(k)` and
/// `imbalance(k)` is a convex piecewise-linear stand-in for
/// `(deficit or surplus / scale)^2`. Hours with zero weighted load
/// contribute no resilience term.
pub fn build_horizon_problem<T: Scalar>(
    inputs: &HorizonInputs<T>,
    soc0: T,
    prev_mode: BatteryMode,
    config: &MpcConfig<T>,
) -> Result<HorizonModel<T>> {
    let p = &config.params;
    let w = &config.weights;
    let zero = T::zero();
    let one = T::one();
    if !(soc0 >= p.soc_min && soc0 <= p.soc_max) {
        return Err(Error::Battery(format!(
            "initial SOC {soc0} outside [{}, {}]",
            p.soc_min, p.soc_max
        )));
    }
    let n = inputs.len();
    let blc_curve = config.curve.normalized();
    let scale = (0..n).fold(p.p_max, |m, k| {
        m.max(inputs.essential[k] + inputs.regular[k])
            .max(inputs.generation[k] + p.p_max)
    });
    let segs = config.imbalance_segments;
    let seg_width = scale / T::from_usize(segs).unwrap();
    let seg_slope = |i: usize| {
        T::from_usize(2 * i + 1).unwrap() / (T::from_usize(segs).unwrap() * scale)
    };

    // 1 - soc_max can land an ulp outside the curve's first breakpoint.
    let (first, last) = blc_curve.domain();
    let snap = |v: T, edge: T| if (v - edge).abs() <= T::epsilon() * T::lit(16.0) { edge } else { v };
    let (dod_lo, dod_hi) = (snap(one - p.soc_max, first), snap(one - p.soc_min, last));

    let mut pb = MilpProblem::new();
    let mut hours: Vec<HourVars> = Vec::with_capacity(n);
    let mut weighted_load = Vec::with_capacity(n);
    let charge_gain = p.eta_ch / p.e_max;
    let discharge_loss = one / (p.eta_dis * p.e_max);

    for k in 0..n {
        let (gen, ess, reg) = (inputs.generation[k], inputs.essential[k], inputs.regular[k]);
        let p_ch = pb.add_continuous(format!("p_ch[{k}]"), zero, p.p_max);
        let p_dis = pb.add_continuous(format!("p_dis[{k}]"), zero, p.p_max);
        let mode = [
            pb.add_binary(format!("ch[{k}]")),
            pb.add_binary(format!("dis[{k}]")),
            pb.add_binary(format!("idle[{k}]")),
        ];
        pb.add_constraint(
            format!("one_mode[{k}]"),
            mode.iter().map(|&d| (d, one)).collect(),
            Eq,
            one,
        );
        pb.add_constraint(format!("gate_ch[{k}]"), vec![(p_ch, one), (mode[0], -p.p_max)], Le, zero);
        pb.add_constraint(format!("gate_dis[{k}]"), vec![(p_dis, one), (mode[1], -p.p_max)], Le, zero);

        let soc = pb.add_continuous(format!("soc[{k}]"), p.soc_min, p.soc_max);
        let mut chain = vec![(soc, one), (p_ch, -charge_gain), (p_dis, discharge_loss)];
        let rhs = if k == 0 {
            soc0
        } else {
            chain.push((hours[k - 1].soc, -one));
            zero
        };
        pb.add_constraint(format!("soc_chain[{k}]"), chain, Eq, rhs);

        let dod = pb.add_continuous(format!("dod[{k}]"), dod_lo, dod_hi);
        pb.add_constraint(format!("dod_def[{k}]"), vec![(dod, one), (soc, one)], Eq, one);
        let blc = encode_piecewise(&mut pb, dod, &blc_curve)?;

        let essential_shed = pb.add_continuous(format!("shed_e[{k}]"), zero, ess);
        let regular_shed = pb.add_continuous(format!("shed_r[{k}]"), zero, reg);
        let surplus = pb.add_continuous(format!("surplus[{k}]"), zero, gen + p.p_max);
        pb.add_constraint(
            format!("balance[{k}]"),
            vec![
                (p_dis, one),
                (p_ch, -one),
                (essential_shed, one),
                (regular_shed, one),
                (surplus, -one),
            ],
            Eq,
            ess + reg - gen,
        );

        // Imbalance penalty: deficit and surplus each split into pieces of
        // increasing slope, filled in order at the optimum.
        let mut deficit_row = vec![(essential_shed, -one), (regular_shed, -one)];
        let mut surplus_row = vec![(surplus, -one)];
        for i in 0..segs {
            let d = pb.add_continuous(format!("def[{k}]_{i}"), zero, seg_width);
            let s = pb.add_continuous(format!("sur[{k}]_{i}"), zero, seg_width);
            pb.set_objective_coeff(d, w.w_t * seg_slope(i));
            pb.set_objective_coeff(s, w.w_t * seg_slope(i));
            deficit_row.push((d, one));
            surplus_row.push((s, one));
        }
        pb.add_constraint(format!("deficit_split[{k}]"), deficit_row, Eq, zero);
        pb.add_constraint(format!("surplus_split[{k}]"), surplus_row, Eq, zero);

        pb.add_objective_term(blc, -(w.w_blc * p.c_bat));
        let wl = w.weighted(ess, reg);
        if wl > zero {
            pb.add_objective_term(essential_shed, w.w_r * w.w_essential / wl);
            pb.add_objective_term(regular_shed, w.w_r * w.w_regular / wl);
        }
        weighted_load.push(wl);
        pb.add_objective_term(mode[2], w.w_bat * p.c_idle);

        // Mode transitions. Hour 0 is anchored to the mode already running.
        // Later hours route the previous one-hot mode vector onto the current
        // one through pair flows; with 0/1 modes exactly the realized pair
        // carries flow, and fractional modes still pay for what changed.
        if k == 0 {
            for b in BatteryMode::ALL {
                let cost = w.w_bat * (switching_cost(prev_mode, b, p) - switching_cost(b, b, p));
                if cost > zero {
                    pb.add_objective_term(mode[mode_index(b)], cost);
                }
            }
        } else {
            let prev = hours[k - 1].mode;
            let mut into: [Vec<(VarId, T)>; 3] = Default::default();
            for a in BatteryMode::ALL {
                let mut out = vec![(prev[mode_index(a)], -one)];
                for b in BatteryMode::ALL {
                    let f = pb.add_continuous(format!("sw_{}_{}[{k}]", a.label(), b.label()), zero, one);
                    let cost = w.w_bat * (switching_cost(a, b, p) - switching_cost(b, b, p));
                    if cost > zero {
                        pb.set_objective_coeff(f, cost);
                    }
                    out.push((f, one));
                    into[mode_index(b)].push((f, one));
                }
                pb.add_constraint(format!("sw_from_{}[{k}]", a.label()), out, Eq, zero);
            }
            // The third inflow row is implied by the others and the one-hot rows.
            for b in [Charge, Discharge] {
                let mut row = std::mem::take(&mut into[mode_index(b)]);
                row.push((mode[mode_index(b)], -one));
                pb.add_constraint(format!("sw_into_{}[{k}]", b.label()), row, Eq, zero);
            }
        }

        hours.push(HourVars {
            p_ch,
            p_dis,
            mode,
            soc,
            blc,
            essential_shed,
            regular_shed,
            surplus,
        });
    }

    Ok(HorizonModel {
        problem: pb,
        hours,
        inputs: inputs.clone(),
        weighted_load,
        weights: *w,
        params: p.clone(),
    })
}

/// One hour of a solved plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourPlan<T> {
    pub mode: BatteryMode,
    pub p_ch: T,
    pub p_dis: T,
    pub soc: T,
    /// Normalized lifecycle value at this hour's depth of discharge.
    pub blc: T,
    pub essential_shed: T,
    pub regular_shed: T,
    pub surplus: T,
    /// Hourly resilience `1 - weighted_loss / weighted_load`.
    pub resilience: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution<T> {
    pub hours: Vec<HourPlan<T>>,
    pub objective: T,
    pub status: SolveStatus,
    pub gap: T,
    pub nodes: usize,
}

impl<T: Scalar> HorizonSolution<T> {
    /// Mean hourly resilience over the plan.
    pub fn expected_ri(&self) -> T {
        let sum = self.hours.iter().fold(T::zero(), |a, h| a + h.resilience);
        sum / T::from_usize(self.hours.len()).unwrap()
    }
}

impl<T: Scalar> HorizonModel<T> {
    pub fn inputs(&self) -> &HorizonInputs<T> {
        &self.inputs
    }

    pub fn horizon(&self) -> usize {
        self.hours.len()
    }

    /// Mode variables of hour `k` in CH, DIS, IDLE order.
    pub fn mode_vars(&self, k: usize) -> [VarId; 3] {
        self.hours[k].mode
    }

    pub fn power_vars(&self, k: usize) -> (VarId, VarId) {
        (self.hours[k].p_ch, self.hours[k].p_dis)
    }

    pub fn shed_vars(&self, k: usize) -> (VarId, VarId) {
        (self.hours[k].essential_shed, self.hours[k].regular_shed)
    }

    pub fn soc_var(&self, k: usize) -> VarId {
        self.hours[k].soc
    }

    /// Reads the plan from a solution that carries values.
    pub fn extract(&self, sol: &MilpSolution<T>) -> HorizonSolution<T> {
        let zero = T::zero();
        let hours = self
            .hours
            .iter()
            .enumerate()
            .map(|(k, hv)| {
                let v = |id: VarId| sol.value(id).max(zero);
                let mode = BatteryMode::ALL
                    .into_iter()
                    .fold((Idle, T::neg_infinity()), |best, m| {
                        let x = v(hv.mode[mode_index(m)]);
                        if x > best.1 { (m, x) } else { best }
                    })
                    .0;
                let (es, rs) = (v(hv.essential_shed), v(hv.regular_shed));
                let wl = self.weighted_load[k];
                let resilience = if wl > zero {
                    T::one() - self.weights.weighted(es, rs) / wl
                } else {
                    T::one()
                };
                HourPlan {
                    mode,
                    p_ch: if mode == Charge { v(hv.p_ch).min(self.params.p_max) } else { zero },
                    p_dis: if mode == Discharge { v(hv.p_dis).min(self.params.p_max) } else { zero },
                    soc: sol.value(hv.soc),
                    blc: sol.value(hv.blc),
                    essential_shed: es,
                    regular_shed: rs,
                    surplus: v(hv.surplus),
                    resilience,
                }
            })
            .collect();
        HorizonSolution {
            hours,
            objective: sol.objective,
            status: sol.status,
            gap: sol.gap,
            nodes: sol.nodes,
        }
    }

    /// Solves and extracts; anything without a usable plan is an error.
    pub fn solve(&self, opts: &SolverOptions<T>, hour: usize) -> Result<HorizonSolution<T>> {
        self.solve_warm(opts, hour, None)
    }

    /// Like [`solve`](Self::solve), seeding the search with the modes of an
    /// earlier plan moved forward by `shift` hours, its last hour repeated.
    /// A second seed discharges in every hour the inputs show a deficit and
    /// charges otherwise; the horizon problems are too large to search to
    /// optimality, and without it the previous plan can hold the battery
    /// through deficits it would pay to cover.
    pub fn solve_warm(
        &self,
        opts: &SolverOptions<T>,
        hour: usize,
        previous: Option<(&HorizonSolution<T>, usize)>,
    ) -> Result<HorizonSolution<T>> {
        let hint = |mode_at: &dyn Fn(usize) -> BatteryMode| -> Vec<(VarId, T)> {
            let mut h = Vec::with_capacity(3 * self.hours.len());
            for (k, hv) in self.hours.iter().enumerate() {
                let mode = mode_at(k);
                for m in BatteryMode::ALL {
                    h.push((hv.mode[mode_index(m)], if m == mode { T::one() } else { T::zero() }));
                }
            }
            h
        };
        let mut hints = Vec::with_capacity(2);
        if let Some((prev, shift)) = previous.filter(|(p, _)| !p.hours.is_empty()) {
            hints.push(hint(&|k| prev.hours[(k + shift).min(prev.hours.len() - 1)].mode));
        }
        let inputs = &self.inputs;
        hints.push(hint(&|k| {
            if inputs.generation[k] < inputs.essential[k] + inputs.regular[k] {
                Discharge
            } else {
                Charge
            }
        }));
        let sol = solve_milp_with_hints(&self.problem, opts, &hints)?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::GapLimit if sol.has_values() => Ok(self.extract(&sol)),
            status => Err(Error::Solver {
                hour,
                status,
                detail: sol
                    .breakdown
                    .map(|b| format!(": {b}"))
                    .unwrap_or_default(),
            }),
        }
    }
}

/// Controller state carried between decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcState<T> {
    pub hour: usize,
    pub soc: T,
    pub prev_mode: BatteryMode,
}

/// What actually happened in one simulated hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcDecision<T> {
    pub hour: usize,
    pub mode: BatteryMode,
    pub p_ch: T,
    pub p_dis: T,
    pub soc_after: T,
    pub essential_shed: T,
    pub regular_shed: T,
    pub surplus: T,
    /// Actual loads of the hour.
    pub essential_load: T,
    pub regular_load: T,
    pub horizon_objective: T,
    pub expected_ri: T,
}

/// Applies a planned hour to the actual loads. Battery powers are kept
/// (trimmed only to stay inside the SOC limits), except that a shortfall
/// larger than the planned shed first curtails charging. What remains is
/// shed from regular load first, then essential, and any excess is surplus.
/// A charge that the actual hour cannot feed is reduced instead.
pub fn commit_hour<T: Scalar>(
    plan: &HourPlan<T>,
    state: &MpcState<T>,
    generation: T,
    essential_load: T,
    regular_load: T,
    params: &BatteryParams<T>,
) -> Result<(MpcDecision<T>, MpcState<T>)> {
    let zero = T::zero();
    let mut p_ch = plan
        .p_ch
        .min((params.soc_max - state.soc).max(zero) * params.e_max / params.eta_ch);
    let p_dis = plan
        .p_dis
        .min((state.soc - params.soc_min).max(zero) * params.e_max * params.eta_dis);
    let mut net = generation + p_dis - p_ch - essential_load - regular_load;
    // Load the plan did not foresee is served by curtailing the charge
    // before anything beyond the planned shed is dropped.
    let unforeseen = -net - (plan.essential_shed + plan.regular_shed);
    if unforeseen > T::lit(1e-7) && p_ch > zero {
        let cut = unforeseen.min(p_ch);
        p_ch = p_ch - cut;
        net = net + cut;
    }
    let total_load = essential_load + regular_load;
    if -net > total_load {
        let cut = (-net - total_load).min(p_ch);
        p_ch = p_ch - cut;
        net = net + cut;
    }
    let (essential_shed, regular_shed, surplus) = if net >= zero {
        (zero, zero, net)
    } else {
        let deficit = -net;
        let rs = deficit.min(regular_load);
        (
            (deficit - rs).min(essential_load),
            rs,
            zero,
        )
    };
    let soc_after = soc_update(state.soc, p_ch, p_dis, params)?
        .max(params.soc_min)
        .min(params.soc_max);
    let mode = if p_ch > zero {
        Charge
    } else if p_dis > zero {
        Discharge
    } else {
        plan.mode
    };
    Ok((
        MpcDecision {
            hour: state.hour,
            mode,
            p_ch,
            p_dis,
            soc_after,
            essential_shed,
            regular_shed,
            surplus,
            essential_load,
            regular_load,
            horizon_objective: zero,
            expected_ri: zero,
        },
        MpcState {
            hour: state.hour + 1,
            soc: soc_after,
            prev_mode: mode,
        },
    ))
}

/// One receding-horizon decision: plan over `win` with the loads visible
/// through `history`, then commit the first hour against actual loads.
pub fn step<T: Scalar>(
    state: &MpcState<T>,
    win: &ScenarioWindow<'_, T>,
    history: &LoadHistory<T>,
    config: &MpcConfig<T>,
) -> Result<(MpcDecision<T>, MpcState<T>, HorizonSolution<T>)> {
    if win.start() != state.hour {
        return Err(Error::Scenario(format!(
            "window starts at {} but the controller is at hour {}",
            win.start(),
            state.hour
        )));
    }
    let model = build_horizon_problem(&HorizonInputs::observed(win, history)?, state.soc, state.prev_mode, config)?;
    let plan = model.solve(&config.solver, state.hour)?;
    let series = win.series();
    let h = state.hour;
    let (mut decision, next) = commit_hour(
        &plan.hours[0],
        state,
        series.generation(h),
        series.essential()[h],
        series.regular()[h],
        &config.params,
    )?;
    decision.horizon_objective = plan.objective;
    decision.expected_ri = plan.expected_ri();
    Ok((decision, next, plan))
}

/// Runs the whole simulation. See [`run_with`].
pub fn run<T: Scalar>(scenario: &ScenarioTimeSeries<T>, config: &MpcConfig<T>) -> Result<SimulationResult<T>> {
    run_with(scenario, config, |_, _| Ok(()))
}

/// Runs the simulation, handing every built horizon model to `observe`
/// together with its decision hour before it is solved.
pub fn run_with<T, F>(
    scenario: &ScenarioTimeSeries<T>,
    config: &MpcConfig<T>,
    mut observe: F,
) -> Result<SimulationResult<T>>
where
    T: Scalar,
    F: FnMut(usize, &HorizonModel<T>) -> Result<()>,
{
    config.validate()?;
    let required = config.simulation_hours + config.horizon;
    if scenario.hours() < required {
        return Err(Error::TooShort {
            found: scenario.hours(),
            required,
        });
    }
    let params = &config.params;
    let mut state = MpcState {
        hour: 0,
        soc: params.soc_init,
        prev_mode: Idle,
    };
    let mut history = LoadHistory::new();
    let mut records = Vec::with_capacity(config.simulation_hours);
    let mut ri_curve = Vec::new();
    let mut previous: Option<(HorizonSolution<T>, usize)> = None;
    while state.hour < config.simulation_hours {
        let t = state.hour;
        let win = window(scenario, t, config.horizon, t.checked_sub(1))?;
        let model = build_horizon_problem(
            &HorizonInputs::observed(&win, &history)?,
            state.soc,
            state.prev_mode,
            config,
        )?;
        observe(t, &model)?;
        let commit = match config.stride {
            StrideMode::Hour => 1,
            StrideMode::Day => config.horizon,
        }
        .min(config.simulation_hours - t);
        let plan = model.solve_warm(&config.solver, t, previous.as_ref().map(|(p, start)| (p, t - start)))?;
        let expected = plan.expected_ri();
        ri_curve.push((t, expected));
        for hour_plan in &plan.hours[..commit] {
            let h = state.hour;
            let (mut decision, next) = commit_hour(
                hour_plan,
                &state,
                scenario.generation(h),
                scenario.essential()[h],
                scenario.regular()[h],
                params,
            )?;
            decision.horizon_objective = plan.objective;
            decision.expected_ri = expected;
            records.push(decision);
            history.push(scenario.essential()[h], scenario.regular()[h]);
            state = next;
        }
        previous = Some((plan, t));
    }
    let rmse = comm_loss_rmse(&scenario.truncated(config.simulation_hours)?)?;
    summarize(
        records,
        ri_curve,
        params.soc_init,
        &config.weights,
        &config.curve,
        rmse,
    )
}
