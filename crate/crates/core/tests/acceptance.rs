//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion fails that is not listed in `KNOWN_FAILURES`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use gridmpc_core::mpc::HorizonSolution;
use gridmpc_core::scenario::GeneratorConfig;
use gridmpc_core::{
    build_horizon_problem, generate_synthetic, load_scenario, run, BatteryMode, BatteryParams, BlcCurve,
    HorizonInputs, MpcConfig, ScenarioTimeSeries, SimulationResult, Weights,
};
use gridmpc_milp::{
    encode_piecewise, solve_lp, solve_milp, ConstraintSense, MilpProblem, SolveStatus, SolverOptions, VarId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for documented reasons (see the README).
const KNOWN_FAILURES: &[&str] = &["expected-ri-trough"];

const BUNDLED_SEED: u64 = 7;

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn bundled() -> ScenarioTimeSeries {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/scenario.csv");
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------- milp oracle

fn random_problem(rng: &mut ChaCha8Rng) -> MilpProblem<f64> {
    let n_bin = rng.gen_range(1..=12);
    let n_cont = rng.gen_range(0..=6);
    let m = rng.gen_range(1..=10);
    let mut p = MilpProblem::new();
    let mut vars = Vec::new();
    let mut point = Vec::new();
    for i in 0..n_bin {
        vars.push(p.add_binary(format!("b{i}")));
        point.push(rng.gen_range(0..2) as f64);
    }
    for i in 0..n_cont {
        let ub = rng.gen_range(1..8) as f64;
        vars.push(p.add_continuous(format!("x{i}"), 0.0, ub));
        point.push(rng.gen_range(0.0..ub));
    }
    for r in 0..m {
        let mut coeffs = Vec::new();
        let mut act = 0.0;
        for (j, &v) in vars.iter().enumerate() {
            if rng.gen_bool(0.5) {
                let c = rng.gen_range(-5..=5) as f64;
                if c != 0.0 {
                    coeffs.push((v, c));
                    act += c * point[j];
                }
            }
        }
        // Rows are slack around a random point, so most instances are feasible.
        let (sense, rhs) = match rng.gen_range(0..6) {
            0 => (ConstraintSense::Ge, act - rng.gen_range(0.0..2.0)),
            1 if n_cont > 0 => (ConstraintSense::Eq, act),
            _ => (ConstraintSense::Le, act + rng.gen_range(0.0..2.0)),
        };
        p.add_constraint(format!("r{r}"), coeffs, sense, rhs);
    }
    for &v in &vars {
        p.set_objective_coeff(v, rng.gen_range(-10.0..10.0));
    }
    p
}

fn enumerate(p: &MilpProblem<f64>) -> Option<f64> {
    let bins: Vec<VarId> = p.binaries().collect();
    let opts = SolverOptions::default();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = p.relaxed();
        for (k, &b) in bins.iter().enumerate() {
            fixed.fix(b, ((mask >> k) & 1) as f64);
        }
        let sol = solve_lp(&fixed, &opts).unwrap();
        if sol.status == SolveStatus::Optimal {
            best = Some(best.map_or(sol.objective, |b: f64| b.min(sol.objective)));
        }
    }
    best
}

fn milp_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut infeasible = 0;
    for _ in 0..50 {
        let p = random_problem(&mut rng);
        let sol = solve_milp(&p, &SolverOptions::default()).unwrap();
        match enumerate(&p) {
            None => {
                infeasible += 1;
                if sol.status != SolveStatus::Infeasible {
                    mismatches += 1;
                }
            }
            Some(best) => {
                let err = (sol.objective - best).abs();
                worst = worst.max(err);
                if sol.status != SolveStatus::Optimal || err > 1e-6 {
                    mismatches += 1;
                }
            }
        }
    }
    let el = t0.elapsed();
    outcome(
        "milp-oracle",
        mismatches == 0 && el < Duration::from_secs(10),
        format!("50 problems ({infeasible} infeasible), max |err| {worst:.1e}, {mismatches} mismatches, {el:.1?} (< 10 s)"),
    )
}

// ---------------------------------------------------------------- piecewise

/// Straight-line interpolation on the raw breakpoints.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points.windows(2).position(|w| x <= w[1].0).unwrap();
    let ((x0, y0), (x1, y1)) = (points[i], points[i + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn piecewise_exactness() -> Outcome {
    let t0 = Instant::now();
    let curve = BlcCurve::default();
    let norm = curve.normalized();
    let top = curve.max_cycles();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d: f64 = rng.gen_range(0.1..=0.9);
        let expect = interpolate(curve.points(), d) / top;
        let reference = gridmpc_core::blc_eval(&curve, d).unwrap() / top;
        worst = worst.max((expect - reference).abs());
        // The encoding must pin y whichever way the objective pushes it.
        for sign in [1.0, -1.0] {
            let mut p = MilpProblem::new();
            let x = p.add_continuous("dod", d, d);
            let y = encode_piecewise(&mut p, x, &norm).unwrap();
            p.set_objective_coeff(y, sign);
            let sol = solve_milp(&p, &SolverOptions::default()).unwrap();
            worst = worst.max((sol.value(y) - expect).abs());
        }
    }
    let el = t0.elapsed();
    outcome(
        "piecewise-exact",
        worst <= 1e-6 && el < Duration::from_secs(10),
        format!("100 depths, max |encoded - curve| {worst:.1e} (<= 1e-6, normalized units), {el:.1?}"),
    )
}

// ---------------------------------------------------------------- toy horizon

struct Toy {
    gen: [f64; 2],
    ess: [f64; 2],
    reg: [f64; 2],
    soc0: f64,
    prev: BatteryMode,
    weights: Weights,
}

fn toy_params() -> BatteryParams {
    // Unit efficiencies and a 4 kWh pack put every kink of the objective on
    // the 0.01 kW grid, so the grid search is exact.
    BatteryParams {
        eta_ch: 1.0,
        eta_dis: 1.0,
        p_max: 2.0,
        ..BatteryParams::default()
    }
}

fn toy_brute_force(toy: &Toy, p: &BatteryParams, curve: &BlcCurve) -> f64 {
    let w = &toy.weights;
    let top = curve.max_cycles();
    let scale = (0..2).fold(p.p_max, |m, k| m.max(toy.ess[k] + toy.reg[k]).max(toy.gen[k] + p.p_max));
    // Quadratic sampled at quarter steps of the scale, linear in between.
    let penalty = |x: f64| {
        let q = 4.0 * x / scale;
        let j = q.floor().min(3.0);
        let f = |v: f64| (v / 4.0).powi(2);
        f(j) + (f(j + 1.0) - f(j)) * (q - j)
    };
    let switch = |a: BatteryMode, b: BatteryMode| {
        let t = if a == b {
            0.0
        } else if a != BatteryMode::Idle && b != BatteryMode::Idle {
            p.c_ch_dis
        } else {
            p.c_no_ch_dis
        };
        t + if b == BatteryMode::Idle { p.c_idle } else { 0.0 }
    };
    let steps = (p.p_max * 100.0).round() as i64;
    let options: Vec<(BatteryMode, f64)> = [BatteryMode::Charge, BatteryMode::Discharge]
        .into_iter()
        .flat_map(|m| (0..=steps).map(move |i| (m, i as f64 / 100.0)))
        .chain(std::iter::once((BatteryMode::Idle, 0.0)))
        .collect();
    let hour_cost = |k: usize, prev: BatteryMode, soc: f64, opt: (BatteryMode, f64)| -> Option<(f64, f64)> {
        let (mode, power) = opt;
        let signed = match mode {
            BatteryMode::Charge => power,
            BatteryMode::Discharge => -power,
            BatteryMode::Idle => 0.0,
        };
        let next = soc + signed / p.e_max;
        if next < p.soc_min - 1e-12 || next > p.soc_max + 1e-12 {
            return None;
        }
        let deficit = toy.ess[k] + toy.reg[k] - toy.gen[k] + signed;
        let (es, rs, surplus) = if deficit > 0.0 {
            let rs = deficit.min(toy.reg[k]);
            let es = deficit - rs;
            if es > toy.ess[k] + 1e-12 {
                return None;
            }
            (es, rs, 0.0)
        } else {
            (0.0, 0.0, -deficit)
        };
        let wl = w.w_essential * toy.ess[k] + w.w_regular * toy.reg[k];
        let resilience = if wl > 0.0 { w.w_r * (w.w_essential * es + w.w_regular * rs) / wl } else { 0.0 };
        let life = interpolate(curve.points(), 1.0 - next) / top;
        let cost = w.w_bat * switch(prev, mode) - w.w_blc * p.c_bat * life
            + w.w_t * (penalty(es + rs) + penalty(surplus))
            + resilience;
        Some((cost, next))
    };
    let mut best = f64::INFINITY;
    for &a in &options {
        let Some((c0, s1)) = hour_cost(0, toy.prev, toy.soc0, a) else { continue };
        for &b in &options {
            if let Some((c1, _)) = hour_cost(1, a.0, s1, b) {
                best = best.min(c0 + c1);
            }
        }
    }
    best
}

fn grid(rng: &mut ChaCha8Rng, hi: f64) -> f64 {
    // Multiples of 0.04 kW keep the penalty breakpoints on the search grid.
    (rng.gen_range(0.0..hi) / 0.04).round() * 0.04
}

fn toy_instances() -> Vec<Toy> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut out = vec![Toy {
        // One kilowatt short in the first hour only.
        gen: [1.0, 2.0],
        ess: [1.0, 1.0],
        reg: [1.0, 1.0],
        soc0: 0.5,
        prev: BatteryMode::Idle,
        weights: Weights::default(),
    }];
    while out.len() < 20 {
        let modes = BatteryMode::ALL;
        out.push(Toy {
            gen: [grid(&mut rng, 4.0), grid(&mut rng, 4.0)],
            ess: [grid(&mut rng, 2.0), grid(&mut rng, 2.0)],
            reg: [grid(&mut rng, 2.0), grid(&mut rng, 2.0)],
            soc0: (rng.gen_range(0.2..0.9f64) * 100.0).round() / 100.0,
            prev: modes[rng.gen_range(0..3)],
            weights: Weights {
                w_bat: rng.gen_range(0.0..1.0),
                w_blc: rng.gen_range(0.0..0.004),
                w_t: rng.gen_range(0.0..1.0),
                w_r: rng.gen_range(0.0..1.0),
                ..Weights::default()
            },
        });
    }
    out
}

fn toy_horizon() -> Outcome {
    let p = toy_params();
    let mut worst: f64 = 0.0;
    for toy in toy_instances() {
        let cfg = MpcConfig {
            weights: toy.weights,
            params: p.clone(),
            horizon: 2,
            ..MpcConfig::default()
        };
        let inputs = HorizonInputs::new(toy.gen.to_vec(), toy.ess.to_vec(), toy.reg.to_vec()).unwrap();
        let model = build_horizon_problem(&inputs, toy.soc0, toy.prev, &cfg).unwrap();
        let plan: HorizonSolution<f64> = model.solve(&cfg.solver, 0).unwrap();
        let oracle = toy_brute_force(&toy, &p, &cfg.curve);
        worst = worst.max((plan.objective - oracle).abs());
    }
    outcome(
        "toy-horizon",
        worst <= 1e-3,
        format!("20 two-hour instances, max |engine - brute force| {worst:.1e} (<= 1e-3)"),
    )
}

// ---------------------------------------------------------------- full run

fn full_run_invariants(res: &SimulationResult, elapsed: Duration) -> Outcome {
    let mut bad = Vec::new();
    for r in &res.records {
        if !(r.soc_after >= 0.2 - 1e-9 && r.soc_after <= 0.9 + 1e-9) {
            bad.push(format!("soc {} at {}", r.soc_after, r.hour));
        }
        let consistent = match r.mode {
            BatteryMode::Charge => r.p_dis == 0.0,
            BatteryMode::Discharge => r.p_ch == 0.0,
            BatteryMode::Idle => r.p_ch == 0.0 && r.p_dis == 0.0,
        };
        if !consistent {
            bad.push(format!("mode/power mismatch at {}", r.hour));
        }
        if r.essential_shed > r.essential_load || r.regular_shed > r.regular_load {
            bad.push(format!("shed above load at {}", r.hour));
        }
    }
    let l = &res.losses;
    if l.total != l.essential + l.regular {
        bad.push("loss totals".into());
    }
    if !(0.0..=1.0).contains(&res.resilience_index) {
        bad.push("RI outside [0, 1]".into());
    }
    let pass = bad.is_empty() && res.records.len() == 72 && elapsed < Duration::from_secs(60);
    outcome(
        "full-run-invariants",
        pass,
        format!(
            "72 decisions, {} violations{}, RI {:.4}, runtime {elapsed:.1?} (< 60 s)",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default(),
            res.resilience_index
        ),
    )
}

fn pre_event_charging(res: &SimulationResult) -> Outcome {
    let soc = res.records[26].soc_after;
    outcome("pre-event-charging", soc >= 0.85, format!("SOC after hour 26 = {soc:.4} (>= 0.85)"))
}

fn ri_trough(res: &SimulationResult, s: &ScenarioTimeSeries, horizon: usize) -> Outcome {
    let curve: Vec<f64> = res.expected_ri_curve.iter().map(|p| p.1).collect();
    let (at, low) = curve
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (t, &v)| if v < b.1 { (t, v) } else { b });
    let event = s.hilp_hours();
    let (first, last) = (event[0], *event.last().unwrap());
    // Windows that end before the event starts.
    let calm = first + 1 - horizon;
    let pre = curve[..calm].iter().sum::<f64>() / calm as f64;
    let at50 = curve[50];
    let inside = (first..=last).contains(&at);
    let recovered = at50 >= pre - 0.02;
    let in_window = curve[first..=last].iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        "expected-ri-trough",
        inside && recovered,
        format!(
            "minimum {low:.4} at decision hour {at} (want {first}..={last}; lowest inside {in_window:.4}), \
             pre-event {pre:.4}, hour 50 {at50:.4} (within 0.02)"
        ),
    )
}

// ---------------------------------------------------------------- priority

fn priority() -> Outcome {
    let n = 24;
    let mut gen = vec![3.0; n];
    gen[0] = 2.0;
    let inputs = HorizonInputs::new(gen, vec![1.5; n], vec![1.5; n]).unwrap();
    let cfg = MpcConfig::default();
    let soc0 = cfg.params.soc_min;
    let shed = |w: Weights| {
        let c = MpcConfig { weights: w, ..cfg.clone() };
        let plan = build_horizon_problem(&inputs, soc0, BatteryMode::Idle, &c)
            .unwrap()
            .solve(&c.solver, 0)
            .unwrap();
        (plan.hours[0].essential_shed, plan.hours[0].regular_shed)
    };
    let (e, r) = shed(Weights::default());
    let swapped = Weights {
        w_essential: 0.1,
        w_regular: 0.9,
        ..Weights::default()
    };
    let (se, sr) = shed(swapped);
    outcome(
        "priority",
        e <= r && se > sr,
        format!("1 kW deficit, equal loads: shed (essential, regular) = ({e:.3}, {r:.3}); weights swapped ({se:.3}, {sr:.3})"),
    )
}

// ---------------------------------------------------------------- comm loss

fn comm_loss(with: &SimulationResult, without: &SimulationResult) -> Outcome {
    let d = (with.resilience_index - without.resilience_index).abs();
    let rmse = with.rmse.expect("bundled scenario has a comm-loss window");
    outcome(
        "comm-loss-robustness",
        d <= 0.01 && rmse.essential < rmse.regular,
        format!(
            "RI {:.4} with comm loss, {:.4} without, |diff| {d:.4} (<= 0.01); RMSE essential {:.4} < regular {:.4}",
            with.resilience_index, without.resilience_index, rmse.essential, rmse.regular
        ),
    )
}

// ---------------------------------------------------------------- locality

fn trace_bytes(res: &SimulationResult) -> Vec<u8> {
    let mut out = String::new();
    for r in &res.records {
        let vals = [
            r.p_ch,
            r.p_dis,
            r.soc_after,
            r.essential_shed,
            r.regular_shed,
            r.surplus,
            r.horizon_objective,
            r.expected_ri,
        ];
        out.push_str(&format!("{} {}", r.hour, r.mode));
        for v in vals {
            out.push_str(&format!(" {:016x}", v.to_bits()));
        }
        out.push('\n');
    }
    out.into_bytes()
}

fn locality(s: &ScenarioTimeSeries, first: &SimulationResult, again: &SimulationResult) -> Outcome {
    let cfg = MpcConfig::default();
    let t = 30;
    let short_cfg = MpcConfig {
        simulation_hours: t + 1,
        ..cfg.clone()
    };
    let short = run(&s.truncated(t + 1 + cfg.horizon).unwrap(), &short_cfg).unwrap();
    let local = first.records[..=t] == short.records[..];
    let identical = trace_bytes(first) == trace_bytes(again) && first == again;
    outcome(
        "locality-determinism",
        local && identical,
        format!(
            "data cut after hour {} leaves decisions 0..={t} {}; repeated run {}",
            t + cfg.horizon,
            if local { "unchanged" } else { "CHANGED" },
            if identical { "byte-identical" } else { "DIFFERENT" }
        ),
    )
}

fn main() {
    let mut results = vec![milp_oracle(), piecewise_exactness(), toy_horizon()];

    let s = bundled();
    let regenerated: ScenarioTimeSeries = generate_synthetic(BUNDLED_SEED, &GeneratorConfig::default()).unwrap();
    assert_eq!(s, regenerated, "data/scenario.csv no longer matches the generator");
    let cfg = MpcConfig::default();
    let t0 = Instant::now();
    let main_run = run(&s, &cfg).unwrap();
    let elapsed = t0.elapsed();
    results.push(full_run_invariants(&main_run, elapsed));
    results.push(pre_event_charging(&main_run));
    results.push(ri_trough(&main_run, &s, cfg.horizon));
    results.push(priority());
    let full_info = run(&s.with_comm_loss(&[]).unwrap(), &cfg).unwrap();
    results.push(comm_loss(&main_run, &full_info));
    let again = run(&s, &cfg).unwrap();
    results.push(locality(&s, &main_run, &again));

    let mut unexpected = 0;
    for r in &results {
        let known = KNOWN_FAILURES.contains(&r.id);
        let tag = match (r.pass, known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as a known failure)",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{tag} {}: {}", r.id, r.detail);
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
