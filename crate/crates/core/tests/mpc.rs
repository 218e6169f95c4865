use gridmpc_core::mpc::HorizonSolution as Plan;
use gridmpc_core::{
    build_horizon_problem, commit_hour, run, step, window, BatteryMode, Error, HorizonInputs, HourPlan, LoadHistory,
    MpcConfig, MpcState, ScenarioTimeSeries, StrideMode, Weights,
};
use BatteryMode::*;

fn plan_for(inputs: HorizonInputs, soc0: f64, prev: BatteryMode, cfg: &MpcConfig) -> Plan<f64> {
    build_horizon_problem(&inputs, soc0, prev, cfg)
        .unwrap()
        .solve(&cfg.solver, 0)
        .unwrap()
}

fn small_config() -> MpcConfig {
    MpcConfig {
        horizon: 4,
        simulation_hours: 8,
        ..MpcConfig::default()
    }
}

fn small_scenario() -> ScenarioTimeSeries {
    let n = 12;
    let gen = [3.0, 3.5, 2.0, 0.5, 0.0, 0.0, 0.2, 1.0, 2.5, 3.0, 3.0, 2.0];
    ScenarioTimeSeries::new(
        gen.to_vec(),
        vec![0.0; n],
        vec![1.2; n],
        (0..n).map(|h| 1.0 + 0.1 * h as f64).collect(),
        (0..n).map(|h| (4..=6).contains(&h)).collect(),
        (0..n).map(|h| (4..=6).contains(&h)).collect(),
    )
    .unwrap()
}

#[test]
fn zero_weights_still_give_a_plan() {
    let cfg = MpcConfig {
        weights: Weights {
            w_bat: 0.0,
            w_blc: 0.0,
            w_t: 0.0,
            w_r: 0.0,
            ..Weights::default()
        },
        ..small_config()
    };
    let inputs = HorizonInputs::new(vec![1.0; 4], vec![1.0; 4], vec![2.0; 4]).unwrap();
    let plan = plan_for(inputs, 0.5, Idle, &cfg);
    assert!(plan.objective.abs() < 1e-9);
    assert_eq!(plan.hours.len(), 4);
}

#[test]
fn surplus_means_no_shed() {
    let cfg = small_config();
    let inputs = HorizonInputs::new(vec![6.0; 4], vec![1.0; 4], vec![1.5; 4]).unwrap();
    let plan = plan_for(inputs, 0.5, Idle, &cfg);
    assert!(matches!(plan.hours[0].mode, Charge | Idle));
    for h in &plan.hours {
        assert!(h.essential_shed.abs() < 1e-9 && h.regular_shed.abs() < 1e-9);
    }
    assert!((plan.expected_ri() - 1.0).abs() < 1e-9);
}

#[test]
fn empty_battery_cannot_discharge() {
    let cfg = small_config();
    let inputs = HorizonInputs::new(vec![0.0; 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
    let plan = plan_for(inputs, cfg.params.soc_min, Idle, &cfg);
    assert!(plan.hours[0].p_dis.abs() < 1e-9);
    assert!(plan.hours[0].regular_shed > 0.99);
}

#[test]
fn essential_load_is_protected() {
    let cfg = small_config();
    let inputs = HorizonInputs::new(vec![1.0, 4.0, 4.0, 4.0], vec![1.0; 4], vec![1.0; 4]).unwrap();
    let plan = plan_for(inputs, cfg.params.soc_min, Idle, &cfg);
    assert!(plan.hours[0].essential_shed <= plan.hours[0].regular_shed + 1e-9);
    assert!(plan.hours[0].essential_shed.abs() < 1e-9);
}

#[test]
fn out_of_range_soc_is_rejected() {
    let cfg = small_config();
    let inputs = HorizonInputs::new(vec![1.0; 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
    assert!(build_horizon_problem(&inputs, 0.95, Idle, &cfg).is_err());
    assert!(HorizonInputs::new(vec![1.0; 4], vec![1.0; 3], vec![1.0; 4]).is_err());
}

fn plan_hour(mode: BatteryMode, p_ch: f64, p_dis: f64, shed: (f64, f64)) -> HourPlan {
    HourPlan {
        mode,
        p_ch,
        p_dis,
        soc: 0.0,
        blc: 0.0,
        essential_shed: shed.0,
        regular_shed: shed.1,
        surplus: 0.0,
        resilience: 1.0,
    }
}

#[test]
fn commit_settles_against_actual_load() {
    let p = MpcConfig::default().params;
    let state = MpcState {
        hour: 3,
        soc: 0.5,
        prev_mode: Idle,
    };
    // As planned: 1 kW charged out of a 1 kW surplus.
    let (d, next) = commit_hour(&plan_hour(Charge, 1.0, 0.0, (0.0, 0.0)), &state, 3.0, 1.0, 1.0, &p).unwrap();
    assert_eq!((d.p_ch, d.essential_shed, d.regular_shed, d.surplus), (1.0, 0.0, 0.0, 0.0));
    assert!((next.soc - 0.725).abs() < 1e-12);
    assert_eq!((next.hour, next.prev_mode), (4, Charge));

    // Load 0.6 kW above the plan: charging gives way before any shed.
    let (d, _) = commit_hour(&plan_hour(Charge, 1.0, 0.0, (0.0, 0.0)), &state, 3.0, 1.0, 1.6, &p).unwrap();
    assert!((d.p_ch - 0.4).abs() < 1e-12);
    assert_eq!((d.essential_shed, d.regular_shed), (0.0, 0.0));

    // Planned shed stays planned; only the unforeseen part is absorbed.
    let (d, _) = commit_hour(&plan_hour(Charge, 1.0, 0.0, (0.0, 0.5)), &state, 1.5, 1.0, 0.8, &p).unwrap();
    assert!((d.p_ch - 0.2).abs() < 1e-12);
    assert!((d.regular_shed - 0.5).abs() < 1e-12);

    // Discharge beyond soc_min is trimmed and the rest is shed, regular first.
    let low = MpcState { soc: 0.25, ..state };
    let (d, next) = commit_hour(&plan_hour(Discharge, 0.0, 2.0, (0.0, 0.0)), &low, 0.0, 1.0, 1.5, &p).unwrap();
    assert!((d.p_dis - 0.05 * 4.0 * 0.95).abs() < 1e-12);
    assert!((next.soc - 0.2).abs() < 1e-12);
    assert!((d.regular_shed - 1.5).abs() < 1e-12);
    assert!(d.essential_shed > 0.0 && d.essential_shed <= 1.0);
}

#[test]
fn step_checks_the_window() {
    let s = small_scenario();
    let cfg = small_config();
    let state = MpcState {
        hour: 2,
        soc: 0.5,
        prev_mode: Idle,
    };
    let hist = LoadHistory::from_series(&s, 1);
    let wrong = window(&s, 3, 4, Some(1)).unwrap();
    assert!(matches!(step(&state, &wrong, &hist, &cfg), Err(Error::Scenario(_))));
    let right = window(&s, 2, 4, Some(1)).unwrap();
    let (d, next, plan) = step(&state, &right, &hist, &cfg).unwrap();
    assert_eq!((d.hour, next.hour, plan.hours.len()), (2, 3, 4));
}

#[test]
fn small_run_invariants_and_determinism() {
    let s = small_scenario();
    let cfg = small_config();
    let a = run(&s, &cfg).unwrap();
    assert_eq!(a.records.len(), 8);
    assert_eq!(a.expected_ri_curve.len(), 8);
    for r in &a.records {
        assert!(r.soc_after >= 0.2 - 1e-9 && r.soc_after <= 0.9 + 1e-9);
        assert!(r.essential_shed <= r.essential_load + 1e-9 && r.regular_shed <= r.regular_load + 1e-9);
        assert!(r.p_ch == 0.0 || r.p_dis == 0.0);
    }
    assert!(a.rmse.is_some());
    assert_eq!(run(&s, &cfg).unwrap(), a);
}

#[test]
fn small_run_is_window_local() {
    let s = small_scenario();
    let cfg = small_config();
    let full = run(&s, &cfg).unwrap();
    let t = 4;
    let short_cfg = MpcConfig {
        simulation_hours: t + 1,
        ..small_config()
    };
    let short = run(&s.truncated(t + 1 + cfg.horizon).unwrap(), &short_cfg).unwrap();
    assert_eq!(&full.records[..=t], &short.records[..]);
}

#[test]
fn day_stride_commits_whole_plans() {
    let s = small_scenario();
    let cfg = MpcConfig {
        stride: StrideMode::Day,
        ..small_config()
    };
    let r = run(&s, &cfg).unwrap();
    assert_eq!(r.records.len(), 8);
    assert_eq!(r.expected_ri_curve.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 4]);
}

#[test]
fn short_scenarios_and_bad_weights_are_rejected() {
    let s = small_scenario();
    let long = MpcConfig {
        simulation_hours: 10,
        ..small_config()
    };
    assert!(matches!(run(&s, &long), Err(Error::TooShort { .. })));
    let swapped = MpcConfig {
        weights: Weights {
            w_essential: 0.1,
            w_regular: 0.9,
            ..Weights::default()
        },
        ..small_config()
    };
    assert!(matches!(run(&s, &swapped), Err(Error::Weights(_))));
}
