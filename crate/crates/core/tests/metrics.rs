use gridmpc_core::{count_switches, loss_totals, resilience_index, BatteryMode, MpcDecision, Weights};
use proptest::prelude::*;

fn rec(es: f64, rs: f64, el: f64, rl: f64) -> MpcDecision {
    MpcDecision {
        hour: 0,
        mode: BatteryMode::Idle,
        p_ch: 0.0,
        p_dis: 0.0,
        soc_after: 0.5,
        essential_shed: es,
        regular_shed: rs,
        surplus: 0.0,
        essential_load: el,
        regular_load: rl,
        horizon_objective: 0.0,
        expected_ri: 1.0,
    }
}

fn hours() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    // (essential load, regular load, shed fractions)
    prop::collection::vec((0.1f64..5.0, 0.1f64..5.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..30)
}

fn records(h: &[(f64, f64, f64, f64)]) -> Vec<MpcDecision> {
    h.iter().map(|&(e, r, fe, fr)| rec(fe * e, fr * r, e, r)).collect()
}

fn mode() -> impl Strategy<Value = BatteryMode> {
    prop_oneof![
        Just(BatteryMode::Charge),
        Just(BatteryMode::Discharge),
        Just(BatteryMode::Idle)
    ]
}

#[test]
fn no_shed_gives_zero_totals() {
    let t = loss_totals(&[rec(0.0, 0.0, 1.0, 1.0)]).unwrap();
    assert_eq!((t.essential, t.regular, t.total), (0.0, 0.0, 0.0));
    assert!(loss_totals::<f64>(&[]).is_err());
}

proptest! {
    #[test]
    fn ri_in_unit_interval(h in hours()) {
        let ri = resilience_index(&records(&h), &Weights::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&ri));
    }

    #[test]
    fn ri_scale_invariant(h in hours(), c in 0.1f64..10.0) {
        let w = Weights::default();
        let a = resilience_index(&records(&h), &w).unwrap();
        let scaled: Vec<MpcDecision> = records(&h)
            .into_iter()
            .map(|r| rec(c * r.essential_shed, c * r.regular_shed, c * r.essential_load, c * r.regular_load))
            .collect();
        let b = resilience_index(&scaled, &w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn more_shed_never_raises_ri(h in hours(), k in any::<prop::sample::Index>(), extra in 0.0f64..=1.0) {
        let w = Weights::default();
        let base = records(&h);
        let mut more = base.clone();
        let r = &mut more[k.index(h.len())];
        r.regular_shed += extra * (r.regular_load - r.regular_shed);
        prop_assert!(resilience_index(&more, &w).unwrap() <= resilience_index(&base, &w).unwrap() + 1e-15);
    }

    #[test]
    fn totals_add_up(h in hours()) {
        let t = loss_totals(&records(&h)).unwrap();
        prop_assert_eq!(t.total, t.essential + t.regular);
    }

    #[test]
    fn repeating_the_last_mode_adds_no_switch(modes in prop::collection::vec(mode(), 1..30)) {
        let mut longer = modes.clone();
        longer.push(*modes.last().unwrap());
        prop_assert_eq!(count_switches(&longer), count_switches(&modes));
        prop_assert!(count_switches(&modes) < modes.len());
    }
}
