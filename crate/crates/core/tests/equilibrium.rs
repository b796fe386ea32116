use proptest::prelude::*;
use retail_dr::equilibrium::{
    enumerate_equilibria, solve_equilibrium_milp, solve_equilibrium_nlp, validate_big_m, BigMConfig,
    Coupling, EquilibriumConfig, NlpConfig,
};
use retail_dr::mpec::{solve_mpec, MpecConfig};
use retail_dr::scenario::{build_case, generate_scenarios, sample_spot};
use retail_dr::{PriceView, ScenarioSet, SolveReport};

fn small_set(max_t: usize) -> impl Strategy<Value = ScenarioSet> {
    sized(1..=max_t, 1usize..3, 1usize..3)
}

fn sized(
    t: impl Strategy<Value = usize>,
    j: impl Strategy<Value = usize>,
    w: impl Strategy<Value = usize>,
) -> impl Strategy<Value = ScenarioSet> {
    (t, j, w).prop_flat_map(|(t, j, w)| {
        let cell = move |lo: f64, hi: f64| proptest::collection::vec(proptest::collection::vec(lo..hi, w), t);
        (
            cell(0.012, 0.035),
            proptest::collection::vec(cell(0.024, 0.045), j),
            proptest::collection::vec(cell(0.0012, 0.002), j),
            proptest::collection::vec(0.0f64..3.0, j),
        )
            .prop_map(move |(spot, a, b, d)| {
                ScenarioSet::from_nested(vec![1.0 / w as f64; w], &spot, &a, &b, d, 500.0).unwrap()
            })
    })
}

fn structural(r: &SolveReport) -> Result<(), TestCaseError> {
    prop_assert!(r.consumer_residuals.max() <= 1e-6, "{:?}", r.consumer_residuals);
    prop_assert!(r.retailer_residuals.max() <= 1e-6, "{:?}", r.retailer_residuals);
    prop_assert!(r.consumer_residuals.balance <= 1e-9);
    prop_assert!(r.abs_imbalance_gap() <= 1e-9);
    prop_assert!((r.revenue - r.cost - r.expected_profit).abs() <= 1e-9);
    Ok(())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn both_solvers_return_kkt_points(s in small_set(4)) {
        let milp = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        let nlp = solve_equilibrium_nlp(&s, &NlpConfig::default()).unwrap();
        structural(&milp)?;
        structural(&nlp)?;
        prop_assert!((milp.expected_profit - nlp.expected_profit).abs() <= 1e-3);
        prop_assert!((milp.total_welfare() - nlp.total_welfare()).abs() <= 1e-3);
    }

    #[test]
    fn competitive_margin_is_zero(s in small_set(3)) {
        let r = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        prop_assert!(r.expected_profit.abs() <= 1e-9);
        // nobody pays more than spot
        let d = s.dims();
        for w in 0..d.scenarios {
            for t in 0..d.hours {
                prop_assert!(r.prices.price(t, w) <= s.spot(t, w) + 1e-9);
            }
        }
    }

    #[test]
    fn doubling_big_m_keeps_the_tariff(s in small_set(3)) {
        let cfg = EquilibriumConfig::default();
        let base = solve_equilibrium_milp(&s, &cfg).unwrap();
        let (mp, md) = cfg.big_m.resolve(&s);
        prop_assert!(validate_big_m(&base, mp, md, cfg.big_m.validation_margin).is_ok());
        let doubled = EquilibriumConfig {
            big_m: BigMConfig { m_primal: Some(2.0 * mp), m_dual: Some(2.0 * md), ..cfg.big_m },
            ..cfg
        };
        let r = solve_equilibrium_milp(&s, &doubled).unwrap();
        prop_assert!(max_diff(&r.tariff.p, &base.tariff.p) <= 1e-6);
    }

    #[test]
    fn two_hour_solutions_are_enumerated(s in sized(Just(2), Just(1), Just(1))) {
        let cfg = EquilibriumConfig::default();
        let r = solve_equilibrium_milp(&s, &cfg).unwrap();
        let all = enumerate_equilibria(&s, cfg.coupling, &cfg.big_m).unwrap();
        prop_assert!(!all.is_empty());
        let gap = all.iter().map(|e| max_diff(&e.prices.p, &r.prices.p)).fold(f64::INFINITY, f64::min);
        prop_assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn consumers_fare_better_than_under_the_leader(s in small_set(3)) {
        let eq = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        let m = solve_mpec(&s, &MpecConfig { multistart_count: 3, max_evals_per_start: 20_000, ..MpecConfig::default() }).unwrap();
        prop_assert!(eq.total_welfare() >= m.total_welfare() - 1e-9);
    }
}

#[test]
fn benchmark_case_equilibrium() {
    let s = generate_scenarios(&sample_spot(), &build_case("BM").unwrap(), 6, 2).unwrap();
    let r = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
    assert!(r.max_residual() <= 1e-6);
    assert!(r.expected_profit.abs() <= 1e-9);
    assert!(r.meta.notes.iter().any(|n| n.contains("per-scenario")));
    let again = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
    assert_eq!(r, again);
}

#[test]
fn linked_prices_need_matching_spot() {
    // identical spot in both scenarios: the shared price exists
    let s = ScenarioSet::from_nested(
        vec![0.5, 0.5],
        &[vec![0.02, 0.02]],
        &[vec![vec![0.03, 0.032]]],
        &[vec![vec![0.0015, 0.0016]]],
        vec![0.0],
        500.0,
    )
    .unwrap();
    let cfg = EquilibriumConfig { coupling: Coupling::Linked, ..EquilibriumConfig::default() };
    let r = solve_equilibrium_milp(&s, &cfg).unwrap();
    assert!((r.tariff.p[0] - 0.02).abs() <= 1e-9);
}
