use proptest::prelude::*;
use retail_dr::equilibrium::{solve_equilibrium_milp, EquilibriumConfig};
use retail_dr::model::{consumer_kkt_residuals, retailer_primal_residuals};
use retail_dr::mpec::{evaluate_tariff, grid_search_oracle, solve_mpec, MpecConfig};
use retail_dr::scenario::{build_case, generate_scenarios, sample_spot};
use retail_dr::{ScenarioSet, SpotObservation};

fn small_set() -> impl Strategy<Value = ScenarioSet> {
    (1usize..4, 1usize..3, 1usize..3).prop_flat_map(|(t, j, w)| {
        (
            proptest::collection::vec(proptest::collection::vec(0.01f64..0.04, t), w),
            proptest::collection::vec(proptest::collection::vec(proptest::collection::vec(0.025f64..0.045, t), w), j),
            proptest::collection::vec(proptest::collection::vec(proptest::collection::vec(0.0012f64..0.002, t), w), j),
            proptest::collection::vec(0.0f64..3.0, j),
        )
            .prop_map(move |(spot, a, b, d)| {
                let spot_tw: Vec<Vec<f64>> = (0..t).map(|tt| (0..w).map(|ww| spot[ww][tt]).collect()).collect();
                let tr = |m: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<Vec<f64>>> {
                    m.iter()
                        .map(|per_w| (0..t).map(|tt| (0..w).map(|ww| per_w[ww][tt]).collect()).collect())
                        .collect()
                };
                ScenarioSet::from_nested(vec![1.0 / w as f64; w], &spot_tw, &tr(&a), &tr(&b), d, 500.0).unwrap()
            })
    })
}

fn quick() -> MpecConfig {
    MpecConfig {
        multistart_count: 3,
        max_evals_per_start: 20_000,
        ..MpecConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_starts_never_hurt(s in small_set(), seed in 0u64..1000) {
        let few = solve_mpec(&s, &MpecConfig { seed, ..quick() }).unwrap();
        let many = solve_mpec(&s, &MpecConfig { seed, multistart_count: 6, ..quick() }).unwrap();
        prop_assert!(many.expected_profit >= few.expected_profit);
        prop_assert_eq!(&many.meta.start_profits[..3], &few.meta.start_profits[..]);
    }

    #[test]
    fn returned_point_is_feasible(s in small_set()) {
        let r = solve_mpec(&s, &quick()).unwrap();
        prop_assert!(r.tariff.p.iter().all(|&p| p >= 0.0));
        let d = s.dims();
        for j in 0..d.consumers {
            for w in 0..d.scenarios {
                let res = consumer_kkt_residuals(&s, &r.prices, &r.consumer, &r.consumer_duals, j, w);
                prop_assert!(res.primal <= 1e-9 && res.balance <= 1e-9);
            }
        }
        prop_assert!(retailer_primal_residuals(&s, &r.consumer, &r.retailer).max() <= 1e-9);
    }

    #[test]
    fn leader_beats_the_competitive_tariff(s in small_set()) {
        let m = solve_mpec(&s, &quick()).unwrap();
        let eq = solve_equilibrium_milp(&s, &EquilibriumConfig::default()).unwrap();
        let (at_eq, _) = evaluate_tariff(&s, &eq.tariff).unwrap();
        prop_assert!(m.expected_profit >= at_eq - 1e-12);
    }
}

#[test]
fn two_hour_grid_agreement() {
    let s = ScenarioSet::deterministic(
        &[0.018, 0.031],
        &[vec![0.033, 0.036]],
        &[vec![0.0014, 0.0017]],
        vec![1.2],
        500.0,
    )
    .unwrap();
    let m = solve_mpec(&s, &MpecConfig { p_max: Some(0.06), ..MpecConfig::default() }).unwrap();
    let (gt, g) = grid_search_oracle(&s, 2e-5, 0.06).unwrap();
    assert!(m.expected_profit >= g - 1e-6, "{} vs {g}", m.expected_profit);
    // the oracle's optimum, priced through the full response model
    let (full, _) = evaluate_tariff(&s, &gt).unwrap();
    assert!(m.expected_profit >= full - 1e-6, "{} vs {full}", m.expected_profit);
}

fn tariff_variance(p: &[f64]) -> f64 {
    let m = p.iter().sum::<f64>() / p.len() as f64;
    p.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / p.len() as f64
}

#[test]
fn flexibility_flattens_the_tariff() {
    let spot: Vec<SpotObservation> = sample_spot();
    let cfg = MpecConfig::default();
    let bm = generate_scenarios(&spot, &build_case("BM").unwrap(), 10, 0).unwrap();
    let fx = generate_scenarios(&spot, &build_case("Flexibility").unwrap(), 10, 0).unwrap();
    let vb = tariff_variance(&solve_mpec(&bm, &cfg).unwrap().tariff.p);
    let vf = tariff_variance(&solve_mpec(&fx, &cfg).unwrap().tariff.p);
    assert!(vf <= vb, "flexibility {vf} vs benchmark {vb}");
}

#[test]
fn seeded_runs_repeat_exactly() {
    let s = generate_scenarios(&sample_spot(), &build_case("B").unwrap(), 4, 11).unwrap();
    let cfg = MpecConfig { seed: 5, ..quick() };
    assert_eq!(solve_mpec(&s, &cfg).unwrap(), solve_mpec(&s, &cfg).unwrap());
}
