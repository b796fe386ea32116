use proptest::prelude::*;
use retail_dr::scenario::{build_case, generate_scenarios, parse_spot_csv, sample_spot};
use retail_dr::{CaseName, SpotObservation};

fn spot_series(prices: &[f64]) -> Vec<SpotObservation> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &p)| SpotObservation {
            hour: i + 1,
            price: p,
            quantity: 100.0,
        })
        .collect()
}

#[test]
fn bundled_csv_parses_to_sample() {
    let text = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_eex.csv")).unwrap();
    assert_eq!(parse_spot_csv(&text[..]).unwrap(), sample_spot());
}

#[test]
fn same_seed_same_set() {
    let c = build_case("BM").unwrap();
    let a = generate_scenarios(&sample_spot(), &c, 12, 99).unwrap();
    let b = generate_scenarios(&sample_spot(), &c, 12, 99).unwrap();
    assert_eq!(a, b);
    let d = generate_scenarios(&sample_spot(), &c, 12, 100).unwrap();
    assert_ne!(a, d);
}

#[test]
fn every_case_builds() {
    for name in CaseName::STUDY_CASES {
        let c = build_case(name.as_str()).unwrap();
        assert_eq!(c.consumers(), 3);
        let s = generate_scenarios(&sample_spot(), &c, 4, 0).unwrap();
        assert_eq!((s.hours(), s.consumers(), s.scenarios()), (24, 3, 4));
    }
}

fn spot_prices() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..0.08, 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_sets_are_well_formed(
        prices in spot_prices(),
        n in 1usize..20,
        seed in any::<u64>(),
        cv in 0.0f64..3.0,
    ) {
        let mut c = build_case("BM").unwrap();
        c.cv_spot = cv;
        c.cv_b = cv;
        let s = generate_scenarios(&spot_series(&prices), &c, n, seed).unwrap();
        let total: f64 = s.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(s.probs().iter().all(|&p| p > 0.0));
        for w in 0..n {
            for t in 0..prices.len() {
                prop_assert!(s.spot(t, w) >= 0.0);
                for j in 0..3 {
                    prop_assert!(s.b(j, t, w) >= 1e-6);
                }
            }
        }
    }

    #[test]
    fn spot_paths_scale_with_the_series(
        prices in spot_prices(),
        k in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let c = build_case("A").unwrap();
        let base = generate_scenarios(&spot_series(&prices), &c, 5, seed).unwrap();
        let scaled_prices: Vec<f64> = prices.iter().map(|p| p * k).collect();
        let scaled = generate_scenarios(&spot_series(&scaled_prices), &c, 5, seed).unwrap();
        for w in 0..5 {
            for t in 0..prices.len() {
                let want = k * base.spot(t, w);
                prop_assert!((scaled.spot(t, w) - want).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
