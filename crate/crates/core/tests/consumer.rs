use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retail_dr::consumer::{best_response, best_response_oracle, objective, recover_consumer_duals, respond_all};
use retail_dr::model::consumer_kkt_residuals;
use retail_dr::scenario::{build_case, generate_scenarios, sample_spot};
use retail_dr::Tariff;

fn instance(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (
        proptest::collection::vec(0.0f64..0.06, n),
        proptest::collection::vec(0.02f64..0.04, n),
        proptest::collection::vec(0.001f64..0.002, n),
        0.0f64..4.0,
    )
}

/// A uniformly drawn feasible (consumption, shift) pair.
fn feasible_point(r: &mut ChaCha8Rng, t: usize, dmax: f64) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (0..t).map(|_| r.gen_range(-1.0..1.0)).collect();
    let m = u.iter().sum::<f64>() / t as f64;
    let c: Vec<f64> = u.iter().map(|x| x - m).collect();
    let scale = c.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let shift = c.iter().map(|x| dmax * x / scale).collect();
    let s = (0..t).map(|_| r.gen_range(0.0..25.0)).collect();
    (s, shift)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn no_sampled_point_does_better((p, a, b, dmax) in instance(4), seed in any::<u64>()) {
        let best = best_response(&p, &a, &b, dmax).objective(&p, &a, &b);
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let (s, d) = feasible_point(&mut r, 4, dmax);
            prop_assert!(best <= objective(&p, &a, &b, &s, &d) + 1e-12);
        }
    }

    #[test]
    fn response_is_feasible((p, a, b, dmax) in instance(6)) {
        let br = best_response(&p, &a, &b, dmax);
        prop_assert!(br.shift.iter().sum::<f64>().abs() <= 1e-9);
        for t in 0..6 {
            prop_assert!(br.shift[t].abs() <= dmax + 1e-12);
            prop_assert!(br.q[t] + br.shift[t] >= -1e-12);
        }
    }

    #[test]
    fn duals_are_recoverable((p, a, b, dmax) in instance(4)) {
        let br = best_response(&p, &a, &b, dmax);
        let rec = recover_consumer_duals(&br.q, &br.shift, &p, &a, &b, dmax).unwrap();
        prop_assert!((rec.objective(&p, &a, &b) - br.objective(&p, &a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn zero_flexibility_means_zero_shift((p, a, b, _d) in instance(5)) {
        let br = best_response(&p, &a, &b, 0.0);
        prop_assert!(br.shift.iter().all(|&x| x == 0.0));
        let or = best_response_oracle(&p, &a, &b, 0.0).unwrap();
        prop_assert!((br.objective(&p, &a, &b) - or.objective(&p, &a, &b)).abs() <= 1e-9);
    }
}

#[test]
fn whole_market_response_satisfies_kkt() {
    let c = build_case("Flexibility").unwrap();
    let s = generate_scenarios(&sample_spot(), &c, 6, 4).unwrap();
    let tariff = Tariff::new((0..24).map(|t| 0.02 + 0.0005 * (t % 7) as f64).collect()).unwrap();
    let prices = retail_dr::ScenarioPrices::from_tariff(&tariff, 6);
    let (dec, du) = respond_all(&s, &prices);
    for j in 0..3 {
        for w in 0..6 {
            let r = consumer_kkt_residuals(&s, &prices, &dec, &du, j, w);
            assert!(r.max() <= 1e-9, "j={j} w={w}: {r:?}");
        }
    }
}
