use ldprepr_core::ldp::{
    audit_max_log_ratio, empirical_flip_rates, ome_params, oue_params, paired_product_epsilon,
    sue_params, Randomizer,
};
use ldprepr_core::RngSeed;
use proptest::prelude::*;

#[test]
fn paired_product_recovers_epsilon_on_grid() {
    for eps in [0.5, 1.0, 5.0, 10.0] {
        for lambda in [1.0, 10.0, 50.0, 100.0] {
            for (r, l) in [(50, 10), (50, 11), (100, 10), (768, 10)] {
                let p = ome_params(eps, lambda, r, l).unwrap();
                let got = paired_product_epsilon(&p);
                assert!(
                    (got - eps).abs() <= 1e-9,
                    "eps={eps} lambda={lambda} rl={}: {got}",
                    r * l
                );
            }
        }
    }
}

#[test]
fn lambda_one_is_symmetric_for_ones() {
    let p = ome_params(3.0, 1.0, 20, 10).unwrap();
    assert_eq!(p.p1(), 0.5);
    assert_eq!(p.p2(), 0.5);
}

#[test]
fn worst_case_audit_by_enumeration() {
    // Enumerate the four single-bit outcomes per parity independently.
    let p = ome_params(1.0, 100.0, 50, 11).unwrap();
    let (p1, p2, q) = (p.p1(), p.p2(), p.q());
    let even = [(p1 / q).ln().abs(), ((1.0 - q) / (1.0 - p1)).ln().abs()];
    let odd = [(p2 / q).ln().abs(), ((1.0 - q) / (1.0 - p2)).ln().abs()];
    let expected = 275.0 * even[0].max(even[1]) + 275.0 * odd[0].max(odd[1]);
    let got = p.max_log_ratio().unwrap();
    assert!(
        (got - expected).abs() <= 1e-9 * expected,
        "{got} vs {expected}"
    );
    assert!((got - 3796.0).abs() < 1.0, "{got}");
    // The per-bit worst case is far above the paired-product bound.
    assert!(got > paired_product_epsilon(&p));
}

#[test]
fn audit_matches_free_function() {
    let p = ome_params(2.0, 10.0, 10, 10).unwrap();
    let a = audit_max_log_ratio(|i| p.keep_one(i), p.q(), p.sensitivity()).unwrap();
    assert_eq!(a, p.max_log_ratio().unwrap());
}

#[test]
fn monte_carlo_rates_within_three_sigma() {
    let randomizers = [
        Randomizer::Ome(ome_params(1.0, 100.0, 50, 11).unwrap()),
        Randomizer::Ue(sue_params(1.0, 100).unwrap()),
        Randomizer::Ue(oue_params(1.0, 100).unwrap()),
    ];
    for (k, r) in randomizers.iter().enumerate() {
        let rates = empirical_flip_rates(r, 1_000_000, RngSeed::new(100 + k as u64, 0)).unwrap();
        for est in &rates.rates {
            assert!(
                est.z_score().abs() <= 3.0,
                "{:?} {}: {} vs {} (z={})",
                r.protocol(),
                est.name,
                est.estimate(),
                est.analytic,
                est.z_score()
            );
            assert!(est.std_error() >= 0.0);
        }
        let again = empirical_flip_rates(r, 1_000_000, RngSeed::new(100 + k as u64, 0)).unwrap();
        assert_eq!(rates, again);
    }
}

proptest! {
    #[test]
    fn probabilities_stay_open(eps in 0.01f64..50.0, lambda in 1.0f64..1e4, r in 1usize..800) {
        let p = ome_params(eps, lambda, r, 10).unwrap();
        for v in [p.p1(), p.p2(), p.q()] {
            prop_assert!(v > 0.0 && v < 1.0);
        }
        prop_assert!((paired_product_epsilon(&p) - eps).abs() <= 1e-9 * eps.max(1.0));
    }

    #[test]
    fn sue_is_symmetric(eps in 0.01f64..100.0, df in 1usize..10_000) {
        let p = sue_params(eps, df).unwrap();
        prop_assert_eq!(p.p() + p.q(), 1.0);
    }
}
