use affgeo::brackets::{
    atiyah_algebroid, clocked_atiyah, random_affine_section, unit_time_fields, verify_affgebroid, AffJacobiBracket,
};
use affgeo::phase::canonical_poisson;
use affgeo::sampling::{grid, random_points};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn atiyah_bracket_is_canonical_poisson(seed in any::<u64>()) {
        let base = names(&["x", "y"]);
        let momenta = names(&["px", "py"]);
        let b = AffJacobiBracket::new(atiyah_algebroid(&base).unwrap(), names(&["px", "py", "e"]), "s").unwrap();
        prop_assert_eq!(b.quotient_names(), momenta.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = random_affine_section(&mut rng, &base, &momenta);
        let s2 = random_affine_section(&mut rng, &base, &momenta);
        let got = b.bracket(&s1, &s2).unwrap();
        let back = b.bracket(&s2, &s1).unwrap();
        let want = canonical_poisson(&s1, &s2, &base, &momenta);
        for p in random_points(&mut rng, &b.vars(), 8, -2.0, 2.0) {
            let (g, w) = (got.eval(&p).unwrap(), want.eval(&p).unwrap());
            prop_assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()), "{} vs {}", g, w);
            prop_assert!((g + back.eval(&p).unwrap()).abs() < 1e-9 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn example_structures_satisfy_axioms(seed in any::<u64>()) {
        let samples = grid(&["q", "t"], &[-1.0, 0.5, 1.5]);
        let report = verify_affgebroid(&unit_time_fields(&names(&["q"]), "t").unwrap(), &samples, seed).unwrap();
        prop_assert!(report.pass(), "{:?}", report.failures().collect::<Vec<_>>());
        let report = verify_affgebroid(&clocked_atiyah(&names(&["q"]), "t").unwrap(), &samples, seed).unwrap();
        prop_assert!(report.pass(), "{:?}", report.failures().collect::<Vec<_>>());
    }
}
