use alignflow::scenario::{generic, oracle, plateau, GenericParams, OracleParams, PlateauParams};
use alignflow::Scenario;
use proptest::prelude::*;

/// Oracle data need `kappa M0 >= amplitude` to stay subcritical.
fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![
        (0.1f64..1.0, 1.0f64..2.0, 1.0f64..2.0).prop_map(|(amplitude, kappa, mass)| {
            oracle(&OracleParams { n: 64, kappa, mass, amplitude, perturbation: 0.0 }).unwrap()
        }),
        (1.0f64..4.0).prop_map(|kappa| generic(&GenericParams { n: 64, kappa, ..Default::default() }).unwrap()),
        (0.1f64..0.6, 0.5f64..2.0, 0.2f64..1.0).prop_map(|(half_width, amplitude, density)| {
            plateau(&PlateauParams { n: 64, half_width, amplitude, density, ..Default::default() }).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn f0_is_a_primitive_of_e0(s in scenario(), a in -0.95f64..0.95) {
        let h = 1e-5;
        let fd = (s.f0_at(&[a + h]) - s.f0_at(&[a - h])) / (2.0 * h);
        prop_assert!((fd - s.e0_at(&[a])).abs() <= 1e-6 * s.e0_scale(), "{} vs {}", fd, s.e0_at(&[a]));
    }

    #[test]
    fn momentum_is_normalized_away(s in scenario()) {
        let u_sup = s.init().iter().fold(0.0f64, |m, l| m.max(l.u0.abs()));
        prop_assert!(s.momentum().abs() <= 1e-10 * s.total_mass() * u_sup.max(1e-300));
    }

    #[test]
    fn zero_set_partitions_each_slice(s in scenario()) {
        let z = s.zero_set(s.default_threshold()).unwrap();
        for sl in &z.slices {
            let mut pieces: Vec<[f64; 2]> = sl.z.iter().chain(&sl.p).copied().collect();
            pieces.sort_by(|a, b| a[0].total_cmp(&b[0]));
            prop_assert_eq!(pieces.first().unwrap()[0], sl.lo);
            prop_assert_eq!(pieces.last().unwrap()[1], sl.hi);
            for w in pieces.windows(2) {
                prop_assert_eq!(w[0][1], w[1][0]);
            }
            for w in sl.z.windows(2) {
                prop_assert!(w[0][1] < w[1][0]);
            }
        }
    }
}
