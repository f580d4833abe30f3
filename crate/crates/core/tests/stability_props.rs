use alignflow::stability::StabilityConstants;
use alignflow::FlockingConstants;
use proptest::prelude::*;

fn constants() -> impl Strategy<Value = FlockingConstants> {
    (0.0f64..5.0, 1e-3f64..3.0).prop_map(|(a, b)| FlockingConstants {
        diam_bound: 2.0,
        kernel_floor: b,
        a,
        b,
        d0: 2.0,
        a0: a,
        kappa: 1.0,
        m0: 1.0,
    })
}

proptest! {
    #[test]
    fn stability_constants_are_symmetric_and_dominate_each_gain(
        p in constants(),
        q in constants(),
        m0 in 0.1f64..10.0,
    ) {
        let k = StabilityConstants::new(&p, &q, m0);
        prop_assert_eq!(k, StabilityConstants::new(&q, &p, m0));
        prop_assert_eq!(k.mu, p.b.min(q.b));
        prop_assert_eq!(k.c, k.mu / 2.0);
        prop_assert!(k.big_c >= k.x_gain && k.big_c >= k.v_gain && k.big_c >= k.w_gain);
        prop_assert!(k.v_gain >= 1.0);
        // The velocity envelope e^{-mu t}(1 + 2 a t/mu) never exceeds v_gain e^{-c t}.
        for t in [0.0, 0.5 / k.mu, 1.0 / k.mu, 2.0 / k.mu, 10.0 / k.mu] {
            let exact = (-k.mu * t).exp() * (1.0 + 2.0 * k.a * t / k.mu);
            prop_assert!(exact <= k.v_gain * (-k.c * t).exp() * (1.0 + 1e-12));
        }
    }
}
