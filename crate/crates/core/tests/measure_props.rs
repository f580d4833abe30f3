use alignflow::measure::w1_discrete;
use alignflow::{AcLabel, Atom, BoxDomain, Kernel, KernelFamily, MassMeasure};
use proptest::prelude::*;

/// A discrete probability measure on `[-3, 3]`.
fn measure(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0), 1..max).prop_map(|mut v| {
        let total: f64 = v.iter().map(|p| p.1).sum();
        for p in &mut v {
            p.1 /= total;
        }
        v
    })
}

fn integral(m: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    m.iter().map(|&(x, w)| w * f(x)).sum()
}

proptest! {
    #[test]
    fn w1_is_symmetric_and_satisfies_the_triangle_inequality(
        a in measure(40),
        b in measure(40),
        c in measure(40),
    ) {
        let ab = w1_discrete(&a, &b).unwrap();
        prop_assert_eq!(ab, w1_discrete(&b, &a).unwrap());
        prop_assert_eq!(w1_discrete(&a, &a).unwrap(), 0.0);
        let (ac, cb) = (w1_discrete(&a, &c).unwrap(), w1_discrete(&c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn lipschitz_test_functions_are_dominated(
        a in measure(40),
        b in measure(40),
        c in -4.0f64..4.0,
        k in 0.1f64..1.0,
    ) {
        let w = w1_discrete(&a, &b).unwrap();
        let fs: [Box<dyn Fn(f64) -> f64>; 3] = [
            Box::new(move |x: f64| (x - c).abs()),
            Box::new(move |x: f64| (x / k).sin() * k),
            Box::new(move |x: f64| (x - c).clamp(0.0, 1.0)),
        ];
        for f in fs {
            let gap = (integral(&a, &f) - integral(&b, &f)).abs();
            prop_assert!(gap <= w + 1e-12, "{} > {}", gap, w);
        }
    }

    #[test]
    fn convolution_is_linear_and_bounded(
        points in prop::collection::vec((-1.0f64..1.0, 0.01f64..2.0), 1..30),
        atom in prop::option::of((-1.0f64..1.0, 0.01f64..1.0)),
        x in -3.0f64..3.0,
        scale in 0.1f64..10.0,
        s in 0.3f64..2.0,
    ) {
        let labels: Vec<AcLabel> = points
            .iter()
            .map(|&(p, r)| AcLabel { pos: [p, 0.0], weight: r * 0.1, cell: 0.1, rho0: r })
            .collect();
        let atoms: Vec<Atom> = atom.into_iter().map(|(p, w)| Atom { pos: [p, 0.0], weight: w }).collect();
        let m = MassMeasure::from_parts(labels, atoms, BoxDomain::interval(-1.0, 1.0)).unwrap();
        let k = Kernel::new(KernelFamily::power_tail(s, 1.0), 1).unwrap();
        let pos: Vec<f64> = (0..m.len()).map(|i| m.position(i)[0]).collect();
        let v = m.convolve(&k, &[x], &pos).unwrap();
        prop_assert!(v > 0.0 && v <= k.sup_value() * m.total_mass() * (1.0 + 1e-14));
        let scaled = m.normalized(scale * m.total_mass()).unwrap();
        let vs = scaled.convolve(&k, &[x], &pos).unwrap();
        prop_assert!((vs - scale * v).abs() <= 1e-13 * scale * v);
    }
}
