use super::*;
use crate::dynamics::{integrate, IntegratorConfig};
use crate::limits::{analyze, LimitConfig, LimitReport};
use crate::scenario::{generic, plateau, GenericParams, PlateauParams};

fn limit(s: &Scenario) -> LimitReport {
    let tr = integrate(s, &IntegratorConfig::default()).unwrap();
    analyze(&tr, s, &LimitConfig::default()).unwrap()
}

fn middle_thirds(depth: u32) -> Vec<f64> {
    let mut iv = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        iv = iv
            .into_iter()
            .flat_map(|(a, b)| {
                let t = (b - a) / 3.0;
                [(a, a + t), (b - t, b)]
            })
            .collect();
    }
    iv.into_iter().flat_map(|(a, b)| [a, b]).collect()
}

#[test]
fn single_point_has_dimension_zero() {
    let e = box_dimension(&[0.3, 0.3, 0.3], &geometric_radii(0.1, 6)).unwrap();
    assert_eq!(e.slope, 0.0);
    assert_eq!(box_dimension_auto(&[2.0], 0.0).unwrap().slope, 0.0);
    assert!(box_dimension(&[], &geometric_radii(0.1, 6)).is_err());
}

#[test]
fn cover_count_is_exact_on_small_sets() {
    assert_eq!(cover_count(&[0.0, 0.1, 0.2, 1.0], 0.1), 3);
    assert_eq!(cover_count(&[0.0, 0.19, 1.0], 0.1), 2);
    assert_eq!(cover_count(&[0.0, 1.0], 10.0), 1);
}

#[test]
fn radii_are_validated() {
    let pts: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
    assert!(box_dimension(&pts, &[0.1, 0.05, 0.02]).is_err());
    assert!(box_dimension(&pts, &[0.1, 0.05, 0.05, 0.01, 0.005]).is_err());
    assert!(box_dimension(&pts, &geometric_radii(2.0, 6)).is_err());
}

#[test]
fn full_interval_has_dimension_one() {
    let pts: Vec<f64> = (0..1025).map(|i| i as f64 / 1024.0).collect();
    // A finite sample covers n/(2r/h + 1) rather than 1/(2r); stop at a few spacings.
    let radii = geometric_radii(0.1, 6);
    assert!(radii[5] >= 3.0 / 1024.0);
    let e = box_dimension(&pts, &radii).unwrap();
    assert!((e.slope - 1.0).abs() < 0.05, "{}", e.slope);
}

#[test]
fn middle_thirds_cantor_calibrates_the_estimator() {
    let pts = middle_thirds(10);
    let want = 2f64.ln() / 3f64.ln();
    let radii: Vec<f64> = geometric_radii(0.1, 40).into_iter().filter(|&r| r >= 3f64.powi(-10)).collect();
    let e = box_dimension(&pts, &radii).unwrap();
    assert!((e.slope - want).abs() < 0.05, "{}", e.slope);
    let auto = box_dimension_auto(&pts, 0.0).unwrap();
    assert!((auto.slope - want).abs() < 0.05, "{}", auto.slope);
}

#[test]
fn cantor_predictions() {
    let p = cantor_prediction(0.3, 0.3, 1).unwrap();
    assert!((p.dimension - 2f64.ln() / -(0.09f64).ln()).abs() < 1e-15);
    assert!((p.dimension - 0.28782).abs() < 1e-4);
    assert_eq!(p.ceiling, 0.5);
    assert!(p.within_ceiling());
    for k in 1..4 {
        let g: f64 = 0.25;
        let q = cantor_prediction(g, g.powi(k as i32), k).unwrap();
        let want = 2f64.ln() / ((k + 1) as f64 * (1.0 / g).ln());
        assert!((q.dimension - want).abs() < 1e-14);
        assert!(q.dimension < q.ceiling);
        assert!(q.dimension < q.attainable);
    }
    assert!(cantor_prediction(1e-9, 1e-9, 1).unwrap().dimension < 0.02);
    assert!(cantor_prediction(0.4, 0.3, 1).is_err());
    assert!(cantor_prediction(0.3, 1.0, 1).is_err());
}

#[test]
fn atom_has_local_dimension_zero() {
    let s = plateau(&PlateauParams::default()).unwrap();
    let rep = limit(&s);
    assert_eq!(rep.decomposition.atoms.len(), 1);
    let atom = &rep.decomposition.atoms[0];
    // The density next to the atom adds mass ~ r^{1/3}; small radii see the plateau.
    let radii = geometric_radii(1e-4, 8);
    let e = local_dimension(&s, &rep.map, atom.position, &radii).unwrap();
    assert!(e.values.iter().all(|&m| m >= atom.mass * (1.0 - 1e-9)));
    assert!(e.slope.abs() < 0.05, "{}", e.slope);
}

#[test]
fn interior_point_has_local_dimension_one() {
    let s = generic(&GenericParams::default()).unwrap();
    let rep = limit(&s);
    let balls = BallMass::new(&s, &rep.map).unwrap();
    let x = balls.image(0.2);
    let e = local_dimension(&s, &rep.map, x, &geometric_radii(1e-2, 8)).unwrap();
    assert!((e.slope - 1.0).abs() < 0.05, "{}", e.slope);
    // Ball masses grow with the radius and stay below the total.
    assert!(e.values.windows(2).all(|w| w[1] <= w[0]));
    assert!(balls.mass(x, 10.0).unwrap() <= s.total_mass() * (1.0 + 1e-9));
    assert!(local_dimension(&s, &rep.map, x + 100.0, &geometric_radii(1e-2, 8)).is_err());
}
