use std::f64::consts::PI;

use super::*;
use crate::dynamics::{integrate, IntegratorConfig, Method};
use crate::scenario::{
    annulus, disk, generic, oracle, plateau, AnnulusParams, DiskParams, GenericParams, OracleParams, PlateauParams,
};

fn run(s: &Scenario) -> (Trajectory, LimitReport) {
    let method = if s.dim() == 2 { Method::Rk45 } else { Method::Rk4 };
    let cfg = IntegratorConfig {
        method,
        ..Default::default()
    };
    let tr = integrate(s, &cfg).unwrap();
    let rep = analyze(&tr, s, &LimitConfig::default()).unwrap();
    (tr, rep)
}

#[test]
fn oracle_limit_matches_closed_form() {
    let s = oracle(&OracleParams::default()).unwrap();
    let (_, rep) = run(&s);
    assert!(!rep.map.tail.fallback);
    let km = s.kappa() * s.total_mass();
    let mut err = 0.0f64;
    let mut derr = 0.0f64;
    for i in 0..s.measure().len() {
        let a = s.pos(i)[0];
        // Constant kernel: Xbar = a + u0/(kappa M0), here u0 = -sin(pi a)/pi.
        let want = a - (PI * a).sin() / PI;
        assert!((s.closed_form_limit(&[a]).unwrap() - want).abs() < 1e-14);
        err = err.max((rep.map.xbar[i] - want).abs());
        derr = derr.max((rep.map.dx1bar[i] - s.init()[i].e0 / km).abs());
    }
    assert!(err < 1e-10, "{err}");
    assert!(derr < 1e-8, "{derr}");
    assert!(rep.passed(), "{:?}", rep.checks);
    // Spot value of the closed form at a = 1/2.
    assert!((0.5 - 1.0 / PI - 0.181690).abs() < 1e-6);
}

#[test]
fn zero_velocity_gives_identity_limit() {
    let s = oracle(&OracleParams {
        amplitude: 0.0,
        ..Default::default()
    })
    .unwrap();
    let (_, rep) = run(&s);
    let (a1, _) = s.alpha();
    assert_eq!(rep.map.xbar, a1);
}

#[test]
fn empty_zero_set_has_no_singular_mass() {
    let s = generic(&GenericParams::default()).unwrap();
    let (_, rep) = run(&s);
    let d = &rep.decomposition;
    assert!(rep.zero_set.is_empty());
    assert!(d.singular_mass <= 1e-8 * s.total_mass());
    assert!((d.total_mass - s.total_mass()).abs() <= 1e-10 * s.total_mass());
    assert!(rep.passed(), "{:?}", rep.checks);
}

#[test]
fn plateau_concentrates_into_one_atom() {
    let s = plateau(&PlateauParams::default()).unwrap();
    let (_, rep) = run(&s);
    let d = &rep.decomposition;
    assert_eq!(d.atoms.len(), 1);
    let atom = &d.atoms[0];
    assert!((atom.mass - 0.3).abs() < 1e-6, "{}", atom.mass);
    // The detected interval is the sublevel set e0 <= eps, which overhangs
    // [-0.3, 0.3] by sqrt(eps/A) on each side.
    let iv = atom.interval.unwrap();
    let overhang = (rep.zero_set.threshold / 1.0f64).sqrt();
    assert!((iv[0] + 0.3 + overhang).abs() < 1e-9 && (iv[1] - 0.3 - overhang).abs() < 1e-9, "{iv:?}");
    assert!((atom.rho0_integral.unwrap() - 0.5 * (iv[1] - iv[0])).abs() < 1e-12);
    assert!(atom.diameter <= d.collapse_tol);
    assert!((d.total_mass - s.total_mass()).abs() <= 1e-10 * s.total_mass());
    assert!((d.ac_mass + d.singular_mass - s.total_mass()).abs() <= 1e-10);
    assert!(rep.passed(), "{:?}", rep.checks);
    // Image of the zero interval vanishes; image of the full slice is bracketed.
    let z = rep.zero_set.slices[0].z.clone();
    let b = measure_image_bounds(&s, &rep.map, 0.0, &z);
    assert!(b.measured <= d.collapse_tol && b.upper < 1e-9);
    let b = measure_image_bounds(&s, &rep.map, 0.0, &[[-1.0, 1.0]]);
    assert!(b.lower <= b.measured && b.measured <= b.upper, "{b:?}");
}

#[test]
fn evaluator_reproduces_particle_limits() {
    let s = generic(&GenericParams::default()).unwrap();
    let (_, rep) = run(&s);
    let ev = LimitEvaluator::new(&s, &rep.map);
    for i in (0..s.measure().len()).step_by(7) {
        let a = s.pos(i)[0];
        let x = ev.xbar_at(a, 0.0);
        assert!((x - rep.map.xbar[i]).abs() < 1e-9, "{x} vs {}", rep.map.xbar[i]);
        assert!((ev.preimage(x, 0.0) - a).abs() < 1e-8);
    }
}

#[test]
fn constant_kernel_bounds_pinch() {
    let s = oracle(&OracleParams::default()).unwrap();
    let (_, rep) = run(&s);
    let c = rep.map.constants;
    assert_eq!(c.kernel_floor, s.kernel().sup_value());
    let b = measure_image_bounds(&s, &rep.map, 0.0, &[[-0.7, 0.2]]);
    assert_eq!(b.lower, b.upper);
    assert!((b.measured - b.lower).abs() < 1e-9);
}

#[test]
fn separation_check_catches_a_wrong_map() {
    let s = generic(&GenericParams::default()).unwrap();
    let (_, mut rep) = run(&s);
    assert!(check_separation_bounds(&s, &rep.map, 500, 1, 1e-3).passed);
    for x in rep.map.xbar.iter_mut() {
        *x = -*x;
    }
    let c = check_separation_bounds(&s, &rep.map, 500, 1, 1e-3);
    assert!(!c.passed && c.violations > 0);
}

#[test]
fn disk_zero_set_maps_to_one_curve() {
    let s = disk(&DiskParams {
        n: 24,
        ..Default::default()
    })
    .unwrap();
    let (_, rep) = run(&s);
    assert_eq!(rep.curves.len(), 1);
    let r = 0.5;
    for smp in &rep.curves[0].samples {
        assert!(smp.a2.abs() < r);
        assert!(smp.diameter <= 1e-4);
        let chord = 2.0 * (r * r - smp.a2 * smp.a2).sqrt();
        assert!((smp.weight - chord).abs() < 1e-4, "{} vs {chord}", smp.weight);
    }
    assert!(rep.passed(), "{:?}", rep.checks);
}

#[test]
fn annulus_splits_into_two_branches() {
    let s = annulus(&AnnulusParams {
        n: 24,
        ..Default::default()
    })
    .unwrap();
    let (_, rep) = run(&s);
    assert_eq!(rep.curves.len(), 2);
    let inner = 0.3;
    for a2 in s.slices().into_iter().filter(|y| y.abs() < inner) {
        let count = rep.curves.iter().filter(|c| c.samples.iter().any(|p| p.a2 == a2)).count();
        assert_eq!(count, 2);
    }
}
