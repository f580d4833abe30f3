use std::f64::consts::PI;

use super::*;
use crate::kernel::KernelFamily;
use crate::scenario::{
    breakdown, custom, disk, generic, oracle, BreakdownParams, CustomParams, DiskParams, GenericParams, OracleParams,
};

fn two_body() -> Scenario {
    custom(&CustomParams {
        n: vec![2],
        u0: "x".into(),
        kernel: KernelFamily::constant(1.0),
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn zero_velocity_is_an_equilibrium() {
    let s = oracle(&OracleParams {
        amplitude: 0.0,
        ..Default::default()
    })
    .unwrap();
    let (dx, dv) = initial_rhs(&s, Model::Full);
    assert!(dx.iter().chain(&dv).all(|&v| v == 0.0));
    let tr = integrate(&s, &IntegratorConfig::default()).unwrap();
    assert_eq!(tr.stop, StopReason::Aligned);
    let (a1, _) = s.alpha();
    assert_eq!(tr.final_state().x, a1);
    assert!(tr.diagnostics.iter().all(|d| d.amplitude == 0.0));
}

#[test]
fn two_bodies_relax_exponentially() {
    let s = two_body();
    let t_end = 3.0;
    for method in [Method::Rk4, Method::Rk45] {
        let cfg = IntegratorConfig {
            method,
            dt: Some(1e-3),
            ..Default::default()
        };
        let st = evolve(&s, &cfg, t_end).unwrap();
        for i in 0..2 {
            let (a, u) = (s.pos(i)[0], s.init()[i].u0);
            assert!((u - a).abs() < 1e-15);
            // Rate kappa (m1 + m2) = 1.
            let x = a + u * (1.0 - (-t_end).exp());
            let v = u * (-t_end).exp();
            assert!((st.x[i] - x).abs() < 1e-8, "{method:?}: {} vs {x}", st.x[i]);
            assert!((st.v[i] - v).abs() < 1e-8);
        }
    }
}

#[test]
fn alignment_force_has_zero_momentum() {
    for s in [
        oracle(&OracleParams::default()).unwrap(),
        generic(&GenericParams::default()).unwrap(),
    ] {
        let (_, dv) = initial_rhs(&s, Model::Full);
        let w = s.measure().weights();
        let scale: f64 = dv.iter().zip(&w).map(|(a, b)| (a * b).abs()).sum();
        let p = tree_sum(&dv.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>());
        assert!(p.abs() <= 1e-13 * scale, "{p} vs {scale}");
    }
}

#[test]
fn reduced_rhs_starts_at_u0() {
    for s in [
        oracle(&OracleParams::default()).unwrap(),
        generic(&GenericParams::default()).unwrap(),
    ] {
        let (dx, _) = initial_rhs(&s, Model::Reduced);
        for (i, l) in s.init().iter().enumerate() {
            assert!((dx[i] - l.u0).abs() < 1e-13, "{} vs {}", dx[i], l.u0);
        }
    }
}

#[test]
fn oracle_deformation_matches_closed_form() {
    let s = oracle(&OracleParams::default()).unwrap();
    let t_end = 2.5;
    let st = evolve(&s, &IntegratorConfig::default(), t_end).unwrap();
    let km = s.kappa() * s.total_mass();
    for (i, l) in s.init().iter().enumerate() {
        let want = 1.0 + l.du1 * (1.0 - (-km * t_end).exp()) / km;
        assert!((st.dx1[i] - want).abs() < 1e-6);
        let a = s.pos(i)[0];
        let x = a + l.u0 * (1.0 - (-km * t_end).exp()) / km;
        assert!((st.x[i] - x).abs() < 1e-9);
    }
}

#[test]
fn deformation_matches_label_differences() {
    let s = generic(&GenericParams {
        n: 256,
        ..Default::default()
    })
    .unwrap();
    let st = evolve(&s, &IntegratorConfig::default(), 2.0).unwrap();
    let h = s.pos(1)[0] - s.pos(0)[0];
    for i in 1..st.len() - 1 {
        let fd = (st.x[i + 1] - st.x[i - 1]) / (2.0 * h);
        assert!((fd - st.dx1[i]).abs() <= 1e-3 * st.dx1[i].abs(), "{i}: {fd} vs {}", st.dx1[i]);
    }
}

#[test]
fn full_and_reduced_models_agree() {
    let s = generic(&GenericParams::default()).unwrap();
    let cfg = |model| IntegratorConfig {
        model,
        dt: Some(1e-3),
        ..Default::default()
    };
    let full = evolve(&s, &cfg(Model::Full), 5.0).unwrap();
    let red = evolve(&s, &cfg(Model::Reduced), 5.0).unwrap();
    let err = full.x.iter().zip(&red.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
    let derr = full.dx1.iter().zip(&red.dx1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(derr < 1e-8, "{derr}");
}

#[test]
fn rk4_is_fourth_order() {
    let s = generic(&GenericParams::default()).unwrap();
    let run = |dt| {
        let cfg = IntegratorConfig {
            dt: Some(dt),
            ..Default::default()
        };
        evolve(&s, &cfg, 5.0).unwrap().x
    };
    let reference = run(0.0125 / 16.0);
    let err = |x: Vec<f64>| x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (e1, e2) = (err(run(0.2)), err(run(0.1)));
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} ({e1:e}, {e2:e})");
}

#[test]
fn oracle_run_aligns_at_the_exact_rate() {
    let s = oracle(&OracleParams::default()).unwrap();
    let tr = integrate(&s, &IntegratorConfig::default()).unwrap();
    assert_eq!(tr.stop, StopReason::Aligned);
    let fit = tr.amplitude_fit().unwrap();
    let km = s.kappa() * s.total_mass();
    assert!((-fit.slope - km).abs() < 0.05 * km, "rate {}", -fit.slope);
    let c = tr.constants.unwrap();
    for d in &tr.diagnostics {
        assert!(d.diameter <= c.diam_bound + 1e-12);
        assert!(d.e_residual <= 1e-6 * s.e0_scale());
        assert!(d.momentum.abs() <= 1e-10 * s.total_mass() * tr.initial_amplitude());
        assert!(d.min_dx1 > 0.0);
    }
    // Records follow 0, tau, 2 tau, 4 tau, ... then the final time.
    let times: Vec<f64> = tr.records.iter().map(|r| r.t).collect();
    assert_eq!(times[0], 0.0);
    assert!((times[1] - tr.tau).abs() < 1e-12);
    assert!((times[2] - 2.0 * tr.tau).abs() < 1e-12);
    assert!((times[3] - 4.0 * tr.tau).abs() < 1e-12);
    assert_eq!(tr.tail.len(), 3);
    assert_eq!(tr.tail[2].t, tr.final_time());
}

#[test]
fn breakdown_happens_before_the_crossing_bound() {
    let s = breakdown(&BreakdownParams::default()).unwrap();
    let cfg = IntegratorConfig {
        breakdown: true,
        ..Default::default()
    };
    let tr = integrate(&s, &cfg).unwrap();
    assert_eq!(tr.stop, StopReason::Breakdown);
    let b = tr.breakdown.as_ref().unwrap();
    let bound = b.crossing_bound.unwrap();
    assert!(b.time <= bound, "{} > {bound}", b.time);
    // Closed form: dX1 = 1 - c (1 - e^{-km t})/km first vanishes at the
    // label nearest the origin; eps_stop moves the time by O(1e-6).
    let predicted = s.info().predicted.iter().find(|p| p.0 == "crossing_time").unwrap().1;
    let a = s.pos(b.particle)[0];
    let c = 2.0 * (PI * a).cos();
    let t_label = -(1.0 - (1.0 - 1e-6) / c).ln();
    assert!((b.time - t_label).abs() < 1e-8, "{} vs {t_label}", b.time);
    assert!(b.time >= predicted - 1e-12);
    assert!(b.min_dx1 <= 1e-6 && b.min_dx1 > 1e-6 - 1e-9);
}

#[test]
fn crossing_outside_breakdown_mode_is_an_error() {
    let s = breakdown(&BreakdownParams::default()).unwrap();
    match integrate(&s, &IntegratorConfig::default()) {
        Err(Error::Crossing { t, min_dx1, .. }) => {
            assert!(min_dx1 < 0.0);
            assert!(t <= s.crossing_bound().unwrap() + 1.0);
        }
        other => panic!("expected a crossing error, got {other:?}"),
    }
}

#[test]
fn adaptive_and_fixed_steps_agree() {
    let s = generic(&GenericParams::default()).unwrap();
    let rk4 = evolve(&s, &IntegratorConfig::default(), 4.0).unwrap();
    let rk45 = evolve(
        &s,
        &IntegratorConfig {
            method: Method::Rk45,
            ..Default::default()
        },
        4.0,
    )
    .unwrap();
    let err = rk4.x.iter().zip(&rk45.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-7, "{err}");
}

#[test]
fn interpolated_sums_track_the_direct_loop() {
    let p = DiskParams {
        n: 24,
        ..Default::default()
    };
    let direct = disk(&p).unwrap().with_backend(crate::SumBackend::Direct);
    let cheb = disk(&p).unwrap().with_backend(crate::SumBackend::Chebyshev);
    let a = evolve(&direct, &IntegratorConfig::default(), 1.0).unwrap();
    let b = evolve(&cheb, &IntegratorConfig::default(), 1.0).unwrap();
    for (u, v) in [(&a.x, &b.x), (&a.dx1, &b.dx1), (&a.dx2, &b.dx2), (&a.v, &b.v)] {
        let err = u.iter().zip(v).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }
}

#[test]
fn planar_diameter_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for n in [1, 2, 3, 10, 200] {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut brute = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                brute = brute.max((x[i] - x[j]).hypot(y[i] - y[j]));
            }
        }
        assert!((planar_diameter(&x, &y) - brute).abs() < 1e-15);
    }
    // Collinear points.
    let x = [0.0, 1.0, 2.0, 3.0];
    assert!((planar_diameter(&x, &x) - 3.0 * 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn spectral_norm_of_the_flow_gradient() {
    assert!((matrix_norm(2.0, 0.0) - 2.0).abs() < 1e-15);
    assert!((matrix_norm(0.5, 0.0) - 1.0).abs() < 1e-15);
    // [[1, 1], [0, 1]] has norm the golden ratio.
    assert!((matrix_norm(1.0, 1.0) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
}
