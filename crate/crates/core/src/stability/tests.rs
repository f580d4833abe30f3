use super::*;
use crate::scenario::{generic, oracle, oracle_psi, GenericParams, OracleParams};

fn oracle_eps(eps: f64) -> Scenario {
    oracle(&OracleParams {
        perturbation: eps,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn identical_runs_have_zero_gaps() {
    let s = oracle_eps(0.0);
    let rep = run_pair(&s, &s, &IntegratorConfig::default()).unwrap();
    assert!(rep.records.len() > 3);
    assert_eq!(rep.delta, 0.0);
    for r in &rep.records {
        assert_eq!((r.x_gap, r.v_gap, r.w1), (0.0, 0.0, 0.0));
    }
    assert_eq!(rep.limit_w1, 0.0);
    assert!(rep.passed());
}

#[test]
fn oracle_position_gap_matches_closed_form_bound() {
    let eps = 1e-3;
    let (s1, s2) = (oracle_eps(0.0), oracle_eps(eps));
    let rep = run_pair(&s1, &s2, &IntegratorConfig::default()).unwrap();
    assert!(rep.passed(), "{:?}", rep.checks);
    // Momentum-corrected perturbation on the labels.
    let (a1, _) = s1.alpha();
    let w = s1.measure().weights();
    let mean: f64 = a1.iter().zip(&w).map(|(a, w)| w * oracle_psi(*a)).sum::<f64>() / s1.total_mass();
    let psi_sup = a1.iter().fold(0.0f64, |m, a| m.max((oracle_psi(*a) - mean).abs()));
    let km = s1.kappa() * s1.total_mass();
    let bound = eps / km * psi_sup * (1.0 + 1e-6);
    assert!(rep.records.iter().all(|r| r.x_gap <= bound));
    assert!(rep.limit_x_gap <= bound);
    // Constant kernel: the limit gap is exactly the bound.
    assert!((rep.limit_x_gap - eps * psi_sup / km).abs() < 1e-9);
    assert!((rep.constants.mu - km).abs() < 1e-14);
    assert_eq!(rep.constants.a, 0.0);
}

#[test]
fn limit_gap_responds_linearly() {
    let base = oracle_eps(0.0);
    let cfg = IntegratorConfig::default();
    let w: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&e| run_pair(&base, &oracle_eps(e), &cfg).unwrap().limit_w1)
        .collect();
    let ratio = w[0] / w[1];
    assert!((1.8..=2.2).contains(&ratio), "{ratio}");
}

#[test]
fn generic_pair_satisfies_all_bounds() {
    let s1 = generic(&GenericParams::default()).unwrap();
    let s2 = s1.perturbed_u0(1e-3, |a| ((3.0 * a[0]).cos(), [-3.0 * (3.0 * a[0]).sin(), 0.0])).unwrap();
    let rep = run_pair(&s1, &s2, &IntegratorConfig::default()).unwrap();
    assert!(rep.delta > 0.0);
    assert!(rep.constants.a > 0.0);
    assert!(rep.passed(), "{:?}", rep.checks);
    // The velocity gap decays.
    let last = rep.records.last().unwrap();
    assert!(last.v_gap < 1e-3 * rep.records[0].v_gap.max(rep.delta));
}

#[test]
fn preconditions_are_enforced() {
    let s1 = oracle_eps(0.0);
    let s2 = oracle(&OracleParams {
        n: 128,
        ..Default::default()
    })
    .unwrap();
    assert!(matches!(run_pair(&s1, &s2, &IntegratorConfig::default()), Err(Error::Stability(_))));
    let heavier = oracle(&OracleParams {
        mass: 2.0,
        ..Default::default()
    })
    .unwrap();
    assert!(matches!(run_pair(&s1, &heavier, &IntegratorConfig::default()), Err(Error::Stability(_))));
}
