//! Paired runs on a shared label grid and the Lipschitz dependence of the
//! trajectories, velocities and measures on the data.
//!
//! For data `(u0', m0)` and `(u0'', m0)` with zero momentum, write
//! `delta = W1(m0', m0'') + max_i |u0'_i - u0''_i|` and `mu = min(b', b'')`.
//! The reduced equation `Xdot = f0 - kappa sum_j w_j varphi(X - X_j)` and a
//! maximum principle on the (mean-free) differences give
//!
//! * `sup |X' - X''| <= delta/mu`,
//! * `sup |V' - V''|(t) <= e^{-mu t} (delta + 2 a delta t/mu)
//!   <= (1 + 4a/(e mu^2)) delta e^{-mu t/2}`, with `a = max(a', a'')`,
//! * `W1(m_t', m_t'') <= M0 sup |X' - X''|`, also at `t = infinity`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::kernel::FlockingConstants;
use crate::limits::{limit_flow_map, BoundCheck, LimitConfig};
use crate::measure::w1_discrete;
use crate::scenario::Scenario;

/// Absolute slack of every stability inequality.
pub const STABILITY_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct StabilityConstants {
    pub mu: f64,
    pub a: f64,
    /// Gain of the position gap, `1/mu`.
    pub x_gain: f64,
    /// Gain of the velocity gap, `1 + 4a/(e mu^2)`.
    pub v_gain: f64,
    /// Gain of the measure gap, `M0/mu`.
    pub w_gain: f64,
    /// `max` of the three gains.
    pub big_c: f64,
    /// Decay rate `mu/2`.
    pub c: f64,
}

impl StabilityConstants {
    pub fn new(first: &FlockingConstants, second: &FlockingConstants, total_mass: f64) -> Self {
        let mu = first.b.min(second.b);
        let a = first.a.max(second.a);
        let x_gain = 1.0 / mu;
        let v_gain = 1.0 + 4.0 * a / (std::f64::consts::E * mu * mu);
        let w_gain = total_mass / mu;
        Self {
            mu,
            a,
            x_gain,
            v_gain,
            w_gain,
            big_c: x_gain.max(v_gain).max(w_gain),
            c: 0.5 * mu,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct StabilityRecord {
    pub t: f64,
    pub x_gap: f64,
    pub v_gap: f64,
    /// Exact in one dimension, the label-coupled cost in two.
    pub w1: f64,
    pub x_bound: f64,
    /// The time-resolved bound `e^{-mu t}(delta + 2 a delta t/mu)`.
    pub v_bound: f64,
    /// `C e^{-c t} delta`.
    pub v_bound_exp: f64,
    /// `||grad X|| W1(m0', m0'') + M0 sup|X' - X''|` at this time.
    pub w1_chain: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub w1_initial: f64,
    pub u0_gap: f64,
    pub delta: f64,
    pub first: FlockingConstants,
    pub second: FlockingConstants,
    pub constants: StabilityConstants,
    pub records: Vec<StabilityRecord>,
    pub limit_x_gap: f64,
    pub limit_w1: f64,
    pub checks: Vec<BoundCheck>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn w1_on_labels(dim: usize, w: &[f64], x1: &[f64], x2: &[f64]) -> Result<f64> {
    if dim == 1 {
        let a: Vec<(f64, f64)> = x1.iter().copied().zip(w.iter().copied()).collect();
        let b: Vec<(f64, f64)> = x2.iter().copied().zip(w.iter().copied()).collect();
        w1_discrete(&a, &b)
    } else {
        Ok(w.iter().zip(x1.iter().zip(x2)).map(|(w, (a, b))| w * (a - b).abs()).sum())
    }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn check_pair(first: &Scenario, second: &Scenario) -> Result<()> {
    let (m1, m2) = (first.measure(), second.measure());
    if first.dim() != second.dim() || m1.len() != m2.len() {
        return Err(Error::Stability("the scenarios do not share a label grid".into()));
    }
    if m1.support() != m2.support() {
        return Err(Error::Stability("the scenarios do not share the domain".into()));
    }
    for i in 0..m1.len() {
        if m1.position(i) != m2.position(i) {
            return Err(Error::Stability(format!("label {i} sits at different positions")));
        }
        if m1.weight(i) != m2.weight(i) || m1.is_atom(i) != m2.is_atom(i) {
            return Err(Error::Stability(format!(
                "label {i} carries different mass; only velocity perturbations are supported"
            )));
        }
    }
    for s in [first, second] {
        let scale = s.total_mass() * s.init().iter().fold(1.0f64, |m, l| m.max(l.u0.abs()));
        if s.momentum().abs() > 1e-12 * scale {
            return Err(Error::Stability(format!("{} has momentum {:e}", s.info().name, s.momentum())));
        }
        if let Some(bound) = s.crossing_bound() {
            return Err(Error::Stability(format!(
                "{} is supercritical (crossing by t <= {bound})",
                s.info().name
            )));
        }
    }
    Ok(())
}

/// Integrates both scenarios on one record schedule and checks the three
/// stability inequalities at every common recorded time and at the limit.
pub fn run_pair(first: &Scenario, second: &Scenario, cfg: &IntegratorConfig) -> Result<StabilityReport> {
    check_pair(first, second)?;
    let t1 = integrate(first, cfg)?;
    let cfg2 = IntegratorConfig {
        tau: Some(t1.tau),
        ..cfg.clone()
    };
    let t2 = integrate(second, &cfg2)?;
    compare(first, second, &t1, &t2)
}

/// The comparison pass of [`run_pair`] on finished trajectories.
pub fn compare(first: &Scenario, second: &Scenario, t1: &Trajectory, t2: &Trajectory) -> Result<StabilityReport> {
    let (c1, c2) = match (t1.constants, t2.constants) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NotHeavyTailed),
    };
    let m0 = first.total_mass();
    let w = first.measure().weights();
    let dim = first.dim();
    let u1: Vec<f64> = first.init().iter().map(|l| l.u0).collect();
    let u2: Vec<f64> = second.init().iter().map(|l| l.u0).collect();
    let u0_gap = sup_gap(&u1, &u2);
    // Shared labels and weights make the initial measures equal.
    let w1_initial = 0.0;
    let delta = w1_initial + u0_gap;
    let k = StabilityConstants::new(&c1, &c2, m0);

    let mut records = Vec::new();
    let mut xc = BoundCheck::new("position gap");
    let mut vc = BoundCheck::new("velocity gap");
    let mut ve = BoundCheck::new("velocity gap, exponential form");
    let mut wc = BoundCheck::new("measure gap");
    let mut chain = BoundCheck::new("measure gap chain");
    for r1 in &t1.records {
        let Some(r2) = t2.records.iter().find(|r| r.t == r1.t) else {
            continue;
        };
        let grad_x = t1
            .diagnostics
            .iter()
            .find(|d| d.t == r1.t)
            .map_or(f64::INFINITY, |d| d.grad_x);
        let x_gap = sup_gap(&r1.x, &r2.x);
        let rec = StabilityRecord {
            t: r1.t,
            x_gap,
            v_gap: sup_gap(&r1.v, &r2.v),
            w1: w1_on_labels(dim, &w, &r1.x, &r2.x)?,
            x_bound: k.x_gain * delta,
            v_bound: (-k.mu * r1.t).exp() * (delta + 2.0 * k.a * delta * r1.t / k.mu),
            v_bound_exp: k.big_c * (-k.c * r1.t).exp() * delta,
            w1_chain: if w1_initial == 0.0 { 0.0 } else { grad_x * w1_initial } + m0 * x_gap,
        };
        xc.bracket(f64::NEG_INFINITY, rec.x_gap, rec.x_bound, STABILITY_SLACK);
        vc.bracket(f64::NEG_INFINITY, rec.v_gap, rec.v_bound, STABILITY_SLACK);
        ve.bracket(f64::NEG_INFINITY, rec.v_gap, rec.v_bound_exp, STABILITY_SLACK);
        wc.bracket(f64::NEG_INFINITY, rec.w1, k.w_gain * delta, STABILITY_SLACK);
        chain.bracket(f64::NEG_INFINITY, rec.w1, rec.w1_chain, STABILITY_SLACK);
        records.push(rec);
    }
    let lc = LimitConfig::default();
    let l1 = limit_flow_map(t1, first, &lc)?;
    let l2 = limit_flow_map(t2, second, &lc)?;
    let limit_x_gap = sup_gap(&l1.xbar, &l2.xbar);
    let limit_w1 = w1_on_labels(dim, &w, &l1.xbar, &l2.xbar)?;
    let mut lim = BoundCheck::new("limit measure gap");
    lim.bracket(f64::NEG_INFINITY, limit_w1, k.w_gain * delta, STABILITY_SLACK);
    lim.bracket(f64::NEG_INFINITY, limit_x_gap, k.x_gain * delta, STABILITY_SLACK);
    Ok(StabilityReport {
        w1_initial,
        u0_gap,
        delta,
        first: c1,
        second: c2,
        constants: k,
        records,
        limit_x_gap,
        limit_w1,
        checks: vec![xc, vc, ve, wc, chain, lim],
    })
}

#[cfg(test)]
mod tests;
