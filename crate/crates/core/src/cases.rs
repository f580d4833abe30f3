//! Named end-to-end cases, one per acceptance criterion. Each runs its
//! pipeline at the production size and reports measured values against the
//! required tolerances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, integrate, IntegratorConfig, Method, Model, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{box_dimension_auto, cantor_prediction, frostman_check, local_dimension, BallMass};
use crate::limits::{analyze, check_separation_bounds, LimitConfig, LimitReport};
use crate::scenario::{
    annulus, cantor, disk, generic, oracle, plateau, powerlaw, AnnulusParams, CantorGeometry, CantorParams, DiskParams,
    GenericParams, OracleParams, PlateauParams, PowerlawParams, Scenario,
};
use crate::stability::run_pair;

/// Subcritical scenarios every global check runs on.
pub const SHIPPED: [&str; 8] = [
    "oracle",
    "generic",
    "plateau",
    "powerlaw-2",
    "powerlaw-3",
    "cantor",
    "disk",
    "annulus",
];

/// Case names in criterion order.
pub const CASES: [&str; 11] = [
    "oracle",
    "separation",
    "cantor-k1",
    "local-dimension",
    "flocking",
    "deformation",
    "e-conservation",
    "dichotomy",
    "stability",
    "reduced-full",
    "aggregation-2d",
];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// The requirement, e.g. `<= 1e-4`.
    pub requirement: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CaseOutcome {
    pub criterion: usize,
    pub name: String,
    pub passed: bool,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl CaseOutcome {
    fn new(name: &str) -> Self {
        Self {
            criterion: CASES.iter().position(|c| *c == name).map_or(0, |k| k + 1),
            name: name.into(),
            passed: true,
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.metric(name, value, format!("<= {limit:e}"), value <= limit);
    }

    fn within(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        self.metric(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    fn metric(&mut self, name: impl Into<String>, value: f64, requirement: String, passed: bool) {
        self.passed &= passed;
        self.metrics.push(Metric {
            name: name.into(),
            value,
            requirement,
            passed,
        });
    }

    /// Reported alongside the verdict without gating it.
    fn info(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            requirement: "reported".into(),
            passed: true,
        });
    }

    /// One line: `[PASS] 3 cantor-k1: box dimension = 0.286 (in [..]), ...`.
    pub fn summary(&self) -> String {
        let body: Vec<String> = self
            .metrics
            .iter()
            .map(|m| format!("{} = {:.6e} ({}{})", m.name, m.value, m.requirement, if m.passed { "" } else { ", FAILED" }))
            .collect();
        format!(
            "[{}] {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            body.join("; ")
        )
    }
}

/// A shipped scenario and its integrator settings.
pub fn shipped(key: &str) -> Result<(Scenario, IntegratorConfig)> {
    let base = IntegratorConfig::default();
    let fine = IntegratorConfig {
        tol_align: 1e-12,
        ..base.clone()
    };
    let planar = IntegratorConfig {
        method: Method::Rk45,
        ..base.clone()
    };
    Ok(match key {
        "oracle" => (oracle(&OracleParams::default())?, base),
        "generic" => (generic(&GenericParams::default())?, base),
        "plateau" => (plateau(&PlateauParams::default())?, base),
        "powerlaw-2" => (powerlaw(&PowerlawParams::default())?, fine),
        "powerlaw-3" => (
            powerlaw(&PowerlawParams {
                p: 3.0,
                ..Default::default()
            })?,
            fine,
        ),
        "cantor" => (cantor(&CantorParams::default())?, fine),
        "disk" => (disk(&DiskParams::default())?, planar),
        "annulus" => (annulus(&AnnulusParams::default())?, planar),
        _ => return Err(Error::Config(format!("unknown scenario '{key}'; known: {}", SHIPPED.join(", ")))),
    })
}

pub struct Run {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub report: LimitReport,
}

/// Runs shipped scenarios once and shares them between cases.
#[derive(Default)]
pub struct Workbench {
    runs: BTreeMap<String, Run>,
}

impl Workbench {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run(&mut self, key: &str) -> Result<&Run> {
        if !self.runs.contains_key(key) {
            let (scenario, cfg) = shipped(key)?;
            let trajectory = integrate(&scenario, &cfg)?;
            let report = analyze(&trajectory, &scenario, &LimitConfig::default())?;
            self.runs.insert(
                key.into(),
                Run {
                    scenario,
                    trajectory,
                    report,
                },
            );
        }
        Ok(&self.runs[key])
    }

    pub fn case(&mut self, name: &str) -> Result<CaseOutcome> {
        match name {
            "oracle" => self.oracle(),
            "separation" => self.separation(),
            "cantor-k1" => self.cantor_k1(),
            "local-dimension" => self.local_dimension(),
            "flocking" => self.flocking(),
            "deformation" => self.deformation(),
            "e-conservation" => self.e_conservation(),
            "dichotomy" => self.dichotomy(),
            "stability" => stability(),
            "reduced-full" => reduced_full(),
            "aggregation-2d" => self.aggregation(),
            _ => Err(Error::Config(format!("unknown case '{name}'; known: {}", CASES.join(", ")))),
        }
    }

    fn oracle(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("oracle");
        let run = self.run("oracle")?;
        let s = &run.scenario;
        let km = s.kappa() * s.total_mass();
        let (mut xerr, mut derr) = (0.0f64, 0.0f64);
        for i in 0..s.measure().len() {
            let a = s.pos(i)[0];
            let exact = a + s.u0_at(&[a]) / km;
            xerr = xerr.max((run.report.map.xbar[i] - exact).abs());
            derr = derr.max((run.report.map.dx1bar[i] - s.init()[i].e0 / km).abs());
        }
        out.at_most("max |Xbar - (a + u0)|", xerr, 1e-4);
        out.at_most("max |d1 Xbar - e0|", derr, 1e-3);
        Ok(out)
    }

    fn separation(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("separation");
        let cfg = LimitConfig::default();
        for key in ["oracle", "cantor", "powerlaw-2"] {
            let run = self.run(key)?;
            let c = check_separation_bounds(&run.scenario, &run.report.map, cfg.pairs, cfg.seed, cfg.slack);
            out.at_most(format!("{key} violations of {}", c.checked), c.violations as f64, 0.0);
        }
        Ok(out)
    }

    fn cantor_k1(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("cantor-k1");
        let p = CantorParams::default();
        let run = self.run("cantor")?;
        let pred = cantor_prediction(p.gamma, p.beta, 1)?;
        let points: Vec<f64> = run
            .report
            .decomposition
            .atoms
            .iter()
            .filter(|a| a.interval.is_some())
            .map(|a| a.position)
            .collect();
        let est = box_dimension_auto(&points, run.report.map.error_bound)?;
        out.within("box dimension", est.slope, pred.dimension - 0.08, pred.dimension + 0.08);
        out.at_most("box dimension vs C^1 ceiling", est.slope, pred.ceiling + 0.05);
        out.info("predicted dimension", pred.dimension);
        out.info("fit residual", est.residual);
        let fr = frostman_check(&run.scenario, &run.report.decomposition, &CantorGeometry::new(p.gamma, p.beta, p.depth)?)?;
        out.info("max mbar_Z(B)/r^s", fr.worst);
        out.info("allowed 8/c3^s", fr.bound);
        if !fr.passed {
            out.notes.push("mass-distribution bound exceeded on sampled balls".into());
        }
        Ok(out)
    }

    fn local_dimension(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("local-dimension");
        // Nine radii evenly spaced in log from 1e-2 down to 1e-4.
        let radii: Vec<f64> = (0..=8).map(|k| 1e-2 * 1e-2f64.powf(k as f64 / 8.0)).collect();
        for (key, p) in [("powerlaw-2", 2.0), ("powerlaw-3", 3.0)] {
            let run = self.run(key)?;
            let x = BallMass::new(&run.scenario, &run.report.map)?.image(0.0);
            let e = local_dimension(&run.scenario, &run.report.map, x, &radii)?;
            out.within(format!("{key} slope"), e.slope, 1.0 / p - 0.05, 1.0 / p + 0.05);
        }
        Ok(out)
    }

    fn flocking(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("flocking");
        for key in SHIPPED {
            let run = self.run(key)?;
            let c = run.trajectory.constants.ok_or(Error::NotHeavyTailed)?;
            let worst = run
                .trajectory
                .diagnostics
                .iter()
                .map(|d| d.diameter - c.diam_bound)
                .fold(f64::NEG_INFINITY, f64::max);
            out.at_most(format!("{key} max D(t) - Dbar"), worst, 1e-12 * c.diam_bound);
            let rate = run.trajectory.amplitude_fit().map_or(f64::NAN, |f| -f.slope);
            // The oracle decays at exactly b; RK4 damps by e^{-z} + O(z^5) per step.
            let floor = c.b * (1.0 - 1e-6);
            out.metric(format!("{key} decay rate"), rate, format!(">= b = {:.9} (rel. 1e-6)", c.b), rate >= floor);
            if key == "oracle" {
                let km = run.scenario.kappa() * run.scenario.total_mass();
                out.within("oracle rate / kappa M0", rate / km, 0.95, 1.05);
            }
        }
        Ok(out)
    }

    fn deformation(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("deformation");
        let mut corrected_ok = true;
        for key in SHIPPED {
            let run = self.run(key)?;
            let c = run.trajectory.constants.ok_or(Error::NotHeavyTailed)?;
            let g0 = run.scenario.u0_grad_sup();
            let rhs0 = c.a + g0 * g0;
            let stated = 4.0 * c.a.sqrt() / c.b * rhs0;
            let corrected = (4.0 * c.a.sqrt() / c.b).exp() * rhs0;
            let lhs = run
                .trajectory
                .diagnostics
                .iter()
                .map(|d| c.a * d.grad_x * d.grad_x + (c.b * d.t).exp() * d.grad_v * d.grad_v)
                .fold(0.0, f64::max);
            out.metric(
                format!("{key} max lhs / stated rhs"),
                lhs / stated,
                "<= 1".into(),
                lhs <= stated * (1.0 + 1e-12),
            );
            corrected_ok &= lhs <= corrected * (1.0 + 1e-12);
            out.info(format!("{key} max lhs / exp-corrected rhs"), lhs / corrected);
        }
        if !out.passed {
            out.notes.push(format!(
                "the stated constant 4 sqrt(a)/b is not implied by the differential inequality; \
                 the exp(4 sqrt(a)/b) form {} on every scenario",
                if corrected_ok { "holds" } else { "also fails" }
            ));
        }
        Ok(out)
    }

    fn e_conservation(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("e-conservation");
        for key in SHIPPED {
            let run = self.run(key)?;
            let res = run.trajectory.diagnostics.iter().map(|d| d.e_residual).fold(0.0, f64::max);
            out.at_most(format!("{key} max e_residual / |e0|"), res / run.scenario.e0_scale(), 1e-6);
        }
        Ok(out)
    }

    fn dichotomy(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("dichotomy");
        let run = self.run("generic")?;
        let m0 = run.scenario.total_mass();
        let d = &run.report.decomposition;
        out.at_most("generic singular mass / M0", d.singular_mass / m0, 1e-8);
        out.at_most("generic |total - M0|", (d.total_mass - m0).abs(), 1e-10);
        let run = self.run("plateau")?;
        let m0 = run.scenario.total_mass();
        let d = &run.report.decomposition;
        out.within("plateau atoms", d.atoms.len() as f64, 1.0, 1.0);
        let mass = d.atoms.first().map_or(0.0, |a| a.mass);
        out.at_most("plateau |atom mass - 0.3|", (mass - 0.3).abs(), 1e-6);
        out.at_most("plateau |total - M0|", (d.total_mass - m0).abs(), 1e-10);
        Ok(out)
    }

    fn aggregation(&mut self) -> Result<CaseOutcome> {
        let mut out = CaseOutcome::new("aggregation-2d");
        let p = DiskParams::default();
        let run = self.run("disk")?;
        let d = &run.report.decomposition;
        let diam = d.atoms.iter().map(|a| a.diameter).fold(0.0, f64::max);
        out.at_most("disk max slice image diameter", diam, 1e-4);
        // rho0 == 1, so c(a2) is the chord of {e0 <= eps}, a disk of radius
        // R + sqrt(eps/A) since e0 = A (r - R)^2 outside.
        let big_r = p.radius + (run.report.zero_set.threshold / p.amplitude).sqrt();
        let mut werr = 0.0f64;
        for curve in &run.report.curves {
            for smp in &curve.samples {
                let chord = 2.0 * (big_r * big_r - smp.a2 * smp.a2).max(0.0).sqrt();
                werr = werr.max((smp.weight - chord).abs());
            }
        }
        out.within("disk curves", run.report.curves.len() as f64, 1.0, 1.0);
        out.at_most("disk max |c(a2) - slice integral|", werr, 1e-4);
        let a = AnnulusParams::default();
        let run = self.run("annulus")?;
        let curves = &run.report.curves;
        let shared: Vec<f64> = run.scenario.slices().into_iter().filter(|y| y.abs() < a.inner).collect();
        let (mut lo, mut hi) = (usize::MAX, 0);
        for y in &shared {
            let k = curves.iter().filter(|c| c.samples.iter().any(|s| s.a2 == *y)).count();
            lo = lo.min(k);
            hi = hi.max(k);
        }
        out.within("annulus min branches on shared slices", lo as f64, 2.0, 2.0);
        out.within("annulus max branches on shared slices", hi as f64, 2.0, 2.0);
        out.info("annulus curves", curves.len() as f64);
        Ok(out)
    }
}

fn stability() -> Result<CaseOutcome> {
    let mut out = CaseOutcome::new("stability");
    let base = oracle(&OracleParams::default())?;
    let cfg = IntegratorConfig::default();
    let mut w1 = Vec::new();
    for eps in [1e-3, 5e-4] {
        let other = oracle(&OracleParams {
            perturbation: eps,
            ..Default::default()
        })?;
        let rep = run_pair(&base, &other, &cfg)?;
        for c in &rep.checks {
            out.at_most(format!("eps {eps:e} {} violations", c.name), c.violations as f64, 0.0);
        }
        w1.push(rep.limit_w1);
    }
    out.within("W1(mbar', mbar'') ratio", w1[0] / w1[1], 1.8, 2.2);
    Ok(out)
}

fn reduced_full() -> Result<CaseOutcome> {
    let mut out = CaseOutcome::new("reduced-full");
    let s = generic(&GenericParams::default())?;
    let at = |model, dt| {
        evolve(
            &s,
            &IntegratorConfig {
                model,
                dt: Some(dt),
                ..Default::default()
            },
            5.0,
        )
        .map(|st| st.x)
    };
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let full = at(Model::Full, 1e-3)?;
    let red = at(Model::Reduced, 1e-3)?;
    out.at_most("max |X_full - X_reduced| at t = 5", sup(&full, &red), 1e-6);
    let reference = at(Model::Full, 0.0125 / 16.0)?;
    let e1 = sup(&at(Model::Full, 0.2)?, &reference);
    let e2 = sup(&at(Model::Full, 0.1)?, &reference);
    out.within("RK4 error ratio under halving", e1 / e2, 12.0, 20.0);
    Ok(out)
}
