//! The five commands. Each writes its artifacts and returns whether every
//! enabled bound check passed.

use alignflow::cases::{Workbench, CASES};
use alignflow::geometry::{
    box_dimension, box_dimension_auto, cantor_prediction, frostman_check, local_dimension, BallMass, CantorPrediction,
    FrostmanCheck,
};
use alignflow::limits::{analyze, BoundCheck};
use alignflow::scenario::CantorGeometry;
use alignflow::stability::run_pair;
use alignflow::{integrate, DimensionEstimate, LimitReport, Scenario, ScenarioSpec, Trajectory};
use anyhow::{bail, Result};
use serde::Serialize;

use crate::artifacts::Sink;
use crate::config::{Format, RunConfig};

/// Relative slack of `D(t) <= Dbar`.
const DIAMETER_SLACK: f64 = 1e-12;
/// `max_t e_residual <= E_SLACK ||e0||_inf`.
const E_SLACK: f64 = 1e-6;

/// A run-level inequality, reported next to the module checks.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }
}

pub struct Outcome {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn checks<'a>(&mut self, checks: impl IntoIterator<Item = &'a BoundCheck>) {
        for c in checks {
            self.passed &= c.passed;
            self.lines.push(format!(
                "[{}] {}: {} checked, {} violations, {} skipped, worst {:.3} of slack",
                verdict(c.passed),
                c.name,
                c.checked,
                c.violations,
                c.skipped,
                c.worst
            ));
        }
    }

    fn run_checks(&mut self, checks: &[Check]) {
        for c in checks {
            self.passed &= c.passed;
            self.lines
                .push(format!("[{}] {}: {:.6e} (limit {:.6e})", verdict(c.passed), c.name, c.value, c.limit));
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    label: usize,
    alpha1: f64,
    /// Empty in one dimension.
    alpha2: Option<f64>,
    x: f64,
    v: f64,
    dx1: Option<f64>,
    dv1: Option<f64>,
}

#[derive(Serialize)]
struct DiagnosticsDoc<'a> {
    scenario: &'a alignflow::scenario::ScenarioInfo,
    dt: f64,
    tau: f64,
    constants: Option<alignflow::FlockingConstants>,
    crossing_bound: Option<f64>,
    stop: alignflow::dynamics::StopReason,
    breakdown: &'a Option<alignflow::dynamics::Breakdown>,
    steps: u64,
    rhs_evals: u64,
    decay_rate: Option<f64>,
    checks: &'a [Check],
    diagnostics: &'a [alignflow::dynamics::Diagnostics],
}

struct Simulated {
    scenario: Scenario,
    trajectory: Trajectory,
}

fn run_checks(s: &Scenario, t: &Trajectory) -> Vec<Check> {
    let mut out = Vec::new();
    if let Some(c) = t.constants {
        let d = t.diagnostics.iter().map(|d| d.diameter).fold(0.0, f64::max);
        out.push(Check::at_most(
            "diameter D(t) <= Dbar",
            d,
            c.diam_bound * (1.0 + DIAMETER_SLACK),
        ));
    }
    let e = t.diagnostics.iter().map(|d| d.e_residual).fold(0.0, f64::max);
    out.push(Check::at_most("e-conservation residual", e, E_SLACK * s.e0_scale()));
    out
}

fn simulate_into(cfg: &RunConfig, sink: &mut Sink, out: &mut Outcome) -> Result<Simulated> {
    let scenario = cfg.scenario.build()?;
    let trajectory = integrate(&scenario, &cfg.integrator)?;
    let checks = run_checks(&scenario, &trajectory);
    if cfg.output.wants(Format::Csv) {
        let t = &trajectory;
        sink.csv(
            "trajectory.csv",
            t.records.iter().flat_map(|r| {
                (0..r.len()).map(move |i| TrajectoryRow {
                    t: r.t,
                    label: i,
                    alpha1: t.alpha1[i],
                    alpha2: t.alpha2.get(i).copied(),
                    x: r.x[i],
                    v: r.v[i],
                    dx1: r.dx1.get(i).copied(),
                    dv1: r.dv1.get(i).copied(),
                })
            }),
        )?;
    }
    if cfg.output.wants(Format::Json) {
        let doc = DiagnosticsDoc {
            scenario: scenario.info(),
            dt: trajectory.dt,
            tau: trajectory.tau,
            constants: trajectory.constants,
            crossing_bound: scenario.crossing_bound(),
            stop: trajectory.stop,
            breakdown: &trajectory.breakdown,
            steps: trajectory.steps,
            rhs_evals: trajectory.rhs_evals,
            decay_rate: trajectory.amplitude_fit().map(|f| -f.slope),
            checks: &checks,
            diagnostics: &trajectory.diagnostics,
        };
        sink.json("diagnostics.json", "diagnostics", &doc)?;
    }
    out.lines.push(format!(
        "{}: {} labels, stopped ({:?}) at t = {:.6} after {} steps",
        scenario.info().name,
        scenario.measure().len(),
        trajectory.stop,
        trajectory.final_time(),
        trajectory.steps
    ));
    if let Some(b) = &trajectory.breakdown {
        out.lines.push(format!(
            "breakdown at t = {:.6} (label {}, alpha {:?}); crossing bound {:?}",
            b.time, b.particle, b.alpha, b.crossing_bound
        ));
    }
    out.run_checks(&checks);
    Ok(Simulated { scenario, trajectory })
}

pub fn simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let mut out = Outcome::new();
    simulate_into(cfg, sink, &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct CurveRow {
    curve: usize,
    a2: f64,
    lo: f64,
    hi: f64,
    position: f64,
    weight: f64,
    particle_weight: f64,
    diameter: f64,
}

#[derive(Serialize)]
struct DensityRow {
    particle: usize,
    xbar: f64,
    rho_bar: f64,
    weight: f64,
}

fn limit_into(cfg: &RunConfig, sink: &mut Sink, out: &mut Outcome) -> Result<(Simulated, LimitReport)> {
    let sim = simulate_into(cfg, sink, out)?;
    let report = analyze(&sim.trajectory, &sim.scenario, &cfg.analysis.limit)?;
    if cfg.output.wants(Format::Json) {
        sink.json("limit_report.json", "limit_report", &report)?;
    }
    if cfg.output.wants(Format::Csv) {
        sink.csv(
            "density.csv",
            report.decomposition.ac.iter().map(|a| DensityRow {
                particle: a.particle,
                xbar: a.xbar,
                rho_bar: a.rho_bar,
                weight: a.weight,
            }),
        )?;
        if sim.scenario.dim() == 2 {
            sink.csv(
                "curves.csv",
                report.curves.iter().enumerate().flat_map(|(k, c)| {
                    c.samples.iter().map(move |s| CurveRow {
                        curve: k,
                        a2: s.a2,
                        lo: s.interval[0],
                        hi: s.interval[1],
                        position: s.position,
                        weight: s.weight,
                        particle_weight: s.particle_weight,
                        diameter: s.diameter,
                    })
                }),
            )?;
        }
    }
    let d = &report.decomposition;
    out.lines.push(format!(
        "limit: extrapolation bound {:.3e}, {} singular atoms, singular mass {:.9}, ac mass {:.9}, {} curves",
        report.map.error_bound,
        d.atoms.len(),
        d.singular_mass,
        d.ac_mass,
        report.curves.len()
    ));
    out.checks(&report.checks);
    Ok((sim, report))
}

pub fn limit(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let mut out = Outcome::new();
    limit_into(cfg, sink, &mut out)?;
    Ok(out)
}

#[derive(Serialize)]
struct LocalEstimate {
    alpha: f64,
    x: f64,
    estimate: DimensionEstimate,
}

#[derive(Serialize)]
struct DimensionDoc {
    box_counting: Option<DimensionEstimate>,
    cantor: Option<CantorPrediction>,
    frostman: Option<FrostmanCheck>,
    local: Vec<LocalEstimate>,
}

#[derive(Serialize)]
struct LogLogRow {
    estimate: String,
    ln_x: f64,
    ln_y: f64,
}

pub fn dimension(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let mut out = Outcome::new();
    let (sim, report) = limit_into(cfg, sink, &mut out)?;
    let s = &sim.scenario;
    if s.dim() != 1 {
        bail!("dimension estimates need a one-dimensional scenario, got dimension {}", s.dim());
    }
    let mut doc = DimensionDoc {
        box_counting: None,
        cantor: None,
        frostman: None,
        local: Vec::new(),
    };
    let points: Vec<f64> = report
        .decomposition
        .atoms
        .iter()
        .filter(|a| a.interval.is_some())
        .map(|a| a.position)
        .collect();
    if points.len() > 1 {
        let mut est = match &cfg.analysis.box_radii {
            Some(r) => box_dimension(&points, &r.radii())?,
            None => box_dimension_auto(&points, report.map.error_bound)?,
        };
        if let ScenarioSpec::Cantor(p) = &cfg.scenario {
            let pred = cantor_prediction(p.gamma, p.beta, s.info().smoothness_k)?;
            est = est.with_prediction(pred.dimension, "cantor");
            let fr = frostman_check(s, &report.decomposition, &CantorGeometry::new(p.gamma, p.beta, p.depth)?)?;
            out.lines.push(format!(
                "predicted dimension {:.6}, ceiling 1/(k+1) = {:.6}",
                pred.dimension, pred.ceiling
            ));
            out.passed &= fr.passed;
            out.lines.push(format!(
                "[{}] mass distribution: max mbar_Z(B)/r^s = {:.4} (allowed {:.4}, {} balls)",
                verdict(fr.passed),
                fr.worst,
                fr.bound,
                fr.balls
            ));
            doc.cantor = Some(pred);
            doc.frostman = Some(fr);
        }
        out.lines.push(format!(
            "box dimension of the concentration set: {:.6} over {} radii (rms residual {:.2e})",
            est.slope,
            est.radii.len(),
            est.residual
        ));
        doc.box_counting = Some(est);
    } else {
        out.lines.push(format!("{} concentration atoms: no box-counting fit", points.len()));
    }
    if !cfg.analysis.local.is_empty() {
        let balls = BallMass::new(s, &report.map)?;
        for p in &cfg.analysis.local {
            let x = balls.image(p.alpha);
            let estimate = local_dimension(s, &report.map, x, &p.radii())?;
            out.lines.push(format!(
                "local dimension at Xbar({}) = {:.6}: {:.6}",
                p.alpha, x, estimate.slope
            ));
            doc.local.push(LocalEstimate {
                alpha: p.alpha,
                x,
                estimate,
            });
        }
    }
    if cfg.output.wants(Format::Json) {
        sink.json("dimension.json", "dimension", &doc)?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut rows = Vec::new();
        let named = doc
            .box_counting
            .iter()
            .map(|e| ("box".to_string(), e))
            .chain(doc.local.iter().map(|l| (format!("local@{}", l.alpha), &l.estimate)));
        for (name, e) in named {
            rows.extend(e.loglog().into_iter().map(|(x, y)| LogLogRow {
                estimate: name.clone(),
                ln_x: x,
                ln_y: y,
            }));
        }
        sink.csv("loglog.csv", rows)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct GapRow {
    t: f64,
    x_gap: f64,
    v_gap: f64,
    w1: f64,
    x_bound: f64,
    v_bound: f64,
    v_bound_exp: f64,
    w1_chain: f64,
}

pub fn stability(cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    let Some(st) = &cfg.stability else {
        bail!("config error at `stability`: the stability command needs a [stability] block");
    };
    let first = cfg.scenario.build()?;
    let second = match (&st.second, &st.perturbation) {
        (Some(spec), _) => spec.build()?,
        (None, Some(p)) => first.perturbed_u0_expr(p.eps, &p.psi)?,
        (None, None) => unreachable!("checked when the config is resolved"),
    };
    let report = run_pair(&first, &second, &cfg.integrator)?;
    if cfg.output.wants(Format::Json) {
        sink.json("stability.json", "stability", &report)?;
    }
    if cfg.output.wants(Format::Csv) {
        sink.csv(
            "stability.csv",
            report.records.iter().map(|r| GapRow {
                t: r.t,
                x_gap: r.x_gap,
                v_gap: r.v_gap,
                w1: r.w1,
                x_bound: r.x_bound,
                v_bound: r.v_bound,
                v_bound_exp: r.v_bound_exp,
                w1_chain: r.w1_chain,
            }),
        )?;
    }
    let mut out = Outcome::new();
    let k = &report.constants;
    out.lines.push(format!(
        "delta = {:.6e}; mu = {:.6}, a = {:.6}, C = {:.6}, c = {:.6}",
        report.delta, k.mu, k.a, k.big_c, k.c
    ));
    out.lines.push(format!(
        "limit: sup|Xbar' - Xbar''| = {:.6e}, W1 = {:.6e}",
        report.limit_x_gap, report.limit_w1
    ));
    out.checks(&report.checks);
    Ok(out)
}

/// Runs one named case, or all of them for `all`.
pub fn reproduce(case: &str, sink: &mut Sink) -> Result<Outcome> {
    let names: Vec<&str> = if case == "all" { CASES.to_vec() } else { vec![case] };
    let mut bench = Workbench::new();
    let mut out = Outcome::new();
    let mut outcomes = Vec::new();
    for name in names {
        let o = bench.case(name)?;
        out.passed &= o.passed;
        out.lines.push(o.summary());
        out.lines.extend(o.notes.iter().map(|n| format!("    note: {n}")));
        outcomes.push(o);
    }
    sink.json("reproduce.json", "cases", &outcomes)?;
    Ok(out)
}
