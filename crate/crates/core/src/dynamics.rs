//! Lagrangian integration of the unidirectional alignment dynamics.
//!
//! Each particle (a lumped label or an atom) carries its active position `X`,
//! velocity `V`, and the deformation entries `dX1 = d_{a1} X`,
//! `dV1 = d_{a1} V` (plus the lateral pair `dX2`, `dV2` in two dimensions).
//! The lateral coordinate never moves. Two models are available:
//!
//! * `Full`: `X' = V`, `V'_i = -kappa sum_j w_j phi(X_i - X_j, a2_i - a2_j)(V_i - V_j)`.
//! * `Reduced`: `X'_i = f0_i - kappa sum_j w_j varphi(X_i - X_j, a2_i - a2_j)`.
//!
//! Deformation equations are the label derivatives of these, with the sums
//! differentiated in the target only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interact::{AlignmentSums, Cloud, EngineStats, Interaction, PairFn};
use crate::kernel::FlockingConstants;
use crate::numeric::{bisect, line_fit, tree_sum, LineFit};
use crate::scenario::{Scenario, ScenarioInfo};

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    Full,
    Reduced,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
    Rk45,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub model: Model,
    pub method: Method,
    /// RK4 step, or the first trial step of RK45. Default
    /// `min(0.01, 0.1/(kappa M0 ||phi||_inf))`.
    pub dt: Option<f64>,
    pub atol: f64,
    pub rtol: f64,
    pub t_max: f64,
    /// Stop once `A(t) <= tol_align A(0)`; zero disables the test.
    pub tol_align: f64,
    /// Base of the record schedule `0, tau, 2 tau, 4 tau, ...`. Default `0.25/b`.
    pub tau: Option<f64>,
    /// Stop when `min dX1 <= eps_stop` instead of treating it as an error.
    pub breakdown: bool,
    pub eps_stop: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            model: Model::Full,
            method: Method::Rk4,
            dt: None,
            atol: 1e-10,
            rtol: 1e-8,
            t_max: 500.0,
            tol_align: 1e-8,
            tau: None,
            breakdown: false,
            eps_stop: 1e-6,
            max_steps: 50_000_000,
        }
    }
}

/// Positions, velocities and deformation entries at one time. The lateral
/// vectors are empty in one dimension.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct FlockState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub dx1: Vec<f64>,
    pub dv1: Vec<f64>,
    pub dx2: Vec<f64>,
    pub dv2: Vec<f64>,
}

impl FlockState {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `max_i |V_i - V_j|`.
    pub fn amplitude(&self) -> f64 {
        spread(&self.v)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    /// Diameter of the particle positions `(X, a2)`.
    pub diameter: f64,
    /// `max |V_i - V_j|`.
    pub amplitude: f64,
    pub min_dx1: f64,
    /// `max_i |dV1_i + kappa (phi * m_t)(X_i) dX1_i - e0_i|`.
    pub e_residual: f64,
    /// `sum_i w_i V_i`.
    pub momentum: f64,
    /// `max_i ||grad X_i||` (spectral norm of `[[dX1, dX2], [0, 1]]`).
    pub grad_x: f64,
    /// `max_i |(dV1_i, dV2_i)|`.
    pub grad_v: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Aligned,
    TimeLimit,
    Breakdown,
}

/// First time at which `min dX1` reached the stopping threshold.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Breakdown {
    pub time: f64,
    pub particle: usize,
    pub alpha: Vec<f64>,
    pub min_dx1: f64,
    /// Crossing-time bound of the initial data, when `e0 < 0` somewhere.
    pub crossing_bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: ScenarioInfo,
    pub config: IntegratorConfig,
    pub dt: f64,
    pub tau: f64,
    pub constants: Option<FlockingConstants>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub weights: Vec<f64>,
    /// States at `0, tau, 2 tau, 4 tau, ...` and at the final time.
    pub records: Vec<FlockState>,
    /// The last (up to) three states on the `tau/4` grid, ending at the final time.
    pub tail: Vec<FlockState>,
    /// Diagnostics on the `tau/4` grid and at the final time.
    pub diagnostics: Vec<Diagnostics>,
    pub stop: StopReason,
    pub breakdown: Option<Breakdown>,
    pub steps: u64,
    pub rhs_evals: u64,
    pub engine: EngineStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &FlockState {
        self.records.last().expect("a trajectory holds at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        self.final_state().t
    }

    pub fn initial_amplitude(&self) -> f64 {
        self.diagnostics[0].amplitude
    }

    /// Least-squares fit of `ln A(t)` against `t` over the diagnostics grid;
    /// the decay rate is `-slope`. Points with `A` at round-off level are
    /// dropped.
    pub fn amplitude_fit(&self) -> Option<LineFit> {
        let floor = 1e3 * f64::EPSILON * self.diagnostics.iter().map(|d| d.amplitude).fold(0.0, f64::max);
        let (t, y): (Vec<f64>, Vec<f64>) = self
            .diagnostics
            .iter()
            .filter(|d| d.amplitude > floor)
            .map(|d| (d.t, d.amplitude.ln()))
            .unzip();
        line_fit(&t, &y)
    }
}

fn spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    hi - lo
}

/// Diameter of a planar point set through its convex hull.
fn planar_diameter(x: &[f64], y: &[f64]) -> f64 {
    let mut p: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() <= 2 {
        return match p.len() {
            2 => (p[0].0 - p[1].0).hypot(p[0].1 - p[1].1),
            _ => 0.0,
        };
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let mut d = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            d = d.max((hull[i].0 - hull[j].0).hypot(hull[i].1 - hull[j].1));
        }
    }
    d
}

/// Right-hand side of one model over a fixed scenario.
struct System {
    model: Model,
    n: usize,
    two_d: bool,
    kappa: f64,
    a2: Vec<f64>,
    w: Vec<f64>,
    e0: Vec<f64>,
    f0: Vec<f64>,
    /// `d_{a2} f0` at the particles.
    df0_2: Vec<f64>,
    engine: Interaction,
    evals: u64,
}

impl System {
    fn new(s: &Scenario, model: Model) -> Self {
        let (a1, a2) = s.alpha();
        let n = a1.len();
        let two_d = s.dim() == 2;
        let mut engine = Interaction::new(s.kernel(), s.backend());
        let w = s.measure().weights();
        let init = s.init();
        // d2 f0 = du2 + kappa sum w d2 varphi, with the sum over the initial cloud.
        let df0_2 = if two_d {
            let cloud = Cloud::new(&a1, &a2);
            let lat = engine.potentials(PairFn::PrimitiveLateral, cloud, &[&w], cloud, false);
            (0..n).map(|i| init[i].du2 + s.kappa() * lat[0].value[i]).collect()
        } else {
            Vec::new()
        };
        Self {
            model,
            n,
            two_d,
            kappa: s.kappa(),
            a2,
            e0: init.iter().map(|l| l.e0).collect(),
            f0: init.iter().map(|l| l.f0).collect(),
            w,
            df0_2,
            engine,
            evals: 0,
        }
    }

    fn blocks(&self) -> usize {
        match (self.model, self.two_d) {
            (Model::Full, false) => 4,
            (Model::Full, true) => 6,
            (Model::Reduced, false) => 2,
            (Model::Reduced, true) => 3,
        }
    }

    fn dx1_block(&self) -> usize {
        match self.model {
            Model::Full => 2,
            Model::Reduced => 1,
        }
    }

    fn initial(&self, s: &Scenario) -> Vec<f64> {
        let n = self.n;
        let (a1, _) = s.alpha();
        let init = s.init();
        let mut y = Vec::with_capacity(self.blocks() * n);
        y.extend_from_slice(&a1);
        match self.model {
            Model::Full => {
                y.extend(init.iter().map(|l| l.u0));
                y.extend(std::iter::repeat(1.0).take(n));
                y.extend(init.iter().map(|l| l.du1));
                if self.two_d {
                    y.extend(std::iter::repeat(0.0).take(n));
                    y.extend(init.iter().map(|l| l.du2));
                }
            }
            Model::Reduced => {
                y.extend(std::iter::repeat(1.0).take(n));
                if self.two_d {
                    y.extend(std::iter::repeat(0.0).take(n));
                }
            }
        }
        y
    }

    fn block<'a>(&self, y: &'a [f64], k: usize) -> &'a [f64] {
        &y[k * self.n..(k + 1) * self.n]
    }

    fn alignment(&mut self, x: &[f64], v: &[f64], grad: bool) -> AlignmentSums {
        let a2 = std::mem::take(&mut self.a2);
        let out = self.engine.alignment(Cloud::new(x, &a2), &self.w, v, grad);
        self.a2 = a2;
        out
    }

    fn potential(&mut self, f: PairFn, x: &[f64]) -> Vec<f64> {
        let a2 = std::mem::take(&mut self.a2);
        let cloud = Cloud::new(x, &a2);
        let w = std::mem::take(&mut self.w);
        let mut p = self.engine.potentials(f, cloud, &[&w], cloud, false);
        self.w = w;
        self.a2 = a2;
        std::mem::take(&mut p[0].value)
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
        self.evals += 1;
        let n = self.n;
        let k = self.kappa;
        match self.model {
            Model::Full => {
                let (x, v) = (self.block(y, 0), self.block(y, 1));
                let sums = self.alignment(x, v, true);
                let (dx1, dv1) = (self.block(y, 2), self.block(y, 3));
                let (out, rest) = dy.split_at_mut(n);
                out.copy_from_slice(v);
                let (out, rest) = rest.split_at_mut(n);
                for i in 0..n {
                    out[i] = -k * sums.force[i];
                }
                let (out, rest) = rest.split_at_mut(n);
                out.copy_from_slice(dv1);
                let (out, rest) = rest.split_at_mut(n);
                for i in 0..n {
                    out[i] = -k * (dx1[i] * sums.g1[i] + dv1[i] * sums.s[i]);
                }
                if self.two_d {
                    let (dx2, dv2) = (self.block(y, 4), self.block(y, 5));
                    let (out, rest) = rest.split_at_mut(n);
                    out.copy_from_slice(dv2);
                    for i in 0..n {
                        rest[i] = -k * (dx2[i] * sums.g1[i] + sums.g2[i] + dv2[i] * sums.s[i]);
                    }
                }
            }
            Model::Reduced => {
                let x = self.block(y, 0);
                let prim = self.potential(PairFn::Primitive, x);
                let s = self.potential(PairFn::Kernel, x);
                let dx1 = self.block(y, 1);
                for i in 0..n {
                    dy[i] = self.f0[i] - k * prim[i];
                    dy[n + i] = self.e0[i] - k * dx1[i] * s[i];
                }
                if self.two_d {
                    let lat = self.potential(PairFn::PrimitiveLateral, x);
                    let dx2 = self.block(y, 2);
                    for i in 0..n {
                        dy[2 * n + i] = self.df0_2[i] - k * (dx2[i] * s[i] + lat[i]);
                    }
                }
            }
        }
    }

    /// Full state and diagnostics at `(t, y)`.
    fn snapshot(&mut self, t: f64, y: &[f64]) -> (FlockState, Diagnostics) {
        let n = self.n;
        let mut st = FlockState {
            t,
            x: self.block(y, 0).to_vec(),
            ..Default::default()
        };
        let s;
        match self.model {
            Model::Full => {
                st.v = self.block(y, 1).to_vec();
                st.dx1 = self.block(y, 2).to_vec();
                st.dv1 = self.block(y, 3).to_vec();
                if self.two_d {
                    st.dx2 = self.block(y, 4).to_vec();
                    st.dv2 = self.block(y, 5).to_vec();
                }
                let x = st.x.clone();
                s = self.alignment(&x, &st.v, false).s;
            }
            Model::Reduced => {
                let mut dy = vec![0.0; y.len()];
                self.rhs(y, &mut dy);
                st.v = dy[..n].to_vec();
                st.dx1 = self.block(y, 1).to_vec();
                st.dv1 = dy[n..2 * n].to_vec();
                if self.two_d {
                    st.dx2 = self.block(y, 2).to_vec();
                    st.dv2 = dy[2 * n..3 * n].to_vec();
                }
                s = self.potential(PairFn::Kernel, &st.x);
            }
        }
        let mut d = Diagnostics {
            t,
            diameter: if self.two_d { planar_diameter(&st.x, &self.a2) } else { spread(&st.x) },
            amplitude: st.amplitude(),
            momentum: tree_sum(&self.w.iter().zip(&st.v).map(|(w, v)| w * v).collect::<Vec<_>>()),
            min_dx1: f64::INFINITY,
            ..Default::default()
        };
        for i in 0..n {
            d.min_dx1 = d.min_dx1.min(st.dx1[i]);
            d.e_residual = d.e_residual.max((st.dv1[i] + self.kappa * s[i] * st.dx1[i] - self.e0[i]).abs());
            let (gx, gv) = if self.two_d {
                (matrix_norm(st.dx1[i], st.dx2[i]), st.dv1[i].hypot(st.dv2[i]))
            } else {
                (st.dx1[i].abs(), st.dv1[i].abs())
            };
            d.grad_x = d.grad_x.max(gx);
            d.grad_v = d.grad_v.max(gv);
        }
        (st, d)
    }
}

/// Spectral norm of `[[a, b], [0, 1]]`.
fn matrix_norm(a: f64, b: f64) -> f64 {
    let f2 = a * a + b * b + 1.0;
    let det = a.abs();
    (0.5 * (f2 + (f2 * f2 - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper {
    method: Method,
    dt: f64,
    atol: f64,
    rtol: f64,
    h_next: f64,
    /// FSAL derivative at the current state, valid for RK45.
    k_first: Option<Vec<f64>>,
    steps: u64,
    max_steps: u64,
}

/// Result of advancing to a target time.
enum Advance {
    Reached,
    Breakdown,
}

impl Stepper {
    fn rk4(&self, sys: &mut System, y: &[f64], h: f64) -> Vec<f64> {
        let m = y.len();
        let mut k = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        let mut tmp = vec![0.0; m];
        sys.rhs(y, &mut k[0]);
        for (j, c) in [0.5, 0.5, 1.0].into_iter().enumerate() {
            for i in 0..m {
                tmp[i] = y[i] + c * h * k[j][i];
            }
            sys.rhs(&tmp, &mut k[j + 1]);
        }
        (0..m)
            .map(|i| y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
            .collect()
    }

    /// One Dormand-Prince step: new state, scaled error norm, derivative at the new state.
    fn dp45(&mut self, sys: &mut System, y: &[f64], h: f64) -> (Vec<f64>, f64, Vec<f64>) {
        let m = y.len();
        let k1 = match self.k_first.take() {
            Some(k) => k,
            None => {
                let mut k = vec![0.0; m];
                sys.rhs(y, &mut k);
                k
            }
        };
        let mut k: Vec<Vec<f64>> = vec![k1];
        let mut tmp = vec![0.0; m];
        for row in DP_A.iter() {
            for i in 0..m {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += row[j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let mut kn = vec![0.0; m];
            sys.rhs(&tmp, &mut kn);
            k.push(kn);
        }
        // The last stage is evaluated at the fifth-order solution.
        let ynew = tmp;
        let mut err = 0.0f64;
        for i in 0..m {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += DP_E[j] * kj[i];
            }
            let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        let k7 = k.pop().expect("seven stages");
        (ynew, err, k7)
    }

    fn bump(&mut self, t: f64, h: f64) -> Result<()> {
        self.steps += 1;
        if self.steps > self.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        Ok(())
    }

    /// Advances `(t, y)` to `target`. With `stop = Some(eps)`, returns early
    /// at the first time where `min dX1` reaches `eps`.
    fn advance(
        &mut self,
        sys: &mut System,
        y: &mut Vec<f64>,
        t: &mut f64,
        target: f64,
        stop: Option<f64>,
    ) -> Result<Advance> {
        let min_dx1 = |sys: &System, y: &[f64]| sys.block(y, sys.dx1_block()).iter().copied().fold(f64::INFINITY, f64::min);
        match self.method {
            Method::Rk4 => {
                let span = target - *t;
                if span <= 0.0 {
                    return Ok(Advance::Reached);
                }
                let steps = (span / self.dt - 1e-9).ceil().max(1.0) as u64;
                let h = span / steps as f64;
                let t0 = *t;
                for s in 0..steps {
                    let ynew = self.rk4(sys, y, h);
                    self.bump(*t, h)?;
                    if ynew.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { t: *t + h });
                    }
                    if let Some(eps) = stop {
                        if min_dx1(sys, &ynew) <= eps {
                            let hit = bisect(
                                |hh| {
                                    let yy = self.rk4(sys, y, hh);
                                    min_dx1(sys, &yy) - eps
                                },
                                0.0,
                                h,
                                1e-13 * h.max(1.0),
                            );
                            *y = self.rk4(sys, y, hit);
                            *t += hit;
                            return Ok(Advance::Breakdown);
                        }
                    }
                    *y = ynew;
                    *t = if s + 1 == steps { target } else { t0 + (s + 1) as f64 * h };
                }
                Ok(Advance::Reached)
            }
            Method::Rk45 => {
                while *t < target {
                    let h = self.h_next.min(target - *t);
                    if h <= 1e-14 * t.abs().max(1.0) {
                        return Err(Error::StepUnderflow { t: *t, h });
                    }
                    let (ynew, err, k7) = self.dp45(sys, y, h);
                    self.bump(*t, h)?;
                    if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                        self.h_next = 0.2 * h;
                        self.k_first = None;
                        continue;
                    }
                    if err > 1.0 {
                        self.h_next = h * (0.9 * err.powf(-0.2)).max(0.2);
                        self.k_first = None;
                        continue;
                    }
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // A step shortened to hit the target does not shrink the next one.
                    let clamped = h < self.h_next;
                    self.h_next = if clamped && grow >= 1.0 { self.h_next.max(h * grow) } else { h * grow };
                    if let Some(eps) = stop {
                        if min_dx1(sys, &ynew) <= eps {
                            let hit = bisect(
                                |hh| {
                                    let yy = self.rk4(sys, y, hh);
                                    min_dx1(sys, &yy) - eps
                                },
                                0.0,
                                h,
                                1e-13 * h.max(1.0),
                            );
                            *y = self.rk4(sys, y, hit);
                            *t += hit;
                            self.k_first = None;
                            return Ok(Advance::Breakdown);
                        }
                    }
                    *y = ynew;
                    *t = if target - (*t + h) <= 1e-14 * target.abs().max(1.0) { target } else { *t + h };
                    self.k_first = Some(k7);
                }
                Ok(Advance::Reached)
            }
        }
    }
}

fn default_dt(s: &Scenario) -> f64 {
    0.01f64.min(0.1 / (s.kappa() * s.total_mass() * s.kernel().sup_value()))
}

fn stepper(s: &Scenario, cfg: &IntegratorConfig) -> Result<Stepper> {
    let dt = cfg.dt.unwrap_or_else(|| default_dt(s));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("integrator step must be positive, got {dt}")));
    }
    Ok(Stepper {
        method: cfg.method,
        dt,
        atol: cfg.atol,
        rtol: cfg.rtol,
        h_next: dt,
        k_first: None,
        steps: 0,
        max_steps: cfg.max_steps,
    })
}

/// State at `t_end` without records; for convergence and equivalence checks.
pub fn evolve(s: &Scenario, cfg: &IntegratorConfig, t_end: f64) -> Result<FlockState> {
    let mut sys = System::new(s, cfg.model);
    let mut st = stepper(s, cfg)?;
    let mut y = sys.initial(s);
    let mut t = 0.0;
    st.advance(&mut sys, &mut y, &mut t, t_end, None)?;
    Ok(sys.snapshot(t, &y).0)
}

/// Right-hand side of the chosen model at the initial state, as
/// `(dX/dt, dV/dt)`; `dV/dt` is empty for the reduced model.
pub fn initial_rhs(s: &Scenario, model: Model) -> (Vec<f64>, Vec<f64>) {
    let mut sys = System::new(s, model);
    let y = sys.initial(s);
    let mut dy = vec![0.0; y.len()];
    sys.rhs(&y, &mut dy);
    let n = sys.n;
    match model {
        Model::Full => (dy[..n].to_vec(), dy[n..2 * n].to_vec()),
        Model::Reduced => (dy[..n].to_vec(), Vec::new()),
    }
}

/// Largest negative `dX1` still read as round-off on a collapsing zero-set
/// label rather than a crossing.
const CROSSING_TOL: f64 = 1e-8;

/// Integrates until alignment, `t_max`, or (in breakdown mode) the first
/// vanishing of `dX1`. Outside breakdown mode a negative `dX1` is an error.
pub fn integrate(s: &Scenario, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if s.dim() > 2 {
        return Err(Error::UnsupportedDimension { supported: 2, got: s.dim() });
    }
    let mut sys = System::new(s, cfg.model);
    let mut st = stepper(s, cfg)?;
    let mut y = sys.initial(s);
    let mut t = 0.0;
    let (first, d0) = sys.snapshot(0.0, &y);
    let constants = s
        .kernel()
        .flocking_constants(d0.diameter, d0.amplitude, s.kappa(), s.total_mass())
        .ok();
    let tau = match (cfg.tau, constants) {
        (Some(tau), _) => tau,
        (None, Some(c)) if c.b > 0.0 => 0.25 / c.b,
        _ => 0.25 / (s.kappa() * s.total_mass() * s.kernel().radial(d0.diameter)),
    };
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("record spacing must be positive, got {tau}")));
    }
    let (a1, a2) = s.alpha();
    let mut traj = Trajectory {
        scenario: s.info().clone(),
        config: cfg.clone(),
        dt: st.dt,
        tau,
        constants,
        alpha1: a1,
        alpha2: a2,
        weights: s.measure().weights(),
        records: vec![first.clone()],
        tail: vec![first],
        diagnostics: vec![d0],
        stop: StopReason::TimeLimit,
        breakdown: None,
        steps: 0,
        rhs_evals: 0,
        engine: EngineStats::default(),
    };
    let a0 = d0.amplitude;
    let stop = cfg.breakdown.then_some(cfg.eps_stop);
    let aligned = |d: &Diagnostics| cfg.tol_align > 0.0 && d.amplitude <= cfg.tol_align * a0;
    if aligned(&d0) {
        traj.stop = StopReason::Aligned;
    } else {
        let mut k: u64 = 0;
        let mut next_record: u64 = 4;
        loop {
            k += 1;
            let target = (k as f64 * 0.25 * tau).min(cfg.t_max);
            let outcome = st.advance(&mut sys, &mut y, &mut t, target, stop)?;
            let (state, diag) = sys.snapshot(t, &y);
            traj.diagnostics.push(diag);
            traj.tail.push(state.clone());
            if traj.tail.len() > 3 {
                traj.tail.remove(0);
            }
            if let Advance::Breakdown = outcome {
                let i = (0..state.len()).min_by(|&a, &b| state.dx1[a].total_cmp(&state.dx1[b])).unwrap_or(0);
                traj.breakdown = Some(Breakdown {
                    time: t,
                    particle: i,
                    alpha: s.pos(i)[..s.dim()].to_vec(),
                    min_dx1: state.dx1[i],
                    crossing_bound: s.crossing_bound(),
                });
                traj.stop = StopReason::Breakdown;
                traj.records.push(state);
                break;
            }
            if diag.min_dx1 < -CROSSING_TOL {
                let i = (0..state.len()).min_by(|&a, &b| state.dx1[a].total_cmp(&state.dx1[b])).unwrap_or(0);
                return Err(Error::Crossing {
                    t,
                    alpha: s.pos(i)[..s.dim()].to_vec(),
                    min_dx1: state.dx1[i],
                });
            }
            let done = aligned(&diag) || t >= cfg.t_max;
            if k == next_record || done {
                traj.records.push(state);
                if k == next_record {
                    next_record *= 2;
                }
            }
            if done {
                traj.stop = if aligned(&diag) { StopReason::Aligned } else { StopReason::TimeLimit };
                break;
            }
        }
    }
    traj.steps = st.steps;
    traj.rhs_evals = sys.evals;
    traj.engine = sys.engine.stats();
    Ok(traj)
}

#[cfg(test)]
mod tests;
