//! The limiting flow map, the limiting measure and its Lebesgue
//! decomposition, and the two-sided estimates relating both to `e0`.
//!
//! At `t = infinity` the velocities vanish, so the limit positions solve
//! `f0(a) = kappa sum_j w_j varphi(Xbar(a) - Xbar_j, a2 - a2_j)`. The right side
//! is increasing in `Xbar(a)`, which gives `Xbar` at any point once it is known
//! at the particles ([`LimitEvaluator`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::interact::{Cloud, Interaction, PairFn};
use crate::kernel::FlockingConstants;
use crate::numeric::{bisect, tree_sum_by};
use crate::scenario::{Scenario, ZeroSet};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    /// Zero-set threshold; default `1e-10 kappa M0 ||phi||_inf`.
    pub eps_z: Option<f64>,
    /// Smallest image diameter still called collapsed.
    pub collapse_floor: f64,
    /// Same-slice pairs sampled for the separation bounds.
    pub pairs: usize,
    pub seed: u64,
    /// Relative slack of the two-sided bound checks.
    pub slack: f64,
    /// Largest relative disagreement of the two tail rates.
    pub tail_agreement: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            eps_z: None,
            collapse_floor: 1e-6,
            pairs: 1000,
            seed: 0,
            slack: 1e-3,
            tail_agreement: 0.25,
        }
    }
}

/// Exponential fit `max|V|(t) ~ exp(-c (t - T))` over the last three frames.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TailFit {
    pub rate: Option<f64>,
    /// Rates from the two consecutive frame pairs.
    pub rates: Vec<f64>,
    /// The fit was rejected and `Xbar = X(T)`.
    pub fallback: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitMap {
    pub t_final: f64,
    pub xbar: Vec<f64>,
    pub dx1bar: Vec<f64>,
    pub tail: TailFit,
    /// `A(T)/b`, a bound on `|Xbar - X(T)|`.
    pub error_bound: f64,
    /// Largest recorded drift of the conserved `e`; `dX1bar` carries an
    /// error of this size times `1/(kappa S)`.
    pub e_residual: f64,
    pub constants: FlockingConstants,
}

/// Fits the tail and extrapolates `X` and `dX1` to `t = infinity`.
///
/// `Xbar = X(T) + V(T)/c` with the fitted rate `c`. For `dX1` the identity
/// `dV1 + kappa S dX1 = e0` shows that `dV1` relaxes at the local rate
/// `kappa S`, so `dX1bar = dX1(T) + dV1(T)/(kappa S(T))`.
pub fn limit_flow_map(traj: &Trajectory, s: &Scenario, cfg: &LimitConfig) -> Result<LimitMap> {
    let constants = traj.constants.ok_or(Error::NotHeavyTailed)?;
    let last = traj.final_state();
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut tail = TailFit {
        rate: None,
        rates: Vec::new(),
        fallback: true,
    };
    if traj.tail.len() == 3 {
        let m: Vec<f64> = traj.tail.iter().map(|f| sup(&f.v)).collect();
        let rates: Vec<f64> = (0..2)
            .map(|k| (m[k] / m[k + 1]).ln() / (traj.tail[k + 1].t - traj.tail[k].t))
            .collect();
        let ok = rates.iter().all(|r| r.is_finite() && *r > 0.0)
            && (rates[0] - rates[1]).abs() <= cfg.tail_agreement * rates[0].max(rates[1]);
        if ok {
            tail.rate = Some((m[0] / m[2]).ln() / (traj.tail[2].t - traj.tail[0].t));
            tail.fallback = false;
        }
        tail.rates = rates;
    }
    let amp = last.amplitude();
    let xbar: Vec<f64> = match tail.rate {
        Some(c) => last.x.iter().zip(&last.v).map(|(x, v)| x + v / c).collect(),
        None => last.x.clone(),
    };
    if amp == 0.0 {
        tail.fallback = false;
    }
    let mut engine = Interaction::new(s.kernel(), s.backend());
    let cloud = Cloud::new(&last.x, &traj.alpha2);
    let pot = engine.potentials(PairFn::Kernel, cloud, &[&traj.weights], cloud, false);
    let k = s.kappa();
    let dx1bar = (0..last.len())
        .map(|i| last.dx1[i] + last.dv1[i] / (k * pot[0].value[i]))
        .collect();
    Ok(LimitMap {
        t_final: last.t,
        xbar,
        dx1bar,
        tail,
        error_bound: if constants.b > 0.0 { amp / constants.b } else { f64::INFINITY },
        e_residual: traj.diagnostics.iter().map(|d| d.e_residual).fold(0.0, f64::max),
        constants,
    })
}

/// Evaluates the limit map away from the particles.
pub struct LimitEvaluator<'a> {
    s: &'a Scenario,
    xbar: &'a [f64],
    a2: Vec<f64>,
    w: Vec<f64>,
}

impl<'a> LimitEvaluator<'a> {
    pub fn new(s: &'a Scenario, map: &'a LimitMap) -> Self {
        Self {
            s,
            xbar: &map.xbar,
            a2: s.alpha().1,
            w: s.measure().weights(),
        }
    }

    fn lat(&self, j: usize) -> f64 {
        if self.a2.is_empty() {
            0.0
        } else {
            self.a2[j]
        }
    }

    /// `kappa sum_j w_j varphi(y - Xbar_j, a2 - a2_j)`, increasing in `y`.
    pub fn potential(&self, y: f64, a2: f64) -> f64 {
        let k = self.s.kernel();
        self.s.kappa() * tree_sum_by(self.xbar.len(), |j| self.w[j] * k.primitive_pair(y - self.xbar[j], a2 - self.lat(j)))
    }

    fn point(&self, a1: f64, a2: f64) -> Vec<f64> {
        if self.s.dim() == 2 {
            vec![a1, a2]
        } else {
            vec![a1]
        }
    }

    /// `Xbar(a1, a2)`.
    pub fn xbar_at(&self, a1: f64, a2: f64) -> f64 {
        let target = self.s.f0_at(&self.point(a1, a2));
        let (mut lo, mut hi) = self.xbar.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let mut width = (hi - lo).max(1.0);
        while self.potential(lo, a2) > target {
            lo -= width;
            width *= 2.0;
        }
        width = (hi - lo).max(1.0);
        while self.potential(hi, a2) < target {
            hi += width;
            width *= 2.0;
        }
        bisect(|y| self.potential(y, a2) - target, hi, lo, 1e-14 * (1.0 + hi.abs().max(lo.abs())))
    }

    /// Smallest `a1` in the slice with `Xbar(a1, a2) >= y` (the slice ends when
    /// `y` lies outside the image).
    pub fn preimage(&self, y: f64, a2: f64) -> f64 {
        let sup = self.s.measure().support();
        let (lo, hi) = (sup.lo[0], sup.hi[0]);
        let target = self.potential(y, a2);
        let f = |a: f64| self.s.f0_at(&self.point(a, a2)) - target;
        if f(lo) >= 0.0 {
            return lo;
        }
        if f(hi) < 0.0 {
            return hi;
        }
        bisect(f, lo, hi, 1e-14)
    }
}

/// Pass/fail record of one family of inequalities.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Candidates left out because the achieved precision cannot resolve them.
    pub skipped: usize,
    /// Largest violation in units of the allowed slack (<= 1 passes).
    pub worst: f64,
    pub passed: bool,
}

impl BoundCheck {
    pub(crate) fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            violations: 0,
            skipped: 0,
            worst: 0.0,
            passed: true,
        }
    }

    /// Records `lower <= value <= upper` with slack `tol` on each side.
    pub(crate) fn bracket(&mut self, lower: f64, value: f64, upper: f64, tol: f64) {
        self.checked += 1;
        let excess = (lower - value).max(value - upper).max(0.0);
        let score = if tol > 0.0 { excess / tol } else if excess > 0.0 { f64::INFINITY } else { 0.0 };
        self.worst = self.worst.max(score);
        if excess > tol {
            self.violations += 1;
            self.passed = false;
        }
    }
}

/// A point mass of the limit: a collapsed zero-set interval on one slice, or
/// an initial atom in the positivity set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SingularAtom {
    pub a2: f64,
    /// The zero-set interval, `None` for an initial atom in `P`.
    pub interval: Option<[f64; 2]>,
    /// Mass-weighted mean image position.
    pub position: f64,
    pub mass: f64,
    /// Image diameter of the particles in the interval.
    pub diameter: f64,
    pub particles: usize,
    /// Mass of initial atoms included in `mass`.
    pub atom_mass: f64,
    /// `int rho0` over the interval, by quadrature.
    pub rho0_integral: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AcSample {
    pub particle: usize,
    pub xbar: f64,
    pub rho_bar: f64,
    pub weight: f64,
}

/// `mbar = rhobar dx + singular part`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Decomposition {
    pub threshold: f64,
    pub collapse_tol: f64,
    pub ac: Vec<AcSample>,
    pub atoms: Vec<SingularAtom>,
    pub ac_mass: f64,
    pub singular_mass: f64,
    pub total_mass: f64,
    /// `m0(Z)` for the absolutely continuous part, by quadrature (in two
    /// dimensions: the sum of slice integrals times the slice spacing).
    pub z_rho0_mass: f64,
    /// Zero-set intervals holding no particle (narrower than the grid).
    pub empty_intervals: usize,
    /// Initial atoms lying on the boundary of a zero-set interval.
    pub boundary_atoms: usize,
}

fn slice_spacing(s: &Scenario) -> f64 {
    let sl = s.slices();
    if sl.len() < 2 {
        1.0
    } else {
        (sl[sl.len() - 1] - sl[0]) / (sl.len() - 1) as f64
    }
}

/// Pushes `m0` forward by `Xbar` and splits the result.
pub fn limit_measure(s: &Scenario, map: &LimitMap, zero: &ZeroSet, collapse_floor: f64) -> Result<Decomposition> {
    let m0 = s.measure();
    let collapse_tol = collapse_floor.max(2.0 * map.error_bound);
    let mut in_z = vec![false; m0.len()];
    let mut atoms = Vec::new();
    let mut empty_intervals = 0;
    let mut boundary_atoms = 0;
    let mut z_rho0_mass = 0.0;
    let h2 = if s.dim() == 2 { slice_spacing(s) } else { 1.0 };
    for (si, sl) in zero.slices.iter().enumerate() {
        let members = s.slice_members(sl.a2);
        for iv in &sl.z {
            let inside: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| {
                    let a = s.pos(i)[0];
                    a >= iv[0] && a <= iv[1]
                })
                .collect();
            let rho0_integral = s.slice_mass(sl.a2, iv[0], iv[1])?;
            z_rho0_mass += h2 * rho0_integral;
            if inside.is_empty() {
                empty_intervals += 1;
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut mass, mut moment, mut atom_mass) = (0.0, 0.0, 0.0);
            for &i in &inside {
                in_z[i] = true;
                let (w, x) = (m0.weight(i), map.xbar[i]);
                lo = lo.min(x);
                hi = hi.max(x);
                mass += w;
                moment += w * x;
                if m0.is_atom(i) {
                    atom_mass += w;
                    let a = s.pos(i)[0];
                    if a == iv[0] || a == iv[1] {
                        boundary_atoms += 1;
                    }
                }
            }
            if hi - lo > collapse_tol {
                return Err(Error::NotCollapsed {
                    slice: si,
                    diameter: hi - lo,
                    tolerance: collapse_tol,
                });
            }
            atoms.push(SingularAtom {
                a2: sl.a2,
                interval: Some(*iv),
                position: moment / mass,
                mass,
                diameter: hi - lo,
                particles: inside.len(),
                atom_mass,
                rho0_integral: Some(rho0_integral),
            });
        }
    }
    let mut ac = Vec::new();
    for i in 0..m0.len() {
        if in_z[i] {
            continue;
        }
        let w = m0.weight(i);
        if m0.is_atom(i) {
            atoms.push(SingularAtom {
                a2: s.pos(i)[1],
                interval: None,
                position: map.xbar[i],
                mass: w,
                diameter: 0.0,
                particles: 1,
                atom_mass: w,
                rho0_integral: None,
            });
        } else {
            let rho0 = m0.labels()[i].rho0;
            ac.push(AcSample {
                particle: i,
                xbar: map.xbar[i],
                rho_bar: rho0 / map.dx1bar[i],
                weight: w,
            });
        }
    }
    let ac_mass = crate::numeric::tree_sum(&ac.iter().map(|a| a.weight).collect::<Vec<_>>());
    let singular_mass = crate::numeric::tree_sum(&atoms.iter().map(|a| a.mass).collect::<Vec<_>>());
    Ok(Decomposition {
        threshold: zero.threshold,
        collapse_tol,
        ac,
        atoms,
        ac_mass,
        singular_mass,
        total_mass: ac_mass + singular_mass,
        z_rho0_mass,
        empty_intervals,
        boundary_atoms,
    })
}

fn e0_integral_between(s: &Scenario, a2: f64, lo: f64, hi: f64) -> f64 {
    s.e0_integral(a2, lo, hi)
}

/// `int e0/(kappa M0 ||phi||) <= Xbar(g) - Xbar(b) <= int e0/(kappa M0 phi_floor)`
/// on random same-slice particle pairs, with slack `slack * bound + 2 eb`.
pub fn check_separation_bounds(s: &Scenario, map: &LimitMap, pairs: usize, seed: u64, slack: f64) -> BoundCheck {
    let mut check = BoundCheck::new("separation");
    let km = s.kappa() * s.total_mass();
    let (top, floor) = (s.kernel().sup_value(), map.constants.kernel_floor);
    let slices: Vec<Vec<usize>> = s.slices().into_iter().map(|a2| s.slice_members(a2)).filter(|m| m.len() >= 2).collect();
    if slices.is_empty() {
        return check;
    }
    let a2s: Vec<f64> = slices.iter().map(|m| s.pos(m[0])[1]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let k = rng.gen_range(0..slices.len());
        let m = &slices[k];
        let i = rng.gen_range(0..m.len());
        let mut j = rng.gen_range(0..m.len() - 1);
        if j >= i {
            j += 1;
        }
        let (b, g) = if s.pos(m[i])[0] <= s.pos(m[j])[0] { (m[i], m[j]) } else { (m[j], m[i]) };
        let integral = e0_integral_between(s, a2s[k], s.pos(b)[0], s.pos(g)[0]);
        let (lower, upper) = (integral / (km * top), integral / (km * floor));
        let d = map.xbar[g] - map.xbar[b];
        // The bracket is one-sided per end, so slack scales with its own bound.
        check.checked += 1;
        let tol_lo = slack * lower.abs() + 2.0 * map.error_bound;
        let tol_hi = slack * upper.abs() + 2.0 * map.error_bound;
        let excess_lo = (lower - d).max(0.0) / tol_lo.max(f64::MIN_POSITIVE);
        let excess_hi = (d - upper).max(0.0) / tol_hi.max(f64::MIN_POSITIVE);
        let score = excess_lo.max(excess_hi);
        check.worst = check.worst.max(score);
        if score > 1.0 {
            check.violations += 1;
            check.passed = false;
        }
    }
    check
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ImageBounds {
    pub lower: f64,
    pub measured: f64,
    pub upper: f64,
}

/// `|Xbar(E)|` for a union of intervals `E` on slice `a2`, with the bounds
/// `(kappa M0 ||phi||)^{-1} int_E e0` and `(kappa M0 phi_floor)^{-1} int_E e0`.
pub fn measure_image_bounds(s: &Scenario, map: &LimitMap, a2: f64, set: &[[f64; 2]]) -> ImageBounds {
    let ev = LimitEvaluator::new(s, map);
    let km = s.kappa() * s.total_mass();
    let mut images: Vec<[f64; 2]> = set.iter().map(|iv| [ev.xbar_at(iv[0], a2), ev.xbar_at(iv[1], a2)]).collect();
    images.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut measured = 0.0;
    let mut cursor = f64::NEG_INFINITY;
    for im in &images {
        let lo = im[0].max(cursor);
        if im[1] > lo {
            measured += im[1] - lo;
        }
        cursor = cursor.max(im[1]);
    }
    let integral: f64 = set.iter().map(|iv| e0_integral_between(s, a2, iv[0], iv[1])).sum();
    ImageBounds {
        lower: integral / (km * s.kernel().sup_value()),
        measured,
        upper: integral / (km * map.constants.kernel_floor),
    }
}

/// `kappa M0 phi_floor rho0/e0 <= rhobar(Xbar) <= kappa M0 ||phi|| rho0/e0` on
/// the absolutely continuous particles with `e0 > eps`.
///
/// `eps` is the zero-set threshold, raised to `2 e_residual/slack` so that the
/// relative error of `dX1bar` uses at most half the slack. Labels in between
/// are counted as skipped.
pub fn check_density_bounds(s: &Scenario, map: &LimitMap, dec: &Decomposition, slack: f64) -> BoundCheck {
    let mut check = BoundCheck::new("density");
    let km = s.kappa() * s.total_mass();
    let init = s.init();
    let labels = s.measure().labels();
    let eps = dec.threshold.max(2.0 * map.e_residual / slack);
    for a in &dec.ac {
        let e0 = init[a.particle].e0;
        if e0 <= dec.threshold {
            continue;
        }
        if e0 <= eps {
            check.skipped += 1;
            continue;
        }
        let rho0 = labels[a.particle].rho0;
        let lower = km * map.constants.kernel_floor * rho0 / e0;
        let upper = km * s.kernel().sup_value() * rho0 / e0;
        check.bracket(lower, a.rho_bar, upper, slack * upper);
    }
    check
}

/// `Xbar` nondecreasing along every slice.
pub fn check_monotone(s: &Scenario, map: &LimitMap) -> BoundCheck {
    let mut check = BoundCheck::new("monotone");
    for a2 in s.slices() {
        let m = s.slice_members(a2);
        for k in 1..m.len() {
            let tol = 2.0 * map.error_bound + 1e-14;
            check.bracket(map.xbar[m[k - 1]], map.xbar[m[k]], f64::INFINITY, tol);
        }
    }
    check
}

/// `max |rho0/dX1(t) - rhobar|` over absolutely continuous particles with
/// `e0 >= eps`, at every recorded time.
pub fn density_convergence(traj: &Trajectory, s: &Scenario, dec: &Decomposition, eps: f64) -> Vec<(f64, f64)> {
    let init = s.init();
    let labels = s.measure().labels();
    traj.records
        .iter()
        .map(|r| {
            let err = dec
                .ac
                .iter()
                .filter(|a| init[a.particle].e0 >= eps)
                .map(|a| (labels[a.particle].rho0 / r.dx1[a.particle] - a.rho_bar).abs())
                .fold(0.0, f64::max);
            (r.t, err)
        })
        .collect()
}

/// One slice of an aggregation curve.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CurveSample {
    pub a2: f64,
    pub interval: [f64; 2],
    /// Collapse position `f(a2)`.
    pub position: f64,
    /// `c(a2) = int rho0` over the slice interval.
    pub weight: f64,
    /// Particle mass of the interval divided by the slice spacing.
    pub particle_weight: f64,
    pub diameter: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Curve {
    pub samples: Vec<CurveSample>,
    /// Largest jump of the finite-difference slope between neighbours.
    pub slope_jump: f64,
}

const MAX_CURVES: usize = 64;

/// Aggregation curves of a two-dimensional limit: maximal chains of zero-set
/// intervals on consecutive slices whose `a1`-ranges overlap. Each chain is
/// an `a1`-convex piece of `Z`; pieces may share intervals where `Z` branches.
pub fn aggregation_curves(s: &Scenario, dec: &Decomposition) -> Result<Vec<Curve>> {
    if s.dim() != 2 {
        return Err(Error::UnsupportedDimension { supported: 2, got: s.dim() });
    }
    let slices = s.slices();
    let h2 = slice_spacing(s);
    // Interval atoms grouped by slice index.
    let mut rows: Vec<Vec<&SingularAtom>> = vec![Vec::new(); slices.len()];
    for a in dec.atoms.iter().filter(|a| a.interval.is_some()) {
        let k = slices.partition_point(|&y| y < a.a2);
        rows[k].push(a);
    }
    for r in &mut rows {
        r.sort_by(|a, b| a.interval.unwrap()[0].total_cmp(&b.interval.unwrap()[0]));
    }
    let overlaps = |a: &SingularAtom, b: &SingularAtom| {
        let (x, y) = (a.interval.unwrap(), b.interval.unwrap());
        x[0] <= y[1] && y[0] <= x[1]
    };
    // Depth-first enumeration of maximal chains.
    let mut paths: Vec<Vec<(usize, usize)>> = Vec::new();
    for k in 0..rows.len() {
        for j in 0..rows[k].len() {
            let has_pred = k > 0 && rows[k - 1].iter().any(|p| overlaps(p, rows[k][j]));
            if has_pred {
                continue;
            }
            let mut stack = vec![vec![(k, j)]];
            while let Some(path) = stack.pop() {
                let &(pk, pj) = path.last().unwrap();
                let next: Vec<usize> = if pk + 1 < rows.len() {
                    (0..rows[pk + 1].len()).filter(|&q| overlaps(rows[pk][pj], rows[pk + 1][q])).collect()
                } else {
                    Vec::new()
                };
                if next.is_empty() {
                    paths.push(path);
                    if paths.len() > MAX_CURVES {
                        return Err(Error::Scenario(format!(
                            "more than {MAX_CURVES} aggregation curves; the zero set is too ragged"
                        )));
                    }
                    continue;
                }
                for q in next.into_iter().rev() {
                    let mut p = path.clone();
                    p.push((pk + 1, q));
                    stack.push(p);
                }
            }
        }
    }
    Ok(paths
        .into_iter()
        .map(|path| {
            let samples: Vec<CurveSample> = path
                .iter()
                .map(|&(k, j)| {
                    let a = rows[k][j];
                    CurveSample {
                        a2: a.a2,
                        interval: a.interval.unwrap(),
                        position: a.position,
                        weight: a.rho0_integral.unwrap_or(0.0),
                        particle_weight: a.mass / h2,
                        diameter: a.diameter,
                    }
                })
                .collect();
            let slopes: Vec<f64> = samples
                .windows(2)
                .map(|w| (w[1].position - w[0].position) / (w[1].a2 - w[0].a2))
                .collect();
            let slope_jump = slopes.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            Curve { samples, slope_jump }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitReport {
    pub map: LimitMap,
    pub zero_set: ZeroSet,
    pub decomposition: Decomposition,
    pub curves: Vec<Curve>,
    pub checks: Vec<BoundCheck>,
    pub density_convergence: Vec<(f64, f64)>,
}

impl LimitReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the whole limit analysis of one trajectory.
pub fn analyze(traj: &Trajectory, s: &Scenario, cfg: &LimitConfig) -> Result<LimitReport> {
    let map = limit_flow_map(traj, s, cfg)?;
    let eps = cfg.eps_z.unwrap_or_else(|| s.default_threshold());
    let zero_set = s.zero_set(eps)?;
    let decomposition = limit_measure(s, &map, &zero_set, cfg.collapse_floor)?;
    let curves = if s.dim() == 2 { aggregation_curves(s, &decomposition)? } else { Vec::new() };
    let checks = vec![
        check_separation_bounds(s, &map, cfg.pairs, cfg.seed, cfg.slack),
        check_density_bounds(s, &map, &decomposition, cfg.slack),
        check_monotone(s, &map),
    ];
    let density_convergence = density_convergence(traj, s, &decomposition, 1e-3 * s.e0_scale());
    Ok(LimitReport {
        map,
        zero_set,
        decomposition,
        curves,
        checks,
        density_convergence,
    })
}

#[cfg(test)]
mod tests;
