//! Named scenario builders.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::{Common, EntropyProfile, Field, GradField, Scenario};
use crate::error::{Error, Result};
use crate::interact::SumBackend;
use crate::kernel::{Kernel, KernelFamily};
use crate::measure::{Atom, BoxDomain, MassMeasure};
use crate::numeric::{integrate, QuadTol};

fn default_kernel() -> KernelFamily {
    KernelFamily::power_tail(1.0, 1.0)
}

fn common(name: &str, kernel: Kernel, kappa: f64, m0: MassMeasure, rho0: Field, k: u32) -> Common {
    Common {
        name: name.into(),
        kernel,
        kappa,
        m0,
        rho0,
        smoothness_k: k,
        backend: SumBackend::Auto,
        supercritical_allowed: false,
    }
}

fn ensure_subcritical(s: Scenario) -> Result<Scenario> {
    s.zero_set(s.default_threshold())?;
    Ok(s)
}

fn check_grid(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Scenario(format!("need at least 2 labels per axis, got {n}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Constant-kernel oracle and its supercritical twin.

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub n: usize,
    pub kappa: f64,
    pub mass: f64,
    /// `u0 = -amplitude sin(pi a)/pi + perturbation psi(a)`.
    pub amplitude: f64,
    pub perturbation: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            n: 256,
            kappa: 1.0,
            mass: 1.0,
            amplitude: 1.0,
            perturbation: 0.0,
        }
    }
}

/// Smooth perturbation direction; its mean is removed by the momentum shift.
pub fn oracle_psi(a: f64) -> f64 {
    (0.5 * PI * a).sin() + 0.5 * (0.5 * PI * a).cos()
}

fn oracle_psi_d(a: f64) -> f64 {
    0.5 * PI * (0.5 * PI * a).cos() - 0.25 * PI * (0.5 * PI * a).sin()
}

fn sine_data(p: &OracleParams, name: &str, allow_super: bool) -> Result<Scenario> {
    check_grid(p.n)?;
    if !(p.mass > 0.0) {
        return Err(Error::Scenario("mass must be positive".into()));
    }
    let kernel = Kernel::new(KernelFamily::constant(1.0), 1)?;
    let rho = 0.5 * p.mass;
    let rho0: Field = Arc::new(move |_| rho);
    let m0 = MassMeasure::lumped(BoxDomain::interval(-1.0, 1.0), [p.n, 1], &*rho0, vec![])?;
    let (c, eps) = (p.amplitude, p.perturbation);
    let u: Field = Arc::new(move |a| -c * (PI * a[0]).sin() / PI + eps * oracle_psi(a[0]));
    let grad: GradField = Arc::new(move |a| [-c * (PI * a[0]).cos() + eps * oracle_psi_d(a[0]), 0.0]);
    let mut cm = common(name, kernel, p.kappa, m0, rho0, 1);
    cm.supercritical_allowed = allow_super;
    let mut s = Scenario::from_explicit(cm, u, grad)?;
    let km = p.kappa * s.total_mass();
    s.info_mut().predicted.push(("alignment_rate".into(), km));
    Ok(s)
}

/// Constant kernel on `[-1, 1]` with `u0 = -c sin(pi a)/pi`, subcritical for
/// `c <= kappa M0`. The limit map is `a + u0(a)/(kappa M0)`.
pub fn oracle(p: &OracleParams) -> Result<Scenario> {
    let s = sine_data(p, "oracle", false)?;
    let mut s = ensure_subcritical(s)?;
    s.info_mut().notes.push("closed-form limit map available".into());
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BreakdownParams {
    pub n: usize,
    pub kappa: f64,
    pub mass: f64,
    pub amplitude: f64,
}

impl Default for BreakdownParams {
    fn default() -> Self {
        Self {
            n: 256,
            kappa: 1.0,
            mass: 1.0,
            amplitude: 2.0,
        }
    }
}

/// The oracle data with `c > kappa M0`: `e0 < 0` near the origin and
/// neighbouring trajectories meet in finite time.
pub fn breakdown(p: &BreakdownParams) -> Result<Scenario> {
    let q = OracleParams {
        n: p.n,
        kappa: p.kappa,
        mass: p.mass,
        amplitude: p.amplitude,
        perturbation: 0.0,
    };
    let mut s = sine_data(&q, "breakdown", true)?;
    let km = p.kappa * s.total_mass();
    if p.amplitude > km {
        // First crossing at the origin: 1 - c (1 - e^{-km t})/km = 0.
        let t = -(1.0 - km / p.amplitude).ln() / km;
        s.info_mut().predicted.push(("crossing_time".into(), t));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Cantor-type zero set.

/// `g(x) = exp(-1/(1/4 - x^2))` on `(-1/2, 1/2)`.
pub fn bump(x: f64) -> f64 {
    let q = 0.25 - x * x;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

/// `int_{-1/2}^x g`.
fn bump_cdf(x: f64) -> f64 {
    if x <= -0.5 {
        return 0.0;
    }
    let x = x.min(0.5);
    integrate(bump, -0.5, x, &[], QuadTol::new(1e-18, 1e-13)).map(|r| r.value).unwrap_or(f64::NAN)
}

/// `int g`.
pub fn bump_mass() -> f64 {
    bump_cdf(0.5)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CantorGap {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub level: u32,
}

/// The removed intervals `J_j^k` up to depth `J` and the constants of the
/// construction.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CantorGeometry {
    pub gamma: f64,
    pub beta: f64,
    pub depth: u32,
    /// Sorted by position.
    pub gaps: Vec<CantorGap>,
    pub c0: f64,
}

impl CantorGeometry {
    pub fn new(gamma: f64, beta: f64, depth: u32) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0 / 3.0) {
            return Err(Error::Scenario(format!("gamma must lie in (0, 1/3), got {gamma}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Scenario(format!("beta must lie in (0, 1), got {beta}")));
        }
        if depth == 0 || depth > 24 {
            return Err(Error::Scenario(format!("depth must lie in 1..=24, got {depth}")));
        }
        let mut intervals = vec![[0.0f64, 1.0f64]];
        let mut gaps = Vec::new();
        for j in 1..=depth {
            let len = gamma.powi(j as i32);
            let mut next = Vec::with_capacity(2 * intervals.len());
            for iv in &intervals {
                let c = 0.5 * (iv[0] + iv[1]);
                if len >= iv[1] - iv[0] {
                    return Err(Error::Scenario("gap longer than its parent interval".into()));
                }
                gaps.push(CantorGap {
                    lo: c - 0.5 * len,
                    hi: c + 0.5 * len,
                    center: c,
                    level: j,
                });
                next.push([iv[0], c - 0.5 * len]);
                next.push([c + 0.5 * len, iv[1]]);
            }
            intervals = next;
        }
        gaps.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        Ok(Self {
            gamma,
            beta,
            depth,
            gaps,
            c0: bump_mass(),
        })
    }

    /// The `2^J` closed intervals `I_J^k` of the truncated set.
    pub fn zero_intervals(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut cursor = 0.0;
        for g in &self.gaps {
            out.push([cursor, g.lo]);
            cursor = g.hi;
        }
        out.push([cursor, 1.0]);
        out
    }

    /// `|Z_J| = 1 - gamma (1 - (2 gamma)^J)/(1 - 2 gamma)`.
    pub fn zero_length(&self) -> f64 {
        let g = self.gamma;
        1.0 - g * (1.0 - (2.0 * g).powi(self.depth as i32)) / (1.0 - 2.0 * g)
    }

    /// Mass of `e0` on one level-`j` gap: `c0 (beta gamma)^j`.
    pub fn gap_mass(&self, level: u32) -> f64 {
        self.c0 * (self.beta * self.gamma).powi(level as i32)
    }

    /// `c1` in `int_{I_j^k} e0 = c1 (beta gamma)^j` for the untruncated
    /// construction: `c1 = c0 beta gamma/(1 - 2 beta gamma)`.
    pub fn c1(&self) -> f64 {
        let bg = self.beta * self.gamma;
        self.c0 * bg / (1.0 - 2.0 * bg)
    }

    /// `int_{I_j^k} e0` at depth `J`: `c1 (beta gamma)^j (1 - (2 beta gamma)^{J-j})`.
    pub fn interval_mass(&self, level: u32) -> f64 {
        let bg = self.beta * self.gamma;
        let rest = self.depth.saturating_sub(level) as i32;
        self.c1() * bg.powi(level as i32) * (1.0 - (2.0 * bg).powi(rest))
    }

    pub fn dimension(&self) -> f64 {
        cantor_dimension(self.gamma, self.beta)
    }

    /// Largest `k` with `beta <= gamma^k` (at least 1): `e0` is `C^k`.
    pub fn smoothness(&self) -> u32 {
        let k = (self.beta.ln() / self.gamma.ln() + 1e-12).floor();
        (k as u32).max(1)
    }

    fn gap_at(&self, x: f64) -> Option<&CantorGap> {
        let k = self.gaps.partition_point(|g| g.hi <= x);
        self.gaps.get(k).filter(|g| g.lo < x)
    }

    fn outside(&self, d: f64) -> f64 {
        let s = self.gamma.powi(self.depth as i32);
        self.beta.powi(self.depth as i32) * bump(0.0) * ((d / s) * (d / s)).tanh()
    }
}

/// `ln 2 / (-ln(beta gamma))`.
pub fn cantor_dimension(gamma: f64, beta: f64) -> f64 {
    2f64.ln() / -(beta * gamma).ln()
}

struct CantorProfile {
    geo: CantorGeometry,
    prefix: Vec<f64>,
}

impl CantorProfile {
    fn new(geo: CantorGeometry) -> Self {
        let mut prefix = Vec::with_capacity(geo.gaps.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for g in &geo.gaps {
            acc += geo.gap_mass(g.level);
            prefix.push(acc);
        }
        Self { geo, prefix }
    }
}

impl EntropyProfile for CantorProfile {
    fn e0(&self, a: &[f64]) -> f64 {
        let x = a[0];
        if x < 0.0 {
            return self.geo.outside(-x);
        }
        if x > 1.0 {
            return self.geo.outside(x - 1.0);
        }
        match self.geo.gap_at(x) {
            Some(g) => {
                let s = self.geo.gamma.powi(g.level as i32);
                self.geo.beta.powi(g.level as i32) * bump((x - g.center) / s)
            }
            None => 0.0,
        }
    }

    fn antiderivative(&self, a: &[f64]) -> f64 {
        let x = a[0];
        let tol = QuadTol::new(1e-18, 1e-12);
        if x < 0.0 {
            return -integrate(|s| self.geo.outside(-s), x, 0.0, &[], tol).map(|r| r.value).unwrap_or(f64::NAN);
        }
        if x > 1.0 {
            let tail = integrate(|s| self.geo.outside(s - 1.0), 1.0, x, &[], tol).map(|r| r.value);
            return self.prefix[self.prefix.len() - 1] + tail.unwrap_or(f64::NAN);
        }
        let k = self.geo.gaps.partition_point(|g| g.hi <= x);
        let mut v = self.prefix[k];
        if let Some(g) = self.geo.gaps.get(k).filter(|g| g.lo < x) {
            let s = self.geo.gamma.powi(g.level as i32);
            v += self.geo.beta.powi(g.level as i32) * s * bump_cdf((x - g.center) / s);
        }
        v
    }

    fn probes(&self, _a2: f64) -> Vec<f64> {
        self.geo.gaps.iter().map(|g| g.center).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CantorParams {
    pub gamma: f64,
    pub beta: f64,
    pub depth: u32,
    pub n: usize,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for CantorParams {
    fn default() -> Self {
        Self {
            gamma: 0.3,
            beta: 0.3,
            depth: 8,
            n: 1 << 14,
            kappa: 1.0,
            kernel: default_kernel(),
        }
    }
}

/// `e0 = sum_{j <= J} sum_k beta^j g((a - c_jk)/gamma^j)` on `[0, 1]` with
/// `rho0 == 1`; the zero set is the depth-`J` fat Cantor set.
pub fn cantor(p: &CantorParams) -> Result<Scenario> {
    check_grid(p.n)?;
    let geo = CantorGeometry::new(p.gamma, p.beta, p.depth)?;
    let kernel = Kernel::new(p.kernel.clone(), 1)?;
    let rho0: Field = Arc::new(|_| 1.0);
    let m0 = MassMeasure::lumped(BoxDomain::interval(0.0, 1.0), [p.n, 1], &*rho0, vec![])?;
    let k = geo.smoothness();
    let predicted = vec![
        ("dimension".to_string(), geo.dimension()),
        ("dimension_ceiling".to_string(), 1.0 / (k as f64 + 1.0)),
        ("c0".to_string(), geo.c0),
        ("c1".to_string(), geo.c1()),
        ("zero_length".to_string(), geo.zero_length()),
        ("truncation_factor".to_string(), (2.0 * p.beta * p.gamma).powi(p.depth as i32)),
    ];
    let profile = Arc::new(CantorProfile::new(geo));
    let s = Scenario::from_profile(common("cantor", kernel, p.kappa, m0, rho0, k), profile)?;
    let mut s = ensure_subcritical(s)?;
    s.info_mut().predicted = predicted;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Power-law zero.

struct PowerlawProfile {
    p: f64,
    delta: f64,
    lo: f64,
}

impl PowerlawProfile {
    fn e_abs(&self, s: f64) -> f64 {
        let (p, d) = (self.p, self.delta);
        if s < d {
            p * s.powf(p - 1.0)
        } else {
            p * d.powf(p - 1.0) + p * (p - 1.0) * d.powf(p - 2.0) * (s - d)
        }
    }

    fn h(&self, s: f64) -> f64 {
        let (p, d) = (self.p, self.delta);
        if s < d {
            s.powf(p)
        } else {
            let t = s - d;
            d.powf(p) + p * d.powf(p - 1.0) * t + 0.5 * p * (p - 1.0) * d.powf(p - 2.0) * t * t
        }
    }

    fn odd(&self, x: f64) -> f64 {
        x.signum() * self.h(x.abs())
    }
}

impl EntropyProfile for PowerlawProfile {
    fn e0(&self, a: &[f64]) -> f64 {
        self.e_abs(a[0].abs())
    }

    fn antiderivative(&self, a: &[f64]) -> f64 {
        self.odd(a[0]) - self.odd(self.lo)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PowerlawParams {
    pub p: f64,
    pub delta: f64,
    pub n: usize,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for PowerlawParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            delta: 0.5,
            n: 4096,
            kappa: 1.0,
            kernel: default_kernel(),
        }
    }
}

/// `rho0 == 1` on `[-1/2, 1/2]`, `e0 = p |a|^{p-1}` for `|a| < delta`,
/// continued linearly (C^1) beyond. The limit measure has local dimension
/// `1/p` at the origin.
pub fn powerlaw(p: &PowerlawParams) -> Result<Scenario> {
    check_grid(p.n)?;
    if !(p.p > 1.0) {
        return Err(Error::Scenario(format!("power must exceed 1, got {}", p.p)));
    }
    if !(p.delta > 0.0) {
        return Err(Error::Scenario(format!("delta must be positive, got {}", p.delta)));
    }
    let kernel = Kernel::new(p.kernel.clone(), 1)?;
    let rho0: Field = Arc::new(|_| 1.0);
    let m0 = MassMeasure::lumped(BoxDomain::interval(-0.5, 0.5), [p.n, 1], &*rho0, vec![])?;
    let profile = Arc::new(PowerlawProfile {
        p: p.p,
        delta: p.delta,
        lo: -0.5,
    });
    let k = (p.p - 1.0).floor().max(1.0) as u32;
    let s = Scenario::from_profile(common("powerlaw", kernel, p.kappa, m0, rho0, k), profile)?;
    let mut s = ensure_subcritical(s)?;
    s.info_mut().predicted.push(("local_dimension".into(), 1.0 / p.p));
    Ok(s)
}

// ---------------------------------------------------------------------------
// One flat zero interval.

struct PlateauProfile {
    half: f64,
    amplitude: f64,
    lo: f64,
}

impl PlateauProfile {
    fn odd(&self, x: f64) -> f64 {
        let t = (x.abs() - self.half).max(0.0);
        x.signum() * self.amplitude * t * t * t / 3.0
    }
}

impl EntropyProfile for PlateauProfile {
    fn e0(&self, a: &[f64]) -> f64 {
        let t = (a[0].abs() - self.half).max(0.0);
        self.amplitude * t * t
    }

    fn antiderivative(&self, a: &[f64]) -> f64 {
        self.odd(a[0]) - self.odd(self.lo)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PlateauParams {
    pub n: usize,
    pub half_width: f64,
    pub amplitude: f64,
    pub density: f64,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for PlateauParams {
    fn default() -> Self {
        Self {
            n: 200,
            half_width: 0.3,
            amplitude: 1.0,
            density: 0.5,
            kappa: 1.0,
            kernel: default_kernel(),
        }
    }
}

/// `rho0 == density` on `[-1, 1]`, `e0 = A (|a| - w)_+^2`: the zero set is
/// `[-w, w]`, carrying mass `2 w density`.
pub fn plateau(p: &PlateauParams) -> Result<Scenario> {
    check_grid(p.n)?;
    if !(p.half_width > 0.0 && p.half_width < 1.0 && p.amplitude > 0.0 && p.density > 0.0) {
        return Err(Error::Scenario("plateau needs 0 < half_width < 1 and positive amplitude, density".into()));
    }
    let kernel = Kernel::new(p.kernel.clone(), 1)?;
    let d = p.density;
    let rho0: Field = Arc::new(move |_| d);
    let m0 = MassMeasure::lumped(BoxDomain::interval(-1.0, 1.0), [p.n, 1], &*rho0, vec![])?;
    let profile = Arc::new(PlateauProfile {
        half: p.half_width,
        amplitude: p.amplitude,
        lo: -1.0,
    });
    let s = Scenario::from_profile(common("plateau", kernel, p.kappa, m0, rho0, 1), profile)?;
    let mut s = ensure_subcritical(s)?;
    s.info_mut().predicted.push(("zero_mass".into(), 2.0 * p.half_width * d));
    Ok(s)
}

// ---------------------------------------------------------------------------
// Generic smooth data with an empty zero set.

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GenericParams {
    pub n: usize,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for GenericParams {
    fn default() -> Self {
        Self {
            n: 64,
            kappa: 2.0,
            kernel: default_kernel(),
        }
    }
}

/// `rho0 = (1 + cos(pi a)/2)/2`, `u0 = sin(pi a)/10 + cos(2 pi a)/20` on
/// `[-1, 1]`; `e0 > 0` everywhere.
pub fn generic(p: &GenericParams) -> Result<Scenario> {
    check_grid(p.n)?;
    let kernel = Kernel::new(p.kernel.clone(), 1)?;
    let rho0: Field = Arc::new(|a| 0.5 * (1.0 + 0.5 * (PI * a[0]).cos()));
    let m0 = MassMeasure::lumped(BoxDomain::interval(-1.0, 1.0), [p.n, 1], &*rho0, vec![])?;
    let u: Field = Arc::new(|a| 0.1 * (PI * a[0]).sin() + 0.05 * (2.0 * PI * a[0]).cos());
    let grad: GradField = Arc::new(|a| [0.1 * PI * (PI * a[0]).cos() - 0.1 * PI * (2.0 * PI * a[0]).sin(), 0.0]);
    let s = Scenario::from_explicit(common("generic", kernel, p.kappa, m0, rho0, 2), u, grad)?;
    ensure_subcritical(s)
}

// ---------------------------------------------------------------------------
// Two-dimensional zero sets bounded by circles.

/// `e0 = A dist(a, Z)^2` with `Z = {inner <= |a| <= outer}`.
struct RadialZero {
    inner: f64,
    outer: f64,
    amplitude: f64,
    lo: f64,
}

/// `int sqrt(s^2 + y^2) ds`.
fn int_r(s: f64, y: f64) -> f64 {
    if y == 0.0 {
        0.5 * s * s.abs()
    } else {
        0.5 * (s * s.hypot(y) + y * y * (s / y.abs()).asinh())
    }
}

impl RadialZero {
    fn dist(&self, r: f64) -> f64 {
        (self.inner - r).max(0.0) + (r - self.outer).max(0.0)
    }

    /// Segments of the line `a2 = y` where `dist = |r - R|`, with that `R`.
    fn segments(&self, y: f64) -> Vec<(f64, f64, f64)> {
        let inf = f64::INFINITY;
        let mut v = Vec::new();
        if y.abs() >= self.outer {
            v.push((-inf, inf, self.outer));
        } else {
            let w = (self.outer * self.outer - y * y).sqrt();
            v.push((-inf, -w, self.outer));
            v.push((w, inf, self.outer));
        }
        if self.inner > 0.0 && y.abs() < self.inner {
            let w = (self.inner * self.inner - y * y).sqrt();
            v.push((-w, w, self.inner));
        }
        v
    }

    /// Antiderivative of `A (r - R)^2` in `s`.
    fn q(&self, s: f64, y: f64, big_r: f64) -> f64 {
        self.amplitude * (s * s * s / 3.0 + (y * y + big_r * big_r) * s - 2.0 * big_r * int_r(s, y))
    }

    /// Antiderivative of `d/dy [A (r - R)^2]` in `s`.
    fn q2(&self, s: f64, y: f64, big_r: f64) -> f64 {
        if y == 0.0 {
            0.0
        } else {
            2.0 * self.amplitude * y * (s - big_r * (s / y.abs()).asinh())
        }
    }

    fn integrate_with(&self, a: &[f64], f: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let (x, y) = (a[0], a[1]);
        let mut total = 0.0;
        for (s0, s1, big_r) in self.segments(y) {
            let a0 = s0.max(self.lo);
            let b0 = s1.min(x);
            if b0 > a0 {
                total += f(b0, y, big_r) - f(a0, y, big_r);
            }
        }
        total
    }
}

impl EntropyProfile for RadialZero {
    fn e0(&self, a: &[f64]) -> f64 {
        let d = self.dist(a[0].hypot(a[1]));
        self.amplitude * d * d
    }

    fn antiderivative(&self, a: &[f64]) -> f64 {
        self.integrate_with(a, |s, y, r| self.q(s, y, r))
    }

    fn antiderivative_d2(&self, a: &[f64]) -> f64 {
        self.integrate_with(a, |s, y, r| self.q2(s, y, r))
    }
}

fn radial_scenario(
    name: &str,
    n: usize,
    inner: f64,
    outer: f64,
    amplitude: f64,
    kappa: f64,
    kernel: &KernelFamily,
) -> Result<Scenario> {
    check_grid(n)?;
    if !(0.0 <= inner && inner < outer && outer < 1.0 && amplitude > 0.0) {
        return Err(Error::Scenario("need 0 <= inner < outer < 1 and positive amplitude".into()));
    }
    let kernel = Kernel::new(kernel.clone(), 2)?;
    let rho0: Field = Arc::new(|_| 1.0);
    let m0 = MassMeasure::lumped(BoxDomain::rect([-1.0, -1.0], [1.0, 1.0]), [n, n], &*rho0, vec![])?;
    let profile = Arc::new(RadialZero {
        inner,
        outer,
        amplitude,
        lo: -1.0,
    });
    let s = Scenario::from_profile(common(name, kernel, kappa, m0, rho0, 1), profile)?;
    ensure_subcritical(s)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiskParams {
    pub n: usize,
    pub radius: f64,
    pub amplitude: f64,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for DiskParams {
    fn default() -> Self {
        Self {
            n: 128,
            radius: 0.5,
            amplitude: 1.0,
            kappa: 0.5,
            kernel: default_kernel(),
        }
    }
}

/// `rho0 == 1` on `[-1, 1]^2` with a disk-shaped zero set.
pub fn disk(p: &DiskParams) -> Result<Scenario> {
    radial_scenario("disk", p.n, 0.0, p.radius, p.amplitude, p.kappa, &p.kernel)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AnnulusParams {
    pub n: usize,
    pub inner: f64,
    pub outer: f64,
    pub amplitude: f64,
    pub kappa: f64,
    pub kernel: KernelFamily,
}

impl Default for AnnulusParams {
    fn default() -> Self {
        Self {
            n: 128,
            inner: 0.3,
            outer: 0.6,
            amplitude: 1.0,
            kappa: 0.5,
            kernel: default_kernel(),
        }
    }
}

/// `rho0 == 1` on `[-1, 1]^2` with an annulus-shaped zero set, which is not
/// convex along the active direction.
pub fn annulus(p: &AnnulusParams) -> Result<Scenario> {
    radial_scenario("annulus", p.n, p.inner, p.outer, p.amplitude, p.kappa, &p.kernel)
}

// ---------------------------------------------------------------------------
// User expressions.

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CustomParams {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
    /// Expression in `x` (and `y` in 2D); `pi` is predefined.
    pub u0: String,
    pub rho0: String,
    pub kappa: f64,
    pub kernel: KernelFamily,
    pub atoms: Vec<Atom>,
    pub smoothness_k: u32,
    /// Accept data with `e0 < 0` (for breakdown runs).
    pub allow_supercritical: bool,
}

impl Default for CustomParams {
    fn default() -> Self {
        Self {
            dim: 1,
            lo: vec![-1.0],
            hi: vec![1.0],
            n: vec![256],
            u0: "0".into(),
            rho0: "0.5".into(),
            kappa: 1.0,
            kernel: default_kernel(),
            atoms: Vec::new(),
            smoothness_k: 1,
            allow_supercritical: false,
        }
    }
}

/// Explicit `u0` and `rho0` from expressions; `grad u0` by central
/// differences.
pub fn custom(p: &CustomParams) -> Result<Scenario> {
    if !(p.dim == 1 || p.dim == 2) {
        return Err(Error::UnsupportedDimension { supported: 2, got: p.dim });
    }
    if p.lo.len() != p.dim || p.hi.len() != p.dim || p.n.len() != p.dim {
        return Err(Error::Scenario("lo, hi and n need one entry per dimension".into()));
    }
    for &n in &p.n {
        check_grid(n)?;
    }
    let support = if p.dim == 1 {
        BoxDomain::interval(p.lo[0], p.hi[0])
    } else {
        BoxDomain::rect([p.lo[0], p.lo[1]], [p.hi[0], p.hi[1]])
    };
    let u = Arc::new(Expr::parse(&p.u0)?);
    let r = Arc::new(Expr::parse(&p.rho0)?);
    let rho0: Field = {
        let r = r.clone();
        Arc::new(move |a| r.eval(a))
    };
    let n = [p.n[0], if p.dim == 2 { p.n[1] } else { 1 }];
    let m0 = MassMeasure::lumped(support, n, &*rho0, p.atoms.clone())?;
    let kernel = Kernel::new(p.kernel.clone(), p.dim)?;
    let scale = support.diameter();
    let uf: Field = {
        let u = u.clone();
        Arc::new(move |a| u.eval(a))
    };
    let grad: GradField = Arc::new(move |a| {
        let h = 1e-6 * scale;
        let mut g = [0.0; 2];
        for d in 0..a.len() {
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            ap[d] += h;
            am[d] -= h;
            g[d] = (u.eval(&ap) - u.eval(&am)) / (2.0 * h);
        }
        g
    });
    let mut cm = common("custom", kernel, p.kappa, m0, rho0, p.smoothness_k);
    cm.supercritical_allowed = p.allow_supercritical;
    let s = Scenario::from_explicit(cm, uf, grad)?;
    if p.allow_supercritical {
        Ok(s)
    } else {
        ensure_subcritical(s)
    }
}
