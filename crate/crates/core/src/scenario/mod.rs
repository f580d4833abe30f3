//! Initial data `(u0, m0, kappa, Omega)` and the quantities derived from it:
//! the entropy `e0 = d1 u0 + kappa phi*m0`, its slice antiderivative
//! `f0 = u0 + kappa varphi*m0`, and the zero set of `e0`.
//!
//! Velocity data comes in two forms. An explicit field gives `u0` and its
//! gradient. An entropy profile prescribes `e0` and its antiderivative along
//! each slice; `u0` is then recovered from `f0`, which makes `d1 f0 = e0`
//! hold exactly in the discrete model.
//!
//! Convolutions with `m0` are discrete sums over the lumped labels and atoms,
//! the same sums the dynamics uses, so `e` is conserved by the discrete flow.

mod builders;
mod expr;
mod spec;
mod zero;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use builders::{
    annulus, breakdown, cantor, cantor_dimension, custom, oracle_psi, disk, generic, oracle, plateau, powerlaw, AnnulusParams,
    BreakdownParams, CantorGeometry, CantorParams, CustomParams, DiskParams, GenericParams,
    OracleParams, PlateauParams, PowerlawParams,
};
pub use spec::ScenarioSpec;
pub use zero::{ZeroSet, ZeroSlice};

use crate::error::{Error, Result};
use crate::interact::{Cloud, Interaction, PairFn, SumBackend};
use crate::kernel::{Kernel, KernelFamily};
use crate::measure::MassMeasure;
use crate::numeric::{integrate, tree_sum, QuadTol};

pub type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradField = Arc<dyn Fn(&[f64]) -> [f64; 2] + Send + Sync>;

/// Entropy prescribed directly, with exact slice antiderivatives.
pub trait EntropyProfile: Send + Sync {
    fn e0(&self, a: &[f64]) -> f64;
    /// `int_{lo}^{a1} e0(s, a2) ds` from the left edge `lo` of the domain.
    fn antiderivative(&self, a: &[f64]) -> f64;
    /// Lateral derivative of [`EntropyProfile::antiderivative`].
    fn antiderivative_d2(&self, _a: &[f64]) -> f64 {
        0.0
    }
    /// Points on slice `a2` where `e0 > 0` is known, so narrow positive gaps
    /// between labels are never missed by the zero-set scan.
    fn probes(&self, _a2: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone)]
enum Velocity {
    Explicit { u: Field, grad: GradField },
    Profile(Arc<dyn EntropyProfile>),
}

/// Per-particle initial quantities, cached at construction.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct LabelInit {
    pub u0: f64,
    pub du1: f64,
    pub du2: f64,
    pub e0: f64,
    pub f0: f64,
}

/// Descriptive record echoed into reports.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ScenarioInfo {
    pub name: String,
    pub kappa: f64,
    pub total_mass: f64,
    pub smoothness_k: u32,
    pub momentum_shift: f64,
    pub supercritical_allowed: bool,
    /// Named analytic predictions (dimensions, bounds) of the builder.
    pub predicted: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

#[derive(Clone)]
pub struct Scenario {
    kernel: Kernel,
    kappa: f64,
    m0: MassMeasure,
    rho0: Field,
    velocity: Velocity,
    shift: f64,
    init: Vec<LabelInit>,
    info: ScenarioInfo,
    backend: SumBackend,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("info", &self.info).field("particles", &self.m0.len()).finish()
    }
}

/// Options shared by every builder.
#[derive(Clone)]
pub(crate) struct Common {
    pub name: String,
    pub kernel: Kernel,
    pub kappa: f64,
    pub m0: MassMeasure,
    pub rho0: Field,
    pub smoothness_k: u32,
    pub backend: SumBackend,
    pub supercritical_allowed: bool,
}

impl Scenario {
    pub(crate) fn from_explicit(c: Common, u: Field, grad: GradField) -> Result<Self> {
        let mut s = Self::shell(c, Velocity::Explicit { u, grad })?;
        let (sums, prims, _) = s.self_sums(false);
        let n = s.m0.len();
        let w = s.m0.weights();
        let raw: Vec<f64> = (0..n).map(|i| s.call_u(&s.pos(i))).collect();
        let mass = s.m0.total_mass();
        s.shift = -tree_sum(&w.iter().zip(&raw).map(|(a, b)| a * b).collect::<Vec<_>>()) / mass;
        let Velocity::Explicit { grad, .. } = &s.velocity else { unreachable!() };
        s.init = (0..n)
            .map(|i| {
                let g = grad(&s.pos(i)[..s.dim()]);
                let u0 = raw[i] + s.shift;
                LabelInit {
                    u0,
                    du1: g[0],
                    du2: g[1],
                    e0: g[0] + s.kappa * sums[i],
                    f0: u0 + s.kappa * prims[i],
                }
            })
            .collect();
        s.finish()
    }

    pub(crate) fn from_profile(c: Common, profile: Arc<dyn EntropyProfile>) -> Result<Self> {
        let mut s = Self::shell(c, Velocity::Profile(profile.clone()))?;
        let (sums, prims, lats) = s.self_sums(s.dim() == 2);
        let n = s.m0.len();
        let w = s.m0.weights();
        let anti: Vec<f64> = (0..n).map(|i| profile.antiderivative(&s.pos(i)[..s.dim()])).collect();
        let mass = s.m0.total_mass();
        s.shift = -tree_sum(&w.iter().zip(&anti).map(|(a, b)| a * b).collect::<Vec<_>>()) / mass;
        s.init = (0..n)
            .map(|i| {
                let p = s.pos(i);
                let e0 = profile.e0(&p[..s.dim()]);
                let f0 = anti[i] + s.shift;
                let du2 = if s.dim() == 2 {
                    profile.antiderivative_d2(&p[..2]) - s.kappa * lats[i]
                } else {
                    0.0
                };
                LabelInit {
                    u0: f0 - s.kappa * prims[i],
                    du1: e0 - s.kappa * sums[i],
                    du2,
                    e0,
                    f0,
                }
            })
            .collect();
        s.recheck_recovery()?;
        s.finish()
    }

    /// The same scenario with `u0 + eps psi` (momentum re-normalized). `psi`
    /// returns its value and gradient. Only explicit velocity data can be
    /// perturbed.
    pub fn perturbed_u0(
        &self,
        eps: f64,
        psi: impl Fn(&[f64]) -> (f64, [f64; 2]) + Send + Sync + 'static,
    ) -> Result<Self> {
        let Velocity::Explicit { u, grad } = &self.velocity else {
            return Err(Error::Scenario("entropy-prescribed data cannot be perturbed in u0".into()));
        };
        let psi = Arc::new(psi);
        let (u, grad, p2) = (u.clone(), grad.clone(), psi.clone());
        let u: Field = Arc::new(move |a| u(a) + eps * psi(a).0);
        let grad: GradField = Arc::new(move |a| {
            let (g, d) = (grad(a), p2(a).1);
            [g[0] + eps * d[0], g[1] + eps * d[1]]
        });
        let c = Common {
            name: self.info.name.clone(),
            kernel: self.kernel.clone(),
            kappa: self.kappa,
            m0: self.m0.clone(),
            rho0: self.rho0.clone(),
            smoothness_k: self.info.smoothness_k,
            backend: self.backend,
            supercritical_allowed: self.info.supercritical_allowed,
        };
        let mut s = Self::from_explicit(c, u, grad)?;
        s.info.predicted = self.info.predicted.clone();
        s.info.notes = self.info.notes.clone();
        s.info.notes.push(format!("u0 perturbed with amplitude {eps:e}"));
        Ok(s)
    }

    /// [`Scenario::perturbed_u0`] with `psi` given as an expression in `x`
    /// (and `y`); its gradient is taken by central differences.
    pub fn perturbed_u0_expr(&self, eps: f64, psi: &str) -> Result<Self> {
        let e = expr::Expr::parse(psi)?;
        let h = 1e-6 * self.m0.support().diameter();
        self.perturbed_u0(eps, move |a| {
            let mut g = [0.0; 2];
            for d in 0..a.len() {
                let (mut ap, mut am) = (a.to_vec(), a.to_vec());
                ap[d] += h;
                am[d] -= h;
                g[d] = (e.eval(&ap) - e.eval(&am)) / (2.0 * h);
            }
            (e.eval(a), g)
        })
    }

    fn shell(c: Common, velocity: Velocity) -> Result<Self> {
        if !(c.kappa > 0.0 && c.kappa.is_finite()) {
            return Err(Error::Scenario(format!("kappa must be positive, got {}", c.kappa)));
        }
        if c.kernel.dim() != c.m0.dim() {
            return Err(Error::Scenario(format!(
                "kernel dimension {} differs from measure dimension {}",
                c.kernel.dim(),
                c.m0.dim()
            )));
        }
        if c.m0.dim() > 2 {
            return Err(Error::UnsupportedDimension {
                supported: 2,
                got: c.m0.dim(),
            });
        }
        let info = ScenarioInfo {
            name: c.name,
            kappa: c.kappa,
            total_mass: c.m0.total_mass(),
            smoothness_k: c.smoothness_k,
            supercritical_allowed: c.supercritical_allowed,
            ..Default::default()
        };
        Ok(Self {
            kernel: c.kernel,
            kappa: c.kappa,
            m0: c.m0,
            rho0: c.rho0,
            velocity,
            shift: 0.0,
            init: Vec::new(),
            info,
            backend: c.backend,
        })
    }

    fn finish(mut self) -> Result<Self> {
        self.info.momentum_shift = self.shift;
        if self.init.iter().any(|l| !(l.u0.is_finite() && l.e0.is_finite() && l.f0.is_finite())) {
            return Err(Error::Scenario("initial data is not finite on every label".into()));
        }
        Ok(self)
    }

    /// `sum_j w_j phi`, `sum_j w_j varphi` and (optionally) the lateral
    /// primitive sums at every particle.
    fn self_sums(&self, lateral: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (x1, x2) = self.alpha();
        let w = self.m0.weights();
        let c = Cloud::new(&x1, &x2);
        let mut e = Interaction::new(&self.kernel, self.backend);
        let s = e.potentials(PairFn::Kernel, c, &[&w], c, false).remove(0).value;
        let p = e.potentials(PairFn::Primitive, c, &[&w], c, false).remove(0).value;
        let l = if lateral {
            e.potentials(PairFn::PrimitiveLateral, c, &[&w], c, false).remove(0).value
        } else {
            Vec::new()
        };
        (s, p, l)
    }

    /// Finite-difference re-check of a recovered `u0`: `d1 f0 = e0` and the
    /// recovered entropy `d1 u0 + kappa phi*m0` must stay nonnegative.
    fn recheck_recovery(&self) -> Result<()> {
        let n = self.m0.len();
        let stride = (n / 64).max(1);
        let scale = self.e0_scale();
        let lo = self.m0.support().lo[0];
        let hi = self.m0.support().hi[0];
        let mut worst: Option<(f64, Vec<f64>)> = None;
        for i in (0..n).step_by(stride) {
            let p = self.pos(i);
            let a = &p[..self.dim()];
            let h = 1e-5 * (hi - lo);
            if a[0] - h < lo || a[0] + h > hi {
                continue;
            }
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            ap[0] += h;
            am[0] -= h;
            let du = (self.u0_at(&ap) - self.u0_at(&am)) / (2.0 * h);
            let e = du + self.kappa * self.conv_phi(a);
            if e < -1e-6 * scale && worst.as_ref().map_or(true, |(v, _)| e < *v) {
                worst = Some((e, a.to_vec()));
            }
        }
        match worst {
            Some((violation, location)) if !self.info.supercritical_allowed => {
                Err(Error::Recovery { violation, location })
            }
            _ => Ok(()),
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn measure(&self) -> &MassMeasure {
        &self.m0
    }

    pub fn dim(&self) -> usize {
        self.m0.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.info.total_mass
    }

    pub fn info(&self) -> &ScenarioInfo {
        &self.info
    }

    pub(crate) fn info_mut(&mut self) -> &mut ScenarioInfo {
        &mut self.info
    }

    pub fn backend(&self) -> SumBackend {
        self.backend
    }

    /// Replaces the summation backend used by later computations.
    pub fn with_backend(mut self, backend: SumBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn init(&self) -> &[LabelInit] {
        &self.init
    }

    /// Initial position of particle `i` (labels first, then atoms).
    pub fn pos(&self, i: usize) -> [f64; 2] {
        self.m0.position(i)
    }

    /// Active and lateral coordinates of all particles (lateral empty in 1D).
    pub fn alpha(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.m0.len();
        let x1 = (0..n).map(|i| self.pos(i)[0]).collect();
        let x2 = if self.dim() == 2 {
            (0..n).map(|i| self.pos(i)[1]).collect()
        } else {
            Vec::new()
        };
        (x1, x2)
    }

    fn call_u(&self, p: &[f64; 2]) -> f64 {
        match &self.velocity {
            Velocity::Explicit { u, .. } => u(&p[..self.dim()]),
            Velocity::Profile(_) => unreachable!(),
        }
    }

    #[inline]
    fn lat_of(a: &[f64]) -> f64 {
        if a.len() > 1 {
            a[1]
        } else {
            0.0
        }
    }

    /// `sum_j w_j phi(a - alpha_j)` over the initial configuration.
    pub fn conv_phi(&self, a: &[f64]) -> f64 {
        let (a1, a2) = (a[0], Self::lat_of(a));
        crate::numeric::tree_sum_by(self.m0.len(), |j| {
            let p = self.pos(j);
            self.m0.weight(j) * self.kernel.eval_pair(a1 - p[0], a2 - p[1])
        })
    }

    /// `sum_j w_j varphi(a - alpha_j)` over the initial configuration.
    pub fn conv_primitive(&self, a: &[f64]) -> f64 {
        let (a1, a2) = (a[0], Self::lat_of(a));
        crate::numeric::tree_sum_by(self.m0.len(), |j| {
            let p = self.pos(j);
            self.m0.weight(j) * self.kernel.primitive_pair(a1 - p[0], a2 - p[1])
        })
    }

    /// Momentum-normalized initial velocity at any point.
    pub fn u0_at(&self, a: &[f64]) -> f64 {
        match &self.velocity {
            Velocity::Explicit { u, .. } => u(a) + self.shift,
            Velocity::Profile(p) => p.antiderivative(a) + self.shift - self.kappa * self.conv_primitive(a),
        }
    }

    pub fn e0_at(&self, a: &[f64]) -> f64 {
        match &self.velocity {
            Velocity::Explicit { grad, .. } => grad(a)[0] + self.kappa * self.conv_phi(a),
            Velocity::Profile(p) => p.e0(a),
        }
    }

    pub fn f0_at(&self, a: &[f64]) -> f64 {
        match &self.velocity {
            Velocity::Explicit { u, .. } => u(a) + self.shift + self.kappa * self.conv_primitive(a),
            Velocity::Profile(p) => p.antiderivative(a) + self.shift,
        }
    }

    /// `int_lo^hi e0(s, a2) ds`, exact through the antiderivative `f0`.
    pub fn e0_integral(&self, a2: f64, lo: f64, hi: f64) -> f64 {
        let pt = |x: f64| if self.dim() == 2 { vec![x, a2] } else { vec![x] };
        self.f0_at(&pt(hi)) - self.f0_at(&pt(lo))
    }

    /// The same integral by adaptive quadrature of `e0`.
    pub fn e0_integral_quadrature(&self, a2: f64, lo: f64, hi: f64) -> Result<f64> {
        let dim = self.dim();
        let mut breaks = self.probe_points(a2);
        breaks.retain(|&x| x > lo.min(hi) && x < lo.max(hi));
        let r = integrate(
            |x| if dim == 2 { self.e0_at(&[x, a2]) } else { self.e0_at(&[x]) },
            lo,
            hi,
            &breaks,
            QuadTol::new(1e-15, 1e-11),
        )?;
        Ok(r.value)
    }

    pub fn rho0_at(&self, a: &[f64]) -> f64 {
        let s = self.m0.support();
        let inside = (0..self.dim()).all(|d| a[d] >= s.lo[d] && a[d] <= s.hi[d]);
        if inside {
            (self.rho0)(a)
        } else {
            0.0
        }
    }

    /// `int_lo^hi rho0(s, a2) ds`.
    pub fn slice_mass(&self, a2: f64, lo: f64, hi: f64) -> Result<f64> {
        let dim = self.dim();
        let r = integrate(
            |x| if dim == 2 { self.rho0_at(&[x, a2]) } else { self.rho0_at(&[x]) },
            lo,
            hi,
            &[],
            QuadTol::new(1e-15, 1e-12),
        )?;
        Ok(r.value)
    }

    pub(crate) fn probe_points(&self, a2: f64) -> Vec<f64> {
        match &self.velocity {
            Velocity::Profile(p) => p.probes(a2),
            Velocity::Explicit { .. } => Vec::new(),
        }
    }

    /// Largest `|e0|` over the particles.
    pub fn e0_scale(&self) -> f64 {
        self.init.iter().fold(0.0f64, |m, l| m.max(l.e0.abs()))
    }

    /// Largest `|grad u0|` over the particles.
    pub fn u0_grad_sup(&self) -> f64 {
        self.init.iter().fold(0.0f64, |m, l| m.max(l.du1.hypot(l.du2)))
    }

    /// Default zero-set threshold `1e-10 kappa M0 ||phi||_inf`.
    pub fn default_threshold(&self) -> f64 {
        1e-10 * self.kappa * self.total_mass() * self.kernel.sup_value()
    }

    /// Closed-form limit map `alpha + u0(alpha)/(kappa M0 phi)` available for
    /// constant kernels.
    pub fn closed_form_limit(&self, a: &[f64]) -> Option<f64> {
        match self.kernel.family() {
            KernelFamily::Constant { amplitude } => {
                Some(a[0] + self.u0_at(a) / (self.kappa * self.total_mass() * amplitude))
            }
            _ => None,
        }
    }

    /// Momentum `sum_i w_i u0_i` after normalization.
    pub fn momentum(&self) -> f64 {
        let w = self.m0.weights();
        tree_sum(&w.iter().zip(&self.init).map(|(a, l)| a * l.u0).collect::<Vec<_>>())
    }

    /// Distinct lateral coordinates of the label grid (one `0.0` slice in 1D).
    pub fn slices(&self) -> Vec<f64> {
        if self.dim() == 1 {
            return vec![0.0];
        }
        let mut v: Vec<f64> = self.m0.labels().iter().map(|l| l.pos[1]).collect();
        v.extend(self.m0.atoms().iter().map(|a| a.pos[1]));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Particle indices on slice `a2`, sorted by active coordinate.
    pub fn slice_members(&self, a2: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.m0.len())
            .filter(|&i| self.dim() == 1 || self.pos(i)[1] == a2)
            .collect();
        idx.sort_by(|&a, &b| self.pos(a)[0].total_cmp(&self.pos(b)[0]).then(a.cmp(&b)));
        idx
    }
}
