//! Communication kernels `phi`, their partial primitives and the a-priori
//! flocking constants derived from them.
//!
//! All kernels are radial. Pair evaluations take the active offset `d1` and
//! the lateral offset `d2` (zero in one dimension); the lateral offset stands
//! for the norm of the frozen components, so the same code serves any `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, integrate, QuadTol};

/// Interpolation rule between the radial samples of a tabulated kernel.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TableOrder {
    Linear,
    #[default]
    MonotoneCubic,
}

/// Kernel family and parameters, as written in run configs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// `phi == amplitude`.
    Constant { amplitude: f64 },
    /// `phi(r) = (1 + (r/scale)^2)^(-exponent/2)`; heavy-tailed iff `exponent <= 1`.
    PowerTail { exponent: f64, scale: f64 },
    /// Radial samples starting at `r = 0`, continued past the last radius by
    /// the power law through the last two samples.
    Tabulated {
        radii: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        order: TableOrder,
        #[serde(default)]
        heavy_tail: Option<bool>,
    },
}

impl KernelFamily {
    pub fn power_tail(exponent: f64, scale: f64) -> Self {
        Self::PowerTail { exponent, scale }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self::Constant { amplitude }
    }
}

#[derive(Clone, Debug)]
struct RadialTable {
    r: Vec<f64>,
    v: Vec<f64>,
    m: Vec<f64>,
    order: TableOrder,
    tail_power: f64,
}

impl RadialTable {
    fn new(r: Vec<f64>, v: Vec<f64>, order: TableOrder) -> Self {
        let n = r.len();
        let d: Vec<f64> = (0..n - 1).map(|k| (v[k + 1] - v[k]) / (r[k + 1] - r[k])).collect();
        let mut m = vec![0.0; n];
        // A smooth radial profile is even in r, so its slope vanishes at the origin.
        m[0] = if r[0] == 0.0 { 0.0 } else { d[0] };
        m[n - 1] = d[n - 2];
        for k in 1..n - 1 {
            m[k] = if d[k - 1] * d[k] <= 0.0 {
                0.0
            } else {
                0.5 * (d[k - 1] + d[k])
            };
        }
        // Fritsch-Carlson limiter keeps each cubic piece monotone.
        for k in 0..n - 1 {
            if d[k] == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let a = m[k] / d[k];
            let b = m[k + 1] / d[k];
            if a < 0.0 {
                m[k] = 0.0;
            }
            if b < 0.0 {
                m[k + 1] = 0.0;
            }
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[k] = t * a * d[k];
                m[k + 1] = t * b * d[k];
            }
        }
        let (r1, r2, v1, v2) = (r[n - 2], r[n - 1], v[n - 2], v[n - 1]);
        let tail_power = if v2 > 0.0 && v1 > 0.0 {
            ((v1 / v2).ln() / (r2 / r1).ln()).max(0.0)
        } else {
            f64::INFINITY
        };
        Self {
            r,
            v,
            m,
            order,
            tail_power,
        }
    }

    fn last(&self) -> (f64, f64) {
        (*self.r.last().unwrap(), *self.v.last().unwrap())
    }

    fn eval(&self, x: f64) -> f64 {
        let (rl, vl) = self.last();
        if x >= rl {
            if vl == 0.0 || self.tail_power.is_infinite() {
                return 0.0;
            }
            return vl * (rl / x).powf(self.tail_power);
        }
        let k = self.r.partition_point(|&ri| ri <= x).saturating_sub(1);
        let h = self.r[k + 1] - self.r[k];
        let t = (x - self.r[k]) / h;
        match self.order {
            TableOrder::Linear => self.v[k] + t * (self.v[k + 1] - self.v[k]),
            TableOrder::MonotoneCubic => {
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * self.v[k]
                    + (t3 - 2.0 * t2 + t) * h * self.m[k]
                    + (-2.0 * t3 + 3.0 * t2) * self.v[k + 1]
                    + (t3 - t2) * h * self.m[k + 1]
            }
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        let (rl, vl) = self.last();
        if x >= rl {
            if vl == 0.0 || self.tail_power.is_infinite() {
                return 0.0;
            }
            let q = self.tail_power;
            return -q * vl * rl.powf(q) * x.powf(-q - 1.0);
        }
        let k = self.r.partition_point(|&ri| ri <= x).saturating_sub(1);
        let h = self.r[k + 1] - self.r[k];
        let t = (x - self.r[k]) / h;
        match self.order {
            TableOrder::Linear => (self.v[k + 1] - self.v[k]) / h,
            TableOrder::MonotoneCubic => {
                let t2 = t * t;
                ((6.0 * t2 - 6.0 * t) * self.v[k]
                    + (3.0 * t2 - 4.0 * t + 1.0) * h * self.m[k]
                    + (-6.0 * t2 + 6.0 * t) * self.v[k + 1]
                    + (3.0 * t2 - 2.0 * t) * h * self.m[k + 1])
                    / h
            }
        }
    }
}

/// `I_s(z) = integral_0^z (1 + u^2)^(-s/2) du`, odd in `z`.
pub fn power_integral(s: f64, z: f64) -> f64 {
    if s == 0.0 {
        z
    } else if s == 1.0 {
        z.asinh()
    } else if s == 2.0 {
        z.atan()
    } else if s == 3.0 {
        z / (1.0 + z * z).sqrt()
    } else if s == 4.0 {
        0.5 * (z.atan() + z / (1.0 + z * z))
    } else if s > 2.0 {
        // Downward recursion keeps every case on a closed form or one quadrature.
        let prev = power_integral(s - 2.0, z);
        (z * (1.0 + z * z).powf(-(s - 2.0) / 2.0) + (s - 3.0) * prev) / (s - 2.0)
    } else {
        integrate(
            |u| (1.0 + u * u).powf(-s / 2.0),
            0.0,
            z,
            &[],
            QuadTol::new(1e-16, 1e-14),
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    }
}

/// A validated communication kernel.
#[derive(Clone, Debug)]
pub struct Kernel {
    family: KernelFamily,
    dim: usize,
    sup_value: f64,
    grad_sup: f64,
    heavy_tail: bool,
    table: Option<RadialTable>,
}

/// Serializable description of a kernel for reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelSummary {
    pub family: KernelFamily,
    pub dim: usize,
    pub sup_value: f64,
    pub grad_sup: f64,
    pub heavy_tail: bool,
}

/// A-priori constants of the flocking estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlockingConstants {
    /// Diameter bound `D̄` solving `kappa M0 int_{D0}^{D̄} phi = A0`.
    pub diam_bound: f64,
    /// `phi(D̄)`, the uniform lower bound on kernel values inside the flock.
    pub kernel_floor: f64,
    /// `kappa M0 |grad phi|_inf A0`.
    pub a: f64,
    /// `kappa M0 phi(D̄)`.
    pub b: f64,
    pub d0: f64,
    pub a0: f64,
    pub kappa: f64,
    pub m0: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Kernel("dimension must be positive".into()));
        }
        let mut table = None;
        let (sup_value, grad_sup, heavy_tail) = match &family {
            KernelFamily::Constant { amplitude } => {
                if !(amplitude.is_finite() && *amplitude > 0.0) {
                    return Err(Error::Kernel(format!("constant amplitude {amplitude} must be positive")));
                }
                (*amplitude, 0.0, true)
            }
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                if !(s.is_finite() && *s > 0.0 && l.is_finite() && *l > 0.0) {
                    return Err(Error::Kernel(format!(
                        "power tail needs exponent > 0 and scale > 0, got ({s}, {l})"
                    )));
                }
                let u = 1.0 / (s + 1.0).sqrt();
                let g = s / l * u * (1.0 + u * u).powf(-s / 2.0 - 1.0);
                (1.0, g, *s <= 1.0)
            }
            KernelFamily::Tabulated {
                radii,
                values,
                order,
                heavy_tail,
            } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return Err(Error::Kernel("table needs >= 2 matching radii and values".into()));
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Kernel("radii must start at 0 and increase strictly".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                    || values.windows(2).any(|w| w[1] > w[0])
                    || values[0] <= 0.0
                {
                    return Err(Error::Kernel("values must be positive at 0, finite and nonincreasing".into()));
                }
                let t = RadialTable::new(radii.clone(), values.clone(), *order);
                let verified = t.tail_power <= 1.0;
                if let Some(declared) = heavy_tail {
                    if *declared != verified {
                        return Err(Error::Kernel(format!(
                            "declared heavy_tail = {declared} but extrapolated tail power is {}",
                            t.tail_power
                        )));
                    }
                }
                let mut g: f64 = 0.0;
                for k in 0..radii.len() - 1 {
                    for j in 0..=16 {
                        let x = radii[k] + (radii[k + 1] - radii[k]) * j as f64 / 16.0;
                        g = g.max(t.deriv(x).abs());
                    }
                }
                g = g.max(t.deriv(*radii.last().unwrap()).abs());
                let sup = values[0];
                table = Some(t);
                (sup, g, verified)
            }
        };
        let k = Self {
            family,
            dim,
            sup_value,
            grad_sup,
            heavy_tail,
            table,
        };
        k.check_monotone()?;
        Ok(k)
    }

    fn check_monotone(&self) -> Result<()> {
        let mut prev = self.radial(0.0);
        for i in 1..=400 {
            let r = 0.025 * i as f64 * (1.0 + i as f64 / 40.0);
            let v = self.radial(r);
            if !(v >= 0.0) || v > prev * (1.0 + 1e-14) {
                return Err(Error::Kernel(format!("phi not nonnegative and nonincreasing near r = {r}")));
            }
            prev = v;
        }
        Ok(())
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|phi|_inf = phi(0)`.
    pub fn sup_value(&self) -> f64 {
        self.sup_value
    }

    /// `|grad phi|_inf`.
    pub fn grad_sup(&self) -> f64 {
        self.grad_sup
    }

    pub fn is_heavy_tailed(&self) -> bool {
        self.heavy_tail
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            family: self.family.clone(),
            dim: self.dim,
            sup_value: self.sup_value,
            grad_sup: self.grad_sup,
            heavy_tail: self.heavy_tail,
        }
    }

    /// Distance from the real axis to the nearest complex singularity of the
    /// pair functions, in units of the active offset. `None` when the kernel
    /// has no analytic representation; `Some(inf)` when it is entire.
    pub fn analytic_radius(&self) -> Option<f64> {
        match &self.family {
            KernelFamily::Constant { .. } => Some(f64::INFINITY),
            KernelFamily::PowerTail { scale, .. } => Some(*scale),
            KernelFamily::Tabulated { .. } => None,
        }
    }

    /// `phi(r)` for a radius `r >= 0`.
    pub fn radial(&self, r: f64) -> f64 {
        match &self.family {
            KernelFamily::Constant { amplitude } => *amplitude,
            KernelFamily::PowerTail { exponent, scale } => {
                let u = r / scale;
                power_profile(*exponent, 1.0 + u * u)
            }
            KernelFamily::Tabulated { .. } => self.table.as_ref().unwrap().eval(r),
        }
    }

    /// `phi'(r)`.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        match &self.family {
            KernelFamily::Constant { .. } => 0.0,
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                let u = r / l;
                -s / l * u * (1.0 + u * u).powf(-s / 2.0 - 1.0)
            }
            KernelFamily::Tabulated { .. } => self.table.as_ref().unwrap().deriv(r),
        }
    }

    /// `phi(|x|)` for a point of any dimension.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.radial(r2.sqrt())
    }

    /// `phi` at offset `(d1, d2)`.
    #[inline]
    pub fn eval_pair(&self, d1: f64, d2: f64) -> f64 {
        match &self.family {
            KernelFamily::Constant { amplitude } => *amplitude,
            KernelFamily::PowerTail { exponent, scale } => {
                power_profile(*exponent, 1.0 + (d1 * d1 + d2 * d2) / (scale * scale))
            }
            KernelFamily::Tabulated { .. } => self.radial((d1 * d1 + d2 * d2).sqrt()),
        }
    }

    /// Gradient of `phi` with respect to `(d1, d2)`.
    #[inline]
    pub fn grad_pair(&self, d1: f64, d2: f64) -> (f64, f64) {
        match &self.family {
            KernelFamily::Constant { .. } => (0.0, 0.0),
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                let q = 1.0 + (d1 * d1 + d2 * d2) / (l * l);
                let c = -s / (l * l) * power_profile(*s, q) / q;
                (c * d1, c * d2)
            }
            KernelFamily::Tabulated { .. } => {
                let r = (d1 * d1 + d2 * d2).sqrt();
                if r == 0.0 {
                    return (0.0, 0.0);
                }
                let c = self.radial_deriv(r) / r;
                (c * d1, c * d2)
            }
        }
    }

    /// Signed partial primitive `int_0^{x1} phi(y, x_minus) dy`.
    pub fn primitive(&self, x1: f64, x_minus: &[f64]) -> Result<f64> {
        if x_minus.len() + 1 != self.dim {
            return Err(Error::IndexMismatch {
                expected: self.dim - 1,
                got: x_minus.len(),
            });
        }
        let d2 = x_minus.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.try_primitive_pair(x1, d2)
    }

    fn try_primitive_pair(&self, d1: f64, d2: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::Constant { amplitude } => Ok(amplitude * d1),
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                let a = (l * l + d2 * d2).sqrt();
                Ok(l.powf(*s) * a.powf(1.0 - s) * power_integral(*s, d1 / a))
            }
            KernelFamily::Tabulated { .. } => {
                let r = integrate(
                    |y| self.radial((y * y + d2 * d2).sqrt()),
                    0.0,
                    d1,
                    &self.table_breaks(d2, d1),
                    QuadTol::new(1e-300, 1e-10),
                )?;
                Ok(r.value)
            }
        }
    }

    /// Primitive at offset `(d1, d2)`; quadrature failures give NaN, which the
    /// integrator reports as a non-finite state.
    #[inline]
    pub fn primitive_pair(&self, d1: f64, d2: f64) -> f64 {
        self.try_primitive_pair(d1, d2).unwrap_or(f64::NAN)
    }

    /// `d/d(d2)` of the primitive, needed for lateral deformation entries.
    pub fn primitive_lateral_pair(&self, d1: f64, d2: f64) -> f64 {
        match &self.family {
            KernelFamily::Constant { .. } => 0.0,
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                let a = (l * l + d2 * d2).sqrt();
                -s * l.powf(*s) * d2 * a.powf(-1.0 - s) * power_integral(s + 2.0, d1 / a)
            }
            KernelFamily::Tabulated { .. } => integrate(
                |y| self.grad_pair(y, d2).1,
                0.0,
                d1,
                &self.table_breaks(d2, d1),
                QuadTol::new(1e-300, 1e-10),
            )
            .map(|r| r.value)
            .unwrap_or(f64::NAN),
        }
    }

    fn table_breaks(&self, d2: f64, d1: f64) -> Vec<f64> {
        let t = self.table.as_ref().unwrap();
        t.r.iter()
            .filter(|&&r| r > d2)
            .map(|&r| (r * r - d2 * d2).sqrt() * d1.signum())
            .collect()
    }

    /// `int_{r0}^{r1} phi(r) dr`.
    pub fn radial_integral(&self, r0: f64, r1: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::Constant { amplitude } => Ok(amplitude * (r1 - r0)),
            KernelFamily::PowerTail { exponent: s, scale: l } => {
                Ok(l * (power_integral(*s, r1 / l) - power_integral(*s, r0 / l)))
            }
            KernelFamily::Tabulated { .. } => {
                let t = self.table.as_ref().unwrap();
                let (rl, vl) = t.last();
                let inner = |a: f64, b: f64| -> Result<f64> {
                    if b <= a {
                        return Ok(0.0);
                    }
                    Ok(integrate(|r| t.eval(r), a, b, &t.r, QuadTol::new(1e-300, 1e-12))?.value)
                };
                let tail = |a: f64, b: f64| -> f64 {
                    if b <= a || vl == 0.0 || t.tail_power.is_infinite() {
                        return 0.0;
                    }
                    let q = t.tail_power;
                    if (q - 1.0).abs() < 1e-12 {
                        vl * rl * (b / a).ln()
                    } else {
                        vl * rl.powf(q) * (b.powf(1.0 - q) - a.powf(1.0 - q)) / (1.0 - q)
                    }
                };
                Ok(inner(r0, r1.min(rl))? + tail(r0.max(rl), r1))
            }
        }
    }

    /// Flocking constants for initial diameter `d0` and velocity amplitude `a0`.
    pub fn flocking_constants(&self, d0: f64, a0: f64, kappa: f64, m0: f64) -> Result<FlockingConstants> {
        if !self.heavy_tail {
            return Err(Error::NotHeavyTailed);
        }
        if !(d0 >= 0.0 && a0 >= 0.0 && kappa > 0.0 && m0 > 0.0) {
            return Err(Error::Kernel(format!(
                "flocking constants need D0, A0 >= 0 and kappa, M0 > 0 (got {d0}, {a0}, {kappa}, {m0})"
            )));
        }
        let target = a0 / (kappa * m0);
        let diam_bound = if a0 == 0.0 {
            d0
        } else {
            let mut hi = d0.max(1.0);
            while self.radial_integral(d0, hi)? < target {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::NotHeavyTailed);
                }
            }
            let mut last_err = None;
            let root = bisect(
                |r| match self.radial_integral(d0, r) {
                    Ok(v) => v - target,
                    Err(e) => {
                        last_err = Some(e);
                        0.0
                    }
                },
                d0,
                hi,
                1e-13,
            );
            if let Some(e) = last_err {
                return Err(e);
            }
            root
        };
        let kernel_floor = self.radial(diam_bound);
        Ok(FlockingConstants {
            diam_bound,
            kernel_floor,
            a: kappa * m0 * self.grad_sup * a0,
            b: kappa * m0 * kernel_floor,
            d0,
            a0,
            kappa,
            m0,
        })
    }
}

#[inline]
fn power_profile(s: f64, q: f64) -> f64 {
    if s == 1.0 {
        1.0 / q.sqrt()
    } else if s == 2.0 {
        1.0 / q
    } else {
        q.powf(-s / 2.0)
    }
}
