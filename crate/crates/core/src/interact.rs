//! Pairwise interaction sums `sum_j q_j F(x_i - y_j)` over particle clouds.
//!
//! Two backends compute the same sums:
//!
//! * `Direct` loops over all pairs with compensated accumulation. Targets are
//!   split across workers, and each target's sum runs over sources in index
//!   order, so results do not depend on the worker count.
//! * `Chebyshev` replaces `F(x - y)` on the bounding box of the cloud by its
//!   tensor Chebyshev-Lobatto interpolant in both `x` and `y`. The pair
//!   functions are analytic in a strip of half-width `R` around the real axis
//!   (`R` = the kernel scale), so the interpolation error decays like
//!   `rho^-p` with `rho = R/h + sqrt(1 + (R/h)^2)` for box half-width `h`; the
//!   degree is chosen so this is below the requested tolerance. Cost is
//!   `O(N p + p^4)` instead of `O(N^2)`. Gradients are exact derivatives of
//!   the interpolant, so the discrete model stays self-consistent.
//!
//! `Auto` uses the interpolant for large clouds whenever the kernel admits one
//! and the degree stays bounded, and the direct loop otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::numeric::Compensated;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SumBackend {
    #[default]
    Auto,
    Direct,
    Chebyshev,
}

/// The pair function being summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairFn {
    /// `phi(d1, d2)`.
    Kernel,
    /// `int_0^{d1} phi(y, d2) dy`.
    Primitive,
    /// `d/d(d2)` of the primitive.
    PrimitiveLateral,
}

/// Positions of a cloud: active coordinates and lateral coordinates
/// (`x2` empty in one dimension).
#[derive(Clone, Copy, Debug)]
pub struct Cloud<'a> {
    pub x1: &'a [f64],
    pub x2: &'a [f64],
}

impl<'a> Cloud<'a> {
    pub fn new(x1: &'a [f64], x2: &'a [f64]) -> Self {
        debug_assert!(x2.is_empty() || x2.len() == x1.len());
        Self { x1, x2 }
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    #[inline]
    fn lat(&self, i: usize) -> f64 {
        if self.x2.is_empty() {
            0.0
        } else {
            self.x2[i]
        }
    }
}

/// Values and (optionally) target gradients of one potential.
#[derive(Clone, Debug, Default)]
pub struct Potential {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// Sums entering the alignment force and its derivatives:
/// `s = sum w phi`, `force = sum w phi (v_i - v_j)`,
/// `g1 = sum w d1phi (v_i - v_j)`, `g2 = sum w d2phi (v_i - v_j)`.
#[derive(Clone, Debug, Default)]
pub struct AlignmentSums {
    pub s: Vec<f64>,
    pub force: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
}

/// Counters describing how sums were evaluated.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct EngineStats {
    pub direct_calls: u64,
    pub chebyshev_calls: u64,
    pub grid_rebuilds: u64,
    pub max_nodes: usize,
}

const AUTO_PAIRS: usize = 256 * 256;
const MAX_DEGREE: usize = 64;
const MAX_NODES: usize = 2500;
const TARGET_CHUNK: usize = 512;
const SOURCE_CHUNK: usize = 4096;

#[derive(Clone, Debug)]
struct Grid {
    lo: [f64; 2],
    hi: [f64; 2],
    p: [usize; 2],
    nodes: [Vec<f64>; 2],
    // C[k][m] = (2/N) w_k w_m T_m(xi_k), row-major p x p, one per axis.
    coef: [Vec<f64>; 2],
}

impl Grid {
    fn center(&self, d: usize) -> f64 {
        0.5 * (self.lo[d] + self.hi[d])
    }

    fn half(&self, d: usize) -> f64 {
        0.5 * (self.hi[d] - self.lo[d])
    }

    #[inline]
    fn map(&self, d: usize, x: f64) -> f64 {
        let h = self.half(d);
        if h == 0.0 {
            0.0
        } else {
            ((x - self.center(d)) / h).clamp(-1.0, 1.0)
        }
    }
}

fn lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    if p == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let n = (p - 1) as f64;
    let xi: Vec<f64> = (0..p).map(|k| (std::f64::consts::PI * k as f64 / n).cos()).collect();
    let w = |k: usize| if k == 0 || k == p - 1 { 0.5 } else { 1.0 };
    let mut c = vec![0.0; p * p];
    for k in 0..p {
        let mut t = vec![0.0; p];
        cheb_t(xi[k], &mut t);
        for m in 0..p {
            c[k * p + m] = 2.0 / n * w(k) * w(m) * t[m];
        }
    }
    (xi, c)
}

#[inline]
fn cheb_t(x: f64, t: &mut [f64]) {
    let p = t.len();
    t[0] = 1.0;
    if p > 1 {
        t[1] = x;
    }
    for m in 2..p {
        t[m] = 2.0 * x * t[m - 1] - t[m - 2];
    }
}

/// `T_m(x)` and `T_m'(x)` via the second-kind recurrence `T_m' = m U_{m-1}`.
#[inline]
fn cheb_td(x: f64, t: &mut [f64], dt: &mut [f64]) {
    let p = t.len();
    cheb_t(x, t);
    dt[0] = 0.0;
    if p > 1 {
        let (mut u_prev, mut u) = (1.0, 2.0 * x);
        dt[1] = 1.0;
        for m in 2..p {
            dt[m] = m as f64 * u;
            let nu = 2.0 * x * u - u_prev;
            u_prev = u;
            u = nu;
        }
    }
}

/// Evaluator of interaction sums for one kernel.
#[derive(Clone, Debug)]
pub struct Interaction {
    kernel: Kernel,
    backend: SumBackend,
    tol: f64,
    grid: Option<Grid>,
    matrices: Vec<(PairFn, Vec<f64>)>,
    stats: EngineStats,
}

impl Interaction {
    pub fn new(kernel: &Kernel, backend: SumBackend) -> Self {
        Self {
            kernel: kernel.clone(),
            backend,
            tol: 1e-15,
            grid: None,
            matrices: Vec::new(),
            stats: EngineStats::default(),
        }
    }

    /// Relative accuracy target of the interpolating backend.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn backend(&self) -> SumBackend {
        self.backend
    }

    #[inline]
    fn pair(&self, f: PairFn, d1: f64, d2: f64) -> f64 {
        match f {
            PairFn::Kernel => self.kernel.eval_pair(d1, d2),
            PairFn::Primitive => self.kernel.primitive_pair(d1, d2),
            PairFn::PrimitiveLateral => self.kernel.primitive_lateral_pair(d1, d2),
        }
    }

    fn wants_interpolation(&self, pairs: usize) -> bool {
        match self.backend {
            SumBackend::Direct => false,
            SumBackend::Chebyshev => self.kernel.analytic_radius().is_some(),
            SumBackend::Auto => pairs >= AUTO_PAIRS && self.kernel.analytic_radius().is_some(),
        }
    }

    /// `sum_j q_j F(x_i - y_j)` for each charge vector `q`; with `grad`, also
    /// the derivatives with respect to the target position. Gradients are only
    /// available for [`PairFn::Kernel`].
    pub fn potentials(
        &mut self,
        f: PairFn,
        src: Cloud<'_>,
        charges: &[&[f64]],
        tgt: Cloud<'_>,
        grad: bool,
    ) -> Vec<Potential> {
        assert!(!grad || f == PairFn::Kernel, "gradients are provided for the kernel only");
        for q in charges {
            assert_eq!(q.len(), src.len());
        }
        if self.wants_interpolation(src.len() * tgt.len()) {
            if let Some(p) = self.cheb_potentials(f, src, charges, tgt, grad) {
                self.stats.chebyshev_calls += 1;
                return p;
            }
        }
        self.stats.direct_calls += 1;
        self.direct_potentials(f, src, charges, tgt, grad)
    }

    /// Alignment sums for particles at `cloud` with weights `w` and
    /// velocities `v`. `grad` adds the `g1`/`g2` deformation sums.
    pub fn alignment(&mut self, cloud: Cloud<'_>, w: &[f64], v: &[f64], grad: bool) -> AlignmentSums {
        let n = cloud.len();
        if self.wants_interpolation(n * n) {
            let wv: Vec<f64> = w.iter().zip(v).map(|(a, b)| a * b).collect();
            if let Some(p) = self.cheb_potentials(PairFn::Kernel, cloud, &[w, &wv], cloud, grad) {
                self.stats.chebyshev_calls += 1;
                let (pw, pv) = (&p[0], &p[1]);
                let mut out = AlignmentSums {
                    s: pw.value.clone(),
                    force: (0..n).map(|i| v[i] * pw.value[i] - pv.value[i]).collect(),
                    ..Default::default()
                };
                if grad {
                    out.g1 = (0..n).map(|i| v[i] * pw.d1[i] - pv.d1[i]).collect();
                    out.g2 = if cloud.x2.is_empty() {
                        vec![0.0; n]
                    } else {
                        (0..n).map(|i| v[i] * pw.d2[i] - pv.d2[i]).collect()
                    };
                }
                return out;
            }
        }
        self.stats.direct_calls += 1;
        let k = &self.kernel;
        let rows: Vec<[f64; 4]> = (0..n)
            .into_par_iter()
            .with_min_len(TARGET_CHUNK)
            .map(|i| {
                let (xi, yi, vi) = (cloud.x1[i], cloud.lat(i), v[i]);
                let mut s = Compensated::new();
                let mut fo = Compensated::new();
                let mut g1 = Compensated::new();
                let mut g2 = Compensated::new();
                for j in 0..n {
                    let (d1, d2) = (xi - cloud.x1[j], yi - cloud.lat(j));
                    let phi = k.eval_pair(d1, d2);
                    let dv = vi - v[j];
                    s.add(w[j] * phi);
                    fo.add(w[j] * phi * dv);
                    if grad {
                        let (a, b) = k.grad_pair(d1, d2);
                        g1.add(w[j] * a * dv);
                        g2.add(w[j] * b * dv);
                    }
                }
                [s.value(), fo.value(), g1.value(), g2.value()]
            })
            .collect();
        let mut out = AlignmentSums {
            s: rows.iter().map(|r| r[0]).collect(),
            force: rows.iter().map(|r| r[1]).collect(),
            ..Default::default()
        };
        if grad {
            out.g1 = rows.iter().map(|r| r[2]).collect();
            out.g2 = rows.iter().map(|r| r[3]).collect();
        }
        out
    }

    fn direct_potentials(
        &self,
        f: PairFn,
        src: Cloud<'_>,
        charges: &[&[f64]],
        tgt: Cloud<'_>,
        grad: bool,
    ) -> Vec<Potential> {
        let nc = charges.len();
        let k = &self.kernel;
        let rows: Vec<Vec<f64>> = (0..tgt.len())
            .into_par_iter()
            .with_min_len(TARGET_CHUNK)
            .map(|i| {
                let (xi, yi) = (tgt.x1[i], tgt.lat(i));
                let mut acc = vec![Compensated::new(); nc * 3];
                for j in 0..src.len() {
                    let (d1, d2) = (xi - src.x1[j], yi - src.lat(j));
                    let val = self.pair(f, d1, d2);
                    let g = if grad { k.grad_pair(d1, d2) } else { (0.0, 0.0) };
                    for (c, q) in charges.iter().enumerate() {
                        acc[3 * c].add(q[j] * val);
                        if grad {
                            acc[3 * c + 1].add(q[j] * g.0);
                            acc[3 * c + 2].add(q[j] * g.1);
                        }
                    }
                }
                acc.iter().map(|a| a.value()).collect()
            })
            .collect();
        (0..nc)
            .map(|c| Potential {
                value: rows.iter().map(|r| r[3 * c]).collect(),
                d1: if grad { rows.iter().map(|r| r[3 * c + 1]).collect() } else { vec![] },
                d2: if grad { rows.iter().map(|r| r[3 * c + 2]).collect() } else { vec![] },
            })
            .collect()
    }

    fn degree(&self, half: f64) -> usize {
        if half == 0.0 {
            return 1;
        }
        let r = self.kernel.analytic_radius().unwrap_or(0.0);
        if r.is_infinite() {
            return 2;
        }
        let b = r / half;
        let rho = b + (1.0 + b * b).sqrt();
        ((1.0 / self.tol).ln() / rho.ln()).ceil() as usize + 3
    }

    /// Makes sure the cached grid covers both clouds without being much
    /// larger than them. Returns false when no admissible grid exists.
    fn ensure_grid(&mut self, src: Cloud<'_>, tgt: Cloud<'_>) -> bool {
        let mut mn = [f64::INFINITY; 2];
        let mut mx = [f64::NEG_INFINITY; 2];
        for c in [src, tgt] {
            for &x in c.x1 {
                mn[0] = mn[0].min(x);
                mx[0] = mx[0].max(x);
            }
            if c.x2.is_empty() {
                mn[1] = mn[1].min(0.0);
                mx[1] = mx[1].max(0.0);
            } else {
                for &x in c.x2 {
                    mn[1] = mn[1].min(x);
                    mx[1] = mx[1].max(x);
                }
            }
        }
        if !(mn[0].is_finite() && mx[0].is_finite() && mn[1].is_finite() && mx[1].is_finite()) {
            return false;
        }
        if let Some(g) = &self.grid {
            let fits = (0..2).all(|d| {
                let w = mx[d] - mn[d];
                let gw = g.hi[d] - g.lo[d];
                g.lo[d] <= mn[d] && mx[d] <= g.hi[d] && (if w == 0.0 { gw == 0.0 } else { gw <= 2.0 * w })
            });
            if fits {
                return true;
            }
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut p = [1usize; 2];
        for d in 0..2 {
            let c = 0.5 * (mn[d] + mx[d]);
            let h = 0.5 * (mx[d] - mn[d]) * 1.05;
            lo[d] = c - h;
            hi[d] = c + h;
            if h > 0.0 {
                // Guard against the expanded box failing to contain the extremes.
                lo[d] = lo[d].min(mn[d]);
                hi[d] = hi[d].max(mx[d]);
            } else {
                lo[d] = mn[d];
                hi[d] = mx[d];
            }
            p[d] = self.degree(0.5 * (hi[d] - lo[d]));
        }
        if p[0] > MAX_DEGREE || p[1] > MAX_DEGREE || p[0] * p[1] > MAX_NODES {
            self.grid = None;
            self.matrices.clear();
            return false;
        }
        let (n0, c0) = lobatto(p[0]);
        let (n1, c1) = lobatto(p[1]);
        let map = |d: usize, xi: &[f64]| -> Vec<f64> {
            let (cc, hh) = (0.5 * (lo[d] + hi[d]), 0.5 * (hi[d] - lo[d]));
            xi.iter().map(|x| cc + hh * x).collect()
        };
        self.grid = Some(Grid {
            lo,
            hi,
            p,
            nodes: [map(0, &n0), map(1, &n1)],
            coef: [c0, c1],
        });
        self.matrices.clear();
        self.stats.grid_rebuilds += 1;
        self.stats.max_nodes = self.stats.max_nodes.max(p[0] * p[1]);
        true
    }

    fn matrix(&mut self, f: PairFn) -> usize {
        if let Some(i) = self.matrices.iter().position(|(g, _)| *g == f) {
            return i;
        }
        let g = self.grid.as_ref().unwrap();
        let (p1, p2) = (g.p[0], g.p[1]);
        let nn = p1 * p2;
        let mut k = vec![0.0; nn * nn];
        k.par_chunks_mut(nn).enumerate().for_each(|(a, row)| {
            let (a1, a2) = (a / p2, a % p2);
            for b in 0..nn {
                let (b1, b2) = (b / p2, b % p2);
                row[b] = self.pair(f, g.nodes[0][a1] - g.nodes[0][b1], g.nodes[1][a2] - g.nodes[1][b2]);
            }
        });
        self.matrices.push((f, k));
        self.matrices.len() - 1
    }

    fn cheb_potentials(
        &mut self,
        f: PairFn,
        src: Cloud<'_>,
        charges: &[&[f64]],
        tgt: Cloud<'_>,
        grad: bool,
    ) -> Option<Vec<Potential>> {
        if !self.ensure_grid(src, tgt) {
            return None;
        }
        let mi = self.matrix(f);
        let g = self.grid.as_ref().unwrap();
        let kmat = &self.matrices[mi].1;
        let (p1, p2) = (g.p[0], g.p[1]);
        let nn = p1 * p2;
        let nc = charges.len();

        // Chebyshev moments M[c][n1][n2] = sum_j q_j T_n1(y1_j) T_n2(y2_j),
        // accumulated per fixed source chunk and per run of equal lateral
        // coordinate, then combined in chunk order.
        let ns = src.len();
        let chunks: Vec<Vec<f64>> = (0..ns.div_ceil(SOURCE_CHUNK))
            .into_par_iter()
            .map(|ch| {
                let start = ch * SOURCE_CHUNK;
                let end = (start + SOURCE_CHUNK).min(ns);
                let mut mom = vec![0.0; nc * nn];
                let mut t1 = vec![0.0; p1];
                let mut t2 = vec![0.0; p2];
                let mut run = vec![0.0; nc * p1];
                let mut j = start;
                while j < end {
                    let lat = src.lat(j);
                    let mut r = j;
                    run.iter_mut().for_each(|x| *x = 0.0);
                    while r < end && src.lat(r) == lat {
                        cheb_t(g.map(0, src.x1[r]), &mut t1);
                        for (c, q) in charges.iter().enumerate() {
                            let qr = q[r];
                            let dst = &mut run[c * p1..(c + 1) * p1];
                            for m in 0..p1 {
                                dst[m] += qr * t1[m];
                            }
                        }
                        r += 1;
                    }
                    cheb_t(g.map(1, lat), &mut t2);
                    for c in 0..nc {
                        for n1 in 0..p1 {
                            let v = run[c * p1 + n1];
                            let dst = &mut mom[c * nn + n1 * p2..c * nn + (n1 + 1) * p2];
                            for n2 in 0..p2 {
                                dst[n2] += v * t2[n2];
                            }
                        }
                    }
                    j = r;
                }
                mom
            })
            .collect();
        let mut mom = vec![0.0; nc * nn];
        for part in &chunks {
            for (a, b) in mom.iter_mut().zip(part) {
                *a += b;
            }
        }

        let (c1, c2) = (&g.coef[0], &g.coef[1]);
        // Node charges Q = C1 M C2^T, node potentials Phi = K Q,
        // coefficients A = C1^T Phi C2.
        let mut coeffs = vec![0.0; nc * nn];
        for c in 0..nc {
            let m = &mom[c * nn..(c + 1) * nn];
            let q = sandwich(c1, c2, m, p1, p2, false);
            let phi: Vec<f64> = (0..nn)
                .into_par_iter()
                .map(|a| {
                    let row = &kmat[a * nn..(a + 1) * nn];
                    row.iter().zip(&q).map(|(x, y)| x * y).sum()
                })
                .collect();
            let a = sandwich(c1, c2, &phi, p1, p2, true);
            coeffs[c * nn..(c + 1) * nn].copy_from_slice(&a);
        }

        // Evaluate the expansions at the targets, reusing lateral sums per run.
        let nt = tgt.len();
        let (h1, h2) = (g.half(0), g.half(1));
        let inv1 = if h1 > 0.0 { 1.0 / h1 } else { 0.0 };
        let inv2 = if h2 > 0.0 { 1.0 / h2 } else { 0.0 };
        let blocks: Vec<Vec<f64>> = (0..nt.div_ceil(SOURCE_CHUNK))
            .into_par_iter()
            .map(|ch| {
                let start = ch * SOURCE_CHUNK;
                let end = (start + SOURCE_CHUNK).min(nt);
                let mut out = vec![0.0; (end - start) * nc * 3];
                let (mut t1, mut d1) = (vec![0.0; p1], vec![0.0; p1]);
                let (mut t2, mut d2) = (vec![0.0; p2], vec![0.0; p2]);
                let mut e = vec![0.0; nc * p1];
                let mut e2 = vec![0.0; nc * p1];
                let mut i = start;
                while i < end {
                    let lat = tgt.lat(i);
                    cheb_td(g.map(1, lat), &mut t2, &mut d2);
                    for c in 0..nc {
                        let a = &coeffs[c * nn..(c + 1) * nn];
                        for m1 in 0..p1 {
                            let row = &a[m1 * p2..(m1 + 1) * p2];
                            let mut s = 0.0;
                            let mut s2 = 0.0;
                            for m2 in 0..p2 {
                                s += row[m2] * t2[m2];
                                s2 += row[m2] * d2[m2];
                            }
                            e[c * p1 + m1] = s;
                            e2[c * p1 + m1] = s2;
                        }
                    }
                    while i < end && tgt.lat(i) == lat {
                        cheb_td(g.map(0, tgt.x1[i]), &mut t1, &mut d1);
                        let o = (i - start) * nc * 3;
                        for c in 0..nc {
                            let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                            for m1 in 0..p1 {
                                v += e[c * p1 + m1] * t1[m1];
                                if grad {
                                    gx += e[c * p1 + m1] * d1[m1];
                                    gy += e2[c * p1 + m1] * t1[m1];
                                }
                            }
                            out[o + 3 * c] = v;
                            out[o + 3 * c + 1] = gx * inv1;
                            out[o + 3 * c + 2] = gy * inv2;
                        }
                        i += 1;
                    }
                }
                out
            })
            .collect();
        let mut res: Vec<Potential> = (0..nc)
            .map(|_| Potential {
                value: Vec::with_capacity(nt),
                d1: if grad { Vec::with_capacity(nt) } else { vec![] },
                d2: if grad { Vec::with_capacity(nt) } else { vec![] },
            })
            .collect();
        for b in &blocks {
            for row in b.chunks(nc * 3) {
                for c in 0..nc {
                    res[c].value.push(row[3 * c]);
                    if grad {
                        res[c].d1.push(row[3 * c + 1]);
                        res[c].d2.push(row[3 * c + 2]);
                    }
                }
            }
        }
        Some(res)
    }
}

/// `C1 X C2^T` (or `C1^T X C2` with `transpose`) for a `p1 x p2` matrix `X`.
fn sandwich(c1: &[f64], c2: &[f64], x: &[f64], p1: usize, p2: usize, transpose: bool) -> Vec<f64> {
    let at = |c: &[f64], p: usize, i: usize, j: usize| if transpose { c[j * p + i] } else { c[i * p + j] };
    let mut tmp = vec![0.0; p1 * p2];
    for i in 0..p1 {
        for k in 0..p1 {
            let f = at(c1, p1, i, k);
            if f == 0.0 {
                continue;
            }
            for j in 0..p2 {
                tmp[i * p2 + j] += f * x[k * p2 + j];
            }
        }
    }
    let mut out = vec![0.0; p1 * p2];
    for i in 0..p1 {
        for j in 0..p2 {
            let mut s = 0.0;
            for k in 0..p2 {
                s += tmp[i * p2 + k] * at(c2, p2, j, k);
            }
            out[i * p2 + j] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, rows: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for r in 0..rows {
            for _ in 0..n {
                x1.push(rng.gen_range(-0.6..0.9));
                if rows > 1 {
                    x2.push(-0.5 + r as f64 / rows as f64);
                }
            }
        }
        let w: Vec<f64> = (0..x1.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
        let v: Vec<f64> = (0..x1.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (x1, x2, w, v)
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn interpolated_sums_match_direct_in_1d_and_2d() {
        let k1 = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 1).unwrap();
        let k2 = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 2).unwrap();
        for (k, rows) in [(&k1, 1usize), (&k2, 7usize)] {
            let (x1, x2, w, v) = cloud(300, rows, 3);
            let c = Cloud::new(&x1, &x2);
            let mut d = Interaction::new(k, SumBackend::Direct);
            let mut f = Interaction::new(k, SumBackend::Chebyshev);
            let a = d.alignment(c, &w, &v, true);
            let b = f.alignment(c, &w, &v, true);
            assert_eq!(f.stats().chebyshev_calls, 1);
            assert!(max_rel(&b.s, &a.s) < 1e-13);
            assert!(max_rel(&b.force, &a.force) < 1e-12);
            assert!(max_rel(&b.g1, &a.g1) < 1e-12);
            if rows > 1 {
                assert!(max_rel(&b.g2, &a.g2) < 1e-12);
            }
            for pf in [PairFn::Primitive, PairFn::PrimitiveLateral] {
                let pa = d.potentials(pf, c, &[&w], c, false);
                let pb = f.potentials(pf, c, &[&w], c, false);
                assert!(max_rel(&pb[0].value, &pa[0].value) < 1e-12, "{pf:?}");
            }
        }
    }

    #[test]
    fn constant_kernel_is_exact_at_low_degree() {
        let k = Kernel::new(KernelFamily::constant(2.0), 1).unwrap();
        let (x1, _, w, v) = cloud(500, 1, 5);
        let c = Cloud::new(&x1, &[]);
        let mut f = Interaction::new(&k, SumBackend::Chebyshev);
        let a = f.alignment(c, &w, &v, true);
        let m: f64 = w.iter().sum();
        let p: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        for i in 0..x1.len() {
            assert!((a.s[i] - 2.0 * m).abs() < 1e-12);
            assert!((a.force[i] - 2.0 * (m * v[i] - p)).abs() < 1e-12);
            assert!(a.g1[i].abs() < 1e-12);
        }
        assert!(f.stats().max_nodes <= 2);
    }

    #[test]
    fn direct_is_independent_of_worker_count() {
        let k = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 1).unwrap();
        let (x1, _, w, v) = cloud(3000, 1, 9);
        let c = Cloud::new(&x1, &[]);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut e = Interaction::new(&k, SumBackend::Direct);
                e.alignment(c, &w, &v, true).force
            })
        };
        let a = run(1);
        let b = run(3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let mut e = Interaction::new(&k, SumBackend::Chebyshev);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c1 = e.alignment(c, &w, &v, false).force;
        let c3 = pool.install(|| {
            let mut e = Interaction::new(&k, SumBackend::Chebyshev);
            e.alignment(c, &w, &v, false).force
        });
        assert!(c1.iter().zip(&c3).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn tabulated_kernel_stays_direct() {
        let radii: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = radii.iter().map(|r| 1.0 / (1.0 + r)).collect();
        let k = Kernel::new(
            KernelFamily::Tabulated {
                radii,
                values,
                order: Default::default(),
                heavy_tail: None,
            },
            1,
        )
        .unwrap();
        let (x1, _, w, v) = cloud(400, 1, 1);
        let mut e = Interaction::new(&k, SumBackend::Auto);
        e.alignment(Cloud::new(&x1, &[]), &w, &v, false);
        assert_eq!(e.stats().chebyshev_calls, 0);
        assert_eq!(e.stats().direct_calls, 1);
    }

    #[test]
    fn grid_is_reused_while_cloud_stays_inside() {
        let k = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 1).unwrap();
        let (mut x1, _, w, v) = cloud(400, 1, 2);
        let mut e = Interaction::new(&k, SumBackend::Chebyshev);
        e.alignment(Cloud::new(&x1, &[]), &w, &v, false);
        for x in x1.iter_mut() {
            *x *= 0.9;
        }
        e.alignment(Cloud::new(&x1, &[]), &w, &v, false);
        assert_eq!(e.stats().grid_rebuilds, 1);
        for x in x1.iter_mut() {
            *x *= 0.3;
        }
        e.alignment(Cloud::new(&x1, &[]), &w, &v, false);
        assert_eq!(e.stats().grid_rebuilds, 2);
    }

    #[test]
    fn random_cloud_sizes_agree() {
        let k = Kernel::new(KernelFamily::power_tail(0.5, 0.8), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let n = rng.gen_range(2..200);
            let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let c = Cloud::new(&x1, &[]);
            let a = Interaction::new(&k, SumBackend::Direct).potentials(PairFn::Kernel, c, &[&w], c, true);
            let b = Interaction::new(&k, SumBackend::Chebyshev).potentials(PairFn::Kernel, c, &[&w], c, true);
            assert!(max_rel(&b[0].value, &a[0].value) < 1e-12);
            assert!(max_rel(&b[0].d1, &a[0].d1) < 1e-11);
        }
    }
}
