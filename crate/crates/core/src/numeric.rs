//! Small numerical building blocks: compensated and tree-ordered sums,
//! adaptive Gauss-Kronrod quadrature, bracketing root and minimum search,
//! and least-squares line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

const LEAF: usize = 256;

/// Sum with a fixed binary tree over leaves of `LEAF` elements, each leaf
/// summed with compensation. The association order depends only on the length
/// of the input, so the result is identical however the caller parallelises
/// the production of `values`.
pub fn tree_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut acc = Compensated::new();
        for &v in values {
            acc.add(v);
        }
        return acc.value();
    }
    let leaves = values.len().div_ceil(LEAF);
    let split = leaves.div_ceil(2) * LEAF;
    tree_sum(&values[..split]) + tree_sum(&values[split..])
}

/// Sum of `f(i)` for `i in 0..n` with the same fixed tree as [`tree_sum`].
pub fn tree_sum_by(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    let v: Vec<f64> = (0..n).map(f).collect();
    tree_sum(&v)
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-12,
            max_panels: 20_000,
        }
    }
}

impl QuadTol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            ..Self::default()
        }
    }
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// `breaks` are points inside `(a, b)` where `f` may lose smoothness; the
/// initial panels start at them so narrow features are never skipped.
/// Returns `a > b` integrals with the usual sign flip.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: QuadTol,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, breaks, tol)?;
        return Ok(Integral {
            value: -r.value,
            error: r.error,
        });
    }
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    // (error, a, b, value)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(edges.len() * 2);
    for w in edges.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        panels.push((e, w[0], w[1], v));
    }
    loop {
        let mut total = Compensated::new();
        let mut err = Compensated::new();
        for p in &panels {
            total.add(p.3);
            err.add(p.0);
        }
        let value = total.value();
        let error = err.value();
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Integral { value, error });
        }
        if panels.len() >= tol.max_panels {
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        // Split the worst panel. Linear scan keeps the order deterministic.
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.0 > acc.1 { (i, p.0) } else { acc });
        let (_, pa, pb, _) = panels[idx];
        let mid = 0.5 * (pa + pb);
        if mid <= pa || mid >= pb {
            return Err(Error::Quadrature {
                achieved: error,
                requested: target,
            });
        }
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels[idx] = (e1, pa, mid, v1);
        panels.push((e2, mid, pb, v2));
    }
}

/// Bisection for a sign change of `f` on `[a, b]`. `f(a)` and `f(b)` must
/// differ in sign (zero counts as the non-positive side). Returns the endpoint
/// of the final bracket lying on the same side as `b`.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let fa_pos = f(a) > 0.0;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (f(m) > 0.0) == fa_pos {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_recovers_small_terms() {
        let mut acc = Compensated::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        // Plain summation returns 0 here.
        assert!((acc.value() - 1e-13).abs() < 1e-13 * 1e-12);
    }

    #[test]
    fn tree_sum_matches_exact_integers() {
        let v: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(tree_sum(&v), 50_005_000.0);
    }

    #[test]
    fn quadrature_of_polynomial_and_kink() {
        let r = integrate(|x| x * x, 0.0, 3.0, &[], QuadTol::default()).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
        let r = integrate(|x: f64| x.abs(), -1.0, 2.0, &[0.0], QuadTol::default()).unwrap();
        assert!((r.value - 2.5).abs() < 1e-13);
        let r = integrate(|x| x, 1.0, 0.0, &[], QuadTol::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn narrow_feature_found_through_breakpoints() {
        let f = |x: f64| if (x - 0.5).abs() < 1e-6 { 1.0 } else { 0.0 };
        let r = integrate(f, 0.0, 1.0, &[0.5 - 1e-6, 0.5 + 1e-6], QuadTol::default()).unwrap();
        assert!((r.value - 2e-6).abs() < 1e-15);
    }

    #[test]
    fn bisect_and_golden() {
        let root = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((root - 2f64.sqrt()).abs() < 1e-13);
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = line_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
    }
}
