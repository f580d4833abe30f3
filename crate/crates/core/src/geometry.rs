//! Box-counting and local dimensions of one-dimensional limit measures, and
//! the closed-form predictions for the Cantor construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{Decomposition, LimitEvaluator, LimitMap};
use crate::numeric::line_fit;
use crate::scenario::{cantor_dimension, CantorGeometry, Scenario};

/// Fewest points a slope fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    /// `ln N(r)` against `-ln(2r)`.
    BoxCounting,
    /// `ln mbar(x - r, x + r)` against `ln r`.
    Local,
}

/// A fitted scaling exponent with its full table, so the fit can be redone
/// elsewhere.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DimensionEstimate {
    pub kind: EstimateKind,
    /// Strictly decreasing.
    pub radii: Vec<f64>,
    /// `N(r)` or the ball mass at each radius.
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log-log coordinates.
    pub residual: f64,
    pub predicted: Option<f64>,
    pub source: Option<String>,
}

impl DimensionEstimate {
    /// The `(x, y)` log-log points the slope was fitted to.
    pub fn loglog(&self) -> Vec<(f64, f64)> {
        self.radii
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| match self.kind {
                EstimateKind::BoxCounting => (-(2.0 * r).ln(), v.ln()),
                EstimateKind::Local => (r.ln(), v.ln()),
            })
            .collect()
    }

    pub fn with_prediction(mut self, value: f64, source: &str) -> Self {
        self.predicted = Some(value);
        self.source = Some(source.into());
        self
    }

    fn fit(kind: EstimateKind, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut e = Self {
            kind,
            radii,
            values,
            slope: 0.0,
            intercept: 0.0,
            residual: 0.0,
            predicted: None,
            source: None,
        };
        let (xs, ys): (Vec<f64>, Vec<f64>) = e.loglog().into_iter().unzip();
        let f = line_fit(&xs, &ys).ok_or_else(|| Error::Dimension("degenerate fit".into()))?;
        e.slope = f.slope;
        e.intercept = f.intercept;
        e.residual = f.residual;
        Ok(e)
    }
}

/// `r0 2^{-k}` for `k = 0..count`.
pub fn geometric_radii(r0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| r0 * 0.5f64.powi(k as i32)).collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < MIN_FIT_POINTS {
        return Err(Error::Dimension(format!(
            "{} radii given, the fit needs at least {MIN_FIT_POINTS}",
            radii.len()
        )));
    }
    if !radii.iter().all(|r| r.is_finite() && *r > 0.0) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Dimension("radii must be positive and strictly decreasing".into()));
    }
    Ok(())
}

fn sorted_distinct(points: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    p.sort_by(f64::total_cmp);
    p.dedup();
    p
}

/// Minimal number of intervals of radius `r` covering `points` (sorted): the
/// greedy sweep opens an interval at the leftmost uncovered point.
pub fn cover_count(sorted: &[f64], r: f64) -> usize {
    let mut count = 0;
    let mut reach = f64::NEG_INFINITY;
    for &x in sorted {
        if x >= reach {
            count += 1;
            reach = x + 2.0 * r;
        }
    }
    count
}

/// Box-counting dimension of a finite point set over the given radii.
/// A single distinct point has dimension 0.
pub fn box_dimension(points: &[f64], radii: &[f64]) -> Result<DimensionEstimate> {
    let p = sorted_distinct(points);
    if p.is_empty() {
        return Err(Error::Dimension("empty point set".into()));
    }
    if p.len() == 1 {
        return Ok(DimensionEstimate {
            kind: EstimateKind::BoxCounting,
            radii: radii.to_vec(),
            values: vec![1.0; radii.len()],
            slope: 0.0,
            intercept: 0.0,
            residual: 0.0,
            predicted: None,
            source: None,
        });
    }
    check_radii(radii)?;
    let diam = p[p.len() - 1] - p[0];
    if radii[0] >= diam {
        return Err(Error::Dimension(format!("largest radius {} not below the set diameter {diam}", radii[0])));
    }
    let values = radii.iter().map(|&r| cover_count(&p, r) as f64).collect();
    DimensionEstimate::fit(EstimateKind::BoxCounting, radii.to_vec(), values)
}

/// Box dimension over an automatic window: radii halve from a tenth of the
/// diameter while they stay above `3 error_bound` and half the smallest gap,
/// and while the count stays within a quarter of the number of points (past
/// that a finite sample looks zero-dimensional).
pub fn box_dimension_auto(points: &[f64], error_bound: f64) -> Result<DimensionEstimate> {
    let p = sorted_distinct(points);
    if p.len() < 2 {
        return box_dimension(&p, &[]);
    }
    let diam = p[p.len() - 1] - p[0];
    let min_gap = p.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let floor = (3.0 * error_bound).max(0.5 * min_gap);
    let cap = (p.len() / 4).max(2);
    let mut radii = Vec::new();
    let mut r = diam / 10.0;
    while r >= floor && cover_count(&p, r) <= cap {
        radii.push(r);
        r *= 0.5;
    }
    box_dimension(&p, &radii)
}

/// `mbar((x - r, x + r))` for a one-dimensional limit: `Xbar` is
/// nondecreasing, so the preimage of the ball is an interval whose `m0` mass
/// is integrated from `rho0`, plus the initial atoms mapped into the ball.
pub struct BallMass<'a> {
    s: &'a Scenario,
    ev: LimitEvaluator<'a>,
    atoms: Vec<(f64, f64)>,
}

impl<'a> BallMass<'a> {
    pub fn new(s: &'a Scenario, map: &'a LimitMap) -> Result<Self> {
        if s.dim() != 1 {
            return Err(Error::UnsupportedDimension { supported: 1, got: s.dim() });
        }
        let m0 = s.measure();
        let atoms = (0..m0.len())
            .filter(|&i| m0.is_atom(i))
            .map(|i| (map.xbar[i], m0.weight(i)))
            .collect();
        Ok(Self {
            s,
            ev: LimitEvaluator::new(s, map),
            atoms,
        })
    }

    /// `Xbar` at a label.
    pub fn image(&self, a: f64) -> f64 {
        self.ev.xbar_at(a, 0.0)
    }

    pub fn mass(&self, x: f64, r: f64) -> Result<f64> {
        let lo = self.ev.preimage(x - r, 0.0);
        let hi = self.ev.preimage(x + r, 0.0);
        let ac = if hi > lo { self.s.slice_mass(0.0, lo, hi)? } else { 0.0 };
        let at: f64 = self.atoms.iter().filter(|(y, _)| (y - x).abs() < r).map(|(_, w)| w).sum();
        Ok(ac + at)
    }
}

/// Local dimension of `mbar` at `x`: slope of `ln mbar(x - r, x + r)`
/// against `ln r`.
pub fn local_dimension(s: &Scenario, map: &LimitMap, x: f64, radii: &[f64]) -> Result<DimensionEstimate> {
    check_radii(radii)?;
    let balls = BallMass::new(s, map)?;
    let values = radii.iter().map(|&r| balls.mass(x, r)).collect::<Result<Vec<f64>>>()?;
    if values[0] <= 0.0 {
        return Err(Error::Dimension(format!("x = {x} outside the support of the limit measure")));
    }
    if let Some(k) = values.iter().position(|&m| m <= 0.0) {
        return Err(Error::Dimension(format!(
            "ball mass vanishes at r = {:e}; radii below the resolved range",
            radii[k]
        )));
    }
    let e = DimensionEstimate::fit(EstimateKind::Local, radii.to_vec(), values)?;
    Ok(match s.info().predicted.iter().find(|(k, _)| k == "local_dimension") {
        Some((_, d)) => e.with_prediction(*d, "power-law exponent"),
        None => e,
    })
}

/// Closed-form dimensions of the Cantor construction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CantorPrediction {
    pub gamma: f64,
    pub beta: f64,
    pub k: u32,
    /// `ln 2 / (-ln(beta gamma))`, the box and Hausdorff dimension of `Xbar(Z)`.
    pub dimension: f64,
    /// `dim_box(Z)/(k + 1)` with `dim_box(Z) = 1` for a fat Cantor set.
    pub ceiling: f64,
    /// Supremum of `dimension` over `beta <= gamma^k` with `gamma < 1/3`:
    /// `ln 2/((k + 1) ln 3)`.
    pub attainable: f64,
}

impl CantorPrediction {
    pub fn within_ceiling(&self) -> bool {
        self.dimension <= self.ceiling
    }
}

pub fn cantor_prediction(gamma: f64, beta: f64, k: u32) -> Result<CantorPrediction> {
    if !(gamma > 0.0 && gamma < 1.0 / 3.0) {
        return Err(Error::Dimension(format!("gamma must lie in (0, 1/3), got {gamma}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Dimension(format!("beta must lie in (0, 1), got {beta}")));
    }
    let k1 = (k + 1) as f64;
    Ok(CantorPrediction {
        gamma,
        beta,
        k,
        dimension: cantor_dimension(gamma, beta),
        ceiling: 1.0 / k1,
        attainable: 2f64.ln() / (k1 * 3f64.ln()),
    })
}

/// Largest `mbar_Z(x - r, x + r)/r^s` over sampled balls, against the
/// allowed `8/c3^s` (twice the constant of the mass-distribution argument).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FrostmanCheck {
    pub s: f64,
    pub c3: f64,
    pub bound: f64,
    pub worst: f64,
    /// Ball `(x, r)` attaining `worst`.
    pub worst_ball: (f64, f64),
    pub balls: usize,
    pub passed: bool,
}

/// Samples balls centred at the atoms and halfway between neighbours, with
/// radii from `c3 (beta gamma)^J/2` (the finest resolved generation) up to
/// the image diameter.
pub fn frostman_check(s: &Scenario, dec: &Decomposition, geom: &CantorGeometry) -> Result<FrostmanCheck> {
    let bg = geom.beta * geom.gamma;
    let dim = geom.dimension();
    let c3 = geom.c1() / (s.kappa() * s.total_mass() * s.kernel().sup_value());
    let bound = 8.0 / c3.powf(dim);
    let mut atoms: Vec<(f64, f64)> = dec
        .atoms
        .iter()
        .filter(|a| a.interval.is_some())
        .map(|a| (a.position, a.mass))
        .collect();
    if atoms.is_empty() {
        return Err(Error::Dimension("no concentration atoms".into()));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    // Prefix sums give each ball's mass by two binary searches.
    let mut prefix = vec![0.0];
    for a in &atoms {
        prefix.push(prefix.last().unwrap() + a.1);
    }
    let ball = |x: f64, r: f64| {
        let lo = xs.partition_point(|&y| y <= x - r);
        let hi = xs.partition_point(|&y| y < x + r);
        prefix[hi] - prefix[lo]
    };
    let mut centres = xs.clone();
    centres.extend(xs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let r_min = 0.5 * c3 * bg.powi(geom.depth as i32);
    let r_max = (xs[xs.len() - 1] - xs[0]).max(r_min);
    let mut radii = Vec::new();
    let mut r = r_max;
    while r >= r_min {
        radii.push(r);
        r *= 0.5;
    }
    let mut check = FrostmanCheck {
        s: dim,
        c3,
        bound,
        worst: 0.0,
        worst_ball: (xs[0], r_max),
        balls: 0,
        passed: true,
    };
    for &x in &centres {
        for &r in &radii {
            let q = ball(x, r) / r.powf(dim);
            check.balls += 1;
            if q > check.worst {
                check.worst = q;
                check.worst_ball = (x, r);
            }
        }
    }
    check.passed = check.worst <= bound;
    Ok(check)
}

#[cfg(test)]
mod tests;
