use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_min};

const ENDPOINT_TOL: f64 = 1e-12;

/// Zero set and positivity set of `e0` on one slice `alpha_- = a2`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZeroSlice {
    pub a2: f64,
    pub lo: f64,
    pub hi: f64,
    /// Maximal closed intervals where `e0 <= threshold`, sorted and disjoint.
    pub z: Vec<[f64; 2]>,
    /// The complementary (relatively open) intervals of the slice.
    pub p: Vec<[f64; 2]>,
}

impl ZeroSlice {
    /// Index of the zero interval containing `x`, if any.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let k = self.z.partition_point(|iv| iv[1] < x);
        (k < self.z.len() && self.z[k][0] <= x).then_some(k)
    }

    pub fn z_length(&self) -> f64 {
        self.z.iter().map(|iv| iv[1] - iv[0]).sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ZeroSet {
    pub threshold: f64,
    pub slices: Vec<ZeroSlice>,
}

impl ZeroSet {
    pub fn slice(&self, a2: f64) -> Option<&ZeroSlice> {
        self.slices.iter().find(|s| s.a2 == a2)
    }

    pub fn is_empty(&self) -> bool {
        self.slices.iter().all(|s| s.z.is_empty())
    }

    /// Zero interval of a point, as `(slice index, interval index)`.
    pub fn locate(&self, a: [f64; 2]) -> Option<(usize, usize)> {
        let si = self.slices.iter().position(|s| s.a2 == a[1])?;
        self.slices[si].locate(a[0]).map(|k| (si, k))
    }
}

impl Scenario {
    /// Zero set of `e0` with threshold `eps` (ties count as zero).
    ///
    /// Each slice is scanned at its label positions, its endpoints and the
    /// profile's probe points; interval endpoints are refined by bisection and
    /// local minima between scan points are searched for isolated zeros.
    /// Values below `-eps` make the data supercritical.
    pub fn zero_set(&self, eps: f64) -> Result<ZeroSet> {
        let slices = self
            .slices()
            .into_iter()
            .map(|a2| self.zero_slice(a2, eps, !self.info().supercritical_allowed))
            .collect::<Result<Vec<_>>>()?;
        Ok(ZeroSet {
            threshold: eps,
            slices,
        })
    }

    /// Smallest crossing-time bound over the negative components of `e0`,
    /// or `None` for subcritical data. Ignores `supercritical_allowed`.
    pub fn crossing_bound(&self) -> Option<f64> {
        let eps = self.default_threshold();
        self.slices()
            .into_iter()
            .filter_map(|a2| match self.zero_slice(a2, eps, true) {
                Err(Error::Supercritical { crossing_bound, .. }) => Some(crossing_bound),
                _ => None,
            })
            .reduce(f64::min)
    }

    fn e0_on(&self, a2: f64, x: f64) -> f64 {
        if self.dim() == 2 {
            self.e0_at(&[x, a2])
        } else {
            self.e0_at(&[x])
        }
    }

    fn zero_slice(&self, a2: f64, eps: f64, strict: bool) -> Result<ZeroSlice> {
        let sup = self.measure().support();
        let (lo, hi) = (sup.lo[0], sup.hi[0]);
        let mut xs: Vec<f64> = self.slice_members(a2).iter().map(|&i| self.pos(i)[0]).collect();
        xs.extend(self.probe_points(a2).into_iter().filter(|&x| x > lo && x < hi));
        xs.push(lo);
        xs.push(hi);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let mut pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, self.e0_on(a2, x))).collect();

        // Isolated minima between scan points.
        let mut extra = Vec::new();
        for k in 1..pts.len().saturating_sub(1) {
            let (e_prev, e, e_next) = (pts[k - 1].1, pts[k].1, pts[k + 1].1);
            if e > eps && e <= e_prev && e <= e_next {
                let (x, v) = golden_min(|x| self.e0_on(a2, x), pts[k - 1].0, pts[k + 1].0, 1e-13);
                if v <= eps {
                    extra.push((x, v));
                }
            }
        }
        pts.extend(extra);
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);

        if let Some(k) = (0..pts.len()).min_by(|&a, &b| pts[a].1.total_cmp(&pts[b].1)) {
            if pts[k].1 < -eps && strict {
                let a = pts[k.saturating_sub(1)].0;
                let b = pts[(k + 1).min(pts.len() - 1)].0;
                let (x, v) = golden_min(|x| self.e0_on(a2, x), a, b, 1e-13);
                let (x, v) = if v < pts[k].1 { (x, v) } else { pts[k] };
                return Err(self.supercritical(a2, x, v, &pts));
            }
        }

        let f = |x: f64| self.e0_on(a2, x) - eps;
        let mut z = Vec::new();
        let mut k = 0;
        while k < pts.len() {
            if pts[k].1 > eps {
                k += 1;
                continue;
            }
            let start = k;
            while k + 1 < pts.len() && pts[k + 1].1 <= eps {
                k += 1;
            }
            let left = if start == 0 {
                pts[0].0
            } else {
                bisect(f, pts[start - 1].0, pts[start].0, ENDPOINT_TOL)
            };
            let right = if k + 1 == pts.len() {
                pts[k].0
            } else {
                bisect(f, pts[k + 1].0, pts[k].0, ENDPOINT_TOL)
            };
            z.push([left, right]);
            k += 1;
        }
        let mut p = Vec::new();
        let mut cursor = lo;
        for iv in &z {
            if iv[0] > cursor {
                p.push([cursor, iv[0]]);
            }
            cursor = iv[1];
        }
        if cursor < hi {
            p.push([cursor, hi]);
        }
        Ok(ZeroSlice { a2, lo, hi, z, p })
    }

    /// Error for `e0 < 0` near `x`: the negative component `[a, b]` around it
    /// and the crossing-time bound `(b - a)/|int_a^b e0|`.
    fn supercritical(&self, a2: f64, x: f64, v: f64, pts: &[(f64, f64)]) -> Error {
        let f = |s: f64| self.e0_on(a2, s);
        let k = pts.partition_point(|p| p.0 < x).min(pts.len() - 1);
        let mut l = k;
        while l > 0 && pts[l - 1].1 < 0.0 {
            l -= 1;
        }
        let mut r = k;
        while r + 1 < pts.len() && pts[r + 1].1 < 0.0 {
            r += 1;
        }
        let a = if l == 0 { pts[0].0 } else { bisect(f, pts[l - 1].0, pts[l].0, ENDPOINT_TOL) };
        let b = if r + 1 == pts.len() {
            pts[r].0
        } else {
            bisect(f, pts[r + 1].0, pts[r].0, ENDPOINT_TOL)
        };
        let integral = self.e0_integral(a2, a, b);
        let location = if self.dim() == 2 { vec![x, a2] } else { vec![x] };
        Error::Supercritical {
            min_e0: v,
            location,
            crossing_bound: (b - a) / integral.abs(),
        }
    }
}
