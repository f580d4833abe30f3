//! Compactly supported mass measures: a mass-lumped absolutely continuous
//! part carried by grid labels plus explicit atoms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::numeric::{tree_sum, Compensated};

/// Axis-aligned box `Omega`. Unused axes of a 1D box are `[0, 0]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl BoxDomain {
    pub fn interval(a: f64, b: f64) -> Self {
        Self {
            dim: 1,
            lo: [a, 0.0],
            hi: [b, 0.0],
        }
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self { dim: 2, lo, hi }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = 1e-12 * (1.0 + self.diameter());
        (0..self.dim).all(|d| p[d] >= self.lo[d] - tol && p[d] <= self.hi[d] + tol)
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim)
            .map(|d| (self.hi[d] - self.lo[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A lumped grid cell: the mass `weight = rho0 * cell` rides on `pos`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AcLabel {
    pub pos: [f64; 2],
    pub weight: f64,
    pub cell: f64,
    pub rho0: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Atom {
    pub pos: [f64; 2],
    pub weight: f64,
}

/// `m0 = rho0 dx + nu`. Particles are indexed labels first, then atoms.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MassMeasure {
    dim: usize,
    labels: Vec<AcLabel>,
    atoms: Vec<Atom>,
    support: BoxDomain,
}

impl MassMeasure {
    pub fn from_parts(labels: Vec<AcLabel>, atoms: Vec<Atom>, support: BoxDomain) -> Result<Self> {
        let dim = support.dim;
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension { supported: 2, got: dim });
        }
        for l in &labels {
            if !(l.weight > 0.0 && l.weight.is_finite() && l.cell > 0.0) {
                return Err(Error::Measure(format!("label weight {} and cell {} must be positive", l.weight, l.cell)));
            }
            if (l.weight - l.rho0 * l.cell).abs() > 1e-12 * l.weight {
                return Err(Error::Measure("label weight differs from rho0 * cell".into()));
            }
            if !support.contains(l.pos) {
                return Err(Error::Measure(format!("label {:?} outside the support box", l.pos)));
            }
        }
        for a in &atoms {
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::Measure(format!("atom weight {} must be positive", a.weight)));
            }
            if !support.contains(a.pos) {
                return Err(Error::Measure(format!("atom {:?} outside the support box", a.pos)));
            }
        }
        let m = Self {
            dim,
            labels,
            atoms,
            support,
        };
        if !(m.total_mass() > 0.0) {
            return Err(Error::Measure("total mass must be positive".into()));
        }
        Ok(m)
    }

    /// Midpoint mass lumping of `rho0` on a uniform `n[0] x n[1]` grid over
    /// `support`. Cells where `rho0 <= 0` carry no label. Labels are ordered
    /// row by row (lateral coordinate outer), increasing in the active one.
    pub fn lumped(
        support: BoxDomain,
        n: [usize; 2],
        rho0: &dyn Fn(&[f64]) -> f64,
        atoms: Vec<Atom>,
    ) -> Result<Self> {
        let dim = support.dim;
        let rows = if dim == 2 { n[1] } else { 1 };
        if n[0] == 0 || rows == 0 {
            return Err(Error::Measure("grid resolution must be positive".into()));
        }
        let h1 = (support.hi[0] - support.lo[0]) / n[0] as f64;
        let h2 = if dim == 2 {
            (support.hi[1] - support.lo[1]) / n[1] as f64
        } else {
            1.0
        };
        let cell = h1 * h2;
        let mut labels = Vec::with_capacity(n[0] * rows);
        for j in 0..rows {
            let a2 = if dim == 2 {
                support.lo[1] + (j as f64 + 0.5) * h2
            } else {
                0.0
            };
            for i in 0..n[0] {
                let a1 = support.lo[0] + (i as f64 + 0.5) * h1;
                let p = [a1, a2];
                let r = rho0(&p[..dim]);
                if r > 0.0 {
                    labels.push(AcLabel {
                        pos: p,
                        weight: r * cell,
                        cell,
                        rho0: r,
                    });
                }
            }
        }
        Self::from_parts(labels, atoms, support)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[AcLabel] {
        &self.labels
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support(&self) -> &BoxDomain {
        &self.support
    }

    /// Number of particles (labels, then atoms).
    pub fn len(&self) -> usize {
        self.labels.len() + self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        if i < self.labels.len() {
            self.labels[i].pos
        } else {
            self.atoms[i - self.labels.len()].pos
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        if i < self.labels.len() {
            self.labels[i].weight
        } else {
            self.atoms[i - self.labels.len()].weight
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub fn is_atom(&self, i: usize) -> bool {
        i >= self.labels.len()
    }

    pub fn total_mass(&self) -> f64 {
        tree_sum(&self.weights())
    }

    /// Rescale every weight so the total mass equals `target`.
    pub fn normalized(&self, target: f64) -> Result<Self> {
        let s = target / self.total_mass();
        let labels = self
            .labels
            .iter()
            .map(|l| AcLabel {
                weight: l.weight * s,
                rho0: l.rho0 * s,
                ..*l
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                weight: a.weight * s,
                ..*a
            })
            .collect();
        Self::from_parts(labels, atoms, self.support)
    }

    /// `sum_i w_i phi(x - X_i)` with the particles at `positions`
    /// (active coordinate per particle; lateral coordinates stay frozen).
    pub fn convolve(&self, kernel: &Kernel, x: &[f64], positions: &[f64]) -> Result<f64> {
        if positions.len() != self.len() {
            return Err(Error::IndexMismatch {
                expected: self.len(),
                got: positions.len(),
            });
        }
        if x.len() != self.dim {
            return Err(Error::IndexMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let x2 = if self.dim == 2 { x[1] } else { 0.0 };
        let mut acc = Compensated::new();
        for (i, &p) in positions.iter().enumerate() {
            let lat = self.position(i)[1];
            acc.add(self.weight(i) * kernel.eval_pair(x[0] - p, x2 - lat));
        }
        Ok(acc.value())
    }

    /// Same measure with the active coordinate of every particle replaced.
    pub fn pushed_forward(&self, positions: &[f64]) -> Result<Self> {
        if positions.len() != self.len() {
            return Err(Error::IndexMismatch {
                expected: self.len(),
                got: positions.len(),
            });
        }
        let n = self.labels.len();
        let mut lo = self.support.lo;
        let mut hi = self.support.hi;
        for &p in positions {
            lo[0] = lo[0].min(p);
            hi[0] = hi[0].max(p);
        }
        let labels = self
            .labels
            .iter()
            .zip(positions)
            .map(|(l, &p)| AcLabel {
                pos: [p, l.pos[1]],
                ..*l
            })
            .collect();
        let atoms = self
            .atoms
            .iter()
            .zip(&positions[n..])
            .map(|(a, &p)| Atom {
                pos: [p, a.pos[1]],
                ..*a
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            labels,
            atoms,
            support: BoxDomain {
                dim: self.dim,
                lo,
                hi,
            },
        })
    }

    fn points_1d(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| (self.position(i)[0], self.weight(i))).collect()
    }
}

/// Exact `W1` between discrete measures on the line given as `(x, mass)`.
pub fn w1_discrete(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Result<f64> {
    let mm: f64 = tree_sum(&mu.iter().map(|p| p.1).collect::<Vec<_>>());
    let mn: f64 = tree_sum(&nu.iter().map(|p| p.1).collect::<Vec<_>>());
    if (mm - mn).abs() > 1e-12 * mm.abs().max(mn.abs()) {
        return Err(Error::UnequalMass(mm, mn));
    }
    // Signed mass events, sorted by position; F_mu - F_nu is piecewise constant.
    let mut ev: Vec<(f64, f64)> = mu.iter().copied().chain(nu.iter().map(|&(x, m)| (x, -m))).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = Compensated::new();
    let mut total = Compensated::new();
    for k in 0..ev.len() {
        diff.add(ev[k].1);
        if k + 1 < ev.len() {
            let gap = ev[k + 1].0 - ev[k].0;
            if gap > 0.0 {
                total.add(diff.value().abs() * gap);
            }
        }
    }
    Ok(total.value())
}

/// `W1(mu, nu)` for one-dimensional measures, treating lumped labels as point
/// masses at their positions.
pub fn w1_distance_1d(mu: &MassMeasure, nu: &MassMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if m.dim != 1 {
            return Err(Error::UnsupportedDimension { supported: 1, got: m.dim });
        }
    }
    w1_discrete(&mu.points_1d(), &nu.points_1d())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::numeric::{integrate, QuadTol};

    fn uniform(a: f64, b: f64, n: usize, density: f64) -> MassMeasure {
        MassMeasure::lumped(BoxDomain::interval(a, b), [n, 1], &|_| density, vec![]).unwrap()
    }

    #[test]
    fn total_mass_examples() {
        let labels = (0..100)
            .map(|i| AcLabel {
                pos: [i as f64 / 100.0, 0.0],
                weight: 0.01,
                cell: 0.01,
                rho0: 1.0,
            })
            .collect();
        let m = MassMeasure::from_parts(labels, vec![], BoxDomain::interval(0.0, 1.0)).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-15);
        assert!(MassMeasure::from_parts(vec![], vec![], BoxDomain::interval(0.0, 1.0)).is_err());
        let atoms = vec![
            Atom { pos: [0.2, 0.0], weight: 0.25 },
            Atom { pos: [0.7, 0.0], weight: 0.25 },
        ];
        let m = MassMeasure::lumped(BoxDomain::interval(0.0, 1.0), [64, 1], &|_| 1.0, atoms).unwrap();
        assert!((m.total_mass() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn convolve_examples() {
        let c = Kernel::new(KernelFamily::constant(1.0), 1).unwrap();
        let m = uniform(-1.0, 1.0, 50, 0.5);
        let pos: Vec<f64> = (0..m.len()).map(|i| m.position(i)[0]).collect();
        assert!((m.convolve(&c, &[0.3], &pos).unwrap() - 1.0).abs() < 1e-14);

        let k = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 1).unwrap();
        let single = MassMeasure::from_parts(
            vec![],
            vec![Atom { pos: [0.4, 0.0], weight: 2.0 }],
            BoxDomain::interval(0.0, 1.0),
        )
        .unwrap();
        assert!((single.convolve(&k, &[1.9], &[0.4]).unwrap() - 2.0 * k.radial(1.5)).abs() < 1e-15);

        let exact = integrate(|y| k.radial(y), 0.0, 1.0, &[], QuadTol::default()).unwrap().value;
        let mut last = f64::INFINITY;
        for n in [16, 64, 256, 1024] {
            let m = uniform(0.0, 1.0, n, 1.0);
            let pos: Vec<f64> = (0..m.len()).map(|i| m.position(i)[0]).collect();
            let err = (m.convolve(&k, &[0.0], &pos).unwrap() - exact).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn convolve_rejects_index_mismatch() {
        let k = Kernel::new(KernelFamily::constant(1.0), 1).unwrap();
        let m = uniform(0.0, 1.0, 4, 1.0);
        assert!(m.convolve(&k, &[0.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn w1_examples() {
        let a = vec![(0.0, 1.0)];
        let b = vec![(1.0, 1.0)];
        assert_eq!(w1_discrete(&a, &b).unwrap(), 1.0);
        let u = uniform(0.0, 1.0, 200, 1.0);
        assert_eq!(w1_distance_1d(&u, &u).unwrap(), 0.0);
        let v = uniform(0.5, 1.5, 200, 1.0);
        assert!((w1_distance_1d(&u, &v).unwrap() - 0.5).abs() < 1e-13);
        assert!(matches!(
            w1_discrete(&a, &[(0.0, 2.0)]),
            Err(Error::UnequalMass(_, _))
        ));
    }
}
