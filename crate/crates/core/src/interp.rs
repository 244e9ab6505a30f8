//! Polynomial, trigonometric and elliptic interpolation through the nodes `a_i`.

use serde::{Deserialize, Serialize};

use crate::cplx::{ipow, C64};
use crate::error::{Error, Result};
use crate::qseries::QSeries;
use crate::sum::ComplexSum;

/// Interpolation data `(a_i, f(a_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeData {
    #[serde(with = "crate::cplx::pair_vec")]
    pub nodes: Vec<C64>,
    #[serde(with = "crate::cplx::pair_vec")]
    pub values: Vec<C64>,
}

impl NodeData {
    pub fn new(nodes: Vec<C64>, values: Vec<C64>) -> Result<Self> {
        let d = Self { nodes, values };
        d.check()?;
        Ok(d)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: NodeData = serde_json::from_str(s)?;
        d.check()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Invalid("no interpolation nodes".into()));
        }
        if self.nodes.len() != self.values.len() {
            return Err(Error::Invalid(format!(
                "{} nodes but {} values",
                self.nodes.len(),
                self.values.len()
            )));
        }
        for i in 0..self.nodes.len() {
            for j in 0..i {
                let (a, b) = (self.nodes[i], self.nodes[j]);
                if (a - b).norm() <= 1e-10 * a.norm().max(b.norm()) {
                    return Err(Error::Domain(format!("nodes {} and {} coincide", j + 1, i + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Unique interpolant of degree `< n`.
pub fn lagrange_eval(d: &NodeData, x: C64) -> C64 {
    let a = &d.nodes;
    let mut acc = ComplexSum::new();
    for i in 0..a.len() {
        let mut t = d.values[i];
        for j in 0..a.len() {
            if j != i {
                t *= (x - a[j]) / (a[i] - a[j]);
            }
        }
        acc.add(t);
    }
    acc.value()
}

/// Laurent interpolant supported on exponents `[L, L+n-1]`.
pub fn trig_interp_eval(d: &NodeData, l: i32, x: C64) -> C64 {
    let a = &d.nodes;
    let mut acc = ComplexSum::new();
    for i in 0..a.len() {
        let mut t = d.values[i] * ipow(x / a[i], l);
        for j in 0..a.len() {
            if j != i {
                t *= (1.0 - x / a[j]) / (1.0 - a[i] / a[j]);
            }
        }
        acc.add(t);
    }
    acc.value()
}

/// Fourier support of the trigonometric interpolant on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonWindow {
    pub l: i32,
    pub samples: usize,
    /// `(exponent, |coefficient|)` for every recovered exponent.
    pub coefficients: Vec<(i32, f64)>,
    pub in_window_max: f64,
    pub out_of_window_max: f64,
}

impl NewtonWindow {
    pub fn relative_leak(&self) -> f64 {
        if self.in_window_max == 0.0 {
            self.out_of_window_max
        } else {
            self.out_of_window_max / self.in_window_max
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.relative_leak() < tol
    }
}

/// Samples at `4(|L|+n)` roots of unity and recovers the Laurent coefficients by DFT.
pub fn newton_window(d: &NodeData, l: i32) -> NewtonWindow {
    let n = d.len() as i32;
    let m = (4 * (l.abs() + n)) as usize;
    let samples: Vec<C64> = (0..m)
        .map(|j| {
            let w = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64);
            trig_interp_eval(d, l, w)
        })
        .collect();
    let half = (m / 2) as i32;
    let mut coefficients = Vec::with_capacity(m);
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for e in -half..half {
        let mut acc = ComplexSum::new();
        for (j, s) in samples.iter().enumerate() {
            let t = -std::f64::consts::TAU * (j as f64) * (e as f64) / m as f64;
            acc.add(s * C64::from_polar(1.0, t));
        }
        let mag = acc.value().norm() / m as f64;
        if (l..l + n).contains(&e) {
            inside = inside.max(mag);
        } else {
            outside = outside.max(mag);
        }
        coefficients.push((e, mag));
    }
    NewtonWindow {
        l,
        samples: m,
        coefficients,
        in_window_max: inside,
        out_of_window_max: outside,
    }
}

/// Resonant divisors hit by the elliptic interpolation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ResonanceFlag {
    /// `z = q^m`.
    Z { m: i32 },
    /// `a_i / a_j = q^m`, 1-based labels.
    Pair { i: usize, j: usize, m: i32 },
}

pub fn resonance_check(d: &NodeData, z: C64, qs: &QSeries) -> Vec<ResonanceFlag> {
    let mut out = Vec::new();
    if let Some(m) = qs.in_lattice(z) {
        out.push(ResonanceFlag::Z { m });
    }
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            if let Some(m) = qs.in_lattice(d.nodes[i] / d.nodes[j]) {
                out.push(ResonanceFlag::Pair { i: i + 1, j: j + 1, m });
            }
        }
    }
    out
}

/// `sum_i f(a_i) theta(z x/a_i)/theta(z) prod_{j != i} theta(x/a_j)/theta(a_i/a_j)`.
pub fn elliptic_interp_eval(d: &NodeData, z: C64, x: C64, qs: &QSeries) -> Result<C64> {
    if let Some(flag) = resonance_check(d, z, qs).first() {
        return Err(Error::Resonance(format!("elliptic interpolation: {flag:?}")));
    }
    let a = &d.nodes;
    let tz = qs.theta(z)?;
    let mut acc = ComplexSum::new();
    for i in 0..a.len() {
        let mut t = d.values[i] * qs.theta(z * x / a[i])? / tz;
        for j in 0..a.len() {
            if j != i {
                t *= qs.theta(x / a[j])? / qs.theta(a[i] / a[j])?;
            }
        }
        acc.add(t);
    }
    Ok(acc.value())
}

/// `(-1)^n q^{-n} z^{-1} x^{-n} prod a_j`, the factor picked up under `x -> q x`.
pub fn elliptic_automorphy_factor(d: &NodeData, z: C64, x: C64, q: C64) -> C64 {
    let n = d.len() as i32;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let prod: C64 = d.nodes.iter().product();
    ipow(q, -n) * ipow(x, -n) * prod / z * sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::{c, rel_diff};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample() -> NodeData {
        NodeData::new(
            vec![c(0.6, 0.1), c(-0.3, 0.8), c(0.9, -0.5), c(-0.7, -0.4)],
            vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.2, -1.1), c(3.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn lagrange_reproduces_square() {
        let d = NodeData::new(
            vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)],
            vec![c(1.0, 0.0), c(4.0, 0.0), c(9.0, 0.0)],
        )
        .unwrap();
        assert!((lagrange_eval(&d, c(5.0, 0.0)) - c(25.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_node_is_constant() {
        let d = NodeData::new(vec![c(0.4, 0.0)], vec![c(2.5, -1.0)]).unwrap();
        for x in [c(0.0, 0.0), c(3.0, 1.0), c(-7.0, 2.0)] {
            assert_eq!(lagrange_eval(&d, x), c(2.5, -1.0));
        }
    }

    #[test]
    fn rejects_duplicate_nodes() {
        assert!(NodeData::new(vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0); 2]).is_err());
        assert!(NodeData::from_json(r#"{"nodes":[[1,0]],"values":[]}"#).is_err());
        let d = NodeData::from_json(r#"{"nodes":[[1,0],[2,0]],"values":[[0,0],[1,0]]}"#).unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn all_interpolants_reproduce_nodes() {
        let d = sample();
        let qs = QSeries::new(c(0.12, 0.05));
        let z = c(0.37, 0.61);
        for (a, f) in d.nodes.iter().zip(&d.values) {
            assert!(rel_diff(lagrange_eval(&d, *a), *f) < 1e-11);
            for l in [-2, 0, 3] {
                assert!(rel_diff(trig_interp_eval(&d, l, *a), *f) < 1e-11);
            }
            assert!(rel_diff(elliptic_interp_eval(&d, z, *a, &qs).unwrap(), *f) < 1e-11);
        }
    }

    #[test]
    fn trig_constant_is_one() {
        let d = NodeData::new(vec![c(0.5, 0.2), c(-0.9, 0.1), c(0.3, -1.2)], vec![c(1.0, 0.0); 3]).unwrap();
        for x in [c(0.1, 0.0), c(2.0, -3.0)] {
            assert!((trig_interp_eval(&d, 0, x) - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn newton_window_support() {
        let d = sample();
        for l in [-3, 0, 1, 4] {
            let w = newton_window(&d, l);
            assert_eq!(w.samples, (4 * (l.abs() + 4)) as usize);
            assert!(w.passes(1e-10), "L={l}: leak {}", w.relative_leak());
        }
    }

    #[test]
    fn resonance_flags() {
        let qs = QSeries::new(c(0.1, 0.0));
        let d = NodeData::new(vec![c(0.5, 0.0), c(0.05, 0.0)], vec![c(1.0, 0.0); 2]).unwrap();
        let flags = resonance_check(&d, c(0.1, 0.0), &qs);
        assert!(flags.contains(&ResonanceFlag::Z { m: 1 }));
        assert!(flags.contains(&ResonanceFlag::Pair { i: 1, j: 2, m: -1 }));
        let generic = NodeData::new(vec![c(0.5, 0.0), c(0.3, 0.2)], vec![c(1.0, 0.0); 2]).unwrap();
        assert!(resonance_check(&generic, c(0.4, 0.3), &qs).is_empty());
        assert!(matches!(
            elliptic_interp_eval(&d, c(0.4, 0.3), c(0.2, 0.0), &qs),
            Err(Error::Resonance(_))
        ));
    }

    #[test]
    fn elliptic_blowup_is_simple_pole() {
        let d = sample();
        let qs = QSeries::new(c(0.12, 0.05));
        let x = c(0.33, -0.21);
        let mut prev = f64::NAN;
        for e in [1e-2, 1e-3, 1e-4, 1e-5] {
            let z = c(1.0 + e, e);
            let m = elliptic_interp_eval(&d, z, x, &qs).unwrap().norm() * qs.theta(z).unwrap().norm();
            assert!(m.is_finite() && m < 1e6);
            if prev.is_finite() {
                assert!((m - prev).abs() < 0.1 * prev.max(1e-12));
            }
            prev = m;
        }
    }

    #[test]
    fn lagrange_reproduces_low_degree_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<C64> = (0..5)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let poly = |x: C64| coeffs.iter().rev().fold(c(0.0, 0.0), |acc, a| acc * x + a);
        let nodes: Vec<C64> = (0..5)
            .map(|j| C64::from_polar(1.0 + 0.1 * j as f64, 1.3 * j as f64))
            .collect();
        let d = NodeData::new(nodes.clone(), nodes.iter().map(|&a| poly(a)).collect()).unwrap();
        for _ in 0..50 {
            let x = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            assert!((lagrange_eval(&d, x) - poly(x)).norm() < 1e-10 * poly(x).norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn elliptic_automorphy(r in 0.3f64..2.0, t in 0.0f64..std::f64::consts::TAU, zr in 0.2f64..3.0, zt in 0.1f64..6.2) {
            let d = sample();
            let qs = QSeries::new(c(0.12, 0.05));
            let x = C64::from_polar(r, t);
            let z = C64::from_polar(zr, zt);
            prop_assume!(qs.in_lattice(z).is_none());
            let base = elliptic_interp_eval(&d, z, x, &qs).unwrap();
            prop_assume!(base.norm() > 1e-12);
            let shifted = elliptic_interp_eval(&d, z, qs.q() * x, &qs).unwrap();
            let expect = elliptic_automorphy_factor(&d, z, x, qs.q()) * base;
            prop_assert!(rel_diff(shifted, expect) < 1e-9);
        }
    }
}
