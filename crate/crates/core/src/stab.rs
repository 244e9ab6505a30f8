//! Elliptic stable envelopes of T*Gr(k,n) for both chambers.
//!
//! Chamber `+` is the symmetrized theta expression built from the blocks
//! `f_m`. The slots are filled with the entries of `mu` in decreasing order:
//! with that pairing the envelope vanishes on every wheel locus
//! `{a_l, a_l/hbar}`, while the x-automorphy is unchanged.
//!
//! Chamber `-` is obtained from chamber `+` through the symmetry of the quiver
//! data that exchanges the two maps:
//!
//! ```text
//! env_-(mu; x; a, z) = env_+(mu*; 1/x; a*, q^n/z),
//! a*_i = hbar / a_{n+1-i},   mu* = sort{n+1-mu_i}.
//! ```
//!
//! It has the same x-automorphy as chamber `+`, vanishes on the same wheel
//! loci, and its torus-fixed points are `x_i = a_{nu_i}/hbar`.

use serde::Serialize;

use crate::cplx::{ipow, C64};
use crate::error::{Error, Result};
use crate::model::{c_sigma, sigma_dual, Chamber, FixedPoint, Monomial, Params};
use crate::qseries::QSeries;
use crate::sum::ComplexSum;

/// `2 rho = (k-1, k-3, ..., 1-k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeylVector {
    two_rho: Vec<i32>,
}

impl WeylVector {
    pub fn new(k: usize) -> Self {
        let k = k as i32;
        Self {
            two_rho: (0..k).map(|i| k - 1 - 2 * i).collect(),
        }
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.two_rho
    }
}

/// One envelope: fixed point, chamber and parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct StabSpec {
    pub mu: FixedPoint,
    pub chamber: Chamber,
    pub params: Params,
    pub qseries: QSeries,
    /// Points with `|x_i/x_j - q^m| < tol` are rejected.
    pub near_diagonal_tolerance: f64,
}

impl StabSpec {
    pub fn new(mu: FixedPoint, chamber: Chamber, params: Params) -> Result<Self> {
        if mu.k() != params.k || *mu.as_slice().last().unwrap() > params.n {
            return Err(Error::Invalid(format!(
                "fixed point {mu} does not fit (k,n)=({},{})",
                params.k, params.n
            )));
        }
        if params.k > 6 {
            return Err(Error::Invalid("envelopes are summed explicitly; k <= 6".into()));
        }
        let qseries = QSeries::for_params(&params);
        Ok(Self {
            mu,
            chamber,
            params,
            qseries,
            near_diagonal_tolerance: 1e-8,
        })
    }

    pub fn with_params(&self, params: Params) -> Self {
        Self {
            qseries: QSeries::with_config(params.q, *self.qseries.config()),
            params,
            ..self.clone()
        }
    }

    pub fn with_z(&self, z: C64) -> Self {
        self.with_params(self.params.with_z(z))
    }

    /// The chamber `+` data `(params, slots, x-map)` realizing this envelope.
    fn plus_form(&self) -> (Params, Vec<usize>, bool) {
        let p = &self.params;
        match self.chamber {
            Chamber::Plus => {
                let slots = self.mu.as_slice().iter().rev().copied().collect();
                (p.clone(), slots, false)
            }
            Chamber::Minus => {
                let a = p.a.iter().rev().map(|&ai| p.hbar / ai).collect();
                let mirror = Params {
                    a,
                    z: ipow(p.q, p.n as i32) / p.z,
                    ..p.clone()
                };
                let mut star: Vec<usize> = self.mu.as_slice().iter().map(|&m| p.n + 1 - m).collect();
                star.sort_unstable();
                star.reverse();
                (mirror, star, true)
            }
        }
    }

    /// Torus-fixed point `nu` in the coordinates of this chamber.
    pub fn fixed_point_coords(&self, nu: &FixedPoint) -> Vec<C64> {
        let p = &self.params;
        nu.as_slice()
            .iter()
            .map(|&j| match self.chamber {
                Chamber::Plus => p.a[j - 1],
                Chamber::Minus => p.a[j - 1] / p.hbar,
            })
            .collect()
    }
}

/// `f_m(x, z) = theta(c_m x/(z a_m))/theta(c_m/z) prod_{i<m} theta(x/a_i) prod_{i>m} theta(hbar x/a_i)`.
pub fn f_building_block(m: usize, x: C64, z_eff: C64, p: &Params, qs: &QSeries) -> Result<C64> {
    let cm = p.c_m(m);
    let w = cm / z_eff;
    if let Some(e) = qs.in_lattice(w) {
        return Err(Error::Resonance(format!("c_{m}/z = q^{e}")));
    }
    let mut v = qs.theta(w * x / p.a[m - 1])? / qs.theta(w)?;
    for (i, &ai) in p.a.iter().enumerate() {
        let idx = i + 1;
        if idx < m {
            v *= qs.theta(x / ai)?;
        } else if idx > m {
            v *= qs.theta(p.hbar * x / ai)?;
        }
    }
    Ok(v)
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

fn check_off_diagonal(x: &[C64], qs: &QSeries, tol: f64) -> Result<()> {
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i == j {
                continue;
            }
            let r = x[i] / x[j];
            let m = (r.norm().ln() / qs.q().norm().ln()).round() as i32;
            if m.abs() <= qs.config().lattice_window && (r * ipow(qs.q(), -m) - 1.0).norm() < tol {
                return Err(Error::NearDiagonal {
                    i: i.min(j) + 1,
                    j: i.max(j) + 1,
                    tolerance: tol,
                });
            }
        }
    }
    Ok(())
}

/// Summands of the chamber `+` symmetrization, one per permutation `tau` in
/// lexicographic order:
/// `prod_{tau(i)<tau(j)} theta(hbar x_i/x_j)/theta(x_i/x_j) prod_i f_{slot[tau(i)]}(x_i, z hbar^{2rho_{tau(i)}})`.
fn plus_terms(p: &Params, qs: &QSeries, slots: &[usize], x: &[C64]) -> Result<Vec<C64>> {
    let k = x.len();
    let rho = WeylVector::new(k);
    let mut blocks = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for s in 0..k {
            let z_eff = p.z * ipow(p.hbar, rho.as_slice()[s]);
            blocks[i * k + s] = f_building_block(slots[s], x[i], z_eff, p, qs)?;
        }
    }
    let mut pair = vec![C64::new(1.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                pair[i * k + j] = qs.theta(p.hbar * x[i] / x[j])? / qs.theta(x[i] / x[j])?;
            }
        }
    }
    Ok(permutations(k)
        .into_iter()
        .map(|tau| {
            let mut t = C64::new(1.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    if i != j && tau[i] < tau[j] {
                        t *= pair[i * k + j];
                    }
                }
                t *= blocks[i * k + tau[i]];
            }
            t
        })
        .collect())
}

/// The `k!` summands of the envelope at `x`, lexicographic permutation order.
pub fn stab_terms(s: &StabSpec, x: &[C64]) -> Result<Vec<C64>> {
    if x.len() != s.params.k {
        return Err(Error::Invalid(format!("expected {} coordinates", s.params.k)));
    }
    check_off_diagonal(x, &s.qseries, s.near_diagonal_tolerance)?;
    let (p, slots, invert) = s.plus_form();
    if invert {
        let y: Vec<C64> = x.iter().map(|v| v.inv()).collect();
        plus_terms(&p, &s.qseries, &slots, &y)
    } else {
        plus_terms(&p, &s.qseries, &slots, x)
    }
}

pub fn stab_envelope(s: &StabSpec, x: &[C64]) -> Result<C64> {
    let mut acc = ComplexSum::new();
    for t in stab_terms(s, x)? {
        acc.add(t);
    }
    Ok(acc.value())
}

/// Envelope evaluated at the fixed point `nu` of its own chamber.
pub fn stab_restrict(s: &StabSpec, nu: &FixedPoint) -> Result<C64> {
    stab_envelope(s, &s.fixed_point_coords(nu))
}

/// Monomial `F` with `env(x, q z) = F(x) env(x, z)`:
/// `prod x_i / prod a_{mu_j}` in chamber `+`, times `hbar^k` in chamber `-`.
pub fn z_quasi_periodicity_factor(s: &StabSpec) -> Monomial {
    let (k, n) = (s.params.k, s.params.n);
    let mut m = Monomial::one(k, n);
    for e in m.e_x.iter_mut() {
        *e = 1;
    }
    for &j in s.mu.as_slice() {
        m.e_a[j - 1] -= 1;
    }
    if s.chamber == Chamber::Minus {
        m.e_hbar_half = 2 * k as i32;
    }
    m
}

/// `sigma_l(q) x`: multiply `x_l` by `q` (1-based `l`).
pub fn shift_x(x: &[C64], l: usize, q: C64) -> Vec<C64> {
    let mut y = x.to_vec();
    y[l - 1] *= q;
    y
}

/// Expected ratio `env(sigma_l(q) x)/env(x) = z q^{-n} hbar^{-n/2} (sigma_l^vee)^{-1}`.
pub fn x_shift_ratio(p: &Params, l: usize, x: &[C64]) -> C64 {
    let sd = sigma_dual(l, p.k, p.n).eval(p, x);
    p.z * ipow(p.q, -(p.n as i32)) * p.hbar_half_pow(-(p.n as i32)) / sd
}

/// Same ratio assembled from the general automorphy constant `c_sigma`.
pub fn x_shift_ratio_from_c_sigma(p: &Params, l: usize, x: &[C64]) -> C64 {
    c_sigma(l, p, x) * p.z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WheelReport {
    /// Largest `|env|` on the wheel locus.
    pub max_on_locus: f64,
    /// Largest `|env|` at nearby generic points.
    pub scale: f64,
}

impl WheelReport {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.max_on_locus
        } else {
            self.max_on_locus / self.scale
        }
    }
}

/// Evaluates the envelope on `x_1 = a_l q^{m1}`, `x_2 = a_l hbar^{-1} q^{m2}`
/// (`m in {-1,0,1}`) with remaining coordinates drawn from `rng`.
pub fn wheel_check<R: rand::Rng>(s: &StabSpec, l: usize, samples: usize, rng: &mut R) -> Result<WheelReport> {
    wheel_check_slots(s, l, (1, 2), samples, rng)
}

/// As [`wheel_check`] with the wheel pair placed in the given 1-based slots.
pub fn wheel_check_slots<R: rand::Rng>(
    s: &StabSpec,
    l: usize,
    slots: (usize, usize),
    samples: usize,
    rng: &mut R,
) -> Result<WheelReport> {
    let p = &s.params;
    if p.k < 2 {
        return Err(Error::Invalid("wheel check needs k >= 2".into()));
    }
    let (s1, s2) = (slots.0 - 1, slots.1 - 1);
    if s1 == s2 || s1 >= p.k || s2 >= p.k {
        return Err(Error::Invalid("wheel slots must be distinct and in range".into()));
    }
    let al = p.a[l - 1];
    let mut report = WheelReport {
        max_on_locus: 0.0,
        scale: 0.0,
    };
    for _ in 0..samples {
        let m1 = rng.gen_range(-1..=1);
        let m2 = rng.gen_range(-1..=1);
        let mut x: Vec<C64> = (0..p.k)
            .map(|_| C64::from_polar(rng.gen_range(0.6..1.4), rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        x[s1] = al * ipow(p.q, m1);
        x[s2] = al / p.hbar * ipow(p.q, m2);
        let on = stab_envelope(s, &x)?;
        let mut off = x.clone();
        off[s2] *= C64::from_polar(1.05, 0.3);
        let near = stab_envelope(s, &off)?;
        report.max_on_locus = report.max_on_locus.max(on.norm());
        report.scale = report.scale.max(near.norm());
    }
    Ok(report)
}

/// Values at `x_j = x_i (1 + eps)` for `eps = 1e-3, 1e-4, 1e-5`, and the ratio
/// of successive differences (near 10 when the diagonal pole cancels).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalRegularity {
    pub values: Vec<[f64; 2]>,
    pub ratios: Vec<f64>,
}

pub fn diagonal_regularity(s: &StabSpec, x: &[C64], i: usize, j: usize) -> Result<DiagonalRegularity> {
    let eps = [1e-3, 1e-4, 1e-5];
    let mut vals = Vec::with_capacity(eps.len());
    for e in eps {
        let mut y = x.to_vec();
        y[j - 1] = y[i - 1] * (1.0 + e);
        vals.push(stab_envelope(s, &y)?);
    }
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[0] - w[1]).norm()).collect();
    let ratios = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(DiagonalRegularity {
        values: vals.iter().map(|v| [v.re, v.im]).collect(),
        ratios,
    })
}

/// Residuals of the envelope property battery at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabChecks {
    pub symmetry: f64,
    pub x_shift: f64,
    pub x_shift_per_term: f64,
    pub c_sigma_agreement: f64,
    pub z_shift: f64,
    pub wheel: Option<f64>,
    pub diagonal_ratios: Vec<f64>,
}

impl StabChecks {
    pub fn passes(&self) -> bool {
        self.symmetry < 1e-12
            && self.x_shift < 1e-9
            && self.x_shift_per_term < 1e-9
            && self.c_sigma_agreement < 1e-9
            && self.z_shift < 1e-9
            && self.wheel.is_none_or(|w| w < 1e-9)
            && self.diagonal_ratios.iter().all(|r| (5.0..=20.0).contains(r))
    }
}

fn rel(a: C64, b: C64) -> f64 {
    crate::cplx::rel_diff(a, b)
}

/// Runs the full property battery for `s` at the generic point `x`.
pub fn stab_checks<R: rand::Rng>(s: &StabSpec, x: &[C64], rng: &mut R) -> Result<StabChecks> {
    let p = &s.params;
    let k = p.k;
    let base = stab_envelope(s, x)?;
    let base_terms = stab_terms(s, x)?;

    let mut symmetry = 0.0f64;
    for perm in permutations(k).into_iter().skip(1) {
        let y: Vec<C64> = perm.iter().map(|&i| x[i]).collect();
        symmetry = symmetry.max(rel(stab_envelope(s, &y)?, base));
    }

    let mut x_shift = 0.0f64;
    let mut per_term = 0.0f64;
    let mut agreement = 0.0f64;
    for l in 1..=k {
        let y = shift_x(x, l, p.q);
        let expect = x_shift_ratio(p, l, x);
        x_shift = x_shift.max(rel(stab_envelope(s, &y)?, expect * base));
        for (t1, t0) in stab_terms(s, &y)?.into_iter().zip(&base_terms) {
            per_term = per_term.max(rel(t1, expect * t0));
        }
        agreement = agreement.max(rel(x_shift_ratio_from_c_sigma(p, l, x), expect));
    }

    let factor = z_quasi_periodicity_factor(s).eval(p, x);
    let z_shift = rel(stab_envelope(&s.with_z(p.z * p.q), x)?, factor * base);

    let wheel = if k >= 2 {
        let mut worst = 0.0f64;
        for l in 1..=p.n {
            worst = worst.max(wheel_check(s, l, 4, rng)?.relative());
        }
        Some(worst)
    } else {
        None
    };

    let diagonal_ratios = if k >= 2 {
        diagonal_regularity(s, x, 1, 2)?.ratios
    } else {
        Vec::new()
    };

    Ok(StabChecks {
        symmetry,
        x_shift,
        x_shift_per_term: per_term,
        c_sigma_agreement: agreement,
        z_shift,
        wheel,
        diagonal_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::{c, rel_diff};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(k: usize, n: usize) -> Params {
        let a = [c(0.62, 0.21), c(-0.35, 0.58), c(0.1, -0.71), c(-0.55, -0.4)];
        Params::new(c(0.08, 0.03), c(0.31, -0.12), a[..n].to_vec(), c(0.023, 0.011), k)
            .validate()
            .unwrap()
    }

    fn point(k: usize) -> Vec<C64> {
        [c(0.83, 0.4), c(-0.5, 0.9), c(0.2, -1.1)][..k].to_vec()
    }

    fn spec(mu: Vec<usize>, ch: Chamber, p: &Params) -> StabSpec {
        StabSpec::new(FixedPoint::new(mu, p.n).unwrap(), ch, p.clone()).unwrap()
    }

    #[test]
    fn weyl_vector() {
        assert_eq!(WeylVector::new(3).as_slice(), &[2, 0, -2]);
        assert_eq!(WeylVector::new(1).as_slice(), &[0]);
        assert_eq!(WeylVector::new(4).as_slice().iter().sum::<i32>(), 0);
    }

    #[test]
    fn permutations_are_lexicographic() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn k1_envelope_is_building_block() {
        let p = params(1, 3);
        let qs = QSeries::for_params(&p);
        let x = [c(0.7, -0.2)];
        for m in 1..=3 {
            let s = spec(vec![m], Chamber::Plus, &p);
            let f = f_building_block(m, x[0], p.z, &p, &qs).unwrap();
            assert_eq!(stab_envelope(&s, &x).unwrap(), f);
        }
    }

    #[test]
    fn building_block_zero_and_z_shift() {
        let p = params(1, 3);
        let qs = QSeries::for_params(&p);
        assert_eq!(f_building_block(3, p.a[0], p.z, &p, &qs).unwrap(), c(0.0, 0.0));
        let x = c(0.44, 0.9);
        for m in 1..=3 {
            let r = f_building_block(m, x, p.q * p.z, &p, &qs).unwrap() / f_building_block(m, x, p.z, &p, &qs).unwrap();
            assert!(rel_diff(r, x / p.a[m - 1]) < 1e-10);
        }
        assert!(matches!(
            f_building_block(2, x, p.c_m(2) * p.q, &p, &qs),
            Err(Error::Resonance(_))
        ));
    }

    #[test]
    fn restriction_examples() {
        let p = params(1, 2);
        let qs = QSeries::for_params(&p);
        let s1 = spec(vec![1], Chamber::Plus, &p);
        let nu2 = FixedPoint::new(vec![2], 2).unwrap();
        let v = stab_restrict(&s1, &nu2).unwrap();
        let c1 = p.c_m(1);
        // the i > m product contributes theta(hbar a_2 / a_2) = theta(hbar)
        let expect =
            qs.theta(c1 * p.a[1] / (p.z * p.a[0])).unwrap() / qs.theta(c1 / p.z).unwrap() * qs.theta(p.hbar).unwrap();
        assert!(rel_diff(v, expect) < 1e-14 && v.norm() > 1e-6);
        let s2 = spec(vec![2], Chamber::Plus, &p);
        assert_eq!(
            stab_restrict(&s2, &FixedPoint::new(vec![1], 2).unwrap()).unwrap(),
            c(0.0, 0.0)
        );
    }

    #[test]
    fn diagonal_restrictions_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let z = C64::from_polar(rng.gen_range(0.005..0.05), rng.gen_range(0.0..std::f64::consts::TAU));
            let p = params(2, 4).with_z(z);
            for mu in FixedPoint::all(2, 4) {
                for ch in [Chamber::Plus, Chamber::Minus] {
                    let s = StabSpec::new(mu.clone(), ch, p.clone()).unwrap();
                    assert!(stab_restrict(&s, &mu).unwrap().norm() > 1e-14);
                }
            }
        }
    }

    #[test]
    fn wheel_vanishes_and_generic_pair_does_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = params(2, 2);
        for ch in [Chamber::Plus, Chamber::Minus] {
            for mu in FixedPoint::all(2, 2) {
                let s = StabSpec::new(mu, ch, p.clone()).unwrap();
                let w = wheel_check(&s, 1, 6, &mut rng).unwrap();
                assert!(w.relative() < 1e-9, "{ch}: {w:?}");
            }
        }
        // x_1 = x_2 = a_l is not on the wheel: perturb to leave the diagonal
        let p = params(2, 3);
        let s = spec(vec![1, 3], Chamber::Plus, &p);
        let v = stab_envelope(&s, &[p.a[0], p.a[0] * 1.01]).unwrap();
        assert!(v.norm() > 1e-8);
    }

    #[test]
    fn wheel_symmetric_slots_k3() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = params(3, 4);
        let s = spec(vec![1, 2, 4], Chamber::Plus, &p);
        let w = wheel_check_slots(&s, 2, (1, 3), 4, &mut rng).unwrap();
        assert!(w.relative() < 1e-9, "{w:?}");
    }

    #[test]
    fn property_battery_both_chambers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (k, n) in [(1, 2), (2, 3), (2, 4)] {
            let p = params(k, n);
            for mu in FixedPoint::all(k, n) {
                for ch in [Chamber::Plus, Chamber::Minus] {
                    let s = StabSpec::new(mu.clone(), ch, p.clone()).unwrap();
                    let r = stab_checks(&s, &point(k), &mut rng).unwrap();
                    assert!(r.passes(), "k={k} n={n} mu={mu} {ch}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn z_factor_at_fixed_points() {
        let p = params(2, 4);
        for ch in [Chamber::Plus, Chamber::Minus] {
            let s = spec(vec![1, 3], ch, &p);
            let nu = FixedPoint::new(vec![2, 4], 4).unwrap();
            let f = z_quasi_periodicity_factor(&s).eval(&p, &s.fixed_point_coords(&nu));
            let expect = nu.prod_a(&p) / s.mu.prod_a(&p);
            assert!(rel_diff(f, expect) < 1e-14);
        }
    }

    #[test]
    fn near_diagonal_rejected() {
        let p = params(2, 3);
        let s = spec(vec![1, 2], Chamber::Plus, &p);
        let x = [c(0.5, 0.5), c(0.5, 0.5) * p.q * (1.0 + 1e-10)];
        assert!(matches!(
            stab_envelope(&s, &x),
            Err(Error::NearDiagonal { i: 1, j: 2, .. })
        ));
    }
}
