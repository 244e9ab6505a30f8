//! Vertex functions with descendents as contour integrals over the unit torus.
//!
//! The integrand is `rho(x) env(x) Phi(x)` with
//!
//! ```text
//! Phi = prod_{i,j} 1/(phi(a_j/x_i) phi(hbar x_i/a_j))
//!     * prod_{i,j<=k} phi_circle(x_j/x_i)/phi(q x_j/(hbar x_i))
//! ```
//!
//! and the integral carries `1/k!` and the measure `prod dx_i/(2 pi i x_i)`.
//! It is evaluated two ways: as a sum of residues at
//! `x_i = q^{d_i} a_{eta_i}` (chamber `+`, poles inside the torus) or
//! `x_i = q^{-d_i} a_{eta_i}/hbar` (chamber `-`, poles outside), and by the
//! product trapezoidal rule on the torus.
//!
//! A residue is the integrand evaluated at the pole with the vanishing factor
//! removed from the relevant `phi`: for a factor `1 - c/x` the measure
//! `dx/(2 pi i x)` absorbs the derivative exactly, and for poles outside the
//! torus the orientation sign and the sign of `1 - x/c` cancel.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cplx::{ipow, C64};
use crate::error::{Error, Result};
use crate::model::{tangent_block, tangent_character, Chamber, Monomial, Params, VirtualCharacter};
use crate::qseries::QSeries;
use crate::stab::{permutations, stab_envelope, StabSpec};
use crate::sum::ComplexSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MellinConfig {
    /// Largest `|z|` (chamber `+`) or `|1/z|` (chamber `-`) accepted by the residue sum.
    pub z_max: f64,
    pub quadrature_points: usize,
    pub max_degree: usize,
    pub simple_pole_tolerance: f64,
}

impl Default for MellinConfig {
    fn default() -> Self {
        Self {
            z_max: 0.05,
            quadrature_points: 64,
            max_degree: 6,
            simple_pole_tolerance: 1e-10,
        }
    }
}

/// Symmetric Laurent polynomial in `x` with monomial coefficients in `(q, hbar^{1/2}, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Descendent {
    k: usize,
    n: usize,
    terms: BTreeMap<Monomial, C64>,
}

impl Descendent {
    pub fn new<I: IntoIterator<Item = (Monomial, C64)>>(k: usize, n: usize, terms: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.k() != k || m.n() != n {
                return Err(Error::Invalid(format!("monomial {m} has the wrong shape")));
            }
            *map.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| c.norm() != 0.0);
        let d = Self { k, n, terms: map };
        d.check_symmetric()?;
        Ok(d)
    }

    pub fn zero(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(k: usize, n: usize) -> Self {
        Self::constant(k, n, C64::new(1.0, 0.0))
    }

    pub fn constant(k: usize, n: usize, c: C64) -> Self {
        let mut terms = BTreeMap::new();
        if c.norm() != 0.0 {
            terms.insert(Monomial::one(k, n), c);
        }
        Self { k, n, terms }
    }

    /// Elementary symmetric polynomial `e_j(x)`.
    pub fn elementary(j: usize, k: usize, n: usize) -> Result<Self> {
        if j > k {
            return Err(Error::Invalid(format!("e{j} needs j <= k = {k}")));
        }
        let mut terms = BTreeMap::new();
        for subset in subsets(k, j) {
            let mut m = Monomial::one(k, n);
            for i in subset {
                m.e_x[i] = 1;
            }
            terms.insert(m, C64::new(1.0, 0.0));
        }
        Ok(Self { k, n, terms })
    }

    /// `e_j(x)^pow`.
    pub fn elementary_power(j: usize, pow: u32, k: usize, n: usize) -> Result<Self> {
        let e = Self::elementary(j, k, n)?;
        let mut out = Self::one(k, n);
        for _ in 0..pow {
            out = out.mul(&e);
        }
        Ok(out)
    }

    /// Parses `"0"`, `"1"`, `"e<j>"`, `"e<j>^<p>"` and `+`-separated sums of these.
    pub fn parse(s: &str, k: usize, n: usize) -> Result<Self> {
        let mut acc = Self::zero(k, n);
        for atom in s.split('+').map(str::trim) {
            let term = match atom {
                "0" => Self::zero(k, n),
                "1" => Self::one(k, n),
                _ => {
                    let bad = || Error::Invalid(format!("cannot parse descendent {atom:?}"));
                    let rest = atom.strip_prefix('e').ok_or_else(bad)?;
                    let (j, p) = match rest.split_once('^') {
                        Some((j, p)) => (j, p.parse::<u32>().map_err(|_| bad())?),
                        None => (rest, 1),
                    };
                    let j = j.parse::<usize>().map_err(|_| bad())?;
                    if j == 0 {
                        return Err(bad());
                    }
                    Self::elementary_power(j, p, k, n)?
                }
            };
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert(C64::new(0.0, 0.0)) += c;
        }
        terms.retain(|_, c| c.norm() != 0.0);
        Self { terms, ..*self }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect();
        terms.retain(|_, c: &mut C64| c.norm() != 0.0);
        Self { terms, ..*self }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                *terms.entry(m1.mul(m2)).or_insert(C64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        terms.retain(|_, c: &mut C64| c.norm() != 0.0);
        Self { terms, ..*self }
    }

    pub fn eval(&self, p: &Params, x: &[C64]) -> C64 {
        let mut acc = ComplexSum::new();
        for (m, c) in &self.terms {
            acc.add(c * m.eval(p, x));
        }
        acc.value()
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 1..self.k {
            let mut perm: Vec<usize> = (0..self.k).collect();
            perm.swap(i - 1, i);
            for (m, c) in &self.terms {
                let image = m.permute_x(&perm);
                let matched = self
                    .terms
                    .get(&image)
                    .is_some_and(|c2| (c2 - c).norm() <= 1e-12 * c.norm());
                if !matched {
                    return Err(Error::Invalid(format!("descendent is not symmetric: term {m}")));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Descendent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("({}{:+}i)*{}", c.re, c.im, m))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn subsets(k: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, k: usize, j: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for v in start..k {
            cur.push(v);
            rec(v + 1, k, j, cur, out);
            cur.pop();
        }
    }
    rec(0, k, j, &mut cur, &mut out);
    out
}

/// `Gamma' = phi(-q (TX - g + g_hbar)^vee)`.
pub fn gamma_prime(x: &[C64], p: &Params, qs: &QSeries) -> Result<C64> {
    if x.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    let (k, n) = (x.len(), p.n);
    let v = tangent_character(k, n).dual().scale(&Monomial::q(k, n)).neg();
    qs.phi_virtual(&v, p, x)
}

/// The same product written out factor by factor.
pub fn gamma_prime_literal(x: &[C64], p: &Params, qs: &QSeries) -> Result<C64> {
    let q = p.q;
    let mut v = C64::new(1.0, 0.0);
    for &xi in x {
        for &aj in &p.a {
            v /= qs.phi(q * aj / xi)? * qs.phi(q * p.hbar * xi / aj)?;
        }
    }
    for &xi in x {
        for &xj in x {
            v *= qs.phi(q * xj / xi)? / qs.phi(q * xj / (p.hbar * xi))?;
        }
    }
    Ok(v)
}

/// `Gamma = phi(-q T^vee X + q g^vee - g_hbar^vee)`.
pub fn gamma_infty(x: &[C64], p: &Params, qs: &QSeries) -> Result<C64> {
    if x.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    let (k, n) = (x.len(), p.n);
    let qm = Monomial::q(k, n);
    let mut adjoint = Vec::new();
    for i in 0..k {
        for j in 0..k {
            adjoint.push((Monomial::x(i, k, n).mul(&Monomial::x(j, k, n).inv()), 1));
        }
    }
    let g = VirtualCharacter::from_terms(adjoint);
    let g_hbar = g.scale(&Monomial::hbar(k, n));
    let v = tangent_block(k, n)
        .dual()
        .scale(&qm)
        .neg()
        .add(&g.dual().scale(&qm))
        .add(&g_hbar.dual().neg());
    qs.phi_virtual(&v, p, x)
}

/// Which factor of `phi` to drop at a pole, per block of `Phi`.
#[derive(Debug, Clone, PartialEq)]
struct Skips {
    k: usize,
    n: usize,
    /// `phi(a_j/x_i)`, index `i*n + j`.
    a: Vec<Option<usize>>,
    /// `phi(hbar x_i/a_j)`, index `i*n + j`.
    b: Vec<Option<usize>>,
    /// `phi(q x_j/(hbar x_i))`, index `i*k + j`.
    c: Vec<Option<usize>>,
}

impl Skips {
    fn none(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            a: vec![None; k * n],
            b: vec![None; k * n],
            c: vec![None; k * k],
        }
    }

    fn permuted(&self, order: &[usize]) -> Self {
        // variable i of the result is variable order[i] of self
        let (k, n) = (self.k, self.n);
        let mut out = Self::none(k, n);
        for i in 0..k {
            for j in 0..n {
                out.a[i * n + j] = self.a[order[i] * n + j];
                out.b[i * n + j] = self.b[order[i] * n + j];
            }
            for j in 0..k {
                out.c[i * k + j] = self.c[order[i] * k + order[j]];
            }
        }
        out
    }
}

fn phi_opt(qs: &QSeries, x: C64, skip: Option<usize>) -> Result<C64> {
    match skip {
        Some(m) => qs.phi_skip(x, m),
        None => qs.phi(x),
    }
}

fn nonzero(v: C64, what: impl FnOnce() -> String) -> Result<C64> {
    if v.norm() == 0.0 {
        Err(Error::PoleHit(what()))
    } else {
        Ok(v)
    }
}

/// `(Phi_a, Phi_xi)` with the given factors removed.
fn big_phi_parts_skipped(x: &[C64], p: &Params, qs: &QSeries, sk: &Skips) -> Result<(C64, C64)> {
    let (k, n) = (x.len(), p.n);
    let mut phi_a = C64::new(1.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        for j in 0..n {
            let d1 = phi_opt(qs, p.a[j] / xi, sk.a[i * n + j])?;
            let d2 = phi_opt(qs, p.hbar * xi / p.a[j], sk.b[i * n + j])?;
            let d = nonzero(d1 * d2, || format!("Phi_a factor (i={}, j={}) vanishes", i + 1, j + 1))?;
            phi_a /= d;
        }
    }
    let mut phi_xi = C64::new(1.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let d = phi_opt(qs, p.q * x[j] / (p.hbar * x[i]), sk.c[i * k + j])?;
            let d = nonzero(d, || format!("Phi_xi factor (i={}, j={}) vanishes", i + 1, j + 1))?;
            phi_xi *= qs.phi_circle(x[j] / x[i])? / d;
        }
    }
    Ok((phi_a, phi_xi))
}

/// `Phi = Phi_a Phi_xi`.
pub fn big_phi_parts(x: &[C64], p: &Params, qs: &QSeries) -> Result<(C64, C64)> {
    big_phi_parts_skipped(x, p, qs, &Skips::none(x.len(), p.n))
}

pub fn big_phi(x: &[C64], p: &Params, qs: &QSeries) -> Result<C64> {
    let (a, b) = big_phi_parts(x, p, qs)?;
    Ok(a * b)
}

/// `rho(x) env(x) Phi(x)`.
pub fn integrand(rho: &Descendent, s: &StabSpec, x: &[C64]) -> Result<C64> {
    let r = rho.eval(&s.params, x);
    if r.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(r * stab_envelope(s, x)? * big_phi(x, &s.params, &s.qseries)?)
}

/// Poles attached to one equivariant parameter `a_eta`: a single point, or an
/// hbar-shifted tower with strictly increasing degrees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tower {
    /// 1-based.
    pub eta: usize,
    pub degrees: Vec<u32>,
}

/// A pole of the integrand, as a set of towers over distinct `eta`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PoleAssignment {
    towers: Vec<Tower>,
}

impl PoleAssignment {
    pub fn new(mut towers: Vec<Tower>) -> Result<Self> {
        towers.sort();
        for t in &towers {
            if t.eta == 0 || t.degrees.is_empty() || t.degrees.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Invalid(format!("malformed tower {t:?}")));
            }
        }
        if towers.windows(2).any(|w| w[0].eta == w[1].eta) {
            return Err(Error::Invalid("pole towers must have distinct eta".into()));
        }
        Ok(Self { towers })
    }

    /// Pairs `(eta_i, d_i)` with distinct `eta`.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(eta, d)| Tower { eta, degrees: vec![d] }).collect())
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    pub fn is_restricted(&self) -> bool {
        self.towers.iter().all(|t| t.degrees.len() == 1)
    }

    /// `(eta, d)` pairs when every tower has height one.
    pub fn pairs(&self) -> Option<Vec<(usize, u32)>> {
        self.is_restricted()
            .then(|| self.towers.iter().map(|t| (t.eta, t.degrees[0])).collect())
    }

    pub fn k(&self) -> usize {
        self.towers.iter().map(|t| t.degrees.len()).sum()
    }

    pub fn total_degree(&self) -> u32 {
        self.towers.iter().flat_map(|t| t.degrees.iter()).sum()
    }

    /// Pole coordinates, towers in `eta` order and members in tower order.
    ///
    /// Chamber `+`: `q^{d_r} hbar^{-r} a_eta`; chamber `-`: `q^{-d_r} hbar^{r-1} a_eta`.
    pub fn coordinates(&self, p: &Params, chamber: Chamber) -> Vec<C64> {
        let mut x = Vec::with_capacity(self.k());
        for t in &self.towers {
            let a = p.a[t.eta - 1];
            for (r, &d) in t.degrees.iter().enumerate() {
                let r = r as i32;
                x.push(match chamber {
                    Chamber::Plus => ipow(p.q, d as i32) * ipow(p.hbar, -r) * a,
                    Chamber::Minus => ipow(p.q, -(d as i32)) * ipow(p.hbar, r - 1) * a,
                });
            }
        }
        x
    }

    fn skips(&self, k: usize, n: usize, chamber: Chamber) -> Skips {
        let mut sk = Skips::none(k, n);
        let mut i = 0;
        for t in &self.towers {
            let l = t.eta - 1;
            for (r, &d) in t.degrees.iter().enumerate() {
                if r == 0 {
                    match chamber {
                        Chamber::Plus => sk.a[i * n + l] = Some(d as usize),
                        Chamber::Minus => sk.b[i * n + l] = Some(d as usize),
                    }
                } else {
                    let gap = (d - t.degrees[r - 1] - 1) as usize;
                    let (cur, prev) = (i, i - 1);
                    match chamber {
                        Chamber::Plus => sk.c[cur * k + prev] = Some(gap),
                        Chamber::Minus => sk.c[prev * k + cur] = Some(gap),
                    }
                }
                i += 1;
            }
        }
        sk
    }
}

impl fmt::Display for PoleAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .towers
            .iter()
            .map(|t| {
                let d: Vec<String> = t.degrees.iter().map(|d| d.to_string()).collect();
                format!("({},{})", t.eta, d.join("<"))
            })
            .collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn degree_vectors(len: usize, budget: u32, strict: bool) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(len: usize, budget: u32, strict: bool, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        let used: u32 = cur.iter().sum();
        let lo = if strict { cur.last().map_or(0, |d| d + 1) } else { 0 };
        let mut d = lo;
        while used + d <= budget {
            cur.push(d);
            rec(len, budget, strict, cur, out);
            cur.pop();
            d += 1;
        }
    }
    rec(len, budget, strict, &mut cur, &mut out);
    out
}

/// Poles with total degree `<= max_degree`, sorted by total degree and then
/// lexicographically. With `restrict_to_fixed` only height-one towers appear.
pub fn enumerate_poles(k: usize, n: usize, max_degree: u32, restrict_to_fixed: bool) -> Vec<PoleAssignment> {
    let mut out = Vec::new();
    // choose tower heights v_l over l = 1..n with sum k, then degrees
    fn heights(l: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if l == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur.push(v);
            heights(l + 1, n, left - v, cur, out);
            cur.pop();
        }
    }
    let mut hs = Vec::new();
    heights(0, n, k, &mut Vec::new(), &mut hs);
    for h in hs {
        if restrict_to_fixed && h.iter().any(|&v| v > 1) {
            continue;
        }
        let etas: Vec<(usize, usize)> = h
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(l, &v)| (l + 1, v))
            .collect();
        let mut partial: Vec<(Vec<Tower>, u32)> = vec![(Vec::new(), 0)];
        for &(eta, v) in &etas {
            let mut next = Vec::new();
            for (towers, used) in &partial {
                for d in degree_vectors(v, max_degree - used, true) {
                    let s: u32 = d.iter().sum();
                    let mut t = towers.clone();
                    t.push(Tower { eta, degrees: d });
                    next.push((t, used + s));
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(|(t, _)| PoleAssignment { towers: t }));
    }
    out.sort_by(|a, b| (a.total_degree(), a).cmp(&(b.total_degree(), b)));
    out
}

fn residue_ordered(rho: &Descendent, s: &StabSpec, pa: &PoleAssignment, order: &[usize], tol: f64) -> Result<C64> {
    let p = &s.params;
    if pa.k() != p.k || pa.towers.iter().any(|t| t.eta > p.n) {
        return Err(Error::Invalid(format!(
            "pole {pa} does not fit (k,n)=({},{})",
            p.k, p.n
        )));
    }
    let base = pa.coordinates(p, s.chamber);
    for i in 0..base.len() {
        for j in 0..i {
            if (base[i] - base[j]).norm() <= tol * base[i].norm().max(base[j].norm()) {
                return Err(Error::NonSimplePole(format!("{pa}: x_{} = x_{}", j + 1, i + 1)));
            }
        }
    }
    let x: Vec<C64> = order.iter().map(|&i| base[i]).collect();
    let sk = pa.skips(p.k, p.n, s.chamber).permuted(order);
    let r = rho.eval(p, &x);
    if r.norm() == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let env = stab_envelope(s, &x)?;
    if env.norm() == 0.0 {
        return Ok(env);
    }
    let (pa_, px) = big_phi_parts_skipped(&x, p, &s.qseries, &sk)?;
    Ok(r * env * pa_ * px)
}

/// Residue of the integrand at `pa` (unordered: the `1/k!` is absorbed).
pub fn residue_at(rho: &Descendent, s: &StabSpec, pa: &PoleAssignment) -> Result<C64> {
    let order: Vec<usize> = (0..s.params.k).collect();
    residue_ordered(rho, s, pa, &order, MellinConfig::default().simple_pole_tolerance)
}

/// Mean of the residue over all `k!` labellings of the pole coordinates.
pub fn residue_over_orderings(rho: &Descendent, s: &StabSpec, pa: &PoleAssignment) -> Result<C64> {
    let perms = permutations(s.params.k);
    let mut acc = ComplexSum::new();
    for perm in &perms {
        acc.add(residue_ordered(
            rho,
            s,
            pa,
            perm,
            MellinConfig::default().simple_pole_tolerance,
        )?);
    }
    Ok(acc.value() / perms.len() as f64)
}

/// Residue sum grouped by total pole degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeLedger {
    #[serde(with = "crate::cplx::pair_vec")]
    pub contributions: Vec<C64>,
    #[serde(with = "crate::cplx::pair")]
    pub z_point: C64,
    pub truncation: usize,
    pub warnings: Vec<String>,
}

impl DegreeLedger {
    pub fn total(&self) -> C64 {
        let mut acc = ComplexSum::new();
        for c in &self.contributions {
            acc.add(*c);
        }
        acc.value()
    }

    /// `|c_{D+1}/c_D|` for consecutive degrees.
    pub fn decay_ratios(&self) -> Vec<f64> {
        self.contributions
            .windows(2)
            .map(|w| w[1].norm() / w[0].norm())
            .collect()
    }

    pub fn scale(&self) -> f64 {
        self.contributions
            .iter()
            .map(|c| c.norm())
            .fold(self.total().norm(), f64::max)
    }
}

fn check_convergence_region(s: &StabSpec, cfg: &MellinConfig) -> Result<()> {
    let z = s.params.z;
    let (r, what) = match s.chamber {
        Chamber::Plus => (z.norm(), "|z|"),
        Chamber::Minus => (z.inv().norm(), "|1/z|"),
    };
    if r > cfg.z_max {
        return Err(Error::Domain(format!(
            "ConvergenceWarning: {what} = {r:e} exceeds z_max = {}; the residue series is not certified there",
            cfg.z_max
        )));
    }
    Ok(())
}

/// Residue sum over poles of total degree `<= max_degree`.
pub fn vertex_series(rho: &Descendent, s: &StabSpec, max_degree: usize, cfg: &MellinConfig) -> Result<DegreeLedger> {
    vertex_series_with(rho, s, max_degree, true, cfg)
}

/// As [`vertex_series`]; with `restrict_to_fixed = false` the hbar-shifted
/// towers are included as well.
pub fn vertex_series_with(
    rho: &Descendent,
    s: &StabSpec,
    max_degree: usize,
    restrict_to_fixed: bool,
    cfg: &MellinConfig,
) -> Result<DegreeLedger> {
    check_convergence_region(s, cfg)?;
    let poles = enumerate_poles(s.params.k, s.params.n, max_degree as u32, restrict_to_fixed);
    let order: Vec<usize> = (0..s.params.k).collect();
    let values: Vec<C64> = poles
        .par_iter()
        .map(|pa| residue_ordered(rho, s, pa, &order, cfg.simple_pole_tolerance))
        .collect::<Result<_>>()?;
    let mut sums = vec![ComplexSum::new(); max_degree + 1];
    for (pa, v) in poles.iter().zip(values) {
        sums[pa.total_degree() as usize].add(v);
    }
    let contributions: Vec<C64> = sums.iter().map(|s| s.value()).collect();
    let mut warnings = Vec::new();
    if max_degree >= 1 {
        let (last, prev) = (contributions[max_degree].norm(), contributions[max_degree - 1].norm());
        if last >= prev && last > 0.0 {
            warnings.push(format!(
                "ConvergenceWarning: |c_{max_degree}| = {last:e} >= |c_{}| = {prev:e}",
                max_degree - 1
            ));
        }
    }
    Ok(DegreeLedger {
        contributions,
        z_point: s.params.z,
        truncation: max_degree,
        warnings,
    })
}

/// Product trapezoidal rule for `(1/k!) int_{|x_i|=1} rho env Phi prod dx_i/(2 pi i x_i)`.
///
/// Variable `i` (1-based) is sampled at `exp(2 pi i (m/N + i/(7k)))`. Rows of
/// the grid (fixed first index) are evaluated in parallel and reduced in
/// row-major order, so the result does not depend on the thread count.
pub fn quadrature_oracle(rho: &Descendent, s: &StabSpec, points: usize) -> Result<C64> {
    if points < 32 {
        return Err(Error::Invalid(format!("quadrature needs N >= 32, got {points}")));
    }
    let k = s.params.k;
    if rho.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    let tau = std::f64::consts::TAU;
    let angle = |i: usize, m: usize| tau * (m as f64 / points as f64 + (i + 1) as f64 / (7 * k) as f64);
    let inner = points.pow((k - 1) as u32);
    let rows: Vec<C64> = (0..points)
        .into_par_iter()
        .map(|m0| {
            let mut acc = ComplexSum::new();
            let mut x = vec![C64::new(0.0, 0.0); k];
            x[0] = C64::from_polar(1.0, angle(0, m0));
            for flat in 0..inner {
                let mut rest = flat;
                for i in (1..k).rev() {
                    x[i] = C64::from_polar(1.0, angle(i, rest % points));
                    rest /= points;
                }
                acc.add(integrand(rho, s, &x)?);
            }
            Ok(acc.value())
        })
        .collect::<Result<_>>()?;
    let mut total = ComplexSum::new();
    for r in rows {
        total.add(r);
    }
    let norm = (points as f64).powi(k as i32) * (1..=k).product::<usize>() as f64;
    Ok(total.value() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::{c, rel_diff};
    use crate::model::FixedPoint;

    fn params(k: usize, n: usize, z: C64) -> Params {
        let a = [c(0.55, 0.3), c(-0.45, 0.5), c(0.1, -0.65), c(-0.5, -0.35)];
        Params::new(c(0.12, 0.04), c(0.3, -0.1), a[..n].to_vec(), z, k)
            .validate()
            .unwrap()
    }

    fn spec(mu: Vec<usize>, ch: Chamber, p: &Params) -> StabSpec {
        StabSpec::new(FixedPoint::new(mu, p.n).unwrap(), ch, p.clone()).unwrap()
    }

    #[test]
    fn descendent_constructors() {
        let e1 = Descendent::parse("e1", 2, 3).unwrap();
        assert_eq!(e1.terms().count(), 2);
        let sq = Descendent::parse("e1^2", 2, 3).unwrap();
        let p = params(2, 3, c(0.01, 0.0));
        let x = [c(0.3, 0.2), c(-0.7, 0.1)];
        let s = x[0] + x[1];
        assert!(rel_diff(sq.eval(&p, &x), s * s) < 1e-15);
        assert!(Descendent::parse("1", 2, 3).unwrap().eval(&p, &x) == c(1.0, 0.0));
        assert!(Descendent::parse("0", 2, 3).unwrap().is_zero());
        assert!(Descendent::parse("e3", 2, 3).is_err());
        assert!(Descendent::parse("f1", 2, 3).is_err());
        let sum = Descendent::parse("1 + e2", 2, 3).unwrap();
        assert!(rel_diff(sum.eval(&p, &x), 1.0 + x[0] * x[1]) < 1e-15);
    }

    #[test]
    fn descendent_rejects_asymmetric() {
        let m = Monomial::x(0, 2, 3);
        assert!(Descendent::new(2, 3, [(m, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn gamma_prime_two_routes() {
        for k in 0..=2 {
            let p = params(k.max(1), 3, c(0.01, 0.0));
            let qs = QSeries::for_params(&p);
            let x = [c(0.8, 0.3), c(-0.4, 0.9)][..k].to_vec();
            let a = gamma_prime(&x, &p, &qs).unwrap();
            let b = gamma_prime_literal(&x, &p, &qs).unwrap();
            assert!(rel_diff(a, b) < 1e-12, "k={k}");
        }
        let p = params(1, 3, c(0.01, 0.0));
        assert_eq!(gamma_prime(&[], &p, &QSeries::for_params(&p)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn gamma_prime_diagonal_factor() {
        let p = params(2, 2, c(0.01, 0.0));
        let qs = QSeries::for_params(&p);
        let x = [c(0.8, 0.3), c(-0.4, 0.9)];
        let mut offdiag = C64::new(1.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    offdiag *= qs.phi(p.q * x[j] / x[i]).unwrap() / qs.phi(p.q * x[j] / (p.hbar * x[i])).unwrap();
                }
            }
        }
        let mut ab = C64::new(1.0, 0.0);
        for xi in x {
            for aj in &p.a {
                ab /= qs.phi(p.q * aj / xi).unwrap() * qs.phi(p.q * p.hbar * xi / aj).unwrap();
            }
        }
        let diag = ipow(qs.phi(p.q).unwrap() / qs.phi(p.q / p.hbar).unwrap(), 2);
        assert!(rel_diff(gamma_prime(&x, &p, &qs).unwrap(), ab * offdiag * diag) < 1e-12);
    }

    #[test]
    fn gamma_infty_relations() {
        let p = params(2, 3, c(0.01, 0.0));
        let qs = QSeries::for_params(&p);
        let x = [c(0.8, 0.3), c(-0.4, 0.9)];
        let ratio = gamma_infty(&x, &p, &qs).unwrap() / gamma_prime(&x, &p, &qs).unwrap();
        let mut expect = C64::new(1.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                expect /= 1.0 - x[i] / (p.hbar * x[j]);
            }
        }
        assert!(rel_diff(ratio, expect) < 1e-12);
        // k = 1 instantiation
        let p1 = params(1, 3, c(0.01, 0.0));
        let x1 = [c(0.6, -0.5)];
        let mut lit = qs.phi(p1.q).unwrap() / qs.phi(p1.hbar.inv()).unwrap();
        for aj in &p1.a {
            lit /= qs.phi(p1.q * aj / x1[0]).unwrap() * qs.phi(p1.q * p1.hbar * x1[0] / aj).unwrap();
        }
        assert!(rel_diff(gamma_infty(&x1, &p1, &qs).unwrap(), lit) < 1e-12);
        assert_eq!(gamma_infty(&[], &p1, &qs).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn big_phi_structure() {
        let p = params(1, 2, c(0.01, 0.0));
        let qs = QSeries::for_params(&p);
        let x = [c(0.7, 0.5)];
        let mut expect = qs.phi(p.q).unwrap() / qs.phi(p.q / p.hbar).unwrap();
        for aj in &p.a {
            expect /= qs.phi(aj / x[0]).unwrap() * qs.phi(p.hbar * x[0] / aj).unwrap();
        }
        assert!(rel_diff(big_phi(&x, &p, &qs).unwrap(), expect) < 1e-13);

        // Vandermonde factor sits inside phi_circle for i != j
        let p2 = params(2, 2, c(0.01, 0.0));
        let x2 = [c(0.7, 0.5), c(-0.2, 0.9)];
        let (_, xi) = big_phi_parts(&x2, &p2, &qs).unwrap();
        let mut stripped = ipow(qs.phi(p2.q).unwrap() / qs.phi(p2.q / p2.hbar).unwrap(), 2);
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    let w = x2[j] / x2[i];
                    stripped *= (1.0 - w) * qs.phi(p2.q * w).unwrap() / qs.phi(p2.q * w / p2.hbar).unwrap();
                }
            }
        }
        assert!(rel_diff(xi, stripped) < 1e-13);

        // relation to Gamma'
        let ratio = big_phi(&x2, &p2, &qs).unwrap() / gamma_prime(&x2, &p2, &qs).unwrap();
        let mut expect = C64::new(1.0, 0.0);
        for xi in x2 {
            for aj in &p2.a {
                expect /= (1.0 - aj / xi) * (1.0 - p2.hbar * xi / aj);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                if i != j {
                    expect *= 1.0 - x2[j] / x2[i];
                }
            }
        }
        assert!(rel_diff(ratio, expect) < 1e-12);
    }

    #[test]
    fn enumeration_counts() {
        let p = enumerate_poles(1, 2, 1, true);
        let pairs: Vec<_> = p.iter().map(|a| a.pairs().unwrap()).collect();
        assert_eq!(pairs, vec![vec![(1, 0)], vec![(2, 0)], vec![(1, 1)], vec![(2, 1)]]);
        assert_eq!(enumerate_poles(2, 2, 0, true).len(), 1);
        assert_eq!(enumerate_poles(2, 2, 0, true)[0].pairs().unwrap(), vec![(1, 0), (2, 0)]);
        let binom = |a: usize, b: usize| (0..b).fold(1usize, |acc, i| acc * (a - i) / (i + 1));
        for (k, n, d) in [(1, 3, 4), (2, 3, 3), (2, 4, 5), (3, 4, 2)] {
            assert_eq!(
                enumerate_poles(k, n, d, true).len(),
                binom(n, k) * binom(d as usize + k, k)
            );
        }
        let all = enumerate_poles(2, 3, 3, false);
        assert!(all.iter().any(|pa| !pa.is_restricted()));
        // towers need d_1 < d_2, so at degree 3 there are (0,1),(0,2),(0,3),(1,2) per eta
        assert_eq!(all.len() - enumerate_poles(2, 3, 3, true).len(), 3 * 4);
    }

    #[test]
    fn residue_hand_example() {
        let p = params(1, 1, c(0.013, 0.006));
        let qs = QSeries::for_params(&p);
        let s = spec(vec![1], Chamber::Plus, &p);
        let rho = Descendent::parse("e1", 1, 1).unwrap();
        let pa = PoleAssignment::from_pairs(&[(1, 0)]).unwrap();
        let f = crate::stab::f_building_block(1, p.a[0], p.z, &p, &qs).unwrap();
        let expect = p.a[0] * f / (qs.phi(p.hbar).unwrap() * qs.phi(p.q / p.hbar).unwrap());
        assert!(rel_diff(residue_at(&rho, &s, &pa).unwrap(), expect) < 1e-13);
    }

    #[test]
    fn ordered_vs_unordered() {
        let p = params(2, 3, c(0.013, 0.006));
        let s = spec(vec![1, 3], Chamber::Plus, &p);
        let rho = Descendent::parse("e1", 2, 3).unwrap();
        for pa in enumerate_poles(2, 3, 2, true) {
            let a = residue_at(&rho, &s, &pa).unwrap();
            let b = residue_over_orderings(&rho, &s, &pa).unwrap();
            assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-300), "{pa}");
        }
    }

    #[test]
    fn towers_do_not_contribute() {
        let p = params(2, 3, c(0.013, 0.006));
        let rho = Descendent::one(2, 3);
        for ch in [Chamber::Plus, Chamber::Minus] {
            let s = spec(vec![2, 3], ch, &p);
            for pa in enumerate_poles(2, 3, 3, false)
                .into_iter()
                .filter(|pa| !pa.is_restricted())
            {
                assert_eq!(residue_at(&rho, &s, &pa).unwrap(), c(0.0, 0.0), "{pa}");
            }
        }
    }

    #[test]
    fn non_simple_pole_detected() {
        let mut p = params(2, 2, c(0.013, 0.006));
        // a_2 = q a_1 is excluded by validation; build it directly to probe the guard
        p.a[1] = p.a[0] * p.q;
        let s = StabSpec::new(FixedPoint::new(vec![1, 2], 2).unwrap(), Chamber::Plus, p).unwrap();
        let pa = PoleAssignment::from_pairs(&[(1, 1), (2, 0)]).unwrap();
        assert!(matches!(
            residue_at(&Descendent::one(2, 2), &s, &pa),
            Err(Error::NonSimplePole(_))
        ));
    }

    #[test]
    fn k1_series_matches_quadrature() {
        let p = params(1, 2, c(0.012, 0.016));
        let s = spec(vec![2], Chamber::Plus, &p);
        let rho = Descendent::one(1, 2);
        let led = vertex_series(&rho, &s, 6, &MellinConfig::default()).unwrap();
        let quad = quadrature_oracle(&rho, &s, 96).unwrap();
        assert!(rel_diff(led.total(), quad) < 1e-8, "{} vs {}", led.total(), quad);
        assert!(led.warnings.is_empty());
    }

    #[test]
    fn quadrature_self_convergence_and_zero() {
        let p = params(1, 1, c(0.012, 0.016));
        let s = spec(vec![1], Chamber::Plus, &p);
        let rho = Descendent::one(1, 1);
        let a = quadrature_oracle(&rho, &s, 64).unwrap();
        let b = quadrature_oracle(&rho, &s, 128).unwrap();
        assert!(rel_diff(a, b) < 1e-12);
        assert_eq!(quadrature_oracle(&Descendent::zero(1, 1), &s, 64).unwrap(), c(0.0, 0.0));
        assert!(quadrature_oracle(&rho, &s, 16).is_err());
    }

    #[test]
    fn chamber_minus_series_matches_quadrature() {
        let z = C64::from_polar(40.0, 0.7);
        let p = params(2, 3, z);
        let s = spec(vec![1, 2], Chamber::Minus, &p);
        let rho = Descendent::parse("e1", 2, 3).unwrap();
        let led = vertex_series(&rho, &s, 6, &MellinConfig::default()).unwrap();
        let quad = quadrature_oracle(&rho, &s, 64).unwrap();
        assert!(rel_diff(led.total(), quad) < 1e-6, "{} vs {}", led.total(), quad);
    }

    #[test]
    fn convergence_guard() {
        let p = params(1, 2, c(0.2, 0.0));
        let s = spec(vec![1], Chamber::Plus, &p);
        assert!(matches!(
            vertex_series(&Descendent::one(1, 2), &s, 3, &MellinConfig::default()),
            Err(Error::Domain(_))
        ));
    }
}
