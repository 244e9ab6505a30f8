//! Parameter point, weight bookkeeping and automorphy constants for
//! T*Gr(k,n) presented as `Hom(W,V) + hbar^{-1} Hom(V,W)` modulo `GL(V)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cplx::{ipow, C64};
use crate::error::{Error, Result};
use crate::qseries::in_q_lattice;

/// Numeric ambient point `(q, hbar, hbar^{1/2}, a_1..a_n, z)` for fixed `(k, n)`.
///
/// `hbar_sqrt` is an independent field: the branch of the square root is part
/// of the input and is never recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    pub n: usize,
    #[serde(with = "crate::cplx::pair")]
    pub q: C64,
    #[serde(with = "crate::cplx::pair")]
    pub hbar: C64,
    #[serde(with = "crate::cplx::pair")]
    pub hbar_sqrt: C64,
    #[serde(with = "crate::cplx::pair_vec")]
    pub a: Vec<C64>,
    #[serde(with = "crate::cplx::pair")]
    pub z: C64,
}

/// Knobs for [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    /// Exponent window `|m| <= window` scanned for `q^Z` membership.
    pub genericity_window: i32,
    /// Relative tolerance of the lattice-membership test.
    pub tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            genericity_window: 64,
            tolerance: 1e-10,
        }
    }
}

impl Params {
    /// Builds a point with `hbar_sqrt` taken on the principal branch.
    pub fn new(q: C64, hbar: C64, a: Vec<C64>, z: C64, k: usize) -> Self {
        let n = a.len();
        Self {
            k,
            n,
            q,
            hbar,
            hbar_sqrt: hbar.sqrt(),
            a,
            z,
        }
    }

    pub fn with_z(&self, z: C64) -> Self {
        Self { z, ..self.clone() }
    }

    pub fn with_a(&self, a: Vec<C64>) -> Self {
        Self { a, ..self.clone() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    /// `hbar^{e/2}` on the fixed branch.
    pub fn hbar_half_pow(&self, e: i32) -> C64 {
        ipow(self.hbar_sqrt, e)
    }

    /// `c_m = (-1)^n hbar^{m - n/2}`, `1 <= m <= n`.
    pub fn c_m(&self, m: usize) -> C64 {
        let sign = if self.n.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.hbar_half_pow(2 * m as i32 - self.n as i32) * sign
    }

    pub fn prod_a(&self) -> C64 {
        self.a.iter().product()
    }

    pub fn validate(self) -> Result<Self> {
        validate_params_with(self, &ValidationConfig::default())
    }
}

/// Returns `p` when every invariant of [`Params`] holds.
pub fn validate_params(p: Params) -> Result<Params> {
    validate_params_with(p, &ValidationConfig::default())
}

pub fn validate_params_with(p: Params, cfg: &ValidationConfig) -> Result<Params> {
    if p.k == 0 || p.n == 0 || p.k > p.n {
        return Err(Error::Domain(format!("need 1 <= k <= n, got k={}, n={}", p.k, p.n)));
    }
    if p.a.len() != p.n {
        return Err(Error::Domain(format!(
            "expected {} equivariant parameters, got {}",
            p.n,
            p.a.len()
        )));
    }
    let all = [p.q, p.hbar, p.hbar_sqrt, p.z].into_iter().chain(p.a.iter().copied());
    for v in all {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Domain("non-finite parameter".into()));
        }
    }
    if p.q.norm() == 0.0 {
        return Err(Error::Domain("q must be nonzero".into()));
    }
    if p.q.norm() >= p.hbar.norm() {
        return Err(Error::Domain(format!(
            "|q| < |hbar| violated: |q|={}, |hbar|={}",
            p.q.norm(),
            p.hbar.norm()
        )));
    }
    for (j, aj) in p.a.iter().enumerate() {
        if p.hbar.norm() >= aj.norm() {
            return Err(Error::Domain(format!(
                "|hbar| < |a_{}| violated: |hbar|={}, |a_{}|={}",
                j + 1,
                p.hbar.norm(),
                j + 1,
                aj.norm()
            )));
        }
        if aj.norm() >= 1.0 {
            return Err(Error::Domain(format!(
                "|a_{}| < 1 violated: |a_{}|={}",
                j + 1,
                j + 1,
                aj.norm()
            )));
        }
    }
    let sq = p.hbar_sqrt * p.hbar_sqrt;
    if (sq - p.hbar).norm() > 1e-14 * p.hbar.norm() {
        return Err(Error::Domain(format!(
            "hbar_sqrt^2 != hbar (relative mismatch {:e})",
            (sq - p.hbar).norm() / p.hbar.norm()
        )));
    }
    for i in 0..p.n {
        for j in 0..p.n {
            if i == j {
                continue;
            }
            let r = p.a[i] / p.a[j];
            for (shift, label) in [
                (C64::new(1.0, 0.0), "q^Z"),
                (p.hbar, "hbar q^Z"),
                (p.hbar.inv(), "hbar^-1 q^Z"),
            ] {
                if let Some(m) = in_q_lattice(r / shift, p.q, cfg.genericity_window, cfg.tolerance) {
                    return Err(Error::Domain(format!(
                        "non-generic equivariant parameters: a_{}/a_{} in {} (m={})",
                        i + 1,
                        j + 1,
                        label,
                        m
                    )));
                }
            }
        }
    }
    for m in 1..=p.n {
        let cm = p.c_m(m);
        if let Some(e) = in_q_lattice(p.z / cm, p.q, cfg.genericity_window, cfg.tolerance) {
            return Err(Error::Resonance(format!("z = c_{} q^{} is resonant", m, e)));
        }
    }
    Ok(p)
}

/// Laurent monomial `q^{e_q} hbar^{e_hbar_half/2} a^{e_a} x^{e_x}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub e_q: i32,
    /// Exponent of `hbar^{1/2}`.
    pub e_hbar_half: i32,
    pub e_a: Vec<i32>,
    pub e_x: Vec<i32>,
}

impl Monomial {
    pub fn one(k: usize, n: usize) -> Self {
        Self {
            e_q: 0,
            e_hbar_half: 0,
            e_a: vec![0; n],
            e_x: vec![0; k],
        }
    }

    pub fn x(i: usize, k: usize, n: usize) -> Self {
        let mut m = Self::one(k, n);
        m.e_x[i] = 1;
        m
    }

    pub fn a(j: usize, k: usize, n: usize) -> Self {
        let mut m = Self::one(k, n);
        m.e_a[j] = 1;
        m
    }

    pub fn hbar(k: usize, n: usize) -> Self {
        let mut m = Self::one(k, n);
        m.e_hbar_half = 2;
        m
    }

    pub fn q(k: usize, n: usize) -> Self {
        let mut m = Self::one(k, n);
        m.e_q = 1;
        m
    }

    pub fn k(&self) -> usize {
        self.e_x.len()
    }

    pub fn n(&self) -> usize {
        self.e_a.len()
    }

    pub fn is_one(&self) -> bool {
        self.e_q == 0 && self.e_hbar_half == 0 && self.e_a.iter().all(|&e| e == 0) && self.e_x.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.k(), other.k());
        assert_eq!(self.n(), other.n());
        Monomial {
            e_q: self.e_q + other.e_q,
            e_hbar_half: self.e_hbar_half + other.e_hbar_half,
            e_a: self.e_a.iter().zip(&other.e_a).map(|(a, b)| a + b).collect(),
            e_x: self.e_x.iter().zip(&other.e_x).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn inv(&self) -> Monomial {
        Monomial {
            e_q: -self.e_q,
            e_hbar_half: -self.e_hbar_half,
            e_a: self.e_a.iter().map(|e| -e).collect(),
            e_x: self.e_x.iter().map(|e| -e).collect(),
        }
    }

    pub fn pow(&self, e: i32) -> Monomial {
        Monomial {
            e_q: self.e_q * e,
            e_hbar_half: self.e_hbar_half * e,
            e_a: self.e_a.iter().map(|v| v * e).collect(),
            e_x: self.e_x.iter().map(|v| v * e).collect(),
        }
    }

    /// Relabels the x-slots: slot `i` of the result carries slot `perm[i]` of `self`.
    pub fn permute_x(&self, perm: &[usize]) -> Monomial {
        let mut out = self.clone();
        for (i, &src) in perm.iter().enumerate() {
            out.e_x[i] = self.e_x[src];
        }
        out
    }

    pub fn eval(&self, p: &Params, x: &[C64]) -> C64 {
        assert_eq!(x.len(), self.k(), "x has the wrong length");
        assert_eq!(p.a.len(), self.n(), "params have the wrong n");
        let mut v = ipow(p.q, self.e_q) * p.hbar_half_pow(self.e_hbar_half);
        for (aj, &e) in p.a.iter().zip(&self.e_a) {
            v *= ipow(*aj, e);
        }
        for (xi, &e) in x.iter().zip(&self.e_x) {
            v *= ipow(*xi, e);
        }
        v
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.e_q != 0 {
            parts.push(format!("q^{}", self.e_q));
        }
        if self.e_hbar_half != 0 {
            if self.e_hbar_half % 2 == 0 {
                parts.push(format!("hbar^{}", self.e_hbar_half / 2));
            } else {
                parts.push(format!("hbar^({}/2)", self.e_hbar_half));
            }
        }
        for (j, &e) in self.e_a.iter().enumerate() {
            if e != 0 {
                parts.push(format!("a{}^{}", j + 1, e));
            }
        }
        for (i, &e) in self.e_x.iter().enumerate() {
            if e != 0 {
                parts.push(format!("x{}^{}", i + 1, e));
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Signed multiset of monomials, kept in canonical (merged, sorted) form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VirtualCharacter {
    terms: Vec<(Monomial, i64)>,
}

impl VirtualCharacter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, i64)>>(terms: I) -> Self {
        let mut merged: BTreeMap<Monomial, i64> = BTreeMap::new();
        for (m, mult) in terms {
            *merged.entry(m).or_insert(0) += mult;
        }
        Self {
            terms: merged.into_iter().filter(|(_, c)| *c != 0).collect(),
        }
    }

    pub fn terms(&self) -> &[(Monomial, i64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of multiplicities (virtual rank).
    pub fn rank(&self) -> i64 {
        self.terms.iter().map(|(_, c)| c).sum()
    }

    pub fn add(&self, other: &VirtualCharacter) -> Self {
        Self::from_terms(self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn neg(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), -c)))
    }

    /// Dual class: every weight inverted.
    pub fn dual(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.inv(), *c)))
    }

    /// Tensor product with a single monomial.
    pub fn scale(&self, w: &Monomial) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.mul(w), *c)))
    }

    /// Applies `f` to every weight, keeping multiplicities.
    pub fn map_weights<F: Fn(&Monomial) -> Monomial>(&self, f: F) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (f(m), *c)))
    }
}

/// Strictly increasing k-subset of `{1..n}` labelling a torus-fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FixedPoint(Vec<usize>);

impl FixedPoint {
    pub fn new(mu: Vec<usize>, n: usize) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::Invalid("fixed point must be nonempty".into()));
        }
        if mu[0] < 1 || *mu.last().unwrap() > n || mu.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "fixed point {:?} is not strictly increasing within 1..={}",
                mu, n
            )));
        }
        Ok(Self(mu))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// All k-subsets of `{1..n}` in lexicographic order.
    pub fn all(k: usize, n: usize) -> Vec<FixedPoint> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<FixedPoint>) {
            if cur.len() == k {
                out.push(FixedPoint(cur.clone()));
                return;
            }
            for v in start..=n {
                if n - v + 1 < k - cur.len() {
                    break;
                }
                cur.push(v);
                rec(v + 1, k, n, cur, out);
                cur.pop();
            }
        }
        rec(1, k, n, &mut cur, &mut out);
        out
    }

    /// `prod_i a_{mu_i}`.
    pub fn prod_a(&self, p: &Params) -> C64 {
        self.0.iter().map(|&m| p.a[m - 1]).product()
    }
}

impl TryFrom<Vec<usize>> for FixedPoint {
    type Error = String;
    fn try_from(v: Vec<usize>) -> std::result::Result<Self, String> {
        if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("invalid fixed point {:?}", v));
        }
        Ok(Self(v))
    }
}

impl From<FixedPoint> for Vec<usize> {
    fn from(f: FixedPoint) -> Self {
        f.0
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// Choice of stability parameter `L_+` (A surjective) or `L_-` (B injective).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chamber {
    Plus,
    Minus,
}

impl Chamber {
    pub fn opposite(self) -> Self {
        match self {
            Chamber::Plus => Chamber::Minus,
            Chamber::Minus => Chamber::Plus,
        }
    }
}

impl std::str::FromStr for Chamber {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" | "p" => Ok(Chamber::Plus),
            "-" | "minus" | "m" => Ok(Chamber::Minus),
            other => Err(Error::Invalid(format!("unknown chamber {:?}", other))),
        }
    }
}

impl fmt::Display for Chamber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chamber::Plus => "plus",
            Chamber::Minus => "minus",
        })
    }
}

/// The `T X` block alone: `sum x_i/a_j + sum a_j/(hbar x_i)`.
pub fn tangent_block(k: usize, n: usize) -> VirtualCharacter {
    let mut terms = Vec::with_capacity(2 * k * n);
    for i in 0..k {
        for j in 0..n {
            let xa = Monomial::x(i, k, n).mul(&Monomial::a(j, k, n).inv());
            let ahx = xa.inv().mul(&Monomial::hbar(k, n).inv());
            terms.push((xa, 1));
            terms.push((ahx, 1));
        }
    }
    VirtualCharacter::from_terms(terms)
}

/// `TX - g + g_hbar = sum x_i/a_j + sum a_j/(hbar x_i) - sum x_i/x_j + hbar sum x_i/x_j`.
pub fn tangent_character(k: usize, n: usize) -> VirtualCharacter {
    let mut terms = tangent_block(k, n).terms().to_vec();
    for i in 0..k {
        for j in 0..k {
            let xx = Monomial::x(i, k, n).mul(&Monomial::x(j, k, n).inv());
            terms.push((xx.clone(), -1));
            terms.push((xx.mul(&Monomial::hbar(k, n)), 1));
        }
    }
    VirtualCharacter::from_terms(terms)
}

/// `||(xi, alpha)||^2 = sum_{i,j} (xi_i - alpha_j)^2` for the polarization `Hom(W,V)`.
pub fn polarization_form(xi: &[i64], alpha: &[i64]) -> i64 {
    xi.iter()
        .flat_map(|x| alpha.iter().map(move |a| (x - a) * (x - a)))
        .sum()
}

/// `<sigma, det T^{1/2}> = sum_{i,j} (xi_i - alpha_j)`.
pub fn det_pairing(xi: &[i64], alpha: &[i64]) -> i64 {
    xi.iter().flat_map(|x| alpha.iter().map(move |a| x - a)).sum()
}

/// `sigma^vee = prod_{i,j} (x_i/a_j)^{xi_i - alpha_j}` for a general cocharacter.
pub fn cocharacter_dual(xi: &[i64], alpha: &[i64]) -> Monomial {
    let (k, n) = (xi.len(), alpha.len());
    let mut m = Monomial::one(k, n);
    for (i, x) in xi.iter().enumerate() {
        for (j, a) in alpha.iter().enumerate() {
            let e = (x - a) as i32;
            m.e_x[i] += e;
            m.e_a[j] -= e;
        }
    }
    m
}

/// Unit cocharacter `sigma_l = (0,..,1,..,0)` in `Lie(T_G)`, `1 <= l <= k`.
pub fn sigma_l(l: usize, k: usize) -> Vec<i64> {
    assert!((1..=k).contains(&l), "l out of range");
    let mut xi = vec![0; k];
    xi[l - 1] = 1;
    xi
}

/// `sigma_l^vee = x_l^n prod a_i^{-1}`.
pub fn sigma_dual(l: usize, k: usize, n: usize) -> Monomial {
    cocharacter_dual(&sigma_l(l, k), &vec![0; n])
}

/// Automorphy constant `c_sigma` from `c^{-1} = q^{b2} (hbar^{1/2} q^{1/2})^{b1} sigma^vee`,
/// with `b1 = <sigma, det T^{1/2}>` and `b2 = ||sigma||^2 / 2`, evaluated at `x`.
pub fn automorphy_constant(xi: &[i64], alpha: &[i64], p: &Params, x: &[C64]) -> Result<C64> {
    let b1 = det_pairing(xi, alpha);
    let two_b2 = polarization_form(xi, alpha);
    let q_half_units = two_b2 + b1;
    if q_half_units % 2 != 0 {
        return Err(Error::Invalid(
            "cocharacter needs q^{1/2}, which is not part of the parameter point".into(),
        ));
    }
    let dual = cocharacter_dual(xi, alpha).eval(p, x);
    let inv = ipow(p.q, (q_half_units / 2) as i32) * p.hbar_half_pow(b1 as i32) * dual;
    Ok(inv.inv())
}

/// `c_{sigma_l}` at the point `x`; equals `q^{-n} hbar^{-n/2} (sigma_l^vee)^{-1}`.
pub fn c_sigma(l: usize, p: &Params, x: &[C64]) -> C64 {
    automorphy_constant(&sigma_l(l, p.k), &vec![0; p.n], p, x).expect("sigma_l has integral q-exponent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::c;

    fn base() -> Params {
        Params::new(
            c(0.05, 0.0),
            c(0.2, 0.0),
            vec![c(0.5, 0.0), c(0.7, 0.0)],
            c(0.013, 0.004),
            1,
        )
    }

    #[test]
    fn accepts_admissible_point() {
        validate_params(base()).unwrap();
    }

    #[test]
    fn rejects_q_above_hbar() {
        let mut p = base();
        p.q = c(0.3, 0.0);
        let err = validate_params(p).unwrap_err();
        assert!(
            matches!(err, Error::Domain(ref s) if s.contains("|q| < |hbar|")),
            "{err}"
        );
    }

    #[test]
    fn rejects_resonant_z() {
        // n = 2: c_1 = (-1)^2 hbar^{1-1} = 1
        let p = base().with_z(c(1.0, 0.0));
        assert_eq!(p.c_m(1), c(1.0, 0.0));
        assert!(matches!(validate_params(p), Err(Error::Resonance(_))));
        // any q-shift of c_2 = hbar
        let p = base().with_z(c(0.2 * 0.05 * 0.05, 0.0));
        assert!(matches!(validate_params(p), Err(Error::Resonance(_))));
    }

    #[test]
    fn rejects_bad_sqrt_and_sizes() {
        let mut p = base();
        p.hbar_sqrt = -p.hbar_sqrt;
        assert!(validate_params(p).is_ok(), "either branch is allowed");
        let mut p = base();
        p.hbar_sqrt *= 1.0 + 1e-10;
        assert!(validate_params(p).is_err());
        let mut p = base();
        p.k = 3;
        assert!(validate_params(p).is_err());
        let mut p = base();
        p.a.push(c(0.8, 0.0));
        assert!(validate_params(p).is_err());
    }

    #[test]
    fn rejects_non_generic_a() {
        // a_2/a_1 = hbar^{-1} q
        let p = Params::new(
            c(0.3, 0.0),
            c(0.35, 0.0),
            vec![c(0.9, 0.0), c(0.9 * 0.3 / 0.35, 0.0)],
            c(0.01, 0.0),
            1,
        );
        assert!(matches!(validate_params(p), Err(Error::Domain(ref s)) if s.contains("non-generic")));
        let p = base().with_a(vec![c(0.5, 0.0), c(0.5, 0.0)]);
        assert!(validate_params(p).is_err());
    }

    #[test]
    fn json_round_trip_and_shape() {
        let p = base();
        let s = p.to_json();
        assert!(s.contains("\"q\":[0.05,0.0]"));
        assert_eq!(Params::from_json(&s).unwrap(), p);
        assert!(Params::from_json(
            r#"{"k":1,"n":1,"q":[0.1],"hbar":[0.2,0],"hbar_sqrt":[0.4,0],"a":[[0.5,0]],"z":[0.01,0]}"#
        )
        .is_err());
    }

    #[test]
    fn tangent_character_small_cases() {
        let t = tangent_character(1, 1);
        assert_eq!(t.terms().len(), 4);
        let one = Monomial::one(1, 1);
        let find = |m: &Monomial| t.terms().iter().find(|(w, _)| w == m).map(|(_, c)| *c);
        assert_eq!(find(&one), Some(-1));
        assert_eq!(find(&Monomial::hbar(1, 1)), Some(1));
        let xa = Monomial::x(0, 1, 1).mul(&Monomial::a(0, 1, 1).inv());
        assert_eq!(find(&xa), Some(1));
        assert_eq!(find(&xa.inv().mul(&Monomial::hbar(1, 1).inv())), Some(1));

        // k=2, n=1: 2 + 2 - 4 + 4 terms, no cancellation between blocks
        let t = tangent_character(2, 1);
        let pos: i64 = t.terms().iter().filter(|(_, c)| *c > 0).map(|(_, c)| c).sum();
        let neg: i64 = t.terms().iter().filter(|(_, c)| *c < 0).map(|(_, c)| c).sum();
        assert_eq!((pos, neg), (8, -4));
    }

    #[test]
    fn tangent_character_rank_is_2kn() {
        for k in 1..=3 {
            for n in k..=4 {
                assert_eq!(tangent_character(k, n).rank(), 2 * (k * n) as i64);
            }
        }
    }

    #[test]
    fn tangent_block_self_dual_up_to_hbar() {
        for (k, n) in [(1, 1), (2, 3), (3, 4)] {
            let t = tangent_block(k, n);
            let hinv = Monomial::hbar(k, n).inv();
            let swapped = t.map_weights(|w| w.inv().mul(&hinv));
            assert_eq!(swapped, t);
        }
    }

    #[test]
    fn polarization_form_examples() {
        assert_eq!(polarization_form(&[0, 0], &[0, 0, 0]), 0);
        for (k, n) in [(1, 1), (2, 3), (3, 5)] {
            for l in 1..=k {
                assert_eq!(polarization_form(&sigma_l(l, k), &vec![0; n]), n as i64);
                assert_eq!(det_pairing(&sigma_l(l, k), &vec![0; n]), n as i64);
            }
        }
        assert_eq!(polarization_form(&[1, 1], &[1, 0]), 2);
    }

    #[test]
    fn sigma_dual_k1_n2() {
        let m = sigma_dual(1, 1, 2);
        assert_eq!(m.e_x, vec![2]);
        assert_eq!(m.e_a, vec![-1, -1]);
        let p = Params::new(
            c(0.05, 0.0),
            c(0.2, 0.0),
            vec![c(0.5, 0.1), c(0.7, -0.2)],
            c(0.01, 0.0),
            1,
        );
        let x = [p.a[0]];
        let direct = x[0] * x[0] / (p.a[0] * p.a[1]);
        assert!((m.eval(&p, &x) - direct).norm() < 1e-15);
    }

    #[test]
    fn c_sigma_multiplies_out() {
        let p = Params::new(
            c(0.07, 0.02),
            c(0.3, 0.1),
            vec![c(0.5, 0.3), c(-0.6, 0.4)],
            c(0.01, 0.0),
            1,
        );
        let x = [c(0.4, -0.9)];
        let cs = c_sigma(1, &p, &x);
        let n = p.n as i32;
        let q_half = p.q.sqrt();
        let back = cs * ipow(q_half, n) * ipow(p.hbar_sqrt * q_half, n) * sigma_dual(1, 1, 2).eval(&p, &x);
        assert!((back - 1.0).norm() < 1e-10);
    }

    #[test]
    fn c_sigma_real_for_real_inputs() {
        let p = Params::new(
            c(0.1, 0.0),
            c(0.3, 0.0),
            vec![c(0.5, 0.0), c(0.6, 0.0)],
            c(0.01, 0.0),
            1,
        );
        let cs = c_sigma(1, &p, &[c(0.8, 0.0)]);
        assert_eq!(cs.im, 0.0);
    }

    #[test]
    fn fixed_points_enumerate_lexicographically() {
        let all = FixedPoint::all(2, 4);
        let raw: Vec<Vec<usize>> = all.iter().map(|f| f.as_slice().to_vec()).collect();
        assert_eq!(
            raw,
            vec![vec![1, 2], vec![1, 3], vec![1, 4], vec![2, 3], vec![2, 4], vec![3, 4]]
        );
        assert!(FixedPoint::new(vec![2, 2], 3).is_err());
        assert!(FixedPoint::new(vec![1, 4], 3).is_err());
        assert!(serde_json::from_str::<FixedPoint>("[3,1]").is_err());
    }

    #[test]
    fn monomial_permutation_and_display() {
        let mut m = Monomial::one(3, 2);
        m.e_x = vec![2, 0, -1];
        m.e_hbar_half = 1;
        assert_eq!(m.permute_x(&[2, 0, 1]).e_x, vec![-1, 2, 0]);
        assert_eq!(m.to_string(), "hbar^(1/2)*x1^2*x3^-1");
    }
}
