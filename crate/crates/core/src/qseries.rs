//! q-Pochhammer products, the theta function and the Poincaré kernel.
//!
//! Conventions:
//!
//! * `phi(x) = prod_{m>=0} (1 - q^m x)`
//! * `theta(z) = phi(q z) phi(1/z)`, with simple zeros on `q^Z`
//! * `u(s, z) = theta(s z) / (theta(s) theta(z))`

use serde::{Deserialize, Serialize};

use crate::cplx::{ipow, C64};
use crate::error::{Error, Result};
use crate::model::{Params, VirtualCharacter};

/// Truncation and zero-detection settings for the infinite products.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QFunctionConfig {
    /// Stop once `|q^m x|` drops below this.
    pub truncation_floor: f64,
    pub max_terms: usize,
    /// A factor `1 - q^m x` smaller than this is treated as an exact zero.
    pub zero_tolerance: f64,
    /// Branch window of `phi_circle` around `x = 1`.
    pub circle_tolerance: f64,
    /// Exponent window and tolerance of the `q^Z` membership test.
    pub lattice_window: i32,
    pub lattice_tolerance: f64,
}

impl Default for QFunctionConfig {
    fn default() -> Self {
        Self {
            truncation_floor: 1e-18,
            max_terms: 10_000,
            zero_tolerance: 1e-12,
            circle_tolerance: 1e-12,
            lattice_window: 64,
            lattice_tolerance: 1e-10,
        }
    }
}

impl QFunctionConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.truncation_floor > 0.0 && self.truncation_floor < 1.0) {
            return Err(Error::Invalid("truncation_floor must lie in (0, 1)".into()));
        }
        if self.max_terms == 0 {
            return Err(Error::Invalid("max_terms must be positive".into()));
        }
        Ok(())
    }
}

/// Returns `Some(m)` when `w = q^m` within `tol` for some `|m| <= window`.
pub fn in_q_lattice(w: C64, q: C64, window: i32, tol: f64) -> Option<i32> {
    if w.norm() == 0.0 || !w.norm().is_finite() {
        return None;
    }
    let guess = (w.norm().ln() / q.norm().ln()).round() as i32;
    for m in [guess, guess - 1, guess + 1] {
        if m.abs() > window {
            continue;
        }
        if (w * ipow(q, -m) - 1.0).norm() < tol {
            return Some(m);
        }
    }
    None
}

/// Evaluator for q-series at a fixed nome `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSeries {
    q: C64,
    cfg: QFunctionConfig,
}

impl QSeries {
    pub fn new(q: C64) -> Self {
        Self::with_config(q, QFunctionConfig::default())
    }

    pub fn with_config(q: C64, cfg: QFunctionConfig) -> Self {
        assert!(q.norm() < 1.0, "|q| < 1 required");
        Self { q, cfg }
    }

    pub fn for_params(p: &Params) -> Self {
        Self::new(p.q)
    }

    pub fn q(&self) -> C64 {
        self.q
    }

    pub fn config(&self) -> &QFunctionConfig {
        &self.cfg
    }

    pub fn in_lattice(&self, w: C64) -> Option<i32> {
        in_q_lattice(w, self.q, self.cfg.lattice_window, self.cfg.lattice_tolerance)
    }

    fn product(&self, x: C64, skip: Option<usize>) -> Result<C64> {
        let mut acc = C64::new(1.0, 0.0);
        let mut t = x;
        let mut m = 0usize;
        loop {
            if Some(m) != skip {
                let f = C64::new(1.0, 0.0) - t;
                if f.norm() < self.cfg.zero_tolerance {
                    return Ok(C64::new(0.0, 0.0));
                }
                acc *= f;
            }
            if t.norm() < self.cfg.truncation_floor && skip.is_none_or(|s| m >= s) {
                return Ok(acc);
            }
            m += 1;
            if m >= self.cfg.max_terms {
                return Err(Error::NonConvergent {
                    arg: format!("{x}"),
                    max_terms: self.cfg.max_terms,
                });
            }
            t *= self.q;
        }
    }

    /// `prod_{m>=0} (1 - q^m x)`; exact zero on `x in q^{-N}`.
    pub fn phi(&self, x: C64) -> Result<C64> {
        self.product(x, None)
    }

    /// `phi(x)` with the `m`-th factor removed.
    pub fn phi_skip(&self, x: C64, m: usize) -> Result<C64> {
        self.product(x, Some(m))
    }

    /// `phi(x)` away from `x = 1`, and `phi(q)` at `x = 1`.
    pub fn phi_circle(&self, x: C64) -> Result<C64> {
        if (x - 1.0).norm() < self.cfg.circle_tolerance {
            self.phi(self.q)
        } else {
            self.phi(x)
        }
    }

    pub fn theta(&self, z: C64) -> Result<C64> {
        if z.norm() == 0.0 {
            return Err(Error::Invalid("theta(0) is undefined".into()));
        }
        Ok(self.phi(self.q * z)? * self.phi(z.inv())?)
    }

    pub fn u_kernel(&self, s: C64, z: C64) -> Result<C64> {
        for (name, w) in [("s", s), ("z", z)] {
            if w.norm() == 0.0 {
                return Err(Error::Invalid(format!("u_kernel: {name} = 0")));
            }
            if let Some(m) = self.in_lattice(w) {
                return Err(Error::Resonance(format!("u_kernel: {name} = q^{m}")));
            }
        }
        Ok(self.theta(s * z)? / (self.theta(s)? * self.theta(z)?))
    }

    /// `prod_terms phi(w)^{mult}` over the weights of `v` evaluated at `(p, x)`.
    pub fn phi_virtual(&self, v: &VirtualCharacter, p: &Params, x: &[C64]) -> Result<C64> {
        let mut acc = C64::new(1.0, 0.0);
        for (w, mult) in v.terms() {
            let val = self.phi(w.eval(p, x))?;
            if *mult < 0 {
                if val.norm() == 0.0 {
                    return Err(Error::PoleHit(format!("phi({w}) = 0 in a denominator")));
                }
                acc /= ipow(val, (-mult) as i32);
            } else {
                acc *= ipow(val, *mult as i32);
            }
        }
        Ok(acc)
    }
}
