//! Global JSON configuration and the seeded sampler of admissible points.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cplx::C64;
use crate::error::{Error, Result};
use crate::interp::NodeData;
use crate::mellin::MellinConfig;
use crate::model::{validate_params_with, Chamber, FixedPoint, Params, ValidationConfig};
use crate::monodromy::MonodromyConfig;
use crate::qseries::{QFunctionConfig, QSeries};
use crate::stab::StabSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabConfig {
    pub near_diagonal_tolerance: f64,
}

impl Default for StabConfig {
    fn default() -> Self {
        Self {
            near_diagonal_tolerance: 1e-8,
        }
    }
}

/// Everything readable from the `--config` file. Sections are optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub params: Option<Params>,
    pub interp: Option<NodeData>,
    pub qseries: QFunctionConfig,
    pub validation: ValidationConfig,
    pub stab: StabConfig,
    pub mellin: MellinConfig,
    pub monodromy: MonodromyConfig,
}

impl GlobalConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: GlobalConfig = serde_json::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<()> {
        self.qseries.check()?;
        let positive = [
            ("validation.tolerance", self.validation.tolerance),
            ("stab.near_diagonal_tolerance", self.stab.near_diagonal_tolerance),
            ("mellin.z_max", self.mellin.z_max),
            ("mellin.simple_pole_tolerance", self.mellin.simple_pole_tolerance),
            ("monodromy.condition_limit", self.monodromy.condition_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.mellin.max_degree > 12 {
            return Err(Error::Invalid("mellin.max_degree is capped at 12".into()));
        }
        if self.mellin.quadrature_points > 4096 {
            return Err(Error::Invalid("mellin.quadrature_points is capped at 4096".into()));
        }
        Ok(())
    }

    pub fn validate(&self, p: Params) -> Result<Params> {
        validate_params_with(p, &self.validation)
    }

    pub fn qseries_for(&self, p: &Params) -> QSeries {
        QSeries::with_config(p.q, self.qseries)
    }

    /// Envelope spec carrying this configuration's tolerances.
    pub fn stab_spec(&self, mu: FixedPoint, chamber: Chamber, p: Params) -> Result<StabSpec> {
        let mut s = StabSpec::new(mu, chamber, p)?;
        s.qseries = self.qseries_for(&s.params);
        s.near_diagonal_tolerance = self.stab.near_diagonal_tolerance;
        Ok(s)
    }
}

/// Built-in admissible point for `(k, n)` used when no parameters are supplied.
pub fn default_params(k: usize, n: usize) -> Params {
    let hbar = C64::from_polar(0.35, -0.2);
    let a = (0..n)
        .map(|j| C64::from_polar(0.6, 0.4 + std::f64::consts::TAU * j as f64 / n as f64))
        .collect();
    Params::new(C64::from_polar(0.1, 0.3), hbar, a, C64::from_polar(0.015, 1.1), k)
}

/// Draws an admissible point with `|z|` in `[0.005, 0.02]`.
///
/// Magnitudes: `|hbar|` in `[0.3, 0.45]`, `|q/hbar|` in `[0.3, 0.45]`,
/// `|a_j|` within 10% of `|hbar|^{1/2}`; all phases uniform.
pub fn sample_params<R: Rng>(rng: &mut R, k: usize, n: usize) -> Params {
    let tau = std::f64::consts::TAU;
    loop {
        let hbar = C64::from_polar(rng.gen_range(0.3..0.45), rng.gen_range(0.0..tau));
        let q = C64::from_polar(hbar.norm() * rng.gen_range(0.3..0.45), rng.gen_range(0.0..tau));
        let center = hbar.norm().sqrt();
        let a = (0..n)
            .map(|_| C64::from_polar(center * rng.gen_range(0.9..1.1), rng.gen_range(0.0..tau)))
            .collect();
        let z = C64::from_polar(rng.gen_range(0.005..0.02), rng.gen_range(0.0..tau));
        if let Ok(p) = Params::new(q, hbar, a, z, k).validate() {
            return p;
        }
    }
}
