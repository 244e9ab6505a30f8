//! Restriction matrices of both chambers and the monodromy `M = S_-^{-1} S_+`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cplx::C64;
use crate::error::{Error, Result};
use crate::model::{Chamber, FixedPoint, Params};
use crate::qseries::QSeries;
use crate::stab::{stab_checks, stab_restrict, StabChecks, StabSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonodromyConfig {
    /// Largest accepted 2-norm condition number.
    pub condition_limit: f64,
}

impl Default for MonodromyConfig {
    fn default() -> Self {
        Self { condition_limit: 1e12 }
    }
}

/// `S[nu][mu]` = envelope of `mu` restricted to the fixed point `nu`,
/// both indexed in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionMatrix {
    pub entries: DMatrix<C64>,
    pub chamber: Chamber,
    pub z_point: C64,
    pub fixed_points: Vec<FixedPoint>,
}

fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn restriction_matrix(chamber: Chamber, p: &Params) -> Result<RestrictionMatrix> {
    restriction_matrix_with(chamber, p, &MonodromyConfig::default())
}

pub fn restriction_matrix_with(chamber: Chamber, p: &Params, cfg: &MonodromyConfig) -> Result<RestrictionMatrix> {
    let fps = FixedPoint::all(p.k, p.n);
    let dim = fps.len();
    let specs: Vec<StabSpec> = fps
        .iter()
        .map(|mu| StabSpec::new(mu.clone(), chamber, p.clone()))
        .collect::<Result<_>>()?;
    let cells: Vec<C64> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| stab_restrict(&specs[idx % dim], &fps[idx / dim]))
        .collect::<Result<_>>()?;
    let entries = DMatrix::from_row_slice(dim, dim, &cells);
    if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let condition = condition_number(&entries);
    if condition.is_nan() || condition >= cfg.condition_limit {
        return Err(Error::Singular { condition });
    }
    Ok(RestrictionMatrix {
        entries,
        chamber,
        z_point: p.z,
        fixed_points: fps,
    })
}

fn solve(lhs: &DMatrix<C64>, rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    lhs.clone().lu().solve(rhs).ok_or(Error::Singular {
        condition: f64::INFINITY,
    })
}

/// `S_-^{-1} S_+` at the point `p.z`.
pub fn monodromy_matrix(p: &Params) -> Result<DMatrix<C64>> {
    monodromy_matrix_with(p, &MonodromyConfig::default())
}

pub fn monodromy_matrix_with(p: &Params, cfg: &MonodromyConfig) -> Result<DMatrix<C64>> {
    let plus = restriction_matrix_with(Chamber::Plus, p, cfg)?;
    let minus = restriction_matrix_with(Chamber::Minus, p, cfg)?;
    solve(&minus.entries, &plus.entries)
}

/// `S_+^{-1} S_-`.
pub fn inverse_monodromy_matrix(p: &Params) -> Result<DMatrix<C64>> {
    let plus = restriction_matrix(Chamber::Plus, p)?;
    let minus = restriction_matrix(Chamber::Minus, p)?;
    solve(&plus.entries, &minus.entries)
}

/// `D_a = diag(prod_i a_{nu_i})` over fixed points in lexicographic order.
pub fn d_a(p: &Params) -> DMatrix<C64> {
    let diag: Vec<C64> = FixedPoint::all(p.k, p.n).iter().map(|nu| nu.prod_a(p)).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// Largest entrywise relative deviation `|A_ij - B_ij| / |B_ij|`; entries of
/// `B` below `1e-13 max|B|` are compared against that floor instead.
pub fn entrywise_relative(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = 1e-13 * scale;
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm() / y.norm().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// `max_ij |M(qz) - D_a M(z) D_a^{-1}| / |.|`.
pub fn periodicity_residual(p: &Params) -> Result<f64> {
    let m = monodromy_matrix(p)?;
    let shifted = monodromy_matrix(&p.with_z(p.z * p.q))?;
    let d = d_a(p);
    let d_inv = d.map(|v| if v.norm() == 0.0 { v } else { v.inv() });
    Ok(entrywise_relative(&shifted, &(&d * m * d_inv)))
}

/// Entrywise residual of `S(qz) = D_a S(z) D_a^{-1}` for one chamber.
pub fn restriction_scaling_residual(chamber: Chamber, p: &Params) -> Result<f64> {
    let s = restriction_matrix(chamber, p)?;
    let s_q = restriction_matrix(chamber, &p.with_z(p.z * p.q))?;
    let d = d_a(p);
    let d_inv = d.map(|v| v.inv());
    Ok(entrywise_relative(&s_q.entries, &(&d * s.entries * d_inv)))
}

/// Frobenius norm of `M (S_+^{-1} S_-) - I`.
pub fn inverse_residual(p: &Params) -> Result<f64> {
    let m = monodromy_matrix(p)?;
    let inv = inverse_monodromy_matrix(p)?;
    let prod = m * inv;
    let id = DMatrix::<C64>::identity(prod.nrows(), prod.ncols());
    Ok((prod - id).norm())
}

/// Chamber `-` envelope battery at a generic point, one entry per fixed point.
pub fn chamber_minus_checks<R: rand::Rng>(p: &Params, x: &[C64], rng: &mut R) -> Result<Vec<(FixedPoint, StabChecks)>> {
    FixedPoint::all(p.k, p.n)
        .into_iter()
        .map(|mu| {
            let s = StabSpec::new(mu.clone(), Chamber::Minus, p.clone())?;
            Ok((mu, stab_checks(&s, x, rng)?))
        })
        .collect()
}

/// `f_0(z) = phi(q z)`, solving `f_0(q z) = f_0(z)/(1 - q z)`.
pub fn f_zero(z: C64, qs: &QSeries) -> Result<C64> {
    qs.phi(qs.q() * z)
}

/// `f_inf(z) = 1/phi(1/z)`, solving `f_inf(q z) = f_inf(z)/(1 - 1/(q z))`.
pub fn f_infty(z: C64, qs: &QSeries) -> Result<C64> {
    let v = qs.phi(z.inv())?;
    if v.norm() == 0.0 {
        return Err(Error::Resonance(format!("phi(1/z) vanishes at z = {z}")));
    }
    Ok(v.inv())
}

/// `f_0/f_inf`, checked against `theta(z)`.
pub fn scalar_theta_monodromy(z: C64, qs: &QSeries) -> Result<C64> {
    if let Some(m) = qs.in_lattice(z) {
        return Err(Error::Resonance(format!("z = q^{m}")));
    }
    let ratio = f_zero(z, qs)? / f_infty(z, qs)?;
    let theta = qs.theta(z)?;
    let dev = crate::cplx::rel_diff(ratio, theta);
    if dev > 1e-13 {
        return Err(Error::Invalid(format!("f_0/f_inf deviates from theta by {dev:e}")));
    }
    Ok(ratio)
}

/// `(radius, angle, row, col, |M_ij|)`.
pub type GridRow = (f64, f64, usize, usize, f64);

/// One row per grid point and matrix entry.
pub fn monodromy_grid(p: &Params, r_min: f64, r_max: f64, radii: usize, angles: usize) -> Result<Vec<GridRow>> {
    if radii == 0 || angles == 0 || !(r_min > 0.0 && r_max >= r_min) {
        return Err(Error::Invalid("grid needs 0 < r_min <= r_max and nonzero sizes".into()));
    }
    let points: Vec<(f64, f64)> = (0..radii)
        .flat_map(|i| {
            let t = if radii == 1 { 0.0 } else { i as f64 / (radii - 1) as f64 };
            let r = r_min * (r_max / r_min).powf(t);
            (0..angles).map(move |j| (r, std::f64::consts::TAU * (j as f64 + 0.5) / angles as f64))
        })
        .collect();
    let mats: Vec<DMatrix<C64>> = points
        .iter()
        .map(|&(r, t)| monodromy_matrix(&p.with_z(C64::from_polar(r, t))))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for ((r, t), m) in points.iter().zip(&mats) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                rows.push((*r, *t, i, j, m[(i, j)].norm()));
            }
        }
    }
    Ok(rows)
}
