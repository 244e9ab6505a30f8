//! Deterministic residual report over seeded admissible points.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::sample_params;
use crate::cplx::{ipow, rel_diff, C64};
use crate::error::Result;
use crate::interp::{elliptic_automorphy_factor, elliptic_interp_eval, lagrange_eval, newton_window, NodeData};
use crate::mellin::{quadrature_oracle, vertex_series, vertex_series_with, Descendent, MellinConfig};
use crate::model::{Chamber, FixedPoint, Params};
use crate::monodromy::{inverse_residual, periodicity_residual, restriction_scaling_residual, scalar_theta_monodromy};
use crate::qseries::QSeries;
use crate::stab::{stab_checks, StabSpec};

pub const POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub check: String,
    pub point: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "selftest seed={}", self.seed);
        let _ = writeln!(out, "{:<width$}  point  residual    tolerance  status", "check");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:<10.3e}  {:<9.1e}  {}",
                r.check,
                r.point,
                r.residual,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        let _ = writeln!(out, "{} checks, {} failed", self.rows.len(), failed);
        out
    }
}

struct Rows<'a> {
    rows: &'a mut Vec<Row>,
    point: usize,
}

impl Rows<'_> {
    fn push(&mut self, check: &str, residual: f64, tolerance: f64) {
        self.rows.push(Row {
            check: check.to_string(),
            point: self.point,
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
        });
    }
}

fn generic_point<R: Rng>(rng: &mut R, k: usize) -> Vec<C64> {
    (0..k)
        .map(|_| C64::from_polar(rng.gen_range(0.7..1.3), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

fn qseries_rows<R: Rng>(out: &mut Rows, p: &Params, rng: &mut R) -> Result<()> {
    let qs = QSeries::for_params(p);
    let q = p.q;
    let (mut fe, mut qp, mut inv, mut uk) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..8 {
        let x = generic_point(rng, 1)[0];
        fe = fe.max(rel_diff(qs.phi(q * x)? * (1.0 - x), qs.phi(x)?));
        for k in -3i32..=3 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let factor = ipow(q, -k * (k + 1) / 2) * ipow(x, -k) * sign;
            qp = qp.max(rel_diff(qs.theta(ipow(q, k) * x)?, factor * qs.theta(x)?));
        }
        inv = inv.max(rel_diff(qs.theta(x.inv())?, -x * qs.theta(x)?));
        let s = generic_point(rng, 1)[0];
        let u = qs.u_kernel(s, x)?;
        uk = uk.max(rel_diff(qs.u_kernel(q * s, x)?, u / x));
        uk = uk.max(rel_diff(qs.u_kernel(s, q * x)?, u / s));
    }
    out.push("phi_functional_equation", fe, 1e-12);
    out.push("theta_quasi_periodicity", qp, 1e-10);
    out.push("theta_inversion", inv, 1e-12);
    out.push("u_kernel_shifts", uk, 1e-10);
    let m = scalar_theta_monodromy(p.z, &qs)?;
    out.push("scalar_theta_monodromy", rel_diff(m, qs.theta(p.z)?), 1e-13);
    Ok(())
}

fn interp_rows<R: Rng>(out: &mut Rows, p: &Params, rng: &mut R) -> Result<()> {
    let qs = QSeries::for_params(p);
    let values = generic_point(rng, p.n);
    let d = NodeData::new(p.a.clone(), values)?;
    let mut lag = 0.0f64;
    let mut ell = 0.0f64;
    for (a, f) in d.nodes.iter().zip(&d.values) {
        lag = lag.max(rel_diff(lagrange_eval(&d, *a), *f));
        ell = ell.max(rel_diff(elliptic_interp_eval(&d, p.z, *a, &qs)?, *f));
    }
    out.push("lagrange_node_reproduction", lag, 1e-11);
    out.push("elliptic_node_reproduction", ell, 1e-10);
    let x = generic_point(rng, 1)[0];
    let shifted = elliptic_interp_eval(&d, p.z, p.q * x, &qs)?;
    let expect = elliptic_automorphy_factor(&d, p.z, x, p.q) * elliptic_interp_eval(&d, p.z, x, &qs)?;
    out.push("elliptic_x_automorphy", rel_diff(shifted, expect), 1e-10);
    let leak = (-2..=2)
        .map(|l| newton_window(&d, l).relative_leak())
        .fold(0.0, f64::max);
    out.push("trig_newton_window_leak", leak, 1e-10);
    Ok(())
}

fn envelope_rows<R: Rng>(out: &mut Rows, p: &Params, rng: &mut R) -> Result<()> {
    let x = generic_point(rng, p.k);
    for (chamber, tag) in [(Chamber::Plus, "plus"), (Chamber::Minus, "minus")] {
        let mut worst = [0.0f64; 7];
        for mu in FixedPoint::all(p.k, p.n) {
            let s = StabSpec::new(mu, chamber, p.clone())?;
            let c = stab_checks(&s, &x, rng)?;
            let diag = c
                .diagonal_ratios
                .iter()
                .map(|r| (r.log10() - 1.0).abs())
                .fold(0.0, f64::max);
            let vals = [
                c.symmetry,
                c.x_shift,
                c.x_shift_per_term,
                c.c_sigma_agreement,
                c.z_shift,
                c.wheel.unwrap_or(0.0),
                diag,
            ];
            for (w, v) in worst.iter_mut().zip(vals) {
                *w = if v.is_nan() { f64::NAN } else { w.max(v) };
            }
        }
        let names = [
            ("symmetry", 1e-12),
            ("x_shift", 1e-9),
            ("x_shift_per_term", 1e-9),
            ("c_sigma_agreement", 1e-9),
            ("z_shift", 1e-9),
            ("wheel_vanishing", 1e-9),
            // ratio within [5, 20] of the expected 10
            ("diagonal_log10_ratio_offset", 2f64.log10()),
        ];
        for ((name, tol), v) in names.iter().zip(worst) {
            out.push(&format!("envelope_{tag}_{name}"), v, *tol);
        }
    }
    Ok(())
}

fn vertex_rows<R: Rng>(out: &mut Rows, rng: &mut R) -> Result<()> {
    let p = sample_params(rng, 1, 2);
    let cfg = MellinConfig {
        max_degree: 8,
        quadrature_points: 96,
        ..MellinConfig::default()
    };
    let rho = Descendent::elementary(1, 1, 2)?;
    let mut worst = 0.0f64;
    for mu in FixedPoint::all(1, 2) {
        let s = StabSpec::new(mu, Chamber::Plus, p.clone())?;
        let series = vertex_series(&rho, &s, cfg.max_degree, &cfg)?.total();
        let quad = quadrature_oracle(&rho, &s, cfg.quadrature_points)?;
        worst = worst.max(rel_diff(series, quad));
    }
    out.push("vertex_series_vs_quadrature", worst, 1e-8);

    let p = sample_params(rng, 2, 3);
    let rho = Descendent::one(2, 3);
    let s = StabSpec::new(FixedPoint::all(2, 3).remove(0), Chamber::Plus, p)?;
    let cfg = MellinConfig::default();
    let restricted = vertex_series_with(&rho, &s, 2, true, &cfg)?;
    let full = vertex_series_with(&rho, &s, 2, false, &cfg)?;
    let dev = (full.total() - restricted.total()).norm() / restricted.scale().max(f64::MIN_POSITIVE);
    out.push("vertex_non_fixed_towers_vanish", dev, 1e-12);
    Ok(())
}

fn monodromy_rows(out: &mut Rows, p: &Params) -> Result<()> {
    out.push(
        "restriction_plus_z_scaling",
        restriction_scaling_residual(Chamber::Plus, p)?,
        1e-8,
    );
    out.push(
        "restriction_minus_z_scaling",
        restriction_scaling_residual(Chamber::Minus, p)?,
        1e-8,
    );
    out.push("monodromy_periodicity", periodicity_residual(p)?, 1e-8);
    out.push("monodromy_inverse", inverse_residual(p)?, 1e-10);
    Ok(())
}

/// Runs every check at [`POINTS`] points drawn from `seed`.
pub fn run(seed: u64) -> Result<Report> {
    let mut rows = Vec::new();
    for point in 0..POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(point as u64);
        let p = sample_params(&mut rng, 2, 3);
        let mut out = Rows { rows: &mut rows, point };
        qseries_rows(&mut out, &p, &mut rng)?;
        interp_rows(&mut out, &p, &mut rng)?;
        envelope_rows(&mut out, &p, &mut rng)?;
        monodromy_rows(&mut out, &p)?;
        vertex_rows(&mut out, &mut rng)?;
    }
    Ok(Report { seed, rows })
}
