use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use vertexlab_core::config::{default_params, GlobalConfig};
use vertexlab_core::cplx::{parse_complex, rel_diff, to_json};
use vertexlab_core::interp::{
    elliptic_automorphy_factor, elliptic_interp_eval, lagrange_eval, newton_window, resonance_check, trig_interp_eval,
    NodeData,
};
use vertexlab_core::mellin::{quadrature_oracle, vertex_series_with, Descendent};
use vertexlab_core::monodromy::{
    chamber_minus_checks, d_a, inverse_residual, monodromy_grid, monodromy_matrix_with, periodicity_residual,
};
use vertexlab_core::stab::{stab_checks, stab_envelope, stab_terms, wheel_check, StabSpec};
use vertexlab_core::{selftest, Chamber, Error, FixedPoint, Params, Result};

use crate::{Cli, Command, InterpArgs, InterpMode, MonodromyArgs, StabCommand, StabTarget, VertexArgs};

const MAX_DEGREE: usize = 12;
const MAX_POINTS: usize = 4096;

struct Ctx {
    cfg: GlobalConfig,
    params: Params,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self> {
        let path = cli
            .config
            .clone()
            .or_else(|| std::env::var_os("VERTEXLAB_CONFIG").map(PathBuf::from));
        let cfg = match path {
            Some(p) => GlobalConfig::load(&p)?,
            None => GlobalConfig::default(),
        };
        let mut params = cfg.params.clone().unwrap_or_else(|| default_params(cli.k, cli.n));
        if let Some(z) = &cli.z {
            params = params.with_z(complex(z)?);
        }
        let params = cfg.validate(params)?;
        Ok(Self {
            cfg,
            params,
            seed: cli.seed,
            out: cli.out.clone(),
        })
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::Invalid(format!("stdout: {e}")))
            }
        }
    }

    fn emit_json(&self, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.emit(&s)
    }
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::Invalid(format!("cannot write {}: {e}", p.display())))
}

fn complex(s: &str) -> Result<C64> {
    parse_complex(s).ok_or_else(|| Error::Invalid(format!("cannot parse complex number {s:?}")))
}

fn fixed_point(s: Option<&str>, p: &Params) -> Result<FixedPoint> {
    match s {
        None => Ok(FixedPoint::all(p.k, p.n).remove(0)),
        Some(s) => {
            let mu = s
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Invalid(format!("cannot parse fixed point {s:?}")))?;
            if mu.len() != p.k {
                return Err(Error::Invalid(format!(
                    "fixed point needs {} labels, got {}",
                    p.k,
                    mu.len()
                )));
            }
            FixedPoint::new(mu, p.n)
        }
    }
}

fn generic_x(rng: &mut ChaCha8Rng, k: usize) -> Vec<C64> {
    (0..k)
        .map(|_| C64::from_polar(rng.gen_range(0.7..1.3), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect()
}

fn point(args: &[String], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
    if args.is_empty() {
        return Ok(generic_x(rng, k));
    }
    if args.len() != k {
        return Err(Error::Invalid(format!("need {k} values of --x, got {}", args.len())));
    }
    args.iter().map(|s| complex(s)).collect()
}

fn cvec(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|z| to_json(*z)).collect())
}

fn label(mu: &FixedPoint) -> String {
    mu.as_slice()
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn run(cli: &Cli) -> Result<u8> {
    let ctx = Ctx::load(cli)?;
    match &cli.command {
        Command::Interp(a) => cmd_interp(&ctx, a),
        Command::Stab(s) => cmd_stab(&ctx, s),
        Command::Vertex(a) => cmd_vertex(&ctx, a),
        Command::Monodromy(a) => cmd_monodromy(&ctx, a),
        Command::Selftest => cmd_selftest(&ctx),
    }
}

fn cmd_interp(ctx: &Ctx, a: &InterpArgs) -> Result<u8> {
    let data = match (&a.nodes, &ctx.cfg.interp) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Domain(format!("cannot read nodes file {}: {e}", path.display())))?;
            NodeData::from_json(&text)?
        }
        (None, Some(d)) => {
            d.check()?;
            d.clone()
        }
        (None, None) => {
            return Err(Error::Domain(
                "no interpolation nodes: pass --nodes or a config `interp` section".into(),
            ))
        }
    };
    let x = complex(&a.x)?;
    let p = &ctx.params;
    let qs = ctx.cfg.qseries_for(p);
    let mut out = json!({ "mode": format!("{:?}", a.mode).to_lowercase(), "x": to_json(x) });
    let eval = |y: C64| -> Result<C64> {
        match a.mode {
            InterpMode::Lagrange => Ok(lagrange_eval(&data, y)),
            InterpMode::Trig => Ok(trig_interp_eval(&data, a.l, y)),
            InterpMode::Elliptic => elliptic_interp_eval(&data, p.z, y, &qs),
        }
    };
    if a.mode == InterpMode::Elliptic {
        let flags = resonance_check(&data, p.z, &qs);
        if !flags.is_empty() {
            return Err(Error::Resonance(format!("elliptic interpolation: {flags:?}")));
        }
    }
    let value = eval(x)?;
    let mut node = 0.0f64;
    for (ai, fi) in data.nodes.iter().zip(&data.values) {
        node = node.max(rel_diff(eval(*ai)?, *fi));
    }
    out["value"] = to_json(value);
    out["node_residual"] = json!(node);
    match a.mode {
        InterpMode::Trig => {
            out["L"] = json!(a.l);
            out["newton_window"] = serde_json::to_value(newton_window(&data, a.l))?;
        }
        InterpMode::Elliptic => {
            out["z"] = to_json(p.z);
            let shifted = eval(p.q * x)?;
            let factor = elliptic_automorphy_factor(&data, p.z, x, p.q);
            out["automorphy_factor"] = to_json(factor);
            out["automorphy_residual"] = json!(rel_diff(shifted, factor * value));
        }
        InterpMode::Lagrange => {}
    }
    ctx.emit_json(&out)?;
    Ok(0)
}

fn spec(ctx: &Ctx, t: &StabTarget, chamber: Chamber) -> Result<StabSpec> {
    ctx.cfg
        .stab_spec(fixed_point(t.mu.as_deref(), &ctx.params)?, chamber, ctx.params.clone())
}

fn cmd_stab(ctx: &Ctx, cmd: &StabCommand) -> Result<u8> {
    let mut rng = ctx.rng();
    match cmd {
        StabCommand::Eval(t) => {
            let s = spec(ctx, t, t.chamber.parse()?)?;
            let x = point(&t.x, ctx.params.k, &mut rng)?;
            let value = stab_envelope(&s, &x)?;
            let checks = stab_checks(&s, &x, &mut rng)?;
            let out = json!({
                "mu": s.mu.as_slice(),
                "chamber": s.chamber.to_string(),
                "x": cvec(&x),
                "value": to_json(value),
                "terms": cvec(&stab_terms(&s, &x)?),
                "checks": checks,
                "pass": checks.passes(),
            });
            ctx.emit_json(&out)?;
            Ok(0)
        }
        StabCommand::Check { target, all, wheel } => {
            let x = point(&target.x, ctx.params.k, &mut rng)?;
            let specs: Vec<StabSpec> = if *all {
                let mut v = Vec::new();
                for chamber in [Chamber::Plus, Chamber::Minus] {
                    for mu in FixedPoint::all(ctx.params.k, ctx.params.n) {
                        v.push(ctx.cfg.stab_spec(mu, chamber, ctx.params.clone())?);
                    }
                }
                v
            } else {
                vec![spec(ctx, target, target.chamber.parse()?)?]
            };
            let mut results = Vec::new();
            let mut ok = true;
            for s in &specs {
                let checks = stab_checks(s, &x, &mut rng)?;
                let mut entry = json!({
                    "mu": s.mu.as_slice(),
                    "chamber": s.chamber.to_string(),
                    "value": to_json(stab_envelope(s, &x)?),
                    "checks": checks,
                    "pass": checks.passes(),
                });
                ok &= checks.passes();
                if let Some(l) = wheel {
                    if *l == 0 || *l > ctx.params.n {
                        return Err(Error::Invalid(format!("--wheel needs 1 <= L <= {}", ctx.params.n)));
                    }
                    if ctx.params.k >= 2 {
                        let w = wheel_check(s, *l, 4, &mut rng)?;
                        ok &= w.relative() < 1e-9;
                        entry["wheel"] = json!({
                            "l": l,
                            "max_on_locus": w.max_on_locus,
                            "scale": w.scale,
                            "residual": w.relative(),
                        });
                    }
                }
                results.push(entry);
            }
            ctx.emit_json(&json!({ "x": cvec(&x), "results": results, "pass": ok }))?;
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn cmd_vertex(ctx: &Ctx, a: &VertexArgs) -> Result<u8> {
    let d = a.d.unwrap_or(ctx.cfg.mellin.max_degree);
    let n_points = a.n_points.unwrap_or(ctx.cfg.mellin.quadrature_points);
    if d > MAX_DEGREE {
        return Err(Error::Domain(format!("--D is capped at {MAX_DEGREE}")));
    }
    if n_points > MAX_POINTS {
        return Err(Error::Domain(format!("--N is capped at {MAX_POINTS}")));
    }
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(Error::Invalid("--tolerance must be positive".into()));
    }
    let p = &ctx.params;
    let rho = Descendent::parse(&a.rho, p.k, p.n)?;
    let chamber: Chamber = a.chamber.parse()?;
    let s = ctx
        .cfg
        .stab_spec(fixed_point(a.mu.as_deref(), p)?, chamber, p.clone())?;
    let cfg = ctx.cfg.mellin;
    let ledger = vertex_series_with(&rho, &s, d, true, &cfg)?;
    let total = ledger.total();
    let oracle = quadrature_oracle(&rho, &s, n_points)?;
    let rel_err = rel_diff(total, oracle);
    let mut ok = rel_err < a.tolerance;
    let mut meta = json!({
        "k": p.k,
        "n": p.n,
        "D": d,
        "N": n_points,
        "rho": rho.to_string(),
        "mu": s.mu.as_slice(),
        "chamber": chamber.to_string(),
        "decay_ratios": ledger.decay_ratios(),
        "warnings": ledger.warnings,
        "tolerance": a.tolerance,
    });
    if a.unrestricted_poles {
        let full = vertex_series_with(&rho, &s, d, false, &cfg)?;
        let diff = (full.total() - total).norm();
        let relative = diff / ledger.scale().max(f64::MIN_POSITIVE);
        ok &= relative < 1e-9;
        meta["unrestricted_poles"] = json!({
            "total": to_json(full.total()),
            "degree_ledger": cvec(&full.contributions),
            "difference": diff,
            "relative": relative,
        });
    }
    let out = json!({
        "z": to_json(p.z),
        "degree_ledger": cvec(&ledger.contributions),
        "total": to_json(total),
        "oracle": to_json(oracle),
        "rel_err": rel_err,
        "meta": meta,
    });
    ctx.emit_json(&out)?;
    Ok(if ok { 0 } else { 1 })
}

fn cmd_monodromy(ctx: &Ctx, a: &MonodromyArgs) -> Result<u8> {
    let p = &ctx.params;
    let mut rng = ctx.rng();
    let x = generic_x(&mut rng, p.k);
    let minus = chamber_minus_checks(p, &x, &mut rng)?;
    let minus_ok = minus.iter().all(|(_, c)| c.passes());
    let mut minus_json = serde_json::Map::new();
    for (mu, c) in &minus {
        minus_json.insert(label(mu), serde_json::to_value(c)?);
    }
    let m = monodromy_matrix_with(p, &ctx.cfg.monodromy)?;
    let periodicity = periodicity_residual(p)?;
    let inverse = inverse_residual(p)?;
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| Value::Array((0..m.ncols()).map(|j| to_json(m[(i, j)])).collect()))
        .collect();
    let diag: Vec<C64> = d_a(p).diagonal().iter().copied().collect();
    let fixed: Vec<Vec<usize>> = FixedPoint::all(p.k, p.n)
        .iter()
        .map(|f| f.as_slice().to_vec())
        .collect();
    let ok = minus_ok && periodicity < 1e-8 && inverse < 1e-8;
    let mut out = json!({
        "z": to_json(p.z),
        "fixed_points": fixed,
        "M": rows,
        "D_a": cvec(&diag),
        "periodicity_residual": periodicity,
        "inverse_residual": inverse,
        "chamber_minus_checks": { "x": cvec(&x), "by_fixed_point": minus_json, "pass": minus_ok },
        "pass": ok,
    });
    if let Some(path) = &a.grid {
        let grid = monodromy_grid(p, a.r_min, a.r_max, a.radii, a.angles)?;
        let mut csv = String::from("radius,angle,row,col,abs_m\n");
        for (r, t, i, j, v) in &grid {
            let _ = writeln!(csv, "{r:.17e},{t:.17e},{i},{j},{v:.17e}");
        }
        write_file(path, &csv)?;
        out["grid"] = json!({ "path": path.display().to_string(), "rows": grid.len() });
    }
    ctx.emit_json(&out)?;
    Ok(if ok { 0 } else { 1 })
}

/// Points are sampled from the seed; a supplied parameter point has already been validated.
fn cmd_selftest(ctx: &Ctx) -> Result<u8> {
    let report = selftest::run(ctx.seed)?;
    ctx.emit(&report.render())?;
    if let Some(first) = report.rows.iter().find(|r| !r.pass) {
        eprintln!(
            "invariant failed: {} at point {} (residual {:e} > {:e})",
            first.check, first.point, first.residual, first.tolerance
        );
        return Ok(1);
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fixed_points() {
        let p = default_params(2, 4);
        assert_eq!(fixed_point(Some("1,3"), &p).unwrap().as_slice(), &[1, 3]);
        assert_eq!(fixed_point(None, &p).unwrap().as_slice(), &[1, 2]);
        assert!(fixed_point(Some("3,1"), &p).is_err());
        assert!(fixed_point(Some("1"), &p).is_err());
    }

    #[test]
    fn explicit_point_needs_k_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(point(&["0.5+0.1i".into()], 2, &mut rng).is_err());
        assert_eq!(point(&[], 2, &mut rng).unwrap().len(), 2);
    }
}
