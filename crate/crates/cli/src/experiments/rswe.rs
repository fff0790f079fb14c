//! One-dimensional rotating shallow water: error of the three- and two-level
//! methods against the fine serial Strang solution.

use anyhow::{bail, Result};
use mlp_core::problems::reference_solution;
use mlp_core::spectral::{build_rswe, rswe_fields, rswe_initial_condition, rswe_relative_linf, RsweParams, SpectralGrid};
use mlp_core::{Integrator, MethodConfig, ProblemSpec, State};

use super::{parse_bool, set_quadrature, solve, timed, CheckLine, Context, ExperimentDef, Output, Tolerance};
use crate::params::Params;
use crate::table::{plot_data, Table, WALL_TIME};

/// Published two-level errors: `N = 40` on `[0, 48]` for `F = 1` and
/// `N = 60` on `[0, 45]` for `F = 1/100`, both with two iterations.
pub const PAPER_TWO_LEVEL_F1: f64 = 1.7963565539455182e-05;
pub const PAPER_TWO_LEVEL_F100: f64 = 0.00019024269235007262;

/// Height bound for the stability check of the fine run.
pub const MAX_HEIGHT: f64 = 10.0;

pub const F1: ExperimentDef = ExperimentDef {
    id: "rswe_f1",
    summary: "rotating shallow water, epsilon = 0.1, F = 1",
    defaults: &[
        ("modes", "32"),
        ("t_end", "4.8"),
        ("epsilon", "0.1"),
        ("burger", "1"),
        ("mu", "1e-4"),
        ("dealias", "false"),
        ("fine_dt", "0.0005"),
        ("coarsen", "20"),
        ("k1", "3"),
        ("k2", "5"),
        ("two_level_coarsen", "40"),
        ("two_level_iterations", "2"),
        ("quadrature", "32"),
    ],
    heavy: &[("modes", "128"), ("t_end", "48")],
    configs,
    run,
    check: check_f1,
};

pub const F100: ExperimentDef = ExperimentDef {
    id: "rswe_f100",
    summary: "rotating shallow water, epsilon = 0.1, F = 1/100",
    defaults: &[
        ("modes", "32"),
        ("t_end", "4.5"),
        ("epsilon", "0.1"),
        ("burger", "0.01"),
        ("mu", "1e-4"),
        ("dealias", "false"),
        ("fine_dt", "0.0005"),
        ("coarsen", "30"),
        ("k1", "3"),
        ("k2", "5"),
        ("two_level_coarsen", "60"),
        ("two_level_iterations", "2"),
        ("quadrature", "32"),
    ],
    heavy: &[("modes", "128"), ("t_end", "45")],
    configs,
    run,
    check: check_f100,
};

struct Setup {
    grid: SpectralGrid,
    spec: ProblemSpec,
    u0: State,
}

fn setup(p: &Params) -> Result<Setup> {
    let params = RsweParams {
        epsilon: p.get("epsilon")?,
        burger: p.get("burger")?,
        mu: p.get("mu")?,
        t_end: p.get("t_end")?,
        dealias: parse_bool(p.raw("dealias")?)?,
    };
    let grid = SpectralGrid::new(p.get("modes")?)?;
    let spec = build_rswe(&params, &grid)?;
    let u0 = rswe_initial_condition(&grid);
    Ok(Setup { grid, spec, u0 })
}

/// Windows equal to the level time steps.
fn hierarchy(p: &Params, s: &Setup, levels: usize, coarsen: usize, top_iterations: usize) -> Result<MethodConfig> {
    let fine: f64 = p.get("fine_dt")?;
    let coarse = fine * (coarsen as f64).powi(levels as i32 - 1);
    let mut cfg = MethodConfig::uniform(levels, coarse, coarsen, p.get("k1")?, 0.0, p.get("t_end")?, s.u0.clone())
        .with_integrator(Integrator::Strang);
    let etas: Vec<f64> = cfg.levels[..levels - 1].iter().map(|l| l.dt).collect();
    cfg = cfg.with_etas(&etas);
    cfg.level_mut(levels - 1).iterations = top_iterations;
    set_quadrature(&mut cfg, &s.spec, p.raw("quadrature")?)?;
    Ok(cfg)
}

fn both(p: &Params, s: &Setup) -> Result<Vec<(String, MethodConfig)>> {
    Ok(vec![
        ("three-level".into(), hierarchy(p, s, 3, p.get("coarsen")?, p.get("k2")?)?),
        (
            "two-level".into(),
            hierarchy(p, s, 2, p.get("two_level_coarsen")?, p.get("two_level_iterations")?)?,
        ),
    ])
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    both(p, &setup(p)?)
}

fn run(p: &Params, ctx: &Context) -> Result<Output> {
    let s = setup(p)?;
    let t_end: f64 = p.get("t_end")?;
    let fine: f64 = p.get("fine_dt")?;
    let key = format!(
        "rswe modes={} eps={} F={} mu={} dealias={}",
        p.raw("modes")?,
        p.raw("epsilon")?,
        p.raw("burger")?,
        p.raw("mu")?,
        p.raw("dealias")?
    );
    let (reference, ref_secs) = timed(|| {
        Ok(reference_solution(&s.spec, &key, &s.u0, &[0.0, t_end], fine, Integrator::Strang, ctx.cache_dir.as_deref())?)
    })?;
    let w_ref = reference.last().clone();
    let fields = rswe_fields(&s.grid, &s.spec, t_end, &w_ref)?;
    let max_h = fields[2].iter().fold(0.0f64, |m, h| if h.is_finite() { m.max(h.abs()) } else { f64::INFINITY });

    let mut table = Table::new(&["method", "iteration", "error", "serial_steps", WALL_TIME]);
    for (method, cfg) in both(p, &s)? {
        let cfg = cfg.with_workers(ctx.workers);
        let (run, secs) = timed(|| solve(&cfg, &s.spec))?;
        for (k, it) in run.iterates.iter().enumerate() {
            let e = rswe_relative_linf(&s.grid, &s.spec, t_end, it.last(), &w_ref)?;
            table.push(vec![method.as_str().into(), k.into(), e.into(), run.serial_steps.into(), secs.into()])?;
        }
    }
    let plot = plot_data(&table, "iteration", "method", "error", "")?;
    let mut out = Output { table, plot: Some(plot), ..Output::default() };
    out.metrics.insert("reference_max_height".into(), max_h);
    out.metrics.insert("reference_seconds".into(), ref_secs);
    Ok(out)
}

fn errors(t: &Table, method: &str) -> Result<Vec<f64>> {
    t.filter("method", method)?.floats("error")
}

fn common(out: &Output) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let max_h = out.metrics.get("reference_max_height").copied().unwrap_or(f64::NAN);
    lines.push(CheckLine::property(
        "fine reference stays bounded",
        max_h.is_finite() && max_h <= MAX_HEIGHT,
        format!("max |h| at the final time {max_h:.4}"),
    ));
    let three = errors(&out.table, "three-level")?;
    if three.len() < 6 {
        bail!("need at least five three-level iterations, got {}", three.len().saturating_sub(1));
    }
    let first = &three[1..6];
    let decreasing = first.windows(2).all(|w| w[1] < w[0]);
    lines.push(CheckLine::property(
        "three-level error decreases over iterations 1..5",
        decreasing,
        first.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
    ));
    Ok(lines)
}

fn two_level_line(out: &Output, p: &Params, ctx: &Context, published: f64, n: usize, k: usize, t_end: f64) -> Result<Option<CheckLine>> {
    let full = ctx.heavy
        && p.get::<usize>("modes")? == 128
        && p.get::<f64>("t_end")? == t_end
        && p.get::<usize>("two_level_coarsen")? == n
        && p.get::<usize>("two_level_iterations")? == k;
    if !full {
        return Ok(None);
    }
    let two = errors(&out.table, "two-level")?;
    Ok(Some(CheckLine::compare(
        format!("two-level N={n} k={k} error"),
        Tolerance::Factor(3.0),
        two[k],
        published,
    )))
}

fn check_f1(p: &Params, out: &Output, ctx: &Context) -> Result<Vec<CheckLine>> {
    let mut lines = common(out)?;
    lines.extend(two_level_line(out, p, ctx, PAPER_TWO_LEVEL_F1, 40, 2, 48.0)?);
    Ok(lines)
}

fn check_f100(p: &Params, out: &Output, ctx: &Context) -> Result<Vec<CheckLine>> {
    let mut lines = common(out)?;
    lines.extend(two_level_line(out, p, ctx, PAPER_TWO_LEVEL_F100, 60, 2, 45.0)?);
    Ok(lines)
}
