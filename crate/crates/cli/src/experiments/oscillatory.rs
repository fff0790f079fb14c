//! Scalar modulation equation `dw/dt = −e^{irt}w²`: error at fixed finest
//! step against the number of levels, with windows growing tenfold per level.

use anyhow::{bail, Result};
use mlp_core::norms::relative_nodal_l1;
use mlp_core::problems::OscillatoryProblem;
use mlp_core::{MethodConfig, C64};

use super::{set_quadrature, solve, timed, CheckLine, Context, ExperimentDef, Output, Tolerance};
use crate::params::Params;
use crate::table::{Table, WALL_TIME};

/// Published errors as `(r, levels, error)`.
pub const PAPER: [(u32, usize, f64); 9] = [
    (100, 2, 0.0002169750591733674),
    (100, 3, 0.00019811199764541986),
    (1000, 2, 2.1847140061040485e-06),
    (1000, 3, 2.106413305540747e-06),
    (1000, 4, 2.251750942815333e-06),
    (10000, 2, 3.0668862104273734e-07),
    (10000, 3, 3.0480547757705495e-07),
    (10000, 4, 3.0357016877934065e-07),
    (10000, 5, 2.7011063136189545e-07),
];

pub const DEF: ExperimentDef = ExperimentDef {
    id: "oscillatory_sweep",
    summary: "dw/dt = -exp(irt) w^2 on [0, 1], V-cycle with averaging",
    defaults: &[
        ("r", "100,1000"),
        // empty: the published level counts for each r
        ("levels", ""),
        // empty: 1e-3, 1e-4 and 2.5e-5 for r = 100, 1000, 10000
        ("fine_dt", ""),
        ("w0", "1"),
        ("coarsen", "10"),
        ("iterations", "1"),
        ("t_end", "1"),
        ("quadrature", "auto"),
    ],
    heavy: &[("r", "100,1000,10000")],
    configs,
    run,
    check,
};

fn fine_dt(p: &Params, r: f64) -> Result<f64> {
    if !p.raw("fine_dt")?.is_empty() {
        return p.get("fine_dt");
    }
    Ok(match r as u32 {
        100 => 1e-3,
        1000 => 1e-4,
        10000 => 2.5e-5,
        _ => bail!("no default finest step for r = {r}; set fine_dt"),
    })
}

fn level_counts(p: &Params, r: f64) -> Result<Vec<usize>> {
    let given = p.list::<usize>("levels")?;
    if !given.is_empty() {
        return Ok(given);
    }
    let published: Vec<usize> = PAPER.iter().filter(|(pr, _, _)| *pr as f64 == r).map(|(_, l, _)| *l).collect();
    if published.is_empty() {
        bail!("no published level counts for r = {r}; set levels");
    }
    Ok(published)
}

fn config(p: &Params, r: f64, levels: usize) -> Result<MethodConfig> {
    let n: usize = p.get("coarsen")?;
    let coarse_dt = fine_dt(p, r)? * (n as f64).powi(levels as i32 - 1);
    // window 20/r on level 1, ten times larger per level
    let etas: Vec<f64> = (1..levels).rev().map(|l| 20.0 / r * 10f64.powi(l as i32 - 1)).collect();
    let w0 = C64::new(p.get("w0")?, 0.0);
    let mut cfg = MethodConfig::uniform(levels, coarse_dt, n, p.get("iterations")?, 0.0, p.get("t_end")?, vec![w0])
        .with_etas(&etas);
    let problem = OscillatoryProblem::new(r)?.spec();
    set_quadrature(&mut cfg, &problem, p.raw("quadrature")?)?;
    Ok(cfg)
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    let mut out = Vec::new();
    for r in p.list::<f64>("r")? {
        for l in level_counts(p, r)? {
            out.push((format!("r={r} levels={l}"), config(p, r, l)?));
        }
    }
    Ok(out)
}

fn run(p: &Params, ctx: &Context) -> Result<Output> {
    let mut table = Table::new(&["r", "levels", "error", "serial_steps", WALL_TIME]);
    for r in p.list::<f64>("r")? {
        let mut problem = OscillatoryProblem::new(r)?;
        problem.w0 = C64::new(p.get("w0")?, 0.0);
        let spec = problem.spec();
        for l in level_counts(p, r)? {
            let cfg = config(p, r, l)?.with_workers(ctx.workers);
            let (run, secs) = timed(|| solve(&cfg, &spec))?;
            let traj = run.final_trajectory();
            let exact = traj
                .times()
                .iter()
                .map(|&t| Ok(vec![problem.exact(t)?]))
                .collect::<mlp_core::Result<Vec<_>>>()?;
            let err = relative_nodal_l1(traj.states(), &exact, None)?;
            table.push(vec![r.into(), l.into(), err.into(), run.serial_steps.into(), secs.into()])?;
        }
    }
    Ok(Output { table, ..Output::default() })
}

fn check(_p: &Params, out: &Output, _ctx: &Context) -> Result<Vec<CheckLine>> {
    let rs = out.table.floats("r")?;
    let levels = out.table.floats("levels")?;
    let errors = out.table.floats("error")?;
    let mut lines = Vec::new();
    for ((r, l), e) in rs.iter().zip(&levels).zip(&errors) {
        if let Some((_, _, expected)) = PAPER.iter().find(|(pr, pl, _)| *pr as f64 == *r && *pl as f64 == *l) {
            lines.push(CheckLine::compare(format!("r={r} levels={l}"), Tolerance::Factor(2.0), *e, *expected));
        }
    }
    Ok(lines)
}
