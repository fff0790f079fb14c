//! Linear decay without averaging: error against the number of levels at a
//! fixed coarsest step.

use anyhow::Result;
use mlp_core::norms::relative_nodal_l1;
use mlp_core::problems::{decay, decay_exact};
use mlp_core::{MethodConfig, C64};

use super::{solve, timed, CheckLine, Context, ExperimentDef, Output, Tolerance};
use crate::params::Params;
use crate::table::{Table, WALL_TIME};

/// Published errors by number of levels.
pub const PAPER: [(usize, f64); 7] = [
    (2, 1.2566212807763046e-05),
    (3, 1.9562958164422008e-05),
    (4, 1.9807099440426344e-05),
    (5, 1.9809587023590493e-05),
    (6, 1.9809615854133382e-05),
    (7, 1.9809616125891306e-05),
    (8, 1.980961620086837e-05),
];

pub const DEF: ExperimentDef = ExperimentDef {
    id: "decay_levels",
    summary: "dx/dt = -x on [0, 2], one V-cycle, levels 2..8",
    defaults: &[
        ("levels", "2,3,4,5,6,7,8"),
        ("coarse_dt", "0.25"),
        ("coarsen", "10"),
        ("iterations", "1"),
        ("t_end", "2"),
    ],
    heavy: &[],
    configs,
    run,
    check,
};

fn config(p: &Params, levels: usize) -> Result<MethodConfig> {
    Ok(MethodConfig::uniform(
        levels,
        p.get("coarse_dt")?,
        p.get("coarsen")?,
        p.get("iterations")?,
        0.0,
        p.get("t_end")?,
        vec![C64::new(1.0, 0.0)],
    ))
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    p.list::<usize>("levels")?
        .into_iter()
        .map(|l| Ok((format!("levels={l}"), config(p, l)?)))
        .collect()
}

fn run(p: &Params, ctx: &Context) -> Result<Output> {
    let problem = decay();
    let mut table = Table::new(&["levels", "error", "serial_steps", WALL_TIME]);
    for l in p.list::<usize>("levels")? {
        let cfg = config(p, l)?.with_workers(ctx.workers);
        let (run, secs) = timed(|| solve(&cfg, &problem))?;
        let traj = run.final_trajectory();
        let exact: Vec<Vec<C64>> = traj.times().iter().map(|&t| vec![C64::new(decay_exact(t), 0.0)]).collect();
        let err = relative_nodal_l1(traj.states(), &exact, None)?;
        table.push(vec![l.into(), err.into(), run.serial_steps.into(), secs.into()])?;
    }
    Ok(Output { table, ..Output::default() })
}

fn check(_p: &Params, out: &Output, _ctx: &Context) -> Result<Vec<CheckLine>> {
    let levels = out.table.floats("levels")?;
    let errors = out.table.floats("error")?;
    let mut lines = Vec::new();
    for (l, e) in levels.iter().zip(&errors) {
        if let Some((_, expected)) = PAPER.iter().find(|(pl, _)| *pl as f64 == *l) {
            lines.push(CheckLine::compare(format!("levels={l}"), Tolerance::Relative(1e-2), *e, *expected));
        }
    }
    let deep: Vec<f64> = levels.iter().zip(&errors).filter(|(l, _)| **l >= 3.0).map(|(_, e)| *e).collect();
    if deep.len() >= 2 {
        let (lo, hi) = deep.iter().fold((f64::MAX, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
        let spread = (hi - lo) / lo;
        lines.push(CheckLine::property(
            "errors barely change with depth",
            spread < 0.02,
            format!("relative spread {spread:.3e} over levels >= 3 (limit 2e-2)"),
        ));
    }
    Ok(lines)
}
