//! Three decoupled oscillators with frequencies 2, 20 and 200: error of the
//! second component against the number of top-level iterations.

use anyhow::{bail, Result};
use mlp_core::complexity::serial_steps;
use mlp_core::norms::{relative_modulus, relative_nodal_l1};
use mlp_core::parareal::MultilevelSolver;
use mlp_core::problems::ThreeTimescaleProblem;
use mlp_core::{MethodConfig, C64};

use super::{set_quadrature, timed, CheckLine, Context, ExperimentDef, Output};
use crate::params::Params;
use crate::table::{plot_data, Table, WALL_TIME};

/// Relative distance from the embedded two-level error that counts as
/// converged.
pub const PLATEAU_BAND: f64 = 0.05;

pub const DEF: ExperimentDef = ExperimentDef {
    id: "three_scale_iters",
    summary: "three-timescale system on [0, 6], 3 levels with averaging, error vs k2",
    defaults: &[
        ("dt", "0.4,0.3,0.24,0.2"),
        ("k2_max", "6"),
        ("k1", "3"),
        ("coarsen", "10"),
        ("eta", "1,0.1"),
        ("omegas", "2,20,200"),
        ("u0", "1,1,1"),
        ("component", "1"),
        ("t_end", "6"),
        ("quadrature", "auto"),
    ],
    heavy: &[],
    configs,
    run,
    check,
};

fn problem(p: &Params) -> Result<ThreeTimescaleProblem> {
    let w = p.list::<f64>("omegas")?;
    let u = p.list::<f64>("u0")?;
    if w.len() != 3 || u.len() != 3 {
        bail!("omegas and u0 need three entries each");
    }
    Ok(ThreeTimescaleProblem::new(
        [w[0], w[1], w[2]],
        [C64::new(u[0], 0.0), C64::new(u[1], 0.0), C64::new(u[2], 0.0)],
    )?)
}

fn config(p: &Params, dt: f64, k2: usize) -> Result<MethodConfig> {
    let prob = problem(p)?;
    let mut cfg = MethodConfig::uniform(3, dt, p.get("coarsen")?, p.get("k1")?, 0.0, p.get("t_end")?, prob.u0.to_vec())
        .with_etas(&p.list::<f64>("eta")?);
    cfg.level_mut(2).iterations = k2;
    set_quadrature(&mut cfg, &prob.spec(), p.raw("quadrature")?)?;
    Ok(cfg)
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    let k2: usize = p.get("k2_max")?;
    p.list::<f64>("dt")?
        .into_iter()
        .map(|dt| Ok((format!("dt={dt} k2={k2}"), config(p, dt, k2)?)))
        .collect()
}

fn run(p: &Params, ctx: &Context) -> Result<Output> {
    let prob = problem(p)?;
    let spec = prob.spec();
    let j: usize = p.get("component")?;
    if j >= 3 {
        bail!("component must be 0, 1 or 2");
    }
    let k2_max: usize = p.get("k2_max")?;
    let mut table = Table::new(&["dt", "k2", "error", "error_mean", "embedded_error", "serial_steps", WALL_TIME]);
    for dt in p.list::<f64>("dt")? {
        let cfg = config(p, dt, k2_max)?.with_workers(ctx.workers);
        let solver = MultilevelSolver::new(&cfg, &spec)?;
        let (run, secs) = timed(|| Ok(solver.run()?))?;
        let embedded = solver.embedded_serial()?;
        let t_end = embedded.final_time();
        let exact_end = prob.exact(t_end)?;
        let embedded_err = relative_modulus(embedded.last()[j], exact_end[j]);
        for (k2, it) in run.iterates.iter().enumerate() {
            let exact = it
                .times()
                .iter()
                .map(|&t| prob.exact(t))
                .collect::<mlp_core::Result<Vec<_>>>()?;
            let err = relative_modulus(it.last()[j], exact_end[j]);
            let mean = relative_nodal_l1(it.states(), &exact, Some(j))?;
            let steps = if k2 == 0 {
                cfg.coarse_slices() as u64
            } else {
                let mut c = cfg.clone();
                c.level_mut(2).iterations = k2;
                serial_steps(&c)?.total
            };
            table.push(vec![
                dt.into(),
                k2.into(),
                err.into(),
                mean.into(),
                embedded_err.into(),
                steps.into(),
                secs.into(),
            ])?;
        }
    }
    let plot = plot_data(&table, "k2", "dt", "error", "ΔT=")?;
    Ok(Output { table, plot: Some(plot), ..Output::default() })
}

/// The error decreases with each iteration until it enters the band around
/// the embedded error, and the last iterate lies inside the band.
pub fn converges_to_embedded(errors: &[f64], embedded: f64) -> (bool, String) {
    let in_band = |e: f64| (e - embedded).abs() <= PLATEAU_BAND * embedded;
    let mut reasons = Vec::new();
    for (i, w) in errors.windows(2).enumerate() {
        if w[1] > w[0] && !(in_band(w[0]) && in_band(w[1])) {
            reasons.push(format!("rises from {:.3e} to {:.3e} at k2={}", w[0], w[1], i + 2));
        }
    }
    let last = *errors.last().unwrap_or(&f64::NAN);
    if !in_band(last) {
        reasons.push(format!(
            "last error {last:.3e} is {:.1}% from the embedded {embedded:.3e}",
            100.0 * (last - embedded).abs() / embedded
        ));
    }
    if reasons.is_empty() {
        (true, format!("last {last:.3e}, embedded {embedded:.3e}"))
    } else {
        (false, reasons.join("; "))
    }
}

fn check(p: &Params, out: &Output, _ctx: &Context) -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    let dts = out.table.floats("dt")?;
    let ks = out.table.floats("k2")?;
    let errs = out.table.floats("error")?;
    let emb = out.table.floats("embedded_error")?;
    let k_hi = p.get::<usize>("k2_max")?.min(6) as f64;
    for dt in p.list::<f64>("dt")? {
        let idx: Vec<usize> = (0..dts.len()).filter(|&i| dts[i] == dt && ks[i] >= 1.0 && ks[i] <= k_hi).collect();
        let series: Vec<f64> = idx.iter().map(|&i| errs[i]).collect();
        let embedded = idx.first().map(|&i| emb[i]).unwrap_or(f64::NAN);
        let (ok, detail) = converges_to_embedded(&series, embedded);
        lines.push(CheckLine::property(format!("ΔT={dt} final-time error converges"), ok, detail));
    }
    Ok(lines)
}
