//! Swinging spring: sensitivity of the three-level method to the window on
//! the intermediate level.

use anyhow::{bail, Result};
use mlp_core::problems::{reference_solution, SwingingSpring};
use mlp_core::{Integrator, MethodConfig, Trajectory};

use super::{set_quadrature, solve, timed, CheckLine, Context, ExperimentDef, Output};
use crate::params::Params;
use crate::table::{plot_data, Table, Value, WALL_TIME};

/// Allowed relative gap between the three-level run with equal windows and
/// the two-level run, per iteration.
pub const TRACKING_BAND: f64 = 0.2;

pub const DEF: ExperimentDef = ExperimentDef {
    id: "spring_windows",
    summary: "swinging spring on [0, 50], x1 error vs iteration for several level-1 windows",
    defaults: &[
        // multiples of the level-2 window
        ("eta_factors", "1,0.375,0.1"),
        // level-2 window in units of the fastest linear period
        ("eta_periods", "2"),
        ("dts", "5,0.5,0.05"),
        ("k1", "2"),
        ("iterations", "5"),
        ("t_end", "50"),
        ("dt_ref", "0.001"),
        ("omega_r", "1"),
        ("omega_z", "2"),
        ("lambda", "0.1"),
        ("x0", "0.1,0,0.1,0,0.1,0"),
        ("quadrature", "auto"),
    ],
    heavy: &[],
    configs,
    run,
    check,
};

fn spring(p: &Params) -> Result<SwingingSpring> {
    let x = p.list::<f64>("x0")?;
    if x.len() != 6 {
        bail!("x0 needs six entries");
    }
    Ok(SwingingSpring::new(
        p.get("omega_r")?,
        p.get("omega_z")?,
        p.get("lambda")?,
        [x[0], x[1], x[2], x[3], x[4], x[5]],
    )?)
}

fn steps(p: &Params) -> Result<[f64; 3]> {
    let d = p.list::<f64>("dts")?;
    if d.len() != 3 {
        bail!("dts lists the steps of levels 2, 1 and 0");
    }
    Ok([d[0], d[1], d[2]])
}

fn eta2(p: &Params, s: &SwingingSpring) -> Result<f64> {
    Ok(p.get::<f64>("eta_periods")? * s.fast_period())
}

fn two_level(p: &Params) -> Result<MethodConfig> {
    let s = spring(p)?;
    let [d2, _, d0] = steps(p)?;
    let n = (d2 / d0).round() as usize;
    let mut cfg = MethodConfig::uniform(2, d2, n, p.get("iterations")?, 0.0, p.get("t_end")?, s.initial_state())
        .with_etas(&[eta2(p, &s)?]);
    set_quadrature(&mut cfg, &s.spec(), p.raw("quadrature")?)?;
    Ok(cfg)
}

fn three_level(p: &Params, factor: f64) -> Result<MethodConfig> {
    let s = spring(p)?;
    let [d2, d1, d0] = steps(p)?;
    let mut cfg = MethodConfig::uniform(3, d2, 2, p.get("k1")?, 0.0, p.get("t_end")?, s.initial_state());
    cfg.levels[1].dt = d1;
    cfg.levels[2].dt = d0;
    cfg.level_mut(2).iterations = p.get("iterations")?;
    let e2 = eta2(p, &s)?;
    let mut cfg = cfg.with_etas(&[e2, factor * e2]);
    set_quadrature(&mut cfg, &s.spec(), p.raw("quadrature")?)?;
    Ok(cfg)
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    let mut out = vec![("two-level".to_string(), two_level(p)?)];
    for f in p.list::<f64>("eta_factors")? {
        out.push((format!("three-level eta1={f}*eta2"), three_level(p, f)?));
    }
    Ok(out)
}

fn x1_errors(s: &SwingingSpring, iterates: &[Trajectory], reference: &[f64]) -> Result<Vec<f64>> {
    let spec = s.spec();
    iterates
        .iter()
        .map(|it| {
            let t = it.final_time();
            let x = s.physical(&spec.to_physical(t, it.last())?);
            Ok((x[0] - reference[0]).abs())
        })
        .collect()
}

fn run(p: &Params, ctx: &Context) -> Result<Output> {
    let s = spring(p)?;
    let spec = s.spec();
    let t_end: f64 = p.get("t_end")?;
    let key = format!(
        "spring wr={} wz={} lambda={} x0={}",
        s.omega_r,
        s.omega_z,
        s.lambda,
        p.raw("x0")?
    );
    let reference = reference_solution(
        &spec,
        &key,
        &s.initial_state(),
        &[0.0, t_end],
        p.get("dt_ref")?,
        Integrator::Rk2,
        ctx.cache_dir.as_deref(),
    )?;
    let ref_x = s.physical(&spec.to_physical(t_end, reference.last())?).to_vec();
    let mut table = Table::new(&["method", "eta1_factor", "iteration", "error", "serial_steps", WALL_TIME]);
    let mut runs = vec![("two-level".to_string(), Value::Empty, two_level(p)?)];
    for f in p.list::<f64>("eta_factors")? {
        runs.push(("three-level".to_string(), Value::Float(f), three_level(p, f)?));
    }
    for (method, factor, cfg) in runs {
        let cfg = cfg.with_workers(ctx.workers);
        let (run, secs) = timed(|| solve(&cfg, &spec))?;
        for (k, e) in x1_errors(&s, &run.iterates, &ref_x)?.into_iter().enumerate() {
            table.push(vec![
                method.as_str().into(),
                factor.clone(),
                k.into(),
                e.into(),
                run.serial_steps.into(),
                secs.into(),
            ])?;
        }
    }
    let mut labelled = table.clone();
    let (jm, jf) = (table.column("method")?, table.column("eta1_factor")?);
    for row in &mut labelled.rows {
        let label = match &row[jf] {
            Value::Float(f) => format!("{} eta1={f}*eta2", row[jm]),
            _ => row[jm].to_string(),
        };
        row[jm] = Value::Text(label);
    }
    let plot = plot_data(&labelled, "iteration", "method", "error", "")?;
    Ok(Output { table, plot: Some(plot), ..Output::default() })
}

fn series(t: &Table, method: &str, factor: Option<f64>) -> Result<Vec<f64>> {
    let (jm, jf, je) = (t.column("method")?, t.column("eta1_factor")?, t.column("error")?);
    Ok(t.rows
        .iter()
        .filter(|r| r[jm].as_str() == Some(method) && r[jf].as_f64() == factor)
        .map(|r| r[je].as_f64().unwrap_or(f64::NAN))
        .collect())
}

fn check(p: &Params, out: &Output, _ctx: &Context) -> Result<Vec<CheckLine>> {
    let t = &out.table;
    let iterations: usize = p.get("iterations")?;
    let two = series(t, "two-level", None)?;
    let factors = p.list::<f64>("eta_factors")?;
    let mut lines = Vec::new();
    if factors.contains(&1.0) {
        let equal = series(t, "three-level", Some(1.0))?;
        let mut worst = (0, 0.0f64);
        for k in 1..=iterations.min(two.len() - 1).min(equal.len() - 1) {
            let gap = (equal[k] - two[k]).abs() / two[k];
            if gap > worst.1 {
                worst = (k, gap);
            }
        }
        lines.push(CheckLine::property(
            "equal windows track the two-level run",
            worst.1 <= TRACKING_BAND,
            format!("largest relative gap {:.3} at iteration {} (limit {TRACKING_BAND})", worst.1, worst.0),
        ));
    }
    let mut sorted = factors.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let at2: Vec<f64> = sorted
        .iter()
        .map(|&f| series(t, "three-level", Some(f)).map(|s| s.get(2).copied().unwrap_or(f64::NAN)))
        .collect::<Result<_>>()?;
    let ordered = at2.windows(2).all(|w| w[0] <= w[1]);
    lines.push(CheckLine::property(
        "smaller level-1 window is less accurate at iteration 2",
        ordered,
        sorted
            .iter()
            .zip(&at2)
            .map(|(f, e)| format!("{f}: {e:.4e}"))
            .collect::<Vec<_>>()
            .join(", "),
    ));
    Ok(lines)
}
