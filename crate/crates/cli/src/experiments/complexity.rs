//! Serial-step tables and the optimal coarsening factor.

use anyhow::Result;
use mlp_core::complexity::{optimal_coarsening, serial_steps};
use mlp_core::{MethodConfig, C64};

use super::{CheckLine, Context, ExperimentDef, Output, Tolerance};
use crate::params::Params;
use crate::table::{Table, Value};

/// Published counts: `(table, parameter, steps)`.
pub const PAPER: [(&str, usize, u64); 17] = [
    ("spring_two_level", 1, 120),
    ("spring_two_level", 2, 230),
    ("spring_two_level", 3, 340),
    ("spring_two_level", 4, 450),
    ("spring_two_level", 5, 560),
    ("spring_three_level", 1, 70),
    ("spring_three_level", 2, 130),
    ("spring_three_level", 3, 190),
    ("spring_three_level", 4, 250),
    ("spring_three_level", 5, 310),
    ("rswe_f1_two_level", 2, 7280),
    ("rswe_f100_three_level", 1, 410),
    ("rswe_f100_three_level", 2, 720),
    ("rswe_f100_three_level", 3, 1030),
    ("rswe_f100_three_level", 4, 1340),
    ("rswe_f100_three_level", 5, 1650),
    ("rswe_f100_three_level", 6, 1960),
];

pub const DEF: ExperimentDef = ExperimentDef {
    id: "complexity_tables",
    summary: "serial-step counts of the published configurations and N_opt",
    defaults: &[("k_max", "6"), ("fine_steps", "96000"), ("nopt_levels", "2,3,4,5")],
    heavy: &[],
    configs,
    run,
    check,
};

fn ic() -> Vec<C64> {
    vec![C64::new(1.0, 0.0)]
}

/// `(table, parameter, config)` for every counted configuration.
fn counted(p: &Params) -> Result<Vec<(&'static str, usize, MethodConfig)>> {
    let k_max: usize = p.get("k_max")?;
    let mut out = Vec::new();
    for k in 1..=k_max.max(5) {
        out.push(("spring_two_level", k, MethodConfig::uniform(2, 5.0, 100, k, 0.0, 50.0, ic())));
        let mut c = MethodConfig::uniform(3, 5.0, 10, 2, 0.0, 50.0, ic());
        c.level_mut(2).iterations = k;
        out.push(("spring_three_level", k, c));
    }
    for k in 1..=k_max {
        out.push(("rswe_f1_two_level", k, MethodConfig::uniform(2, 0.02, 40, k, 0.0, 48.0, ic())));
        let mut c = MethodConfig::uniform(3, 0.2, 20, 3, 0.0, 48.0, ic());
        c.level_mut(2).iterations = k;
        out.push(("rswe_f1_three_level", k, c));
        out.push(("rswe_f100_two_level", k, MethodConfig::uniform(2, 0.03, 60, k, 0.0, 45.0, ic())));
        let mut c = MethodConfig::uniform(3, 0.45, 30, 3, 0.0, 45.0, ic());
        c.level_mut(2).iterations = k;
        out.push(("rswe_f100_three_level", k, c));
    }
    Ok(out)
}

fn configs(p: &Params) -> Result<Vec<(String, MethodConfig)>> {
    Ok(counted(p)?.into_iter().map(|(t, k, c)| (format!("{t} k={k}"), c)).collect())
}

fn run(p: &Params, _ctx: &Context) -> Result<Output> {
    let mut table = Table::new(&["table", "param", "steps", "n_opt", "cost"]);
    for (name, k, cfg) in counted(p)? {
        let steps = serial_steps(&cfg)?.total;
        table.push(vec![name.into(), k.into(), steps.into(), Value::Empty, Value::Empty])?;
    }
    let x: f64 = p.get("fine_steps")?;
    for l in p.list::<u32>("nopt_levels")? {
        let o = optimal_coarsening(l, x)?;
        table.push(vec!["n_opt".into(), (l as usize).into(), Value::Empty, o.n_opt.into(), o.cost_opt.into()])?;
        for (n, cost) in [o.lower, o.upper] {
            table.push(vec![
                format!("n_opt_L{l}_integer").into(),
                (n as usize).into(),
                Value::Empty,
                Value::Empty,
                cost.into(),
            ])?;
        }
    }
    Ok(Output { table, ..Output::default() })
}

fn check(_p: &Params, out: &Output, _ctx: &Context) -> Result<Vec<CheckLine>> {
    let t = &out.table;
    let (jt, jp, js) = (t.column("table")?, t.column("param")?, t.column("steps")?);
    let mut lines = Vec::new();
    for (name, k, expected) in PAPER {
        let got = t
            .rows
            .iter()
            .find(|r| r[jt].as_str() == Some(name) && r[jp].as_u64() == Some(k as u64))
            .and_then(|r| r[js].as_u64());
        lines.push(match got {
            Some(g) => CheckLine::compare(format!("{name} k={k}"), Tolerance::ExactInteger, g as f64, expected as f64),
            None => CheckLine::property(format!("{name} k={k}"), false, "row missing"),
        });
    }
    Ok(lines)
}
