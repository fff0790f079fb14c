//! Registry of the reproducible experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use mlp_core::complexity::serial_steps;
use mlp_core::parareal::{MultilevelSolver, PararealRun};
use mlp_core::{MethodConfig, ProblemSpec};

use crate::params::{render_section, ConfigFile, Params};
use crate::table::Table;

mod complexity;
mod decay;
mod oscillatory;
mod rswe;
mod spring;
mod three_scale;

/// Settings shared by every experiment run.
#[derive(Clone, Debug)]
pub struct Context {
    pub workers: usize,
    /// Switch to the full-size parameter sets.
    pub heavy: bool,
    pub cache_dir: Option<PathBuf>,
    pub config: Option<ConfigFile>,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            workers: 1,
            heavy: false,
            cache_dir: Some(mlp_core::problems::default_cache_dir()),
            config: None,
        }
    }
}

/// How a checked quantity is compared with its expectation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    ExactInteger,
    Relative(f64),
    /// Within this factor either way.
    Factor(f64),
    /// Ordering or convergence assertion.
    Property,
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::ExactInteger => write!(f, "exact"),
            Tolerance::Relative(r) => write!(f, "rel {r:e}"),
            Tolerance::Factor(x) => write!(f, "factor {x}"),
            Tolerance::Property => write!(f, "property"),
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, got: f64, expected: f64) -> bool {
        match *self {
            Tolerance::ExactInteger => got == expected,
            Tolerance::Relative(r) => ((got - expected) / expected).abs() <= r,
            Tolerance::Factor(x) => got > 0.0 && got <= expected * x && got >= expected / x,
            Tolerance::Property => true,
        }
    }
}

/// Outcome of one comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub tolerance: Tolerance,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn compare(name: impl Into<String>, tolerance: Tolerance, got: f64, expected: f64) -> Self {
        Self {
            name: name.into(),
            tolerance,
            passed: tolerance.accepts(got, expected),
            detail: match tolerance {
                Tolerance::ExactInteger => format!("got {got}, expected {expected}"),
                _ => format!("got {got:e}, expected {expected:e}"),
            },
        }
    }

    pub fn property(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), tolerance: Tolerance::Property, passed, detail: detail.into() }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} [{}]: {}", self.name, self.tolerance, self.detail)
    }
}

/// Result of an experiment run.
#[derive(Clone, Debug, Default)]
pub struct Output {
    pub table: Table,
    /// Long-format `(x, series, y)` data for error-versus-iteration plots.
    pub plot: Option<Table>,
    /// Scalar diagnostics used by the checks.
    pub metrics: BTreeMap<String, f64>,
}

type ConfigsFn = fn(&Params) -> Result<Vec<(String, MethodConfig)>>;
type RunFn = fn(&Params, &Context) -> Result<Output>;
type CheckFn = fn(&Params, &Output, &Context) -> Result<Vec<CheckLine>>;

pub struct ExperimentDef {
    pub id: &'static str,
    pub summary: &'static str,
    pub defaults: &'static [(&'static str, &'static str)],
    /// Applied on top of the defaults with `--heavy`.
    pub heavy: &'static [(&'static str, &'static str)],
    /// Every solver configuration the run uses, labelled.
    pub configs: ConfigsFn,
    pub run: RunFn,
    pub check: CheckFn,
}

impl ExperimentDef {
    /// Defaults, then heavy settings, then the config-file section, then
    /// command-line overrides.
    pub fn params(&self, ctx: &Context, overrides: &[(String, String)]) -> Result<Params> {
        let mut p = Params::from_defaults(self.defaults);
        if ctx.heavy {
            for (k, v) in self.heavy {
                p.set(k, v)?;
            }
        }
        if let Some(section) = ctx.config.as_ref().and_then(|c| c.section(self.id)) {
            p.apply(section).with_context(|| format!("config section [{}]", self.id))?;
        }
        p.apply(overrides)?;
        Ok(p)
    }
}

static REGISTRY: [ExperimentDef; 7] = [
    decay::DEF,
    oscillatory::DEF,
    three_scale::DEF,
    spring::DEF,
    rswe::F1,
    rswe::F100,
    complexity::DEF,
];

pub fn registry() -> &'static [ExperimentDef] {
    &REGISTRY
}

pub fn find(id: &str) -> Result<&'static ExperimentDef> {
    REGISTRY.iter().find(|e| e.id == id).ok_or_else(|| {
        anyhow!(
            "unknown experiment {id:?}; available: {}",
            REGISTRY.iter().map(|e| e.id).collect::<Vec<_>>().join(", ")
        )
    })
}

pub fn run_experiment(id: &str, overrides: &[(String, String)], ctx: &Context) -> Result<(Params, Output)> {
    let def = find(id)?;
    let params = def.params(ctx, overrides)?;
    let out = (def.run)(&params, ctx).with_context(|| format!("experiment {id}"))?;
    Ok((params, out))
}

/// Runs `id` with its default parameters and compares against the
/// configured expectations.
pub fn check_experiment(id: &str, ctx: &Context) -> Result<Vec<CheckLine>> {
    let def = find(id)?;
    let (params, out) = run_experiment(id, &[], ctx)?;
    (def.check)(&params, &out, ctx)
}

/// Writes `<id>.csv`, `<id>_plot.csv` when there is plot data, and
/// `<id>.cfg` with the parameters used.
pub fn write_outputs(dir: &Path, id: &str, params: &Params, out: &Output) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let csv = dir.join(format!("{id}.csv"));
    out.table.write_csv(&csv)?;
    written.push(csv);
    if let Some(plot) = &out.plot {
        let path = dir.join(format!("{id}_plot.csv"));
        plot.write_csv(&path)?;
        written.push(path);
    }
    let cfg = dir.join(format!("{id}.cfg"));
    std::fs::write(&cfg, render_section(id, params)).with_context(|| format!("writing {}", cfg.display()))?;
    written.push(cfg);
    Ok(written)
}

/// Runs a configured solve and cross-checks its serial-step count against
/// the independent accounting.
pub(crate) fn solve(cfg: &MethodConfig, problem: &ProblemSpec) -> Result<PararealRun> {
    let run = MultilevelSolver::new(cfg, problem)?.run()?;
    let expected = serial_steps(cfg)?.total;
    if run.serial_steps != expected {
        bail!("solver reported {} serial steps, accounting gives {expected}", run.serial_steps);
    }
    Ok(run)
}

/// Quadrature nodes per averaged level: the configured count when `spec`
/// is a number, otherwise `max(64, ⌈ω_max η_l / ε⌉)` so that the fastest
/// phase is resolved across the window.
pub(crate) fn set_quadrature(cfg: &mut MethodConfig, problem: &ProblemSpec, spec: &str) -> Result<()> {
    if spec == "auto" {
        let fastest = problem.linear().max_frequency() / problem.epsilon();
        for l in 1..cfg.num_levels() {
            if let Some(eta) = cfg.level(l).eta {
                let m = ((fastest * eta).ceil() as usize).max(64);
                cfg.level_mut(l).quadrature_nodes = Some(m);
            }
        }
    } else {
        cfg.quadrature_nodes = spec
            .parse()
            .map_err(|e| anyhow!("quadrature must be \"auto\" or a node count, got {spec:?}: {e}"))?;
    }
    Ok(())
}

pub(crate) fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

pub(crate) fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("expected a boolean, got {s:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        let mut ids: Vec<_> = registry().iter().map(|e| e.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), registry().len());
        assert!(find("nope").is_err());
    }

    #[test]
    fn defaults_build_valid_configs() {
        for def in registry() {
            let p = def.params(&Context::default(), &[]).unwrap();
            for (label, cfg) in (def.configs)(&p).unwrap() {
                cfg.validate().unwrap_or_else(|e| panic!("{} {label}: {e}", def.id));
            }
            let heavy = Context { heavy: true, ..Context::default() };
            let p = def.params(&heavy, &[]).unwrap();
            for (label, cfg) in (def.configs)(&p).unwrap() {
                cfg.validate().unwrap_or_else(|e| panic!("{} {label} (heavy): {e}", def.id));
            }
        }
    }

    #[test]
    fn overrides_are_validated() {
        let def = find("decay_levels").unwrap();
        assert!(def.params(&Context::default(), &[("bogus".into(), "1".into())]).is_err());
    }

    #[test]
    fn tolerance_classes() {
        assert!(Tolerance::ExactInteger.accepts(7280.0, 7280.0));
        assert!(!Tolerance::ExactInteger.accepts(7281.0, 7280.0));
        assert!(Tolerance::Relative(1e-2).accepts(1.005, 1.0));
        assert!(!Tolerance::Relative(1e-2).accepts(1.02, 1.0));
        assert!(Tolerance::Factor(2.0).accepts(0.6, 1.0));
        assert!(!Tolerance::Factor(2.0).accepts(0.4, 1.0));
        assert!(!Tolerance::Factor(2.0).accepts(-1.0, 1.0));
    }
}
