//! Level and method configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::C64;

/// Relative tolerance used when checking that step ratios are integers.
const RATIO_TOL: f64 = 1e-9;
/// Default number of Gauss–Legendre nodes for the averaging integral.
pub const DEFAULT_QUADRATURE_NODES: usize = 32;

/// Base time stepper of a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Integrator {
    /// Explicit midpoint rule.
    Rk2,
    /// Strang splitting: exact linear half-steps around an RK2 step.
    Strang,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrator::Rk2 => f.write_str("rk2"),
            Integrator::Strang => f.write_str("strang"),
        }
    }
}

impl FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk2" | "midpoint" => Ok(Integrator::Rk2),
            "strang" => Ok(Integrator::Strang),
            other => Err(Error::Config(format!("unknown integrator '{other}'"))),
        }
    }
}

/// One level of the hierarchy. Level 0 is the finest.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSpec {
    pub level: usize,
    pub dt: f64,
    pub eta: Option<f64>,
    /// Corrections performed at this level; ignored at level 0.
    pub iterations: usize,
    pub integrator: Integrator,
    /// Per-level override of [`MethodConfig::quadrature_nodes`].
    pub quadrature_nodes: Option<usize>,
}

impl LevelSpec {
    pub fn new(level: usize, dt: f64) -> Self {
        Self {
            level,
            dt,
            eta: None,
            iterations: 1,
            integrator: Integrator::Rk2,
            quadrature_nodes: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_iterations(mut self, k: usize) -> Self {
        self.iterations = k;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_quadrature_nodes(mut self, m: usize) -> Self {
        self.quadrature_nodes = Some(m);
        self
    }
}

/// Full configuration of a multi-level solve.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodConfig {
    /// Ordered coarse to fine: `levels[0]` is level `L-1`.
    pub levels: Vec<LevelSpec>,
    pub t0: f64,
    pub t_end: f64,
    pub initial_condition: Vec<C64>,
    pub averaging_enabled: bool,
    pub quadrature_nodes: usize,
    pub workers: usize,
}

impl MethodConfig {
    /// Hierarchy with steps `coarse_dt / N^i` and `iterations` corrections on
    /// every level above 0. `etas`, when given, lists windows coarse to fine
    /// for levels `L-1..1`.
    pub fn uniform(
        num_levels: usize,
        coarse_dt: f64,
        coarsening: usize,
        iterations: usize,
        t0: f64,
        t_end: f64,
        initial_condition: Vec<C64>,
    ) -> Self {
        let levels = (0..num_levels)
            .map(|i| {
                let level = num_levels - 1 - i;
                LevelSpec::new(level, coarse_dt / (coarsening as f64).powi(i as i32))
                    .with_iterations(iterations)
            })
            .collect();
        Self {
            levels,
            t0,
            t_end,
            initial_condition,
            averaging_enabled: false,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            workers: 1,
        }
    }

    /// Enables averaging with windows listed coarse to fine (levels `L-1..1`).
    pub fn with_etas(mut self, etas: &[f64]) -> Self {
        self.averaging_enabled = true;
        for (spec, &eta) in self.levels.iter_mut().zip(etas) {
            spec.eta = Some(eta);
        }
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        for spec in &mut self.levels {
            spec.integrator = integrator;
        }
        self
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Spec of level `l` (0 = finest).
    pub fn level(&self, l: usize) -> &LevelSpec {
        &self.levels[self.levels.len() - 1 - l]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut LevelSpec {
        let n = self.levels.len();
        &mut self.levels[n - 1 - l]
    }

    /// Steps of level `l-1` per step of level `l`.
    pub fn coarsening(&self, l: usize) -> usize {
        (self.level(l).dt / self.level(l - 1).dt).round() as usize
    }

    /// Number of slices of the coarsest grid.
    pub fn coarse_slices(&self) -> usize {
        let top = self.level(self.num_levels() - 1);
        ((self.t_end - self.t0) / top.dt).round() as usize
    }

    /// Quadrature nodes used for the averaging integral on level `l`.
    pub fn nodes_for(&self, l: usize) -> usize {
        self.level(l).quadrature_nodes.unwrap_or(self.quadrature_nodes)
    }

    /// Checks every invariant and returns an error listing the violations.
    pub fn validate(&self) -> Result<()> {
        let v = validate_config(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

fn is_integer_ratio(ratio: f64) -> bool {
    (ratio - ratio.round()).abs() <= RATIO_TOL * ratio.abs().max(1.0)
}

/// Lists every violated invariant of `cfg`; empty when the configuration is valid.
pub fn validate_config(cfg: &MethodConfig) -> Vec<String> {
    let mut out = Vec::new();
    let n = cfg.levels.len();
    if n < 2 {
        out.push(format!("levels: need at least 2 levels, got {n}"));
    }
    for (i, spec) in cfg.levels.iter().enumerate() {
        let expected = n - 1 - i;
        if spec.level != expected {
            out.push(format!(
                "levels[{i}].level: expected {expected} (coarse to fine ordering), got {}",
                spec.level
            ));
        }
        if !(spec.dt > 0.0) || !spec.dt.is_finite() {
            out.push(format!("level {}: dt must be positive, got {}", spec.level, spec.dt));
        }
        if let Some(eta) = spec.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                out.push(format!("level {}: eta must be positive, got {eta}", spec.level));
            }
        }
        if let Some(m) = spec.quadrature_nodes {
            if m < 16 {
                out.push(format!("level {}: quadrature_nodes must be at least 16, got {m}", spec.level));
            }
        }
        if spec.level == 0 {
            if spec.eta.is_some() {
                out.push("level 0: eta is forbidden on the finest level".into());
            }
        } else {
            if spec.iterations == 0 {
                out.push(format!("level {}: iterations must be positive", spec.level));
            }
            if cfg.averaging_enabled && spec.eta.is_none() {
                out.push(format!("level {}: eta is required when averaging is enabled", spec.level));
            }
        }
    }
    // pairs (coarser, finer)
    for pair in cfg.levels.windows(2) {
        let (c, f) = (&pair[0], &pair[1]);
        if c.dt > 0.0 && f.dt > 0.0 {
            let ratio = c.dt / f.dt;
            if !is_integer_ratio(ratio) || ratio.round() < 2.0 {
                out.push(format!(
                    "level {}: dt {} is not an integer multiple (>= 2) of level {} dt {}",
                    c.level, c.dt, f.level, f.dt
                ));
            }
        }
        if cfg.averaging_enabled {
            if let (Some(ec), Some(ef)) = (c.eta, f.eta) {
                if ec < ef {
                    out.push(format!(
                        "eta must increase with level (level {} has {ec}, level {} has {ef})",
                        c.level, f.level
                    ));
                }
            }
        }
    }
    if !(cfg.t_end > cfg.t0) {
        out.push(format!("t_end ({}) must exceed t0 ({})", cfg.t_end, cfg.t0));
    } else if let Some(top) = cfg.levels.first() {
        if top.dt > 0.0 {
            let slices = (cfg.t_end - cfg.t0) / top.dt;
            if !is_integer_ratio(slices) || slices.round() < 1.0 {
                out.push(format!(
                    "coarse grid does not tile interval: ({} - {}) / {} = {slices}",
                    cfg.t_end, cfg.t0, top.dt
                ));
            }
        }
    }
    if cfg.initial_condition.is_empty() {
        out.push("initial_condition must not be empty".into());
    }
    if cfg.quadrature_nodes < 16 {
        out.push(format!("quadrature_nodes must be at least 16, got {}", cfg.quadrature_nodes));
    }
    if cfg.workers == 0 {
        out.push("workers must be positive".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MethodConfig {
        MethodConfig::uniform(2, 0.25, 10, 1, 0.0, 2.0, vec![C64::new(1.0, 0.0)])
    }

    #[test]
    fn valid_two_level() {
        let cfg = base();
        assert_eq!(cfg.level(1).dt, 0.25);
        assert!((cfg.level(0).dt - 0.025).abs() < 1e-15);
        assert!(validate_config(&cfg).is_empty(), "{:?}", validate_config(&cfg));
        assert_eq!(cfg.coarse_slices(), 8);
        assert_eq!(cfg.coarsening(1), 10);
    }

    #[test]
    fn decreasing_eta_is_reported() {
        let cfg = MethodConfig::uniform(3, 0.1, 10, 1, 0.0, 1.0, vec![C64::new(1.0, 0.0)])
            .with_etas(&[0.2, 2.0]);
        let v = validate_config(&cfg);
        assert!(v.iter().any(|s| s.contains("eta must increase with level")), "{v:?}");
    }

    #[test]
    fn untiled_interval_is_reported() {
        let mut cfg = base();
        cfg.t_end = 1.0;
        cfg.levels[0].dt = 0.3;
        cfg.levels[1].dt = 0.03;
        let v = validate_config(&cfg);
        assert!(v.iter().any(|s| s.contains("coarse grid does not tile interval")), "{v:?}");
    }

    #[test]
    fn eta_rules() {
        let mut cfg = base().with_etas(&[1.0]);
        assert!(validate_config(&cfg).is_empty());
        cfg.levels[1].eta = Some(0.1);
        assert!(validate_config(&cfg).iter().any(|s| s.contains("forbidden")));
        let mut cfg = base();
        cfg.averaging_enabled = true;
        assert!(validate_config(&cfg).iter().any(|s| s.contains("required")));
    }

    #[test]
    fn non_integer_ratio_is_reported() {
        let mut cfg = base();
        cfg.levels[1].dt = 0.1;
        assert!(validate_config(&cfg).iter().any(|s| s.contains("integer multiple")));
    }

    #[test]
    fn integrator_parses() {
        assert_eq!("RK2".parse::<Integrator>().unwrap(), Integrator::Rk2);
        assert_eq!("strang".parse::<Integrator>().unwrap(), Integrator::Strang);
        assert!("euler".parse::<Integrator>().is_err());
    }
}
