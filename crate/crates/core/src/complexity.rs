//! Serial-step accounting, optimal coarsening and error-bound evaluation.

use std::fmt;
use std::sync::Arc;

use crate::config::{Integrator, MethodConfig};
use crate::error::{Error, Result};

/// Serial steps on the critical path of a solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepCount {
    /// Index `l` holds the steps taken by level `l`.
    pub per_level: Vec<u64>,
    pub total: u64,
    /// Modulation right-hand-side evaluations along the same path.
    pub rhs_evals: u64,
}

/// Counts serial steps recursively: a stage with `n` slices and `k`
/// corrections costs `n + k (f + n)`, where `f` is the serial cost of one
/// fine propagation; a single slice costs `1 + f`.
pub fn serial_steps(cfg: &MethodConfig) -> Result<StepCount> {
    cfg.validate()?;
    let levels = cfg.num_levels();
    let evals_per_step = |l: usize| -> u64 {
        let spec = cfg.level(l);
        let stages = match spec.integrator {
            Integrator::Rk2 | Integrator::Strang => 2,
        };
        let nodes = if l > 0 && cfg.averaging_enabled && spec.eta.is_some() {
            cfg.nodes_for(l) as u64
        } else {
            1
        };
        stages * nodes
    };
    // stage(l, n) -> per-level steps of one level-l solve over n slices
    fn stage(cfg: &MethodConfig, l: usize, n: u64, levels: usize) -> Vec<u64> {
        let mut out = vec![0u64; levels];
        let k = cfg.level(l).iterations as u64;
        let fine: Vec<u64> = if l == 1 {
            let mut f = vec![0u64; levels];
            f[0] = cfg.coarsening(1) as u64;
            f
        } else {
            stage(cfg, l - 1, cfg.coarsening(l) as u64, levels)
        };
        let (coarse, reps) = if n == 1 { (1, 1.min(k)) } else { (n * (1 + k), k) };
        out[l] += coarse;
        for (o, f) in out.iter_mut().zip(&fine) {
            *o += reps * f;
        }
        out
    }
    let per_level = stage(cfg, levels - 1, cfg.coarse_slices() as u64, levels);
    let total = per_level.iter().sum();
    let rhs_evals = per_level.iter().enumerate().map(|(l, s)| s * evals_per_step(l)).sum();
    Ok(StepCount { per_level, total, rhs_evals })
}

/// Continuous V-cycle cost `f_L(N) = (2L−3)N + 2X/N^{L−1}` for `L ≥ 2`.
pub fn v_cycle_cost(levels: u32, n: f64, x: f64) -> f64 {
    if levels <= 1 {
        return x;
    }
    (2.0 * levels as f64 - 3.0) * n + 2.0 * x / n.powi(levels as i32 - 1)
}

/// Serial steps of an `L`-level V-cycle with coarsening `N` and `X` fine steps.
pub fn v_cycle_steps(levels: u32, n: u64, x: u64) -> Result<u64> {
    if levels == 0 {
        return Err(Error::Config("need at least one level".into()));
    }
    if levels == 1 {
        return Ok(x);
    }
    let denom = n
        .checked_pow(levels - 1)
        .ok_or_else(|| Error::Config("N^(L-1) overflows".into()))?;
    if n < 2 || !x.is_multiple_of(denom) {
        return Err(Error::Config(format!("X = {x} is not divisible by N^(L-1) = {denom}")));
    }
    Ok((2 * levels as u64 - 3) * n + 2 * x / denom)
}

/// Minimizer of [`v_cycle_cost`] and its integer neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalCoarsening {
    pub n_opt: f64,
    pub cost_opt: f64,
    pub lower: (u64, f64),
    pub upper: (u64, f64),
}

/// `N_opt = (2(L−1)X/(2L−3))^{1/L}`.
pub fn optimal_coarsening(levels: u32, x: f64) -> Result<OptimalCoarsening> {
    if levels < 2 {
        return Err(Error::Config(format!("optimal coarsening needs L >= 2, got {levels}")));
    }
    if !(x > 0.0) {
        return Err(Error::Config(format!("X must be positive, got {x}")));
    }
    let l = levels as f64;
    let n_opt = (x + x / (2.0 * l - 3.0)).powf(1.0 / l);
    let lo = n_opt.floor().max(1.0);
    let hi = n_opt.ceil().max(1.0);
    Ok(OptimalCoarsening {
        n_opt,
        cost_opt: v_cycle_cost(levels, n_opt, x),
        lower: (lo as u64, v_cycle_cost(levels, lo, x)),
        upper: (hi as u64, v_cycle_cost(levels, hi, x)),
    })
}

/// Constants of one level above 0 in the error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundLevel {
    pub dt: f64,
    pub iterations: u32,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Order of the coarse propagator.
    pub order: u32,
    pub eta: Option<f64>,
}

/// Frequency-dependent factor `κ(ε, η, ω)`.
pub type Kappa = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Extra constants for the averaged bound.
#[derive(Clone)]
pub struct AveragingBound {
    pub c: f64,
    pub epsilon: f64,
    pub omega0: f64,
    pub m0: f64,
    pub m1: f64,
    pub order: u32,
    pub kappa: Kappa,
}

impl fmt::Debug for AveragingBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragingBound")
            .field("c", &self.c)
            .field("epsilon", &self.epsilon)
            .field("omega0", &self.omega0)
            .finish()
    }
}

impl AveragingBound {
    /// `κ ≡ 1` and unit `‖M̃₀‖`, `‖M̃₁‖`.
    pub fn with_unit_kappa(c: f64, epsilon: f64, omega0: f64, order: u32) -> Self {
        Self { c, epsilon, omega0, m0: 1.0, m1: 1.0, order, kappa: Arc::new(|_, _, _| 1.0) }
    }

    /// `max_{ω ≥ ω₀} |ε/ω| κ(ε, η, ω)`, sampled on a logarithmic grid over
    /// eight decades.
    pub fn frequency_factor(&self, eta: f64) -> f64 {
        (0..=400)
            .map(|i| {
                let w = self.omega0 * 10f64.powf(8.0 * i as f64 / 400.0);
                (self.epsilon / w).abs() * (self.kappa)(self.epsilon, eta, w)
            })
            .fold(0.0, f64::max)
    }
}

/// Inputs of the multi-level error bound.
#[derive(Clone, Debug)]
pub struct BoundParams {
    /// Levels `1..L−1`, finest first.
    pub levels: Vec<BoundLevel>,
    pub dt0: f64,
    pub c: f64,
    pub p0: u32,
    pub coarsening: u64,
    pub horizon: f64,
    pub averaging: Option<AveragingBound>,
}

/// Itemized bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `E_l`, finest first.
    pub e: Vec<f64>,
    /// `A_l`, finest first.
    pub a: Vec<f64>,
    pub delta0: f64,
    /// `E_l Π_{j>l} A_j`, finest first.
    pub terms: Vec<f64>,
    pub delta_term: f64,
    pub total: f64,
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Evaluates `Σ_l E_l Π_{j>l} A_j + δ₀ Π_l A_l` with
/// `E_l = C(n, k_l+1) γ_l α_l^{k_l} β_l^{n−k_l−1}`,
/// `A_l = n β_l^{n−1} (1+α_l)^{n−1}` and `δ₀ = c ΔT₁ ΔT₀^{p₀}`, where `n`
/// is the coarsening factor on inner levels and the number of slices on the
/// top level. With `averaged` the contraction terms include the averaging
/// error.
pub fn multilevel_bound(p: &BoundParams, averaged: bool) -> Result<BoundReport> {
    if p.levels.is_empty() {
        return Err(Error::Config("bound needs at least one level above 0".into()));
    }
    if averaged && p.averaging.is_none() {
        return Err(Error::Config("averaged bound needs averaging constants".into()));
    }
    let top = p.levels.len() - 1;
    let mut report = BoundReport {
        alpha: vec![],
        beta: vec![],
        gamma: vec![],
        e: vec![],
        a: vec![],
        delta0: p.c * p.levels[0].dt * p.dt0.powi(p.p0 as i32),
        terms: vec![],
        delta_term: 0.0,
        total: 0.0,
    };
    for (i, lv) in p.levels.iter().enumerate() {
        let n = if i == top {
            (p.horizon / lv.dt).round() as u64
        } else {
            p.coarsening
        };
        let trunc = lv.dt.powi(lv.order as i32 + 1);
        let (alpha, gamma) = match (&p.averaging, averaged) {
            (Some(av), true) => {
                let eta = lv.eta.ok_or_else(|| Error::Config("averaged bound needs eta on every level".into()))?;
                let kf = av.frequency_factor(eta);
                let tr = lv.dt.powi(av.order as i32 + 1);
                (
                    av.c * eta * av.epsilon + av.c * tr * kf,
                    av.c * eta * av.epsilon * av.m1 + av.c * tr * kf * av.m0,
                )
            }
            _ => (lv.c1 * trunc, lv.c3 * trunc),
        };
        let beta = 1.0 + lv.c2 * lv.dt;
        let k = lv.iterations as u64;
        let e = if k + 1 > n {
            0.0
        } else {
            binomial(n, k + 1) * gamma * alpha.powi(k as i32) * beta.powi((n - k - 1) as i32)
        };
        let a = n as f64 * beta.powi(n as i32 - 1) * (1.0 + alpha).powi(n as i32 - 1);
        report.alpha.push(alpha);
        report.beta.push(beta);
        report.gamma.push(gamma);
        report.e.push(e);
        report.a.push(a);
    }
    for i in 0..=top {
        let amp: f64 = report.a[i + 1..].iter().product();
        report.terms.push(report.e[i] * amp);
    }
    report.delta_term = report.delta0 * report.a.iter().product::<f64>();
    report.total = report.terms.iter().sum::<f64>() + report.delta_term;
    Ok(report)
}

/// Closed-form bound for constant coarsening `N` and constant `k`:
///
/// `c T ΔT₀^{p₀} exp(C₂T(1−N^{−L})/(1−1/N) + C₁TΔT^{p_c}(1−N^{−L(p_c+1)})/(1−N^{−(p_c+1)}))
///  + exp(C₂T/(1−1/N) + C₁TΔT/(1−N^{−(p_c+1)})) C₃C₁^k C(N, k+1) ΔT^{(k+1)(p_c+1)} / (1−N^{−(kp_c+k+p_c)})`
///
/// with `ΔT` the coarsest step, `L` the number of levels above 0 and the
/// constants taken from the coarsest level.
pub fn corollary_bound(p: &BoundParams) -> Result<f64> {
    let first = p
        .levels
        .first()
        .ok_or_else(|| Error::Config("bound needs at least one level above 0".into()))?;
    if p.levels.iter().any(|l| l.iterations != first.iterations) {
        return Err(Error::Config("corollary bound needs the same k on every level".into()));
    }
    for w in p.levels.windows(2) {
        let ratio = w[1].dt / w[0].dt;
        if (ratio - p.coarsening as f64).abs() > 1e-9 * ratio {
            return Err(Error::Config("corollary bound needs a constant coarsening factor".into()));
        }
    }
    let coarsest = p.levels.last().expect("non-empty");
    let n = p.coarsening as f64;
    let l = p.levels.len() as i32;
    let k = first.iterations as i32;
    let pc = coarsest.order as i32;
    let (c1, c2, c3) = (coarsest.c1, coarsest.c2, coarsest.c3);
    let t = p.horizon;
    let dt = coarsest.dt;
    let first_term = p.c * t * p.dt0.powi(p.p0 as i32)
        * (c2 * t * (1.0 - n.powi(-l)) / (1.0 - 1.0 / n)
            + c1 * t * dt.powi(pc) * (1.0 - n.powi(-l * (pc + 1))) / (1.0 - n.powi(-(pc + 1))))
        .exp();
    let second = (c2 * t / (1.0 - 1.0 / n) + c1 * t * dt / (1.0 - n.powi(-(pc + 1)))).exp()
        * c3
        * c1.powi(k)
        * binomial(p.coarsening, k as u64 + 1)
        / (1.0 - n.powi(-(k * pc + k + pc)))
        * dt.powi(k * pc + k + pc + 1);
    Ok(first_term + second)
}
