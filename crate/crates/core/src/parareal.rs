//! Two-level and recursive multi-level Parareal, with optional averaging on
//! the coarse levels.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::averaging::{AveragedNonlinear, AveragedRhs};
use crate::config::{Integrator, MethodConfig};
use crate::error::{check_dim, Error, Result};
use crate::integrators::{step_count, LinearFlow, Rhs, SplitRhs, Stepper, Workspace};
use crate::problem::ProblemSpec;
use crate::trajectory::Trajectory;
use crate::{State, C64};

/// Advances a state across one slice of a level's coarse grid.
pub trait Propagator: Send + Sync {
    fn level(&self) -> usize;
    /// Internal step size.
    fn dt(&self) -> f64;
    /// Length of the slice covered by one application.
    fn slice_length(&self) -> f64;
    /// Propagates `u0` from `t0` to `t0 + slice_length()`; also returns the
    /// number of serial steps taken.
    fn propagate(&self, t0: f64, u0: &[C64]) -> Result<(State, u64)>;

    /// Same as [`Propagator::propagate`] with the state updated in place.
    fn propagate_in_place(&self, t0: f64, y: &mut [C64]) -> Result<u64> {
        let (out, steps) = self.propagate(t0, y)?;
        check_dim(y.len(), out.len())?;
        y.copy_from_slice(&out);
        Ok(steps)
    }
}

/// A propagator defined by a closure, mainly for tests and experiments.
pub struct FnPropagator<F> {
    pub f: F,
    pub level: usize,
    pub dt: f64,
    pub slice_length: f64,
}

impl<F> Propagator for FnPropagator<F>
where
    F: Fn(f64, &[C64]) -> Result<State> + Send + Sync,
{
    fn level(&self) -> usize {
        self.level
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn slice_length(&self) -> f64 {
        self.slice_length
    }
    fn propagate(&self, t0: f64, u0: &[C64]) -> Result<(State, u64)> {
        let steps = (self.slice_length / self.dt).round() as u64;
        Ok(((self.f)(t0, u0)?, steps))
    }
}

struct FullRhs<'a>(&'a ProblemSpec);

impl Rhs for FullRhs<'_> {
    fn eval_into(&self, t: f64, y: &[C64], out: &mut [C64]) {
        self.0.modulation_rhs_into(t, y, out);
    }
}

/// `N(t, u)` in physical variables.
struct PhysicalNonlinear<'a>(&'a ProblemSpec);

impl Rhs for PhysicalNonlinear<'_> {
    fn eval_into(&self, t: f64, y: &[C64], out: &mut [C64]) {
        self.0.nonlinearity().eval(t, y, out);
    }
}

/// `exp(-(t1−t0)L/ε)` followed by the dissipative factor.
struct PhysicalFlow<'a>(&'a ProblemSpec);

impl LinearFlow for PhysicalFlow<'_> {
    fn advance(&self, t0: f64, t1: f64, y: &mut [C64]) {
        self.0.flow_in_place(t1 - t0, -1.0, y);
        DiffusionFlow(self.0).advance(t0, t1, y);
    }
}

/// Exact flow of the dissipative term alone.
struct DiffusionFlow<'a>(&'a ProblemSpec);

impl LinearFlow for DiffusionFlow<'_> {
    fn advance(&self, t0: f64, t1: f64, y: &mut [C64]) {
        if let Some(d) = self.0.diffusion() {
            let h = t1 - t0;
            for (v, s) in y.iter_mut().zip(d) {
                *v *= (s * h).exp();
            }
        }
    }
}

thread_local! {
    static STEP_WS: RefCell<Workspace> = const { RefCell::new(Workspace::empty()) };
}

/// Right-hand side a base propagator integrates.
#[derive(Clone)]
pub enum LevelRhs {
    /// The full modulation equation.
    Full,
    /// The averaged modulation equation.
    Averaged(Arc<AveragedRhs>),
}

/// Fixed-step serial integration of one slice.
///
/// With [`Integrator::Strang`] and the full equation the step is carried out
/// in physical variables (exact linear half-steps around an RK2 step of `N`)
/// and mapped back, so the stiff flow is never integrated numerically. With
/// the averaged equation the split is between the dissipative term and the
/// averaged nonlinearity.
#[derive(Clone)]
pub struct BasePropagator {
    problem: Arc<ProblemSpec>,
    rhs: LevelRhs,
    integrator: Integrator,
    level: usize,
    dt: f64,
    steps: usize,
}

impl fmt::Debug for BasePropagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasePropagator")
            .field("level", &self.level)
            .field("dt", &self.dt)
            .field("steps", &self.steps)
            .field("integrator", &self.integrator)
            .field("averaged", &matches!(self.rhs, LevelRhs::Averaged(_)))
            .finish()
    }
}

impl BasePropagator {
    pub fn new(
        problem: Arc<ProblemSpec>,
        rhs: LevelRhs,
        integrator: Integrator,
        level: usize,
        dt: f64,
        slice_length: f64,
    ) -> Result<Self> {
        let steps = step_count(0.0, slice_length, dt)?;
        Ok(Self { problem, rhs, integrator, level, dt, steps })
    }

    /// Runs `n` steps from `t0` in place.
    pub fn advance(&self, t0: f64, n: usize, y: &mut [C64]) {
        STEP_WS.with(|ws| {
            let ws = &mut *ws.borrow_mut();
            let p = &*self.problem;
            match (&self.rhs, self.integrator) {
                (LevelRhs::Full, Integrator::Rk2) if p.is_unmodulated() => {
                    Stepper::Rk2(&PhysicalNonlinear(p)).advance(t0, self.dt, n, y, ws);
                }
                (LevelRhs::Full, Integrator::Rk2) => {
                    Stepper::Rk2(&FullRhs(p)).advance(t0, self.dt, n, y, ws);
                }
                (LevelRhs::Averaged(a), Integrator::Rk2) => {
                    Stepper::Rk2(&**a).advance(t0, self.dt, n, y, ws);
                }
                (LevelRhs::Full, Integrator::Strang) => {
                    p.flow_in_place(t0, -1.0, y);
                    let flow = PhysicalFlow(p);
                    let split = SplitRhs { linear_flow: &flow, nonlinear_rhs: &PhysicalNonlinear(p) };
                    Stepper::Strang(split).advance(t0, self.dt, n, y, ws);
                    p.flow_in_place(t0 + n as f64 * self.dt, 1.0, y);
                }
                (LevelRhs::Averaged(a), Integrator::Strang) => {
                    let flow = DiffusionFlow(p);
                    let nl = AveragedNonlinear(a);
                    let split = SplitRhs { linear_flow: &flow, nonlinear_rhs: &nl };
                    Stepper::Strang(split).advance(t0, self.dt, n, y, ws);
                }
            }
        });
    }
}

impl Propagator for BasePropagator {
    fn level(&self) -> usize {
        self.level
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn slice_length(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    fn propagate(&self, t0: f64, u0: &[C64]) -> Result<(State, u64)> {
        let mut y = u0.to_vec();
        let steps = self.propagate_in_place(t0, &mut y)?;
        Ok((y, steps))
    }

    fn propagate_in_place(&self, t0: f64, y: &mut [C64]) -> Result<u64> {
        check_dim(self.problem.dim(), y.len())?;
        self.advance(t0, self.steps, y);
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite state after level-{} propagation from t = {t0}",
                self.level
            )));
        }
        Ok(self.steps as u64)
    }
}

/// Result of a Parareal solve on one level's coarse grid.
#[derive(Clone, Debug)]
pub struct PararealRun {
    /// Iteration 0 is the coarse guess; one entry per correction follows.
    /// Only the last entry is kept when history recording is off.
    pub iterates: Vec<Trajectory>,
    pub iterations: usize,
    /// Length of the critical path in base steps.
    pub serial_steps: u64,
    /// Fine propagations performed at this level.
    pub slices_solved: u64,
}

impl PararealRun {
    pub fn final_trajectory(&self) -> &Trajectory {
        self.iterates.last().expect("a run always has a guess")
    }
}

/// Serial application of `g` across `[t0, t_end]`.
pub fn coarse_sweep(g: &dyn Propagator, t0: f64, t_end: f64, u0: &[C64]) -> Result<Trajectory> {
    let n = step_count(t0, t_end, g.slice_length())?;
    Ok(sweep(g, t0, n, u0)?.0)
}

fn node_time(t0: f64, h: f64, i: usize) -> f64 {
    t0 + i as f64 * h
}

/// Returns the trajectory and the serial steps. Node `i + 1` of the result
/// is `G(U_i)`.
fn sweep(g: &dyn Propagator, t0: f64, n: usize, u0: &[C64]) -> Result<(Trajectory, u64)> {
    let h = g.slice_length();
    let mut states = Vec::with_capacity(n + 1);
    states.push(u0.to_vec());
    let mut steps = 0;
    for i in 0..n {
        let (next, s) = g
            .propagate(node_time(t0, h, i), &states[i])
            .map_err(|e| slice_error(i, e))?;
        steps += s;
        states.push(next);
    }
    Ok((Trajectory::uniform(t0, h, states), steps))
}

fn slice_error(index: usize, e: Error) -> Error {
    match e {
        Error::Slice { .. } => Error::Slice { index, source: Box::new(e) },
        other => Error::Slice { index, source: Box::new(other) },
    }
}

/// Parareal update `U_{n+1} = G(U_n) + F_n − G(prev_n)`.
///
/// `cached` may hold `G(prev_n)` from the preceding sweep; it is recomputed
/// when absent. Returns the new trajectory and `G` of its nodes.
pub fn parareal_correct(
    g: &dyn Propagator,
    fine_results: &[State],
    prev: &Trajectory,
    u0: &[C64],
    cached: Option<&[State]>,
) -> Result<(Trajectory, Vec<State>)> {
    let n = prev.len() - 1;
    if fine_results.len() != n {
        return Err(Error::Internal(format!(
            "{} fine results for {n} slices",
            fine_results.len()
        )));
    }
    let computed;
    let g_prev: &[State] = match cached {
        Some(c) => {
            if c.len() != n {
                return Err(Error::Internal(format!("{} cached values for {n} slices", c.len())));
            }
            c
        }
        None => {
            computed = prev
                .states()
                .iter()
                .take(n)
                .zip(prev.times())
                .enumerate()
                .map(|(i, (u, &t))| g.propagate(t, u).map(|r| r.0).map_err(|e| slice_error(i, e)))
                .collect::<Result<Vec<_>>>()?;
            &computed
        }
    };
    let (traj, g_new, _) = correct(g, fine_results, g_prev, prev.times()[0], prev.times()[1] - prev.times()[0], u0, true)?;
    Ok((traj, g_new))
}

/// With `keep_g` false the returned `G` values are left empty, which saves
/// a copy per slice on the last correction.
fn correct(
    g: &dyn Propagator,
    fine: &[State],
    g_prev: &[State],
    t0: f64,
    h: f64,
    u0: &[C64],
    keep_g: bool,
) -> Result<(Trajectory, Vec<State>, u64)> {
    let n = fine.len();
    let mut states = Vec::with_capacity(n + 1);
    let mut g_new = Vec::with_capacity(if keep_g { n } else { 0 });
    states.push(u0.to_vec());
    let mut steps = 0;
    for i in 0..n {
        let (mut gv, s) = g
            .propagate(node_time(t0, h, i), &states[i])
            .map_err(|e| slice_error(i, e))?;
        steps += s;
        if keep_g {
            let next: State = gv
                .iter()
                .zip(&fine[i])
                .zip(&g_prev[i])
                .map(|((a, f), b)| a + f - b)
                .collect();
            states.push(next);
            g_new.push(gv);
        } else {
            for ((a, f), b) in gv.iter_mut().zip(&fine[i]).zip(&g_prev[i]) {
                *a = *a + f - b;
            }
            states.push(gv);
        }
    }
    Ok((Trajectory::uniform(t0, h, states), g_new, steps))
}

/// Fine propagation of every node but the last, on the current thread pool.
fn fine_sweep(p: &dyn Propagator, traj: &Trajectory) -> Result<(Vec<State>, u64)> {
    let n = traj.len() - 1;
    let one = |i: usize| {
        p.propagate(traj.times()[i], &traj.states()[i])
            .map_err(|e| slice_error(i, e))
    };
    // slices are independent, so the serial path gives identical results
    let results: Vec<(State, u64)> = if rayon::current_num_threads() == 1 {
        (0..n).map(one).collect::<Result<Vec<_>>>()?
    } else {
        (0..n).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
    };
    let longest = results.iter().map(|r| r.1).max().unwrap_or(0);
    Ok((results.into_iter().map(|r| r.0).collect(), longest))
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::Config("workers must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

/// Applies `p` to every node except the last, using `workers` threads.
/// Element `n` is the propagation over slice `[T_n, T_{n+1}]`.
pub fn fine_sweep_parallel(p: &dyn Propagator, traj: &Trajectory, workers: usize) -> Result<Vec<State>> {
    let pool = build_pool(workers)?;
    pool.install(|| fine_sweep(p, traj)).map(|r| r.0)
}

/// Parareal with coarse propagator `g` and fine propagator `p` over `n`
/// slices of length `g.slice_length()` starting at `t0`.
///
/// Each correction costs one coarse sweep because `G(U^k)` is cached from
/// the sweep that produced `U^k`. A single slice degenerates to one fine
/// propagation.
pub fn run_parareal(
    g: &dyn Propagator,
    p: &dyn Propagator,
    t0: f64,
    n: usize,
    u0: &[C64],
    k: usize,
    record: bool,
) -> Result<PararealRun> {
    if n == 0 {
        return Err(Error::Config("parareal needs at least one slice".into()));
    }
    let (guess, mut serial) = sweep(g, t0, n, u0)?;
    let h = g.slice_length();
    let mut iterates = vec![guess];
    let mut slices_solved = 0;
    if n == 1 {
        if k > 0 {
            let (f, s) = p.propagate(t0, u0).map_err(|e| slice_error(0, e))?;
            serial += s;
            slices_solved += 1;
            let traj = Trajectory::uniform(t0, h, vec![u0.to_vec(), f]);
            if record {
                iterates.extend(std::iter::repeat_n(traj, k));
            } else {
                iterates = vec![traj];
            }
        }
        return Ok(PararealRun { iterates, iterations: k, serial_steps: serial, slices_solved });
    }
    // `G` of the previous iterate's nodes; for the guess these are its nodes
    let mut g_cache: Option<Vec<State>> = None;
    for it in 0..k {
        let prev = iterates.last().expect("non-empty");
        let (fine, fine_steps) = fine_sweep(p, prev)?;
        slices_solved += n as u64;
        let g_prev = g_cache.as_deref().unwrap_or(&prev.states()[1..]);
        let (next, g_new, coarse_steps) = correct(g, &fine, g_prev, t0, h, u0, it + 1 < k)?;
        serial += fine_steps + coarse_steps;
        g_cache = Some(g_new);
        if record {
            iterates.push(next);
        } else {
            iterates = vec![next];
        }
    }
    Ok(PararealRun { iterates, iterations: k, serial_steps: serial, slices_solved })
}

/// [`run_parareal`] reduced to its final state, for solves nested inside a
/// fine propagator. The iterates live in one flat buffer and are updated in
/// place; the arithmetic and the step count are the same.
fn parareal_final(g: &dyn Propagator, p: &dyn Propagator, t0: f64, n: usize, y: &mut [C64], k: usize) -> Result<u64> {
    if n == 0 {
        return Err(Error::Config("parareal needs at least one slice".into()));
    }
    let d = y.len();
    let h = g.slice_length();
    // nodes U_0..U_n, then G(U_i), then the fine results
    let mut buf = vec![C64::new(0.0, 0.0); (3 * n + 1) * d];
    let (u, rest) = buf.split_at_mut((n + 1) * d);
    let (gc, fine) = rest.split_at_mut(n * d);
    u[..d].copy_from_slice(y);
    let mut serial = 0;
    for i in 0..n {
        let (cur, next) = u[i * d..(i + 2) * d].split_at_mut(d);
        next.copy_from_slice(cur);
        serial += g.propagate_in_place(node_time(t0, h, i), next).map_err(|e| slice_error(i, e))?;
    }
    gc.copy_from_slice(&u[d..]);
    if n == 1 {
        if k > 0 {
            y.copy_from_slice(&u[..d]);
            serial += p.propagate_in_place(t0, y).map_err(|e| slice_error(0, e))?;
        } else {
            y.copy_from_slice(&u[d..]);
        }
        return Ok(serial);
    }
    let mut gv = vec![C64::new(0.0, 0.0); d];
    for _ in 0..k {
        let one = |(i, f): (usize, &mut [C64])| {
            f.copy_from_slice(&u[i * d..(i + 1) * d]);
            p.propagate_in_place(node_time(t0, h, i), f).map_err(|e| slice_error(i, e))
        };
        let steps: Vec<u64> = if rayon::current_num_threads() == 1 {
            fine.chunks_mut(d).enumerate().map(one).collect::<Result<_>>()?
        } else {
            fine.par_chunks_mut(d).enumerate().map(one).collect::<Result<_>>()?
        };
        serial += steps.into_iter().max().unwrap_or(0);
        for i in 0..n {
            gv.copy_from_slice(&u[i * d..(i + 1) * d]);
            serial += g.propagate_in_place(node_time(t0, h, i), &mut gv).map_err(|e| slice_error(i, e))?;
            let next = &mut u[(i + 1) * d..(i + 2) * d];
            let (f, b) = (&fine[i * d..(i + 1) * d], &mut gc[i * d..(i + 1) * d]);
            for j in 0..d {
                next[j] = gv[j] + f[j] - b[j];
            }
            b.copy_from_slice(&gv);
        }
    }
    y.copy_from_slice(&u[n * d..]);
    Ok(serial)
}

/// Per-level propagators of a configured hierarchy.
struct Hierarchy {
    /// Index `l`; entry 0 is unused.
    coarse: Vec<Option<BasePropagator>>,
    fine: BasePropagator,
    iterations: Vec<usize>,
    coarsening: Vec<usize>,
}

impl Hierarchy {
    fn new(cfg: &MethodConfig, problem: Arc<ProblemSpec>) -> Result<Self> {
        let levels = cfg.num_levels();
        let mut coarse = vec![None];
        let mut iterations = vec![0];
        let mut coarsening = vec![1];
        for l in 1..levels {
            let spec = cfg.level(l);
            let rhs = match (cfg.averaging_enabled, spec.eta) {
                (true, Some(eta)) => {
                    LevelRhs::Averaged(Arc::new(AveragedRhs::new(problem.clone(), eta, cfg.nodes_for(l))?))
                }
                _ => LevelRhs::Full,
            };
            coarse.push(Some(BasePropagator::new(
                problem.clone(),
                rhs,
                spec.integrator,
                l,
                spec.dt,
                spec.dt,
            )?));
            iterations.push(spec.iterations);
            coarsening.push(cfg.coarsening(l));
        }
        let f = cfg.level(0);
        let fine = BasePropagator::new(problem, LevelRhs::Full, f.integrator, 0, f.dt, cfg.level(1).dt)?;
        Ok(Self { coarse, fine, iterations, coarsening })
    }

    fn coarse(&self, l: usize) -> &BasePropagator {
        self.coarse[l].as_ref().expect("levels above 0 have a coarse propagator")
    }

    fn solve(&self, l: usize, t0: f64, n: usize, u0: &[C64], record: bool) -> Result<PararealRun> {
        let g = self.coarse(l);
        if l == 1 {
            run_parareal(g, &self.fine, t0, n, u0, self.iterations[l], record)
        } else {
            let p = SubSolve { h: self, level: l - 1 };
            run_parareal(g, &p, t0, n, u0, self.iterations[l], record)
        }
    }

    /// Final state of the solve at level `l`, written over `y`.
    fn solve_final(&self, l: usize, t0: f64, n: usize, y: &mut [C64]) -> Result<u64> {
        let g = self.coarse(l);
        if l == 1 {
            parareal_final(g, &self.fine, t0, n, y, self.iterations[l])
        } else {
            let p = SubSolve { h: self, level: l - 1 };
            parareal_final(g, &p, t0, n, y, self.iterations[l])
        }
    }

    /// Fine propagator of level `l`.
    fn fine_of(&self, l: usize) -> Box<dyn Propagator + '_> {
        if l == 1 {
            Box::new(self.fine.clone())
        } else {
            Box::new(SubSolve { h: self, level: l - 1 })
        }
    }
}

/// An `(l+1)`-level solve over one slice of level `l+1`, used as the fine
/// propagator of that level.
struct SubSolve<'a> {
    h: &'a Hierarchy,
    level: usize,
}

impl Propagator for SubSolve<'_> {
    fn level(&self) -> usize {
        self.level
    }

    fn dt(&self) -> f64 {
        self.h.coarse(self.level).dt
    }

    fn slice_length(&self) -> f64 {
        self.dt() * self.h.coarsening[self.level + 1] as f64
    }

    fn propagate(&self, t0: f64, u0: &[C64]) -> Result<(State, u64)> {
        let mut y = u0.to_vec();
        let steps = self.propagate_in_place(t0, &mut y)?;
        Ok((y, steps))
    }

    fn propagate_in_place(&self, t0: f64, y: &mut [C64]) -> Result<u64> {
        let n = self.h.coarsening[self.level + 1];
        self.h.solve_final(self.level, t0, n, y)
    }
}

/// A configured multi-level solver.
pub struct MultilevelSolver {
    cfg: MethodConfig,
    hierarchy: Hierarchy,
    pool: rayon::ThreadPool,
}

impl fmt::Debug for MultilevelSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultilevelSolver").field("cfg", &self.cfg).finish()
    }
}

impl MultilevelSolver {
    pub fn new(cfg: &MethodConfig, problem: &ProblemSpec) -> Result<Self> {
        cfg.validate()?;
        check_dim(problem.dim(), cfg.initial_condition.len())?;
        let hierarchy = Hierarchy::new(cfg, Arc::new(problem.clone()))?;
        let pool = build_pool(cfg.workers)?;
        Ok(Self { cfg: cfg.clone(), hierarchy, pool })
    }

    pub fn config(&self) -> &MethodConfig {
        &self.cfg
    }

    fn top(&self) -> usize {
        self.cfg.num_levels() - 1
    }

    /// Runs the configured solve and records every top-level iterate.
    pub fn run(&self) -> Result<PararealRun> {
        let top = self.top();
        let n = self.cfg.coarse_slices();
        self.pool.install(|| {
            self.hierarchy
                .solve(top, self.cfg.t0, n, &self.cfg.initial_condition, true)
        })
    }

    /// Level-0 propagator applied serially, sampled on the coarsest grid.
    pub fn fine_serial(&self) -> Result<Trajectory> {
        let top = self.top();
        let h = self.cfg.level(top).dt;
        let chunks = self.cfg.coarse_slices();
        let per = (h / self.cfg.level(1).dt).round() as usize;
        let mut states = vec![self.cfg.initial_condition.clone()];
        for i in 0..chunks {
            let mut y = states[i].clone();
            for j in 0..per {
                let t = self.cfg.t0 + i as f64 * h + j as f64 * self.cfg.level(1).dt;
                y = self.hierarchy.fine.propagate(t, &y)?.0;
            }
            states.push(y);
        }
        Ok(Trajectory::uniform(self.cfg.t0, h, states))
    }

    /// The top level's fine propagator applied serially: the limit of the
    /// top-level iteration as its correction count grows.
    pub fn embedded_serial(&self) -> Result<Trajectory> {
        let top = self.top();
        let p = self.hierarchy.fine_of(top);
        let h = self.cfg.level(top).dt;
        self.pool.install(|| {
            let mut states = vec![self.cfg.initial_condition.clone()];
            for i in 0..self.cfg.coarse_slices() {
                let next = p.propagate(self.cfg.t0 + i as f64 * h, &states[i])?.0;
                states.push(next);
            }
            Ok(Trajectory::uniform(self.cfg.t0, h, states))
        })
    }
}

/// Solve with exactly two levels.
pub fn solve_two_level(cfg: &MethodConfig, problem: &ProblemSpec) -> Result<PararealRun> {
    if cfg.num_levels() != 2 {
        return Err(Error::Config(format!(
            "two-level solve needs 2 levels, got {}",
            cfg.num_levels()
        )));
    }
    MultilevelSolver::new(cfg, problem)?.run()
}

/// Recursive multi-level solve; the fine propagator of level `l` is an
/// `l`-level solve over one slice of level `l`.
pub fn solve_multilevel(cfg: &MethodConfig, problem: &ProblemSpec) -> Result<PararealRun> {
    MultilevelSolver::new(cfg, problem)?.run()
}

/// Kind of work in a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Serial coarse sweep producing the initial guess.
    Guess,
    /// Base-level fine propagation.
    Fine,
    /// Serial correction sweep.
    Correct,
}

/// One entry of a cycle plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub level: usize,
    pub action: Action,
    /// Set where the parent level fans out across its slices.
    pub parallel: bool,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.action {
            Action::Guess => "guess",
            Action::Fine => "fine",
            Action::Correct => "correct",
        };
        write!(f, "{name}@{}", self.level)?;
        if self.parallel {
            f.write_str(" (parallel)")?;
        }
        Ok(())
    }
}

/// Sequence of sweeps the solver executes, coarse guess first. For `k_l > 1`
/// the nested solves repeat once per correction, giving W-cycles.
pub fn cycle_plan(cfg: &MethodConfig) -> Vec<PlanStep> {
    fn level_plan(cfg: &MethodConfig, l: usize, nested: bool, out: &mut Vec<PlanStep>) {
        out.push(PlanStep { level: l, action: Action::Guess, parallel: nested });
        for _ in 0..cfg.level(l).iterations {
            if l == 1 {
                out.push(PlanStep { level: 0, action: Action::Fine, parallel: true });
            } else {
                level_plan(cfg, l - 1, true, out);
            }
            out.push(PlanStep { level: l, action: Action::Correct, parallel: false });
        }
    }
    let mut out = Vec::new();
    if cfg.num_levels() >= 2 {
        level_plan(cfg, cfg.num_levels() - 1, false, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearOperator, Nonlinearity};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn decay() -> ProblemSpec {
        let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
            out[0] = -u[0];
        });
        ProblemSpec::new(1.0, LinearOperator::zero(1).unwrap(), n).unwrap()
    }

    fn oscillatory(r: f64) -> ProblemSpec {
        let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
            out[0] = -u[0] * u[0];
        });
        ProblemSpec::new(1.0, LinearOperator::from_frequencies(&[-r]).unwrap(), n).unwrap()
    }

    fn identity(level: usize, len: f64) -> FnPropagator<impl Fn(f64, &[C64]) -> Result<State> + Send + Sync> {
        FnPropagator { f: |_t: f64, u: &[C64]| Ok(u.to_vec()), level, dt: len, slice_length: len }
    }

    #[test]
    fn coarse_sweep_basics() {
        let g = identity(1, 0.5);
        let tr = coarse_sweep(&g, 0.0, 0.5, &[c(2.0)]).unwrap();
        assert_eq!(tr.len(), 2);
        let tr = coarse_sweep(&g, 0.0, 2.0, &[c(2.0)]).unwrap();
        assert!(tr.states().iter().all(|s| s[0] == c(2.0)));
    }

    #[test]
    fn coarse_rk2_sweep_on_decay() {
        let p = Arc::new(decay());
        let g = BasePropagator::new(p, LevelRhs::Full, Integrator::Rk2, 1, 0.25, 0.25).unwrap();
        let tr = coarse_sweep(&g, 0.0, 2.0, &[c(1.0)]).unwrap();
        let e = (tr.last()[0].re - (-2f64).exp()).abs() / (-2f64).exp();
        assert!((e - 0.025_437_526_409_968_22).abs() < 1e-12);
    }

    #[test]
    fn identity_fine_sweep_returns_nodes() {
        let traj = Trajectory::uniform(0.0, 1.0, vec![vec![c(1.0)], vec![c(2.0)], vec![c(3.0)]]);
        let out = fine_sweep_parallel(&identity(0, 1.0), &traj, 2).unwrap();
        assert_eq!(out, vec![vec![c(1.0)], vec![c(2.0)]]);
    }

    #[test]
    fn correction_with_equal_propagators_telescopes() {
        let p = Arc::new(oscillatory(10.0));
        let g = BasePropagator::new(p, LevelRhs::Full, Integrator::Rk2, 1, 0.1, 0.1).unwrap();
        let u0 = [c(1.0)];
        let guess = coarse_sweep(&g, 0.0, 1.0, &u0).unwrap();
        let perturbed = Trajectory::uniform(
            0.0,
            0.1,
            guess.states().iter().map(|s| vec![s[0] * 1.01]).collect(),
        );
        let fine = fine_sweep_parallel(&g, &perturbed, 1).unwrap();
        let (next, _) = parareal_correct(&g, &fine, &perturbed, &u0, None).unwrap();
        for (a, b) in next.states().iter().zip(guess.states()) {
            assert!((a[0] - b[0]).norm() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_is_preserved() {
        let p = Arc::new(oscillatory(10.0));
        let g = BasePropagator::new(p.clone(), LevelRhs::Full, Integrator::Rk2, 1, 0.1, 0.1).unwrap();
        let f = BasePropagator::new(p, LevelRhs::Full, Integrator::Rk2, 0, 0.01, 0.1).unwrap();
        let u0 = [c(1.0)];
        let exact = coarse_sweep(&f, 0.0, 1.0, &u0).unwrap();
        let fine = fine_sweep_parallel(&f, &exact, 1).unwrap();
        let (next, _) = parareal_correct(&g, &fine, &exact, &u0, None).unwrap();
        for (a, b) in next.states().iter().zip(exact.states()) {
            assert!((a[0] - b[0]).norm() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_internal_error() {
        let g = identity(1, 1.0);
        let traj = Trajectory::uniform(0.0, 1.0, vec![vec![c(1.0)]; 3]);
        assert!(matches!(
            parareal_correct(&g, &[vec![c(1.0)]], &traj, &[c(1.0)], None),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn slice_failure_carries_index() {
        let bad = FnPropagator {
            f: |t: f64, u: &[C64]| {
                if t > 1.5 {
                    Err(Error::Numerical("boom".into()))
                } else {
                    Ok(u.to_vec())
                }
            },
            level: 0,
            dt: 1.0,
            slice_length: 1.0,
        };
        let traj = Trajectory::uniform(0.0, 1.0, vec![vec![c(1.0)]; 4]);
        match fine_sweep_parallel(&bad, &traj, 1) {
            Err(Error::Slice { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_level_decay_first_node_exact() {
        let cfg = MethodConfig::uniform(2, 0.25, 10, 1, 0.0, 2.0, vec![c(1.0)]);
        let solver = MultilevelSolver::new(&cfg, &decay()).unwrap();
        let run = solver.run().unwrap();
        let fine = solver.fine_serial().unwrap();
        let a = run.final_trajectory().states()[1][0];
        assert!((a - fine.states()[1][0]).norm() < 1e-13);
        assert_eq!(run.iterates.len(), 2);
    }

    #[test]
    fn full_convergence_for_large_k() {
        let cfg = MethodConfig::uniform(2, 0.1, 10, 10, 0.0, 1.0, vec![c(1.0)]);
        let solver = MultilevelSolver::new(&cfg, &oscillatory(100.0)).unwrap();
        let run = solver.run().unwrap();
        let fine = solver.fine_serial().unwrap();
        for (a, b) in run.final_trajectory().states().iter().zip(fine.states()) {
            assert!((a[0] - b[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn same_propagators_converge_in_one_iteration() {
        let mut cfg = MethodConfig::uniform(2, 0.1, 10, 1, 0.0, 1.0, vec![c(1.0)]);
        // G and P both take 10 steps of 0.01 when the coarse level is refined
        let p = Arc::new(oscillatory(10.0));
        let g = BasePropagator::new(p.clone(), LevelRhs::Full, Integrator::Rk2, 1, 0.01, 0.1).unwrap();
        let f = BasePropagator::new(p, LevelRhs::Full, Integrator::Rk2, 0, 0.01, 0.1).unwrap();
        let run = run_parareal(&g, &f, 0.0, 10, &[c(1.0)], 1, true).unwrap();
        let serial = coarse_sweep(&f, 0.0, 1.0, &[c(1.0)]).unwrap();
        for (a, b) in run.final_trajectory().states().iter().zip(serial.states()) {
            assert!((a[0] - b[0]).norm() < 1e-12);
        }
        cfg.levels[1].dt = 0.01;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn single_slice_degenerates_to_fine() {
        let cfg = MethodConfig::uniform(2, 1.0, 10, 3, 0.0, 1.0, vec![c(1.0)]);
        let solver = MultilevelSolver::new(&cfg, &decay()).unwrap();
        let run = solver.run().unwrap();
        assert_eq!(run.iterates.len(), 4);
        assert_eq!(run.serial_steps, 1 + 10);
        let fine = solver.fine_serial().unwrap();
        assert_eq!(run.final_trajectory().last(), fine.last());
    }

    #[test]
    fn nested_solve_matches_recorded_solve() {
        let cfg = MethodConfig::uniform(3, 0.1, 10, 2, 0.0, 1.0, vec![c(1.0)]).with_etas(&[2.0, 0.2]);
        let h = Hierarchy::new(&cfg, Arc::new(oscillatory(100.0))).unwrap();
        let u0 = [C64::new(0.7, 0.2)];
        for l in 1..=2 {
            for n in [1, 4, 10] {
                let run = h.solve(l, 0.3, n, &u0, true).unwrap();
                let mut y = u0.to_vec();
                let steps = h.solve_final(l, 0.3, n, &mut y).unwrap();
                assert_eq!(&y, run.final_trajectory().last(), "level {l}, {n} slices");
                assert_eq!(steps, run.serial_steps);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = MethodConfig::uniform(3, 0.1, 10, 2, 0.0, 1.0, vec![c(1.0)]).with_etas(&[2.0, 0.2]);
        let mut outs = Vec::new();
        for w in [1, 2, 8] {
            let cfg = base.clone().with_workers(w);
            outs.push(solve_multilevel(&cfg, &oscillatory(100.0)).unwrap());
        }
        for o in &outs[1..] {
            assert_eq!(o.iterates, outs[0].iterates);
            assert_eq!(o.serial_steps, outs[0].serial_steps);
        }
    }

    #[test]
    fn plans() {
        let cfg = MethodConfig::uniform(2, 0.1, 10, 1, 0.0, 1.0, vec![c(1.0)]);
        let names: Vec<String> = cycle_plan(&cfg).iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["guess@1", "fine@0 (parallel)", "correct@1"]);
        let cfg = MethodConfig::uniform(3, 0.1, 10, 1, 0.0, 1.0, vec![c(1.0)]);
        let names: Vec<String> = cycle_plan(&cfg).iter().map(|s| s.to_string()).collect();
        assert_eq!(
            names,
            ["guess@2", "guess@1 (parallel)", "fine@0 (parallel)", "correct@1", "correct@2"]
        );
        let cfg = MethodConfig::uniform(3, 0.1, 10, 2, 0.0, 1.0, vec![c(1.0)]);
        let plan = cycle_plan(&cfg);
        let fines = plan.iter().filter(|s| s.action == Action::Fine).count();
        assert_eq!(fines, 4);
        assert_eq!(plan.len(), 1 + 2 * (1 + 2 * 2 + 1));
    }
}
