//! Fixed-step base integrators.

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;
use crate::C64;

/// Right-hand side `f(t, y)`, evaluated into a caller buffer.
pub trait Rhs: Sync {
    fn eval_into(&self, t: f64, y: &[C64], out: &mut [C64]);

    fn eval(&self, t: f64, y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); y.len()];
        self.eval_into(t, y, &mut out);
        out
    }
}

/// Adapter for closures returning a fresh vector.
pub struct FnRhs<F>(pub F);

impl<F> Rhs for FnRhs<F>
where
    F: Fn(f64, &[C64]) -> Vec<C64> + Sync,
{
    fn eval_into(&self, t: f64, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(&(self.0)(t, y));
    }
}

/// Exact flow of the linear part of a split system.
pub trait LinearFlow: Sync {
    fn advance(&self, t0: f64, t1: f64, y: &mut [C64]);
}

pub struct IdentityFlow;

impl LinearFlow for IdentityFlow {
    fn advance(&self, _t0: f64, _t1: f64, _y: &mut [C64]) {}
}

/// Adapter for closures `(t0, t1, y)` acting in place.
pub struct FnFlow<F>(pub F);

impl<F> LinearFlow for FnFlow<F>
where
    F: Fn(f64, f64, &mut [C64]) + Sync,
{
    fn advance(&self, t0: f64, t1: f64, y: &mut [C64]) {
        (self.0)(t0, t1, y)
    }
}

/// A system split into an exactly solvable linear part and a remainder.
#[derive(Clone, Copy)]
pub struct SplitRhs<'a> {
    pub linear_flow: &'a dyn LinearFlow,
    pub nonlinear_rhs: &'a dyn Rhs,
}

/// Scratch buffers for in-place stepping.
#[derive(Clone, Debug)]
pub struct Workspace {
    k: Vec<C64>,
    tmp: Vec<C64>,
}

impl Workspace {
    /// Zero-sized; grows on first use.
    pub const fn empty() -> Self {
        Self { k: Vec::new(), tmp: Vec::new() }
    }

    pub fn new(dim: usize) -> Self {
        Self {
            k: vec![C64::new(0.0, 0.0); dim],
            tmp: vec![C64::new(0.0, 0.0); dim],
        }
    }

    fn fit(&mut self, dim: usize) {
        if self.k.len() != dim {
            self.k.resize(dim, C64::new(0.0, 0.0));
            self.tmp.resize(dim, C64::new(0.0, 0.0));
        }
    }
}

/// Explicit midpoint step `y + h f(t + h/2, y + h/2 f(t, y))`, in place.
pub fn rk2_step_in_place(f: &dyn Rhs, t: f64, y: &mut [C64], h: f64, ws: &mut Workspace) {
    ws.fit(y.len());
    rk2_fitted(f, t, y, h, ws);
}

/// [`rk2_step_in_place`] for a workspace already sized to `y`.
#[inline(always)]
fn rk2_fitted(f: &dyn Rhs, t: f64, y: &mut [C64], h: f64, ws: &mut Workspace) {
    let (k, tmp) = (&mut ws.k[..], &mut ws.tmp[..]);
    f.eval_into(t, y, k);
    let half = 0.5 * h;
    for ((tm, yi), ki) in tmp.iter_mut().zip(y.iter()).zip(k.iter()) {
        *tm = yi + ki * half;
    }
    f.eval_into(t + half, tmp, k);
    for (yi, ki) in y.iter_mut().zip(k.iter()) {
        *yi += ki * h;
    }
}

/// Strang step: half linear flow, RK2 step of the remainder, half linear flow.
pub fn strang_step_in_place(f: &SplitRhs<'_>, t: f64, y: &mut [C64], h: f64, ws: &mut Workspace) {
    ws.fit(y.len());
    strang_fitted(f, t, y, h, ws);
}

#[inline(always)]
fn strang_fitted(f: &SplitRhs<'_>, t: f64, y: &mut [C64], h: f64, ws: &mut Workspace) {
    let mid = t + 0.5 * h;
    f.linear_flow.advance(t, mid, y);
    rk2_fitted(f.nonlinear_rhs, t, y, h, ws);
    f.linear_flow.advance(mid, t + h, y);
}

pub fn rk2_step(f: &dyn Rhs, t: f64, y: &[C64], h: f64) -> Vec<C64> {
    let mut out = y.to_vec();
    rk2_step_in_place(f, t, &mut out, h, &mut Workspace::new(y.len()));
    out
}

pub fn strang_step(f: &SplitRhs<'_>, t: f64, y: &[C64], h: f64) -> Vec<C64> {
    let mut out = y.to_vec();
    strang_step_in_place(f, t, &mut out, h, &mut Workspace::new(y.len()));
    out
}

/// A base stepper bound to its right-hand side.
#[derive(Clone, Copy)]
pub enum Stepper<'a> {
    Rk2(&'a dyn Rhs),
    Strang(SplitRhs<'a>),
}

impl Stepper<'_> {
    pub fn step_in_place(&self, t: f64, y: &mut [C64], h: f64, ws: &mut Workspace) {
        match self {
            Stepper::Rk2(f) => rk2_step_in_place(*f, t, y, h, ws),
            Stepper::Strang(s) => strang_step_in_place(s, t, y, h, ws),
        }
    }

    /// Takes `n` steps of size `h` from `t0`, with step `i` starting at `t0 + i·h`.
    pub fn advance(&self, t0: f64, h: f64, n: usize, y: &mut [C64], ws: &mut Workspace) {
        ws.fit(y.len());
        match self {
            Stepper::Rk2(f) => {
                for i in 0..n {
                    rk2_fitted(*f, t0 + i as f64 * h, y, h, ws);
                }
            }
            Stepper::Strang(s) => {
                for i in 0..n {
                    strang_fitted(s, t0 + i as f64 * h, y, h, ws);
                }
            }
        }
    }
}

/// Number of steps of size `h` covering `[t0, t1]`; errors unless it is an
/// integer to within `1e-9` relative.
pub fn step_count(t0: f64, t1: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {h}")));
    }
    let ratio = (t1 - t0) / h;
    let n = ratio.round();
    if !(ratio >= 0.0) || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Config(format!(
            "interval [{t0}, {t1}] is not a whole number of steps of size {h} ({ratio})"
        )));
    }
    Ok(n as usize)
}

/// Integrates from `t0` to `t1` and records every step.
pub fn integrate(stepper: &Stepper<'_>, t0: f64, t1: f64, h: f64, y0: &[C64]) -> Result<Trajectory> {
    let n = step_count(t0, t1, h)?;
    let mut ws = Workspace::new(y0.len());
    let mut y = y0.to_vec();
    let mut states = Vec::with_capacity(n + 1);
    states.push(y.clone());
    for i in 0..n {
        stepper.step_in_place(t0 + i as f64 * h, &mut y, h, &mut ws);
        states.push(y.clone());
    }
    let mut times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * h).collect();
    times[n] = t1;
    Trajectory::new(times, states)
}
