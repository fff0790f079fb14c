//! Fourier pseudo-spectral discretization of the 1D rotating shallow water
//! equations on a `2π`-periodic domain.
//!
//! Coefficients use the normalization `û_k = (1/n) Σ_j u_j e^{−ikx_j}` in
//! standard FFT ordering. The state is `(v̂₁, v̂₂, ĥ)` concatenated.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_dim, Error, Result};
use crate::problem::{LinearOperator, Nonlinearity, ProblemSpec};
use crate::{State, C64};

/// Uniform grid of `modes` points on `[0, 2π)` with its FFT plans.
#[derive(Clone)]
pub struct SpectralGrid {
    modes: usize,
    wavenumbers: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("modes", &self.modes).finish()
    }
}

impl SpectralGrid {
    pub fn new(modes: usize) -> Result<Self> {
        if modes < 4 || !modes.is_power_of_two() {
            return Err(Error::Config(format!("modes must be a power of two >= 4, got {modes}")));
        }
        let half = modes as i64 / 2;
        let wavenumbers = (0..modes as i64).map(|j| if j < half { j } else { j - modes as i64 }).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            modes,
            wavenumbers,
            forward: planner.plan_fft_forward(modes),
            inverse: planner.plan_fft_inverse(modes),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Wavenumbers in FFT order: `0, 1, …, n/2−1, −n/2, …, −1`.
    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    /// Wavenumber used for odd derivatives; zero at the Nyquist mode.
    pub fn derivative_wavenumber(&self, j: usize) -> f64 {
        if j == self.modes / 2 {
            0.0
        } else {
            self.wavenumbers[j] as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.modes).map(|j| 2.0 * PI * j as f64 / self.modes as f64).collect()
    }

    /// Coefficients of real samples.
    pub fn to_spectral(&self, values: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let s = 1.0 / self.modes as f64;
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }

    /// Samples of a coefficient vector (complex; real for symmetric input).
    pub fn to_physical(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf
    }
}

/// Multiplies each mode by `ik`, zeroing the Nyquist mode.
pub fn spectral_derivative(grid: &SpectralGrid, field_hat: &[C64]) -> Result<Vec<C64>> {
    crate::error::check_dim(grid.modes(), field_hat.len())?;
    Ok(field_hat
        .iter()
        .enumerate()
        .map(|(j, z)| C64::new(0.0, grid.derivative_wavenumber(j)) * z)
        .collect())
}

/// Parameters of the rotating shallow water problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RsweParams {
    /// Rossby number.
    pub epsilon: f64,
    /// Burger number parameter.
    pub burger: f64,
    /// Hyperviscosity coefficient.
    pub mu: f64,
    pub t_end: f64,
    /// Truncate products to `|k| ≤ n/3`.
    pub dealias: bool,
}

impl RsweParams {
    pub fn f1() -> Self {
        Self { epsilon: 0.1, burger: 1.0, mu: 1e-4, t_end: 48.0, dealias: false }
    }

    pub fn f100() -> Self {
        Self { epsilon: 0.1, burger: 0.01, mu: 1e-4, t_end: 45.0, dealias: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.burger > 0.0) || !(self.mu >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon and F must be positive and mu non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// 3×3 block of `L` at derivative wavenumber `k`.
pub fn rswe_block(k: f64, burger: f64) -> DMatrix<C64> {
    let a = C64::new(0.0, k / burger.sqrt());
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    DMatrix::from_row_slice(3, 3, &[z, -one, a, one, z, z, a, z, z])
}

thread_local! {
    static RSWE_SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

struct RsweNonlinearity {
    grid: SpectralGrid,
    ik: Vec<C64>,
    keep: Vec<bool>,
}

impl Nonlinearity for RsweNonlinearity {
    fn eval(&self, _t: f64, u: &[C64], out: &mut [C64]) {
        let n = self.grid.modes;
        let fft_scratch = self
            .grid
            .forward
            .get_inplace_scratch_len()
            .max(self.grid.inverse.get_inplace_scratch_len());
        RSWE_SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            buf.resize(4 * n + fft_scratch, C64::new(0.0, 0.0));
            let (fields, scratch) = buf.split_at_mut(4 * n);
            let (v1, rest) = fields.split_at_mut(n);
            let (v1x, rest) = rest.split_at_mut(n);
            let (v2x, h) = rest.split_at_mut(n);
            let (a, b, c) = (&u[..n], &u[n..2 * n], &u[2 * n..]);
            for j in 0..n {
                v1[j] = a[j];
                v1x[j] = self.ik[j] * a[j];
                v2x[j] = self.ik[j] * b[j];
                h[j] = c[j];
            }
            for f in [&mut *v1, &mut *v1x, &mut *v2x, &mut *h] {
                self.grid.inverse.process_with_scratch(f, scratch);
            }
            // products overwrite the derivative buffers
            for j in 0..n {
                v1x[j] *= v1[j];
                v2x[j] *= v1[j];
                h[j] *= v1[j];
            }
            for f in [&mut *v1x, &mut *v2x, &mut *h] {
                self.grid.forward.process_with_scratch(f, scratch);
            }
            let s = 1.0 / n as f64;
            for j in 0..n {
                let keep = if self.keep[j] { s } else { 0.0 };
                out[j] = -v1x[j] * keep;
                out[n + j] = -v2x[j] * keep;
                out[2 * n + j] = -self.ik[j] * h[j] * keep;
            }
        });
    }
}

/// Builds the RSWE system: per-wavenumber skew-Hermitian 3×3 blocks, the
/// pseudo-spectral quadratic nonlinearity and hyperviscosity `−μk⁴`.
pub fn build_rswe(params: &RsweParams, grid: &SpectralGrid) -> Result<ProblemSpec> {
    params.validate()?;
    let n = grid.modes();
    let blocks = (0..n)
        .map(|j| (vec![j, n + j, 2 * n + j], rswe_block(grid.derivative_wavenumber(j), params.burger)))
        .collect();
    let op = LinearOperator::block_diagonal(3 * n, blocks)?;
    let ik = (0..n).map(|j| C64::new(0.0, grid.derivative_wavenumber(j))).collect();
    let keep = grid
        .wavenumbers()
        .iter()
        .map(|&k| !params.dealias || 3 * k.unsigned_abs() as usize <= n)
        .collect();
    let nl = RsweNonlinearity { grid: grid.clone(), ik, keep };
    let mut symbol = Vec::with_capacity(3 * n);
    for _ in 0..3 {
        symbol.extend(grid.wavenumbers().iter().map(|&k| C64::new(-params.mu * (k as f64).powi(4), 0.0)));
    }
    ProblemSpec::new(params.epsilon, op, Arc::new(nl))?.with_diffusion(symbol)
}

fn bump(x: f64) -> f64 {
    (-4.0 * (x - PI / 4.0).powi(2)).exp() * (3.0 * (x - PI / 2.0)).sin()
        + (-2.0 * (x - PI).powi(2)).exp() * (8.0 * (x - PI)).sin()
}

/// Initial height: the bump profile shifted to zero grid mean and scaled to
/// unit maximum modulus on a 16× refined grid. Velocities start at rest.
pub fn rswe_initial_condition(grid: &SpectralGrid) -> State {
    let n = grid.modes();
    let x = grid.points();
    let mean = x.iter().map(|&x| bump(x)).sum::<f64>() / n as f64;
    let fine = 16 * n;
    let peak = (0..fine)
        .map(|j| (bump(2.0 * PI * j as f64 / fine as f64) - mean).abs())
        .fold(0.0, f64::max);
    let c1 = 1.0 / peak;
    let h: Vec<f64> = x.iter().map(|&x| c1 * (bump(x) - mean)).collect();
    let mut h_hat = grid.to_spectral(&h);
    h_hat[0] = C64::new(0.0, 0.0);
    let mut state = vec![C64::new(0.0, 0.0); 2 * n];
    state.extend(h_hat);
    state
}

/// Height profile sampled on a grid `factor` times finer than `grid`.
pub fn rswe_initial_height(grid: &SpectralGrid, factor: usize) -> Vec<f64> {
    let n = grid.modes();
    let x = grid.points();
    let mean = x.iter().map(|&x| bump(x)).sum::<f64>() / n as f64;
    let fine = 16 * n;
    let peak = (0..fine)
        .map(|j| (bump(2.0 * PI * j as f64 / fine as f64) - mean).abs())
        .fold(0.0, f64::max);
    let m = factor * n;
    (0..m).map(|j| (bump(2.0 * PI * j as f64 / m as f64) - mean) / peak).collect()
}

/// Physical fields `(v₁, v₂, h)` on the grid for a modulation state at time `t`.
pub fn rswe_fields(grid: &SpectralGrid, problem: &ProblemSpec, t: f64, w: &[C64]) -> Result<[Vec<f64>; 3]> {
    let n = grid.modes();
    check_dim(3 * n, w.len())?;
    let u = problem.to_physical(t, w)?;
    let field = |i: usize| grid.to_physical(&u[i * n..(i + 1) * n]).iter().map(|z| z.re).collect();
    Ok([field(0), field(1), field(2)])
}

/// `max |u − ref| / max |ref|` over all three physical fields jointly.
pub fn rswe_relative_linf(
    grid: &SpectralGrid,
    problem: &ProblemSpec,
    t: f64,
    w: &[C64],
    reference: &[C64],
) -> Result<f64> {
    let a = rswe_fields(grid, problem, t, w)?;
    let b = rswe_fields(grid, problem, t, reference)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (fa, fb) in a.iter().zip(&b) {
        for (x, y) in fa.iter().zip(fb) {
            diff = diff.max((x - y).abs());
            scale = scale.max(y.abs());
        }
    }
    if scale == 0.0 {
        return Err(Error::Numerical("reference fields vanish".into()));
    }
    Ok(diff / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Integrator;
    use crate::parareal::{BasePropagator, LevelRhs, Propagator};

    fn norm(v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn grid_ordering() {
        let g = SpectralGrid::new(8).unwrap();
        assert_eq!(g.wavenumbers(), &[0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.derivative_wavenumber(4), 0.0);
        assert!(SpectralGrid::new(12).is_err());
    }

    #[test]
    fn derivative_of_simple_fields() {
        let g = SpectralGrid::new(64).unwrap();
        let x = g.points();
        let zero = spectral_derivative(&g, &g.to_spectral(&vec![2.5; 64])).unwrap();
        assert!(zero.iter().all(|z| z.norm() < 1e-15));
        let d = spectral_derivative(&g, &g.to_spectral(&x.iter().map(|x| (3.0 * x).sin()).collect::<Vec<_>>())).unwrap();
        for (v, x) in g.to_physical(&d).iter().zip(&x) {
            assert!((v.re - 3.0 * (3.0 * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let g = SpectralGrid::new(256).unwrap();
        let f = |x: f64| (-4.0 * (x - PI).powi(2)).exp();
        let x = g.points();
        let d = g.to_physical(&spectral_derivative(&g, &g.to_spectral(&x.iter().map(|&x| f(x)).collect::<Vec<_>>())).unwrap());
        // tenth-order central differences at dx = 2π/4096
        let h = 2.0 * PI / 4096.0;
        let coef = [5.0 / 6.0, -5.0 / 21.0, 5.0 / 84.0, -5.0 / 504.0, 1.0 / 1260.0];
        for (j, &xj) in x.iter().enumerate().step_by(7) {
            let fd: f64 = coef
                .iter()
                .enumerate()
                .map(|(m, c)| c * (f(xj + (m + 1) as f64 * h) - f(xj - (m + 1) as f64 * h)))
                .sum::<f64>()
                / h;
            assert!((d[j].re - fd).abs() < 1e-6, "{} vs {fd}", d[j].re);
        }
    }

    #[test]
    fn blocks_are_skew_hermitian() {
        let g = SpectralGrid::new(128).unwrap();
        for j in 0..128 {
            let b = rswe_block(g.derivative_wavenumber(j), 0.01);
            let d = (&b + b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(d <= 1e-13);
        }
        let b0 = rswe_block(0.0, 1.0);
        assert_eq!(b0[(0, 2)], C64::new(0.0, 0.0));
        assert_eq!(b0[(0, 1)], C64::new(-1.0, 0.0));
        assert_eq!(b0[(1, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn nonlinearity_of_single_mode() {
        let g = SpectralGrid::new(32).unwrap();
        let p = build_rswe(&RsweParams::f1(), &g).unwrap();
        let n = 32;
        let x = g.points();
        let mut u = g.to_spectral(&x.iter().map(|x| x.cos()).collect::<Vec<_>>());
        u.extend(vec![C64::new(0.0, 0.0); 2 * n]);
        let mut out = vec![C64::new(0.0, 0.0); 3 * n];
        p.nonlinearity().eval(0.0, &u, &mut out);
        let expected = g.to_spectral(&x.iter().map(|x| 0.5 * (2.0 * x).sin()).collect::<Vec<_>>());
        for j in 0..n {
            assert!((out[j] - expected[j]).norm() < 1e-12);
        }
        assert!(out[n..].iter().all(|z| z.norm() < 1e-12));
        let zero = vec![C64::new(0.0, 0.0); 3 * n];
        p.nonlinearity().eval(0.0, &zero, &mut out);
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn initial_condition_constraints() {
        let g = SpectralGrid::new(128).unwrap();
        let s = rswe_initial_condition(&g);
        assert!(s[..256].iter().all(|z| z.norm() == 0.0));
        let h_hat = &s[256..];
        assert!(h_hat[0].norm() < 1e-12);
        for j in 1..128 {
            assert!((h_hat[j] - h_hat[128 - j].conj()).norm() < 1e-12);
        }
        let fine = rswe_initial_height(&g, 16);
        let peak = fine.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn linear_flow_conserves_norm() {
        let g = SpectralGrid::new(32).unwrap();
        let params = RsweParams { mu: 0.0, ..RsweParams::f1() };
        let p = build_rswe(&params, &g).unwrap();
        let zero: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, _u: &[C64], out: &mut [C64]| {
            out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0))
        });
        let lin = ProblemSpec::new(p.epsilon(), p.linear().clone(), zero).unwrap();
        let prop = BasePropagator::new(Arc::new(lin), LevelRhs::Full, Integrator::Strang, 0, 1e-3, 1.0).unwrap();
        let u0 = rswe_initial_condition(&g);
        let u1 = prop.propagate(0.0, &u0).unwrap().0;
        assert!((norm(&u1) - norm(&u0)).abs() < 1e-10);
    }

    #[test]
    fn hyperviscous_run_is_dissipative_and_stable() {
        let g = SpectralGrid::new(32).unwrap();
        let p = Arc::new(build_rswe(&RsweParams::f1(), &g).unwrap());
        let prop = BasePropagator::new(p, LevelRhs::Full, Integrator::Strang, 0, 5e-4, 0.1).unwrap();
        let mut u = rswe_initial_condition(&g);
        let mut last = norm(&u);
        for i in 0..20 {
            u = prop.propagate(i as f64 * 0.1, &u).unwrap().0;
            let now = norm(&u);
            assert!(now <= last * (1.0 + 1e-12) && now.is_finite());
            last = now;
        }
    }
}
