//! Kernel-weighted time averaging of the modulation right-hand side.

use std::cell::RefCell;
use std::sync::{Arc, OnceLock};

use crate::error::{check_dim, Error, Result};
use crate::integrators::Rhs;
use crate::problem::ProblemSpec;
use crate::quadrature::gauss_legendre;
use crate::C64;

/// Nodes used for the global normalization constant.
const RHO0_NODES: usize = 128;

fn bump(s: f64) -> f64 {
    if s.abs() >= 0.5 {
        0.0
    } else {
        (1.0 / ((s - 0.5) * (s + 0.5))).exp()
    }
}

/// `∫ exp(1/((s−½)(s+½))) ds` over `(−½, ½)` by `m`-point Gauss–Legendre.
pub fn normalize_kernel(m: usize) -> Result<f64> {
    if m < 16 {
        return Err(Error::Config(format!("kernel normalization needs at least 16 nodes, got {m}")));
    }
    let (x, w) = gauss_legendre(m);
    Ok(x.iter().zip(&w).map(|(x, w)| 0.5 * w * bump(0.5 * x)).sum())
}

/// Normalization constant `ρ₀`, computed once.
pub fn rho0() -> f64 {
    static RHO0: OnceLock<f64> = OnceLock::new();
    *RHO0.get_or_init(|| normalize_kernel(RHO0_NODES).expect("node count is valid"))
}

/// The smooth kernel `ρ(s)` supported on `(−½, ½)` with unit integral.
pub fn kernel_eval(s: f64) -> f64 {
    bump(s) / rho0()
}

/// Quadrature abscissae `s_m ∈ (−η/2, η/2)` and folded weights
/// `w_m·ρ(s_m/η)/η` for the window `η`.
pub fn window_rule(eta: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Config(format!("averaging window must be positive, got {eta}")));
    }
    if m < 16 {
        return Err(Error::Config(format!("averaging needs at least 16 nodes, got {m}")));
    }
    let (x, w) = gauss_legendre(m);
    let nodes: Vec<f64> = x.iter().map(|x| 0.5 * eta * x).collect();
    let weights = x
        .iter()
        .zip(&w)
        .map(|(x, w)| 0.5 * w * kernel_eval(0.5 * x))
        .collect();
    Ok((nodes, weights))
}

/// `(1/η)∫ρ(s/η) e^{irs} ds`, the factor by which averaging scales `e^{irt}`.
pub fn damping_factor(r: f64, eta: f64, m: usize) -> Result<C64> {
    let (s, w) = window_rule(eta, m)?;
    Ok(s.iter().zip(&w).map(|(s, w)| C64::from_polar(*w, r * s)).sum())
}

thread_local! {
    static NODE_SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

/// Averaged modulation right-hand side for window `η`.
///
/// The nonlinear part is averaged with `w` held fixed across the window; the
/// diagonal dissipative term does not depend on `s` and is added exactly.
#[derive(Clone)]
pub struct AveragedRhs {
    problem: Arc<ProblemSpec>,
    eta: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AveragedRhs {
    pub fn new(problem: Arc<ProblemSpec>, eta: f64, m: usize) -> Result<Self> {
        let (nodes, weights) = window_rule(eta, m)?;
        Ok(Self { problem, eta, nodes, weights })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    /// Discrete mass `Σ w_m ρ(s_m/η)/η`; one up to quadrature error.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Averaged nonlinear part only, written into `out`.
    pub fn nonlinear_into(&self, t: f64, w: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        NODE_SCRATCH.with(|cell| {
            let mut f = cell.borrow_mut();
            f.resize(w.len(), C64::new(0.0, 0.0));
            for (s, wt) in self.nodes.iter().zip(&self.weights) {
                self.problem.nonlinear_modulation_into(t + s, w, &mut f);
                for (o, v) in out.iter_mut().zip(f.iter()) {
                    *o += v * wt;
                }
            }
        });
    }

    pub fn eval_checked(&self, t: f64, w: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.problem.dim(), w.len())?;
        Ok(self.eval(t, w))
    }
}

impl Rhs for AveragedRhs {
    fn eval_into(&self, t: f64, w: &[C64], out: &mut [C64]) {
        self.nonlinear_into(t, w, out);
        self.problem.add_diffusion(w, out);
    }
}

/// Averaged nonlinear part without the dissipative term, for splitting.
pub struct AveragedNonlinear<'a>(pub &'a AveragedRhs);

impl Rhs for AveragedNonlinear<'_> {
    fn eval_into(&self, t: f64, w: &[C64], out: &mut [C64]) {
        self.0.nonlinear_into(t, w, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearOperator, Nonlinearity};
    use proptest::prelude::*;

    fn oscillatory(r: f64) -> Arc<ProblemSpec> {
        let op = LinearOperator::from_frequencies(&[-r]).unwrap();
        let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
            out[0] = -u[0] * u[0];
        });
        Arc::new(ProblemSpec::new(1.0, op, n).unwrap())
    }

    #[test]
    fn kernel_values() {
        assert!((kernel_eval(0.0) - (-4f64).exp() / rho0()).abs() < 1e-15);
        assert_eq!(kernel_eval(0.5), 0.0);
        assert_eq!(kernel_eval(-0.5), 0.0);
        assert_eq!(kernel_eval(0.7), 0.0);
        let r0 = rho0();
        assert!(r0 > 0.0 && r0 < (-4f64).exp());
    }

    #[test]
    fn normalization_is_converged() {
        let a = normalize_kernel(64).unwrap();
        let b = normalize_kernel(128).unwrap();
        assert!((a - b).abs() < 1e-12);
        // frozen from an adaptive-quadrature evaluation of the same integral
        assert!((b - 0.007_029_858_406_609_657).abs() < 1e-15, "{b:e}");
        assert!(matches!(normalize_kernel(8), Err(Error::Config(_))));
    }

    #[test]
    fn kernel_integrates_to_one() {
        let (x, w) = gauss_legendre(256);
        let total: f64 = x.iter().zip(&w).map(|(x, w)| 0.5 * w * kernel_eval(0.5 * x)).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn damping_basics() {
        assert!((damping_factor(0.0, 2.0, 32).unwrap() - 1.0).norm() < 1e-10);
        let d = damping_factor(100.0, 2.0, 256).unwrap();
        assert!(d.norm() < 0.05);
        let d10 = damping_factor(10.0, 2.0, 256).unwrap().norm();
        let d1000 = damping_factor(1000.0, 2.0, 4096).unwrap().norm();
        assert!(d1000 < d.norm() && d.norm() < d10);
    }

    #[test]
    fn damping_matches_trapezoid_oracle() {
        // brute-force trapezoid rule with 10⁶ panels
        let (r, eta) = (30.0, 0.5);
        let n = 1_000_000;
        let h = eta / n as f64;
        let mut acc = C64::new(0.0, 0.0);
        for i in 1..n {
            let s = -0.5 * eta + i as f64 * h;
            acc += C64::from_polar(kernel_eval(s / eta), r * s);
        }
        let oracle = acc * h / eta;
        let got = damping_factor(r, eta, 64).unwrap();
        assert!((got - oracle).norm() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn averaged_oscillatory_rhs_is_damped_rhs() {
        let p = oscillatory(100.0);
        let a = AveragedRhs::new(p.clone(), 2.0, 64).unwrap();
        let d = damping_factor(100.0, 2.0, 64).unwrap();
        let w = [C64::new(0.8, 0.1)];
        for t in [0.0, 0.3, 0.77] {
            let got = a.eval(t, &w)[0];
            let expected = d * p.modulation_rhs(t, &w).unwrap()[0];
            assert!((got - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn small_window_recovers_rhs() {
        let p = oscillatory(100.0);
        let a = AveragedRhs::new(p.clone(), 1e-6, 32).unwrap();
        let w = [C64::new(1.0, 0.0)];
        let got = a.eval(0.4, &w)[0];
        let exact = p.modulation_rhs(0.4, &w).unwrap()[0];
        assert!((got - exact).norm() / exact.norm() < 1e-4);
    }

    #[test]
    fn constant_rhs_is_unchanged() {
        let op = LinearOperator::zero(2).unwrap();
        let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
            out[0] = -u[0];
            out[1] = u[0] * u[1];
        });
        let p = Arc::new(ProblemSpec::new(1.0, op, n).unwrap());
        let a = AveragedRhs::new(p.clone(), 0.7, 32).unwrap();
        assert!((a.weight_sum() - 1.0).abs() < 1e-8);
        let w = [C64::new(0.5, 0.2), C64::new(-1.0, 0.3)];
        let got = a.eval(1.0, &w);
        let exact = p.modulation_rhs(1.0, &w).unwrap();
        for (g, e) in got.iter().zip(&exact) {
            assert!((g - e).norm() < 1e-8);
        }
    }

    #[test]
    fn three_timescale_window_filters_fast_components() {
        let op = LinearOperator::from_frequencies(&[2.0, 20.0, 200.0]).unwrap();
        let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
            for (o, x) in out.iter_mut().zip(u) {
                *o = -x * x;
            }
        });
        let p = Arc::new(ProblemSpec::new(1.0, op, n).unwrap());
        // between 2π/20 and 2π/2
        let a = AveragedRhs::new(p.clone(), 1.0, 64).unwrap();
        let w = [C64::new(1.0, 0.0); 3];
        let avg = a.eval(0.5, &w);
        let raw = p.modulation_rhs(0.5, &w).unwrap();
        assert!((avg[0].norm() / raw[0].norm() - 1.0).abs() < 0.1);
        assert!(avg[1].norm() < 0.2 * raw[1].norm());
        assert!(avg[2].norm() < 0.2 * raw[2].norm());
    }

    proptest! {
        #[test]
        fn kernel_is_even(s in -1.0f64..1.0) {
            prop_assert_eq!(kernel_eval(s), kernel_eval(-s));
        }

        #[test]
        fn damping_is_bounded_and_conjugate_symmetric(r in 0.0f64..500.0, eta in 0.01f64..3.0) {
            let m = 64.max((r * eta).ceil() as usize);
            let d = damping_factor(r, eta, m).unwrap();
            let dm = damping_factor(-r, eta, m).unwrap();
            prop_assert!(d.norm() <= 1.0 + 1e-10);
            prop_assert!((dm - d.conj()).norm() < 1e-12);
        }
    }
}
