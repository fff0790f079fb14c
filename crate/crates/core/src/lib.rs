//! Multi-level Parareal with per-level temporal averaging.
//!
//! The crate solves stiff oscillatory systems
//! `du/dt + (1/ε) L u = N(u)` with skew-Hermitian `L` by working on the
//! modulation variable `w = exp(tL/ε) u`. Coarse levels integrate a
//! kernel-averaged version of the modulation equation, the finest level the
//! full one, and levels are coupled recursively through Parareal corrections.
//!
//! Module map:
//! - [`problem`], [`config`], [`trajectory`]: domain model.
//! - [`integrators`]: explicit midpoint and Strang steppers.
//! - [`averaging`]: smoothing kernel, Gauss–Legendre quadrature, averaged RHS.
//! - [`parareal`]: two-level and recursive multi-level solvers.
//! - [`problems`], [`spectral`]: model problems and the 1D rotating shallow
//!   water equations.
//! - [`complexity`]: serial-step accounting and error-bound evaluation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod complexity;
pub mod config;
pub mod error;
pub mod integrators;
pub mod norms;
pub mod parareal;
pub mod problem;
pub mod problems;
pub mod quadrature;
pub mod spectral;
pub mod trajectory;

pub use num_complex::Complex64 as C64;

pub use config::{Integrator, LevelSpec, MethodConfig};
pub use error::{Error, Result};
pub use problem::{LinearOperator, Nonlinearity, ProblemSpec};
pub use trajectory::Trajectory;

/// Complex state vector.
pub type State = Vec<C64>;
