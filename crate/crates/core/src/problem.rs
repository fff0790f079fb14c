//! Stiff oscillatory problems and the modulation transform.
//!
//! A problem `du/dt + (1/ε) L u = N(u) + D u` is solved through the
//! modulation variable `w(t) = exp(tL/ε) u(t)`, which obeys
//! `dw/dt = exp(tL/ε) N(exp(-tL/ε) w) + D w` when the diagonal dissipative
//! symbol `D` commutes with `L` (the only case supported).

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::C64;

/// Largest tolerated real part of a diagonal eigenvalue.
pub const DIAGONAL_SKEW_TOL: f64 = 1e-14;
/// Largest tolerated entry of `B + Bᴴ` for a dense block.
pub const BLOCK_SKEW_TOL: f64 = 1e-12;

/// Nonlinear term `N(t, u)` evaluated in physical variables.
///
/// Implementations must be pure: the same input always yields the same
/// output and no state observable by other callers is mutated.
pub trait Nonlinearity: Send + Sync {
    fn eval(&self, t: f64, u: &[C64], out: &mut [C64]);
}

impl<F> Nonlinearity for F
where
    F: Fn(f64, &[C64], &mut [C64]) + Send + Sync,
{
    fn eval(&self, t: f64, u: &[C64], out: &mut [C64]) {
        self(t, u, out)
    }
}

/// Dense skew-Hermitian block of a block-diagonal operator, stored with the
/// eigendecomposition of the Hermitian matrix `H = iB`.
#[derive(Clone)]
pub struct OperatorBlock {
    indices: Vec<usize>,
    matrix: Vec<C64>,
    /// Eigenvalues of `H = iB`; the block is `B = -iH`.
    eigenvalues: Vec<f64>,
    /// Row-major unitary eigenvector matrix of `H`.
    eigenvectors: Vec<C64>,
}

impl OperatorBlock {
    fn new(indices: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let n = indices.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Config(format!(
                "block of {} indices has a {}x{} matrix",
                n,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let skew = &matrix + matrix.adjoint();
        let defect = skew.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > BLOCK_SKEW_TOL {
            return Err(Error::Numerical(format!(
                "block on indices {:?} is not skew-Hermitian (max |B + Bᴴ| = {:e})",
                indices, defect
            )));
        }
        let hermitian = matrix.map(|z| C64::i() * z);
        // symmetrize against round-off before the Hermitian solver
        let hermitian = (&hermitian + hermitian.adjoint()).map(|z| z * 0.5);
        let eig = hermitian.clone().symmetric_eigen();
        let v = eig.eigenvectors;
        let unitary_defect = (&v.adjoint() * &v - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if unitary_defect > 1e-12 {
            return Err(Error::Numerical(format!(
                "eigenvectors of block {:?} are not unitary (defect {:e})",
                indices, unitary_defect
            )));
        }
        let mut eigenvectors = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                eigenvectors.push(v[(i, j)]);
            }
        }
        let mut dense = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                dense.push(matrix[(i, j)]);
            }
        }
        Ok(Self {
            indices,
            matrix: dense,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            eigenvectors,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Entry `(i, j)` of the block matrix.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix[i * self.indices.len() + j]
    }

    /// Frequencies of the block: eigenvalues of `iB`.
    pub fn frequencies(&self) -> &[f64] {
        &self.eigenvalues
    }

    // the index form mirrors V diag(e^{-iτλ}) Vᴴ
    #[allow(clippy::needless_range_loop)]
    fn apply_exp(&self, tau: f64, v: &mut [C64]) {
        let n = self.indices.len();
        let mut stack_x = [C64::new(0.0, 0.0); 8];
        let mut stack_c = [C64::new(0.0, 0.0); 8];
        let mut heap_x;
        let mut heap_c;
        let (x, c): (&mut [C64], &mut [C64]) = if n <= 8 {
            (&mut stack_x[..n], &mut stack_c[..n])
        } else {
            heap_x = vec![C64::new(0.0, 0.0); n];
            heap_c = vec![C64::new(0.0, 0.0); n];
            (&mut heap_x[..], &mut heap_c[..])
        };
        for (xi, &idx) in x.iter_mut().zip(&self.indices) {
            *xi = v[idx];
        }
        // c = diag(exp(-iτλ)) Vᴴ x
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += self.eigenvectors[i * n + j].conj() * x[i];
            }
            c[j] = acc * C64::from_polar(1.0, -tau * self.eigenvalues[j]);
        }
        for (i, &idx) in self.indices.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.eigenvectors[i * n + j] * c[j];
            }
            v[idx] = acc;
        }
    }
}

/// Representation of the skew-Hermitian operator `L`.
#[derive(Clone)]
pub enum LinearOperator {
    /// Eigenvalues `iω_j` of a diagonal operator.
    Diagonal(Vec<C64>),
    /// Dense blocks whose index sets partition `0..dim`.
    BlockDiagonal { dim: usize, blocks: Vec<OperatorBlock> },
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearOperator::Diagonal(d) => f.debug_tuple("Diagonal").field(d).finish(),
            LinearOperator::BlockDiagonal { dim, blocks } => f
                .debug_struct("BlockDiagonal")
                .field("dim", dim)
                .field("blocks", &blocks.len())
                .finish(),
        }
    }
}

impl LinearOperator {
    /// Diagonal operator; every eigenvalue must be purely imaginary.
    pub fn diagonal(eigenvalues: Vec<C64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Config("operator dimension must be at least 1".into()));
        }
        if let Some((j, z)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, z)| z.re.abs() > DIAGONAL_SKEW_TOL)
        {
            return Err(Error::Numerical(format!(
                "diagonal entry {j} = {z} has nonzero real part"
            )));
        }
        Ok(LinearOperator::Diagonal(eigenvalues))
    }

    /// Diagonal operator with eigenvalues `i·ω_j`.
    pub fn from_frequencies(omegas: &[f64]) -> Result<Self> {
        Self::diagonal(omegas.iter().map(|&w| C64::new(0.0, w)).collect())
    }

    /// The zero operator (non-oscillatory problems).
    pub fn zero(dim: usize) -> Result<Self> {
        Self::diagonal(vec![C64::new(0.0, 0.0); dim])
    }

    /// Block-diagonal operator. The index sets must be disjoint and cover
    /// `0..dim` exactly once, and every block must be skew-Hermitian.
    pub fn block_diagonal(dim: usize, blocks: Vec<(Vec<usize>, DMatrix<C64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("operator dimension must be at least 1".into()));
        }
        let mut seen = vec![false; dim];
        for (indices, _) in &blocks {
            for &i in indices {
                if i >= dim {
                    return Err(Error::Config(format!("block index {i} out of range 0..{dim}")));
                }
                if seen[i] {
                    return Err(Error::Config(format!("index {i} appears in two blocks")));
                }
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("index {i} is not covered by any block")));
        }
        let blocks = blocks
            .into_iter()
            .map(|(idx, m)| OperatorBlock::new(idx, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(LinearOperator::BlockDiagonal { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        match self {
            LinearOperator::Diagonal(d) => d.len(),
            LinearOperator::BlockDiagonal { dim, .. } => *dim,
        }
    }

    /// True when the operator is identically zero, so every flow is the identity.
    pub fn is_zero(&self) -> bool {
        match self {
            LinearOperator::Diagonal(d) => d.iter().all(|z| *z == C64::new(0.0, 0.0)),
            LinearOperator::BlockDiagonal { blocks, .. } => blocks
                .iter()
                .all(|b| b.matrix.iter().all(|z| *z == C64::new(0.0, 0.0))),
        }
    }

    pub fn blocks(&self) -> Option<&[OperatorBlock]> {
        match self {
            LinearOperator::Diagonal(_) => None,
            LinearOperator::BlockDiagonal { blocks, .. } => Some(blocks),
        }
    }

    /// Largest absolute frequency `|ω|` of the operator.
    pub fn max_frequency(&self) -> f64 {
        match self {
            LinearOperator::Diagonal(d) => d.iter().map(|z| z.im.abs()).fold(0.0, f64::max),
            LinearOperator::BlockDiagonal { blocks, .. } => blocks
                .iter()
                .flat_map(|b| b.eigenvalues.iter())
                .map(|w| w.abs())
                .fold(0.0, f64::max),
        }
    }

    /// Overwrites `v` with `exp(tau·L) v`.
    pub fn exp_in_place(&self, tau: f64, v: &mut [C64]) {
        if tau == 0.0 {
            return;
        }
        match self {
            LinearOperator::Diagonal(d) => {
                for (x, lam) in v.iter_mut().zip(d) {
                    if lam.im != 0.0 {
                        *x *= C64::from_polar(1.0, tau * lam.im);
                    }
                }
            }
            LinearOperator::BlockDiagonal { blocks, .. } => {
                for b in blocks {
                    b.apply_exp(tau, v);
                }
            }
        }
    }
}

/// Returns `exp(sign·t·L/ε) v`.
pub fn apply_linear_flow(
    op: &LinearOperator,
    epsilon: f64,
    t: f64,
    v: &[C64],
    sign: f64,
) -> Result<Vec<C64>> {
    check_dim(op.dim(), v.len())?;
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut out = v.to_vec();
    op.exp_in_place(sign.signum() * t / epsilon, &mut out);
    Ok(out)
}

thread_local! {
    static FLOW_SCRATCH: RefCell<Vec<C64>> = const { RefCell::new(Vec::new()) };
}

/// A stiff oscillatory system `du/dt + (1/ε) L u = N(u) + D u`.
#[derive(Clone)]
pub struct ProblemSpec {
    dim: usize,
    epsilon: f64,
    linear: LinearOperator,
    nonlinearity: Arc<dyn Nonlinearity>,
    diffusion: Option<Vec<C64>>,
    identity_flow: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim", &self.dim)
            .field("epsilon", &self.epsilon)
            .field("linear", &self.linear)
            .field("diffusion", &self.diffusion.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        epsilon: f64,
        linear: LinearOperator,
        nonlinearity: Arc<dyn Nonlinearity>,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let dim = linear.dim();
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        let identity_flow = linear.is_zero();
        Ok(Self {
            dim,
            epsilon,
            linear,
            nonlinearity,
            diffusion: None,
            identity_flow,
        })
    }

    /// Adds a diagonal dissipative symbol. It must commute with `L`, which
    /// holds when the symbol is constant on each block of `L`.
    pub fn with_diffusion(mut self, symbol: Vec<C64>) -> Result<Self> {
        check_dim(self.dim, symbol.len())?;
        if let Some(blocks) = self.linear.blocks() {
            for b in blocks {
                let first = symbol[b.indices[0]];
                if b.indices.iter().any(|&i| (symbol[i] - first).norm() > 0.0) {
                    return Err(Error::Config(format!(
                        "diffusion symbol is not constant on block {:?}; it would not commute with L",
                        b.indices
                    )));
                }
            }
        }
        self.diffusion = Some(symbol);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the modulation RHS is just `N`: no linear flow and no
    /// diffusion.
    pub fn is_unmodulated(&self) -> bool {
        self.identity_flow && self.diffusion.is_none()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn linear(&self) -> &LinearOperator {
        &self.linear
    }

    pub fn diffusion(&self) -> Option<&[C64]> {
        self.diffusion.as_deref()
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nonlinearity
    }

    /// Overwrites `v` with `exp(sign·t·L/ε) v`.
    pub fn flow_in_place(&self, t: f64, sign: f64, v: &mut [C64]) {
        if !self.identity_flow {
            self.linear.exp_in_place(sign * t / self.epsilon, v);
        }
    }

    /// Nonlinear part of the modulation RHS, `exp(tL/ε) N(exp(-tL/ε) w)`.
    pub fn nonlinear_modulation_into(&self, t: f64, w: &[C64], out: &mut [C64]) {
        if self.identity_flow {
            self.nonlinearity.eval(t, w, out);
            return;
        }
        FLOW_SCRATCH.with(|cell| {
            let mut u = cell.borrow_mut();
            u.clear();
            u.extend_from_slice(w);
            self.linear.exp_in_place(-t / self.epsilon, &mut u);
            self.nonlinearity.eval(t, &u, out);
        });
        self.linear.exp_in_place(t / self.epsilon, out);
    }

    /// Adds `D w` to `out` when a diffusion symbol is present.
    pub fn add_diffusion(&self, w: &[C64], out: &mut [C64]) {
        if let Some(d) = &self.diffusion {
            for ((o, x), s) in out.iter_mut().zip(w).zip(d) {
                *o += s * x;
            }
        }
    }

    /// Full modulation RHS written into `out`.
    pub fn modulation_rhs_into(&self, t: f64, w: &[C64], out: &mut [C64]) {
        self.nonlinear_modulation_into(t, w, out);
        self.add_diffusion(w, out);
    }

    /// Modulation RHS `exp(tL/ε) N(exp(-tL/ε) w) + D w`.
    pub fn modulation_rhs(&self, t: f64, w: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, w.len())?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.modulation_rhs_into(t, w, &mut out);
        Ok(out)
    }

    /// Physical state `u = exp(-tL/ε) w`.
    pub fn to_physical(&self, t: f64, w: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, w.len())?;
        let mut u = w.to_vec();
        self.flow_in_place(t, -1.0, &mut u);
        Ok(u)
    }

    /// Modulation state `w = exp(tL/ε) u`.
    pub fn to_modulation(&self, t: f64, u: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, u.len())?;
        let mut w = u.to_vec();
        self.flow_in_place(t, 1.0, &mut w);
        Ok(w)
    }
}

/// Free-function form of [`ProblemSpec::modulation_rhs`].
pub fn modulation_rhs(problem: &ProblemSpec, t: f64, w: &[C64]) -> Result<Vec<C64>> {
    problem.modulation_rhs(t, w)
}
