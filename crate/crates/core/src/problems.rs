//! Model problems with closed-form or reference solutions.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::config::Integrator;
use crate::error::{Error, Result};
use crate::parareal::{BasePropagator, LevelRhs, Propagator};
use crate::problem::{LinearOperator, Nonlinearity, ProblemSpec};
use crate::trajectory::Trajectory;
use crate::{State, C64};

/// `dx/dt = −x`, `x(0) = 1` on `[0, 2]`: a zero operator with `N(u) = −u`.
pub fn decay() -> ProblemSpec {
    let n: Arc<dyn Nonlinearity> = Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
        for (o, x) in out.iter_mut().zip(u) {
            *o = -x;
        }
    });
    ProblemSpec::new(1.0, LinearOperator::zero(1).expect("dim 1"), n).expect("valid")
}

pub fn decay_exact(t: f64) -> f64 {
    (-t).exp()
}

fn neg_square() -> Arc<dyn Nonlinearity> {
    Arc::new(|_t: f64, u: &[C64], out: &mut [C64]| {
        for (o, x) in out.iter_mut().zip(u) {
            *o = -x * x;
        }
    })
}

/// Scalar modulation equation `dw/dt = −e^{irt} w²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatoryProblem {
    pub r: f64,
    pub w0: C64,
}

impl OscillatoryProblem {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Config(format!("r must be positive, got {r}")));
        }
        Ok(Self { r, w0: C64::new(1.0, 0.0) })
    }

    /// `L = diag(−ir)`, `ε = 1`, `N(u) = −u²`.
    pub fn spec(&self) -> ProblemSpec {
        let op = LinearOperator::from_frequencies(&[-self.r]).expect("imaginary eigenvalue");
        ProblemSpec::new(1.0, op, neg_square()).expect("valid")
    }

    pub fn exact(&self, t: f64) -> Result<C64> {
        exact_oscillatory(self.r, self.w0, t)
    }
}

/// `w(t) = r w₀ / (−i w₀ e^{irt} + i w₀ + r)`.
pub fn exact_oscillatory(r: f64, w0: C64, t: f64) -> Result<C64> {
    let i = C64::i();
    let den = -i * w0 * C64::from_polar(1.0, r * t) + i * w0 + r;
    if den.norm() < 1e-12 {
        return Err(Error::Singularity(format!("denominator vanishes at t = {t}")));
    }
    Ok(r * w0 / den)
}

/// Three decoupled oscillators `du_j/dt + iω_j u_j + u_j² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeTimescaleProblem {
    pub omegas: [f64; 3],
    pub u0: [C64; 3],
}

impl Default for ThreeTimescaleProblem {
    fn default() -> Self {
        Self { omegas: [2.0, 20.0, 200.0], u0: [C64::new(1.0, 0.0); 3] }
    }
}

impl ThreeTimescaleProblem {
    pub fn new(omegas: [f64; 3], u0: [C64; 3]) -> Result<Self> {
        if let Some(w) = omegas.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Config(format!("frequencies must be positive, got {w}")));
        }
        Ok(Self { omegas, u0 })
    }

    pub fn spec(&self) -> ProblemSpec {
        let op = LinearOperator::from_frequencies(&self.omegas).expect("imaginary eigenvalues");
        ProblemSpec::new(1.0, op, neg_square()).expect("valid")
    }

    /// Modulation solution `w_j(t) = w_j(0) / (1 + w_j(0)(1 − e^{−iω_j t})/(iω_j))`.
    pub fn exact(&self, t: f64) -> Result<State> {
        self.omegas
            .iter()
            .zip(&self.u0)
            .map(|(&w, &u)| {
                let den = 1.0 + u * (1.0 - C64::from_polar(1.0, -w * t)) / C64::new(0.0, w);
                if den.norm() < 1e-12 {
                    Err(Error::Singularity(format!("denominator vanishes at t = {t}")))
                } else {
                    Ok(u / den)
                }
            })
            .collect()
    }
}

/// Elastic pendulum with horizontal frequency `ω_R`, vertical `ω_Z` and
/// coupling `λ`.
///
/// The state is stored as `(ω_R x₁, x₂, ω_R y₁, y₂, ω_Z z₁, z₂)`, in which
/// the linear part becomes three skew-symmetric 2×2 blocks. Use
/// [`SwingingSpring::to_state`] and [`SwingingSpring::physical`] to convert.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwingingSpring {
    pub omega_r: f64,
    pub omega_z: f64,
    pub lambda: f64,
    pub x0: [f64; 6],
}

impl Default for SwingingSpring {
    fn default() -> Self {
        Self { omega_r: 1.0, omega_z: 2.0, lambda: 0.1, x0: [0.1, 0.0, 0.1, 0.0, 0.1, 0.0] }
    }
}

impl SwingingSpring {
    pub fn new(omega_r: f64, omega_z: f64, lambda: f64, x0: [f64; 6]) -> Result<Self> {
        if !(omega_r > 0.0) || !(omega_z > 0.0) {
            return Err(Error::Config(format!(
                "frequencies must be positive, got omega_R = {omega_r}, omega_Z = {omega_z}"
            )));
        }
        Ok(Self { omega_r, omega_z, lambda, x0 })
    }

    fn scales(&self) -> [f64; 6] {
        [self.omega_r, 1.0, self.omega_r, 1.0, self.omega_z, 1.0]
    }

    pub fn spec(&self) -> ProblemSpec {
        let block = |w: f64| {
            DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(-w, 0.0), C64::new(w, 0.0), C64::new(0.0, 0.0)])
        };
        let op = LinearOperator::block_diagonal(
            6,
            vec![
                (vec![0, 1], block(self.omega_r)),
                (vec![2, 3], block(self.omega_r)),
                (vec![4, 5], block(self.omega_z)),
            ],
        )
        .expect("skew-symmetric blocks");
        let (wr, wz, lam) = (self.omega_r, self.omega_z, self.lambda);
        let n: Arc<dyn Nonlinearity> = Arc::new(move |_t: f64, s: &[C64], out: &mut [C64]| {
            let x1 = s[0] / wr;
            let y1 = s[2] / wr;
            let z1 = s[4] / wz;
            out[0] = C64::new(0.0, 0.0);
            out[1] = lam * x1 * z1;
            out[2] = C64::new(0.0, 0.0);
            out[3] = lam * y1 * z1;
            out[4] = C64::new(0.0, 0.0);
            out[5] = 0.5 * lam * (x1 * x1 + y1 * y1);
        });
        ProblemSpec::new(1.0, op, n).expect("valid")
    }

    /// Scaled complex state for physical coordinates `x`.
    pub fn to_state(&self, x: &[f64; 6]) -> State {
        x.iter().zip(self.scales()).map(|(v, s)| C64::new(v * s, 0.0)).collect()
    }

    pub fn initial_state(&self) -> State {
        self.to_state(&self.x0)
    }

    /// Physical coordinates of a scaled state (real parts).
    pub fn physical(&self, s: &[C64]) -> [f64; 6] {
        let mut x = [0.0; 6];
        for ((xi, v), sc) in x.iter_mut().zip(s).zip(self.scales()) {
            *xi = v.re / sc;
        }
        x
    }

    /// Period of the fastest linear oscillation.
    pub fn fast_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_r.max(self.omega_z)
    }

    /// Quadratic energy of the linearized system.
    pub fn linear_energy(&self, x: &[f64; 6]) -> f64 {
        0.5 * (x[1] * x[1] + self.omega_r.powi(2) * x[0] * x[0])
            + 0.5 * (x[3] * x[3] + self.omega_r.powi(2) * x[2] * x[2])
            + 0.5 * (x[5] * x[5] + self.omega_z.powi(2) * x[4] * x[4])
    }
}

/// Directory for cached reference solutions: `$MLP_CACHE_DIR`, or a
/// subdirectory of the system temporary directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os("MLP_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mlp-reference-cache"))
}

static CACHE_LOCK: Mutex<()> = Mutex::new(());

fn cache_key(key: &str, u0: &[C64], times: &[f64], dt_ref: f64, integrator: Integrator) -> u64 {
    let mut h = Sha256::new();
    h.update(key.as_bytes());
    h.update([0u8]);
    h.update(integrator.to_string().as_bytes());
    for z in u0 {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    for t in times {
        h.update(t.to_le_bytes());
    }
    h.update(dt_ref.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

const HEADER: usize = 24;

fn read_cache(path: &Path, hash: u64, dt_ref: f64, len: usize, dim: usize) -> Option<Vec<State>> {
    let bytes = fs::read(path).ok()?;
    let expected = HEADER + len * dim * 16;
    let ok = bytes.len() == expected
        && u64::from_le_bytes(bytes[0..8].try_into().ok()?) == hash
        && f64::from_le_bytes(bytes[8..16].try_into().ok()?).to_bits() == dt_ref.to_bits()
        && u64::from_le_bytes(bytes[16..24].try_into().ok()?) == len as u64;
    if !ok {
        log::warn!("reference cache {} is corrupt; recomputing", path.display());
        return None;
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let mut states = Vec::with_capacity(len);
    let mut o = HEADER;
    for _ in 0..len {
        let mut s = Vec::with_capacity(dim);
        for _ in 0..dim {
            s.push(C64::new(f(o), f(o + 8)));
            o += 16;
        }
        states.push(s);
    }
    Some(states)
}

fn write_cache(path: &Path, hash: u64, dt_ref: f64, states: &[State]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::with_capacity(HEADER + states.len() * states[0].len() * 16);
    buf.extend_from_slice(&hash.to_le_bytes());
    buf.extend_from_slice(&dt_ref.to_le_bytes());
    buf.extend_from_slice(&(states.len() as u64).to_le_bytes());
    for s in states {
        for z in s {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

/// Serial fine integration of the modulation equation sampled on `times`.
///
/// `key` identifies the problem and its parameters; together with the
/// initial data, grid, step and integrator it names the cache entry under
/// `cache_dir` (no caching when `None`). Unreadable or inconsistent cache
/// files are recomputed.
pub fn reference_solution(
    problem: &ProblemSpec,
    key: &str,
    u0: &[C64],
    times: &[f64],
    dt_ref: f64,
    integrator: Integrator,
    cache_dir: Option<&Path>,
) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::Config("reference grid is empty".into()));
    }
    crate::error::check_dim(problem.dim(), u0.len())?;
    let compute = || -> Result<Vec<State>> {
        let arc = Arc::new(problem.clone());
        let mut states = vec![u0.to_vec()];
        if times.len() > 1 {
            let spacing = times[1] - times[0];
            let prop = BasePropagator::new(arc, LevelRhs::Full, integrator, 0, dt_ref, spacing)?;
            for (i, &t) in times[..times.len() - 1].iter().enumerate() {
                let next = prop.propagate(t, &states[i])?.0;
                states.push(next);
            }
        }
        Ok(states)
    };
    let states = match cache_dir {
        None => compute()?,
        Some(dir) => {
            let hash = cache_key(key, u0, times, dt_ref, integrator);
            let path = dir.join(format!("{hash:016x}.ref"));
            let _guard = CACHE_LOCK.lock().unwrap_or_else(|e| e.into_inner());
            match read_cache(&path, hash, dt_ref, times.len(), problem.dim()) {
                Some(s) => s,
                None => {
                    let s = compute()?;
                    if let Err(e) = write_cache(&path, hash, dt_ref, &s) {
                        log::warn!("could not write reference cache {}: {e}", path.display());
                    }
                    s
                }
            }
        }
    };
    Trajectory::new(times.to_vec(), states)
}
