//! Problem description, shared preprocessing, and the classical
//! time-stepping scheme.
//!
//! Each step solves
//!
//! ```text
//! (M + τ²S) Uⁿ = 2M Uⁿ⁻¹ − M Uⁿ⁻² − τ² Σ_{k<n} β_{n−k} S Uᵏ + τ² Fⁿ
//! ```
//!
//! with the history sum evaluated directly, so a run costs `O(M N²)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{assemble_operators, interpolate, load_vector, MeshSpec, OperatorPair};
use crate::kernel::{LagWeights, VariableOrder};
use crate::step::StepSolver;

/// A function of space only.
pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A space-time source term. `frozen(t)` fixes the time so that any
/// per-time work (e.g. a convolution integral) is done once per load vector.
pub trait Source: Send + Sync {
    fn frozen(&self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + '_>;

    /// Load vector of `f(·, t)`. Sources with structure (e.g. separable in
    /// space and time) may override this to avoid re-running quadrature.
    fn load_vector(&self, mesh: &MeshSpec, t: f64) -> Vec<f64> {
        load_vector(mesh, &*self.frozen(t))
    }

    /// Lets callers skip quadrature entirely for `f ≡ 0`.
    fn is_zero(&self) -> bool {
        false
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSource;

impl Source for ZeroSource {
    fn frozen(&self, _t: f64) -> Box<dyn Fn(&[f64]) -> f64 + '_> {
        Box::new(|_| 0.0)
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Adapts a plain closure `f(x, t)`.
pub struct FnSource<F>(pub F);

impl<F> Source for FnSource<F>
where
    F: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    fn frozen(&self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + '_> {
        Box::new(move |x| (self.0)(x, t))
    }
}

fn zero_fn() -> SpaceFn {
    Arc::new(|_| 0.0)
}

/// Mesh, variable order, time grid, initial data and source.
#[derive(Clone)]
pub struct ProblemSetup {
    mesh: MeshSpec,
    order: VariableOrder,
    horizon: f64,
    steps: usize,
    u0: SpaceFn,
    v0: SpaceFn,
    source: Arc<dyn Source>,
    zero_data: bool,
}

impl fmt::Debug for ProblemSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSetup")
            .field("mesh", &self.mesh)
            .field("order", &self.order.name())
            .field("horizon", &self.horizon)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

impl ProblemSetup {
    /// Zero initial data and zero source; use the `with_*` builders to add them.
    pub fn new(mesh: MeshSpec, order: VariableOrder, horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidSetup(format!("need at least 2 time steps, got {steps}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidSetup(format!("final time must be positive and finite, got {horizon}")));
        }
        if order.horizon() < horizon {
            return Err(Error::InvalidSetup(format!(
                "variable order `{}` was validated on [0, {}] but the final time is {horizon}",
                order.name(),
                order.horizon()
            )));
        }
        Ok(ProblemSetup {
            mesh,
            order,
            horizon,
            steps,
            u0: zero_fn(),
            v0: zero_fn(),
            source: Arc::new(ZeroSource),
            zero_data: true,
        })
    }

    /// Initial displacement `u₀` and velocity `û₀`.
    pub fn with_initial_data(mut self, u0: SpaceFn, v0: SpaceFn) -> Self {
        self.u0 = u0;
        self.v0 = v0;
        self.zero_data = false;
        self
    }

    pub fn with_source(mut self, source: Arc<dyn Source>) -> Self {
        self.source = source;
        self
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn order(&self) -> &VariableOrder {
        &self.order
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        // exact at n = N
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.tau()
        }
    }

    pub fn source(&self) -> &dyn Source {
        self.source.as_ref()
    }

    /// Same problem on a different mesh.
    pub fn with_mesh(&self, mesh: MeshSpec) -> Self {
        ProblemSetup { mesh, ..self.clone() }
    }

    /// Same problem with a different number of steps.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidSetup(format!("need at least 2 time steps, got {steps}")));
        }
        Ok(ProblemSetup { steps, ..self.clone() })
    }
}

/// Nodal frames `U⁰..U^N`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dofs: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(frames: usize, dofs: usize) -> Self {
        Trajectory { dofs, data: vec![0.0; frames * dofs] }
    }

    pub fn from_frames(frames: &[Vec<f64>]) -> Result<Self> {
        let dofs = frames.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(frames.len() * dofs);
        for f in frames {
            if f.len() != dofs {
                return Err(Error::DimensionMismatch { expected: dofs, found: f.len() });
            }
            data.extend_from_slice(f);
        }
        Ok(Trajectory { dofs, data })
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    /// Number of frames, `N + 1`.
    pub fn len(&self) -> usize {
        if self.dofs == 0 {
            0
        } else {
            self.data.len() / self.dofs
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.data[n * self.dofs..(n + 1) * self.dofs]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.dofs..(n + 1) * self.dofs]
    }

    pub fn last(&self) -> &[f64] {
        self.frame(self.len() - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `max_n ‖Aⁿ − Bⁿ‖∞ / ‖Bⁿ‖∞` with `other` as the reference; frames
    /// where both sides vanish contribute 0.
    pub fn max_relative_diff(&self, other: &Trajectory) -> Result<f64> {
        if self.dofs != other.dofs || self.data.len() != other.data.len() {
            return Err(Error::DimensionMismatch { expected: other.data.len(), found: self.data.len() });
        }
        let mut worst = 0.0f64;
        for n in 0..self.len() {
            let (a, b) = (self.frame(n), other.frame(n));
            let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
            if diff > 0.0 {
                worst = worst.max(if scale > 0.0 { diff / scale } else { f64::INFINITY });
            }
        }
        Ok(worst)
    }
}

/// `U⁰ = I_h u₀` and `U¹ = U⁰ + τ M⁻¹ Û⁰` with `Û⁰` the load vector of `û₀`.
pub fn initial_frames(setup: &ProblemSetup, ops: &OperatorPair) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = setup.mesh();
    if setup.zero_data {
        return Ok((vec![0.0; mesh.dofs()], vec![0.0; mesh.dofs()]));
    }
    let u0 = interpolate(mesh, setup.u0.as_ref());
    let mut vel = load_vector(mesh, setup.v0.as_ref());
    StepSolver::mass(ops).solve_in_place(&mut vel)?;
    let tau = setup.tau();
    let u1 = u0.iter().zip(&vel).map(|(u, v)| u + tau * v).collect();
    Ok((u0, u1))
}

/// Load vectors `F²..F^N`, stacked; block `j` belongs to `t_{j+2}`.
pub fn assemble_loads(setup: &ProblemSetup) -> Vec<f64> {
    let m = setup.mesh().dofs();
    let mut out = vec![0.0; (setup.steps() - 1) * m];
    if setup.source().is_zero() {
        return out;
    }
    for (j, block) in out.chunks_exact_mut(m).enumerate() {
        block.copy_from_slice(&setup.source().load_vector(setup.mesh(), setup.time(j + 2)));
    }
    out
}

/// Everything both solvers need, built once: operators, the factored step
/// matrix, lag weights, the first two frames and the load vectors.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ops: OperatorPair,
    pub solver: StepSolver,
    pub weights: LagWeights,
    pub tau: f64,
    pub steps: usize,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub loads: Vec<f64>,
}

impl Prepared {
    pub fn new(setup: &ProblemSetup) -> Result<Self> {
        let ops = assemble_operators(setup.mesh());
        let tau = setup.tau();
        let solver = StepSolver::new(&ops, tau)?;
        let weights = LagWeights::new(tau, setup.steps(), setup.order())?;
        let (u0, u1) = initial_frames(setup, &ops)?;
        let loads = assemble_loads(setup);
        Ok(Prepared { ops, solver, weights, tau, steps: setup.steps(), u0, u1, loads })
    }

    pub fn dofs(&self) -> usize {
        self.ops.dofs()
    }

    /// `Fⁿ` for `2 <= n <= N`.
    pub fn load(&self, n: usize) -> &[f64] {
        let m = self.dofs();
        &self.loads[(n - 2) * m..(n - 1) * m]
    }
}

/// Whether the convolution history enters the time-stepping recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum History {
    Included,
    /// Drops the memory term; only meaningful as the `α ≡ 0` reference.
    Omitted,
}

/// Marches the scheme from prepared data.
pub fn solve_tss(prep: &Prepared, history: History) -> Result<Trajectory> {
    let m = prep.dofs();
    let n_steps = prep.steps;
    let tau2 = prep.tau * prep.tau;
    let beta = prep.weights.as_slice();

    let mut traj = Trajectory::zeros(n_steps + 1, m);
    traj.frame_mut(0).copy_from_slice(&prep.u0);
    traj.frame_mut(1).copy_from_slice(&prep.u1);

    // S Uᵏ for every computed frame
    let mut su = vec![0.0; (n_steps + 1) * m];
    if history == History::Included {
        prep.ops.apply_combination_into(0.0, 1.0, &prep.u0, &mut su[..m]);
        prep.ops.apply_combination_into(0.0, 1.0, &prep.u1, &mut su[m..2 * m]);
    }

    let mut combo = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut hist = vec![0.0; m];
    for n in 2..=n_steps {
        {
            let (prev2, prev1) = (traj.frame(n - 2), traj.frame(n - 1));
            for i in 0..m {
                combo[i] = 2.0 * prev1[i] - prev2[i];
            }
        }
        prep.ops.apply_combination_into(1.0, 0.0, &combo, &mut rhs);
        let load = prep.load(n);
        for i in 0..m {
            rhs[i] += tau2 * load[i];
        }
        if history == History::Included {
            hist.iter_mut().for_each(|h| *h = 0.0);
            for k in 0..n {
                let b = beta[n - k - 1];
                let sk = &su[k * m..(k + 1) * m];
                for (h, s) in hist.iter_mut().zip(sk) {
                    *h += b * s;
                }
            }
            for i in 0..m {
                rhs[i] -= tau2 * hist[i];
            }
        }
        prep.solver.solve_in_place(&mut rhs)?;
        traj.frame_mut(n).copy_from_slice(&rhs);
        if history == History::Included && n < n_steps {
            prep.ops.apply_combination_into(0.0, 1.0, &rhs, &mut su[n * m..(n + 1) * m]);
        }
    }
    Ok(traj)
}

/// Classical time stepping from scratch.
pub fn run_tss(setup: &ProblemSetup) -> Result<Trajectory> {
    solve_tss(&Prepared::new(setup)?, History::Included)
}
