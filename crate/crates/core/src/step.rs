//! Solvers for the per-step elliptic system `(a M + b S) x = rhs`.
//!
//! Every time level of both schemes solves with `M + τ² S`, and the initial
//! velocity step solves with `M` alone. The matrix never changes within a run,
//! so it is factored once.
//!
//! In 1D the matrix is tridiagonal and factored by the Thomas algorithm. In
//! 2D both 1D factors are symmetric tridiagonal Toeplitz matrices sharing the
//! sine eigenvectors `sin(jkπ/(m+1))`, so
//!
//! ```text
//! a M + b S = Q (a Λ_M ⊗ Λ_M + b (Λ_S ⊗ Λ_M + Λ_M ⊗ Λ_S)) Q,   Q = Q₁ ⊗ Q₁
//! ```
//!
//! with `Q₁` the orthonormal DST-I matrix, which gives `O(M log M)` solves.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, Dst1};

use crate::error::{Error, Result};
use crate::fem::{OperatorPair, SymTridiag};

/// LU factors of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct ThomasFactor {
    off: f64,
    // modified super-diagonal c'_i and reciprocal pivots
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ThomasFactor {
    pub fn new(matrix: &SymTridiag) -> Self {
        let n = matrix.n;
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = matrix.diag - if i > 0 { matrix.off * prev_upper } else { 0.0 };
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = matrix.off * inv_pivot[i];
            prev_upper = upper[i];
        }
        ThomasFactor { off: matrix.off, upper, inv_pivot }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.upper.len();
        debug_assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.off * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper[i] * x[i + 1];
        }
    }
}

/// Diagonalization of a 2D tensor-product operator in the sine basis.
#[derive(Clone)]
pub struct SineSolver {
    m: usize,
    dst: Arc<dyn Dst1<f64>>,
    // reciprocal eigenvalues times the DST normalization (2/(m+1))^2
    inv_eigs: Vec<f64>,
}

impl fmt::Debug for SineSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineSolver").field("m", &self.m).finish()
    }
}

impl SineSolver {
    pub fn new(ops: &OperatorPair, mass_coef: f64, stiff_coef: f64) -> Self {
        let m = ops.mesh().nodes_per_dim();
        let mu = ops.mass_1d().eigenvalues();
        let sigma = ops.stiffness_1d().eigenvalues();
        let norm = (2.0 / (m + 1) as f64).powi(2);
        let mut inv_eigs = Vec::with_capacity(m * m);
        for ky in 0..m {
            for kx in 0..m {
                let lam = mass_coef * mu[ky] * mu[kx] + stiff_coef * (sigma[ky] * mu[kx] + mu[ky] * sigma[kx]);
                inv_eigs.push(norm / lam);
            }
        }
        let dst = DctPlanner::new().plan_dst1(m);
        SineSolver { m, dst, inv_eigs }
    }

    fn transform_2d(&self, data: &mut [f64], work: &mut [f64], scratch: &mut [f64]) {
        let m = self.m;
        for row in data.chunks_exact_mut(m) {
            self.dst.process_dst1_with_scratch(row, scratch);
        }
        transpose(data, work, m);
        for row in work.chunks_exact_mut(m) {
            self.dst.process_dst1_with_scratch(row, scratch);
        }
        transpose(work, data, m);
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut work = vec![0.0; x.len()];
        let mut scratch = vec![0.0; self.dst.get_scratch_len()];
        self.transform_2d(x, &mut work, &mut scratch);
        for (v, s) in x.iter_mut().zip(&self.inv_eigs) {
            *v *= s;
        }
        self.transform_2d(x, &mut work, &mut scratch);
    }
}

fn transpose(src: &[f64], dst: &mut [f64], m: usize) {
    const BLOCK: usize = 16;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}

/// Which algorithm backs a [`StepSolver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Thomas (1D) or sine-transform diagonalization (2D).
    #[default]
    Direct,
    /// Unpreconditioned conjugate gradients, relative tolerance [`CG_TOLERANCE`].
    ConjugateGradient,
}

pub const CG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Backend {
    Thomas(ThomasFactor),
    Sine(SineSolver),
    Cg,
}

/// Factored `a M + b S`; immutable and reentrant once built.
#[derive(Debug, Clone)]
pub struct StepSolver {
    ops: OperatorPair,
    mass_coef: f64,
    stiff_coef: f64,
    backend: Backend,
}

impl StepSolver {
    /// Solver for the time-stepping matrix `M + τ² S`.
    pub fn new(ops: &OperatorPair, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidSetup(format!("time step must be positive, got {tau}")));
        }
        Ok(Self::with_coefficients(ops, 1.0, tau * tau, SolverKind::Direct))
    }

    /// Solver for the mass matrix alone.
    pub fn mass(ops: &OperatorPair) -> Self {
        Self::with_coefficients(ops, 1.0, 0.0, SolverKind::Direct)
    }

    /// Solver for `a M + b S` with `a > 0`, `b >= 0`.
    pub fn with_coefficients(ops: &OperatorPair, mass_coef: f64, stiff_coef: f64, kind: SolverKind) -> Self {
        let backend = match (kind, ops.mesh().dim()) {
            (SolverKind::ConjugateGradient, _) => Backend::Cg,
            (SolverKind::Direct, 1) => {
                Backend::Thomas(ThomasFactor::new(&ops.mass_1d().scaled_sum(mass_coef, ops.stiffness_1d(), stiff_coef)))
            }
            (SolverKind::Direct, _) => Backend::Sine(SineSolver::new(ops, mass_coef, stiff_coef)),
        };
        StepSolver { ops: *ops, mass_coef, stiff_coef, backend }
    }

    pub fn operators(&self) -> &OperatorPair {
        &self.ops
    }

    pub fn dofs(&self) -> usize {
        self.ops.dofs()
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dofs() {
            return Err(Error::DimensionMismatch { expected: self.dofs(), found: x.len() });
        }
        match &self.backend {
            Backend::Thomas(f) => f.solve_in_place(x),
            Backend::Sine(s) => s.solve_in_place(x),
            Backend::Cg => {
                let sol = conjugate_gradient(
                    |v, out| self.ops.apply_combination_into(self.mass_coef, self.stiff_coef, v, out),
                    x,
                    CG_TOLERANCE,
                    10 * x.len() + 100,
                )?;
                x.copy_from_slice(&sol);
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// The matrix this solver inverts, applied to `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.ops.apply_combination(self.mass_coef, self.stiff_coef, x)
    }
}

/// Conjugate gradients for a symmetric positive-definite operator, stopping at
/// `‖r‖ <= tol ‖b‖`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * bnorm {
        return Ok(x);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rr.sqrt() / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operators, MeshSpec};
    use rand::{Rng, SeedableRng};
    use reference::Dense;

    fn dense_step(ops: &OperatorPair, tau: f64) -> Dense {
        let m1 = Dense::tridiag(ops.mass_1d().n, ops.mass_1d().off, ops.mass_1d().diag);
        let s1 = Dense::tridiag(ops.stiffness_1d().n, ops.stiffness_1d().off, ops.stiffness_1d().diag);
        let (mm, ss) = match ops.mesh().dim() {
            1 => (m1, s1),
            _ => (m1.kron(&m1), s1.kron(&m1).add(&m1.kron(&s1))),
        };
        mm.add(&ss.scale(tau * tau))
    }

    fn rel_residual(solver: &StepSolver, x: &[f64], b: &[f64]) -> f64 {
        let ax = solver.apply(x).unwrap();
        let num: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn scalar_system() {
        let mesh = MeshSpec::new(1, 2, 0.3).unwrap();
        let ops = assemble_operators(&mesh);
        let tau = 0.1;
        let s = StepSolver::new(&ops, tau).unwrap();
        let h = 0.5;
        let a = 2.0 * h / 3.0 + 2.0 * tau * tau * 0.3 / h;
        assert!((s.solve(&[1.5]).unwrap()[0] - 1.5 / a).abs() < 1e-15);
    }

    #[test]
    fn thomas_residuals() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let ops = assemble_operators(&MeshSpec::new(1, 32, 0.01).unwrap());
        for tau in [1e-3, 1.0 / 32.0, 1.0] {
            let s = StepSolver::new(&ops, tau).unwrap();
            for _ in 0..100 {
                let b: Vec<f64> = (0..31).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = s.solve(&b).unwrap();
                assert!(rel_residual(&s, &x, &b) <= 1e-12);
            }
        }
    }

    #[test]
    fn sine_solver_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for m in 1..=7 {
            let ops = assemble_operators(&MeshSpec::new(2, m + 1, 0.7).unwrap());
            let tau = 0.2;
            let s = StepSolver::new(&ops, tau).unwrap();
            let dense = dense_step(&ops, tau);
            let b: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = dense.solve(&b);
            let got = s.solve(&b).unwrap();
            let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-11 * scale, "m={m}");
            }
        }
    }

    #[test]
    fn solve_then_apply_identity_2d() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let ops = assemble_operators(&MeshSpec::new(2, 32, 0.01).unwrap());
        let s = StepSolver::new(&ops, 1.0 / 64.0).unwrap();
        let mass = StepSolver::mass(&ops);
        for _ in 0..100 {
            let b: Vec<f64> = (0..ops.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(rel_residual(&s, &s.solve(&b).unwrap(), &b) <= 1e-12);
            assert!(rel_residual(&mass, &mass.solve(&b).unwrap(), &b) <= 1e-12);
        }
    }

    #[test]
    fn conjugate_gradient_backend_agrees() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for dim in [1, 2] {
            let ops = assemble_operators(&MeshSpec::new(dim, 8, 0.5).unwrap());
            let direct = StepSolver::with_coefficients(&ops, 1.0, 0.01, SolverKind::Direct);
            let cg = StepSolver::with_coefficients(&ops, 1.0, 0.01, SolverKind::ConjugateGradient);
            let b: Vec<f64> = (0..ops.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1 = direct.solve(&b).unwrap();
            let x2 = cg.solve(&b).unwrap();
            for (a, c) in x1.iter().zip(&x2) {
                assert!((a - c).abs() < 1e-10);
            }
        }
        assert!(StepSolver::new(&assemble_operators(&MeshSpec::new(1, 4, 1.0).unwrap()), 0.0).is_err());
    }

    #[test]
    fn rejects_wrong_length() {
        let ops = assemble_operators(&MeshSpec::new(1, 4, 1.0).unwrap());
        let s = StepSolver::new(&ops, 0.1).unwrap();
        assert!(matches!(s.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
