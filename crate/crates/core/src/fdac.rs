//! Divide-and-conquer solver for the all-at-once system
//!
//! ```text
//! (E ⊗ M + τ² T ⊗ S) U = τ² F,   U = (U², ..., U^N)
//! ```
//!
//! `E` is lower-triangular banded with diagonals `[1, -2, 1]` and `T` is
//! lower-triangular Toeplitz with first column `[1, β₁, β₂, ...]`. Halving a
//! window leaves sub-blocks of the same form; the coupling from the first
//! half to the second consists of a 3-entry `E` block (applied by hand) and a
//! dense Toeplitz block `L`, applied with FFTs. The total cost is
//! `O(M N log² N)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::OperatorPair;
use crate::step::StepSolver;
use crate::toeplitz::{l_block, PreparedToeplitz, ToeplitzMultiplier};
use crate::tss::{Prepared, ProblemSetup, Trajectory};

/// Windows of at most this many blocks are solved by forward substitution.
pub const DEFAULT_THRESHOLD: usize = 16;

/// `L` blocks with at most this many entries are applied directly instead of
/// through the FFT.
const DIRECT_ENTRIES: usize = 64;

/// Right-hand side of the all-at-once system, stacked `(N-1) x M`, with every
/// contribution of the known frames `U⁰`, `U¹` moved to the right.
pub fn assemble_rhs(prep: &Prepared) -> Vec<f64> {
    let m = prep.dofs();
    let n_steps = prep.steps;
    let tau2 = prep.tau * prep.tau;
    let w = &prep.weights;
    let ops = &prep.ops;

    let s0 = ops.apply_combination(0.0, 1.0, &prep.u0).expect("frame length matches mesh");
    let s1 = ops.apply_combination(0.0, 1.0, &prep.u1).expect("frame length matches mesh");
    let m0 = ops.apply_combination(1.0, 0.0, &prep.u0).expect("frame length matches mesh");
    let m1 = ops.apply_combination(1.0, 0.0, &prep.u1).expect("frame length matches mesh");

    let mut rhs = vec![0.0; (n_steps - 1) * m];
    for (j, block) in rhs.chunks_exact_mut(m).enumerate() {
        let n = j + 2;
        let (bn, bn1) = (w.beta(n), w.beta(n - 1));
        let load = prep.load(n);
        for i in 0..m {
            block[i] = tau2 * load[i] - tau2 * (bn * s0[i] + bn1 * s1[i]);
        }
        match n {
            2 => block.iter_mut().enumerate().for_each(|(i, b)| *b += 2.0 * m1[i] - m0[i]),
            3 => block.iter_mut().enumerate().for_each(|(i, b)| *b -= m1[i]),
            _ => {}
        }
    }
    rhs
}

/// Recursive solver state shared by every window.
///
/// Alongside the unknowns `X` the recursion keeps `S X`, filled in as each
/// block is solved. By linearity `(L ⊗ S) X = (L ⊗ I)(S X)`, so every
/// history correction is a Toeplitz product of already-computed `S Xᶜ` and
/// the stiffness matrix is applied once per block instead of once per level.
struct Recursion<'a> {
    solver: &'a StepSolver,
    ops: &'a OperatorPair,
    tc: &'a [f64],
    tau2: f64,
    threshold: usize,
    fft: ToeplitzMultiplier,
    // L depends only on the split sizes, so its symbol is shared by every
    // window of the same shape
    symbols: HashMap<(usize, usize), PreparedToeplitz>,
    y: Vec<f64>,
    acc: Vec<f64>,
    tmp: Vec<f64>,
    m: usize,
}

impl Recursion<'_> {
    /// Solves the window whose right-hand side is `x` (a whole number of
    /// blocks) in place and writes `S X` into `sx`.
    fn solve(&mut self, x: &mut [f64], sx: &mut [f64]) -> Result<()> {
        let m = self.m;
        let size = x.len() / m;
        if size <= self.threshold {
            return self.forward_substitution(x, sx);
        }
        let s1 = size / 2;
        let s2 = size - s1;
        let (first, second) = x.split_at_mut(s1 * m);
        let (sx_first, sx_second) = sx.split_at_mut(s1 * m);
        self.solve(first, sx_first)?;
        self.couple(first, sx_first, second, s1, s2)?;
        self.solve(second, sx_second)
    }

    /// Subtracts `(H ⊗ M) X₁ + τ² (L ⊗ S) X₁` from the second half.
    fn couple(&mut self, first: &[f64], sx_first: &[f64], second: &mut [f64], s1: usize, s2: usize) -> Result<()> {
        let m = self.m;
        let last = &first[(s1 - 1) * m..];
        let mut acc = std::mem::take(&mut self.acc);
        let mut tmp = std::mem::take(&mut self.tmp);

        // E coupling: row 0 sees X₁[last-1] - 2 X₁[last], row 1 sees X₁[last].
        // With s1 == 1, X₁[last-1] lies outside the window and was handled by
        // the enclosing split.
        if s1 >= 2 {
            let prev = &first[(s1 - 2) * m..(s1 - 1) * m];
            acc.iter_mut().zip(prev.iter().zip(last)).for_each(|(a, (p, l))| *a = p - 2.0 * l);
        } else {
            acc.iter_mut().zip(last).for_each(|(a, l)| *a = -2.0 * l);
        }
        self.ops.sub_combination_into(1.0, 0.0, &acc, &mut second[..m], &mut tmp);
        if s2 >= 2 {
            self.ops.sub_combination_into(1.0, 0.0, last, &mut second[m..2 * m], &mut tmp);
        }
        self.acc = acc;
        self.tmp = tmp;

        // second -= τ² L (S X₁), block rows
        let tau2 = self.tau2;
        if s1 * s2 <= DIRECT_ENTRIES {
            for (r, blk) in second.chunks_exact_mut(m).enumerate() {
                for c in 0..s1 {
                    let coef = tau2 * self.tc[s1 + r - c];
                    let sc = &sx_first[c * m..(c + 1) * m];
                    blk.iter_mut().zip(sc).for_each(|(a, b)| *a -= coef * b);
                }
            }
        } else {
            if !self.symbols.contains_key(&(s1, s2)) {
                let spec = l_block(self.tc, s1, s2)?;
                let prepared = self.fft.prepare(&spec);
                self.symbols.insert((s1, s2), prepared);
            }
            let mut y = std::mem::take(&mut self.y);
            y.resize(s2 * m, 0.0);
            self.fft.apply_interleaved(&self.symbols[&(s1, s2)], sx_first, m, &mut y)?;
            second.iter_mut().zip(&y).for_each(|(a, b)| *a -= tau2 * b);
            self.y = y;
        }
        Ok(())
    }

    /// Block forward substitution over a window.
    fn forward_substitution(&mut self, x: &mut [f64], sx: &mut [f64]) -> Result<()> {
        let m = self.m;
        let size = x.len() / m;
        let tau2 = self.tau2;
        let mut acc = std::mem::take(&mut self.acc);
        let mut tmp = std::mem::take(&mut self.tmp);
        for r in 0..size {
            let (done, rest) = x.split_at_mut(r * m);
            let row = &mut rest[..m];
            if r > 0 {
                acc.iter_mut().zip(&done[(r - 1) * m..]).for_each(|(a, u)| *a = -2.0 * u);
                if r >= 2 {
                    acc.iter_mut().zip(&done[(r - 2) * m..(r - 1) * m]).for_each(|(a, u)| *a += u);
                }
                self.ops.sub_combination_into(1.0, 0.0, &acc, row, &mut tmp);
                for c in 0..r {
                    let coef = tau2 * self.tc[r - c];
                    row.iter_mut().zip(&sx[c * m..(c + 1) * m]).for_each(|(v, s)| *v -= coef * s);
                }
            }
            self.solver.solve_in_place(row)?;
            self.ops.apply_combination_into(0.0, 1.0, row, &mut sx[r * m..(r + 1) * m]);
        }
        self.acc = acc;
        self.tmp = tmp;
        Ok(())
    }
}

/// Solves the all-at-once system in place: `x` holds the stacked right-hand
/// side on entry and `U², ..., U^N` on return. `tc` is the first column of
/// `T` (at least as long as the number of blocks, `tc[0] = 1`) and `solver`
/// must factor `M + τ² S`.
pub fn fdac_solve(solver: &StepSolver, tc: &[f64], tau: f64, x: &mut [f64], threshold: usize) -> Result<()> {
    let m = solver.dofs();
    if m == 0 || !x.len().is_multiple_of(m) {
        return Err(Error::DimensionMismatch { expected: m, found: x.len() });
    }
    let blocks = x.len() / m;
    if tc.len() < blocks || tc.first() != Some(&1.0) {
        return Err(Error::InvalidSetup(format!(
            "Toeplitz column of length {} cannot serve {blocks} time blocks",
            tc.len()
        )));
    }
    if threshold == 0 {
        return Err(Error::InvalidSetup("base-case threshold must be at least 1".into()));
    }
    let mut rec = Recursion {
        solver,
        ops: solver.operators(),
        tc,
        tau2: tau * tau,
        threshold,
        fft: ToeplitzMultiplier::new(),
        symbols: HashMap::new(),
        y: Vec::new(),
        acc: vec![0.0; m],
        tmp: vec![0.0; m],
        m,
    };
    let mut sx = vec![0.0; x.len()];
    rec.solve(x, &mut sx)
}

/// Solves from prepared data with the given base-case threshold.
pub fn solve_fdac(prep: &Prepared, threshold: usize) -> Result<Trajectory> {
    let m = prep.dofs();
    let mut traj = Trajectory::zeros(prep.steps + 1, m);
    traj.frame_mut(0).copy_from_slice(&prep.u0);
    traj.frame_mut(1).copy_from_slice(&prep.u1);
    let rhs = assemble_rhs(prep);
    let tc = prep.weights.toeplitz_column(prep.steps - 1);
    let unknowns = &mut traj.as_mut_slice()[2 * m..];
    unknowns.copy_from_slice(&rhs);
    fdac_solve(&prep.solver, &tc, prep.tau, unknowns, threshold)?;
    Ok(traj)
}

/// Divide-and-conquer solve from scratch.
pub fn run_fdac(setup: &ProblemSetup) -> Result<Trajectory> {
    solve_fdac(&Prepared::new(setup)?, DEFAULT_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_operators, MeshSpec};
    use crate::kernel::{Preset, VariableOrder};
    use crate::tss::{run_tss, solve_tss, FnSource, History, SpaceFn};
    use rand::{Rng, SeedableRng};
    use reference::Dense;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn operator_matrix(ops: &OperatorPair, a: f64, b: f64) -> Dense {
        let n = ops.dofs();
        let mut d = Dense::zeros(n, n);
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            for (r, v) in ops.apply_combination(a, b, &e).unwrap().into_iter().enumerate() {
                d.set(r, c, v);
            }
        }
        d
    }

    /// `E ⊗ M + τ² T ⊗ S` for `blocks` unknown frames.
    fn dense_system(ops: &OperatorPair, tc: &[f64], tau: f64, blocks: usize) -> Dense {
        let e = Dense::from_fn(blocks, blocks, |r, c| match r as isize - c as isize {
            0 => 1.0,
            1 => -2.0,
            2 => 1.0,
            _ => 0.0,
        });
        let t = Dense::from_fn(blocks, blocks, |r, c| if r >= c { tc[r - c] } else { 0.0 });
        e.kron(&operator_matrix(ops, 1.0, 0.0)).add(&t.kron(&operator_matrix(ops, 0.0, 1.0)).scale(tau * tau))
    }

    fn sine_setup(dim: usize, m: usize, preset: Preset, steps: usize) -> ProblemSetup {
        let sine: SpaceFn = Arc::new(|x| x.iter().map(|v| (PI * v).sin()).product());
        ProblemSetup::new(MeshSpec::new(dim, m + 1, 0.01).unwrap(), VariableOrder::preset(preset, 1.0).unwrap(), 1.0, steps)
            .unwrap()
            .with_initial_data(sine.clone(), sine)
            .with_source(Arc::new(FnSource(|x: &[f64], t: f64| 1.0 + t * x[0])))
    }

    #[test]
    fn single_block_is_one_time_step() {
        let setup = sine_setup(1, 5, Preset::OneMinusCos, 2);
        let prep = Prepared::new(&setup).unwrap();
        let diff = solve_fdac(&prep, 1).unwrap().max_relative_diff(&solve_tss(&prep, History::Included).unwrap());
        assert!(diff.unwrap() <= 1e-14);
    }

    #[test]
    fn zero_problem_stays_zero() {
        let setup = ProblemSetup::new(MeshSpec::new(1, 8, 0.01).unwrap(), VariableOrder::preset(Preset::TSinT, 1.0).unwrap(), 1.0, 16)
            .unwrap();
        let prep = Prepared::new(&setup).unwrap();
        assert!(assemble_rhs(&prep).iter().all(|&v| v == 0.0));
        assert!(run_fdac(&setup).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_with_zero_data_is_scaled_load() {
        let setup = ProblemSetup::new(MeshSpec::new(1, 8, 0.01).unwrap(), VariableOrder::preset(Preset::OneMinusCos, 1.0).unwrap(), 1.0, 8)
            .unwrap()
            .with_source(Arc::new(FnSource(|x: &[f64], t: f64| t * x[0])));
        let prep = Prepared::new(&setup).unwrap();
        let tau2 = prep.tau * prep.tau;
        for (r, l) in assemble_rhs(&prep).iter().zip(&prep.loads) {
            assert_eq!(*r, tau2 * l);
        }
    }

    #[test]
    fn rhs_matches_dense_residual_at_time_stepping_solution() {
        let setup = sine_setup(2, 3, Preset::OneMinusCos, 4);
        let prep = Prepared::new(&setup).unwrap();
        let traj = solve_tss(&prep, History::Included).unwrap();
        let tc = prep.weights.toeplitz_column(3);
        let a = dense_system(&prep.ops, &tc, prep.tau, 3);
        let lhs = a.matvec(&traj.as_slice()[2 * prep.dofs()..]);
        for (l, r) in lhs.iter().zip(assemble_rhs(&prep)) {
            assert!((l - r).abs() <= 1e-12, "{l} vs {r}");
        }
    }

    #[test]
    fn matches_dense_solve_for_random_rhs() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for (dim, m) in [(1, 3), (2, 3)] {
            let ops = assemble_operators(&MeshSpec::new(dim, m + 1, 0.01).unwrap());
            let order = VariableOrder::preset(Preset::TSinT, 1.0).unwrap();
            let blocks = 8;
            let tau = 1.0 / (blocks + 1) as f64;
            let tc = crate::kernel::toeplitz_first_column(blocks + 1, tau, &order).unwrap();
            let solver = StepSolver::new(&ops, tau).unwrap();
            let rhs: Vec<f64> = (0..blocks * ops.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expected = dense_system(&ops, &tc, tau, blocks).solve(&rhs);
            for threshold in [1, 2, 3, 8] {
                let mut x = rhs.clone();
                fdac_solve(&solver, &tc, tau, &mut x, threshold).unwrap();
                for (a, b) in x.iter().zip(&expected) {
                    assert!((a - b).abs() <= 1e-11, "threshold {threshold}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn recursion_depth_does_not_change_the_answer() {
        for steps in [5, 12, 17, 64] {
            let prep = Prepared::new(&sine_setup(1, 7, Preset::OneMinusCos, steps)).unwrap();
            let full = solve_fdac(&prep, steps).unwrap();
            let split = solve_fdac(&prep, 1).unwrap();
            assert!(split.max_relative_diff(&full).unwrap() <= 1e-11);
        }
    }

    #[test]
    fn uneven_split_matches_time_stepping() {
        // N - 1 = 11 blocks
        for dim in [1, 2] {
            let setup = sine_setup(dim, 3, Preset::TSinT, 12);
            let tss = run_tss(&setup).unwrap();
            let prep = Prepared::new(&setup).unwrap();
            for threshold in [1, 2, 4] {
                assert!(solve_fdac(&prep, threshold).unwrap().max_relative_diff(&tss).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn fft_path_matches_time_stepping() {
        // large enough that L blocks exceed the direct-product cutoff
        let setup = sine_setup(1, 7, Preset::OneMinusCos, 512);
        let tss = run_tss(&setup).unwrap();
        let fdac = run_fdac(&setup).unwrap();
        assert!(fdac.max_relative_diff(&tss).unwrap() <= 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ops = assemble_operators(&MeshSpec::new(1, 4, 0.01).unwrap());
        let solver = StepSolver::new(&ops, 0.1).unwrap();
        let mut x = vec![0.0; 7];
        assert!(fdac_solve(&solver, &[1.0, 0.1, 0.1], 0.1, &mut x, 4).is_err());
        let mut x = vec![0.0; 9];
        assert!(fdac_solve(&solver, &[1.0, 0.1], 0.1, &mut x, 4).is_err());
        assert!(fdac_solve(&solver, &[1.0, 0.1, 0.1], 0.1, &mut x, 0).is_err());
    }
}
