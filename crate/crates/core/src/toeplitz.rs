//! Batched Toeplitz matrix-vector products by circulant embedding.
//!
//! A `rows x cols` Toeplitz matrix sits in the top-left corner of a circulant
//! of size `P >= rows + cols - 1` (rounded up to a power of two), so `T x` is
//! a cyclic convolution evaluated with three FFTs. The symbol is transformed
//! once per call and shared by all rows of the batch. Two real rows are
//! packed into one complex transform (`x₁ + i x₂`); since the symbol is real
//! the real and imaginary parts of the result separate exactly.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A (possibly rectangular) Toeplitz matrix given by its first column and row.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSpec {
    first_col: Vec<f64>,
    first_row: Vec<f64>,
}

impl ToeplitzSpec {
    pub fn new(first_col: Vec<f64>, first_row: Vec<f64>) -> Result<Self> {
        if first_col.is_empty() || first_row.is_empty() {
            return Err(Error::InvalidSetup("Toeplitz column and row must be non-empty".into()));
        }
        if first_col[0] != first_row[0] {
            return Err(Error::InvalidSetup(format!(
                "Toeplitz corner mismatch: column starts with {}, row with {}",
                first_col[0], first_row[0]
            )));
        }
        Ok(ToeplitzSpec { first_col, first_row })
    }

    /// Square lower-triangular Toeplitz matrix.
    pub fn lower_triangular(first_col: Vec<f64>) -> Result<Self> {
        let mut row = vec![0.0; first_col.len()];
        if let Some(&c) = first_col.first() {
            row[0] = c;
        }
        Self::new(first_col, row)
    }

    pub fn rows(&self) -> usize {
        self.first_col.len()
    }

    pub fn cols(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_col(&self) -> &[f64] {
        &self.first_col
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        if r >= c {
            self.first_col[r - c]
        } else {
            self.first_row[c - r]
        }
    }
}

/// The off-diagonal block coupling the first `first_len` unknowns of a time
/// window to its last `second_len` equations, for the lower-triangular
/// Toeplitz matrix with first column `tc` (`tc[0] = 1`). Entry `(r, c)` is
/// `tc[first_len + r - c]`.
pub fn l_block(tc: &[f64], first_len: usize, second_len: usize) -> Result<ToeplitzSpec> {
    if first_len == 0 || second_len == 0 || first_len + second_len > tc.len() {
        return Err(Error::InvalidSetup(format!(
            "L block {first_len}+{second_len} does not fit a Toeplitz column of length {}",
            tc.len()
        )));
    }
    let col = tc[first_len..first_len + second_len].to_vec();
    let row = (0..first_len).map(|c| tc[first_len - c]).collect();
    ToeplitzSpec::new(col, row)
}

/// A Toeplitz matrix with its circulant symbol already transformed, ready to
/// be applied repeatedly.
#[derive(Debug, Clone)]
pub struct PreparedToeplitz {
    rows: usize,
    cols: usize,
    symbol: Vec<Complex64>,
}

impl PreparedToeplitz {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    // Plans hold precomputed twiddles; sharing them across solves keeps plan
    // construction out of repeated runs of the same size.
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, PlanPair>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Work buffers for repeated Toeplitz products; FFT plans are cached per
/// thread and size.
pub struct ToeplitzMultiplier {
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Default for ToeplitzMultiplier {
    fn default() -> Self {
        Self::new()
    }
}

impl ToeplitzMultiplier {
    pub fn new() -> Self {
        ToeplitzMultiplier { buf: Vec::new(), scratch: Vec::new() }
    }

    fn plans(&mut self, len: usize) -> PlanPair {
        let plans = PLANS.with(|cell| {
            let (planner, cache) = &mut *cell.borrow_mut();
            cache
                .entry(len)
                .or_insert_with(|| (planner.plan_fft_forward(len), planner.plan_fft_inverse(len)))
                .clone()
        });
        let need = plans.0.get_inplace_scratch_len().max(plans.1.get_inplace_scratch_len());
        if self.scratch.len() < need {
            self.scratch.resize(need, Complex64::default());
        }
        plans
    }

    /// Transforms the circulant symbol of `spec` (scaled by `1/P`).
    pub fn prepare(&mut self, spec: &ToeplitzSpec) -> PreparedToeplitz {
        let (rows, cols) = (spec.rows(), spec.cols());
        let size = (rows + cols - 1).next_power_of_two();
        let (forward, _) = self.plans(size);
        let mut symbol = vec![Complex64::default(); size];
        for (s, &c) in symbol.iter_mut().zip(spec.first_col()) {
            s.re = c;
        }
        for j in 1..cols {
            symbol[size - j].re = spec.first_row()[j];
        }
        forward.process_with_scratch(&mut symbol, &mut self.scratch);
        let scale = 1.0 / size as f64;
        for s in symbol.iter_mut() {
            *s *= scale;
        }
        PreparedToeplitz { rows, cols, symbol }
    }

    /// `out[b, :] = T x[b, :]` for each of the `batch` rows of `x`
    /// (`batch x cols`, row-major). `out` is `batch x rows`.
    pub fn apply(&mut self, t: &PreparedToeplitz, x: &[f64], batch: usize, out: &mut [f64]) -> Result<()> {
        self.check(t, x, batch, out)?;
        let (rows, cols) = (t.rows, t.cols);
        self.run(t, batch, |b, j| x[b * cols + j], |b, i, v| out[b * rows + i] = v);
        Ok(())
    }

    /// Same product with the vectors stored as columns: `x` is `cols x batch`
    /// and `out` is `rows x batch`, both row-major. Saves two transposes when
    /// the batch index is the fast one.
    pub fn apply_interleaved(&mut self, t: &PreparedToeplitz, x: &[f64], batch: usize, out: &mut [f64]) -> Result<()> {
        self.check(t, x, batch, out)?;
        self.run(t, batch, |b, j| x[j * batch + b], |b, i, v| out[i * batch + b] = v);
        Ok(())
    }

    fn check(&self, t: &PreparedToeplitz, x: &[f64], batch: usize, out: &[f64]) -> Result<()> {
        if x.len() != batch * t.cols {
            return Err(Error::DimensionMismatch { expected: batch * t.cols, found: x.len() });
        }
        if out.len() != batch * t.rows {
            return Err(Error::DimensionMismatch { expected: batch * t.rows, found: out.len() });
        }
        Ok(())
    }

    fn run(
        &mut self,
        t: &PreparedToeplitz,
        batch: usize,
        load: impl Fn(usize, usize) -> f64,
        mut store: impl FnMut(usize, usize, f64),
    ) {
        let (rows, cols) = (t.rows, t.cols);
        let size = t.symbol.len();
        let (forward, inverse) = self.plans(size);
        self.buf.resize(size, Complex64::default());
        let buf = &mut self.buf[..size];

        let mut b = 0;
        while b < batch {
            let paired = b + 1 < batch;
            for (j, z) in buf[..cols].iter_mut().enumerate() {
                *z = Complex64::new(load(b, j), if paired { load(b + 1, j) } else { 0.0 });
            }
            buf[cols..].fill(Complex64::default());
            forward.process_with_scratch(buf, &mut self.scratch);
            for (z, s) in buf.iter_mut().zip(&t.symbol) {
                *z *= s;
            }
            inverse.process_with_scratch(buf, &mut self.scratch);
            for (i, z) in buf[..rows].iter().enumerate() {
                store(b, i, z.re);
                if paired {
                    store(b + 1, i, z.im);
                }
            }
            b += 2;
        }
    }

    pub fn multiply_into(&mut self, spec: &ToeplitzSpec, x: &[f64], batch: usize, out: &mut [f64]) -> Result<()> {
        let prepared = self.prepare(spec);
        self.apply(&prepared, x, batch, out)
    }

    pub fn multiply(&mut self, spec: &ToeplitzSpec, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; batch * spec.rows()];
        self.multiply_into(spec, x, batch, &mut out)?;
        Ok(out)
    }
}

/// One-shot `X Tᵀ` for a `batch x cols` block `X`: every row of `x` is
/// multiplied by `T`.
pub fn toeplitz_matvec(spec: &ToeplitzSpec, x: &[f64], batch: usize) -> Result<Vec<f64>> {
    ToeplitzMultiplier::new().multiply(spec, x, batch)
}
