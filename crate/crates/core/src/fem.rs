//! Continuous tensor-product linear elements on uniform grids of `(0,1)^d`,
//! `d ∈ {1, 2}`, with homogeneous Dirichlet conditions.
//!
//! Unknowns are the interior nodal values. In 2D the flat index of node
//! `(x_i, y_j)` is `j * m + i`. The 2D matrices are never formed: they are
//! applied through their 1D tridiagonal factors,
//!
//! ```text
//! M = M₁ ⊗ M₁,    S = S₁ ⊗ M₁ + M₁ ⊗ S₁
//! ```

use crate::error::{Error, Result};

// Three-point Gauss-Legendre rule on [0, 1].
const GAUSS_NODES: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Uniform mesh of `(0,1)^dim` with `divisions` cells per direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    dim: usize,
    divisions: usize,
    diffusivity: f64,
}

impl MeshSpec {
    pub fn new(dim: usize, divisions: usize, diffusivity: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidMesh(format!("dimension must be 1 or 2, got {dim}")));
        }
        if divisions < 2 {
            return Err(Error::InvalidMesh(format!("1/h must be at least 2, got {divisions}")));
        }
        if !(diffusivity > 0.0) || !diffusivity.is_finite() {
            return Err(Error::InvalidMesh(format!("diffusivity must be positive, got {diffusivity}")));
        }
        Ok(MeshSpec { dim, divisions, diffusivity })
    }

    /// Mesh with `h = 2^-level`.
    pub fn dyadic(dim: usize, level: u32, diffusivity: f64) -> Result<Self> {
        if level == 0 || level > 24 {
            return Err(Error::InvalidMesh(format!("h = 2^-{level} is out of range")));
        }
        Self::new(dim, 1 << level, diffusivity)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn h(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    /// Interior nodes per direction.
    pub fn nodes_per_dim(&self) -> usize {
        self.divisions - 1
    }

    /// Total number of unknowns.
    pub fn dofs(&self) -> usize {
        self.nodes_per_dim().pow(self.dim as u32)
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// The mesh with half the spacing.
    pub fn refined(&self) -> Self {
        MeshSpec { divisions: 2 * self.divisions, ..*self }
    }

    /// Coordinates of the interior node with flat index `idx`.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        let m = self.nodes_per_dim();
        let h = self.h();
        match self.dim {
            1 => [(idx + 1) as f64 * h, 0.0],
            _ => [((idx % m) + 1) as f64 * h, ((idx / m) + 1) as f64 * h],
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dofs() {
            return Err(Error::DimensionMismatch { expected: self.dofs(), found: len });
        }
        Ok(())
    }
}

/// Symmetric tridiagonal Toeplitz matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTridiag {
    pub n: usize,
    pub diag: f64,
    pub off: f64,
}

impl SymTridiag {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.apply_update(x, out, |o, v| *o = v);
    }

    /// `out -= A x`.
    pub fn apply_sub(&self, x: &[f64], out: &mut [f64]) {
        self.apply_update(x, out, |o, v| *o -= v);
    }

    #[inline]
    fn apply_update(&self, x: &[f64], out: &mut [f64], update: impl Fn(&mut f64, f64)) {
        let n = self.n;
        let (x, out) = (&x[..n], &mut out[..n]);
        if n == 1 {
            update(&mut out[0], self.diag * x[0]);
            return;
        }
        update(&mut out[0], self.diag * x[0] + self.off * x[1]);
        for (o, w) in out[1..n - 1].iter_mut().zip(x.windows(3)) {
            update(o, self.diag * w[1] + self.off * (w[0] + w[2]));
        }
        update(&mut out[n - 1], self.diag * x[n - 1] + self.off * x[n - 2]);
    }

    // Applies along a line of `n` entries spaced `stride` apart.
    fn apply_strided(&self, x: &[f64], out: &mut [f64], stride: usize) {
        let n = self.n;
        if n == 1 {
            out[0] = self.diag * x[0];
            return;
        }
        out[0] = self.diag * x[0] + self.off * x[stride];
        for i in 1..n - 1 {
            let k = i * stride;
            out[k] = self.diag * x[k] + self.off * (x[k - stride] + x[k + stride]);
        }
        let k = (n - 1) * stride;
        out[k] = self.diag * x[k] + self.off * x[k - stride];
    }

    /// Eigenvalues for the sine eigenvectors `sin(j k π / (n+1))`, `k = 1..=n`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let theta = std::f64::consts::PI / (self.n + 1) as f64;
        (1..=self.n).map(|k| self.diag + 2.0 * self.off * (k as f64 * theta).cos()).collect()
    }

    pub fn scaled_sum(&self, a: f64, other: &SymTridiag, b: f64) -> SymTridiag {
        debug_assert_eq!(self.n, other.n);
        SymTridiag { n: self.n, diag: a * self.diag + b * other.diag, off: a * self.off + b * other.off }
    }
}

/// Mass and stiffness matrices, stored as their 1D factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorPair {
    mesh: MeshSpec,
    mass_1d: SymTridiag,
    stiffness_1d: SymTridiag,
}

/// Assembles `M` and `S` for `mesh`. The 1D rows are `(h/6)[1, 4, 1]` and
/// `(K/h)[-1, 2, -1]`.
pub fn assemble_operators(mesh: &MeshSpec) -> OperatorPair {
    let n = mesh.nodes_per_dim();
    let h = mesh.h();
    let k = mesh.diffusivity();
    OperatorPair {
        mesh: *mesh,
        mass_1d: SymTridiag { n, diag: 4.0 * h / 6.0, off: h / 6.0 },
        stiffness_1d: SymTridiag { n, diag: 2.0 * k / h, off: -k / h },
    }
}

impl OperatorPair {
    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    pub fn mass_1d(&self) -> &SymTridiag {
        &self.mass_1d
    }

    pub fn stiffness_1d(&self) -> &SymTridiag {
        &self.stiffness_1d
    }

    pub fn apply_mass(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_combination(1.0, 0.0, x)
    }

    pub fn apply_stiffness(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_combination(0.0, 1.0, x)
    }

    /// `(a M + b S) x`.
    pub fn apply_combination(&self, a: f64, b: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.mesh.check_len(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.apply_combination_into(a, b, x, &mut out);
        Ok(out)
    }

    /// `out -= (a M + b S) x`; lengths must equal `dofs()`.
    pub fn sub_combination_into(&self, a: f64, b: f64, x: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        if self.mesh.dim == 1 {
            self.mass_1d.scaled_sum(a, &self.stiffness_1d, b).apply_sub(x, out);
            return;
        }
        scratch.resize(x.len(), 0.0);
        self.apply_combination_into(a, b, x, scratch);
        out.iter_mut().zip(scratch.iter()).for_each(|(o, t)| *o -= t);
    }

    /// `out = (a M + b S) x`; lengths must equal `dofs()`.
    pub fn apply_combination_into(&self, a: f64, b: f64, x: &[f64], out: &mut [f64]) {
        let m = self.mesh.nodes_per_dim();
        let combo = self.mass_1d.scaled_sum(a, &self.stiffness_1d, b);
        if self.mesh.dim == 1 {
            combo.apply(x, out);
            return;
        }
        // (a M₁ + b S₁)_y (M₁ x)_x + b (M₁)_y (S₁ x)_x
        let mut along_x = vec![0.0; x.len()];
        for row in 0..m {
            let r = row * m..(row + 1) * m;
            self.mass_1d.apply(&x[r.clone()], &mut along_x[r]);
        }
        for col in 0..m {
            combo.apply_strided(&along_x[col..], &mut out[col..], m);
        }
        if b != 0.0 {
            for row in 0..m {
                let r = row * m..(row + 1) * m;
                self.stiffness_1d.apply(&x[r.clone()], &mut along_x[r]);
            }
            let mut tmp = vec![0.0; x.len()];
            let mass_b = SymTridiag { n: m, diag: b * self.mass_1d.diag, off: b * self.mass_1d.off };
            for col in 0..m {
                mass_b.apply_strided(&along_x[col..], &mut tmp[col..], m);
            }
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
    }
}

// Element loop shared by load vectors and error norms. `visit` receives the
// quadrature point, its weight, and the (flat interior index, basis value)
// pairs of the element's interior nodes.
fn for_each_quadrature_point(mesh: &MeshSpec, mut visit: impl FnMut(&[f64], f64, &[(usize, f64)])) {
    let n = mesh.divisions;
    let m = mesh.nodes_per_dim();
    let h = mesh.h();
    let mut locals: Vec<(usize, f64)> = Vec::with_capacity(4);
    match mesh.dim {
        1 => {
            for e in 0..n {
                for (q, &xi) in GAUSS_NODES.iter().enumerate() {
                    let x = (e as f64 + xi) * h;
                    locals.clear();
                    if e >= 1 {
                        locals.push((e - 1, 1.0 - xi));
                    }
                    if e < m {
                        locals.push((e, xi));
                    }
                    visit(&[x], GAUSS_WEIGHTS[q] * h, &locals);
                }
            }
        }
        _ => {
            for ey in 0..n {
                for ex in 0..n {
                    for (qy, &eta) in GAUSS_NODES.iter().enumerate() {
                        for (qx, &xi) in GAUSS_NODES.iter().enumerate() {
                            let p = [(ex as f64 + xi) * h, (ey as f64 + eta) * h];
                            let w = GAUSS_WEIGHTS[qx] * GAUSS_WEIGHTS[qy] * h * h;
                            locals.clear();
                            for (dy, wy) in [(0usize, 1.0 - eta), (1, eta)] {
                                let gy = ey + dy;
                                if gy == 0 || gy > m {
                                    continue;
                                }
                                for (dx, wx) in [(0usize, 1.0 - xi), (1, xi)] {
                                    let gx = ex + dx;
                                    if gx == 0 || gx > m {
                                        continue;
                                    }
                                    locals.push(((gy - 1) * m + gx - 1, wx * wy));
                                }
                            }
                            visit(&p, w, &locals);
                        }
                    }
                }
            }
        }
    }
}

/// `F_i = ∫ f φ_i` with three Gauss points per element and direction.
pub fn load_vector<F: Fn(&[f64]) -> f64 + ?Sized>(mesh: &MeshSpec, f: &F) -> Vec<f64> {
    let mut out = vec![0.0; mesh.dofs()];
    for_each_quadrature_point(mesh, |p, w, locals| {
        if locals.is_empty() {
            return;
        }
        let fw = f(p) * w;
        for &(i, phi) in locals {
            out[i] += fw * phi;
        }
    });
    out
}

/// Nodal values of `u` at the interior nodes.
pub fn interpolate<F: Fn(&[f64]) -> f64 + ?Sized>(mesh: &MeshSpec, u: &F) -> Vec<f64> {
    (0..mesh.dofs())
        .map(|i| {
            let p = mesh.node(i);
            u(&p[..mesh.dim])
        })
        .collect()
}

/// `‖U_h - u‖_{L²(Ω)}` where `U_h` is the finite element function with nodal
/// values `values`.
pub fn l2_error<F: Fn(&[f64]) -> f64 + ?Sized>(mesh: &MeshSpec, values: &[f64], exact: &F) -> Result<f64> {
    mesh.check_len(values.len())?;
    let mut acc = 0.0;
    for_each_quadrature_point(mesh, |p, w, locals| {
        let uh: f64 = locals.iter().map(|&(i, phi)| values[i] * phi).sum();
        let d = uh - exact(p);
        acc += w * d * d;
    });
    Ok(acc.sqrt())
}

/// `∫ U_h ψ` for a finite element function `U_h` and a smooth `ψ`.
pub fn inner_product<F: Fn(&[f64]) -> f64 + ?Sized>(mesh: &MeshSpec, values: &[f64], psi: &F) -> Result<f64> {
    mesh.check_len(values.len())?;
    let mut acc = 0.0;
    for_each_quadrature_point(mesh, |p, w, locals| {
        let uh: f64 = locals.iter().map(|&(i, phi)| values[i] * phi).sum();
        acc += w * uh * psi(p);
    });
    Ok(acc)
}

/// Weight applied to the squared nodal differences in [`grid_l2_diff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridWeight {
    /// `h^d`: a discrete L² norm in any dimension.
    #[default]
    Volume,
    /// `h` regardless of dimension.
    Spacing,
}

impl GridWeight {
    pub fn factor(self, mesh: &MeshSpec) -> f64 {
        match self {
            GridWeight::Volume => mesh.h().powi(mesh.dim as i32),
            GridWeight::Spacing => mesh.h(),
        }
    }
}

/// `sqrt(w · Σ_j |U_j - V_j|²)` over the nodes of `coarse`. `fine` may live on
/// the same mesh or on its refinement, in which case node `j` of the coarse
/// mesh is matched to node `2j` of the fine one.
pub fn grid_l2_diff(
    coarse: &MeshSpec,
    u: &[f64],
    fine: &MeshSpec,
    v: &[f64],
    weight: GridWeight,
) -> Result<f64> {
    coarse.check_len(u.len())?;
    fine.check_len(v.len())?;
    if coarse.dim != fine.dim {
        return Err(Error::MeshMismatch { coarse: coarse.divisions, fine: fine.divisions });
    }
    let w = weight.factor(coarse);
    let sum: f64 = if fine.divisions == coarse.divisions {
        u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
    } else if fine.divisions == 2 * coarse.divisions {
        let mc = coarse.nodes_per_dim();
        let mf = fine.nodes_per_dim();
        (0..u.len())
            .map(|idx| {
                let fine_idx = match coarse.dim {
                    1 => 2 * idx + 1,
                    _ => {
                        let (ix, iy) = (idx % mc, idx / mc);
                        (2 * iy + 1) * mf + 2 * ix + 1
                    }
                };
                let d = u[idx] - v[fine_idx];
                d * d
            })
            .sum()
    } else {
        return Err(Error::MeshMismatch { coarse: coarse.divisions, fine: fine.divisions });
    };
    Ok((w * sum).sqrt())
}
