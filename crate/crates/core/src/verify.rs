//! Manufactured test problems, a scalar single-mode oracle, and
//! convergence-rate tables.
//!
//! All three examples use `K = 0.01` and `T = 1`:
//!
//! * `Ex1` (1D): `u = t³ sin(2πx)`, `α = 1 − cos t`.
//! * `Ex2` (2D): `u = t³ sin(2πx) sin(2πy)`, `α = t sin t`.
//! * `Ex3` (2D): `f ≡ 1`, `u₀ = û₀ = sin(πx) sin(πy)`, `α = 1 − cos t`; no
//!   closed form, errors are measured by self-convergence.
//!
//! The manufactured sources need `∫₀ᵗ k(s)(t−s)³ ds` ([`conv_poly3`]).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fdac::{solve_fdac, DEFAULT_THRESHOLD};
use crate::fem::{grid_l2_diff, l2_error, load_vector, GridWeight, MeshSpec};
use crate::kernel::{eval_k, Preset, VariableOrder};
use crate::tss::{solve_tss, FnSource, History, Prepared, ProblemSetup, Source, SpaceFn, Trajectory};

pub const DIFFUSIVITY: f64 = 0.01;
pub const HORIZON: f64 = 1.0;

/// Simpson panels used for the source convolution.
pub const DEFAULT_PANELS: usize = 1024;

/// `∫₀ᵗ k(s) (t − s)³ ds` by composite Simpson with `panels` (even) panels.
///
/// Near the origin `k(s) ~ −α'(0)… s ln s`-type terms make the integrand
/// non-smooth, which caps plain Simpson at `O(h²)`. The rule is therefore
/// applied in the graded variable `s = t w²` (`ds = 2 t w dw`), which
/// smooths the endpoint behaviour and restores the high order.
pub fn conv_poly3(t: f64, order: &VariableOrder, panels: usize) -> f64 {
    assert!(panels >= 2 && panels.is_multiple_of(2), "Simpson needs an even panel count, got {panels}");
    if t <= 0.0 || order.is_zero() {
        return 0.0;
    }
    let integrand = |w: f64| {
        let s = t * w * w;
        let r = t - s;
        eval_k(s, order) * r * r * r * 2.0 * t * w
    };
    let h = 1.0 / panels as f64;
    let mut acc = integrand(0.0) + integrand(1.0);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    acc * h / 3.0
}

/// Memoised [`conv_poly3`]; sources evaluate it once per time level, and
/// runs that share a time grid share the values.
pub struct ConvCache {
    order: VariableOrder,
    panels: usize,
    memo: Mutex<HashMap<u64, f64>>,
}

impl ConvCache {
    pub fn new(order: VariableOrder, panels: usize) -> Self {
        ConvCache { order, panels, memo: Mutex::new(HashMap::new()) }
    }

    pub fn get(&self, t: f64) -> f64 {
        if let Some(&v) = self.memo.lock().expect("cache lock").get(&t.to_bits()) {
            return v;
        }
        let v = conv_poly3(t, &self.order, self.panels);
        self.memo.lock().expect("cache lock").insert(t.to_bits(), v);
        v
    }
}

impl fmt::Debug for ConvCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvCache").field("order", &self.order.name()).field("panels", &self.panels).finish()
    }
}

fn sin2pi(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

/// `f = 6t sin(2πx) + 4Kπ² sin(2πx)(t³ + conv)`.
pub fn source_ex1(x: f64, t: f64, k: f64, conv: f64) -> f64 {
    let s = sin2pi(x);
    6.0 * t * s + 4.0 * k * PI * PI * s * (t * t * t + conv)
}

/// `f = 6t φ + 8Kπ² φ (t³ + conv)` with `φ = sin(2πx) sin(2πy)`; the 2D
/// Laplacian of `φ` is `−8π² φ`.
pub fn source_ex2(x: f64, y: f64, t: f64, k: f64, conv: f64) -> f64 {
    let s = sin2pi(x) * sin2pi(y);
    6.0 * t * s + 8.0 * k * PI * PI * s * (t * t * t + conv)
}

/// Separable source `f = a(t) φ(x)` of the manufactured examples.
struct ManufacturedSource {
    dim: usize,
    diffusivity: f64,
    conv: Arc<ConvCache>,
    // load vector of φ for the last mesh seen
    spatial: Mutex<Option<(MeshSpec, Arc<Vec<f64>>)>>,
}

impl ManufacturedSource {
    fn phi(&self, x: &[f64]) -> f64 {
        x[..self.dim].iter().map(|&v| sin2pi(v)).product()
    }

    fn amplitude(&self, t: f64) -> f64 {
        let lap = 4.0 * self.dim as f64 * PI * PI;
        6.0 * t + lap * self.diffusivity * (t * t * t + self.conv.get(t))
    }
}

impl Source for ManufacturedSource {
    fn frozen(&self, t: f64) -> Box<dyn Fn(&[f64]) -> f64 + '_> {
        let a = self.amplitude(t);
        Box::new(move |x| a * self.phi(x))
    }

    fn load_vector(&self, mesh: &MeshSpec, t: f64) -> Vec<f64> {
        let base = {
            let mut slot = self.spatial.lock().expect("load cache lock");
            match &*slot {
                Some((m, v)) if m == mesh => v.clone(),
                _ => {
                    let v = Arc::new(load_vector(mesh, &|x: &[f64]| self.phi(x)));
                    *slot = Some((*mesh, v.clone()));
                    v
                }
            }
        };
        let a = self.amplitude(t);
        base.iter().map(|v| a * v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    Ex1,
    Ex2,
    Ex3,
}

impl Example {
    pub const ALL: [Example; 3] = [Example::Ex1, Example::Ex2, Example::Ex3];

    pub fn name(self) -> &'static str {
        match self {
            Example::Ex1 => "ex1",
            Example::Ex2 => "ex2",
            Example::Ex3 => "ex3",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Example::Ex1 => 1,
            Example::Ex2 | Example::Ex3 => 2,
        }
    }

    pub fn preset(self) -> Preset {
        match self {
            Example::Ex2 => Preset::TSinT,
            Example::Ex1 | Example::Ex3 => Preset::OneMinusCos,
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ex1" => Ok(Example::Ex1),
            "ex2" => Ok(Example::Ex2),
            "ex3" => Ok(Example::Ex3),
            other => Err(Error::InvalidSetup(format!("unknown example `{other}` (expected ex1, ex2 or ex3)"))),
        }
    }
}

/// One of the test problems, ready to be discretised at any resolution.
#[derive(Clone)]
pub struct ManufacturedCase {
    example: Example,
    order: VariableOrder,
    diffusivity: f64,
    horizon: f64,
    source: Arc<dyn Source>,
    initial: Option<(SpaceFn, SpaceFn)>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("example", &self.example)
            .field("order", &self.order.name())
            .field("diffusivity", &self.diffusivity)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ManufacturedCase {
    pub fn new(example: Example) -> Result<Self> {
        Self::with_parameters(example, DIFFUSIVITY, HORIZON)
    }

    pub fn with_parameters(example: Example, diffusivity: f64, horizon: f64) -> Result<Self> {
        if !(diffusivity > 0.0 && diffusivity.is_finite()) {
            return Err(Error::InvalidSetup(format!("diffusivity must be positive, got {diffusivity}")));
        }
        let order = VariableOrder::preset(example.preset(), horizon)?;
        let (source, initial): (Arc<dyn Source>, _) = match example {
            Example::Ex1 | Example::Ex2 => (
                Arc::new(ManufacturedSource {
                    dim: example.dim(),
                    diffusivity,
                    conv: Arc::new(ConvCache::new(order.clone(), DEFAULT_PANELS)),
                    spatial: Mutex::new(None),
                }),
                None,
            ),
            Example::Ex3 => {
                let sine: SpaceFn = Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
                (Arc::new(FnSource(|_: &[f64], _: f64| 1.0)), Some((sine.clone(), sine)))
            }
        };
        Ok(ManufacturedCase { example, order, diffusivity, horizon, source, initial })
    }

    pub fn example(&self) -> Example {
        self.example
    }

    pub fn order(&self) -> &VariableOrder {
        &self.order
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.example.dim()
    }

    /// The source term exactly as the solvers see it.
    pub fn source(&self) -> &Arc<dyn Source> {
        &self.source
    }

    pub fn has_exact(&self) -> bool {
        self.example != Example::Ex3
    }

    /// Exact solution for `Ex1`/`Ex2`.
    pub fn exact(&self, x: &[f64], t: f64) -> Option<f64> {
        match self.example {
            Example::Ex1 => Some(t * t * t * sin2pi(x[0])),
            Example::Ex2 => Some(t * t * t * sin2pi(x[0]) * sin2pi(x[1])),
            Example::Ex3 => None,
        }
    }

    pub fn mesh(&self, h_exp: u32) -> Result<MeshSpec> {
        MeshSpec::dyadic(self.dim(), h_exp, self.diffusivity)
    }

    /// The discrete problem with `h = 2^{-h_exp}` and `steps` time steps.
    pub fn setup(&self, h_exp: u32, steps: usize) -> Result<ProblemSetup> {
        let mut setup = ProblemSetup::new(self.mesh(h_exp)?, self.order.clone(), self.horizon, steps)?
            .with_source(self.source.clone());
        if let Some((u0, v0)) = &self.initial {
            setup = setup.with_initial_data(u0.clone(), v0.clone());
        }
        Ok(setup)
    }

    /// `‖U^N − u(·, T)‖_{L²}`; `None` without an exact solution.
    pub fn final_error(&self, setup: &ProblemSetup, traj: &Trajectory) -> Result<Option<f64>> {
        if !self.has_exact() {
            return Ok(None);
        }
        let t = setup.horizon();
        let err = l2_error(setup.mesh(), traj.last(), &|x: &[f64]| self.exact(x, t).unwrap_or(0.0))?;
        Ok(Some(err))
    }
}

/// Which solver produces a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Tss,
    Fdac,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tss => "tss",
            Method::Fdac => "fdac",
        }
    }

    pub fn solve(self, prep: &Prepared) -> Result<Trajectory> {
        match self {
            Method::Tss => solve_tss(prep, History::Included),
            Method::Fdac => solve_fdac(prep, DEFAULT_THRESHOLD),
        }
    }

    pub fn run(self, setup: &ProblemSetup) -> Result<Trajectory> {
        self.solve(&Prepared::new(setup)?)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tss" => Ok(Method::Tss),
            "fdac" => Ok(Method::Fdac),
            other => Err(Error::InvalidSetup(format!("unknown method `{other}` (expected tss or fdac)"))),
        }
    }
}

/// Which resolution a convergence study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Temporal,
    Spatial,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "temporal" | "time" | "t" => Ok(Axis::Temporal),
            "spatial" | "space" | "x" => Ok(Axis::Spatial),
            other => Err(Error::InvalidSetup(format!("unknown axis `{other}` (expected temporal or spatial)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    /// `N = T / τ`.
    pub steps: usize,
    /// `h = 2^{-h_exp}`.
    pub h_exp: u32,
    pub error: f64,
    /// `log₂(e_{i−1} / e_i)`, from the second row on.
    pub rate: Option<f64>,
    /// Set when the rate is meaningless (repeated level or non-positive error).
    pub degenerate: bool,
    /// Solve time for this level.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub axis: Axis,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    /// Fills `rate` and `degenerate` from the errors and resolutions.
    pub fn from_rows(axis: Axis, mut rows: Vec<RateRow>) -> Self {
        for i in 0..rows.len() {
            if i == 0 {
                rows[i].rate = None;
                rows[i].degenerate = false;
                continue;
            }
            let (prev, cur) = (&rows[i - 1], &rows[i]);
            let same = prev.steps == cur.steps && prev.h_exp == cur.h_exp;
            let bad = !(prev.error > 0.0 && cur.error > 0.0);
            let (rate, degenerate) = if same || bad { (0.0, true) } else { ((prev.error / cur.error).log2(), false) };
            rows[i].rate = Some(rate);
            rows[i].degenerate = degenerate;
        }
        RateTable { axis, rows }
    }
}

/// Runs a refinement study over dyadic `levels` (`τ = 2^{-l}` for temporal,
/// `h = 2^{-l}` for spatial) with the other resolution fixed at
/// `2^{-fixed}`. `Ex1`/`Ex2` are measured against the exact solution at `T`;
/// `Ex3` by comparing with the run refined once more along the same axis,
/// using `weight` for the discrete norm.
pub fn converge_table(
    case: &ManufacturedCase,
    axis: Axis,
    levels: &[u32],
    fixed: u32,
    method: Method,
    weight: GridWeight,
) -> Result<RateTable> {
    if levels.len() < 2 {
        return Err(Error::InvalidSetup(format!("a convergence study needs at least 2 levels, got {}", levels.len())));
    }
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSetup("convergence levels must be sorted ascending".into()));
    }
    let resolution = |level: u32| -> (usize, u32) {
        match axis {
            Axis::Temporal => (1usize << level, fixed),
            Axis::Spatial => (1usize << fixed, level),
        }
    };
    let horizon_steps = |steps: usize| steps.max(2);

    // runs are shared between a level and its refinement
    let mut cache: HashMap<(usize, u32), (ProblemSetup, Trajectory, f64)> = HashMap::new();
    let mut run = |steps: usize, h_exp: u32| -> Result<(ProblemSetup, Trajectory, f64)> {
        if let Some(hit) = cache.get(&(steps, h_exp)) {
            return Ok(hit.clone());
        }
        let setup = case.setup(h_exp, horizon_steps(steps))?;
        let prep = Prepared::new(&setup)?;
        let start = Instant::now();
        let traj = method.solve(&prep)?;
        let wall = start.elapsed().as_secs_f64();
        cache.insert((steps, h_exp), (setup.clone(), traj.clone(), wall));
        Ok((setup, traj, wall))
    };

    let mut rows = Vec::with_capacity(levels.len());
    for (i, &level) in levels.iter().enumerate() {
        let (steps, h_exp) = resolution(level);
        let level_err = |e: Error| Error::Level { level: i, source: Box::new(e) };
        let (setup, traj, wall) = run(steps, h_exp).map_err(level_err)?;
        let error = if case.has_exact() {
            case.final_error(&setup, &traj).map_err(level_err)?.unwrap_or(0.0)
        } else {
            let (fine_steps, fine_h) = match axis {
                Axis::Temporal => (2 * steps, h_exp),
                Axis::Spatial => (steps, h_exp + 1),
            };
            let (fine_setup, fine_traj, _) = run(fine_steps, fine_h).map_err(level_err)?;
            grid_l2_diff(setup.mesh(), traj.last(), fine_setup.mesh(), fine_traj.last(), weight).map_err(level_err)?
        };
        rows.push(RateRow { steps, h_exp, error, rate: None, degenerate: false, wall_seconds: wall });
    }
    Ok(RateTable::from_rows(axis, rows))
}

/// High-accuracy solution of the scalar integro-differential equation
///
/// ```text
/// v'' + λ² v = q − λ² (k * v),   v(0) = v0,  v'(0) = v̂0
/// ```
///
/// on `steps` uniform steps over `[0, horizon]`, returning `v` at every grid
/// point. Classical RK4 on `(v, v')`; the convolution at each stage time is a
/// product-trapezoid sum over the computed history. Because `k(0) = 0` the
/// stage value itself never enters the sum, so the scheme stays explicit.
pub fn spectral_mode_solve(
    lambda: f64,
    q: &dyn Fn(f64) -> f64,
    v0: f64,
    hat_v0: f64,
    order: &VariableOrder,
    horizon: f64,
    steps: usize,
) -> Vec<f64> {
    assert!(steps >= 1 && horizon > 0.0);
    let h = horizon / steps as f64;
    let lam2 = lambda * lambda;
    let zero_kernel = order.is_zero();
    // k at whole and half lags
    let (k_full, k_half): (Vec<f64>, Vec<f64>) = if zero_kernel {
        (vec![0.0; steps + 1], vec![0.0; steps + 1])
    } else {
        (
            (0..=steps).map(|j| eval_k(j as f64 * h, order)).collect(),
            (0..=steps).map(|j| eval_k((j as f64 + 0.5) * h, order)).collect(),
        )
    };

    // trapezoid over [0, t_n] for the lag table `lag(n - j)`, plus the last
    // partial panel of width `tail` ending at the stage time
    let history = |v: &[f64], n: usize, lag: &dyn Fn(usize) -> f64, tail: f64, k_tail: f64| -> f64 {
        if zero_kernel {
            return 0.0;
        }
        let mut acc = 0.0;
        if n > 0 {
            acc += 0.5 * lag(n) * v[0];
            for j in 1..n {
                acc += lag(n - j) * v[j];
            }
            acc += 0.5 * lag(0) * v[n];
            acc *= h;
        }
        acc + 0.5 * tail * k_tail * v[n]
    };

    let mut v = Vec::with_capacity(steps + 1);
    v.push(v0);
    let mut w = hat_v0;
    let mut conv_now = 0.0;
    for n in 0..steps {
        let t = n as f64 * h;
        let vn = v[n];
        // stage times t, t + h/2 (twice), t + h
        let conv_mid = history(&v, n, &|l| k_half[l], 0.5 * h, k_half[0]);
        let conv_end = history(&v, n, &|l| k_full[l + 1], h, k_full[1]);
        let accel = |tt: f64, vv: f64, conv: f64| q(tt) - lam2 * vv - lam2 * conv;

        let (k1v, k1w) = (w, accel(t, vn, conv_now));
        let (k2v, k2w) = (w + 0.5 * h * k1w, accel(t + 0.5 * h, vn + 0.5 * h * k1v, conv_mid));
        let (k3v, k3w) = (w + 0.5 * h * k2w, accel(t + 0.5 * h, vn + 0.5 * h * k2v, conv_mid));
        let (k4v, k4w) = (w + h * k3w, accel(t + h, vn + h * k3v, conv_end));
        v.push(vn + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v));
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        // with k(0) = 0 the new value does not change the end-point sum
        conv_now = conv_end;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use reference::adaptive_gk;

    fn one_minus_cos() -> VariableOrder {
        VariableOrder::preset(Preset::OneMinusCos, 1.0).unwrap()
    }

    #[test]
    fn convolution_trivial_cases() {
        assert_eq!(conv_poly3(0.0, &one_minus_cos(), DEFAULT_PANELS), 0.0);
        let zero = VariableOrder::preset(Preset::Zero, 1.0).unwrap();
        for t in [0.1, 0.5, 1.0] {
            assert_eq!(conv_poly3(t, &zero, DEFAULT_PANELS), 0.0);
        }
    }

    #[test]
    fn convolution_matches_integration_by_parts() {
        // ∫ k(s)(t-s)³ ds = [g(s)(t-s)³] + 3∫ g(s)(t-s)² ds = -t³ + 3∫ g(s)(t-s)² ds
        for order in [one_minus_cos(), VariableOrder::preset(Preset::TSinT, 1.0).unwrap()] {
            for t in [0.25, 0.7, 1.0] {
                let g_part = adaptive_gk(|s| crate::kernel::eval_g(s, &order) * (t - s) * (t - s), 0.0, t, 1e-14);
                let oracle = -t * t * t + 3.0 * g_part;
                let got = conv_poly3(t, &order, DEFAULT_PANELS);
                assert!((got - oracle).abs() <= 1e-9, "t = {t}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn convolution_panel_doubling_is_stable() {
        for order in [one_minus_cos(), VariableOrder::preset(Preset::TSinT, 1.0).unwrap()] {
            for t in [0.1, 0.5, 1.0] {
                let a = conv_poly3(t, &order, DEFAULT_PANELS);
                let b = conv_poly3(t, &order, 2 * DEFAULT_PANELS);
                assert!((a - b).abs() <= 1e-9, "t = {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sources_vanish_at_origin_and_boundary() {
        assert_eq!(source_ex1(0.3, 0.0, 0.01, 0.0), 0.0);
        assert_eq!(source_ex1(0.0, 0.7, 0.01, 0.3), 0.0);
        assert_eq!(source_ex2(0.3, 0.4, 0.0, 0.01, 0.0), 0.0);
        assert_eq!(source_ex2(0.0, 0.4, 0.7, 0.01, 0.3), 0.0);
    }

    fn residual_check(example: Example) {
        // u_tt - KΔu - K k*Δu - f with every term evaluated independently
        let case = ManufacturedCase::new(example).unwrap();
        let order = case.order().clone();
        let k = case.diffusivity();
        let dim = case.dim() as f64;
        let source = &case.source;
        for it in 1..=10 {
            let t = it as f64 / 10.0;
            let conv = adaptive_gk(|s| eval_k(s, &order) * (t - s).powi(3), 0.0, t, 1e-13);
            let f = source.frozen(t);
            for ix in 0..10 {
                let x = [(ix as f64 + 0.5) / 10.0, 0.3];
                let phi = if example == Example::Ex1 { sin2pi(x[0]) } else { sin2pi(x[0]) * sin2pi(x[1]) };
                let lap = -4.0 * dim * PI * PI * phi;
                let u_tt = 6.0 * t * phi;
                let residual = u_tt - k * lap * t * t * t - k * lap * conv - f(&x);
                assert!(residual.abs() <= 1e-8, "t = {t}, x = {x:?}: residual {residual:e}");
            }
        }
    }

    #[test]
    fn ex1_source_satisfies_the_equation() {
        residual_check(Example::Ex1);
    }

    #[test]
    fn ex2_source_satisfies_the_equation() {
        residual_check(Example::Ex2);
    }

    #[test]
    fn separable_load_matches_direct_quadrature() {
        let case = ManufacturedCase::new(Example::Ex2).unwrap();
        let mesh = case.mesh(3).unwrap();
        let fast = case.source.load_vector(&mesh, 0.6);
        let slow = load_vector(&mesh, &*case.source.frozen(0.6));
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn oscillator_without_memory() {
        let zero = VariableOrder::preset(Preset::Zero, 1.0).unwrap();
        let lam = 2.5;
        let c = spectral_mode_solve(lam, &|_| 0.0, 1.0, 0.0, &zero, 1.0, 1 << 14);
        assert!((c.last().unwrap() - lam.cos()).abs() <= 1e-8);
        let s = spectral_mode_solve(lam, &|_| 0.0, 0.0, 1.0, &zero, 1.0, 1 << 14);
        assert!((s.last().unwrap() - lam.sin() / lam).abs() <= 1e-8);
    }

    #[test]
    fn recovers_manufactured_scalar_solution() {
        let order = one_minus_cos();
        let lam = 1.3;
        let cache = ConvCache::new(order.clone(), DEFAULT_PANELS);
        let q = |t: f64| 6.0 * t + lam * lam * (t * t * t + cache.get(t));
        let v = spectral_mode_solve(lam, &q, 0.0, 0.0, &order, 1.0, 1 << 14);
        assert!((v.last().unwrap() - 1.0).abs() <= 1e-7, "{}", v.last().unwrap());
        let mid = v[1 << 13];
        assert!((mid - 0.125).abs() <= 1e-7);
    }

    #[test]
    fn rate_table_flags_degenerate_rows() {
        let row = |steps, error| RateRow { steps, h_exp: 3, error, rate: None, degenerate: false, wall_seconds: 0.0 };
        let t = RateTable::from_rows(Axis::Temporal, vec![row(8, 0.4), row(16, 0.2), row(16, 0.2)]);
        assert_eq!(t.rows[0].rate, None);
        assert!((t.rows[1].rate.unwrap() - 1.0).abs() < 1e-15);
        assert!(!t.rows[1].degenerate);
        assert_eq!(t.rows[2].rate, Some(0.0));
        assert!(t.rows[2].degenerate);
    }

    #[test]
    fn converge_table_validates_levels() {
        let case = ManufacturedCase::new(Example::Ex1).unwrap();
        assert!(converge_table(&case, Axis::Temporal, &[3], 3, Method::Fdac, GridWeight::Volume).is_err());
        assert!(converge_table(&case, Axis::Temporal, &[4, 3], 3, Method::Fdac, GridWeight::Volume).is_err());
    }

    #[test]
    fn small_studies_converge() {
        let case = ManufacturedCase::new(Example::Ex1).unwrap();
        let t = converge_table(&case, Axis::Temporal, &[3, 4, 5], 6, Method::Fdac, GridWeight::Volume).unwrap();
        assert!(t.errors().windows(2).all(|w| w[1] < w[0]), "{t:?}");
        let ex3 = ManufacturedCase::new(Example::Ex3).unwrap();
        let s = converge_table(&ex3, Axis::Spatial, &[2, 3], 3, Method::Tss, GridWeight::Volume).unwrap();
        assert!(s.rows[1].error < s.rows[0].error, "{s:?}");
    }
}
