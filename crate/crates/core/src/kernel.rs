//! Variable-order exponent, memory kernel and convolution weights.
//!
//! The reformulated model carries the memory term `k * Δu` with
//!
//! ```text
//! g(t) = t^{-α(t)} / Γ(1 - α(t)),      k(t) = g'(t)
//! ```
//!
//! With `α(0) = α'(0) = 0` the kernel is bounded, `g(0+) = 1` and `k(0+) = 0`.
//! Integrating `k` over a time panel gives `g` differences, so the quadrature
//! weights of the convolution depend only on the lag between the two time
//! levels. That translation invariance is what makes the all-at-once system
//! block Toeplitz.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Below this time `g` and `k` return their limits at the origin.
pub const ORIGIN_CUTOFF: f64 = 1e-300;

/// Number of sampling intervals used when validating an order at construction.
pub const VALIDATION_SAMPLES: usize = 1 << 14;

const ORIGIN_TOL: f64 = 1e-12;

/// Digamma function ψ(x) = Γ'(x)/Γ(x) for x > 0.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { function: "digamma", value: x });
    }
    Ok(digamma_positive(x))
}

// Upward recurrence to x >= 8, then the asymptotic expansion through x^-14.
fn digamma_positive(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 8.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r / 12.0))))));
    acc + x.ln() - 0.5 / x - series
}

/// Built-in exponent functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// α ≡ 0: the classical wave equation.
    Zero,
    /// α(t) = 1 - cos t.
    OneMinusCos,
    /// α(t) = t sin t.
    TSinT,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Zero, Preset::OneMinusCos, Preset::TSinT];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::OneMinusCos => "one-minus-cos",
            Preset::TSinT => "t-sin-t",
        }
    }

    fn alpha(self, t: f64) -> f64 {
        match self {
            Preset::Zero => 0.0,
            // 2 sin^2(t/2) keeps full relative precision for small t.
            Preset::OneMinusCos => {
                let s = (0.5 * t).sin();
                2.0 * s * s
            }
            Preset::TSinT => t * t.sin(),
        }
    }

    fn dalpha(self, t: f64) -> f64 {
        match self {
            Preset::Zero => 0.0,
            Preset::OneMinusCos => t.sin(),
            Preset::TSinT => t.sin() + t * t.cos(),
        }
    }

    fn d2alpha(self, t: f64) -> f64 {
        match self {
            Preset::Zero => 0.0,
            Preset::OneMinusCos => t.cos(),
            Preset::TSinT => 2.0 * t.cos() - t * t.sin(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Shape {
    Preset(Preset),
    Custom { alpha: ScalarFn, dalpha: ScalarFn, d2alpha: ScalarFn },
}

/// The exponent α(t) of the fractional operator, together with its first two
/// derivatives.
#[derive(Clone)]
pub struct VariableOrder {
    shape: Shape,
    horizon: f64,
}

impl fmt::Debug for VariableOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VariableOrder")
            .field("name", &self.name())
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl VariableOrder {
    /// A built-in order on `[0, horizon]`, validated by dense sampling.
    pub fn preset(preset: Preset, horizon: f64) -> Result<Self> {
        Self { shape: Shape::Preset(preset), horizon }.validated()
    }

    /// A user-supplied order with analytic first and second derivatives,
    /// validated by dense sampling on `[0, horizon]`.
    pub fn custom<A, D, D2>(alpha: A, dalpha: D, d2alpha: D2, horizon: f64) -> Result<Self>
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::custom_unchecked(alpha, dalpha, d2alpha, horizon).validated()
    }

    /// Like [`VariableOrder::custom`] without the admissibility check, for
    /// feeding candidate orders to [`check_assumption_a`].
    pub fn custom_unchecked<A, D, D2>(alpha: A, dalpha: D, d2alpha: D2, horizon: f64) -> Self
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            shape: Shape::Custom {
                alpha: Arc::new(alpha),
                dalpha: Arc::new(dalpha),
                d2alpha: Arc::new(d2alpha),
            },
            horizon,
        }
    }

    /// Parses a canonical preset name.
    pub fn from_name(name: &str, horizon: f64) -> Result<Self> {
        Self::preset(name.parse()?, horizon)
    }

    fn validated(self) -> Result<Self> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidSetup(format!("horizon must be positive, got {}", self.horizon)));
        }
        let grid = uniform_grid(self.horizon, VALIDATION_SAMPLES);
        let report = check_assumption_a(&self, &grid);
        match report.violation {
            None => Ok(self),
            Some(v) => Err(Error::InadmissibleOrder { t: v.t, reason: v.kind.to_string() }),
        }
    }

    pub fn preset_kind(&self) -> Option<Preset> {
        match self.shape {
            Shape::Preset(p) => Some(p),
            Shape::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::Preset(p) => p.name(),
            Shape::Custom { .. } => "custom",
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Preset(p) => p.alpha(t),
            Shape::Custom { alpha, .. } => alpha(t),
        }
    }

    pub fn dalpha(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Preset(p) => p.dalpha(t),
            Shape::Custom { dalpha, .. } => dalpha(t),
        }
    }

    pub fn d2alpha(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Preset(p) => p.d2alpha(t),
            Shape::Custom { d2alpha, .. } => d2alpha(t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Preset(Preset::Zero))
    }
}

/// `horizon * i / intervals` for `i = 0..=intervals`.
pub fn uniform_grid(horizon: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| horizon * i as f64 / intervals as f64).collect()
}

/// g(t) = t^{-α(t)} / Γ(1 - α(t)), with g(0) = 1.
pub fn eval_g(t: f64, order: &VariableOrder) -> f64 {
    if t < ORIGIN_CUTOFF {
        return 1.0;
    }
    let a = order.alpha(t);
    if a == 0.0 {
        return 1.0;
    }
    (-a * t.ln()).exp() / gamma(1.0 - a)
}

/// k(t) = g'(t), by logarithmic differentiation:
/// `k = g · (-α' ln t - α/t + ψ(1-α) α')`. Returns 0 at the origin.
pub fn eval_k(t: f64, order: &VariableOrder) -> f64 {
    if t < ORIGIN_CUTOFF {
        return 0.0;
    }
    let a = order.alpha(t);
    let da = order.dalpha(t);
    if a == 0.0 && da == 0.0 {
        return 0.0;
    }
    let g = (-a * t.ln()).exp() / gamma(1.0 - a);
    g * (-da * t.ln() - a / t + digamma_positive(1.0 - a) * da)
}

/// One evaluation of the kernel pair at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub t: f64,
    pub g: f64,
    pub k: f64,
}

impl KernelSample {
    pub fn at(t: f64, order: &VariableOrder) -> Self {
        KernelSample { t, g: eval_g(t, order), k: eval_k(t, order) }
    }
}

/// Convolution weights indexed by lag.
///
/// `b_{n,k} = ∫_{t_k}^{t_{k+1}} k(t_n - s) ds = β_{n-k}` with
/// `β_j = g(jτ) - g((j-1)τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagWeights {
    tau: f64,
    beta: Vec<f64>,
}

impl LagWeights {
    pub fn new(tau: f64, count: usize, order: &VariableOrder) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidSetup(format!("time step must be positive, got {tau}")));
        }
        if count == 0 {
            return Err(Error::InvalidSetup("at least one lag weight is required".into()));
        }
        let mut prev = eval_g(0.0, order);
        let beta = (1..=count)
            .map(|j| {
                let next = eval_g(tau * j as f64, order);
                let b = next - prev;
                prev = next;
                b
            })
            .collect();
        Ok(LagWeights { tau, beta })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn count(&self) -> usize {
        self.beta.len()
    }

    /// β_j for `1 <= j <= count`.
    pub fn beta(&self, lag: usize) -> f64 {
        assert!(lag >= 1 && lag <= self.beta.len(), "lag {lag} out of range");
        self.beta[lag - 1]
    }

    /// β_1..β_count.
    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }

    /// b_{n,k}; zero outside `0 <= k < n`.
    pub fn b(&self, n: usize, k: usize) -> f64 {
        if k < n {
            self.beta(n - k)
        } else {
            0.0
        }
    }

    /// Σ_{j=1..n} |β_j|.
    pub fn abs_sum(&self, n: usize) -> f64 {
        self.beta[..n].iter().map(|b| b.abs()).sum()
    }

    /// First column of the triangular Toeplitz factor of the all-at-once
    /// system: `[1, β_1, ..., β_{len-1}]`.
    pub fn toeplitz_column(&self, len: usize) -> Vec<f64> {
        assert!(len >= 1 && len <= self.beta.len() + 1);
        std::iter::once(1.0).chain(self.beta[..len - 1].iter().copied()).collect()
    }
}

/// Convenience wrapper around [`LagWeights::new`].
pub fn lag_weights(tau: f64, count: usize, order: &VariableOrder) -> Result<LagWeights> {
    LagWeights::new(tau, count, order)
}

/// First column (length `steps - 1`) of the T block for `steps` time steps.
pub fn toeplitz_first_column(steps: usize, tau: f64, order: &VariableOrder) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidSetup(format!("need at least 2 time steps, got {steps}")));
    }
    if steps == 2 {
        return Ok(vec![1.0]);
    }
    Ok(LagWeights::new(tau, steps - 2, order)?.toeplitz_column(steps - 1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    Negative(f64),
    NotBelowOne(f64),
    NonzeroAtOrigin(f64),
    NonzeroSlopeAtOrigin(f64),
    NonFinite,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Negative(a) => write!(f, "alpha = {a} is negative"),
            ViolationKind::NotBelowOne(a) => write!(f, "alpha = {a} is not below 1"),
            ViolationKind::NonzeroAtOrigin(a) => write!(f, "alpha(0) = {a}, expected 0"),
            ViolationKind::NonzeroSlopeAtOrigin(d) => write!(f, "alpha'(0) = {d}, expected 0"),
            ViolationKind::NonFinite => f.write_str("alpha or one of its derivatives is not finite"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
}

/// Outcome of [`check_assumption_a`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub alpha_max: f64,
    pub dalpha_max: f64,
    pub d2alpha_max: f64,
    /// First violation found, origin conditions first, then the grid in order.
    pub violation: Option<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Checks `0 <= α <= α* < 1` and finiteness of α', α'' on `grid`, plus
/// `α(0) = α'(0) = 0`. Never fails; the first violation is reported.
pub fn check_assumption_a(order: &VariableOrder, grid: &[f64]) -> AssumptionReport {
    let mut report =
        AssumptionReport { alpha_max: 0.0, dalpha_max: 0.0, d2alpha_max: 0.0, violation: None };
    let flag = |t: f64, kind: ViolationKind, report: &mut AssumptionReport| {
        if report.violation.is_none() {
            report.violation = Some(Violation { t, kind });
        }
    };

    let a0 = order.alpha(0.0);
    let d0 = order.dalpha(0.0);
    if !(a0.abs() <= ORIGIN_TOL) {
        flag(0.0, ViolationKind::NonzeroAtOrigin(a0), &mut report);
    }
    if !(d0.abs() <= ORIGIN_TOL) {
        flag(0.0, ViolationKind::NonzeroSlopeAtOrigin(d0), &mut report);
    }

    for &t in grid {
        let a = order.alpha(t);
        let d = order.dalpha(t);
        let d2 = order.d2alpha(t);
        if !(a.is_finite() && d.is_finite() && d2.is_finite()) {
            flag(t, ViolationKind::NonFinite, &mut report);
            continue;
        }
        report.alpha_max = report.alpha_max.max(a);
        report.dalpha_max = report.dalpha_max.max(d.abs());
        report.d2alpha_max = report.d2alpha_max.max(d2.abs());
        if a < 0.0 {
            flag(t, ViolationKind::Negative(a), &mut report);
        } else if a >= 1.0 {
            flag(t, ViolationKind::NotBelowOne(a), &mut report);
        }
    }
    report
}
