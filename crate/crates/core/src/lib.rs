//! Solvers for the variable-order time-fractional wave equation
//!
//! ```text
//! ∂ₜ²u − K Δu − K (k * Δu) = f,   k = g′,   g(t) = t^{-α(t)} / Γ(1 − α(t))
//! ```
//!
//! on the unit interval or square with homogeneous Dirichlet data. Space is
//! discretised with linear (1D) or bilinear (2D) finite elements, time with a
//! first-order scheme whose history sum has lower-triangular Toeplitz
//! structure. Two equivalent solvers are provided: classical time stepping
//! ([`tss`]) and a divide-and-conquer all-at-once solver ([`fdac`]).

pub mod error;
pub mod fdac;
pub mod fem;
pub mod kernel;
pub mod step;
pub mod toeplitz;
pub mod tss;
pub mod verify;

pub use error::{Error, Result};
pub use fdac::run_fdac;
pub use fem::{MeshSpec, OperatorPair};
pub use kernel::{Preset, VariableOrder};
pub use step::StepSolver;
pub use toeplitz::ToeplitzSpec;
pub use tss::{run_tss, ProblemSetup, Trajectory};
pub use verify::{Example, ManufacturedCase, Method};
