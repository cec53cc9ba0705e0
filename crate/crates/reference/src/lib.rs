//! Brute-force reference computations for tests.
//!
//! Nothing here shares code with the solver crates: quadrature is an adaptive
//! Gauss-Kronrod 7/15 rule, linear algebra is dense and naive.

pub mod dense;
pub mod quad;

pub use dense::Dense;
pub use quad::{adaptive_gk, adaptive_gk_2d};
