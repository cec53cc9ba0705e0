//! Command-line front end for the `fracwave` solvers: single runs,
//! convergence studies, TSS/FDAC equivalence sweeps and scaling benchmarks.

pub mod commands;
pub mod config;
pub mod output;
