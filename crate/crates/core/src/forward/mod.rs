//! Manufactured solutions, the backward-Euler forward solver and synthetic
//! lateral Cauchy data.

pub mod analytic;
mod cauchy;
mod problems;
mod solver;

pub(crate) use cauchy::clean_channels;
pub use cauchy::{
    extract_cauchy, gamma_nodes, read_cauchy, sidecar_path, write_cauchy, CauchyTrace, CHANNELS,
};
pub use problems::{manufactured_solution, Manufactured, ManufacturedProblem, ProblemSpec, PROBLEM_IDS};
pub use solver::{mass_balance, solve_forward, solve_forward_with, ForwardReport, ForwardSettings};
