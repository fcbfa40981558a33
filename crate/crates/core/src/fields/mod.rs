//! Space-time grid, fields, discrete calculus and weighted norms.

mod field;
mod grid;
pub mod identities;
pub mod io;
pub mod norms;
pub mod ops;
pub mod stencil;

pub use field::{FlowState, ScalarField, VectorField};
pub use grid::{trapezoid_1d, Axis, SpaceTimeGrid};
pub use identities::{
    divergence_identity_residual, divergence_identity_residual_with, pressure_poisson_residual,
    Accuracy,
};
pub use norms::{integrate, xs_norm, WeightedNormReport};
pub use ops::{
    apply_advection, apply_reaction, derivative, derivative_fourth_order, div, dot, dt, dx, dy, grad, hessian_entry,
    laplacian, ns_residual, vector_laplacian,
};
