use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpaceTimeGrid;
use crate::linalg::CgSettings;
use crate::weights::WeightParams;

/// Preconditioner for the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    /// Inverse squared column norms.
    Jacobi,
    /// Exact factorization of the normal matrix over the node-major
    /// envelope; falls back to Jacobi if the factorization breaks down.
    #[default]
    Cholesky,
}

/// Penalty weights and solver settings of one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Carleman parameter.
    pub s: f64,
    pub weight: WeightParams,
    pub w_pde: f64,
    pub w_div: f64,
    pub w_data: f64,
    /// Tikhonov weight on `|grad v|^2 + p^2`; `None` means `1e-6 h^2`.
    pub alpha_reg: Option<f64>,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    /// Restrict every term to the region `D = {phi > mu_1}`.
    pub use_cutoff: bool,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
}

impl InversionConfig {
    pub fn new(s: f64, weight: WeightParams) -> Self {
        Self {
            s,
            weight,
            w_pde: 1.0,
            w_div: 1.0,
            w_data: 100.0,
            alpha_reg: None,
            cg_tol: 1e-10,
            cg_maxit: 100_000,
            use_cutoff: true,
            preconditioner: PreconditionerKind::Cholesky,
        }
    }

    pub fn alpha(&self, grid: &SpaceTimeGrid) -> f64 {
        self.alpha_reg.unwrap_or_else(|| {
            let h = grid.hx().max(grid.hy());
            1e-6 * h * h
        })
    }

    pub fn cg_settings(&self) -> CgSettings {
        CgSettings {
            tol: self.cg_tol,
            max_iter: self.cg_maxit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::InvalidParams(format!("s must be >= 0, got {}", self.s)));
        }
        for (name, w) in [("w_pde", self.w_pde), ("w_div", self.w_div)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {w}")));
            }
        }
        if !(self.w_data.is_finite() && self.w_data > 0.0) {
            return Err(Error::InvalidParams(format!("w_data must be > 0, got {}", self.w_data)));
        }
        if let Some(a) = self.alpha_reg {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParams(format!("alpha_reg must be >= 0, got {a}")));
            }
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::InvalidParams(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        if self.cg_maxit == 0 {
            return Err(Error::InvalidParams("cg_maxit must be positive".into()));
        }
        Ok(())
    }
}
