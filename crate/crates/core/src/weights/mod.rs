//! Carleman weight geometry, level sets, cut-off and the Hölder bound calculus.

mod bound;
mod carleman;
mod geometry;

pub use bound::{
    balance_s, balanced_value, holder_bound, holder_terms, holder_theta, implied_c_cal,
    minimize_bound, Balance, HolderBoundParams,
};
pub use carleman::{
    check_inclusions, cutoff_chi, cutoff_chi_at, eval_phi, eval_psi, mu_levels, phi_field,
    region_masks, t0_cover, write_mask_csv, InclusionReport, LevelSet, WeightParams, MAX_EXPONENT,
};
pub use geometry::{build_weight, BuildOptions, GammaSpec, QuadraticWeight, Rect, Side};
