//! Fixtures shared by the benchmarks.

use nscauchy::experiments::ExperimentConfig;
use nscauchy::forward::{extract_cauchy, manufactured_solution, CauchyTrace, Manufactured};
use nscauchy::inversion::InversionConfig;

/// The reference configuration on an `n x n x n` grid.
pub fn config(n: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference();
    cfg.grid.nx = n;
    cfg.grid.ny = n;
    cfg.grid.nt = n;
    cfg
}

/// Manufactured truth, noisy data at `delta` and the inversion settings for
/// the middle weight centre.
pub fn inversion_case(n: usize, delta: f64) -> (Manufactured, CauchyTrace, InversionConfig) {
    let cfg = config(n);
    let grid = cfg.grid().expect("valid grid");
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa).expect("built-in problem");
    let data = extract_cauchy(&man.truth, &cfg.gamma, cfg.kappa, delta, 1).expect("traces");
    let t0s = cfg.t0_values();
    let icfg = cfg.inversion_config(8.0, t0s[t0s.len() / 2]).expect("inversion settings");
    (man, data, icfg)
}
