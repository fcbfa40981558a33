use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{derivative, dt, grad, hessian_entry, Axis, FlowState, ScalarField, SpaceTimeGrid};
use crate::weights::{GammaSpec, Rect, Side};

/// Reconstruction error on `Omega_0 x window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorError {
    /// Discrete `H^{2,1}` norm of the velocity error.
    pub v_h21: f64,
    /// Discrete `H^{1,0}` norm of the pressure error, mean removed per level.
    pub p_h10: f64,
    /// Squared velocity contribution of each time level (0 outside the window).
    pub v_level_sq: Vec<f64>,
    /// Squared pressure contribution of each time level.
    pub p_level_sq: Vec<f64>,
}

impl InteriorError {
    pub fn total(&self) -> f64 {
        self.v_h21 + self.p_h10
    }

    /// Combine runs with different windows: at each time level keep the
    /// largest contribution over the runs, then sum over levels.
    pub fn max_over_levels(runs: &[&InteriorError]) -> Option<InteriorError> {
        let first = runs.first()?;
        let nt = first.v_level_sq.len();
        let mut v = vec![0.0f64; nt];
        let mut p = vec![0.0f64; nt];
        for r in runs {
            for it in 0..nt.min(r.v_level_sq.len()) {
                v[it] = v[it].max(r.v_level_sq[it]);
                p[it] = p[it].max(r.p_level_sq[it]);
            }
        }
        Some(InteriorError {
            v_h21: v.iter().sum::<f64>().sqrt(),
            p_h10: p.iter().sum::<f64>().sqrt(),
            v_level_sq: v,
            p_level_sq: p,
        })
    }
}

/// `Omega_0` must lie in the closed domain, and any part of its boundary on
/// the domain boundary must be a proper subset of Γ.
pub fn check_omega0(omega0: &Rect, domain: &Rect, gamma: &GammaSpec) -> Result<()> {
    let tol = 1e-12 * (domain.x1 - domain.x0).max(domain.y1 - domain.y0);
    if omega0.is_empty() {
        return Err(Error::Config("Ω0 is empty".into()));
    }
    if omega0.x0 < domain.x0 - tol || omega0.x1 > domain.x1 + tol || omega0.y0 < domain.y0 - tol || omega0.y1 > domain.y1 + tol {
        return Err(Error::Config("Ω0 must lie inside the domain".into()));
    }
    let touching = [
        (Side::Bottom, (omega0.y0 - domain.y0).abs() <= tol, omega0.x0, omega0.x1),
        (Side::Top, (omega0.y1 - domain.y1).abs() <= tol, omega0.x0, omega0.x1),
        (Side::Left, (omega0.x0 - domain.x0).abs() <= tol, omega0.y0, omega0.y1),
        (Side::Right, (omega0.x1 - domain.x1).abs() <= tol, omega0.y0, omega0.y1),
    ];
    for (side, touches, lo, hi) in touching {
        if !touches {
            continue;
        }
        let inside = side == gamma.side && lo >= gamma.start - tol && hi <= gamma.end + tol;
        let equal = (lo - gamma.start).abs() <= tol && (hi - gamma.end).abs() <= tol;
        if !inside || equal {
            return Err(Error::Config(format!(
                "Ω0 meets the {side:?} boundary outside a proper part of Γ"
            )));
        }
    }
    Ok(())
}

/// Nodes of the closed rectangle `omega0` at times in the closed `window`.
pub fn region_nodes(grid: &SpaceTimeGrid, omega0: &Rect, window: (f64, f64)) -> Vec<bool> {
    let tol = 1e-9 * grid.lx().max(grid.ly()).max(grid.t_final());
    (0..grid.n_nodes())
        .map(|i| {
            let (x, y, t) = grid.coords(i);
            omega0.contains_closed([x, y], tol) && t >= window.0 - tol && t <= window.1 + tol
        })
        .collect()
}

/// Error of `state` against `truth` over `omega0 x window`.
pub fn interior_error(
    state: &FlowState,
    truth: &FlowState,
    omega0: &Rect,
    gamma: &GammaSpec,
    window: (f64, f64),
) -> Result<InteriorError> {
    let grid = *state.grid();
    if *truth.grid() != grid {
        return Err(Error::Shape("state and truth grids differ".into()));
    }
    check_omega0(omega0, &Rect::domain(grid.lx(), grid.ly()), gamma)?;
    let mask = region_nodes(&grid, omega0, window);
    if !mask.iter().any(|&m| m) {
        return Err(Error::Config("Ω0 x window contains no grid nodes".into()));
    }
    let ev = &state.v - &truth.v;
    let ep = &state.p - &truth.p;
    Ok(error_norms(&ev.into_components(), &ep, &mask))
}

fn error_norms(ev: &[ScalarField], ep: &ScalarField, mask: &[bool]) -> InteriorError {
    let grid = *ep.grid();
    let ns = grid.n_space();
    let mut v_level = vec![0.0; grid.nt()];
    let mut p_level = vec![0.0; grid.nt()];
    for e in ev {
        let parts = [
            e.clone(),
            derivative(e, Axis::X, 1),
            derivative(e, Axis::Y, 1),
            hessian_entry(e, Axis::X, Axis::X),
            hessian_entry(e, Axis::X, Axis::Y),
            hessian_entry(e, Axis::Y, Axis::X),
            hessian_entry(e, Axis::Y, Axis::Y),
            dt(e),
        ];
        for f in &parts {
            for (i, &v) in f.values().iter().enumerate() {
                if mask[i] {
                    v_level[i / ns] += grid.trapezoid_weight(i) * v * v;
                }
            }
        }
    }
    let mut shifted = ep.clone();
    for it in 0..grid.nt() {
        let range = it * ns..(it + 1) * ns;
        let (mut sw, mut s) = (0.0, 0.0);
        for i in range.clone().filter(|&i| mask[i]) {
            sw += grid.trapezoid_weight(i);
            s += grid.trapezoid_weight(i) * ep.values()[i];
        }
        if sw > 0.0 {
            let mean = s / sw;
            for i in range {
                shifted.values_mut()[i] -= mean;
            }
        }
    }
    let gp = grad(&shifted);
    for f in [&shifted, gp.component(0), gp.component(1)] {
        for (i, &v) in f.values().iter().enumerate() {
            if mask[i] {
                p_level[i / ns] += grid.trapezoid_weight(i) * v * v;
            }
        }
    }
    InteriorError {
        v_h21: v_level.iter().sum::<f64>().sqrt(),
        p_h10: p_level.iter().sum::<f64>().sqrt(),
        v_level_sq: v_level,
        p_level_sq: p_level,
    }
}

/// A-priori magnitude `||v||_{H^{1,1}(Q)} + ||p||_{L^2(Q)}`.
pub fn apriori_magnitude(truth: &FlowState) -> f64 {
    let grid = *truth.grid();
    let mut v2 = 0.0;
    for e in truth.v.components() {
        for f in [e.clone(), derivative(e, Axis::X, 1), derivative(e, Axis::Y, 1), dt(e)] {
            v2 += f
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| grid.trapezoid_weight(i) * v * v)
                .sum::<f64>();
        }
    }
    let p2: f64 = truth
        .p
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| grid.trapezoid_weight(i) * v * v)
        .sum();
    v2.sqrt() + p2.sqrt()
}
