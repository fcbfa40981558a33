use serde::{Deserialize, Serialize};

use super::field::{ScalarField, VectorField};
use super::grid::{Axis, SpaceTimeGrid};
use super::ops::{derivative, dt, dx, dy, hessian_entry};
use crate::error::{Error, Result};

/// Trapezoidal integral of `f` over the nodes where `mask` is set
/// (all nodes when `mask` is `None`).
pub fn integrate(f: &ScalarField, mask: Option<&[bool]>) -> f64 {
    let g = f.grid();
    f.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(i, v)| v * g.trapezoid_weight(i))
        .sum()
}

/// Discrete weighted norm `||(v, p)||^2_{X_s}` split by term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    pub xs_norm_sq: f64,
    /// `s^-2 |dt v|^2`
    pub dt_v: f64,
    /// `s^-2 sum_ij |d_i d_j v|^2`
    pub hess_v: f64,
    /// `|grad v|^2`
    pub grad_v: f64,
    /// `s^2 |v|^2`
    pub v: f64,
    /// `s^-1 |grad p|^2`
    pub grad_p: f64,
    /// `s |p|^2`
    pub p: f64,
}

/// Carleman-weighted norm with weight `exp(2 s phi)` over the masked nodes.
pub fn xs_norm(
    v: &VectorField,
    p: &ScalarField,
    s: f64,
    phi: &ScalarField,
    mask: Option<&[bool]>,
) -> Result<WeightedNormReport> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams(format!("s must be positive, got {s}")));
    }
    let g: SpaceTimeGrid = *v.grid();
    v.check_shape(&g, 2)?;
    p.check_grid(&g)?;
    phi.check_grid(&g)?;
    if let Some(m) = mask {
        if m.len() != g.n_nodes() {
            return Err(Error::Shape("mask length differs from node count".into()));
        }
    }
    let n = g.n_nodes();
    let mut dt_v = vec![0.0; n];
    let mut hess_v = vec![0.0; n];
    let mut grad_v = vec![0.0; n];
    let mut val_v = vec![0.0; n];
    for vk in v.components() {
        let t = dt(vk);
        let gx = dx(vk);
        let gy = dy(vk);
        let hxx = derivative(vk, Axis::X, 2);
        let hyy = derivative(vk, Axis::Y, 2);
        let hxy = hessian_entry(vk, Axis::X, Axis::Y);
        for i in 0..n {
            dt_v[i] += t.values()[i].powi(2);
            hess_v[i] +=
                hxx.values()[i].powi(2) + hyy.values()[i].powi(2) + 2.0 * hxy.values()[i].powi(2);
            grad_v[i] += gx.values()[i].powi(2) + gy.values()[i].powi(2);
            val_v[i] += vk.values()[i].powi(2);
        }
    }
    let px = dx(p);
    let py = dy(p);
    let mut rep = WeightedNormReport::default();
    for i in 0..n {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        let w = g.trapezoid_weight(i) * (2.0 * s * phi.values()[i]).exp();
        rep.dt_v += w * dt_v[i] / (s * s);
        rep.hess_v += w * hess_v[i] / (s * s);
        rep.grad_v += w * grad_v[i];
        rep.v += w * s * s * val_v[i];
        rep.grad_p += w * (px.values()[i].powi(2) + py.values()[i].powi(2)) / s;
        rep.p += w * s * p.values()[i].powi(2);
    }
    rep.xs_norm_sq = rep.dt_v + rep.hess_v + rep.grad_v + rep.v + rep.grad_p + rep.p;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_state_has_zero_norm() {
        let g = SpaceTimeGrid::unit(5, 5, 5).unwrap();
        let r = xs_norm(
            &VectorField::zeros(g, 2),
            &ScalarField::zeros(g),
            2.0,
            &ScalarField::zeros(g),
            None,
        )
        .unwrap();
        assert_eq!(r.xs_norm_sq, 0.0);
    }

    #[test]
    fn unit_pressure_on_unit_cylinder() {
        let g = SpaceTimeGrid::unit(6, 7, 5).unwrap();
        let r = xs_norm(
            &VectorField::zeros(g, 2),
            &ScalarField::constant(g, 1.0),
            1.0,
            &ScalarField::zeros(g),
            None,
        )
        .unwrap();
        assert!((r.xs_norm_sq - 1.0).abs() < 1e-12);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pressure_term_scales_with_s_and_weight() {
        let g = SpaceTimeGrid::unit(5, 5, 5).unwrap();
        let phi = ScalarField::constant(g, 0.3);
        let z = VectorField::zeros(g, 2);
        let p = ScalarField::constant(g, 2.0);
        let r1 = xs_norm(&z, &p, 1.0, &phi, None).unwrap();
        let r2 = xs_norm(&z, &p, 2.0, &phi, None).unwrap();
        let expected = 2.0 * (2.0 * 2.0 * 0.3_f64).exp() / (2.0 * 0.3_f64).exp();
        assert!((r2.p / r1.p - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_s() {
        let g = SpaceTimeGrid::unit(3, 3, 3).unwrap();
        let z = VectorField::zeros(g, 2);
        let p = ScalarField::zeros(g);
        assert!(xs_norm(&z, &p, 0.0, &p, None).is_err());
    }

    #[test]
    fn mask_restricts_integration() {
        let g = SpaceTimeGrid::unit(5, 5, 5).unwrap();
        let f = ScalarField::constant(g, 1.0);
        let mask = vec![false; g.n_nodes()];
        assert_eq!(integrate(&f, Some(&mask)), 0.0);
        assert!((integrate(&f, None) - 1.0).abs() < 1e-12);
    }
}
