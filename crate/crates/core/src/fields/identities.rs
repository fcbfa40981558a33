//! Discrete forms of the divergence identity for the advection term and of
//! the pressure Poisson equation obtained by taking the divergence of the
//! momentum equation. Both are used as validation oracles: on consistent
//! smooth data the residuals vanish at the truncation order of the stencils.

use super::field::{ScalarField, VectorField};
use super::grid::Axis;
use super::ops::{derivative, derivative_fourth_order, div, dt, grad, laplacian};
use crate::error::{Error, Result};

const AXES: [Axis; 2] = [Axis::X, Axis::Y];

/// Accuracy of the first-derivative stencil used inside the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accuracy {
    /// The crate-wide three-point formulas.
    #[default]
    Second,
    /// Five-point formulas, exact on quartics, so the identity holds to
    /// rounding for any pair of quadratic `A`, `v`.
    Fourth,
}

fn d1(f: &ScalarField, axis: Axis, acc: Accuracy) -> ScalarField {
    match acc {
        Accuracy::Second => derivative(f, axis, 1),
        Accuracy::Fourth => derivative_fourth_order(f, axis),
    }
}

/// `sum_{j,k} { d_j((d_k A_j) v_k) - (d_j d_k A_j) v_k }`.
fn coefficient_commutator(a: &VectorField, v: &VectorField, acc: Accuracy) -> ScalarField {
    let g = *v.grid();
    let mut out = ScalarField::zeros(g);
    for (j, &aj_axis) in AXES.iter().enumerate() {
        let aj = a.component(j);
        for (k, &ak_axis) in AXES.iter().enumerate() {
            let dk_aj = d1(aj, ak_axis, acc);
            let vk = v.component(k);
            let flux = d1(&dk_aj.hadamard(vk), aj_axis, acc);
            let second = d1(&dk_aj, aj_axis, acc).hadamard(vk);
            out = &out + &(&flux - &second);
        }
    }
    out
}

/// Discrete `div((A.grad)v) - [A.grad(div v) + sum_{j,k}{...}]` with the
/// crate's second-order stencils.
pub fn divergence_identity_residual(a: &VectorField, v: &VectorField) -> Result<ScalarField> {
    divergence_identity_residual_with(a, v, Accuracy::Second)
}

pub fn divergence_identity_residual_with(
    a: &VectorField,
    v: &VectorField,
    acc: Accuracy,
) -> Result<ScalarField> {
    let g = *v.grid();
    a.check_shape(&g, 2)?;
    v.check_shape(&g, 2)?;
    if acc == Accuracy::Fourth && (g.nx() < 5 || g.ny() < 5) {
        return Err(Error::InvalidParams(
            "fourth-order stencils need 5 nodes per spatial axis".into(),
        ));
    }
    let mut lhs = ScalarField::zeros(g);
    for (k, &k_axis) in AXES.iter().enumerate() {
        let vk = v.component(k);
        let mut adv = ScalarField::zeros(g);
        for (j, &j_axis) in AXES.iter().enumerate() {
            adv = &adv + &a.component(j).hadamard(&d1(vk, j_axis, acc));
        }
        lhs = &lhs + &d1(&adv, k_axis, acc);
    }
    let h = &d1(v.component(0), Axis::X, acc) + &d1(v.component(1), Axis::Y, acc);
    let mut rhs = coefficient_commutator(a, v, acc);
    for (j, &j_axis) in AXES.iter().enumerate() {
        rhs = &rhs + &a.component(j).hadamard(&d1(&h, j_axis, acc));
    }
    Ok(&lhs - &rhs)
}

/// Discrete residual of the pressure Poisson equation
///
/// `Lap p = -sum_{j,k}{...} + div F - dt h - (A.grad)h + kappa div(grad h)`
///
/// for the momentum equation without the `(v.grad)B` term. Both Laplacians
/// use the compact three-point formula; composing two first-derivative
/// stencils would lose an order at the boundary.
pub fn pressure_poisson_residual(
    v: &VectorField,
    p: &ScalarField,
    h: &ScalarField,
    f: &VectorField,
    a: &VectorField,
    kappa: f64,
) -> Result<ScalarField> {
    let g = *v.grid();
    v.check_shape(&g, 2)?;
    f.check_shape(&g, 2)?;
    a.check_shape(&g, 2)?;
    p.check_grid(&g)?;
    h.check_grid(&g)?;
    let lap_p = laplacian(p);
    let gh = grad(h);
    let a_grad_h = &a.component(0).hadamard(gh.component(0)) + &a.component(1).hadamard(gh.component(1));
    let mut rhs = &div(f) - &coefficient_commutator(a, v, Accuracy::Second);
    rhs = &rhs - &dt(h);
    rhs = &rhs - &a_grad_h;
    rhs = &rhs + &laplacian(h).scale(kappa);
    Ok(&lap_p - &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SpaceTimeGrid;

    #[test]
    fn zero_velocity_gives_zero_identity_residual() {
        let g = SpaceTimeGrid::unit(9, 9, 3).unwrap();
        let a = VectorField::from_fn2(g, |x, y, _| [x.sin(), y * y]);
        let v = VectorField::zeros(g, 2);
        assert_eq!(divergence_identity_residual(&a, &v).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn constant_coefficient_commutes() {
        let g = SpaceTimeGrid::unit(17, 17, 3).unwrap();
        let a = VectorField::from_fn2(g, |_, _, _| [0.7, -0.3]);
        let v = VectorField::from_fn2(g, |x, y, _| [(2.0 * x).sin() * y, (x * y).cos()]);
        let r = divergence_identity_residual(&a, &v).unwrap();
        assert!(r.sup_norm() < 1e-1, "{}", r.sup_norm());
    }

    #[test]
    fn gradient_forcing_balances_pressure() {
        let err = |n: usize| {
            let g = SpaceTimeGrid::unit(n, n, 3).unwrap();
            let p = ScalarField::from_fn(g, |x, y, _| (x * y).sin() + x * x);
            let f = VectorField::from_fn2(g, |x, y, _| {
                [y * (x * y).cos() + 2.0 * x, x * (x * y).cos()]
            });
            let z = VectorField::zeros(g, 2);
            let h = ScalarField::zeros(g);
            pressure_poisson_residual(&z, &p, &h, &f, &z, 0.5)
                .unwrap()
                .sup_norm()
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < 2e-2 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn quadratic_pair_exact_with_fourth_order() {
        let g = SpaceTimeGrid::unit(17, 17, 5).unwrap();
        let a = VectorField::from_fn2(g, |x, y, t| [1.0 + x * y - 0.5 * y * y + t, 0.3 * x * x - y]);
        let v = VectorField::from_fn2(g, |x, y, t| [x * x - 2.0 * x * y + t * y, 0.5 * y * y + x]);
        let second = divergence_identity_residual(&a, &v).unwrap().sup_norm();
        let fourth = divergence_identity_residual_with(&a, &v, Accuracy::Fourth)
            .unwrap()
            .sup_norm();
        assert!(fourth < 1e-10, "{fourth}");
        assert!(second > 1e-6);
    }

    #[test]
    fn affine_coefficient_exact_with_second_order() {
        let g = SpaceTimeGrid::unit(9, 9, 3).unwrap();
        let a = VectorField::from_fn2(g, |x, y, _| [1.0 + x - 2.0 * y, 0.5 * x + y]);
        let v = VectorField::from_fn2(g, |x, y, _| [x * x - x * y, y * y + 3.0 * x * y]);
        assert!(divergence_identity_residual(&a, &v).unwrap().sup_norm() < 1e-10);
    }
}
