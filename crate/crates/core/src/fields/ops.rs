//! Discrete calculus on space-time fields and the operator of the
//! linearized momentum equation.

use rayon::prelude::*;

use super::field::{ScalarField, VectorField};
use super::grid::Axis;
#[cfg(test)]
use super::grid::SpaceTimeGrid;
use super::stencil;
use crate::error::Result;

/// Derivative of `order` 1 or 2 along `axis`.
pub fn derivative(f: &ScalarField, axis: Axis, order: u8) -> ScalarField {
    if order == 1 {
        apply_along(f, axis, stencil::first)
    } else {
        apply_along(f, axis, stencil::second)
    }
}

/// Fourth-order first derivative along `axis` (needs 5 nodes on that axis).
pub fn derivative_fourth_order(f: &ScalarField, axis: Axis) -> ScalarField {
    apply_along(f, axis, stencil::first_fourth_order)
}

fn apply_along(
    f: &ScalarField,
    axis: Axis,
    pick: impl Fn(usize, usize, f64) -> stencil::Stencil + Sync,
) -> ScalarField {
    let g = *f.grid();
    let n = g.count(axis);
    let h = g.step(axis);
    let stride = g.stride(axis);
    let vals = f.values();
    let mut out = vec![0.0; g.n_nodes()];
    out.par_chunks_mut(g.n_space())
        .enumerate()
        .for_each(|(it, level)| {
            let base = it * g.n_space();
            for (k, o) in level.iter_mut().enumerate() {
                let idx = base + k;
                *o = pick(g.axis_index(idx, axis), n, h).apply(vals, idx, stride);
            }
        });
    ScalarField::from_raw(g, out)
}

pub fn dx(f: &ScalarField) -> ScalarField {
    derivative(f, Axis::X, 1)
}

pub fn dy(f: &ScalarField) -> ScalarField {
    derivative(f, Axis::Y, 1)
}

/// Time derivative.
pub fn dt(f: &ScalarField) -> ScalarField {
    derivative(f, Axis::T, 1)
}

/// Spatial gradient `(d1 f, d2 f)`.
pub fn grad(f: &ScalarField) -> VectorField {
    VectorField::from_components(vec![dx(f), dy(f)]).expect("same grid")
}

/// `d1 v1 + d2 v2`.
pub fn div(v: &VectorField) -> ScalarField {
    &dx(v.component(0)) + &dy(v.component(1))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    &derivative(f, Axis::X, 2) + &derivative(f, Axis::Y, 2)
}

pub fn vector_laplacian(v: &VectorField) -> VectorField {
    v.map_components(laplacian)
}

/// `(A . grad) v`, componentwise `sum_j A_j d_j v_k`.
pub fn apply_advection(a: &VectorField, v: &VectorField) -> Result<VectorField> {
    let g = *v.grid();
    a.check_shape(&g, 2)?;
    Ok(v.map_components(|vk| {
        &a.component(0).hadamard(&dx(vk)) + &a.component(1).hadamard(&dy(vk))
    }))
}

/// `(v . grad) B`, componentwise `sum_j v_j d_j B_k`.
pub fn apply_reaction(v: &VectorField, b: &VectorField) -> Result<VectorField> {
    let g = *v.grid();
    b.check_shape(&g, 2)?;
    v.check_shape(&g, 2)?;
    Ok(b.map_components(|bk| {
        &v.component(0).hadamard(&dx(bk)) + &v.component(1).hadamard(&dy(bk))
    }))
}

/// Pointwise residual `dt v - kappa Lap v + (A.grad)v + (v.grad)B + grad p - F`.
pub fn ns_residual(
    v: &VectorField,
    p: &ScalarField,
    a: &VectorField,
    b: &VectorField,
    f: &VectorField,
    kappa: f64,
) -> Result<VectorField> {
    let g = *v.grid();
    v.check_shape(&g, 2)?;
    p.check_grid(&g)?;
    f.check_shape(&g, 2)?;
    let adv = apply_advection(a, v)?;
    let react = apply_reaction(v, b)?;
    let gp = grad(p);
    let comps = (0..2)
        .map(|k| {
            let vk = v.component(k);
            let mut r = dt(vk);
            let lap = laplacian(vk);
            let out = r.values_mut();
            for (i, o) in out.iter_mut().enumerate() {
                *o += -kappa * lap.values()[i]
                    + adv.component(k).values()[i]
                    + react.component(k).values()[i]
                    + gp.component(k).values()[i]
                    - f.component(k).values()[i];
            }
            r
        })
        .collect();
    VectorField::from_components(comps)
}

/// Mixed second derivative `d_i d_j f` by composing first derivatives,
/// except on the diagonal where the three-point formula is used.
pub fn hessian_entry(f: &ScalarField, i: Axis, j: Axis) -> ScalarField {
    if i == j {
        derivative(f, i, 2)
    } else {
        derivative(&derivative(f, i, 1), j, 1)
    }
}

/// Nodewise Euclidean inner product `sum_k u_k w_k` of two vector fields.
pub fn dot(u: &VectorField, w: &VectorField) -> ScalarField {
    let g = *u.grid();
    let mut out = ScalarField::zeros(g);
    for k in 0..u.n_components() {
        let prod = u.component(k).hadamard(w.component(k));
        out = &out + &prod;
    }
    out
}
