use std::f64::consts::PI;

use super::analytic::{Basis1, Separable};
use crate::error::{Error, Result};
use crate::fields::{Axis, FlowState, ScalarField, SpaceTimeGrid, VectorField};

/// Built-in manufactured solution families.
pub const PROBLEM_IDS: [&str; 6] = ["zero", "shear", "taylor", "taylor-lin", "oseen", "poly"];

/// Coefficients and data of the linearized system on one grid.
///
/// `boundary_velocity` holds the exact velocity at every node; the solver
/// reads it only on the spatial boundary and at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kappa: f64,
    pub a: VectorField,
    pub b: VectorField,
    pub f: VectorField,
    pub boundary_velocity: VectorField,
}

/// Velocity from a stream function, `v = (d_y zeta, -d_x zeta)`, together
/// with a pressure and the coefficient fields, all in closed form.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub id: String,
    pub kappa: f64,
    v: [Separable; 2],
    vx: [Separable; 2],
    vy: [Separable; 2],
    vt: [Separable; 2],
    lap_v: [Separable; 2],
    p: Separable,
    px: Separable,
    py: Separable,
    a: [Separable; 2],
    b: [Separable; 2],
    bx: [Separable; 2],
    by: [Separable; 2],
}

fn poly(c: &[f64]) -> Basis1 {
    Basis1::Poly(c.to_vec())
}

impl ManufacturedProblem {
    pub fn new(id: &str, kappa: f64, zeta: Separable, p: Separable, a: [Separable; 2], b: [Separable; 2]) -> Self {
        let v = [zeta.d(Axis::Y), zeta.d(Axis::X).scale(-1.0)];
        let d = |f: &Separable, ax: Axis| f.d(ax);
        let vx = [d(&v[0], Axis::X), d(&v[1], Axis::X)];
        let vy = [d(&v[0], Axis::Y), d(&v[1], Axis::Y)];
        let vt = [d(&v[0], Axis::T), d(&v[1], Axis::T)];
        let lap = |k: usize| d(&vx[k], Axis::X).plus(&d(&vy[k], Axis::Y));
        let lap_v = [lap(0), lap(1)];
        Self {
            id: id.to_string(),
            kappa,
            px: p.d(Axis::X),
            py: p.d(Axis::Y),
            p,
            bx: [b[0].d(Axis::X), b[1].d(Axis::X)],
            by: [b[0].d(Axis::Y), b[1].d(Axis::Y)],
            a,
            b,
            v,
            vx,
            vy,
            vt,
            lap_v,
        }
    }

    /// Look up a built-in family by id.
    pub fn builtin(id: &str, kappa: f64) -> Result<Self> {
        let one = Basis1::one;
        let z = Separable::zero;
        let prob = match id {
            "zero" => Self::new(id, kappa, z(), z(), [z(), z()], [z(), z()]),
            "shear" => {
                let zeta = Separable::term(1.0, poly(&[0.0, 1.0]), poly(&[0.0, 1.0]), poly(&[0.0, 1.0]));
                Self::new(id, kappa, zeta, z(), [z(), z()], [z(), z()])
            }
            "taylor" | "taylor-lin" => {
                let time = if id == "taylor" { Basis1::exp(-1.0) } else { poly(&[1.0, 1.0]) };
                let zeta = Separable::term(1.0, Basis1::sin(PI), Basis1::sin(PI), time.clone());
                let p = Separable::term(1.0, Basis1::cos(PI), Basis1::cos(PI), time);
                Self::new(id, kappa, zeta, p, [z(), z()], [z(), z()])
            }
            "oseen" => {
                let zeta = Separable::term(1.0, Basis1::sin(PI), Basis1::sin(PI), Basis1::exp(-1.0)).plus(
                    &Separable::term(0.3, Basis1::cos(1.5), Basis1::exp(0.8), poly(&[1.0, 0.5])),
                );
                let p = Separable::term(1.0, Basis1::cos(PI), Basis1::cos(PI), Basis1::exp(-1.0))
                    .plus(&Separable::term(0.5, poly(&[0.0, 1.0]), poly(&[0.0, 1.0]), one()));
                let a = [
                    Separable::term(1.0, one(), poly(&[0.5, 0.25]), one()),
                    Separable::term(0.2, Basis1::sin(PI), one(), poly(&[1.0, 1.0])),
                ];
                let b = [
                    Separable::term(0.3, poly(&[0.0, 1.0]), poly(&[0.0, 1.0]), one()),
                    Separable::term(-0.2, poly(&[0.0, 0.0, 1.0]), one(), one())
                        .plus(&Separable::term(0.1, one(), poly(&[0.0, 1.0]), one())),
                ];
                Self::new(id, kappa, zeta, p, a, b)
            }
            "poly" => {
                let zeta = Separable::term(1.0, poly(&[0.0, 0.0, 1.0]), poly(&[0.0, 1.0]), poly(&[1.0, 1.0]))
                    .plus(&Separable::term(0.5, poly(&[0.0, 1.0]), poly(&[0.0, 0.0, 1.0]), poly(&[1.0, 1.0])));
                let p = Separable::term(1.0, poly(&[0.0, 1.0]), one(), one())
                    .plus(&Separable::term(-2.0, one(), poly(&[0.0, 1.0]), one()));
                let a = [
                    Separable::term(1.0, one(), poly(&[1.0, 1.0]), one()),
                    Separable::term(1.0, poly(&[0.0, 1.0]), one(), one()),
                ];
                let b = [
                    Separable::term(1.0, one(), poly(&[0.0, 1.0]), one()),
                    Separable::term(1.0, poly(&[0.0, 1.0]), one(), one()),
                ];
                Self::new(id, kappa, zeta, p, a, b)
            }
            other => return Err(Error::UnknownProblem(other.to_string())),
        };
        Ok(prob)
    }

    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.v[0].eval(x, y, t), self.v[1].eval(x, y, t)]
    }

    /// `grad[k][j] = d_j v_k`.
    pub fn velocity_gradient(&self, x: f64, y: f64, t: f64) -> [[f64; 2]; 2] {
        std::array::from_fn(|k| [self.vx[k].eval(x, y, t), self.vy[k].eval(x, y, t)])
    }

    pub fn dt_velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.vt[0].eval(x, y, t), self.vt[1].eval(x, y, t)]
    }

    pub fn pressure(&self, x: f64, y: f64, t: f64) -> f64 {
        self.p.eval(x, y, t)
    }

    pub fn pressure_gradient(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.px.eval(x, y, t), self.py.eval(x, y, t)]
    }

    pub fn coefficient_a(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.a[0].eval(x, y, t), self.a[1].eval(x, y, t)]
    }

    pub fn coefficient_b(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [self.b[0].eval(x, y, t), self.b[1].eval(x, y, t)]
    }

    /// `dt v - kappa Lap v + (A.grad)v + (v.grad)B + grad p`.
    pub fn forcing(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let v = self.velocity(x, y, t);
        let a = self.coefficient_a(x, y, t);
        let gp = self.pressure_gradient(x, y, t);
        std::array::from_fn(|k| {
            self.vt[k].eval(x, y, t) - self.kappa * self.lap_v[k].eval(x, y, t)
                + a[0] * self.vx[k].eval(x, y, t)
                + a[1] * self.vy[k].eval(x, y, t)
                + v[0] * self.bx[k].eval(x, y, t)
                + v[1] * self.by[k].eval(x, y, t)
                + gp[k]
        })
    }

    pub fn sample_state(&self, grid: &SpaceTimeGrid) -> FlowState {
        FlowState {
            v: VectorField::from_fn2(*grid, |x, y, t| self.velocity(x, y, t)),
            p: ScalarField::from_fn(*grid, |x, y, t| self.pressure(x, y, t)),
        }
    }

    pub fn spec(&self, grid: &SpaceTimeGrid) -> ProblemSpec {
        ProblemSpec {
            kappa: self.kappa,
            a: VectorField::from_fn2(*grid, |x, y, t| self.coefficient_a(x, y, t)),
            b: VectorField::from_fn2(*grid, |x, y, t| self.coefficient_b(x, y, t)),
            f: VectorField::from_fn2(*grid, |x, y, t| self.forcing(x, y, t)),
            boundary_velocity: VectorField::from_fn2(*grid, |x, y, t| self.velocity(x, y, t)),
        }
    }
}

/// Exact state and problem data for a built-in family sampled on `grid`.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub problem: ManufacturedProblem,
    pub truth: FlowState,
    pub spec: ProblemSpec,
}

pub fn manufactured_solution(id: &str, grid: &SpaceTimeGrid, kappa: f64) -> Result<Manufactured> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParams(format!("kappa must be positive, got {kappa}")));
    }
    let problem = ManufacturedProblem::builtin(id, kappa)?;
    Ok(Manufactured {
        truth: problem.sample_state(grid),
        spec: problem.spec(grid),
        problem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{div, ns_residual};

    #[test]
    fn zero_family_is_zero() {
        let g = SpaceTimeGrid::unit(5, 5, 5).unwrap();
        let m = manufactured_solution("zero", &g, 0.1).unwrap();
        assert_eq!(m.truth.v.sup_norm(), 0.0);
        assert_eq!(m.spec.f.sup_norm(), 0.0);
    }

    #[test]
    fn shear_forcing_by_hand() {
        let p = ManufacturedProblem::builtin("shear", 0.3).unwrap();
        let (x, y, t) = (0.4, 0.7, 0.2);
        assert_eq!(p.velocity(x, y, t), [x * t, -y * t]);
        let f = p.forcing(x, y, t);
        assert!((f[0] - x).abs() < 1e-15 && (f[1] + y).abs() < 1e-15);
    }

    #[test]
    fn unknown_id_fails() {
        assert!(matches!(
            ManufacturedProblem::builtin("nope", 0.1),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn families_are_divergence_free_and_consistent() {
        for id in PROBLEM_IDS {
            let err = |n: usize| {
                let g = SpaceTimeGrid::unit(n, n, n).unwrap();
                let m = manufactured_solution(id, &g, 0.1).unwrap();
                let r = ns_residual(&m.truth.v, &m.truth.p, &m.spec.a, &m.spec.b, &m.spec.f, 0.1).unwrap();
                (r.sup_norm(), div(&m.truth.v).sup_norm())
            };
            let (r1, d1) = err(17);
            let (r2, d2) = err(33);
            assert!(r2 <= r1 / 3.5 || r2 < 1e-10, "{id}: {r1} {r2}");
            assert!(d2 <= d1 / 3.5 || d2 < 1e-10, "{id}: {d1} {d2}");
        }
    }
}
