use super::problems::ProblemSpec;
use crate::error::{Error, Result};
use crate::fields::stencil::{self, Stencil};
use crate::fields::{derivative, div, grad, trapezoid_1d, Axis, FlowState, ScalarField, SpaceTimeGrid, VectorField};
use crate::linalg::{pcgnr, CgSettings, EnvelopeCholesky, Preconditioner, RowBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardSettings {
    /// Weight of the `alpha_p * p = 0` rows that pin the pressure gauge.
    pub alpha_p: f64,
    pub cg: CgSettings,
}

impl Default for ForwardSettings {
    fn default() -> Self {
        Self {
            alpha_p: 1e-8,
            cg: CgSettings {
                tol: 1e-10,
                max_iter: 20_000,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardReport {
    pub state: FlowState,
    /// CG iterations per time step (step 0 is the initial state).
    pub iterations: Vec<usize>,
    /// `(||div v||, ||grad v||)` per time level, discrete L2 over space.
    pub mass: Vec<(f64, f64)>,
}

/// Backward-Euler solve with default settings.
pub fn solve_forward(spec: &ProblemSpec, grid: &SpaceTimeGrid) -> Result<FlowState> {
    Ok(solve_forward_with(spec, grid, ForwardSettings::default())?.state)
}

/// Backward Euler in time. Each step is one least-squares solve over the
/// interior velocities and all pressures: momentum and continuity rows at
/// every spatial node (one-sided stencils on the boundary, which also
/// removes the checkerboard pressure modes of the collocated grid) and weak
/// pressure pinning rows.
/// Velocity on the spatial boundary and at `t = 0` is taken from
/// `spec.boundary_velocity`.
pub fn solve_forward_with(spec: &ProblemSpec, grid: &SpaceTimeGrid, settings: ForwardSettings) -> Result<ForwardReport> {
    for (name, f) in [
        ("a", &spec.a),
        ("b", &spec.b),
        ("f", &spec.f),
        ("boundary_velocity", &spec.boundary_velocity),
    ] {
        if f.grid() != grid || f.n_components() != 2 {
            return Err(Error::Shape(format!("problem field `{name}` does not match the grid")));
        }
    }
    if !(spec.kappa > 0.0) {
        return Err(Error::InvalidParams(format!("kappa must be positive, got {}", spec.kappa)));
    }
    let (nx, ny, nt) = (grid.nx(), grid.ny(), grid.nt());
    let ns = grid.n_space();
    let layout = Layout { nx, ny };
    let db: [[ScalarField; 2]; 2] = std::array::from_fn(|k| {
        [
            derivative(spec.b.component(k), Axis::X, 1),
            derivative(spec.b.component(k), Axis::Y, 1),
        ]
    });

    let mut v = [vec![0.0; grid.n_nodes()], vec![0.0; grid.n_nodes()]];
    for (k, vk) in v.iter_mut().enumerate() {
        vk.copy_from_slice(spec.boundary_velocity.component(k).values());
    }
    let mut p = vec![0.0; grid.n_nodes()];
    let mut iterations = vec![0];
    let mut x_prev: Option<Vec<f64>> = None;

    for it in 1..nt {
        let base = it * ns;
        let mut rows = RowBuilder::new(layout.n_unknowns());
        let known = |k: usize, ix: usize, iy: usize| v[k][base + iy * nx + ix];
        let prev = |k: usize, ix: usize, iy: usize| v[k][base - ns + iy * nx + ix];
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(16);

        for iy in 0..ny {
            for ix in 0..nx {
                let node = base + iy * nx + ix;
                let ax = spec.a.component(0).values()[node];
                let ay = spec.a.component(1).values()[node];
                for k in 0..2 {
                    entries.clear();
                    let mut rhs = spec.f.component(k).values()[node] + prev(k, ix, iy) / grid.dt();
                    let mut add_v = |entries: &mut Vec<(usize, f64)>, c: usize, jx: usize, jy: usize, w: f64| {
                        match layout.velocity(c, jx, jy) {
                            Some(col) => push_merge(entries, col, w),
                            None => rhs -= w * known(c, jx, jy),
                        }
                    };
                    add_v(&mut entries, k, ix, iy, 1.0 / grid.dt());
                    let lap_x = stencil::second(ix, nx, grid.hx());
                    let lap_y = stencil::second(iy, ny, grid.hy());
                    let d_x = stencil::first(ix, nx, grid.hx());
                    let d_y = stencil::first(iy, ny, grid.hy());
                    for (o, c) in lap_x.taps() {
                        add_v(&mut entries, k, shift(ix, o), iy, -spec.kappa * c);
                    }
                    for (o, c) in lap_y.taps() {
                        add_v(&mut entries, k, ix, shift(iy, o), -spec.kappa * c);
                    }
                    for (o, c) in d_x.taps() {
                        add_v(&mut entries, k, shift(ix, o), iy, ax * c);
                    }
                    for (o, c) in d_y.taps() {
                        add_v(&mut entries, k, ix, shift(iy, o), ay * c);
                    }
                    for (j, dbj) in db[k].iter().enumerate() {
                        add_v(&mut entries, j, ix, iy, dbj.values()[node]);
                    }
                    let (dp, along_x) = if k == 0 { (d_x, true) } else { (d_y, false) };
                    for (o, c) in dp.taps() {
                        let (jx, jy) = if along_x { (shift(ix, o), iy) } else { (ix, shift(iy, o)) };
                        push_merge(&mut entries, layout.pressure(jx, jy), c);
                    }
                    rows.push(&entries, rhs);
                }
            }
        }

        for iy in 0..ny {
            for ix in 0..nx {
                entries.clear();
                let mut rhs = 0.0;
                let mut add = |c: usize, st: Stencil, along_x: bool| {
                    for (o, w) in st.taps() {
                        let (jx, jy) = if along_x { (shift(ix, o), iy) } else { (ix, shift(iy, o)) };
                        match layout.velocity(c, jx, jy) {
                            Some(col) => push_merge(&mut entries, col, w),
                            None => rhs -= w * known(c, jx, jy),
                        }
                    }
                };
                add(0, stencil::first(ix, nx, grid.hx()), true);
                add(1, stencil::first(iy, ny, grid.hy()), false);
                rows.push(&entries, rhs);
            }
        }

        if settings.alpha_p > 0.0 {
            for iy in 0..ny {
                for ix in 0..nx {
                    rows.push(&[(layout.pressure(ix, iy), settings.alpha_p)], 0.0);
                }
            }
        }

        let ls = rows.finish();
        let x0 = match &x_prev {
            Some(x) => x.clone(),
            None => {
                let mut x = vec![0.0; layout.n_unknowns()];
                for k in 0..2 {
                    for iy in 1..ny - 1 {
                        for ix in 1..nx - 1 {
                            x[layout.velocity(k, ix, iy).unwrap()] = prev(k, ix, iy);
                        }
                    }
                }
                x
            }
        };
        let mut order = Vec::with_capacity(layout.n_unknowns());
        for iy in 0..ny {
            for ix in 0..nx {
                order.extend((0..2).filter_map(|k| layout.velocity(k, ix, iy)));
                order.push(layout.pressure(ix, iy));
            }
        }
        let pc = match EnvelopeCholesky::normal_shifted(&ls, &order, 1e-12) {
            Ok(c) => Preconditioner::Cholesky(c),
            Err(e) => {
                log::debug!("step {it}: Jacobi preconditioner ({e})");
                Preconditioner::jacobi(&ls)
            }
        };
        let out = pcgnr(&ls, Some(&x0), settings.cg, &pc)?;
        iterations.push(out.iterations);
        for k in 0..2 {
            for iy in 1..ny - 1 {
                for ix in 1..nx - 1 {
                    v[k][base + iy * nx + ix] = out.x[layout.velocity(k, ix, iy).unwrap()];
                }
            }
        }
        for iy in 0..ny {
            for ix in 0..nx {
                p[base + iy * nx + ix] = out.x[layout.pressure(ix, iy)];
            }
        }
        x_prev = Some(out.x);
    }

    // The pressure has no equation at t = 0; extrapolate linearly.
    if nt >= 3 {
        for i in 0..ns {
            p[i] = 2.0 * p[ns + i] - p[2 * ns + i];
        }
    }

    let [v1, v2] = v;
    let state = FlowState {
        v: VectorField::from_components(vec![
            ScalarField::from_values(*grid, v1)?,
            ScalarField::from_values(*grid, v2)?,
        ])?,
        p: ScalarField::from_values(*grid, p)?,
    };
    let mass = mass_balance(&state.v);
    Ok(ForwardReport {
        state,
        iterations,
        mass,
    })
}

/// `(||div v||, ||grad v||)` per time level in the discrete spatial L2 norm.
pub fn mass_balance(v: &VectorField) -> Vec<(f64, f64)> {
    let g = *v.grid();
    let d = div(v);
    let gr: Vec<VectorField> = v.components().iter().map(grad).collect();
    let w: Vec<f64> = (0..g.n_space())
        .map(|i| trapezoid_1d(i % g.nx(), g.nx(), g.hx()) * trapezoid_1d(i / g.nx(), g.ny(), g.hy()))
        .collect();
    (0..g.nt())
        .map(|it| {
            let base = it * g.n_space();
            let mut dd = 0.0;
            let mut gg = 0.0;
            for (i, wi) in w.iter().enumerate() {
                dd += wi * d.values()[base + i].powi(2);
                for gk in &gr {
                    for c in gk.components() {
                        gg += wi * c.values()[base + i].powi(2);
                    }
                }
            }
            (dd.sqrt(), gg.sqrt())
        })
        .collect()
}

fn shift(i: usize, o: isize) -> usize {
    (i as isize + o) as usize
}

fn push_merge(entries: &mut Vec<(usize, f64)>, col: usize, w: f64) {
    match entries.iter_mut().find(|(c, _)| *c == col) {
        Some(e) => e.1 += w,
        None => entries.push((col, w)),
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    nx: usize,
    ny: usize,
}

impl Layout {
    fn n_interior(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    fn n_unknowns(&self) -> usize {
        2 * self.n_interior() + self.nx * self.ny
    }

    fn velocity(&self, k: usize, ix: usize, iy: usize) -> Option<usize> {
        if ix == 0 || iy == 0 || ix + 1 == self.nx || iy + 1 == self.ny {
            return None;
        }
        Some(k * self.n_interior() + (iy - 1) * (self.nx - 2) + ix - 1)
    }

    fn pressure(&self, ix: usize, iy: usize) -> usize {
        2 * self.n_interior() + iy * self.nx + ix
    }
}
