use serde::{Deserialize, Serialize};

use super::config::InversionConfig;
use crate::error::{Error, Result};
use crate::fields::stencil;
use crate::fields::{div, grad, ns_residual, Axis, FlowState, ScalarField, SpaceTimeGrid};
use crate::forward::{clean_channels, CauchyTrace, ProblemSpec};
use crate::linalg::{pcgnr, EnvelopeCholesky, LeastSquares, Preconditioner, RowBuilder};
use super::config::PreconditionerKind;
use crate::weights::phi_field;

/// Value of the objective split by term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub pde: f64,
    pub div: f64,
    pub data: f64,
    pub reg: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.pde + self.div + self.data + self.reg
    }
}

/// Nodes and weights entering the objective.
#[derive(Debug, Clone)]
pub struct Region {
    /// Nodes carrying PDE and divergence terms.
    pub mask: Vec<bool>,
    /// `mask` and every node its stencils reach. The regularisation acts on
    /// `|grad v|^2 + p^2` in `mask` and on `|v|^2 + p^2` in the halo, so every
    /// unknown the objective touches is anchored.
    pub anchor: Vec<bool>,
    /// `exp(2 s (phi - phi_max))` at every node, `phi_max` taken over `mask`.
    pub carleman: Vec<f64>,
    pub phi_max: f64,
    /// `(it, j)` flags for the Γ samples that enter the misfit.
    pub data_mask: Vec<bool>,
}

/// Region of the objective: `D = {phi > mu_1}` with the cutoff, else all of Q.
///
/// The weight `exp(2 s phi)` is divided by its maximum; this rescales the
/// whole objective by `exp(-2 s phi_max)`, so it only fixes how the misfit
/// and regularisation terms are prefactored relative to the PDE terms.
pub fn region(grid: &SpaceTimeGrid, data: &CauchyTrace, cfg: &InversionConfig) -> Result<Region> {
    let phi = phi_field(&cfg.weight, grid);
    let mask: Vec<bool> = if cfg.use_cutoff {
        let mu1 = cfg.weight.levels()[0];
        phi.values().iter().map(|&p| p > mu1).collect()
    } else {
        vec![true; grid.n_nodes()]
    };
    if !mask.iter().any(|&b| b) {
        return Err(Error::Geometry(format!(
            "objective region is empty (t0 = {})",
            cfg.weight.t0
        )));
    }
    let phi_max = phi
        .values()
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(&p, _)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    let carleman = phi
        .values()
        .iter()
        .map(|&p| (2.0 * cfg.s * (p - phi_max)).exp())
        .collect();
    let mut anchor = mask.clone();
    for i in (0..grid.n_nodes()).filter(|&i| mask[i]) {
        let reach = taps(grid, i, Axis::T, 1)
            .chain(taps(grid, i, Axis::X, 1))
            .chain(taps(grid, i, Axis::X, 2))
            .chain(taps(grid, i, Axis::Y, 1))
            .chain(taps(grid, i, Axis::Y, 2));
        for (j, _) in reach {
            anchor[j] = true;
        }
    }
    let n = data.nodes.len();
    let data_mask = (0..grid.nt() * n)
        .map(|k| {
            let (ix, iy) = data.nodes[k % n];
            mask[grid.index(ix, iy, k / n)]
        })
        .collect();
    Ok(Region {
        mask,
        anchor,
        carleman,
        phi_max,
        data_mask,
    })
}

/// The assembled least-squares problem `min |K x - b|^2` over the stacked
/// state `[v1, v2, p]`.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// Operator over the referenced unknowns only.
    pub ls: LeastSquares,
    /// Index into the full `[v1, v2, p]` vector of each operator column.
    pub columns: Vec<usize>,
    pub n_full: usize,
    pub region: Region,
    /// Row ranges of the pde, div, data and regularisation blocks.
    pub blocks: [std::ops::Range<usize>; 4],
}

impl Assembly {
    /// Restrict a full state vector to the operator columns.
    pub fn compress(&self, full: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|&j| full[j]).collect()
    }

    /// Scatter operator columns into a full state vector (zeros elsewhere).
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_full];
        for (&j, &v) in self.columns.iter().zip(x) {
            out[j] = v;
        }
        out
    }

    /// Term-by-term objective at a full state vector.
    pub fn breakdown(&self, full: &[f64]) -> ObjectiveBreakdown {
        let r = self.ls.residual(&self.compress(full));
        let sum = |k: usize| r[self.blocks[k].clone()].iter().map(|v| v * v).sum::<f64>();
        ObjectiveBreakdown {
            pde: sum(0),
            div: sum(1),
            data: sum(2),
            reg: sum(3),
        }
    }
}

fn taps(grid: &SpaceTimeGrid, idx: usize, axis: Axis, order: u8) -> impl Iterator<Item = (usize, f64)> {
    let n = grid.count(axis);
    let h = grid.step(axis);
    let i = grid.axis_index(idx, axis);
    let st = if order == 1 {
        stencil::first(i, n, h)
    } else {
        stencil::second(i, n, h)
    };
    let stride = grid.stride(axis) as isize;
    let taps: Vec<(usize, f64)> = st
        .taps()
        .map(|(o, c)| ((idx as isize + o * stride) as usize, c))
        .collect();
    taps.into_iter()
}

fn check_inputs(problem: &ProblemSpec, data: &CauchyTrace) -> Result<SpaceTimeGrid> {
    let grid = data.grid;
    for (name, f) in [("a", &problem.a), ("b", &problem.b), ("f", &problem.f)] {
        if *f.grid() != grid || f.n_components() != 2 {
            return Err(Error::Shape(format!("problem field `{name}` does not match the data grid")));
        }
    }
    Ok(grid)
}

/// Assemble the weighted rows of every term.
pub fn assemble(problem: &ProblemSpec, data: &CauchyTrace, cfg: &InversionConfig) -> Result<Assembly> {
    cfg.validate()?;
    let grid = check_inputs(problem, data)?;
    let reg = region(&grid, data, cfg)?;
    let nn = grid.n_nodes();
    let col = |c: usize, node: usize| c * nn + node;
    let kappa = problem.kappa;
    let db: [[ScalarField; 2]; 2] = std::array::from_fn(|k| {
        let g = grad(problem.b.component(k));
        let [x, y]: [ScalarField; 2] = g.into_components().try_into().expect("two components");
        [x, y]
    });
    let mut rows = RowBuilder::new(3 * nn);
    let mut e: Vec<(usize, f64)> = Vec::with_capacity(24);
    let mut blocks: [std::ops::Range<usize>; 4] = Default::default();

    let start = rows.n_rows();
    for i in (0..nn).filter(|&i| reg.mask[i]) {
        let w = (cfg.w_pde * reg.carleman[i] * grid.trapezoid_weight(i)).sqrt();
        if w == 0.0 {
            continue;
        }
        let ax = problem.a.component(0).values()[i];
        let ay = problem.a.component(1).values()[i];
        for k in 0..2 {
            e.clear();
            e.extend(taps(&grid, i, Axis::T, 1).map(|(j, c)| (col(k, j), c)));
            e.extend(taps(&grid, i, Axis::X, 2).map(|(j, c)| (col(k, j), -kappa * c)));
            e.extend(taps(&grid, i, Axis::Y, 2).map(|(j, c)| (col(k, j), -kappa * c)));
            e.extend(taps(&grid, i, Axis::X, 1).map(|(j, c)| (col(k, j), ax * c)));
            e.extend(taps(&grid, i, Axis::Y, 1).map(|(j, c)| (col(k, j), ay * c)));
            e.push((col(0, i), db[k][0].values()[i]));
            e.push((col(1, i), db[k][1].values()[i]));
            let axis = if k == 0 { Axis::X } else { Axis::Y };
            e.extend(taps(&grid, i, axis, 1).map(|(j, c)| (col(2, j), c)));
            e.iter_mut().for_each(|t| t.1 *= w);
            rows.push(&e, w * problem.f.component(k).values()[i]);
        }
    }
    blocks[0] = start..rows.n_rows();

    let start = rows.n_rows();
    for i in (0..nn).filter(|&i| reg.mask[i]) {
        let w = (cfg.w_div * reg.carleman[i] * grid.trapezoid_weight(i)).sqrt();
        if w == 0.0 {
            continue;
        }
        e.clear();
        e.extend(taps(&grid, i, Axis::X, 1).map(|(j, c)| (col(0, j), w * c)));
        e.extend(taps(&grid, i, Axis::Y, 1).map(|(j, c)| (col(1, j), w * c)));
        rows.push(&e, 0.0);
    }
    blocks[1] = start..rows.n_rows();

    let start = rows.n_rows();
    let nu = data.normal();
    let n_gamma = data.nodes.len();
    for it in 0..grid.nt() {
        for (jn, &(ix, iy)) in data.nodes.iter().enumerate() {
            let k_flat = it * n_gamma + jn;
            if !reg.data_mask[k_flat] {
                continue;
            }
            let w = (cfg.w_data * data.weight(it, jn)).sqrt();
            if w == 0.0 {
                continue;
            }
            let i = grid.index(ix, iy, it);
            for k in 0..2 {
                rows.push(&[(col(k, i), w)], w * data.values[k][k_flat]);
            }
            for k in 0..2 {
                e.clear();
                e.extend(taps(&grid, i, Axis::T, 1).map(|(j, c)| (col(k, j), w * c)));
                rows.push(&e, w * data.values[2 + k][k_flat]);
            }
            // sigma nu_k = kappa sum_j (d_j v_k + d_k v_j) nu_j - p nu_k
            for k in 0..2 {
                e.clear();
                for (jax, axis) in [Axis::X, Axis::Y].into_iter().enumerate() {
                    if nu[jax] == 0.0 {
                        continue;
                    }
                    e.extend(taps(&grid, i, axis, 1).map(|(j, c)| (col(k, j), w * kappa * nu[jax] * c)));
                }
                let axis_k = if k == 0 { Axis::X } else { Axis::Y };
                for (jax, nuj) in nu.iter().enumerate() {
                    if *nuj == 0.0 {
                        continue;
                    }
                    e.extend(taps(&grid, i, axis_k, 1).map(|(j, c)| (col(jax, j), w * kappa * nuj * c)));
                }
                if nu[k] != 0.0 {
                    e.push((col(2, i), -w * nu[k]));
                }
                rows.push(&e, w * data.values[4 + k][k_flat]);
            }
        }
    }
    blocks[2] = start..rows.n_rows();

    let start = rows.n_rows();
    let alpha = cfg.alpha(&grid);
    if alpha > 0.0 {
        for i in (0..nn).filter(|&i| reg.anchor[i]) {
            let w = (alpha * grid.trapezoid_weight(i)).sqrt();
            if w == 0.0 {
                continue;
            }
            for k in 0..2 {
                if reg.mask[i] {
                    for axis in [Axis::X, Axis::Y] {
                        e.clear();
                        e.extend(taps(&grid, i, axis, 1).map(|(j, c)| (col(k, j), w * c)));
                        rows.push(&e, 0.0);
                    }
                } else {
                    rows.push(&[(col(k, i), w)], 0.0);
                }
            }
            rows.push(&[(col(2, i), w)], 0.0);
        }
    }
    blocks[3] = start..rows.n_rows();

    let (ls, columns) = rows.finish_compressed();
    Ok(Assembly {
        ls,
        columns,
        n_full: 3 * nn,
        region: reg,
        blocks,
    })
}

/// The objective evaluated with the field operators rather than the
/// assembled matrix; both give the same number up to rounding.
pub fn objective(
    state: &FlowState,
    problem: &ProblemSpec,
    data: &CauchyTrace,
    cfg: &InversionConfig,
) -> Result<ObjectiveBreakdown> {
    cfg.validate()?;
    let grid = check_inputs(problem, data)?;
    if *state.grid() != grid {
        return Err(Error::Shape("state grid differs from the data grid".into()));
    }
    let reg = region(&grid, data, cfg)?;
    let res = ns_residual(&state.v, &state.p, &problem.a, &problem.b, &problem.f, problem.kappa)?;
    let dv = div(&state.v);
    let gv: Vec<_> = state.v.components().iter().map(grad).collect();
    let alpha = cfg.alpha(&grid);
    let mut out = ObjectiveBreakdown::default();
    for i in (0..grid.n_nodes()).filter(|&i| reg.anchor[i]) {
        let tw = grid.trapezoid_weight(i);
        if reg.mask[i] {
            let cw = reg.carleman[i] * tw;
            let r2 = res.component(0).values()[i].powi(2) + res.component(1).values()[i].powi(2);
            out.pde += cfg.w_pde * cw * r2;
            out.div += cfg.w_div * cw * dv.values()[i].powi(2);
        }
        let g2: f64 = if reg.mask[i] {
            gv.iter()
                .flat_map(|g| g.components().iter().map(move |c| c.values()[i].powi(2)))
                .sum()
        } else {
            state.v.components().iter().map(|c| c.values()[i].powi(2)).sum()
        };
        out.reg += alpha * tw * (g2 + state.p.values()[i].powi(2));
    }
    let model = clean_channels(state, data.gamma.side, &data.nodes, problem.kappa);
    let n = data.nodes.len();
    for (k, &on) in reg.data_mask.iter().enumerate() {
        if !on {
            continue;
        }
        let w = cfg.w_data * data.weight(k / n, k % n);
        for c in 0..6 {
            out.data += w * (model[c][k] - data.values[c][k]).powi(2);
        }
    }
    Ok(out)
}

/// Output of [`minimize`].
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub state: FlowState,
    pub objective: ObjectiveBreakdown,
    pub iterations: usize,
    pub converged: bool,
    /// Final `|K^T r| / |K^T b|`.
    pub relative_residual: f64,
    pub s: f64,
    pub t0: f64,
}

/// Minimise the objective by preconditioned CG on the normal equations.
pub fn minimize(problem: &ProblemSpec, data: &CauchyTrace, cfg: &InversionConfig) -> Result<ReconstructionResult> {
    minimize_from(problem, data, cfg, None)
}

pub fn minimize_from(
    problem: &ProblemSpec,
    data: &CauchyTrace,
    cfg: &InversionConfig,
    start: Option<&FlowState>,
) -> Result<ReconstructionResult> {
    let asm = assemble(problem, data, cfg)?;
    let x0 = start.map(|s| asm.compress(&s.to_vec()));
    let pc = preconditioner(&asm, cfg.preconditioner);
    let out = pcgnr(&asm.ls, x0.as_deref(), cfg.cg_settings(), &pc)?;
    let full = asm.expand(&out.x);
    let objective = asm.breakdown(&full);
    Ok(ReconstructionResult {
        state: FlowState::from_vec(data.grid, &full)?,
        objective,
        iterations: out.iterations,
        converged: out.converged,
        relative_residual: out.relative_residual(),
        s: cfg.s,
        t0: cfg.weight.t0,
    })
}

/// Columns numbered node by node, time level outermost, so the normal
/// matrix has a narrow envelope.
fn preconditioner(asm: &Assembly, kind: PreconditionerKind) -> Preconditioner {
    match kind {
        PreconditionerKind::Jacobi => Preconditioner::jacobi(&asm.ls),
        PreconditionerKind::Cholesky => {
            let nn = asm.n_full / 3;
            let mut order: Vec<usize> = (0..asm.columns.len()).collect();
            order.sort_by_key(|&k| (asm.columns[k] % nn, asm.columns[k] / nn));
            match EnvelopeCholesky::normal(&asm.ls, &order) {
                Ok(c) => Preconditioner::Cholesky(c),
                Err(e) => {
                    log::warn!("falling back to the Jacobi preconditioner: {e}");
                    Preconditioner::jacobi(&asm.ls)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::VectorField;
    use crate::forward::{extract_cauchy, manufactured_solution};
    use crate::linalg::{dot, CgSettings};
    use crate::weights::{build_weight, BuildOptions, GammaSpec, Rect, Side, WeightParams};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, id: &str, cutoff: bool) -> (ProblemSpec, CauchyTrace, InversionConfig, FlowState) {
        let g = SpaceTimeGrid::unit(n, n, n).unwrap();
        let m = manufactured_solution(id, &g, 0.1).unwrap();
        let gamma = GammaSpec::new(Side::Bottom, 0.25, 0.75);
        let d = build_weight(Rect::domain(1.0, 1.0), gamma, BuildOptions::default()).unwrap();
        let w = WeightParams::new(d, 1.0, WeightParams::auto_beta(d.sup(), 0.15), 0.5, 8, 0.15).unwrap();
        let data = extract_cauchy(&m.truth, &gamma, 0.1, 0.01, 5).unwrap();
        let mut cfg = InversionConfig::new(3.0, w);
        cfg.use_cutoff = cutoff;
        cfg.alpha_reg = Some(1e-3);
        (m.spec, data, cfg, m.truth)
    }

    fn random_state(g: SpaceTimeGrid, seed: u64) -> FlowState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..3 * g.n_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        FlowState::from_vec(g, &x).unwrap()
    }

    #[test]
    fn matrix_and_field_objectives_agree() {
        for cutoff in [false, true] {
            let (pb, data, cfg, truth) = setup(9, "oseen", cutoff);
            let asm = assemble(&pb, &data, &cfg).unwrap();
            for state in [random_state(data.grid, 1), truth.clone()] {
                let a = asm.breakdown(&state.to_vec());
                let b = objective(&state, &pb, &data, &cfg).unwrap();
                for (x, y) in [(a.pde, b.pde), (a.div, b.div), (a.data, b.data), (a.reg, b.reg)] {
                    assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{cutoff}: {x} vs {y}");
                }
                assert!((asm.ls.objective(&asm.compress(&state.to_vec())) - a.total()).abs() <= 1e-12 * a.total());
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (pb, data, cfg, _) = setup(7, "oseen", false);
        let asm = assemble(&pb, &data, &cfg).unwrap();
        let x = asm.compress(&random_state(data.grid, 2).to_vec());
        let grad = asm.ls.gradient(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let d: Vec<f64> = (0..x.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-4;
            let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
            let fd = (asm.ls.objective(&xp) - asm.ls.objective(&xm)) / (2.0 * h);
            let an = dot(&grad, &d);
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} {an}");
        }
    }

    #[test]
    fn cg_matches_dense_normal_equations() {
        let (pb, data, mut cfg, _) = setup(5, "oseen", false);
        cfg.cg_tol = 1e-14;
        cfg.cg_maxit = 20_000;
        let asm = assemble(&pb, &data, &cfg).unwrap();
        let k = asm.ls.matrix().to_dense();
        let kd = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[[i, j]]);
        let b = DVector::from_column_slice(asm.ls.rhs());
        let x_dense = (kd.transpose() * &kd).lu().solve(&(kd.transpose() * b)).unwrap();
        let r = minimize(&pb, &data, &cfg).unwrap();
        let x = asm.compress(&r.state.to_vec());
        let err = x.iter().zip(x_dense.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * x_dense.norm(), "{err}");
    }

    #[test]
    fn convexity_gap_is_quarter_distance() {
        let (pb, data, cfg, _) = setup(7, "oseen", true);
        let asm = assemble(&pb, &data, &cfg).unwrap();
        let u = asm.compress(&random_state(data.grid, 4).to_vec());
        let w = asm.compress(&random_state(data.grid, 5).to_vec());
        let mid: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let kd = asm.ls.apply(&diff);
        let gap = 0.5 * asm.ls.objective(&u) + 0.5 * asm.ls.objective(&w) - asm.ls.objective(&mid);
        let quarter = 0.25 * dot(&kd, &kd);
        assert!(gap >= 0.0);
        assert!((gap - quarter).abs() <= 1e-10 * quarter);
    }

    #[test]
    fn objective_is_linear_in_weights() {
        let (pb, data, mut cfg, _) = setup(7, "oseen", true);
        let st = random_state(data.grid, 6);
        let a = objective(&st, &pb, &data, &cfg).unwrap();
        cfg.w_pde *= 2.0;
        let b = objective(&st, &pb, &data, &cfg).unwrap();
        assert!((b.pde - 2.0 * a.pde).abs() <= 1e-13 * a.pde);
        assert_eq!(a.div, b.div);
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn zero_state_sees_only_data() {
        let (pb, data, mut cfg, _) = setup(7, "zero", false);
        let g = data.grid;
        let mut noisy = data.clone();
        noisy.values[0].iter_mut().for_each(|v| *v = 1.0);
        cfg.w_data = 3.0;
        let j = objective(&FlowState::zeros(g), &pb, &noisy, &cfg).unwrap();
        let energy: f64 = (0..g.nt())
            .flat_map(|it| (0..noisy.nodes.len()).map(move |jn| (it, jn)))
            .map(|(it, jn)| noisy.weight(it, jn))
            .sum();
        assert_eq!(j.pde + j.div + j.reg, 0.0);
        assert!((j.data - 3.0 * energy).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_reconstruction() {
        let (pb, data, cfg, _) = setup(7, "zero", true);
        let r = minimize(&pb, &data, &cfg).unwrap();
        assert_eq!(r.state.v.sup_norm(), 0.0);
        assert_eq!(r.state.p.sup_norm(), 0.0);
        assert_eq!(r.iterations, 0);
        let _ = (VectorField::zeros(data.grid, 2), CgSettings::default());
    }
}
