use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::boundary::{forward_traces, recover_normal_data, GraphShape, QuadraticFlow, SmoothFlow, SurfacePatch};
use crate::error::Result;
use crate::fields::identities::{divergence_identity_residual_with, Accuracy};
use crate::fields::VectorField;
use crate::weights::check_inclusions;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

/// Quick self-validation on the configured grid and geometry: the advection
/// divergence identity on a quadratic pair, the boundary trace conversion on
/// random quadratic flows, the weight levels and the region inclusions at
/// every weight centre.
pub fn run_checks(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let grid = cfg.grid()?;

    let small = grid.with_counts(grid.nx().max(5), grid.ny().max(5), 3)?;
    let a = VectorField::from_fn2(small, |x, y, t| [1.0 + x * y - 0.5 * y * y + t, 0.3 * x * x - y]);
    let v = VectorField::from_fn2(small, |x, y, t| [x * x - 2.0 * x * y + t * y, 0.5 * y * y + x]);
    let r = divergence_identity_residual_with(&a, &v, Accuracy::Fourth)?.sup_norm();
    out.push(CheckOutcome::new(
        "divergence identity",
        r <= 1e-10,
        format!("sup residual {r:.3e} on quadratic fields"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for dim in [2, 3] {
        let shapes = [
            GraphShape::Flat,
            GraphShape::Plane { slope: [0.3, -0.2] },
            GraphShape::Paraboloid { curvature: [0.4, 0.25] },
        ];
        for shape in shapes {
            let patch = SurfacePatch::new(dim, shape)?;
            for _ in 0..20 {
                let flow = QuadraticFlow::random(dim, &mut rng);
                let theta = vec![0.2; dim - 1];
                let tr = forward_traces(&patch, &theta, &flow, cfg.kappa);
                let x = patch.point(&theta);
                match recover_normal_data(&tr, &patch, &theta) {
                    Ok(rec) => {
                        let exact = flow.velocity_gradient(&x);
                        let p = flow.pressure(&x);
                        let scale = exact.norm().max(p.abs()).max(1e-300);
                        let e = ((&rec.grad - &exact).norm() + (rec.p - p).abs()) / scale;
                        worst = worst.max(e);
                    }
                    Err(_) => failures += 1,
                }
            }
        }
    }
    out.push(CheckOutcome::new(
        "trace conversion",
        failures == 0 && worst <= 1e-10,
        format!("worst relative error {worst:.3e}, {failures} singular solves"),
    ));

    let t0s = cfg.t0_values();
    let mu = cfg.weight_params(t0s[0])?.levels();
    out.push(CheckOutcome::new(
        "weight levels",
        mu.windows(2).all(|w| w[1] > w[0]),
        format!("mu = {mu:?}"),
    ));

    let mut violations = 0;
    let mut samples = 0;
    for &t0 in &t0s {
        let w = cfg.weight_params(t0)?;
        let rep = check_inclusions(&w, w.levels(), &grid, &cfg.omega0, &cfg.gamma);
        violations += rep.total();
        samples += rep.samples;
    }
    out.push(CheckOutcome::new(
        "region inclusions",
        violations == 0,
        format!("{violations} violations over {samples} samples at {} centres", t0s.len()),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_configuration_passes() {
        let out = run_checks(&ExperimentConfig::reference(), 7).unwrap();
        assert_eq!(out.len(), 4);
        for c in &out {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
