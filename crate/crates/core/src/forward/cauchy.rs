use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::boundary::stress_trace;
use crate::error::{Error, Result};
use crate::fields::{derivative, trapezoid_1d, Axis, FlowState, SpaceTimeGrid};
use crate::weights::{GammaSpec, Rect, Side};

pub const CHANNELS: [&str; 6] = ["v1", "v2", "dtv1", "dtv2", "sn1", "sn2"];

/// Lateral Cauchy data on the nodes of Γ at every time level.
///
/// `values[c][it * n_nodes + j]` is channel `c` (in `CHANNELS` order) at
/// time level `it` and Γ node `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyTrace {
    pub grid: SpaceTimeGrid,
    pub gamma: GammaSpec,
    /// Spatial `(ix, iy)` of each Γ node, ordered along the side.
    pub nodes: Vec<(usize, usize)>,
    pub values: [Vec<f64>; 6],
    pub delta: f64,
    pub seed: u64,
    /// Root-sum-square of the noise over Γ x (0, T), trapezoid weighted.
    pub misfit: f64,
}

impl CauchyTrace {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, channel: usize, it: usize, node: usize) -> f64 {
        self.values[channel][it * self.nodes.len() + node]
    }

    pub fn normal(&self) -> [f64; 2] {
        self.gamma.side.outward_normal()
    }

    /// Quadrature weight of `(it, node)` on Γ x (0, T).
    pub fn weight(&self, it: usize, node: usize) -> f64 {
        boundary_weight(&self.grid, self.gamma.side, &self.nodes, node)
            * trapezoid_1d(it, self.grid.nt(), self.grid.dt())
    }

    /// Root-sum-square difference of all channels against `other`.
    pub fn distance(&self, other: &CauchyTrace) -> Result<f64> {
        if self.nodes != other.nodes || self.grid != other.grid {
            return Err(Error::Shape("traces live on different node sets".into()));
        }
        let n = self.nodes.len();
        let mut acc = 0.0;
        for c in 0..6 {
            for (i, (a, b)) in self.values[c].iter().zip(&other.values[c]).enumerate() {
                acc += self.weight(i / n, i % n) * (a - b).powi(2);
            }
        }
        Ok(acc.sqrt())
    }
}

fn boundary_weight(grid: &SpaceTimeGrid, side: Side, nodes: &[(usize, usize)], j: usize) -> f64 {
    let n = nodes.len();
    if n < 2 {
        return 0.0;
    }
    let h = match side {
        Side::Bottom | Side::Top => grid.hx(),
        Side::Left | Side::Right => grid.hy(),
    };
    trapezoid_1d(j, n, h)
}

/// Spatial nodes of the grid lying on the closed segment Γ.
pub fn gamma_nodes(grid: &SpaceTimeGrid, gamma: &GammaSpec) -> Result<Vec<(usize, usize)>> {
    let domain = Rect::domain(grid.lx(), grid.ly());
    gamma.validate(&domain)?;
    let tol = 1e-9 * grid.lx().max(grid.ly());
    let (nx, ny) = (grid.nx(), grid.ny());
    let nodes: Vec<(usize, usize)> = match gamma.side {
        Side::Bottom => (0..nx).map(|ix| (ix, 0)).collect(),
        Side::Top => (0..nx).map(|ix| (ix, ny - 1)).collect(),
        Side::Left => (0..ny).map(|iy| (0, iy)).collect(),
        Side::Right => (0..ny).map(|iy| (nx - 1, iy)).collect(),
    };
    let nodes: Vec<_> = nodes
        .into_iter()
        .filter(|&(ix, iy)| gamma.contains(&domain, [grid.x(ix), grid.y(iy)], tol))
        .collect();
    if nodes.is_empty() {
        return Err(Error::Geometry("Γ contains no grid nodes".into()));
    }
    Ok(nodes)
}

/// Sample velocity, its time derivative and the traction `σ(v, p)ν` on Γ
/// from a discrete state, then add relative Gaussian noise: channel `c`
/// gets i.i.d. `N(0, (delta * rms_c)^2)` draws from a ChaCha8 stream seeded
/// with `seed`, in channel, time level, node order.
pub fn extract_cauchy(
    state: &FlowState,
    gamma: &GammaSpec,
    kappa: f64,
    delta: f64,
    seed: u64,
) -> Result<CauchyTrace> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParams(format!("noise level must be nonnegative, got {delta}")));
    }
    if state.v.n_components() != 2 {
        return Err(Error::Shape("Cauchy extraction needs a 2-component velocity".into()));
    }
    let grid = *state.grid();
    let nodes = gamma_nodes(&grid, gamma)?;
    let clean = clean_channels(state, gamma.side, &nodes, kappa);
    let mut values = clean.clone();
    if delta > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ch in values.iter_mut() {
            let rms = (ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64).sqrt();
            let sd = delta * rms;
            if sd > 0.0 {
                let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidParams(e.to_string()))?;
                for v in ch.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    let mut out = CauchyTrace {
        grid,
        gamma: *gamma,
        nodes,
        values,
        delta,
        seed,
        misfit: 0.0,
    };
    let n = out.nodes.len();
    let mut acc = 0.0;
    for c in 0..6 {
        for (i, (a, b)) in out.values[c].iter().zip(&clean[c]).enumerate() {
            acc += out.weight(i / n, i % n) * (a - b).powi(2);
        }
    }
    out.misfit = acc.sqrt();
    Ok(out)
}

pub(crate) fn clean_channels(state: &FlowState, side: Side, nodes: &[(usize, usize)], kappa: f64) -> [Vec<f64>; 6] {
    let g = *state.grid();
    let v = &state.v;
    let dtv = [
        derivative(v.component(0), Axis::T, 1),
        derivative(v.component(1), Axis::T, 1),
    ];
    let gradv: [[_; 2]; 2] = std::array::from_fn(|k| {
        [
            derivative(v.component(k), Axis::X, 1),
            derivative(v.component(k), Axis::Y, 1),
        ]
    });
    let nu_arr = side.outward_normal();
    let nu = DVector::from_column_slice(&nu_arr);
    let mut out: [Vec<f64>; 6] = Default::default();
    for it in 0..g.nt() {
        for &(ix, iy) in nodes {
            let i = g.index(ix, iy, it);
            out[0].push(v.component(0).values()[i]);
            out[1].push(v.component(1).values()[i]);
            out[2].push(dtv[0].values()[i]);
            out[3].push(dtv[1].values()[i]);
            let gm = DMatrix::from_fn(2, 2, |k, j| gradv[k][j].values()[i]);
            let sn = stress_trace(&gm, state.p.values()[i], &nu, kappa);
            out[4].push(sn[0]);
            out[5].push(sn[1]);
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GridMeta {
    nx: usize,
    ny: usize,
    nt: usize,
    lx: f64,
    ly: f64,
    t_final: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceMeta {
    delta: f64,
    seed: u64,
    grid: GridMeta,
    gamma: GammaSpec,
    misfit: f64,
}

/// Path of the JSON sidecar written next to a trace CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Write `channel,it,node,value` rows plus a JSON sidecar with the noise
/// metadata, grid and Γ.
pub fn write_cauchy(trace: &CauchyTrace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "channel,it,node,value").map_err(io)?;
    let n = trace.nodes.len();
    for (c, name) in CHANNELS.iter().enumerate() {
        for (i, v) in trace.values[c].iter().enumerate() {
            writeln!(w, "{name},{},{},{v:e}", i / n, i % n).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    let g = &trace.grid;
    let meta = TraceMeta {
        delta: trace.delta,
        seed: trace.seed,
        grid: GridMeta {
            nx: g.nx(),
            ny: g.ny(),
            nt: g.nt(),
            lx: g.lx(),
            ly: g.ly(),
            t_final: g.t_final(),
        },
        gamma: trace.gamma,
        misfit: trace.misfit,
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::format(&side, e))?;
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

pub fn read_cauchy(path: &Path) -> Result<CauchyTrace> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: TraceMeta = serde_json::from_str(&text).map_err(|e| Error::format(&side, e))?;
    let m = &meta.grid;
    let grid = SpaceTimeGrid::new(m.nx, m.ny, m.nt, m.lx, m.ly, m.t_final)?;
    let nodes = gamma_nodes(&grid, &meta.gamma)?;
    let n = nodes.len();
    let len = n * grid.nt();
    let mut values: [Vec<f64>; 6] = std::array::from_fn(|_| vec![f64::NAN; len]);
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        if rec.len() != 4 {
            return Err(Error::format(path, "expected 4 columns"));
        }
        let c = CHANNELS
            .iter()
            .position(|&name| name == &rec[0])
            .ok_or_else(|| Error::format(path, format!("unknown channel `{}`", &rec[0])))?;
        let parse_idx = |s: &str| s.parse::<usize>().map_err(|e| Error::format(path, e));
        let it = parse_idx(&rec[1])?;
        let node = parse_idx(&rec[2])?;
        let v: f64 = rec[3].parse().map_err(|e| Error::format(path, e))?;
        if it >= grid.nt() || node >= n {
            return Err(Error::format(path, format!("index ({it}, {node}) out of range")));
        }
        values[c][it * n + node] = v;
    }
    if values.iter().any(|ch| ch.iter().any(|v| v.is_nan())) {
        return Err(Error::format(path, "missing trace samples"));
    }
    Ok(CauchyTrace {
        grid,
        gamma: meta.gamma,
        nodes,
        values,
        delta: meta.delta,
        seed: meta.seed,
        misfit: meta.misfit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ScalarField, VectorField};
    use crate::forward::manufactured_solution;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::unit(17, 17, 9).unwrap()
    }

    fn bottom() -> GammaSpec {
        GammaSpec::new(Side::Bottom, 0.25, 0.75)
    }

    #[test]
    fn gamma_nodes_closed_segment() {
        let nodes = gamma_nodes(&grid(), &bottom()).unwrap();
        assert_eq!(nodes.first(), Some(&(4, 0)));
        assert_eq!(nodes.last(), Some(&(12, 0)));
        assert_eq!(nodes.len(), 9);
    }

    #[test]
    fn empty_gamma_rejected() {
        assert!(gamma_nodes(&grid(), &GammaSpec::new(Side::Bottom, 0.5, 0.5)).is_err());
        assert!(gamma_nodes(&grid(), &GammaSpec::new(Side::Bottom, 0.51, 0.52)).is_err());
    }

    #[test]
    fn clean_data_is_exact_and_pressure_gives_minus_c_nu() {
        let g = grid();
        let state = FlowState {
            v: VectorField::zeros(g, 2),
            p: ScalarField::constant(g, 2.5),
        };
        for side in [Side::Bottom, Side::Top, Side::Left, Side::Right] {
            let tr = extract_cauchy(&state, &GammaSpec::new(side, 0.2, 0.8), 0.1, 0.0, 1).unwrap();
            let nu = side.outward_normal();
            assert!(tr.values[4].iter().all(|&v| v == -2.5 * nu[0]));
            assert!(tr.values[5].iter().all(|&v| v == -2.5 * nu[1]));
            assert_eq!(tr.misfit, 0.0);
        }
    }

    #[test]
    fn traces_converge_to_analytic() {
        let err = |n: usize| {
            let g = SpaceTimeGrid::unit(n, n, n).unwrap();
            let m = manufactured_solution("oseen", &g, 0.1).unwrap();
            let tr = extract_cauchy(&m.truth, &bottom(), 0.1, 0.0, 0).unwrap();
            let mut e: f64 = 0.0;
            for it in 0..g.nt() {
                for (j, &(ix, iy)) in tr.nodes.iter().enumerate() {
                    let (x, y, t) = (g.x(ix), g.y(iy), g.t(it));
                    let dv = m.problem.dt_velocity(x, y, t);
                    let gv = m.problem.velocity_gradient(x, y, t);
                    let p = m.problem.pressure(x, y, t);
                    // outward normal (0, -1)
                    let sn = [-0.1 * (gv[0][1] + gv[1][0]), -0.1 * 2.0 * gv[1][1] + p];
                    e = e.max((tr.value(2, it, j) - dv[0]).abs());
                    e = e.max((tr.value(3, it, j) - dv[1]).abs());
                    e = e.max((tr.value(4, it, j) - sn[0]).abs());
                    e = e.max((tr.value(5, it, j) - sn[1]).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn noise_level_matches_delta() {
        let g = SpaceTimeGrid::unit(33, 33, 33).unwrap();
        let m = manufactured_solution("oseen", &g, 0.1).unwrap();
        let gamma = GammaSpec::new(Side::Bottom, 0.0, 1.0);
        let clean = extract_cauchy(&m.truth, &gamma, 0.1, 0.0, 0).unwrap();
        let noisy = extract_cauchy(&m.truth, &gamma, 0.1, 0.01, 7).unwrap();
        assert!(clean.values[0].len() >= 1000);
        for c in 0..6 {
            let n = clean.values[c].len() as f64;
            let sig = (clean.values[c].iter().map(|v| v * v).sum::<f64>() / n).sqrt();
            let noise = (noisy.values[c]
                .iter()
                .zip(&clean.values[c])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
            let ratio = noise / sig;
            assert!((0.008..=0.012).contains(&ratio), "{c}: {ratio}");
        }
        assert!((noisy.distance(&clean).unwrap() - noisy.misfit).abs() < 1e-14);
        let again = extract_cauchy(&m.truth, &gamma, 0.1, 0.01, 7).unwrap();
        assert_eq!(again, noisy);
    }

    #[test]
    fn csv_roundtrip() {
        let g = grid();
        let m = manufactured_solution("taylor", &g, 0.1).unwrap();
        let tr = extract_cauchy(&m.truth, &bottom(), 0.1, 0.02, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_cauchy(&tr, &path).unwrap();
        let back = read_cauchy(&path).unwrap();
        assert_eq!(back, tr);
    }
}
