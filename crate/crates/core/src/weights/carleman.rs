use serde::{Deserialize, Serialize};

use super::geometry::{GammaSpec, QuadraticWeight, Rect};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, SpaceTimeGrid};

/// Largest exponent accepted by [`eval_phi`] before reporting overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// `psi = d(x) - beta (t - t0)^2`, `phi = exp(lambda psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub d: QuadraticWeight,
    pub lambda: f64,
    pub beta: f64,
    pub t0: f64,
    pub n: u32,
    pub eps: f64,
    pub d_sup: f64,
}

impl WeightParams {
    /// Validates `beta eps^2 < d_sup < 2 beta eps^2` and the scalar ranges.
    pub fn new(d: QuadraticWeight, lambda: f64, beta: f64, t0: f64, n: u32, eps: f64) -> Result<Self> {
        let d_sup = d.sup();
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(beta.is_finite() && beta > 0.0 && eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta and eps must be positive, got {beta}, {eps}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("N must be >= 2, got {n}")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParams("t0 must be finite".into()));
        }
        let be2 = beta * eps * eps;
        if !(be2 < d_sup && d_sup < 2.0 * be2) {
            let c = d.center;
            return Err(Error::Construction {
                condition: format!(
                    "beta eps^2 < d_sup < 2 beta eps^2 fails: beta eps^2 = {be2:.6e}, d_sup = {d_sup:.6e}"
                ),
                x: c[0],
                y: c[1],
            });
        }
        Ok(Self {
            d,
            lambda,
            beta,
            t0,
            n,
            eps,
            d_sup,
        })
    }

    /// `beta` with `beta eps^2 = 0.75 d_sup`, the middle of the admissible band.
    pub fn auto_beta(d_sup: f64, eps: f64) -> f64 {
        0.75 * d_sup / (eps * eps)
    }

    pub fn with_t0(&self, t0: f64) -> Self {
        Self { t0, ..*self }
    }

    #[inline]
    pub fn psi_unchecked(&self, x: [f64; 2], t: f64) -> f64 {
        self.d.eval_unchecked(x) - self.beta * (t - self.t0).powi(2)
    }

    #[inline]
    pub fn phi_unchecked(&self, x: [f64; 2], t: f64) -> f64 {
        (self.lambda * self.psi_unchecked(x, t)).exp()
    }

    /// `mu_k = exp(lambda (k d_sup / N - beta eps^2 / N))`, `k = 1..4`.
    pub fn levels(&self) -> [f64; 4] {
        mu_levels(self.lambda, self.d_sup, self.n, self.beta * self.eps * self.eps)
    }
}

pub fn eval_psi(x: [f64; 2], t: f64, params: &WeightParams) -> Result<f64> {
    Ok(params.d.eval(x)? - params.beta * (t - params.t0).powi(2))
}

pub fn eval_phi(x: [f64; 2], t: f64, params: &WeightParams) -> Result<f64> {
    let e = params.lambda * eval_psi(x, t, params)?;
    if e > MAX_EXPONENT {
        return Err(Error::Overflow {
            exponent: e,
            x: x[0],
            y: x[1],
            t,
        });
    }
    Ok(e.exp())
}

pub fn mu_levels(lambda: f64, d_sup: f64, n: u32, beta_eps2: f64) -> [f64; 4] {
    if lambda == 0.0 {
        log::warn!("lambda = 0 collapses all levels to 1");
    }
    let n = n as f64;
    std::array::from_fn(|k| (lambda * ((k + 1) as f64 * d_sup / n - beta_eps2 / n)).exp())
}

/// Nodal region masks for one weight.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub mu: [f64; 4],
    /// `{phi > mu_1}` over the closed domain.
    pub mask_d: Vec<bool>,
    /// `{phi > q_level}`.
    pub mask_q: Vec<bool>,
}

impl LevelSet {
    pub fn count_d(&self) -> usize {
        self.mask_d.iter().filter(|&&b| b).count()
    }
}

/// Evaluate `phi` at every node of `grid`.
pub fn phi_field(params: &WeightParams, grid: &SpaceTimeGrid) -> ScalarField {
    ScalarField::from_fn(*grid, |x, y, t| params.phi_unchecked([x, y], t))
}

pub fn region_masks(
    params: &WeightParams,
    mu: [f64; 4],
    grid: &SpaceTimeGrid,
    q_level: f64,
) -> Result<LevelSet> {
    let phi = phi_field(params, grid);
    let mask_d: Vec<bool> = phi.values().iter().map(|&p| p > mu[0]).collect();
    if !mask_d.iter().any(|&b| b) {
        return Err(Error::Geometry(format!(
            "region D is empty on the grid (t0 = {}, mu1 = {:.6})",
            params.t0, mu[0]
        )));
    }
    let mask_q = phi.values().iter().map(|&p| p > q_level).collect();
    Ok(LevelSet { mu, mask_d, mask_q })
}

/// Counts of sampled nodes violating the region inclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InclusionReport {
    pub samples: usize,
    /// Nodes of `Omega0 x (t0 - eps/sqrt(N), t0 + eps/sqrt(N))` outside D.
    pub left: usize,
    /// Nodes of D with `|t - t0| >= sqrt(2) eps`.
    pub right: usize,
    /// Boundary nodes of D neither near Γ x (0,T) nor near `phi = mu_1`.
    pub boundary: usize,
}

impl InclusionReport {
    pub fn total(&self) -> usize {
        self.left + self.right + self.boundary
    }
}

/// Sample the region inclusions on `grid`, whose spatial extent must match
/// the weight's domain.
pub fn check_inclusions(
    params: &WeightParams,
    mu: [f64; 4],
    grid: &SpaceTimeGrid,
    omega0: &Rect,
    gamma: &GammaSpec,
) -> InclusionReport {
    let dom = params.d.domain;
    let (nx, ny, nt) = (grid.nx(), grid.ny(), grid.nt());
    let (hx, hy, dt) = (grid.hx(), grid.hy(), grid.dt());
    let coord = |ix: usize, iy: usize, it: usize| {
        (
            [dom.x0 + ix as f64 * hx, dom.y0 + iy as f64 * hy],
            it as f64 * dt,
        )
    };
    let mu1 = mu[0];
    let phi: Vec<f64> = (0..grid.n_nodes())
        .map(|i| {
            let (ix, iy, it) = grid.unravel(i);
            let (x, t) = coord(ix, iy, it);
            params.phi_unchecked(x, t)
        })
        .collect();
    let in_d = |i: usize| phi[i] > mu1;
    let half_left = params.eps / (params.n as f64).sqrt();
    let half_right = std::f64::consts::SQRT_2 * params.eps;
    let h = hx.max(hy);
    let level_tol = params.lambda * mu1 * (h + dt);
    let cell = hx.hypot(hy);
    let mut rep = InclusionReport {
        samples: grid.n_nodes(),
        ..Default::default()
    };
    for i in 0..grid.n_nodes() {
        let (ix, iy, it) = grid.unravel(i);
        let (x, t) = coord(ix, iy, it);
        let dt0 = (t - params.t0).abs();
        if omega0.contains(x) && dt0 < half_left && !in_d(i) {
            rep.left += 1;
        }
        if !in_d(i) {
            continue;
        }
        if dt0 >= half_right {
            rep.right += 1;
        }
        let on_edge = ix == 0 || iy == 0 || ix + 1 == nx || iy + 1 == ny || it == 0 || it + 1 == nt;
        let mut frontier = on_edge;
        if !frontier {
            for stride in [1, nx, nx * ny] {
                if !in_d(i - stride) || !in_d(i + stride) {
                    frontier = true;
                    break;
                }
            }
        }
        if !frontier {
            continue;
        }
        let near_gamma = gamma.contains(&dom, x, cell) && t > 0.0 && t < grid.t_final();
        let near_level = (phi[i] - mu1).abs() <= level_tol;
        if !(near_gamma || near_level) {
            rep.boundary += 1;
        }
    }
    rep
}

/// Quintic smoothstep `u^3 (10 - 15u + 6u^2)` on `u = (phi - mu2)/(mu3 - mu2)`.
pub fn cutoff_chi(phi: f64, mu: [f64; 4]) -> f64 {
    let (lo, hi) = (mu[1], mu[2]);
    if phi <= lo {
        return 0.0;
    }
    if phi >= hi {
        return 1.0;
    }
    let u = (phi - lo) / (hi - lo);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

pub fn cutoff_chi_at(x: [f64; 2], t: f64, mu: [f64; 4], params: &WeightParams) -> Result<f64> {
    Ok(cutoff_chi(eval_phi(x, t, params)?, mu))
}

/// Centres `t0 = sqrt(2) eps + j eps / sqrt(N)` for `j = 0..m`, the largest
/// `m` keeping `t0 <= T - sqrt(2) eps`.
pub fn t0_cover(eps: f64, n: u32, t_final: f64) -> Vec<f64> {
    let first = std::f64::consts::SQRT_2 * eps;
    let last = t_final - first;
    let step = eps / (n as f64).sqrt();
    let mut out = Vec::new();
    let mut j = 0;
    loop {
        let t0 = first + j as f64 * step;
        if t0 > last + 1e-12 {
            break;
        }
        out.push(t0);
        j += 1;
    }
    out
}

/// Write `ix, iy, it, phi` for the nodes selected by `mask`.
pub fn write_mask_csv(path: &std::path::Path, phi: &ScalarField, mask: &[bool]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["ix", "iy", "it", "phi"])
        .map_err(|e| Error::format(path, e))?;
    let g = phi.grid();
    for (i, (&p, &m)) in phi.values().iter().zip(mask).enumerate() {
        if m {
            let (ix, iy, it) = g.unravel(i);
            w.write_record(&[ix.to_string(), iy.to_string(), it.to_string(), format!("{p:e}")])
                .map_err(|e| Error::format(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
