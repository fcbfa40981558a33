//! Pointwise trace algebra on a boundary patch written as a graph
//! `x_n = gamma(x_1, .., x_{n-1})` with the domain above the graph.
//!
//! Given the tangential velocity traces `g_k`, their parameter derivatives,
//! the stress trace `sigma(v,p) nu` and `div v` at one point, the full
//! velocity gradient and the pressure follow from a small linear solve.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the normal `(gamma_1, .., gamma_{n-1}, -1)` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormalConvention {
    /// Euclidean unit length.
    #[default]
    Unit,
    /// Divided by `1 + |grad gamma|^2`, not unit length on curved or tilted
    /// patches. Kept for comparison only.
    MetricScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphShape {
    Flat,
    /// `a theta_1 + b theta_2`.
    Plane { slope: [f64; 2] },
    /// `c_1 theta_1^2 + c_2 theta_2^2`.
    Paraboloid { curvature: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePatch {
    dim: usize,
    shape: GraphShape,
    normal: NormalConvention,
}

impl SurfacePatch {
    pub fn new(dim: usize, shape: GraphShape) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParams(format!("patch dimension must be 2 or 3, got {dim}")));
        }
        Ok(Self {
            dim,
            shape,
            normal: NormalConvention::Unit,
        })
    }

    pub fn with_normal(mut self, normal: NormalConvention) -> Self {
        self.normal = normal;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> GraphShape {
        self.shape
    }

    pub fn convention(&self) -> NormalConvention {
        self.normal
    }

    fn check_theta(&self, theta: &[f64]) {
        assert_eq!(theta.len(), self.dim - 1, "theta has wrong length");
    }

    pub fn gamma(&self, theta: &[f64]) -> f64 {
        self.check_theta(theta);
        let t = |i: usize| theta.get(i).copied().unwrap_or(0.0);
        match self.shape {
            GraphShape::Flat => 0.0,
            GraphShape::Plane { slope } => slope[0] * t(0) + if self.dim == 3 { slope[1] * t(1) } else { 0.0 },
            GraphShape::Paraboloid { curvature } => {
                curvature[0] * t(0) * t(0) + if self.dim == 3 { curvature[1] * t(1) * t(1) } else { 0.0 }
            }
        }
    }

    /// `(gamma_1, .., gamma_{n-1})`.
    pub fn gamma_grad(&self, theta: &[f64]) -> Vec<f64> {
        self.check_theta(theta);
        (0..self.dim - 1)
            .map(|i| match self.shape {
                GraphShape::Flat => 0.0,
                GraphShape::Plane { slope } => slope[i],
                GraphShape::Paraboloid { curvature } => 2.0 * curvature[i] * theta[i],
            })
            .collect()
    }

    /// `x(theta) = (theta, gamma(theta))`.
    pub fn point(&self, theta: &[f64]) -> Vec<f64> {
        let mut x = theta.to_vec();
        x.push(self.gamma(theta));
        x
    }
}

pub fn normal_vector(patch: &SurfacePatch, theta: &[f64]) -> DVector<f64> {
    normal_with(patch, theta, patch.convention())
}

fn normal_with(patch: &SurfacePatch, theta: &[f64], conv: NormalConvention) -> DVector<f64> {
    let mut raw = patch.gamma_grad(theta);
    raw.push(-1.0);
    let raw = DVector::from_vec(raw);
    match conv {
        NormalConvention::Unit => {
            let n = raw.norm();
            raw / n
        }
        NormalConvention::MetricScaled => {
            let s = 1.0 + raw.rows(0, patch.dim() - 1).norm_squared();
            raw / s
        }
    }
}

/// `[kappa (grad v + grad v^T) - p I] nu` with `grad_v[(k, j)] = d_j v_k`.
pub fn stress_trace(grad_v: &DMatrix<f64>, p: f64, nu: &DVector<f64>, kappa: f64) -> DVector<f64> {
    let sym = grad_v + grad_v.transpose();
    sym * nu * kappa - nu * p
}

/// A velocity/pressure pair with exact first derivatives.
pub trait SmoothFlow {
    fn dim(&self) -> usize;
    fn velocity(&self, x: &[f64]) -> DVector<f64>;
    /// `grad[(k, j)] = d_j v_k`.
    fn velocity_gradient(&self, x: &[f64]) -> DMatrix<f64>;
    fn pressure(&self, x: &[f64]) -> f64;
}

/// Componentwise quadratic polynomials `c + b.x + x^T Q x` in `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFlow {
    pub dim: usize,
    pub v0: DVector<f64>,
    pub v1: DMatrix<f64>,
    /// Symmetric Hessian halves, one per component.
    pub v2: Vec<DMatrix<f64>>,
    pub p0: f64,
    pub p1: DVector<f64>,
    pub p2: DMatrix<f64>,
}

impl QuadraticFlow {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            v0: DVector::zeros(dim),
            v1: DMatrix::zeros(dim, dim),
            v2: vec![DMatrix::zeros(dim, dim); dim],
            p0: 0.0,
            p1: DVector::zeros(dim),
            p2: DMatrix::zeros(dim, dim),
        }
    }

    /// Coefficients uniform in `[-1, 1]`.
    pub fn random(dim: usize, rng: &mut impl Rng) -> Self {
        let mut u = || rng.random_range(-1.0..1.0);
        let sym = |u: &mut dyn FnMut() -> f64| {
            let m = DMatrix::from_fn(dim, dim, |_, _| u());
            (&m + m.transpose()) * 0.5
        };
        let v0 = DVector::from_fn(dim, |_, _| u());
        let v1 = DMatrix::from_fn(dim, dim, |_, _| u());
        let v2 = (0..dim).map(|_| sym(&mut u)).collect();
        let p0 = u();
        let p1 = DVector::from_fn(dim, |_, _| u());
        let p2 = sym(&mut u);
        Self {
            dim,
            v0,
            v1,
            v2,
            p0,
            p1,
            p2,
        }
    }
}

impl SmoothFlow for QuadraticFlow {
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, x: &[f64]) -> DVector<f64> {
        let x = DVector::from_column_slice(x);
        DVector::from_fn(self.dim, |k, _| {
            self.v0[k] + self.v1.row(k).dot(&x.transpose()) + x.dot(&(&self.v2[k] * &x))
        })
    }

    fn velocity_gradient(&self, x: &[f64]) -> DMatrix<f64> {
        let x = DVector::from_column_slice(x);
        DMatrix::from_fn(self.dim, self.dim, |k, j| {
            self.v1[(k, j)] + 2.0 * self.v2[k].row(j).dot(&x.transpose())
        })
    }

    fn pressure(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        self.p0 + self.p1.dot(&x) + x.dot(&(&self.p2 * &x))
    }
}

/// Boundary data at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub dim: usize,
    /// `g_k = v_k(x(theta))`.
    pub g: DVector<f64>,
    /// `dg[(k, i)] = d_{theta_i} g_k`, an `n x (n-1)` matrix.
    pub dg: DMatrix<f64>,
    /// `sigma(v, p) nu`.
    pub q: DVector<f64>,
    /// `div v`.
    pub q_div: f64,
    pub kappa: f64,
}

/// Traces of an exact flow at `x(theta)`; the chain rule gives
/// `d_i g_k = d_i v_k + gamma_i d_n v_k`.
pub fn forward_traces(
    patch: &SurfacePatch,
    theta: &[f64],
    flow: &dyn SmoothFlow,
    kappa: f64,
) -> TraceData {
    let n = patch.dim();
    assert_eq!(flow.dim(), n, "flow and patch dimensions differ");
    let x = patch.point(theta);
    let grad = flow.velocity_gradient(&x);
    let gg = patch.gamma_grad(theta);
    let dg = DMatrix::from_fn(n, n - 1, |k, i| grad[(k, i)] + gg[i] * grad[(k, n - 1)]);
    let nu = normal_vector(patch, theta);
    TraceData {
        dim: n,
        g: flow.velocity(&x),
        dg,
        q: stress_trace(&grad, flow.pressure(&x), &nu, kappa),
        q_div: grad.trace(),
        kappa,
    }
}

/// Output of [`recover_normal_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    /// `(grad v) nu` with the unit normal.
    pub dnu_v: DVector<f64>,
    pub p: f64,
    pub grad: DMatrix<f64>,
    /// Determinant of the inner solve.
    pub det: f64,
}

/// Velocity gradient as an affine function of `h_k = d_n v_k`, `k < n`.
///
/// `d_n v_n` follows from the divergence and the tangential relations.
fn gradient_from(tr: &TraceData, gg: &[f64], h: &[f64]) -> DMatrix<f64> {
    let n = tr.dim;
    let g0 = tr.q_div - (0..n - 1).map(|i| tr.dg[(i, i)]).sum::<f64>();
    let hn = g0 + (0..n - 1).map(|i| gg[i] * h[i]).sum::<f64>();
    DMatrix::from_fn(n, n, |k, j| {
        let hk = if k < n - 1 { h[k] } else { hn };
        if j < n - 1 {
            tr.dg[(k, j)] - gg[j] * hk
        } else {
            hk
        }
    })
}

/// Solve for `(h_1, .., h_{n-1}, p)` from the stress trace and assemble the
/// full gradient.
pub fn recover_normal_data(tr: &TraceData, patch: &SurfacePatch, theta: &[f64]) -> Result<Recovery> {
    let n = patch.dim();
    if tr.dim != n {
        return Err(Error::Shape("trace and patch dimensions differ".into()));
    }
    if !(tr.kappa > 0.0) {
        return Err(Error::InvalidParams(format!("kappa must be positive, got {}", tr.kappa)));
    }
    let gg = patch.gamma_grad(theta);
    let nu = normal_vector(patch, theta);
    let sigma = |h: &[f64], p: f64| stress_trace(&gradient_from(tr, &gg, h), p, &nu, tr.kappa);
    let zero = vec![0.0; n - 1];
    let c = sigma(&zero, 0.0);
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let mut e = zero.clone();
        e[k] = 1.0;
        m.set_column(k, &(sigma(&e, 0.0) - &c));
    }
    m.set_column(n - 1, &(-&nu));
    let det = m.determinant();
    let scale: f64 = m.column_iter().map(|c| c.norm()).product();
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::SingularTrace { det });
    }
    let z = m
        .lu()
        .solve(&(&tr.q - &c))
        .ok_or(Error::SingularTrace { det })?;
    let h: Vec<f64> = z.rows(0, n - 1).iter().copied().collect();
    let grad = gradient_from(tr, &gg, &h);
    let unit = normal_with(patch, theta, NormalConvention::Unit);
    Ok(Recovery {
        dnu_v: &grad * unit,
        p: z[n - 1],
        grad,
        det,
    })
}

/// Linear map from `(grad v_1, .., grad v_n, p)` to
/// `(d_theta g_1, .., d_theta g_n, sigma nu, div v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceConversionMatrix {
    pub dim: usize,
    pub matrix: DMatrix<f64>,
    pub det: f64,
}

pub fn assemble_conversion_matrix(patch: &SurfacePatch, theta: &[f64], kappa: f64) -> TraceConversionMatrix {
    let n = patch.dim();
    let size = n * n + 1;
    let gg = patch.gamma_grad(theta);
    let nu = normal_vector(patch, theta);
    let mut a = DMatrix::zeros(size, size);
    let col = |k: usize, j: usize| k * n + j;
    let mut row = 0;
    for k in 0..n {
        for i in 0..n - 1 {
            a[(row, col(k, i))] += 1.0;
            a[(row, col(k, n - 1))] += gg[i];
            row += 1;
        }
    }
    for k in 0..n {
        for j in 0..n {
            a[(row, col(k, j))] += kappa * nu[j];
            a[(row, col(j, k))] += kappa * nu[j];
        }
        a[(row, n * n)] = -nu[k];
        row += 1;
    }
    for k in 0..n {
        a[(row, col(k, k))] = 1.0;
    }
    let det = a.determinant();
    TraceConversionMatrix { dim: n, matrix: a, det }
}

/// Stack `(grad v_1, .., grad v_n, p)` in the conversion-matrix order.
pub fn stack_unknowns(grad: &DMatrix<f64>, p: f64) -> DVector<f64> {
    let n = grad.nrows();
    let mut z = DVector::zeros(n * n + 1);
    for k in 0..n {
        for j in 0..n {
            z[k * n + j] = grad[(k, j)];
        }
    }
    z[n * n] = p;
    z
}

/// Stack `(d_theta g_1, .., d_theta g_n, sigma nu, div v)`.
pub fn stack_traces(tr: &TraceData) -> DVector<f64> {
    let n = tr.dim;
    let mut out = Vec::with_capacity(n * n + 1);
    for k in 0..n {
        for i in 0..n - 1 {
            out.push(tr.dg[(k, i)]);
        }
    }
    out.extend(tr.q.iter());
    out.push(tr.q_div);
    DVector::from_vec(out)
}

/// Write `theta1, theta2, field, component, value` rows.
pub fn write_traces_csv(path: &Path, rows: &[(Vec<f64>, TraceData)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["theta1", "theta2", "field", "component", "value"])
        .map_err(|e| Error::format(path, e))?;
    for (theta, tr) in rows {
        let t1 = format!("{:e}", theta[0]);
        let t2 = theta.get(1).map(|t| format!("{t:e}")).unwrap_or_default();
        let mut put = |field: &str, comp: usize, v: f64| {
            w.write_record([t1.as_str(), t2.as_str(), field, &comp.to_string(), &format!("{v:e}")])
        };
        let res: std::result::Result<(), csv::Error> = (|| {
            for k in 0..tr.dim {
                put("g", k, tr.g[k])?;
            }
            for i in 0..tr.dim - 1 {
                for k in 0..tr.dim {
                    put(&format!("dg{}", i + 1), k, tr.dg[(k, i)])?;
                }
            }
            for k in 0..tr.dim {
                put("sigma_nu", k, tr.q[k])?;
            }
            put("div", 0, tr.q_div)
        })();
        res.map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
