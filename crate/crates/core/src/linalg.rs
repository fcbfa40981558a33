//! Sparse least-squares operators and a preconditioned CGNR solver.
//!
//! Reductions use fixed-size chunks summed in order, so results do not
//! depend on the rayon pool width.

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

/// Deterministic parallel dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-oriented builder for a sparse rectangular operator with a matching
/// right-hand side.
#[derive(Debug, Clone)]
pub struct RowBuilder {
    n_cols: usize,
    row_idx: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl RowBuilder {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            row_idx: Vec::new(),
            col_idx: Vec::new(),
            vals: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Append one row `sum_k c_k x_{j_k} = b`; repeated columns are summed.
    pub fn push(&mut self, entries: &[(usize, f64)], b: f64) {
        let row = self.rhs.len();
        for &(j, c) in entries {
            debug_assert!(j < self.n_cols);
            if c != 0.0 {
                self.row_idx.push(row);
                self.col_idx.push(j);
                self.vals.push(c);
            }
        }
        self.rhs.push(b);
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Drop the columns no row touches. Returns the operator over the
    /// remaining columns and, for each of them, its original index.
    pub fn finish_compressed(mut self) -> (LeastSquares, Vec<usize>) {
        let mut map = vec![usize::MAX; self.n_cols];
        let mut used: Vec<usize> = self.col_idx.clone();
        used.sort_unstable();
        used.dedup();
        for (k, &j) in used.iter().enumerate() {
            map[j] = k;
        }
        self.col_idx.iter_mut().for_each(|j| *j = map[*j]);
        self.n_cols = used.len();
        (self.finish(), used)
    }

    pub fn finish(self) -> LeastSquares {
        let tri = TriMat::from_triplets(
            (self.rhs.len(), self.n_cols),
            self.row_idx,
            self.col_idx,
            self.vals,
        );
        LeastSquares::new(tri.to_csr(), self.rhs)
    }
}

/// `min ||K x - b||^2` with `K` stored in CSR together with its transpose.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    k: CsMat<f64>,
    kt: CsMat<f64>,
    b: Vec<f64>,
}

impl LeastSquares {
    pub fn new(k: CsMat<f64>, b: Vec<f64>) -> Self {
        assert_eq!(k.rows(), b.len());
        let kt = k.transpose_view().to_csr();
        Self { k, kt, b }
    }

    pub fn n_rows(&self) -> usize {
        self.k.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.k.cols()
    }

    pub fn matrix(&self) -> &CsMat<f64> {
        &self.k
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// `K x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        csr_mul(&self.k, x)
    }

    /// `K^T y`.
    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        csr_mul(&self.kt, y)
    }

    /// `K x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.apply(x);
        r.par_iter_mut().zip(&self.b).for_each(|(r, b)| *r -= b);
        r
    }

    /// `||K x - b||^2`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        dot(&r, &r)
    }

    /// `2 K^T (K x - b)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.apply_t(&self.residual(x));
        g.iter_mut().for_each(|v| *v *= 2.0);
        g
    }

    /// Squared column norms, the diagonal of `K^T K`.
    pub fn normal_diagonal(&self) -> Vec<f64> {
        self.kt
            .outer_iterator()
            .map(|row| row.data().iter().map(|v| v * v).sum())
            .collect()
    }
}

fn csr_mul(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.cols(), x.len());
    let indptr = m.indptr();
    let indptr = indptr.raw_storage();
    let idx = m.indices();
    let data = m.data();
    (0..m.rows())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut acc = 0.0;
            for k in indptr[i]..indptr[i + 1] {
                acc += data[k] * x[idx[k]];
            }
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Target for `||K^T r|| / ||K^T b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative normal-equation residual after each iteration.
    pub history: Vec<f64>,
}

impl CgOutcome {
    pub fn relative_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

/// Cholesky factor of a renumbered `K^T K`, stored row by row over the
/// envelope (from the first nonzero of each row to the diagonal), which
/// contains all fill.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    /// Column of `K` placed at each position.
    order: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factor `K^T K` with the columns renumbered so that position `k`
    /// holds column `order[k]`. Fails when a pivot is not positive.
    pub fn normal(ls: &LeastSquares, order: &[usize]) -> Result<Self> {
        Self::normal_shifted(ls, order, 0.0)
    }

    /// As [`EnvelopeCholesky::normal`], factoring `K^T K + shift * max(diag) I`.
    /// A small shift keeps nearly singular modes factorable; the result is
    /// then only a preconditioner.
    pub fn normal_shifted(ls: &LeastSquares, order: &[usize], shift: f64) -> Result<Self> {
        let n = ls.n_cols();
        let mut pos = vec![usize::MAX; n];
        if order.len() != n {
            return Err(Error::Shape(format!("ordering has {} entries, expected {n}", order.len())));
        }
        for (k, &c) in order.iter().enumerate() {
            if c >= n || pos[c] != usize::MAX {
                return Err(Error::InvalidParams("column ordering is not a permutation".into()));
            }
            pos[c] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in ls.k.outer_iterator() {
            let lo = r.indices().iter().map(|&j| pos[j]).min().unwrap_or(0);
            for &j in r.indices() {
                first[pos[j]] = first[pos[j]].min(lo);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for r in ls.k.outer_iterator() {
            row.clear();
            row.extend(r.iter().map(|(j, &v)| (pos[j], v)));
            for &(p, vp) in &row {
                for &(q, vq) in &row {
                    if q <= p {
                        data[start[p] + q - first[p]] += vp * vq;
                    }
                }
            }
        }
        if shift > 0.0 {
            let top = (0..n).map(|i| data[start[i + 1] - 1]).fold(0.0, f64::max);
            for i in 0..n {
                data[start[i + 1] - 1] += shift * top;
            }
        }
        for i in 0..n {
            for j in first[i]..=i {
                let k0 = first[i].max(first[j]);
                let li = &data[start[i] + k0 - first[i]..start[i] + j - first[i]];
                let lj = &data[start[j] + k0 - first[j]..start[j] + j - first[j]];
                let acc: f64 = li.iter().zip(lj).map(|(a, b)| a * b).sum();
                let s = data[start[i] + j - first[i]] - acc;
                if j < i {
                    let djj = data[start[j + 1] - 1];
                    data[start[i] + j - first[i]] = s / djj;
                } else {
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::InvalidParams(format!(
                            "normal matrix is not positive definite (pivot {s:.3e} at {i})"
                        )));
                    }
                    data[start[i + 1] - 1] = s.sqrt();
                }
            }
        }
        Ok(Self {
            order: order.to_vec(),
            first,
            start,
            data,
        })
    }

    /// Number of stored entries.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    /// Solve `K^T K z = r`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut y: Vec<f64> = self.order.iter().map(|&c| r[c]).collect();
        for i in 0..n {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let (off, d) = row.split_at(row.len() - 1);
            let acc: f64 = off.iter().zip(&y[self.first[i]..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - acc) / d[0];
        }
        for i in (0..n).rev() {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let (off, d) = row.split_at(row.len() - 1);
            y[i] /= d[0];
            let yi = y[i];
            for (yk, l) in y[self.first[i]..i].iter_mut().zip(off) {
                *yk -= l * yi;
            }
        }
        let mut z = vec![0.0; n];
        for (k, &c) in self.order.iter().enumerate() {
            z[c] = y[k];
        }
        z
    }
}

/// Approximate inverse of `K^T K` applied at every CG step.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    /// Inverse squared column norms.
    Jacobi(Vec<f64>),
    Cholesky(EnvelopeCholesky),
}

impl Preconditioner {
    pub fn jacobi(ls: &LeastSquares) -> Self {
        Preconditioner::Jacobi(
            ls.normal_diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 0.0 })
                .collect(),
        )
    }

    fn apply(&self, s: &[f64], z: &mut Vec<f64>) {
        match self {
            Preconditioner::Jacobi(inv) => {
                z.resize(s.len(), 0.0);
                z.par_iter_mut().zip(s).zip(inv).for_each(|((z, s), d)| *z = s * d);
            }
            Preconditioner::Cholesky(c) => *z = c.solve(s),
        }
    }
}

/// Conjugate gradients on `K^T K x = K^T b` with the column-norm (Jacobi)
/// preconditioner, without forming `K^T K`.
pub fn cgnr(ls: &LeastSquares, x0: Option<&[f64]>, settings: CgSettings) -> Result<CgOutcome> {
    pcgnr(ls, x0, settings, &Preconditioner::jacobi(ls))
}

/// Preconditioned conjugate gradients on the normal equations.
///
/// Reaching `max_iter` is only an error when the residual has not dropped
/// by at least a factor of 10.
pub fn pcgnr(ls: &LeastSquares, x0: Option<&[f64]>, settings: CgSettings, precond: &Preconditioner) -> Result<CgOutcome> {
    let n = ls.n_cols();
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::Shape(format!(
                    "initial guess has {} entries, expected {n}",
                    x0.len()
                )));
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let scale = norm(&ls.apply_t(ls.rhs()));
    let mut r = ls.residual(&x);
    r.iter_mut().for_each(|v| *v = -*v);
    let mut s = ls.apply_t(&r);
    let s_norm0 = norm(&s);
    let scale = if scale > 0.0 { scale } else { s_norm0.max(f64::MIN_POSITIVE) };
    let mut history = Vec::new();
    if s_norm0 == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            converged: true,
            history,
        });
    }
    let mut z = Vec::new();
    precond.apply(&s, &mut z);
    let mut p = z.clone();
    let mut gamma = dot(&s, &z);
    let first = s_norm0 / scale;
    let mut converged = first <= settings.tol;
    let mut it = 0;
    while !converged && it < settings.max_iter {
        it += 1;
        let q = ls.apply(&p);
        let qq = dot(&q, &q);
        if qq <= 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
        s = ls.apply_t(&r);
        let rel = norm(&s) / scale;
        history.push(rel);
        if rel <= settings.tol {
            converged = true;
            break;
        }
        precond.apply(&s, &mut z);
        let gamma_new = dot(&s, &z);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    let last = history.last().copied().unwrap_or(first);
    if !converged && last > 0.1 * first {
        return Err(Error::Stagnation {
            iterations: it,
            last,
            history,
        });
    }
    if !converged {
        log::warn!("CGNR stopped at {it} iterations with relative residual {last:.3e}");
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn random_system(m: usize, n: usize, seed: u64) -> (LeastSquares, DMatrix<f64>, DVector<f64>) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut b = RowBuilder::new(n);
        let mut dense = DMatrix::zeros(m, n);
        let mut rhs = DVector::zeros(m);
        for i in 0..m {
            let mut row = Vec::new();
            for j in 0..n {
                if (i + 2 * j) % 3 == 0 || i == j {
                    let v = next() + if i == j { 2.0 } else { 0.0 };
                    row.push((j, v));
                    dense[(i, j)] = v;
                }
            }
            rhs[i] = next();
            b.push(&row, rhs[i]);
        }
        (b.finish(), dense, rhs)
    }

    #[test]
    fn matches_dense_least_squares() {
        let (ls, k, b) = random_system(40, 25, 7);
        let out = cgnr(&ls, None, CgSettings { tol: 1e-13, max_iter: 500 }).unwrap();
        let kt = k.transpose();
        let exact = (&kt * &k).lu().solve(&(&kt * &b)).unwrap();
        let err = (DVector::from_vec(out.x) - &exact).amax();
        assert!(err < 1e-9, "{err}");
        assert!(out.converged);
    }

    #[test]
    fn envelope_cholesky_solves_normal_equations() {
        let (ls, k, _) = random_system(40, 25, 5);
        let order: Vec<usize> = (0..25).rev().collect();
        let c = EnvelopeCholesky::normal(&ls, &order).unwrap();
        let r: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let z = c.solve(&r);
        let ktk = k.transpose() * &k;
        let back = &ktk * DVector::from_vec(z);
        for i in 0..25 {
            assert!((back[i] - r[i]).abs() < 1e-10, "{i}: {} vs {}", back[i], r[i]);
        }
        assert!(EnvelopeCholesky::normal(&ls, &[0; 25]).is_err());
    }

    #[test]
    fn cholesky_preconditioned_cg_converges_at_once() {
        let (ls, k, b) = random_system(40, 25, 7);
        let order: Vec<usize> = (0..25).collect();
        let pc = Preconditioner::Cholesky(EnvelopeCholesky::normal(&ls, &order).unwrap());
        let out = pcgnr(&ls, None, CgSettings { tol: 1e-13, max_iter: 50 }, &pc).unwrap();
        assert!(out.iterations <= 3, "{}", out.iterations);
        let kt = k.transpose();
        let exact = (&kt * &k).lu().solve(&(&kt * &b)).unwrap();
        assert!((DVector::from_vec(out.x) - &exact).amax() < 1e-9);
    }

    #[test]
    fn gradient_matches_definition() {
        let (ls, k, b) = random_system(12, 8, 3);
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.3).collect();
        let g = ls.gradient(&x);
        let xd = DVector::from_vec(x);
        let expect = 2.0 * k.transpose() * (&k * &xd - &b);
        for i in 0..8 {
            assert!((g[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_columns_sum() {
        let mut b = RowBuilder::new(2);
        b.push(&[(0, 1.0), (0, 2.0), (1, 1.0)], 4.0);
        let ls = b.finish();
        assert_eq!(ls.apply(&[1.0, 1.0]), vec![4.0]);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let mut b = RowBuilder::new(3);
        b.push(&[(0, 1.0)], 0.0);
        b.push(&[(1, 1.0), (2, 1.0)], 0.0);
        let out = cgnr(&b.finish(), None, CgSettings::default()).unwrap();
        assert_eq!(out.x, vec![0.0; 3]);
    }

    #[test]
    fn stagnation_reports_history() {
        let (ls, _, _) = random_system(40, 25, 11);
        let err = cgnr(&ls, None, CgSettings { tol: 1e-14, max_iter: 1 }).unwrap_err();
        match err {
            Error::Stagnation { history, .. } => assert_eq!(history.len(), 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn dot_is_deterministic_across_pools() {
        let a: Vec<f64> = (0..20_000).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..20_000).map(|i| (i as f64 * 0.7).cos()).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let d1 = one.install(|| dot(&a, &b));
        let d4 = four.install(|| dot(&a, &b));
        assert_eq!(d1.to_bits(), d4.to_bits());
    }
}
