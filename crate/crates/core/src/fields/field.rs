use std::ops::{Add, Mul, Sub};

use super::grid::SpaceTimeGrid;
use crate::error::{Error, Result};

/// Real values at every node of a space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn constant(grid: SpaceTimeGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_nodes()],
        }
    }

    pub fn from_values(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f(x, y, t)` at every node.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = (0..grid.n_nodes())
            .map(|i| {
                let (x, y, t) = grid.coords(i);
                f(x, y, t)
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: SpaceTimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, ix: usize, iy: usize, it: usize) -> f64 {
        self.values[self.grid.index(ix, iy, it)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// Nodewise product.
    pub fn hadamard(&self, other: &ScalarField) -> Self {
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Sup norm over nodes selected by `keep(ix, iy, it)`.
    pub fn sup_norm_where(&self, keep: impl Fn(usize, usize, usize) -> bool) -> f64 {
        let g = &self.grid;
        let mut m = 0.0_f64;
        for (i, v) in self.values.iter().enumerate() {
            let (ix, iy, it) = g.unravel(i);
            if keep(ix, iy, it) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub(crate) fn check_grid(&self, other: &SpaceTimeGrid) -> Result<()> {
        if &self.grid != other {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(())
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&rhs.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scale(self)
    }
}

/// An `n`-component field (velocity, forcing, coefficient vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: SpaceTimeGrid, n: usize) -> Self {
        Self {
            components: vec![ScalarField::zeros(grid); n],
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Shape("vector field needs a component".into()))?;
        for c in &components[1..] {
            c.check_grid(first.grid())?;
        }
        Ok(Self { components })
    }

    /// Sample a two-component field.
    pub fn from_fn2(grid: SpaceTimeGrid, f: impl Fn(f64, f64, f64) -> [f64; 2]) -> Self {
        let n = grid.n_nodes();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let (x, y, t) = grid.coords(i);
            let [u, v] = f(x, y, t);
            a.push(u);
            b.push(v);
        }
        Self {
            components: vec![ScalarField::from_raw(grid, a), ScalarField::from_raw(grid, b)],
        }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.components[0].grid()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.components[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut ScalarField {
        &mut self.components[k]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_components(|c| c.scale(a))
    }

    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .map(ScalarField::sup_norm)
            .fold(0.0, f64::max)
    }

    pub fn sup_norm_where(&self, keep: impl Fn(usize, usize, usize) -> bool + Copy) -> f64 {
        self.components
            .iter()
            .map(|c| c.sup_norm_where(keep))
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_shape(&self, grid: &SpaceTimeGrid, n: usize) -> Result<()> {
        if self.n_components() != n {
            return Err(Error::Shape(format!(
                "expected {n} components, got {}",
                self.n_components()
            )));
        }
        self.components[0].check_grid(grid)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&rhs.components)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&rhs.components)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Velocity and pressure on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub v: VectorField,
    pub p: ScalarField,
}

impl FlowState {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self {
            v: VectorField::zeros(grid, 2),
            p: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.p.grid()
    }

    /// Flatten to `[v1, v2, p]`, component-major.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.grid().n_nodes());
        out.extend_from_slice(self.v.component(0).values());
        out.extend_from_slice(self.v.component(1).values());
        out.extend_from_slice(self.p.values());
        out
    }

    pub fn from_vec(grid: SpaceTimeGrid, x: &[f64]) -> Result<Self> {
        let n = grid.n_nodes();
        if x.len() != 3 * n {
            return Err(Error::Shape(format!(
                "state vector has {} entries, expected {}",
                x.len(),
                3 * n
            )));
        }
        Ok(Self {
            v: VectorField {
                components: vec![
                    ScalarField::from_raw(grid, x[..n].to_vec()),
                    ScalarField::from_raw(grid, x[n..2 * n].to_vec()),
                ],
            },
            p: ScalarField::from_raw(grid, x[2 * n..].to_vec()),
        })
    }
}
