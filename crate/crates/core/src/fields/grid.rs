use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate axis of the space-time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    T,
}

/// Uniform node grid on `(0, lx) x (0, ly) x (0, t_final)`.
///
/// Node `(ix, iy, it)` sits at `(ix * hx, iy * hy, it * dt)`; the flat index
/// runs fastest in `x`, then `y`, then `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    nx: usize,
    ny: usize,
    nt: usize,
    lx: f64,
    ly: f64,
    t_final: f64,
}

impl SpaceTimeGrid {
    pub fn new(nx: usize, ny: usize, nt: usize, lx: f64, ly: f64, t_final: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || nt < 3 {
            return Err(Error::InvalidParams(format!(
                "grid needs at least 3 nodes per axis, got {nx}x{ny}x{nt}"
            )));
        }
        for (name, v) in [("lx", lx), ("ly", ly), ("t_final", t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            nx,
            ny,
            nt,
            lx,
            ly,
            t_final,
        })
    }

    /// Unit square over unit time.
    pub fn unit(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::new(nx, ny, nt, 1.0, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    pub fn hx(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / (self.ny - 1) as f64
    }
    pub fn dt(&self) -> f64 {
        self.t_final / (self.nt - 1) as f64
    }

    /// Nodes per time level.
    pub fn n_space(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, it: usize) -> usize {
        (it * self.ny + iy) * self.nx + ix
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.nx;
        let rest = idx / self.nx;
        (ix, rest % self.ny, rest / self.ny)
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.hx()
    }
    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.hy()
    }
    #[inline]
    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt()
    }

    /// Physical coordinates of a flat node index.
    pub fn coords(&self, idx: usize) -> (f64, f64, f64) {
        let (ix, iy, it) = self.unravel(idx);
        (self.x(ix), self.y(iy), self.t(it))
    }

    pub fn count(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::T => self.nt,
        }
    }

    pub fn step(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx(),
            Axis::Y => self.hy(),
            Axis::T => self.dt(),
        }
    }

    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => 1,
            Axis::Y => self.nx,
            Axis::T => self.nx * self.ny,
        }
    }

    /// Position of a node along one axis.
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: Axis) -> usize {
        let (ix, iy, it) = self.unravel(idx);
        match axis {
            Axis::X => ix,
            Axis::Y => iy,
            Axis::T => it,
        }
    }

    /// True when the node lies on the spatial boundary of the rectangle.
    pub fn on_spatial_boundary(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix + 1 == self.nx || iy + 1 == self.ny
    }

    /// Trapezoidal quadrature weight of a node in space-time.
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let (ix, iy, it) = self.unravel(idx);
        trapezoid_1d(ix, self.nx, self.hx())
            * trapezoid_1d(iy, self.ny, self.hy())
            * trapezoid_1d(it, self.nt, self.dt())
    }

    /// Same grid with a different number of nodes per axis.
    pub fn with_counts(&self, nx: usize, ny: usize, nt: usize) -> Result<Self> {
        Self::new(nx, ny, nt, self.lx, self.ly, self.t_final)
    }
}

/// Composite trapezoid weight of node `i` out of `n` with spacing `h`.
#[inline]
pub fn trapezoid_1d(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        0.5 * h
    } else {
        h
    }
}
