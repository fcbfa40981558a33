use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One side of the rectangle `(0, lx) x (0, ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Top,
    Left,
    Right,
}

impl Side {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
        }
    }
}

/// Axis-aligned open rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// `(0, lx) x (0, ly)`.
    pub fn domain(lx: f64, ly: f64) -> Self {
        Self::new(0.0, lx, 0.0, ly)
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    /// Open-set membership.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > self.x0 && x[0] < self.x1 && x[1] > self.y0 && x[1] < self.y1
    }

    pub fn contains_closed(&self, x: [f64; 2], tol: f64) -> bool {
        x[0] >= self.x0 - tol && x[0] <= self.x1 + tol && x[1] >= self.y0 - tol && x[1] <= self.y1 + tol
    }

    pub fn side_length(&self, side: Side) -> f64 {
        match side {
            Side::Bottom | Side::Top => self.x1 - self.x0,
            Side::Left | Side::Right => self.y1 - self.y0,
        }
    }
}

/// A segment of one side of the domain, parametrised by arclength from the
/// side's lower-left end: `[start, end]` along x for bottom/top, along y
/// for left/right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub side: Side,
    pub start: f64,
    pub end: f64,
}

impl GammaSpec {
    pub fn new(side: Side, start: f64, end: f64) -> Self {
        Self { side, start, end }
    }

    pub fn len(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Point at arclength `s` along the side.
    pub fn point(&self, domain: &Rect, s: f64) -> [f64; 2] {
        match self.side {
            Side::Bottom => [s, domain.y0],
            Side::Top => [s, domain.y1],
            Side::Left => [domain.x0, s],
            Side::Right => [domain.x1, s],
        }
    }

    pub fn midpoint(&self, domain: &Rect) -> [f64; 2] {
        self.point(domain, 0.5 * (self.start + self.end))
    }

    /// Check that the segment is nonempty and lies on its side.
    pub fn validate(&self, domain: &Rect) -> Result<()> {
        let (lo, hi) = match self.side {
            Side::Bottom | Side::Top => (domain.x0, domain.x1),
            Side::Left | Side::Right => (domain.y0, domain.y1),
        };
        if !(self.start.is_finite() && self.end.is_finite()) || self.is_empty() {
            let p = self.point(domain, self.start);
            return Err(Error::Construction {
                condition: "Γ must be a nonempty segment".into(),
                x: p[0],
                y: p[1],
            });
        }
        if self.start < lo - 1e-12 || self.end > hi + 1e-12 {
            let p = self.point(domain, self.start);
            return Err(Error::Construction {
                condition: "Γ must lie on a side of the domain".into(),
                x: p[0],
                y: p[1],
            });
        }
        Ok(())
    }

    /// Whether `x` lies on the closed segment, within `tol`.
    pub fn contains(&self, domain: &Rect, x: [f64; 2], tol: f64) -> bool {
        let (along, across, at) = match self.side {
            Side::Bottom => (x[0], x[1], domain.y0),
            Side::Top => (x[0], x[1], domain.y1),
            Side::Left => (x[1], x[0], domain.x0),
            Side::Right => (x[1], x[0], domain.x1),
        };
        (across - at).abs() <= tol && along >= self.start - tol && along <= self.end + tol
    }
}

/// `d(x) = r2 - |x - center|^2` on the closure of `domain` union the disk
/// `{d > 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWeight {
    pub center: [f64; 2],
    pub r2: f64,
    pub domain: Rect,
}

impl QuadraticWeight {
    pub fn eval(&self, x: [f64; 2]) -> Result<f64> {
        let d = self.r2 - dist2(x, self.center);
        if !self.domain.contains_closed(x, 1e-12) && d < -1e-12 {
            return Err(Error::Domain { x: x[0], y: x[1] });
        }
        Ok(d)
    }

    /// Evaluate without the domain check.
    #[inline]
    pub fn eval_unchecked(&self, x: [f64; 2]) -> f64 {
        self.r2 - dist2(x, self.center)
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [-2.0 * (x[0] - self.center[0]), -2.0 * (x[1] - self.center[1])]
    }

    /// `max d` over the closure of `{d > 0}`.
    pub fn sup(&self) -> f64 {
        self.r2
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Options for [`build_weight`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Distance of the circle centre beyond Γ along the outward normal.
    pub bulge_depth: f64,
    /// Sample count per axis for the invariant checks.
    pub samples: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            bulge_depth: 0.04,
            samples: 201,
        }
    }
}

/// Build the weight function for a rectangle and a boundary segment Γ.
///
/// The circle `{d = 0}` passes through both ends of Γ with its centre
/// `bulge_depth` outside the domain, so `{d > 0}` is the domain-side lens
/// bulging across Γ and `d <= 0` on the rest of the boundary. The
/// invariants are checked on a dense sample.
pub fn build_weight(domain: Rect, gamma: GammaSpec, opts: BuildOptions) -> Result<QuadraticWeight> {
    if domain.is_empty() {
        return Err(Error::Geometry("domain rectangle is empty".into()));
    }
    gamma.validate(&domain)?;
    let mid = gamma.midpoint(&domain);
    let n = gamma.side.outward_normal();
    let depth = opts.bulge_depth;
    if !depth.is_finite() || depth < 0.0 {
        return Err(Error::Construction {
            condition: "bulge depth must be nonnegative".into(),
            x: mid[0],
            y: mid[1],
        });
    }
    let center = [mid[0] + depth * n[0], mid[1] + depth * n[1]];
    let half = 0.5 * gamma.len();
    let w = QuadraticWeight {
        center,
        r2: depth * depth + half * half,
        domain,
    };
    validate_weight(&w, &gamma, opts.samples.max(3))?;
    Ok(w)
}

fn fail(condition: &str, x: [f64; 2]) -> Error {
    Error::Construction {
        condition: condition.into(),
        x: x[0],
        y: x[1],
    }
}

fn validate_weight(w: &QuadraticWeight, gamma: &GammaSpec, m: usize) -> Result<()> {
    let dom = &w.domain;
    let scale = w.r2.sqrt();
    // |grad d| > 0 on the closed domain: the only critical point is the centre.
    if dom.contains_closed(w.center, 1e-12) {
        return Err(fail("|grad d| > 0 on the closed domain", w.center));
    }
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (m - 1) as f64;
    for iy in 0..m {
        for ix in 0..m {
            let x = [lin(dom.x0, dom.x1, ix), lin(dom.y0, dom.y1, iy)];
            let g = w.gradient(x);
            if g[0].hypot(g[1]) <= 1e-9 * scale {
                return Err(fail("|grad d| > 0 on the closed domain", x));
            }
        }
    }
    // d > 0 inside the disk, d = 0 on its boundary circle.
    let r = scale;
    for iy in 0..m {
        for ix in 0..m {
            let x = [
                lin(w.center[0] - r, w.center[0] + r, ix),
                lin(w.center[1] - r, w.center[1] + r, iy),
            ];
            if dist2(x, w.center) < w.r2 * (1.0 - 1e-9) && w.eval_unchecked(x) <= 0.0 {
                return Err(fail("d > 0 in the extended domain", x));
            }
        }
    }
    for k in 0..4 * m {
        let a = std::f64::consts::TAU * k as f64 / (4 * m) as f64;
        let x = [w.center[0] + r * a.cos(), w.center[1] + r * a.sin()];
        if w.eval_unchecked(x).abs() > 1e-12 * w.r2.max(1.0) {
            return Err(fail("d = 0 on the boundary of the extended domain", x));
        }
    }
    // d <= 0 on the boundary away from Γ, and d > 0 somewhere on Γ.
    let tol = 1e-9 * scale.max(1.0);
    let sides = [
        (Side::Bottom, dom.x0, dom.x1),
        (Side::Top, dom.x0, dom.x1),
        (Side::Left, dom.y0, dom.y1),
        (Side::Right, dom.y0, dom.y1),
    ];
    for (side, lo, hi) in sides {
        let probe = GammaSpec::new(side, lo, hi);
        for k in 0..m {
            let x = probe.point(dom, lin(lo, hi, k));
            if gamma.contains(dom, x, 1e-12) {
                continue;
            }
            if w.eval_unchecked(x) > tol {
                return Err(fail("d <= 0 on the boundary outside Γ", x));
            }
        }
    }
    let mid = gamma.midpoint(dom);
    if w.eval_unchecked(mid) <= 0.0 {
        return Err(fail("d > 0 on Γ", mid));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bottom_side_bulge_passes() {
        let dom = Rect::domain(1.0, 1.0);
        let g = GammaSpec::new(Side::Bottom, 0.0, 1.0);
        let w = build_weight(dom, g, BuildOptions { bulge_depth: 0.5, samples: 201 }).unwrap();
        assert!((w.sup() - 0.5).abs() < 1e-15);
        assert_eq!(w.center, [0.5, -0.5]);
    }

    #[test]
    fn empty_gamma_fails() {
        let dom = Rect::domain(1.0, 1.0);
        let g = GammaSpec::new(Side::Bottom, 0.4, 0.4);
        assert!(matches!(
            build_weight(dom, g, BuildOptions::default()),
            Err(Error::Construction { .. })
        ));
    }

    #[test]
    fn zero_depth_fails() {
        let dom = Rect::domain(1.0, 1.0);
        let g = GammaSpec::new(Side::Bottom, 0.0, 1.0);
        let err = build_weight(dom, g, BuildOptions { bulge_depth: 0.0, samples: 201 }).unwrap_err();
        assert!(err.to_string().contains("grad d"), "{err}");
    }

    #[test]
    fn gamma_off_side_fails() {
        let dom = Rect::domain(1.0, 1.0);
        let g = GammaSpec::new(Side::Left, 0.5, 1.5);
        assert!(build_weight(dom, g, BuildOptions::default()).is_err());
    }

    #[test]
    fn domain_error_outside() {
        let dom = Rect::domain(1.0, 1.0);
        let g = GammaSpec::new(Side::Bottom, 0.25, 0.75);
        let w = build_weight(dom, g, BuildOptions::default()).unwrap();
        assert!(matches!(w.eval([3.0, 3.0]), Err(Error::Domain { .. })));
        assert!(w.eval([0.5, 0.5]).is_ok());
    }
}
