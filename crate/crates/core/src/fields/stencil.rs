//! One-dimensional finite-difference stencils.
//!
//! Central differences in the interior, second-order one-sided formulas at
//! the two ends. Every discrete operator in the crate (field operators,
//! assembled least-squares rows, boundary traces) is built from these, so
//! the matrix and matrix-free paths agree to rounding.

/// Up to five weighted taps at signed offsets from the target node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    offsets: [isize; 5],
    coeffs: [f64; 5],
    len: usize,
}

impl Stencil {
    fn new(taps: &[(isize, f64)]) -> Self {
        let mut s = Stencil {
            offsets: [0; 5],
            coeffs: [0.0; 5],
            len: taps.len(),
        };
        for (k, &(o, c)) in taps.iter().enumerate() {
            s.offsets[k] = o;
            s.coeffs[k] = c;
        }
        s
    }

    pub fn taps(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        self.offsets[..self.len]
            .iter()
            .copied()
            .zip(self.coeffs[..self.len].iter().copied())
    }

    /// Apply along a strided line: `values[base + offset * stride]`.
    ///
    /// Every stencil annihilates constants, so taps are applied to
    /// differences from the centre value; constants then give exactly 0.
    #[inline]
    pub fn apply(&self, values: &[f64], base: usize, stride: usize) -> f64 {
        let centre = values[base];
        let mut acc = 0.0;
        for k in 0..self.len {
            if self.offsets[k] == 0 {
                continue;
            }
            let j = base as isize + self.offsets[k] * stride as isize;
            acc += self.coeffs[k] * (values[j as usize] - centre);
        }
        acc
    }
}

/// First derivative at position `i` of `n >= 3` nodes with spacing `h`.
pub fn first(i: usize, n: usize, h: f64) -> Stencil {
    debug_assert!(n >= 3 && i < n);
    let c = 1.0 / (2.0 * h);
    if i == 0 {
        Stencil::new(&[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
    } else if i + 1 == n {
        Stencil::new(&[(0, 3.0 * c), (-1, -4.0 * c), (-2, c)])
    } else {
        Stencil::new(&[(-1, -c), (1, c)])
    }
}

/// Fourth-order first derivative; needs `n >= 5`. Exact on quartics.
pub fn first_fourth_order(i: usize, n: usize, h: f64) -> Stencil {
    debug_assert!(n >= 5 && i < n);
    let c = 1.0 / (12.0 * h);
    let fwd0 = [(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)];
    let fwd1 = [(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)];
    let taps: Vec<(isize, f64)> = if i == 0 {
        fwd0.iter().map(|&(o, w)| (o, w * c)).collect()
    } else if i == 1 {
        fwd1.iter().map(|&(o, w)| (o, w * c)).collect()
    } else if i + 1 == n {
        fwd0.iter().map(|&(o, w)| (-o, -w * c)).collect()
    } else if i + 2 == n {
        fwd1.iter().map(|&(o, w)| (-o, -w * c)).collect()
    } else {
        vec![(-2, c), (-1, -8.0 * c), (1, 8.0 * c), (2, -c)]
    };
    Stencil::new(&taps)
}

/// Second derivative at position `i` of `n >= 3` nodes with spacing `h`.
///
/// With only three nodes the end formula degrades to first order.
pub fn second(i: usize, n: usize, h: f64) -> Stencil {
    debug_assert!(n >= 3 && i < n);
    let c = 1.0 / (h * h);
    if i == 0 {
        if n >= 4 {
            Stencil::new(&[(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)])
        } else {
            Stencil::new(&[(0, c), (1, -2.0 * c), (2, c)])
        }
    } else if i + 1 == n {
        if n >= 4 {
            Stencil::new(&[(0, 2.0 * c), (-1, -5.0 * c), (-2, 4.0 * c), (-3, -c)])
        } else {
            Stencil::new(&[(0, c), (-1, -2.0 * c), (-2, c)])
        }
    } else {
        Stencil::new(&[(-1, c), (0, -2.0 * c), (1, c)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(st: Stencil, f: impl Fn(f64) -> f64, i: usize, h: f64) -> f64 {
        st.taps()
            .map(|(o, c)| c * f((i as isize + o) as f64 * h))
            .sum()
    }

    #[test]
    fn first_derivative_exact_on_quadratics() {
        let n = 6;
        let h = 0.3;
        for i in 0..n {
            let x = i as f64 * h;
            let d = eval(first(i, n, h), |x| 2.0 - x + 3.0 * x * x, i, h);
            assert!((d - (-1.0 + 6.0 * x)).abs() < 1e-12, "i={i}");
        }
    }

    #[test]
    fn second_derivative_exact_on_cubics() {
        let n = 6;
        let h = 0.25;
        for i in 0..n {
            let x = i as f64 * h;
            let d = eval(second(i, n, h), |x| x * x * x - 2.0 * x * x, i, h);
            assert!((d - (6.0 * x - 4.0)).abs() < 1e-10, "i={i}");
        }
    }

    #[test]
    fn fourth_order_exact_on_quartics() {
        let n = 7;
        let h = 0.2;
        let f = |x: f64| x.powi(4) - 2.0 * x.powi(3) + x - 1.0;
        let df = |x: f64| 4.0 * x.powi(3) - 6.0 * x * x + 1.0;
        for i in 0..n {
            let d = eval(first_fourth_order(i, n, h), f, i, h);
            assert!((d - df(i as f64 * h)).abs() < 1e-11, "i={i}");
        }
    }

    #[test]
    fn constants_annihilated() {
        for n in [3, 4, 9] {
            for i in 0..n {
                let s1: f64 = first(i, n, 0.1).taps().map(|(_, c)| c).sum();
                let s2: f64 = second(i, n, 0.1).taps().map(|(_, c)| c).sum();
                assert!(s1.abs() < 1e-12 && s2.abs() < 1e-9);
            }
        }
    }
}
