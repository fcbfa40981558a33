//! Closed-form fields written as sums of products of one-variable functions,
//! so that derivatives of any order stay in closed form.

use crate::fields::Axis;

/// A function of one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis1 {
    /// `c_0 + c_1 x + c_2 x^2 + ...`
    Poly(Vec<f64>),
    /// `amp sin(freq x + phase)`
    Trig { freq: f64, phase: f64, amp: f64 },
    /// `amp exp(rate x)`
    Exp { rate: f64, amp: f64 },
}

impl Basis1 {
    pub fn one() -> Self {
        Basis1::Poly(vec![1.0])
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Basis1::Poly(vec![c0, c1])
    }

    pub fn sin(freq: f64) -> Self {
        Basis1::Trig {
            freq,
            phase: 0.0,
            amp: 1.0,
        }
    }

    pub fn cos(freq: f64) -> Self {
        Basis1::Trig {
            freq,
            phase: std::f64::consts::FRAC_PI_2,
            amp: 1.0,
        }
    }

    pub fn exp(rate: f64) -> Self {
        Basis1::Exp { rate, amp: 1.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Basis1::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            Basis1::Trig { freq, phase, amp } => amp * (freq * x + phase).sin(),
            Basis1::Exp { rate, amp } => amp * (rate * x).exp(),
        }
    }

    pub fn deriv(&self) -> Self {
        match self {
            Basis1::Poly(c) => {
                if c.len() <= 1 {
                    Basis1::Poly(vec![0.0])
                } else {
                    Basis1::Poly(c.iter().enumerate().skip(1).map(|(k, &ck)| k as f64 * ck).collect())
                }
            }
            Basis1::Trig { freq, phase, amp } => Basis1::Trig {
                freq: *freq,
                phase: phase + std::f64::consts::FRAC_PI_2,
                amp: amp * freq,
            },
            Basis1::Exp { rate, amp } => Basis1::Exp {
                rate: *rate,
                amp: amp * rate,
            },
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Basis1::Poly(c) => c.iter().all(|&v| v == 0.0),
            Basis1::Trig { amp, .. } => *amp == 0.0,
            Basis1::Exp { amp, .. } => *amp == 0.0,
        }
    }
}

/// `coef fx(x) fy(y) ft(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub fx: Basis1,
    pub fy: Basis1,
    pub ft: Basis1,
}

impl Term {
    pub fn new(coef: f64, fx: Basis1, fy: Basis1, ft: Basis1) -> Self {
        Self { coef, fx, fy, ft }
    }
}

/// A finite sum of separable terms in `(x, y, t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Separable {
    terms: Vec<Term>,
}

impl Separable {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(vec![Term::new(c, Basis1::one(), Basis1::one(), Basis1::one())])
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|t| t.coef != 0.0 && !t.fx.is_zero() && !t.fy.is_zero() && !t.ft.is_zero())
            .collect();
        Self { terms }
    }

    pub fn term(coef: f64, fx: Basis1, fy: Basis1, ft: Basis1) -> Self {
        Self::from_terms(vec![Term::new(coef, fx, fy, ft)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|tm| tm.coef * tm.fx.eval(x) * tm.fy.eval(y) * tm.ft.eval(t))
            .sum()
    }

    pub fn d(&self, axis: Axis) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|tm| {
                    let mut out = tm.clone();
                    match axis {
                        Axis::X => out.fx = tm.fx.deriv(),
                        Axis::Y => out.fy = tm.fy.deriv(),
                        Axis::T => out.ft = tm.ft.deriv(),
                    }
                    out
                })
                .collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|tm| Term {
                    coef: tm.coef * a,
                    ..tm.clone()
                })
                .collect(),
        )
    }

    pub fn plus(&self, other: &Separable) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_derivative() {
        let p = Basis1::Poly(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.deriv(), Basis1::Poly(vec![-2.0, 6.0]));
        assert!((p.eval(2.0) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn trig_derivatives_cycle() {
        let s = Basis1::sin(2.0);
        let d2 = s.deriv().deriv();
        for x in [0.1, 0.7, 1.3] {
            assert!((d2.eval(x) + 4.0 * s.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_mixed_partial() {
        // x^2 y e^t
        let f = Separable::term(1.0, Basis1::Poly(vec![0.0, 0.0, 1.0]), Basis1::linear(0.0, 1.0), Basis1::exp(1.0));
        let fxy = f.d(Axis::X).d(Axis::Y);
        let (x, y, t) = (0.3, 0.8, 0.5);
        assert!((fxy.eval(x, y, t) - 2.0 * x * t.exp()).abs() < 1e-14);
        assert!(f.d(Axis::Y).d(Axis::Y).terms().is_empty());
    }
}
