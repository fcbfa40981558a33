use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the two-branch bound `B(s) = e^{-s(mu4-mu3)} M^2 + e^{C s} G^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBoundParams {
    pub m: f64,
    pub g: f64,
    pub c_cal: f64,
    pub mu3: f64,
    pub mu4: f64,
}

impl HolderBoundParams {
    pub fn new(m: f64, g: f64, c_cal: f64, mu3: f64, mu4: f64) -> Result<Self> {
        let all = [m, g, c_cal, mu3, mu4];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("bound parameters must be finite".into()));
        }
        if m < 0.0 || g < 0.0 {
            return Err(Error::InvalidParams(format!("M and G must be >= 0, got {m}, {g}")));
        }
        if c_cal <= 0.0 || mu3 <= 0.0 {
            return Err(Error::InvalidParams("C_cal and mu3 must be positive".into()));
        }
        if mu4 <= mu3 {
            return Err(Error::InvalidParams(format!("need mu4 > mu3, got {mu4} <= {mu3}")));
        }
        Ok(Self { m, g, c_cal, mu3, mu4 })
    }

    pub fn gap(&self) -> f64 {
        self.mu4 - self.mu3
    }

    /// `theta = (mu4 - mu3) / (C + mu4 - mu3)`.
    pub fn theta(&self) -> f64 {
        holder_theta(self.gap(), self.c_cal)
    }
}

pub fn holder_theta(gap: f64, c_cal: f64) -> f64 {
    gap / (c_cal + gap)
}

/// `C_cal` implied by an observed exponent: `gap (1 - theta) / theta`.
pub fn implied_c_cal(theta: f64, gap: f64) -> f64 {
    gap * (1.0 - theta) / theta
}

/// The decaying and growing branches at `s`.
pub fn holder_terms(p: &HolderBoundParams, s: f64) -> (f64, f64) {
    ((-s * p.gap()).exp() * p.m * p.m, (p.c_cal * s).exp() * p.g * p.g)
}

pub fn holder_bound(p: &HolderBoundParams, s: f64) -> f64 {
    let (a, b) = holder_terms(p, s);
    a + b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Balance {
    /// The balancing parameter, clamped to 0 when `G >= M`.
    Finite { s_star: f64, theta: f64 },
    /// `G = 0`: the bound decreases without limit as `s` grows.
    Unbounded { theta: f64 },
}

impl Balance {
    pub fn theta(&self) -> f64 {
        match *self {
            Balance::Finite { theta, .. } | Balance::Unbounded { theta } => theta,
        }
    }
}

/// `s* = log(M^2 / G^2) / (C + mu4 - mu3)`, where the two branches are equal.
pub fn balance_s(p: &HolderBoundParams) -> Balance {
    let theta = p.theta();
    if p.g == 0.0 {
        return Balance::Unbounded { theta };
    }
    if p.g >= p.m {
        return Balance::Finite { s_star: 0.0, theta };
    }
    let s_star = 2.0 * (p.m / p.g).ln() / (p.c_cal + p.gap());
    Balance::Finite { s_star, theta }
}

/// `B(s*) = 2 M^{2C/(C+gap)} G^{2 gap/(C+gap)}`.
pub fn balanced_value(p: &HolderBoundParams) -> f64 {
    let k = p.c_cal + p.gap();
    2.0 * p.m.powf(2.0 * p.c_cal / k) * p.g.powf(2.0 * p.gap() / k)
}

/// Exact minimiser of `B` on `s >= 0`: `log(gap M^2 / (C G^2)) / (C + gap)`.
///
/// Coincides with the balancing point only when `C = mu4 - mu3`.
pub fn minimize_bound(p: &HolderBoundParams) -> Option<(f64, f64)> {
    if p.g == 0.0 {
        return None;
    }
    if p.m == 0.0 {
        return Some((0.0, holder_bound(p, 0.0)));
    }
    let s = ((p.gap() * p.m * p.m) / (p.c_cal * p.g * p.g)).ln() / (p.c_cal + p.gap());
    let s = s.max(0.0);
    Some((s, holder_bound(p, s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: f64, g: f64, c: f64, gap: f64) -> HolderBoundParams {
        HolderBoundParams::new(m, g, c, 1.0, 1.0 + gap).unwrap()
    }

    #[test]
    fn equal_data_gives_zero_s() {
        match balance_s(&p(0.3, 0.3, 1.0, 1.0)) {
            Balance::Finite { s_star, .. } => assert_eq!(s_star, 0.0),
            b => panic!("{b:?}"),
        }
    }

    #[test]
    fn theta_quarter() {
        assert!((p(1.0, 0.1, 3.0, 1.0).theta() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn branches_balance() {
        let q = p(2.0, 0.01, 1.7, 0.4);
        let Balance::Finite { s_star, .. } = balance_s(&q) else { panic!() };
        let (a, b) = holder_terms(&q, s_star);
        assert!((a - b).abs() <= 1e-12 * a);
        assert!((holder_bound(&q, s_star) - balanced_value(&q)).abs() <= 1e-12 * a);
    }

    #[test]
    fn zero_g_is_unbounded() {
        assert!(matches!(balance_s(&p(1.0, 0.0, 1.0, 1.0)), Balance::Unbounded { .. }));
    }

    #[test]
    fn zero_m_minimised_at_origin() {
        let q = p(0.0, 0.2, 1.0, 1.0);
        let (s, b) = minimize_bound(&q).unwrap();
        assert_eq!(s, 0.0);
        assert!((b - 0.04).abs() < 1e-15);
    }

    #[test]
    fn large_g_clamps() {
        match balance_s(&p(0.1, 1.0, 1.0, 1.0)) {
            Balance::Finite { s_star, .. } => assert_eq!(s_star, 0.0),
            b => panic!("{b:?}"),
        }
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(HolderBoundParams::new(1.0, 1.0, 1.0, 2.0, 1.0).is_err());
    }
}
