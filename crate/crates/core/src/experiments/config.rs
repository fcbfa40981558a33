use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpaceTimeGrid;
use crate::forward::PROBLEM_IDS;
use crate::inversion::{check_omega0, InversionConfig, PreconditionerKind};
use crate::weights::{balance_s, build_weight, t0_cover, Balance, HolderBoundParams, BuildOptions, GammaSpec, Rect, WeightParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Domain width (length units).
    pub lx: f64,
    /// Domain height (length units).
    pub ly: f64,
    /// Final time (time units).
    pub t_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    pub lambda: f64,
    /// `None` picks `beta eps^2 = 0.75 d_sup`.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Time units.
    pub eps: f64,
    pub n: u32,
    /// Distance of the weight centre behind Γ (length units).
    pub bulge_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SStrategy {
    /// Every value in `values`.
    Fixed,
    /// The balancing value for the measured data misfit of each run.
    Balance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SSection {
    pub strategy: SStrategy,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Calibration constant in the growing branch `exp(C s) G^2`.
    pub c_cal: f64,
    /// Cap, also used when the misfit is zero.
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct T0Section {
    /// Use the covering `sqrt(2) eps + j eps / sqrt(N)`.
    pub auto: bool,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    pub w_pde: f64,
    pub w_div: f64,
    pub w_data: f64,
    #[serde(default)]
    pub alpha_reg: Option<f64>,
    pub cg_tol: f64,
    pub cg_maxit: usize,
    pub use_cutoff: bool,
    #[serde(default)]
    pub preconditioner: PreconditionerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub kappa: f64,
    pub grid: GridSection,
    pub gamma: GammaSpec,
    pub omega0: Rect,
    pub weight: WeightSection,
    /// Relative noise levels, nondecreasing.
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub s: SSection,
    pub t0: T0Section,
    pub inversion: InversionSection,
    pub output_dir: PathBuf,
    /// Worker threads for the sweep; 0 uses all cores.
    #[serde(default)]
    pub jobs: usize,
}

/// The configuration shipped in `configs/reference.toml`.
pub const REFERENCE_TOML: &str = include_str!("../../../../configs/reference.toml");

impl ExperimentConfig {
    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("reference configuration parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        let g = &self.grid;
        SpaceTimeGrid::new(g.nx, g.ny, g.nt, g.lx, g.ly, g.t_final).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Rect {
        Rect::domain(self.grid.lx, self.grid.ly)
    }

    /// Weight parameters centred at `t0`.
    pub fn weight_params(&self, t0: f64) -> Result<WeightParams> {
        let w = &self.weight;
        let d = build_weight(
            self.domain(),
            self.gamma,
            BuildOptions {
                bulge_depth: w.bulge_depth,
                ..BuildOptions::default()
            },
        )?;
        let beta = w.beta.unwrap_or_else(|| WeightParams::auto_beta(d.sup(), w.eps));
        WeightParams::new(d, w.lambda, beta, t0, w.n, w.eps)
    }

    pub fn t0_values(&self) -> Vec<f64> {
        if self.t0.auto {
            t0_cover(self.weight.eps, self.weight.n, self.grid.t_final)
        } else {
            self.t0.values.clone()
        }
    }

    /// Half-width of the time window attributed to each centre: the
    /// spacing `eps / sqrt(N)` of the covering.
    pub fn window_half_width(&self) -> f64 {
        self.weight.eps / (self.weight.n as f64).sqrt()
    }

    /// The s values to run for data with misfit `g` and a-priori magnitude
    /// `m`: the fixed list, or the balancing value capped at `s_max` (the
    /// cap alone when `g = 0`).
    pub fn s_choices(&self, g: f64, m: f64) -> Result<Vec<f64>> {
        Ok(match self.s.strategy {
            SStrategy::Fixed => self.s.values.clone(),
            SStrategy::Balance => {
                let mu = self.weight_params(self.t0_values()[0])?.levels();
                let p = HolderBoundParams::new(m, g, self.s.c_cal, mu[2], mu[3])?;
                let s = match balance_s(&p) {
                    Balance::Finite { s_star, .. } => s_star.min(self.s.s_max),
                    Balance::Unbounded { .. } => self.s.s_max,
                };
                vec![s]
            }
        })
    }

    pub fn inversion_config(&self, s: f64, t0: f64) -> Result<InversionConfig> {
        let iv = &self.inversion;
        Ok(InversionConfig {
            s,
            weight: self.weight_params(t0)?,
            w_pde: iv.w_pde,
            w_div: iv.w_div,
            w_data: iv.w_data,
            alpha_reg: iv.alpha_reg,
            cg_tol: iv.cg_tol,
            cg_maxit: iv.cg_maxit,
            use_cutoff: iv.use_cutoff,
            preconditioner: iv.preconditioner,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !PROBLEM_IDS.contains(&self.problem.as_str()) {
            return cfg(format!("unknown problem `{}`", self.problem));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return cfg(format!("kappa must be positive, got {}", self.kappa));
        }
        self.grid()?;
        if self.deltas.is_empty() {
            return cfg("noise level list is empty".into());
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return cfg("noise levels must be nonnegative".into());
        }
        if self.deltas.windows(2).any(|w| w[1] < w[0]) {
            return cfg("noise levels must be sorted".into());
        }
        if self.seeds.is_empty() {
            return cfg("seed list is empty".into());
        }
        let s = &self.s;
        if !(s.c_cal > 0.0 && s.c_cal.is_finite()) {
            return cfg(format!("c_cal must be positive, got {}", s.c_cal));
        }
        if !(s.s_max >= 0.0 && s.s_max.is_finite()) {
            return cfg(format!("s_max must be >= 0, got {}", s.s_max));
        }
        if s.strategy == SStrategy::Fixed && s.values.is_empty() {
            return cfg("fixed s strategy needs at least one value".into());
        }
        if s.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return cfg("s values must be nonnegative".into());
        }
        if !self.t0.auto && self.t0.values.is_empty() {
            return cfg("t0 list is empty".into());
        }
        let domain = self.domain();
        self.gamma
            .validate(&domain)
            .map_err(|e| Error::Config(e.to_string()))?;
        check_omega0(&self.omega0, &domain, &self.gamma)?;
        let t0s = self.t0_values();
        if t0s.is_empty() {
            return cfg("t0 covering is empty for this eps and T".into());
        }
        for &t0 in &t0s {
            self.inversion_config(s.s_max, t0)
                .and_then(|c| c.validate())
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parses_and_roundtrips() {
        let r = ExperimentConfig::reference();
        assert_eq!(r.grid.nx, 33);
        assert_eq!(r.t0_values().len(), 11);
        let back = ExperimentConfig::from_toml(&r.to_toml()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_noise_list_is_config_error() {
        let mut r = ExperimentConfig::reference();
        r.deltas.clear();
        let e = ExperimentConfig::from_toml(&r.to_toml()).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn unsorted_or_negative_noise_rejected() {
        let mut r = ExperimentConfig::reference();
        r.deltas = vec![1e-2, 1e-3];
        assert!(r.validate().unwrap_err().is_config());
        r.deltas = vec![-1e-3];
        assert!(r.validate().unwrap_err().is_config());
    }

    #[test]
    fn omega0_outside_gamma_rejected() {
        let mut r = ExperimentConfig::reference();
        r.omega0 = Rect::new(0.05, 0.3, 0.0, 0.1);
        assert!(r.validate().unwrap_err().is_config());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{}\nbogus = 1\n", REFERENCE_TOML);
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
