use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fields::FlowState;
use crate::forward::{extract_cauchy, manufactured_solution, CauchyTrace, ProblemSpec};
use crate::inversion::{apriori_magnitude, interior_error, minimize, InteriorError};
use crate::weights::implied_c_cal;

/// One inversion: a noise level, a seed, an s choice and a weight centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub delta: f64,
    pub seed: u64,
    pub s_index: usize,
    pub s: f64,
    pub t0: f64,
    /// Measured data misfit.
    pub g: f64,
    /// A-priori magnitude of the truth.
    pub m: f64,
    pub v_h21: f64,
    pub p_h10: f64,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    /// Empty on success, otherwise the failure message.
    pub failure: String,
    #[serde(skip)]
    pub levels: Option<InteriorError>,
    pub runtime_s: f64,
}

impl CellRecord {
    pub fn ok(&self) -> bool {
        self.failure.is_empty()
    }
}

/// Union over the weight centres of one `(delta, seed, s)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub delta: f64,
    pub seed: u64,
    pub s_index: usize,
    pub s: f64,
    pub g: f64,
    pub v_h21: f64,
    pub p_h10: f64,
    pub error: f64,
    pub cells_ok: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub theta: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: ExperimentConfig,
    pub m: f64,
    /// `mu4 - mu3`.
    pub gap: f64,
    pub cells: Vec<CellRecord>,
    /// Clean-data runs over all centres, the source of `floor`.
    pub baseline: Vec<CellRecord>,
    pub floor: Option<f64>,
    pub aggregates: Vec<Aggregate>,
    /// `(delta, median error over seeds)` per noise level and s index.
    pub medians: Vec<(f64, usize, f64)>,
    pub fit: Option<HolderFit>,
    pub fit_note: Option<String>,
    pub implied_c_cal: Option<f64>,
    pub partial: bool,
    pub runtime_s: f64,
}

impl StabilityReport {
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            config,
            m: 0.0,
            gap: 0.0,
            cells: Vec::new(),
            baseline: Vec::new(),
            floor: None,
            aggregates: Vec::new(),
            medians: Vec::new(),
            fit: None,
            fit_note: None,
            implied_c_cal: None,
            partial: false,
            runtime_s: 0.0,
        }
    }

    /// Median error per noise level for the first s choice.
    pub fn median_curve(&self) -> Vec<(f64, f64)> {
        self.medians
            .iter()
            .filter(|m| m.1 == 0)
            .map(|m| (m.0, m.2))
            .collect()
    }
}

struct Job<'a> {
    delta: f64,
    seed: u64,
    s_index: usize,
    s: f64,
    t0: f64,
    trace: &'a CauchyTrace,
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    spec: &'a ProblemSpec,
    truth: &'a FlowState,
    m: f64,
}

fn run_job(sh: &Shared, job: &Job) -> CellRecord {
    let start = Instant::now();
    let mut rec = CellRecord {
        delta: job.delta,
        seed: job.seed,
        s_index: job.s_index,
        s: job.s,
        t0: job.t0,
        g: job.trace.misfit,
        m: sh.m,
        v_h21: f64::NAN,
        p_h10: f64::NAN,
        error: f64::NAN,
        iterations: 0,
        converged: false,
        relative_residual: f64::NAN,
        failure: String::new(),
        levels: None,
        runtime_s: 0.0,
    };
    let outcome = (|| -> Result<()> {
        let icfg = sh.cfg.inversion_config(job.s, job.t0)?;
        let r = minimize(sh.spec, job.trace, &icfg)?;
        rec.iterations = r.iterations;
        rec.converged = r.converged;
        rec.relative_residual = r.relative_residual;
        let hw = sh.cfg.window_half_width();
        let e = interior_error(&r.state, sh.truth, &sh.cfg.omega0, &sh.cfg.gamma, (job.t0 - hw, job.t0 + hw))?;
        rec.v_h21 = e.v_h21;
        rec.p_h10 = e.p_h10;
        rec.error = e.total();
        rec.levels = Some(e);
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.failure = e.to_string();
    }
    rec.runtime_s = start.elapsed().as_secs_f64();
    log::info!(
        "delta={:e} seed={} s={:.4} t0={:.4}: error={:.4e} ({} it, {:.1}s){}",
        rec.delta,
        rec.seed,
        rec.s,
        rec.t0,
        rec.error,
        rec.iterations,
        rec.runtime_s,
        if rec.ok() { String::new() } else { format!(" FAILED: {}", rec.failure) }
    );
    rec
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Run every `(delta, seed, s, t0)` cell of the experiment.
///
/// Cells are independent and run on a pool of `config.jobs` workers; the
/// output order is fixed by the configuration, so the report does not
/// depend on the pool width. A failing cell is recorded and marks the
/// report partial.
pub fn run_sweep(config: &ExperimentConfig) -> Result<StabilityReport> {
    config.validate()?;
    let start = Instant::now();
    let grid = config.grid()?;
    let man = manufactured_solution(&config.problem, &grid, config.kappa)?;
    let m = apriori_magnitude(&man.truth);
    let t0s = config.t0_values();
    let mu = config.weight_params(t0s[0])?.levels();
    let shared = Shared {
        cfg: config,
        spec: &man.spec,
        truth: &man.truth,
        m,
    };

    let mut traces = Vec::new();
    for &delta in &config.deltas {
        for &seed in &config.seeds {
            let trace = extract_cauchy(&man.truth, &config.gamma, config.kappa, delta, seed)?;
            let s = config.s_choices(trace.misfit, m)?;
            traces.push((trace, s));
        }
    }
    let need_baseline = !config.deltas.contains(&0.0);
    let baseline_trace = if need_baseline {
        let trace = extract_cauchy(&man.truth, &config.gamma, config.kappa, 0.0, config.seeds[0])?;
        let s = config.s_choices(0.0, m)?;
        Some((trace, s))
    } else {
        None
    };

    let mut jobs = Vec::new();
    for (trace, s) in &traces {
        for (si, &sv) in s.iter().enumerate() {
            for &t0 in &t0s {
                jobs.push(Job {
                    delta: trace.delta,
                    seed: trace.seed,
                    s_index: si,
                    s: sv,
                    t0,
                    trace,
                });
            }
        }
    }
    let n_main = jobs.len();
    if let Some((trace, s)) = &baseline_trace {
        for &t0 in &t0s {
            jobs.push(Job {
                delta: 0.0,
                seed: trace.seed,
                s_index: 0,
                s: s[0],
                t0,
                trace,
            });
        }
    }
    log::info!("sweep: {} cells on {} workers", jobs.len(), if config.jobs == 0 { rayon::current_num_threads() } else { config.jobs });
    let mut records: Vec<CellRecord> = pool(config.jobs)?.install(|| jobs.par_iter().map(|j| run_job(&shared, j)).collect());
    let baseline_runs = records.split_off(n_main);
    let cells = records;

    let mut report = StabilityReport::empty(config.clone());
    report.m = m;
    report.gap = mu[3] - mu[2];
    report.aggregates = aggregate(&cells);
    let baseline = if need_baseline {
        baseline_runs
    } else {
        cells
            .iter()
            .filter(|c| c.delta == 0.0 && c.seed == config.seeds[0] && c.s_index == 0)
            .cloned()
            .collect()
    };
    report.floor = union_error(&baseline).map(|e| e.total());
    report.partial = cells.iter().chain(&baseline).any(|c| !c.ok());
    report.cells = cells;
    report.baseline = baseline;
    report.medians = medians(&report.aggregates);
    finish_fit(&mut report);
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Fit the median curve and record the implied calibration constant.
pub fn finish_fit(report: &mut StabilityReport) {
    let curve: Vec<(f64, f64)> = report.median_curve().into_iter().filter(|p| p.0 > 0.0).collect();
    let deltas: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let errors: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let threshold = report.floor.map(|f| 3.0 * f).unwrap_or(0.0);
    match fit_holder(&deltas, &errors, threshold) {
        Ok(fit) => {
            report.implied_c_cal = (fit.theta > 0.0 && report.gap > 0.0).then(|| implied_c_cal(fit.theta, report.gap));
            report.fit = Some(fit);
            report.fit_note = None;
        }
        Err(e) => {
            report.fit = None;
            report.implied_c_cal = None;
            report.fit_note = Some(e.to_string());
        }
    }
}

fn union_error(cells: &[CellRecord]) -> Option<InteriorError> {
    let levels: Vec<&InteriorError> = cells.iter().filter_map(|c| c.levels.as_ref()).collect();
    if levels.len() < cells.len() {
        return None;
    }
    InteriorError::max_over_levels(&levels)
}

fn aggregate(cells: &[CellRecord]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let c = &cells[i];
        let j = cells[i..]
            .iter()
            .position(|d| (d.delta, d.seed, d.s_index) != (c.delta, c.seed, c.s_index))
            .map_or(cells.len(), |k| i + k);
        let group = &cells[i..j];
        let ok = group.iter().filter(|c| c.ok()).count();
        let (v, p) = match union_error(group) {
            Some(e) => (e.v_h21, e.p_h10),
            None => (f64::NAN, f64::NAN),
        };
        out.push(Aggregate {
            delta: c.delta,
            seed: c.seed,
            s_index: c.s_index,
            s: c.s,
            g: c.g,
            v_h21: v,
            p_h10: p,
            error: v + p,
            cells_ok: ok,
            cells: group.len(),
        });
        i = j;
    }
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median over seeds per `(delta, s_index)`, skipping failed aggregates.
pub fn medians(aggs: &[Aggregate]) -> Vec<(f64, usize, f64)> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for a in aggs {
        if !keys.iter().any(|k| *k == (a.delta, a.s_index)) {
            keys.push((a.delta, a.s_index));
        }
    }
    keys.into_iter()
        .filter_map(|(d, si)| {
            let xs: Vec<f64> = aggs
                .iter()
                .filter(|a| a.delta == d && a.s_index == si && a.error.is_finite())
                .map(|a| a.error)
                .collect();
            (!xs.is_empty()).then(|| (d, si, median(xs)))
        })
        .collect()
}

/// Least-squares line through `(log delta, log error)`.
///
/// Points with `error <= floor_threshold` are dropped before fitting.
pub fn fit_holder(deltas: &[f64], errors: &[f64], floor_threshold: f64) -> Result<HolderFit> {
    if deltas.len() != errors.len() {
        return Err(Error::Shape(format!("{} noise levels but {} errors", deltas.len(), errors.len())));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidParams("noise levels in a fit must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(_, e)| e.is_finite() && **e > floor_threshold && **e > 0.0)
        .map(|(d, e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("fit needs at least two distinct noise levels".into()));
    }
    let theta = sxy / sxx;
    let intercept = my - theta * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(HolderFit {
        theta,
        intercept,
        r2,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DELTAS: [f64; 5] = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1];

    #[test]
    fn exact_linear_law() {
        let e: Vec<f64> = DELTAS.iter().map(|d| 2.5 * d).collect();
        let f = fit_holder(&DELTAS, &e, 0.0).unwrap();
        assert!((f.theta - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_square_root_law() {
        let e: Vec<f64> = DELTAS.iter().map(|d| 0.7 * d.sqrt()).collect();
        let f = fit_holder(&DELTAS, &e, 0.0).unwrap();
        assert!((f.theta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jittered_square_root_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e: Vec<f64> = DELTAS
            .iter()
            .map(|d| 0.7 * d.sqrt() * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            .collect();
        let f = fit_holder(&DELTAS, &e, 0.0).unwrap();
        assert!((0.45..=0.55).contains(&f.theta), "{}", f.theta);
        assert!(f.r2 > 0.99);
    }

    #[test]
    fn floor_exclusion_and_insufficient_points() {
        let e = [0.1, 0.1, 0.3, 0.9, 2.7];
        let f = fit_holder(&DELTAS, &e, 0.15).unwrap();
        assert_eq!(f.points, 3);
        assert!(matches!(
            fit_holder(&DELTAS, &e, 0.5),
            Err(Error::InsufficientPoints(2))
        ));
        assert!(fit_holder(&[1e-3, 1e-2], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn medians_over_seeds() {
        let agg = |delta, seed, error| Aggregate {
            delta,
            seed,
            s_index: 0,
            s: 1.0,
            g: 0.0,
            v_h21: error,
            p_h10: 0.0,
            error,
            cells_ok: 1,
            cells: 1,
        };
        let aggs = [agg(0.1, 1, 3.0), agg(0.1, 2, 1.0), agg(0.1, 3, 2.0), agg(0.2, 1, 5.0), agg(0.2, 2, 7.0)];
        assert_eq!(medians(&aggs), vec![(0.1, 0, 2.0), (0.2, 0, 6.0)]);
    }

    #[test]
    fn aggregation_groups_contiguous_cells() {
        let cell = |delta, seed, t0, lv: Vec<f64>| CellRecord {
            delta,
            seed,
            s_index: 0,
            s: 2.0,
            t0,
            g: 0.0,
            m: 1.0,
            v_h21: 0.0,
            p_h10: 0.0,
            error: 0.0,
            iterations: 1,
            converged: true,
            relative_residual: 0.0,
            failure: String::new(),
            levels: Some(InteriorError {
                v_h21: 0.0,
                p_h10: 0.0,
                p_level_sq: vec![0.0; lv.len()],
                v_level_sq: lv,
            }),
            runtime_s: 0.0,
        };
        let cells = [
            cell(0.1, 1, 0.3, vec![4.0, 0.0]),
            cell(0.1, 1, 0.6, vec![1.0, 9.0]),
            cell(0.1, 2, 0.3, vec![0.0, 0.0]),
        ];
        let a = aggregate(&cells);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].error, 13.0f64.sqrt());
        assert_eq!(a[0].cells, 2);
        assert_eq!(a[1].error, 0.0);
    }
}
