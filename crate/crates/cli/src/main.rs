use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nscauchy::experiments::{emit_report, render_plot, run_checks, run_sweep, ExperimentConfig, SStrategy};
use nscauchy::fields::io::write_binary;
use nscauchy::forward::{extract_cauchy, manufactured_solution, solve_forward_with, write_cauchy, ForwardSettings};
use nscauchy::inversion::{apriori_magnitude, interior_error, minimize, write_result};
use nscauchy::{Error, Result};

#[derive(Parser)]
#[command(name = "nscauchy", version, about = "Reconstruct linearized Navier-Stokes flows from lateral Cauchy data")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); the built-in reference when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and dump the fields.
    Forward {
        #[command(flatten)]
        common: Common,
    },
    /// Extract noisy Cauchy data on Γ.
    Traces {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
    },
    /// Run one reconstruction.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise level (first entry is used).
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        /// Carleman parameter, or `balance`.
        #[arg(long)]
        s: Option<String>,
        /// Weight centre; the middle of the covering when omitted.
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Run the noise sweep and write the stability report.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Use this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        /// Comma-separated list, or `balance`.
        #[arg(long)]
        s: Option<String>,
    },
    /// Run the identity and inclusion validations.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-render the plot of a finished sweep from its CSV tables.
    Plot {
        /// Sweep output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn apply_s(cfg: &mut ExperimentConfig, s: &str) -> Result<()> {
    if s.trim() == "balance" {
        cfg.s.strategy = SStrategy::Balance;
        return Ok(());
    }
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("--s expects a number list or `balance`, got `{s}`")))?;
    cfg.s.strategy = SStrategy::Fixed;
    cfg.s.values = values;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn forward(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let grid = cfg.grid()?;
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa)?;
    let rep = solve_forward_with(&man.spec, &grid, ForwardSettings::default())?;
    mkdir(&cfg.output_dir)?;
    let s = &rep.state;
    let bin = cfg.output_dir.join("forward.bin");
    write_binary(&bin, &[s.v.component(0), s.v.component(1), &s.p])?;
    let ev = (&s.v - &man.truth.v).sup_norm();
    let window = (0.0, grid.t_final());
    let err = interior_error(s, &man.truth, &cfg.omega0, &cfg.gamma, window)?;
    let worst_div = rep.mass.iter().map(|m| m.0).fold(0.0, f64::max);
    write_json(
        &cfg.output_dir.join("forward.json"),
        &json!({
            "problem": cfg.problem,
            "grid": [grid.nx(), grid.ny(), grid.nt()],
            "iterations": rep.iterations,
            "velocity_sup_error": ev,
            "omega0_v_h21_error": err.v_h21,
            "omega0_p_h10_error": err.p_h10,
            "max_divergence_norm": worst_div,
        }),
    )?;
    println!("forward: velocity sup error {ev:.3e}, interior error {:.3e}; wrote {}", err.total(), bin.display());
    Ok(())
}

fn traces(common: &Common, seed: Option<u64>, delta: Option<Vec<f64>>) -> Result<()> {
    let cfg = load(common)?;
    let grid = cfg.grid()?;
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa)?;
    mkdir(&cfg.output_dir)?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    for d in delta.unwrap_or_else(|| cfg.deltas.clone()) {
        let tr = extract_cauchy(&man.truth, &cfg.gamma, cfg.kappa, d, seed)?;
        let path = cfg.output_dir.join(format!("traces_delta{d:e}_seed{seed}.csv"));
        write_cauchy(&tr, &path)?;
        println!("delta {d:e}: misfit {:.3e}; wrote {}", tr.misfit, path.display());
    }
    Ok(())
}

fn invert(common: &Common, seed: Option<u64>, delta: Option<Vec<f64>>, s: Option<String>, t0: Option<f64>) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(s) = &s {
        apply_s(&mut cfg, s)?;
    }
    let grid = cfg.grid()?;
    let man = manufactured_solution(&cfg.problem, &grid, cfg.kappa)?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let d = delta.and_then(|v| v.first().copied()).unwrap_or(cfg.deltas[0]);
    let t0s = cfg.t0_values();
    let t0 = t0.unwrap_or(t0s[t0s.len() / 2]);
    let tr = extract_cauchy(&man.truth, &cfg.gamma, cfg.kappa, d, seed)?;
    let s = cfg.s_choices(tr.misfit, apriori_magnitude(&man.truth))?[0];
    let icfg = cfg.inversion_config(s, t0)?;
    let r = minimize(&man.spec, &tr, &icfg)?;
    let hw = cfg.window_half_width();
    let err = interior_error(&r.state, &man.truth, &cfg.omega0, &cfg.gamma, (t0 - hw, t0 + hw))?;
    let stem = format!("invert_delta{d:e}_seed{seed}_t0{t0:.4}");
    let (bin, _) = write_result(&r, &icfg, Some(&err), &cfg.output_dir, &stem)?;
    println!(
        "s = {s:.4}, t0 = {t0:.4}: {} CG iterations (converged: {}), interior error {:.4e}; wrote {}",
        r.iterations,
        r.converged,
        err.total(),
        bin.display()
    );
    if !r.converged {
        log::warn!("CG stopped at the iteration cap (relative residual {:.3e})", r.relative_residual);
    }
    Ok(())
}

fn sweep(common: &Common, seed: Option<u64>, jobs: Option<usize>, delta: Option<Vec<f64>>, s: Option<String>) -> Result<bool> {
    let mut cfg = load(common)?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if let Some(d) = delta {
        cfg.deltas = d;
    }
    if let Some(s) = &s {
        apply_s(&mut cfg, s)?;
    }
    let report = run_sweep(&cfg)?;
    let files = emit_report(&report, &cfg.output_dir)?;
    match &report.fit {
        Some(f) => println!("fitted exponent {:.4} (R² {:.4}, {} points)", f.theta, f.r2, f.points),
        None => println!("no fit: {}", report.fit_note.as_deref().unwrap_or("unknown")),
    }
    if let Some(fl) = report.floor {
        println!("clean-data floor {fl:.4e}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    if report.partial {
        let failed = report.cells.iter().chain(&report.baseline).filter(|c| !c.ok()).count();
        eprintln!("{failed} cells failed; the report is partial");
        return Ok(false);
    }
    Ok(true)
}

fn check(common: &Common, seed: u64) -> Result<bool> {
    let cfg = load(common)?;
    let out = run_checks(&cfg, seed)?;
    let mut ok = true;
    for c in &out {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Command::Forward { common } => forward(&common).map(|_| true),
        Command::Traces { common, seed, delta } => traces(&common, seed, delta).map(|_| true),
        Command::Invert {
            common,
            seed,
            delta,
            s,
            t0,
        } => invert(&common, seed, delta, s, t0).map(|_| true),
        Command::Sweep {
            common,
            seed,
            jobs,
            delta,
            s,
        } => sweep(&common, seed, jobs, delta, s),
        Command::Check { common, seed } => check(&common, seed),
        Command::Plot { out } => render_plot(&out).map(|p| {
            println!("wrote {}", p.display());
            true
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
