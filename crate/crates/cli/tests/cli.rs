use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nscauchy::experiments::{ExperimentConfig, AGGREGATES_CSV, CELLS_CSV, PLOT_SVG, SUMMARY_JSON};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nscauchy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::reference();
    cfg.grid.nx = 13;
    cfg.grid.ny = 13;
    cfg.grid.nt = 13;
    cfg.deltas = vec![1e-3, 1e-2, 3e-2];
    cfg.seeds = vec![4];
    cfg
}

#[test]
fn empty_noise_list_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.deltas.clear();
    let path = write_config(dir.path(), "bad.toml", &cfg);
    let out = run(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("noise level list is empty"));
}

#[test]
fn malformed_config_and_flags_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "problem = \"oseen\"\nkappa = \n").unwrap();
    let out = run(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = run(&["sweep", "--s", "fast", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn check_passes_on_reference() {
    let out = run(&["check"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}

#[test]
fn sweep_writes_report_and_plot_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "small.toml", &small());
    let out_dir = dir.path().join("out");
    let out = run(&["sweep", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in [CELLS_CSV, AGGREGATES_CSV, SUMMARY_JSON, PLOT_SVG] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let cells = std::fs::read_to_string(out_dir.join(CELLS_CSV)).unwrap();
    let t0s = small().t0_values().len();
    assert_eq!(cells.lines().count(), 1 + 3 * t0s);

    std::fs::remove_file(out_dir.join(PLOT_SVG)).unwrap();
    let out = run(&["plot", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let svg = std::fs::read_to_string(out_dir.join(PLOT_SVG)).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn invert_and_traces_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "small.toml", &small());
    let out_dir = dir.path().join("single");
    let cfg = path.to_str().unwrap();
    let o = out_dir.to_str().unwrap();

    let out = run(&["traces", "--config", cfg, "--out", o, "--delta", "0.01", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(&["invert", "--config", cfg, "--out", o, "--delta", "0.01", "--s", "2.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("s = 2.5000"));

    let names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("traces_") && n.ends_with(".csv")), "{names:?}");
    assert!(names.iter().any(|n| n.starts_with("invert_")), "{names:?}");
}

#[test]
fn plot_without_sweep_tables_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains(AGGREGATES_CSV));
}
