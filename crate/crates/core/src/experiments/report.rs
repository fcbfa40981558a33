use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::sweep::{fit_holder, medians, Aggregate, HolderFit, StabilityReport};
use crate::error::{Error, Result};

pub const CELLS_CSV: &str = "cells.csv";
pub const AGGREGATES_CSV: &str = "aggregates.csv";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CONFIG_TOML: &str = "config.toml";
pub const PLOT_SVG: &str = "error_vs_delta.svg";

const CELL_HEADER: [&str; 14] = [
    "delta",
    "seed",
    "s_index",
    "s",
    "t0",
    "g",
    "m",
    "v_h21",
    "p_h10",
    "error",
    "iterations",
    "converged",
    "relative_residual",
    "failure",
];

const AGG_HEADER: [&str; 10] = [
    "delta", "seed", "s_index", "s", "g", "v_h21", "p_h10", "error", "cells_ok", "cells",
];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn write_csv<R: IntoIterator<Item = Vec<String>>>(path: &Path, header: &[&str], rows: R) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(header).map_err(|e| Error::format(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cell_rows(cells: &[super::sweep::CellRecord]) -> impl Iterator<Item = Vec<String>> + '_ {
    cells.iter().map(|c| {
        vec![
            num(c.delta),
            c.seed.to_string(),
            c.s_index.to_string(),
            num(c.s),
            num(c.t0),
            num(c.g),
            num(c.m),
            num(c.v_h21),
            num(c.p_h10),
            num(c.error),
            c.iterations.to_string(),
            c.converged.to_string(),
            num(c.relative_residual),
            c.failure.clone(),
        ]
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    cells: usize,
    failed_cells: usize,
    partial: bool,
    m: f64,
    gap: f64,
    floor: Option<f64>,
    fit_threshold: Option<f64>,
    medians: Vec<MedianRow>,
    fit: Option<HolderFit>,
    fit_note: Option<&'a str>,
    implied_c_cal: Option<f64>,
    median_nondecreasing: bool,
    runtime_s: f64,
    cell_runtime_s: Vec<f64>,
    config: &'a super::config::ExperimentConfig,
}

#[derive(Serialize)]
struct MedianRow {
    delta: f64,
    s_index: usize,
    error: f64,
}

/// True when the median error never decreases as the noise level grows.
pub fn median_nondecreasing(curve: &[(f64, f64)]) -> bool {
    curve.windows(2).all(|w| w[1].1 >= w[0].1)
}

/// Write the cell and aggregate tables, the clean baseline, a JSON summary,
/// the configuration echo and the log-log plot into `dir`.
///
/// The CSV tables carry no timing, so identical inputs give identical bytes.
pub fn emit_report(report: &StabilityReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cells = dir.join(CELLS_CSV);
    write_csv(&cells, &CELL_HEADER, cell_rows(&report.cells))?;
    let baseline = dir.join(BASELINE_CSV);
    write_csv(&baseline, &CELL_HEADER, cell_rows(&report.baseline))?;
    let aggs = dir.join(AGGREGATES_CSV);
    write_csv(
        &aggs,
        &AGG_HEADER,
        report.aggregates.iter().map(|a| {
            vec![
                num(a.delta),
                a.seed.to_string(),
                a.s_index.to_string(),
                num(a.s),
                num(a.g),
                num(a.v_h21),
                num(a.p_h10),
                num(a.error),
                a.cells_ok.to_string(),
                a.cells.to_string(),
            ]
        }),
    )?;

    let summary = Summary {
        cells: report.cells.len(),
        failed_cells: report.cells.iter().chain(&report.baseline).filter(|c| !c.ok()).count(),
        partial: report.partial,
        m: report.m,
        gap: report.gap,
        floor: report.floor,
        fit_threshold: report.floor.map(|f| 3.0 * f),
        medians: report
            .medians
            .iter()
            .map(|&(delta, s_index, error)| MedianRow { delta, s_index, error })
            .collect(),
        fit: report.fit,
        fit_note: report.fit_note.as_deref(),
        implied_c_cal: report.implied_c_cal,
        median_nondecreasing: median_nondecreasing(&report.median_curve()),
        runtime_s: report.runtime_s,
        cell_runtime_s: report.cells.iter().map(|c| c.runtime_s).collect(),
        config: &report.config,
    };
    let json = dir.join(SUMMARY_JSON);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::format(&json, e))?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;

    let toml = dir.join(CONFIG_TOML);
    std::fs::write(&toml, report.config.to_toml()).map_err(|e| Error::io(&toml, e))?;

    let svg = dir.join(PLOT_SVG);
    let points: Vec<(f64, f64)> = report.aggregates.iter().map(|a| (a.delta, a.error)).collect();
    std::fs::write(&svg, render_svg(&points, &report.median_curve(), report.fit.as_ref(), report.floor))
        .map_err(|e| Error::io(&svg, e))?;
    Ok(vec![cells, aggs, baseline, json, toml, svg])
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::format(path, format!("bad number `{s}`")))
}

/// Read an aggregate table written by [`emit_report`].
pub fn read_aggregates(path: &Path) -> Result<Vec<Aggregate>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != AGG_HEADER {
        return Err(Error::format(path, "unexpected aggregate table header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::format(path, format!("bad integer `{}`", &rec[i])))
        };
        out.push(Aggregate {
            delta: parse_f64(path, &rec[0])?,
            seed: rec[1].parse().map_err(|_| Error::format(path, "bad seed"))?,
            s_index: int(2)?,
            s: parse_f64(path, &rec[3])?,
            g: parse_f64(path, &rec[4])?,
            v_h21: parse_f64(path, &rec[5])?,
            p_h10: parse_f64(path, &rec[6])?,
            error: parse_f64(path, &rec[7])?,
            cells_ok: int(8)?,
            cells: int(9)?,
        });
    }
    Ok(out)
}

/// Re-render the plot of a finished sweep from its CSV tables.
///
/// The floor is recomputed from the baseline table when it is present.
pub fn render_plot(dir: &Path) -> Result<PathBuf> {
    let aggs = read_aggregates(&dir.join(AGGREGATES_CSV))?;
    let floor = read_floor(&dir.join(BASELINE_CSV))?;
    let curve: Vec<(f64, f64)> = medians(&aggs).into_iter().filter(|m| m.1 == 0).map(|m| (m.0, m.2)).collect();
    let pos: Vec<(f64, f64)> = curve.iter().copied().filter(|p| p.0 > 0.0).collect();
    let fit = fit_holder(
        &pos.iter().map(|p| p.0).collect::<Vec<_>>(),
        &pos.iter().map(|p| p.1).collect::<Vec<_>>(),
        floor.map_or(0.0, |f| 3.0 * f),
    )
    .ok();
    let points: Vec<(f64, f64)> = aggs.iter().map(|a| (a.delta, a.error)).collect();
    let svg = dir.join(PLOT_SVG);
    std::fs::write(&svg, render_svg(&points, &curve, fit.as_ref(), floor)).map_err(|e| Error::io(&svg, e))?;
    Ok(svg)
}

/// Largest per-centre error in the baseline table; a lower bound of the
/// union error, used only for drawing.
fn read_floor(path: &Path) -> Result<Option<f64>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut floor: Option<f64> = None;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let e = parse_f64(path, &rec[9])?;
        if e.is_finite() {
            floor = Some(floor.map_or(e, |f| f.max(e)));
        }
    }
    Ok(floor)
}

/// Log-log scatter of `(delta, error)` with the median curve, the fitted
/// line and the floor. Points with a non-positive coordinate are skipped.
pub fn render_svg(points: &[(f64, f64)], curve: &[(f64, f64)], fit: Option<&HolderFit>, floor: Option<f64>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const L: f64 = 80.0;
    const R: f64 = 20.0;
    const T: f64 = 30.0;
    const B: f64 = 60.0;
    let usable = |p: &&(f64, f64)| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite();
    let xs: Vec<f64> = points.iter().chain(curve).filter(usable).map(|p| p.0.log10()).collect();
    let mut ys: Vec<f64> = points.iter().chain(curve).filter(usable).map(|p| p.1.log10()).collect();
    if let Some(f) = floor.filter(|f| *f > 0.0) {
        ys.push(f.log10());
    }
    let span = |v: &[f64]| -> (f64, f64) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            ((lo - 0.1).floor(), (hi + 0.1).ceil().max((lo - 0.1).floor() + 1.0))
        } else {
            (-3.0, 0.0)
        }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |lx: f64| L + (lx - x0) / (x1 - x0) * (W - L - R);
    let py = |ly: f64| H - B - (ly - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="#000"/>"##,
        W - L - R,
        H - T - B
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(d as f64);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{T}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, H - B);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, H - B + 18.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(d as f64);
        let _ = writeln!(s, r##"<line x1="{L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, W - R);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, L - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">noise level δ</text>"#, (L + W - R) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text transform="translate(20,{:.1}) rotate(-90)" text-anchor="middle">interior error</text>"#,
        (T + H - B) / 2.0
    );
    if let Some(f) = floor.filter(|f| *f > 0.0) {
        let y = py(f.log10());
        let _ = writeln!(
            s,
            r##"<line x1="{L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#888" stroke-dasharray="6,4"/>"##,
            W - R
        );
        let _ = writeln!(s, r##"<text x="{:.1}" y="{:.1}" fill="#666">clean-data floor</text>"##, L + 6.0, y - 4.0);
    }
    for p in points.iter().filter(usable) {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#9ab"/>"##,
            px(p.0.log10()),
            py(p.1.log10())
        );
    }
    let med: Vec<String> = curve
        .iter()
        .filter(usable)
        .map(|p| format!("{:.1},{:.1}", px(p.0.log10()), py(p.1.log10())))
        .collect();
    if !med.is_empty() {
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#000" stroke-width="1.5"/>"##, med.join(" "));
        for m in &med {
            let (cx, cy) = m.split_once(',').unwrap();
            let _ = writeln!(s, r##"<rect x="{:.1}" y="{:.1}" width="7" height="7" fill="#000"/>"##, cx.parse::<f64>().unwrap() - 3.5, cy.parse::<f64>().unwrap() - 3.5);
        }
    }
    if let Some(f) = fit {
        let ln10 = std::f64::consts::LN_10;
        let line = |lx: f64| (f.intercept + f.theta * lx * ln10) / ln10;
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c22" stroke-width="1.5"/>"##,
            px(x0),
            py(line(x0)).clamp(T, H - B),
            px(x1),
            py(line(x1)).clamp(T, H - B)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" fill="#c22">fit: θ = {:.3}, R² = {:.3}</text>"##,
            L + 6.0,
            T + 16.0,
            f.theta,
            f.r2
        );
    }
    s.push_str("</svg>\n");
    s
}
