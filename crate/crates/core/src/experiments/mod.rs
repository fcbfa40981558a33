//! Batch stability experiments: configuration, noise sweeps over the weight
//! centre covering, exponent fitting and report emission.

mod checks;
mod config;
mod report;
mod sweep;

pub use checks::{run_checks, CheckOutcome};
pub use config::{
    ExperimentConfig, GridSection, InversionSection, SSection, SStrategy, T0Section, WeightSection, REFERENCE_TOML,
};
pub use report::{
    emit_report, median_nondecreasing, read_aggregates, render_plot, render_svg, AGGREGATES_CSV, BASELINE_CSV,
    CELLS_CSV, CONFIG_TOML, PLOT_SVG, SUMMARY_JSON,
};
pub use sweep::{fit_holder, finish_fit, medians, run_sweep, Aggregate, CellRecord, HolderFit, StabilityReport};
