use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::assembly::{ObjectiveBreakdown, ReconstructionResult};
use super::config::InversionConfig;
use super::interior::InteriorError;
use crate::error::{Error, Result};
use crate::fields::io::{read_binary, write_binary};
use crate::fields::{FlowState, SpaceTimeGrid, VectorField};

/// JSON companion of a stored reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub objective: ObjectiveBreakdown,
    pub objective_total: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    pub config: InversionConfig,
    pub errors: Option<InteriorError>,
}

/// Write `<stem>.bin` (components v1, v2, p) and `<stem>.json`.
pub fn write_result(
    result: &ReconstructionResult,
    cfg: &InversionConfig,
    errors: Option<&InteriorError>,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let s = &result.state;
    write_binary(&bin, &[s.v.component(0), s.v.component(1), &s.p])?;
    let summary = ResultSummary {
        objective: result.objective,
        objective_total: result.objective.total(),
        iterations: result.iterations,
        converged: result.converged,
        relative_residual: result.relative_residual,
        config: *cfg,
        errors: errors.cloned(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::format(&json, e))?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok((bin, json))
}

pub fn read_state(path: &Path, grid: SpaceTimeGrid) -> Result<FlowState> {
    let comps = read_binary(path, grid)?;
    let [v1, v2, p]: [_; 3] = comps
        .try_into()
        .map_err(|_| Error::format(path, "expected three components (v1, v2, p)"))?;
    Ok(FlowState {
        v: VectorField::from_components(vec![v1, v2])?,
        p,
    })
}

pub fn read_summary(path: &Path) -> Result<ResultSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}
