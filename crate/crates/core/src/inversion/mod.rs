//! Carleman-weighted space-time least squares for the lateral Cauchy
//! problem, and the interior error of a reconstruction.

mod assembly;
mod config;
mod interior;
mod io;

pub use assembly::{
    assemble, minimize, minimize_from, objective, region, Assembly, ObjectiveBreakdown, ReconstructionResult,
    Region,
};
pub use config::{InversionConfig, PreconditionerKind};
pub use interior::{apriori_magnitude, check_omega0, interior_error, region_nodes, InteriorError};
pub use io::{read_state, read_summary, write_result, ResultSummary};
