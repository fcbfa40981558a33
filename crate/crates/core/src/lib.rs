pub mod boundary;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod inversion;
pub mod forward;
pub mod linalg;
pub mod weights;

pub use error::{Error, Result};
