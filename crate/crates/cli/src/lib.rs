//! Scenario runner and reproduction tables on top of `sagnac_core`.

pub mod bundled;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod reproduce;
pub mod scenario;

pub use error::{CliError, Result};
