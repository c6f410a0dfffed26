//! From counts to visibilities, CHSH S and reconstructed states.

pub mod bootstrap;
pub mod chsh;
pub mod fringe;
pub mod tomography;

pub use bootstrap::{analyze, bootstrap, Analysis, BootstrapSummary, Dataset, ScalarSummary};
pub use chsh::{chsh_e, chsh_optimize, chsh_predict, chsh_s, ChshSettings, CorrelatorTerm};
pub use fringe::{fit_fringe, visibility_from_extrema, FringeFit, FringePoint, FringeScan, SignalBasis};
pub use tomography::{tomography_linear, tomography_mle, tomography_mle_with, MleOptions, MleOutcome, TomographyData};
