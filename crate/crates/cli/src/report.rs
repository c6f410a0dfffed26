//! Analysis report written as `report.json`.

use sagnac_core::analysis::chsh::ChshSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisValues {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsReport {
    /// `optimize` when chosen from the reconstructed state, else `fixed`.
    pub origin: String,
    pub theta_s_deg: f64,
    pub theta_s_prime_deg: f64,
    pub theta_i_deg: f64,
    pub theta_i_prime_deg: f64,
    pub theta_s_rad: f64,
    pub theta_s_prime_rad: f64,
    pub theta_i_rad: f64,
    pub theta_i_prime_rad: f64,
    pub minus_term: String,
    pub idler_phase_deg: f64,
    pub idler_phase_rad: f64,
}

impl SettingsReport {
    pub fn new(s: &ChshSettings, optimized: bool) -> Self {
        Self {
            origin: if optimized { "optimize" } else { "fixed" }.to_string(),
            theta_s_deg: s.theta_s.degrees(),
            theta_s_prime_deg: s.theta_s_prime.degrees(),
            theta_i_deg: s.theta_i.degrees(),
            theta_i_prime_deg: s.theta_i_prime.degrees(),
            theta_s_rad: s.theta_s.radians(),
            theta_s_prime_rad: s.theta_s_prime.radians(),
            theta_i_rad: s.theta_i.radians(),
            theta_i_prime_rad: s.theta_i_prime.radians(),
            minus_term: s.minus_term.tag().to_string(),
            idler_phase_deg: s.idler_phase.to_degrees(),
            idler_phase_rad: s.idler_phase,
        }
    }
}

/// Noiseless values of the simulated source state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub concurrence: f64,
    pub phase_over_pi: Option<f64>,
    pub fidelity: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub n_resamples: usize,
    pub bootstrap_failed: usize,
    /// SHA-256 of the scenario text, hex.
    pub config_hash: String,
    /// The only field that differs between identical runs.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub visibilities: BasisValues,
    pub visibility_std: BasisValues,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S_std")]
    pub s_std: f64,
    pub concurrence: Option<f64>,
    pub concurrence_std: Option<f64>,
    pub phase_over_pi: Option<f64>,
    pub phase_over_pi_std: Option<f64>,
    pub fidelity: Option<f64>,
    pub fidelity_std: Option<f64>,
    pub target_phase_over_pi: f64,
    pub settings: SettingsReport,
    pub model: ModelReport,
    pub provenance: Provenance,
}
