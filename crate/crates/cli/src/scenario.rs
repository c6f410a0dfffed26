//! Scenario files: TOML describing pump, distortion map, count-rate budget,
//! acquisition and analysis. See `scenarios/led.scenario` for an annotated
//! example.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use sagnac_core::analysis::chsh::{ChshSettings, CorrelatorTerm};
use sagnac_core::counting::RateBudget;
use sagnac_core::qstate::BellPhaseSpec;
use sagnac_core::source::{self, DistortionMap, PumpSample, PumpSpatialProfile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub pump: PumpConfig,
    pub distortion: DistortionConfig,
    pub rates: RatesConfig,
    pub acquisition: AcquisitionConfig,
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpKind {
    /// Broad beam sampled uniformly across its diameter.
    Led,
    /// Narrow beam, one sample at `center_mm`.
    Laser,
    /// Equal-weight discrete beam positions `centers_mm`.
    Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub kind: PumpKind,
    #[serde(default)]
    pub diameter_mm: Option<f64>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub center_mm: Option<f64>,
    #[serde(default)]
    pub centers_mm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Parameters of the `uniform` preset.
    #[serde(default)]
    pub phi_over_pi: Option<f64>,
    #[serde(default)]
    pub concurrence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub pair_rate: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub window_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub time_per_setting_s: f64,
    #[serde(default = "one")]
    pub n_repeats: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChshConfig {
    /// `optimize`, `canonical`, `quoted-literal` or `quoted-relabeled`.
    Named(String),
    Explicit {
        angles_deg: [f64; 4],
        #[serde(default)]
        minus: Option<String>,
        #[serde(default)]
        idler_phase_deg: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub chsh: ChshConfig,
    #[serde(default = "yes")]
    pub tomography: bool,
    #[serde(default = "ten")]
    pub fringe_step_deg: f64,
    #[serde(default = "two_hundred")]
    pub bootstrap: usize,
    pub seed: u64,
    #[serde(default = "unit")]
    pub target_phi_over_pi: f64,
}

fn one() -> u32 {
    1
}
fn yes() -> bool {
    true
}
fn ten() -> f64 {
    10.0
}
fn two_hundred() -> usize {
    200
}
fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChshPlan {
    /// Choose settings from the reconstructed state.
    Optimize,
    Fixed(ChshSettings),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub pump: PumpSpatialProfile,
    pub distortion: DistortionMap,
    pub budget: RateBudget,
    pub time_per_setting: f64,
    pub n_repeats: u32,
    pub chsh: ChshPlan,
    pub tomography: bool,
    pub fringe_step_deg: f64,
    pub n_resamples: usize,
    pub seed: u64,
    pub target: BellPhaseSpec,
    /// SHA-256 of the configuration text, hex.
    pub config_hash: String,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = match e.span() {
                Some(span) => format!("line {}", text[..span.start.min(text.len())].lines().count().max(1)),
                None => "scenario".to_string(),
            };
            CliError::config(field, e.message().trim().to_string())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

impl Scenario {
    /// Parses and validates scenario text. Relative distortion files are
    /// resolved against `base_dir`.
    pub fn from_text(text: &str, base_dir: Option<&Path>, default_name: &str) -> Result<Self> {
        let file = ScenarioFile::parse(text)?;
        Self::validate(file, base_dir, default_name, sha256_hex(text))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("scenario", format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::from_text(&text, path.parent(), stem)
    }

    /// Validates a programmatically built file; the hash covers its TOML
    /// serialization.
    pub fn from_file(file: ScenarioFile, base_dir: Option<&Path>, default_name: &str) -> Result<Self> {
        let hash = sha256_hex(&file.to_toml());
        Self::validate(file, base_dir, default_name, hash)
    }

    fn validate(file: ScenarioFile, base_dir: Option<&Path>, default_name: &str, config_hash: String) -> Result<Self> {
        let pump = build_pump(&file.pump)?;
        let distortion = build_distortion(&file.distortion, base_dir)?;

        let r = &file.rates;
        for (field, v) in [
            ("rates.pair_rate", r.pair_rate),
            ("rates.singles_signal", r.singles_signal),
            ("rates.singles_idler", r.singles_idler),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::config(field, format!("must be a nonnegative rate, got {v}")));
            }
        }
        if !(r.window_tau.is_finite() && r.window_tau > 0.0) {
            return Err(CliError::config("rates.window_tau", format!("must be positive seconds, got {}", r.window_tau)));
        }
        let budget = RateBudget {
            pair_rate: r.pair_rate,
            singles_signal: r.singles_signal,
            singles_idler: r.singles_idler,
            window_tau: r.window_tau,
        };

        let acq = &file.acquisition;
        if !(acq.time_per_setting_s.is_finite() && acq.time_per_setting_s > 0.0) {
            return Err(CliError::config(
                "acquisition.time_per_setting_s",
                format!("must be positive seconds, got {}", acq.time_per_setting_s),
            ));
        }
        if acq.n_repeats == 0 {
            return Err(CliError::config("acquisition.n_repeats", "must be at least 1"));
        }

        let an = &file.analysis;
        let chsh = build_chsh(&an.chsh)?;
        if chsh == ChshPlan::Optimize && !an.tomography {
            return Err(CliError::config("analysis.chsh", "`optimize` needs analysis.tomography = true"));
        }
        if !(an.fringe_step_deg.is_finite() && an.fringe_step_deg > 0.0 && an.fringe_step_deg <= 30.0) {
            return Err(CliError::config(
                "analysis.fringe_step_deg",
                format!("must lie in (0, 30] so a scan has six angles over 180°, got {}", an.fringe_step_deg),
            ));
        }
        if an.bootstrap < 2 {
            return Err(CliError::config("analysis.bootstrap", format!("need at least 2 resamples, got {}", an.bootstrap)));
        }
        let target = BellPhaseSpec::new(an.target_phi_over_pi * PI)
            .map_err(|e| CliError::config("analysis.target_phi_over_pi", e.to_string()))?;

        source::sagnac_output(&pump, &distortion).map_err(|e| CliError::config("distortion", e.to_string()))?;

        Ok(Self {
            name: file.name.clone().unwrap_or_else(|| default_name.to_string()),
            pump,
            distortion,
            budget,
            time_per_setting: acq.time_per_setting_s,
            n_repeats: acq.n_repeats,
            chsh,
            tomography: an.tomography,
            fringe_step_deg: an.fringe_step_deg,
            n_resamples: an.bootstrap,
            seed: an.seed,
            target,
            config_hash,
            file,
        })
    }
}

fn positive(field: &str, v: Option<f64>) -> Result<f64> {
    match v {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(CliError::config(field, format!("must be positive, got {v}"))),
        None => Err(CliError::config(field, "is required")),
    }
}

fn finite(field: &str, v: Option<f64>, default: f64) -> Result<f64> {
    match v {
        Some(v) if !v.is_finite() => Err(CliError::config(field, format!("must be finite, got {v}"))),
        Some(v) => Ok(v),
        None => Ok(default),
    }
}

fn build_pump(p: &PumpConfig) -> Result<PumpSpatialProfile> {
    let center = finite("pump.center_mm", p.center_mm, 0.0)?;
    let profile = match p.kind {
        PumpKind::Led => {
            let d = positive("pump.diameter_mm", p.diameter_mm)?;
            let n = p.n_samples.ok_or_else(|| CliError::config("pump.n_samples", "is required for an led pump"))?;
            if n == 0 {
                return Err(CliError::config("pump.n_samples", "must be at least 1"));
            }
            source::led_profile_centered(d, n, center)
        }
        PumpKind::Laser => source::laser_profile(positive("pump.diameter_mm", p.diameter_mm)?, center),
        PumpKind::Paths => {
            let centers = p.centers_mm.as_ref().filter(|c| !c.is_empty()).ok_or_else(|| {
                CliError::config("pump.centers_mm", "needs at least one position for a paths pump")
            })?;
            if centers.iter().any(|c| !c.is_finite()) {
                return Err(CliError::config("pump.centers_mm", "positions must be finite"));
            }
            let w = 1.0 / centers.len() as f64;
            PumpSpatialProfile::new(centers.iter().map(|&position_mm| PumpSample { position_mm, weight: w }).collect())
        }
    };
    profile.map_err(|e| CliError::config("pump", e.to_string()))
}

fn build_distortion(d: &DistortionConfig, base_dir: Option<&Path>) -> Result<DistortionMap> {
    match (&d.preset, &d.file) {
        (Some(_), Some(_)) => Err(CliError::config("distortion", "give either `preset` or `file`, not both")),
        (None, None) => Err(CliError::config("distortion", "needs `preset` or `file`")),
        (None, Some(path)) => {
            let full = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            let f = std::fs::File::open(&full)
                .map_err(|e| CliError::config("distortion.file", format!("{}: {e}", full.display())))?;
            DistortionMap::from_csv(f).map_err(|e| CliError::config("distortion.file", e.to_string()))
        }
        (Some(name), None) => match name.as_str() {
            "default_ramp" => Ok(DistortionMap::default_ramp()),
            "fig4_paths" => Ok(DistortionMap::fig4_paths()),
            "uniform" => {
                let phi = finite("distortion.phi_over_pi", d.phi_over_pi, 1.0)? * PI;
                let c = finite("distortion.concurrence", d.concurrence, 1.0)?;
                DistortionMap::uniform(phi, c).map_err(|e| CliError::config("distortion.concurrence", e.to_string()))
            }
            other => Err(CliError::config(
                "distortion.preset",
                format!("unknown preset `{other}` (expected default_ramp, fig4_paths or uniform)"),
            )),
        },
    }
}

fn build_chsh(c: &ChshConfig) -> Result<ChshPlan> {
    match c {
        ChshConfig::Named(name) => match name.as_str() {
            "optimize" => Ok(ChshPlan::Optimize),
            "canonical" => Ok(ChshPlan::Fixed(ChshSettings::canonical())),
            "quoted-literal" => Ok(ChshPlan::Fixed(ChshSettings::quoted_literal())),
            "quoted-relabeled" => Ok(ChshPlan::Fixed(ChshSettings::quoted_relabeled())),
            other => Err(CliError::config(
                "analysis.chsh",
                format!("unknown choice `{other}` (expected optimize, canonical, quoted-literal, quoted-relabeled or a table)"),
            )),
        },
        ChshConfig::Explicit { angles_deg, minus, idler_phase_deg } => {
            let minus = match minus {
                Some(tag) => CorrelatorTerm::parse(tag)
                    .ok_or_else(|| CliError::config("analysis.chsh.minus", format!("unknown term `{tag}` (ab, ab', a'b, a'b')")))?,
                None => CorrelatorTerm::ABPrime,
            };
            let [a, ap, b, bp] = *angles_deg;
            let settings = ChshSettings::from_degrees(a, ap, b, bp, minus)
                .map_err(|e| CliError::config("analysis.chsh.angles_deg", e.to_string()))?;
            let chi = finite("analysis.chsh.idler_phase_deg", *idler_phase_deg, 0.0)?;
            Ok(ChshPlan::Fixed(settings.with_idler_phase(chi.to_radians())))
        }
    }
}
