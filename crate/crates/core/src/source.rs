//! Sagnac source model.
//!
//! A pump beam is sampled at transverse positions. Each sample produces a
//! phase-damped Bell-phase state whose phase (and optionally coherence) is
//! read from a wavefront-distortion map. Multimode collection mixes the
//! samples with the pump weights.

use std::f64::consts::PI;
use std::io::Read;

use serde::Deserialize;

use crate::qstate::{mix, x_state, DensityMatrix, XStateSpec};
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;
const POSITION_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSample {
    pub position_mm: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpSpatialProfile {
    samples: Vec<PumpSample>,
}

impl PumpSpatialProfile {
    pub fn new(samples: Vec<PumpSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("pump profile needs at least one sample".into()));
        }
        let mut total = 0.0;
        for s in &samples {
            if !s.position_mm.is_finite() {
                return Err(Error::InvalidArgument(format!("pump position {} is not finite", s.position_mm)));
            }
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!("pump weight {} is not a nonnegative number", s.weight)));
            }
            total += s.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("pump weights sum to {total}, expected 1")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[PumpSample] {
        &self.samples
    }
}

/// Uniformly weighted samples spanning `[−d/2, +d/2]`.
pub fn led_profile(diameter_mm: f64, n_samples: usize) -> Result<PumpSpatialProfile> {
    led_profile_centered(diameter_mm, n_samples, 0.0)
}

pub fn led_profile_centered(diameter_mm: f64, n_samples: usize, center_mm: f64) -> Result<PumpSpatialProfile> {
    if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
        return Err(Error::InvalidArgument(format!("pump diameter must be positive, got {diameter_mm}")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("pump profile needs at least one sample".into()));
    }
    let w = 1.0 / n_samples as f64;
    let samples = if n_samples == 1 {
        vec![PumpSample { position_mm: center_mm, weight: 1.0 }]
    } else {
        let step = diameter_mm / (n_samples - 1) as f64;
        (0..n_samples)
            .map(|k| PumpSample { position_mm: center_mm - 0.5 * diameter_mm + k as f64 * step, weight: w })
            .collect()
    };
    PumpSpatialProfile::new(samples)
}

/// A narrow beam, represented by a single sample at `center_mm`. The
/// diameter is validated but does not otherwise enter the model.
pub fn laser_profile(diameter_mm: f64, center_mm: f64) -> Result<PumpSpatialProfile> {
    if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
        return Err(Error::InvalidArgument(format!("pump diameter must be positive, got {diameter_mm}")));
    }
    PumpSpatialProfile::new(vec![PumpSample { position_mm: center_mm, weight: 1.0 }])
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct DistortionEntry {
    #[serde(rename = "position_mm")]
    pub position_mm: f64,
    #[serde(rename = "phi_rad")]
    pub phi: f64,
    #[serde(default = "unit_concurrence")]
    pub concurrence: f64,
}

fn unit_concurrence() -> f64 {
    1.0
}

/// Position → (φ, component concurrence), piecewise linear between table
/// entries. Phases are interpolated as given, without unwrapping, so a table
/// may run past ±π. Outside the table range the map is undefined, except for
/// [`DistortionMap::uniform`] which is defined everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMap {
    entries: Vec<DistortionEntry>,
    uniform: bool,
}

impl DistortionMap {
    pub fn new(mut entries: Vec<DistortionEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("distortion map needs at least one entry".into()));
        }
        for e in &entries {
            if !(e.position_mm.is_finite() && e.phi.is_finite()) {
                return Err(Error::InvalidArgument("distortion entries must be finite".into()));
            }
            if !(0.0..=1.0).contains(&e.concurrence) {
                return Err(Error::InvalidArgument(format!(
                    "component concurrence {} at {} mm outside [0, 1]",
                    e.concurrence, e.position_mm
                )));
            }
        }
        entries.sort_by(|a, b| a.position_mm.total_cmp(&b.position_mm));
        if entries.windows(2).any(|w| w[1].position_mm - w[0].position_mm <= 0.0) {
            return Err(Error::InvalidArgument("distortion map has duplicate positions".into()));
        }
        Ok(Self { entries, uniform: false })
    }

    /// Same `(φ, C)` at every position.
    pub fn uniform(phi: f64, concurrence: f64) -> Result<Self> {
        let mut map = Self::new(vec![DistortionEntry { position_mm: 0.0, phi, concurrence }])?;
        map.uniform = true;
        Ok(map)
    }

    /// `φ(x) = φ₀ + slope·x` on `[−half_width, +half_width]`, constant
    /// component concurrence.
    pub fn linear_ramp(center_phi: f64, slope_rad_per_mm: f64, half_width_mm: f64, concurrence: f64) -> Result<Self> {
        if !(half_width_mm > 0.0) {
            return Err(Error::InvalidArgument("ramp half-width must be positive".into()));
        }
        Self::new(vec![
            DistortionEntry {
                position_mm: -half_width_mm,
                phi: center_phi - slope_rad_per_mm * half_width_mm,
                concurrence,
            },
            DistortionEntry {
                position_mm: half_width_mm,
                phi: center_phi + slope_rad_per_mm * half_width_mm,
                concurrence,
            },
        ])
    }

    /// The bundled default: centre phase −0.943π, slope 0.55π rad/mm over
    /// ±1 mm, component concurrence 0.952.
    pub fn default_ramp() -> Self {
        Self::linear_ramp(-0.943 * PI, 0.55 * PI, 1.0, 0.952).expect("static ramp")
    }

    /// Two measured beam paths 1 mm apart: (C=0.933, φ=0.5558π) at −0.5 mm
    /// and (C=0.916, φ=0.3220π) at +0.5 mm.
    pub fn fig4_paths() -> Self {
        Self::new(vec![
            DistortionEntry { position_mm: -0.5, phi: 0.5558 * PI, concurrence: 0.933 },
            DistortionEntry { position_mm: 0.5, phi: 0.3220 * PI, concurrence: 0.916 },
        ])
        .expect("static table")
    }

    pub fn entries(&self) -> &[DistortionEntry] {
        &self.entries
    }

    /// `(φ, C)` at `position_mm`.
    pub fn at(&self, position_mm: f64) -> Result<(f64, f64)> {
        if self.uniform {
            let e = self.entries[0];
            return Ok((e.phi, e.concurrence));
        }
        let first = self.entries[0];
        let last = self.entries[self.entries.len() - 1];
        if (position_mm - first.position_mm).abs() <= POSITION_MATCH_TOL {
            return Ok((first.phi, first.concurrence));
        }
        if (position_mm - last.position_mm).abs() <= POSITION_MATCH_TOL {
            return Ok((last.phi, last.concurrence));
        }
        if !(position_mm > first.position_mm && position_mm < last.position_mm) {
            return Err(Error::InvalidArgument(format!(
                "distortion map is undefined at {position_mm} mm (table covers {} to {} mm)",
                first.position_mm, last.position_mm
            )));
        }
        let k = self.entries.partition_point(|e| e.position_mm <= position_mm);
        let (a, b) = (self.entries[k - 1], self.entries[k]);
        let t = (position_mm - a.position_mm) / (b.position_mm - a.position_mm);
        Ok((a.phi + t * (b.phi - a.phi), a.concurrence + t * (b.concurrence - a.concurrence)))
    }

    /// Reads `position_mm,phi_rad[,concurrence]` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["position_mm", "phi_rad"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::InvalidArgument(format!("distortion CSV is missing column `{required}`")));
            }
        }
        let entries = rdr.deserialize().collect::<std::result::Result<Vec<DistortionEntry>, _>>()?;
        Self::new(entries)
    }
}

/// Pump-weighted mixture of `x_state(C(x), φ(x))` over the profile.
pub fn sagnac_output(pump: &PumpSpatialProfile, distortion: &DistortionMap) -> Result<DensityMatrix> {
    let components = pump
        .samples
        .iter()
        .map(|s| {
            let (phi, c) = distortion.at(s.position_mm)?;
            Ok((s.weight, x_state(XStateSpec::new(c, phi)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    mix(&components)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub core_diameter_um: f64,
    pub numerical_aperture: f64,
    pub wavelength_nm: f64,
}

/// Normalised frequency `V = π·d·NA/λ`.
pub fn fiber_v_number(fiber: &FiberSpec) -> Result<f64> {
    let FiberSpec { core_diameter_um, numerical_aperture, wavelength_nm } = *fiber;
    for (name, v) in [("core diameter", core_diameter_um), ("numerical aperture", numerical_aperture), ("wavelength", wavelength_nm)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if numerical_aperture >= 1.0 {
        return Err(Error::InvalidArgument(format!("numerical aperture must be below 1, got {numerical_aperture}")));
    }
    Ok(PI * (core_diameter_um * 1e3) * numerical_aperture / wavelength_nm)
}

/// Step-index mode-count estimate `V²/2`.
pub fn fiber_mode_count(fiber: &FiberSpec) -> Result<f64> {
    let v = fiber_v_number(fiber)?;
    Ok(0.5 * v * v)
}
