//! Coincidence-count model: predicted rates, Poisson sampling and
//! accidental-coincidence subtraction.
//!
//! Seeds: every random draw is made from a [`ChaCha8Rng`]. A run with root
//! seed `s` gives the `k`-th draw (or the `k`-th bootstrap resample) the
//! child seed [`derive_seed`]`(s, k)`: the first output word of ChaCha8
//! seeded with `s` on stream `k`. Child seeds depend only on `(s, k)`, so
//! parallel execution order does not change any result.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::polarimetry::{self, AnalyzerSetting, TomographySetting, TwoQubitProjector};
use crate::qstate::DensityMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    /// Coincidences per second at a probability-½ setting.
    pub pair_rate: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    /// Coincidence window, seconds.
    pub window_tau: f64,
}

impl RateBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pair_rate", self.pair_rate),
            ("singles_signal", self.singles_signal),
            ("singles_idler", self.singles_idler),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(self.window_tau.is_finite() && self.window_tau > 0.0) {
            return Err(Error::InvalidArgument(format!("window_tau must be positive, got {}", self.window_tau)));
        }
        Ok(())
    }

    pub fn accidental_rate(&self) -> Result<f64> {
        accidental_rate(self.singles_signal, self.singles_idler, self.window_tau)
    }
}

/// `2·Sₛ·Sᵢ·τ`.
pub fn accidental_rate(singles_signal: f64, singles_idler: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("singles_signal", singles_signal), ("singles_idler", singles_idler), ("tau", tau)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
        }
    }
    Ok(2.0 * singles_signal * singles_idler * tau)
}

/// Expected coincidence rate: `2·pair_rate·tr(ρP)` plus accidentals.
pub fn predict_rate(rho: &DensityMatrix, proj: &TwoQubitProjector, budget: &RateBudget) -> Result<f64> {
    budget.validate()?;
    let p = polarimetry::born_probability(rho, proj)?;
    Ok(2.0 * budget.pair_rate * p + budget.accidental_rate()?)
}

pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng.next_u64()
}

/// One Poisson draw with mean `rate·time`, seeded.
pub fn sample_counts(rate: f64, time: f64, seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    poisson_draw(&mut rng, rate * time)
}

pub(crate) fn poisson_draw<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => mean.round() as u64,
    }
}

/// Analyzer configuration a record was taken at.
///
/// Linear settings carry both angles. Tomography settings carry a two-letter
/// label from the H/V/D/A/R/L alphabet and, when both arms are linear, the
/// matching angles as well.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub label: String,
    pub theta_s: Option<AnalyzerSetting>,
    pub theta_i: Option<AnalyzerSetting>,
}

impl MeasurementSetting {
    pub fn linear(label: impl Into<String>, theta_s: AnalyzerSetting, theta_i: AnalyzerSetting) -> Self {
        Self { label: label.into(), theta_s: Some(theta_s), theta_i: Some(theta_i) }
    }

    pub fn tomography(setting: TomographySetting) -> Self {
        let angle = |l: polarimetry::PolarizationLabel| {
            l.linear_angle_deg().map(|d| AnalyzerSetting::from_degrees(d).expect("static angle"))
        };
        Self { label: setting.label(), theta_s: angle(setting.signal), theta_i: angle(setting.idler) }
    }

    /// Projector this record measured. Linear angles take precedence; a
    /// bare label must be a tomography label.
    pub fn projector(&self) -> Result<TwoQubitProjector> {
        match (self.theta_s, self.theta_i) {
            (Some(s), Some(i)) => Ok(TwoQubitProjector::new(
                &polarimetry::linear_projector(s),
                &polarimetry::linear_projector(i),
            )),
            _ => TomographySetting::parse(&self.label)
                .map(|t| t.projector())
                .ok_or_else(|| Error::InvalidArgument(format!("setting `{}` has no angles and is not a tomography label", self.label))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    /// Detected coincidences. Integral for sampled data; noiseless
    /// simulations store the expectation value.
    pub raw_counts: f64,
    /// Seconds.
    pub acquisition_time: f64,
    /// Counts per second.
    pub singles_signal: f64,
    pub singles_idler: f64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.raw_counts.is_finite() && self.raw_counts >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "record `{}`: counts must be nonnegative, got {}",
                self.setting.label, self.raw_counts
            )));
        }
        if !(self.acquisition_time.is_finite() && self.acquisition_time > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "record `{}`: acquisition time must be positive, got {}",
                self.setting.label, self.acquisition_time
            )));
        }
        if !(self.singles_signal >= 0.0 && self.singles_idler >= 0.0) {
            return Err(Error::InvalidArgument(format!("record `{}`: singles rates must be nonnegative", self.setting.label)));
        }
        Ok(())
    }

    pub fn raw_rate(&self) -> f64 {
        self.raw_counts / self.acquisition_time
    }

    /// Accidental rate implied by the record's singles.
    pub fn accidental_rate(&self, tau: f64) -> f64 {
        2.0 * self.singles_signal * self.singles_idler * tau
    }

    pub fn with_counts(&self, raw_counts: f64) -> Self {
        Self { raw_counts, ..self.clone() }
    }
}

/// Raw rate minus `2·Sₛ·Sᵢ·τ`, clamped at zero.
pub fn correct_counts(record: &CountRecord, tau: f64) -> f64 {
    (record.raw_rate() - record.accidental_rate(tau)).max(0.0)
}

/// Simulates one record at `setting` for the state `rho`.
pub fn simulate_record(
    rho: &DensityMatrix,
    setting: MeasurementSetting,
    proj: &TwoQubitProjector,
    budget: &RateBudget,
    time: f64,
    seed: Option<u64>,
) -> Result<CountRecord> {
    let rate = predict_rate(rho, proj, budget)?;
    let raw_counts = match seed {
        Some(seed) => sample_counts(rate, time, seed) as f64,
        None => rate * time,
    };
    Ok(CountRecord {
        setting,
        raw_counts,
        acquisition_time: time,
        singles_signal: budget.singles_signal,
        singles_idler: budget.singles_idler,
    })
}

/// Sums counts and acquisition time of records that share a setting label,
/// preserving first-seen order.
pub fn pool_records(records: &[CountRecord]) -> Vec<CountRecord> {
    let mut pooled: Vec<CountRecord> = Vec::new();
    for r in records {
        match pooled.iter_mut().find(|p| p.setting == r.setting) {
            Some(p) => {
                let t = p.acquisition_time + r.acquisition_time;
                p.singles_signal = (p.singles_signal * p.acquisition_time + r.singles_signal * r.acquisition_time) / t;
                p.singles_idler = (p.singles_idler * p.acquisition_time + r.singles_idler * r.acquisition_time) / t;
                p.raw_counts += r.raw_counts;
                p.acquisition_time = t;
            }
            None => pooled.push(r.clone()),
        }
    }
    pooled
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    setting_label: String,
    theta_s_deg: Option<f64>,
    theta_i_deg: Option<f64>,
    raw_counts: f64,
    time_s: f64,
    singles_s: f64,
    singles_i: f64,
}

/// Writes `setting_label,theta_s_deg,theta_i_deg,raw_counts,time_s,singles_s,singles_i`.
/// Angles are empty for circular arms.
pub fn write_records_csv<W: Write>(out: W, records: &[CountRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            setting_label: r.setting.label.clone(),
            theta_s_deg: r.setting.theta_s.map(|a| a.degrees()),
            theta_i_deg: r.setting.theta_i.map(|a| a.degrees()),
            raw_counts: r.raw_counts,
            time_s: r.acquisition_time,
            singles_s: r.singles_signal,
            singles_i: r.singles_idler,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        let angle = |d: Option<f64>| d.map(AnalyzerSetting::from_degrees).transpose();
        let record = CountRecord {
            setting: MeasurementSetting {
                label: row.setting_label,
                theta_s: angle(row.theta_s_deg)?,
                theta_i: angle(row.theta_i_deg)?,
            },
            raw_counts: row.raw_counts,
            acquisition_time: row.time_s,
            singles_signal: row.singles_s,
            singles_idler: row.singles_i,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}
