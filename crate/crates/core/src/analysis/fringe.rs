//! Polarization-correlation fringes and their visibility.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::counting::{correct_counts, CountRecord};
use crate::polarimetry::AnalyzerSetting;
use crate::{Error, Result};

const MIN_DISTINCT_ANGLES: usize = 6;
const ANGLE_MATCH_TOL: f64 = 1e-9;

/// Signal-arm analyzer held fixed while the idler angle is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SignalBasis {
    H,
    V,
    A,
    D,
}

impl SignalBasis {
    pub const ALL: [SignalBasis; 4] = [Self::H, Self::V, Self::A, Self::D];

    pub fn theta_s_deg(self) -> f64 {
        match self {
            Self::H => 0.0,
            Self::V => 90.0,
            Self::A => 135.0,
            Self::D => 45.0,
        }
    }

    pub fn theta_s(self) -> AnalyzerSetting {
        AnalyzerSetting::from_degrees(self.theta_s_deg()).expect("static angle")
    }
}

impl fmt::Display for SignalBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    /// Idler analyzer angle, radians.
    pub theta_i: f64,
    /// Accidental-corrected coincidence rate, per second.
    pub rate: f64,
    pub acquisition_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    basis: SignalBasis,
    points: Vec<FringePoint>,
}

impl FringeScan {
    /// Needs at least six distinct idler angles covering half a fringe
    /// period (90°).
    pub fn new(basis: SignalBasis, points: Vec<FringePoint>) -> Result<Self> {
        if points.iter().any(|p| !(p.theta_i.is_finite() && p.rate.is_finite() && p.rate >= 0.0)) {
            return Err(Error::InvalidArgument("fringe points need finite angles and nonnegative rates".into()));
        }
        let mut angles: Vec<f64> = points.iter().map(|p| p.theta_i).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < ANGLE_MATCH_TOL);
        if angles.len() < MIN_DISTINCT_ANGLES {
            return Err(Error::InvalidArgument(format!(
                "fringe scan needs {MIN_DISTINCT_ANGLES} distinct idler angles, got {}",
                angles.len()
            )));
        }
        if angles[angles.len() - 1] - angles[0] < FRAC_PI_2 - ANGLE_MATCH_TOL {
            return Err(Error::InvalidArgument("fringe scan must span at least 90 degrees".into()));
        }
        Ok(Self { basis, points })
    }

    /// Builds a scan from records whose signal angle matches `basis`.
    pub fn from_records(basis: SignalBasis, records: &[CountRecord], tau: f64) -> Result<Self> {
        let points = records
            .iter()
            .map(|r| {
                let theta_i = r
                    .setting
                    .theta_i
                    .ok_or_else(|| Error::InvalidArgument(format!("record `{}` has no idler angle", r.setting.label)))?;
                Ok(FringePoint {
                    theta_i: theta_i.radians(),
                    rate: correct_counts(r, tau),
                    acquisition_time: r.acquisition_time,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(basis, points)
    }

    pub fn basis(&self) -> SignalBasis {
        self.basis
    }

    pub fn points(&self) -> &[FringePoint] {
        &self.points
    }
}

/// `rate(θ) = offset + amplitude·cos(2(θ − phase))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
    pub residual_sum_squares: f64,
    pub amplitude_std_error: f64,
    /// Amplitude is below three standard errors (or numerically zero).
    pub degenerate: bool,
}

impl FringeFit {
    pub fn evaluate(&self, theta_i: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * (theta_i - self.phase)).cos()
    }
}

/// Linear least squares on `[1, cos2θ, sin2θ]`; the angular frequency is
/// fixed at 2.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    let n = scan.points.len();
    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for p in &scan.points {
        let row = Vector3::new(1.0, (2.0 * p.theta_i).cos(), (2.0 * p.theta_i).sin());
        xtx += row * row.transpose();
        xty += row * p.rate;
    }
    let eig = xtx.symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-10 * hi) {
        return Err(Error::FitDegenerate("idler angles do not determine a sinusoid".into()));
    }
    let inv = xtx.try_inverse().ok_or_else(|| Error::FitDegenerate("singular normal equations".into()))?;
    let coef = inv * xty;
    let (a0, a1, a2) = (coef[0], coef[1], coef[2]);
    if !(a0 > 0.0) {
        return Err(Error::FitDegenerate(format!("fitted offset {a0} is not positive")));
    }
    let rss: f64 = scan
        .points
        .iter()
        .map(|p| {
            let model = a0 + a1 * (2.0 * p.theta_i).cos() + a2 * (2.0 * p.theta_i).sin();
            (p.rate - model).powi(2)
        })
        .sum();
    let amplitude = a1.hypot(a2);
    let sigma2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let amplitude_std_error = if amplitude > 0.0 {
        let g = Vector3::new(0.0, a1 / amplitude, a2 / amplitude);
        (sigma2 * (g.transpose() * inv * g)[(0, 0)]).max(0.0).sqrt()
    } else {
        (sigma2 * inv[(1, 1)].max(inv[(2, 2)])).sqrt()
    };
    Ok(FringeFit {
        offset: a0,
        amplitude,
        phase: 0.5 * a2.atan2(a1),
        visibility: (amplitude / a0).clamp(0.0, 1.0),
        residual_sum_squares: rss,
        amplitude_std_error,
        degenerate: amplitude <= 3.0 * amplitude_std_error || amplitude <= 1e-12 * a0,
    })
}

/// `(N_max − N_min)/(N_max + N_min)`.
pub fn visibility_from_extrema(n_max: f64, n_min: f64) -> Result<f64> {
    if !(n_min >= 0.0 && n_max >= n_min) {
        return Err(Error::InvalidArgument(format!("need n_max ≥ n_min ≥ 0, got ({n_max}, {n_min})")));
    }
    if n_max == 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok((n_max - n_min) / (n_max + n_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan_from(f: impl Fn(f64) -> f64, step_deg: f64) -> FringeScan {
        let n = (180.0 / step_deg).round() as usize;
        let points = (0..n)
            .map(|k| {
                let t = (k as f64 * step_deg).to_radians();
                FringePoint { theta_i: t, rate: f(t), acquisition_time: 1.0 }
            })
            .collect();
        FringeScan::new(SignalBasis::H, points).unwrap()
    }

    #[test]
    fn pure_sin_squared_has_unit_visibility() {
        let fit = fit_fringe(&scan_from(|t| 100.0 * t.sin().powi(2), 15.0)).unwrap();
        assert!((fit.visibility - 1.0).abs() < 1e-12);
        assert!((fit.offset - fit.amplitude).abs() < 1e-10);
        assert!(!fit.degenerate);
    }

    #[test]
    fn synthetic_offset_amplitude_round_trip() {
        let fit = fit_fringe(&scan_from(|t| 50.0 + 40.0 * (2.0 * (t - 0.3)).cos(), 10.0)).unwrap();
        assert!((fit.visibility - 0.8).abs() < 1e-6);
        assert!((fit.phase - 0.3).abs() < 1e-9);
        assert!((fit.evaluate(1.0) - (50.0 + 40.0 * (2.0 * 0.7_f64).cos())).abs() < 1e-9);
    }

    #[test]
    fn flat_scan_is_flagged() {
        let fit = fit_fringe(&scan_from(|_| 25.0, 15.0)).unwrap();
        assert!(fit.degenerate);
        assert!(fit.visibility < 1e-12);
    }

    #[test]
    fn zero_scan_is_an_error() {
        assert!(matches!(fit_fringe(&scan_from(|_| 0.0, 15.0)), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn aliased_angles_are_rank_deficient() {
        // Every angle maps onto one of two points of the 2θ circle.
        let points = [0.0, 90.0, 180.0, 270.0, 360.0, 450.0]
            .iter()
            .map(|d: &f64| FringePoint { theta_i: d.to_radians(), rate: 10.0 + d / 90.0, acquisition_time: 1.0 })
            .collect();
        let scan = FringeScan::new(SignalBasis::D, points).unwrap();
        assert!(matches!(fit_fringe(&scan), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn scan_invariants() {
        let few = (0..5).map(|k| FringePoint { theta_i: k as f64 * 0.5, rate: 1.0, acquisition_time: 1.0 }).collect();
        assert!(FringeScan::new(SignalBasis::H, few).is_err());
        let narrow = (0..8).map(|k| FringePoint { theta_i: k as f64 * 0.1, rate: 1.0, acquisition_time: 1.0 }).collect();
        assert!(FringeScan::new(SignalBasis::H, narrow).is_err());
        let negative = (0..8).map(|k| FringePoint { theta_i: k as f64 * 0.3, rate: -1.0, acquisition_time: 1.0 }).collect();
        assert!(FringeScan::new(SignalBasis::H, negative).is_err());
    }

    #[test]
    fn extrema_examples() {
        assert_eq!(visibility_from_extrema(100.0, 0.0).unwrap(), 1.0);
        assert!((visibility_from_extrema(100.0, 1.0).unwrap() - 0.9802).abs() < 1e-4);
        assert!(matches!(visibility_from_extrema(0.0, 0.0), Err(Error::UndefinedVisibility)));
        assert!(visibility_from_extrema(1.0, 2.0).is_err());
    }
}
