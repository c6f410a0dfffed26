//! CHSH correlators and the S parameter.
//!
//! The correlator for analyzer angles `(θs, θi)` combines the four
//! perpendicular-outcome rates
//!
//! ```text
//! E = (N(θs,θi) + N(θs⊥,θi⊥) − N(θs,θi⊥) − N(θs⊥,θi)) / (sum of all four)
//! ```
//!
//! and `S = |±E(a,b) ± E(a,b′) ± E(a′,b) ± E(a′,b′)|` with exactly one
//! minus sign, whose position is part of [`ChshSettings`].
//!
//! The idler arm may carry a phase plate `diag(1, e^{iχ})` ahead of its
//! polarizer. With χ = 0 the analyzers are purely linear.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::counting::{correct_counts, CountRecord, MeasurementSetting};
use crate::linalg::{self, Mat2, Mat4};
use crate::polarimetry::{self, linear_projector, perpendicular, phase_retarder, AnalyzerSetting, TwoQubitProjector};
use crate::qstate::{wrap_phase, DensityMatrix};
use crate::{Error, Result};

/// Compensator-phase grid spacing used by [`chsh_optimize`].
pub const OPTIMIZE_GRID_STEP_DEG: f64 = 0.5;
const ANGLE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrelatorTerm {
    #[serde(rename = "E(a,b)")]
    AB,
    #[serde(rename = "E(a,b')")]
    ABPrime,
    #[serde(rename = "E(a',b)")]
    APrimeB,
    #[serde(rename = "E(a',b')")]
    APrimeBPrime,
}

impl CorrelatorTerm {
    pub const ALL: [CorrelatorTerm; 4] = [Self::AB, Self::ABPrime, Self::APrimeB, Self::APrimeBPrime];

    pub fn tag(self) -> &'static str {
        match self {
            Self::AB => "ab",
            Self::ABPrime => "ab'",
            Self::APrimeB => "a'b",
            Self::APrimeBPrime => "a'b'",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == s.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshSettings {
    pub theta_s: AnalyzerSetting,
    pub theta_s_prime: AnalyzerSetting,
    pub theta_i: AnalyzerSetting,
    pub theta_i_prime: AnalyzerSetting,
    pub minus_term: CorrelatorTerm,
    /// Idler compensator phase χ, radians.
    pub idler_phase: f64,
}

impl ChshSettings {
    /// Requires four distinct analyzer angles.
    pub fn new(
        theta_s: AnalyzerSetting,
        theta_s_prime: AnalyzerSetting,
        theta_i: AnalyzerSetting,
        theta_i_prime: AnalyzerSetting,
        minus_term: CorrelatorTerm,
    ) -> Result<Self> {
        let angles = [theta_s, theta_s_prime, theta_i, theta_i_prime];
        for i in 0..4 {
            for j in (i + 1)..4 {
                if (angles[i].radians() - angles[j].radians()).abs() < ANGLE_MATCH_TOL {
                    return Err(Error::InvalidArgument("CHSH analyzer angles must be distinct".into()));
                }
            }
        }
        Ok(Self { theta_s, theta_s_prime, theta_i, theta_i_prime, minus_term, idler_phase: 0.0 })
    }

    pub fn from_degrees(a: f64, a_prime: f64, b: f64, b_prime: f64, minus_term: CorrelatorTerm) -> Result<Self> {
        Self::new(
            AnalyzerSetting::from_degrees(a)?,
            AnalyzerSetting::from_degrees(a_prime)?,
            AnalyzerSetting::from_degrees(b)?,
            AnalyzerSetting::from_degrees(b_prime)?,
            minus_term,
        )
    }

    /// a = 0°, a′ = 45°, b = 22.5°, b′ = 67.5°, minus on E(a,b′): reaches
    /// 2√2 on the singlet.
    pub fn canonical() -> Self {
        Self::from_degrees(0.0, 45.0, 22.5, 67.5, CorrelatorTerm::ABPrime).expect("static settings")
    }

    /// a = 0°, a′ = 45°, b = 67.5°, b′ = 22.5° with the minus sign on
    /// E(a,b′). Evaluated on the singlet this combination cancels to zero.
    pub fn quoted_literal() -> Self {
        Self::from_degrees(0.0, 45.0, 67.5, 22.5, CorrelatorTerm::ABPrime).expect("static settings")
    }

    /// Same angles as [`ChshSettings::quoted_literal`] with the minus sign
    /// moved to E(a,b), which restores 2√2 on the singlet.
    pub fn quoted_relabeled() -> Self {
        Self::from_degrees(0.0, 45.0, 67.5, 22.5, CorrelatorTerm::AB).expect("static settings")
    }

    pub fn with_idler_phase(mut self, chi: f64) -> Self {
        self.idler_phase = chi;
        self
    }

    /// `(θs, θi)` pairs in the order E(a,b), E(a,b′), E(a′,b), E(a′,b′).
    pub fn pairs(&self) -> [(AnalyzerSetting, AnalyzerSetting); 4] {
        [
            (self.theta_s, self.theta_i),
            (self.theta_s, self.theta_i_prime),
            (self.theta_s_prime, self.theta_i),
            (self.theta_s_prime, self.theta_i_prime),
        ]
    }

    /// The 16 measurements: for each correlator, the outcomes
    /// `(θs,θi), (θs⊥,θi⊥), (θs,θi⊥), (θs⊥,θi)`.
    pub fn measurements(&self) -> Vec<(MeasurementSetting, TwoQubitProjector)> {
        let compensator = phase_retarder(self.idler_phase);
        let mut out = Vec::with_capacity(16);
        for (term, (s, i)) in CorrelatorTerm::ALL.into_iter().zip(self.pairs()) {
            let (sp, ip) = (perpendicular(s), perpendicular(i));
            for (suffix, ts, ti) in [("++", s, i), ("--", sp, ip), ("+-", s, ip), ("-+", sp, i)] {
                let proj = TwoQubitProjector::new(&linear_projector(ts), &linear_projector(ti).behind(&compensator));
                out.push((MeasurementSetting::linear(format!("{}{}", term.tag(), suffix), ts, ti), proj));
            }
        }
        out
    }

    pub fn sign(&self, term: CorrelatorTerm) -> f64 {
        if term == self.minus_term {
            -1.0
        } else {
            1.0
        }
    }
}

/// `(N₁ + N₂ − N₃ − N₄)/(N₁ + N₂ + N₃ + N₄)` with the argument order
/// `N(θs,θi), N(θs⊥,θi⊥), N(θs,θi⊥), N(θs⊥,θi)`.
pub fn chsh_e(rates: [f64; 4]) -> Result<f64> {
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidArgument(format!("correlator rates must be nonnegative, got {rates:?}")));
    }
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedCorrelator);
    }
    Ok(((rates[0] + rates[1] - rates[2] - rates[3]) / total).clamp(-1.0, 1.0))
}

/// `S` from the four correlators in [`ChshSettings::pairs`] order.
pub fn chsh_s(settings: &ChshSettings, correlators: [f64; 4]) -> f64 {
    CorrelatorTerm::ALL
        .into_iter()
        .zip(correlators)
        .map(|(t, e)| settings.sign(t) * e)
        .sum::<f64>()
        .abs()
}

/// `S` from a 4×4 table of corrected rates, rows in [`ChshSettings::pairs`]
/// order and columns in [`chsh_e`] order.
pub fn chsh_s_from_rates(settings: &ChshSettings, rates: &[[f64; 4]; 4]) -> Result<f64> {
    let mut e = [0.0; 4];
    for (k, row) in rates.iter().enumerate() {
        e[k] = chsh_e(*row)?;
    }
    Ok(chsh_s(settings, e))
}

fn same_angle(a: AnalyzerSetting, b: AnalyzerSetting) -> bool {
    let d = (a.radians() - b.radians()).abs();
    d < ANGLE_MATCH_TOL || (PI - d) < ANGLE_MATCH_TOL
}

/// Assembles the rate table from records by matching analyzer angles.
/// Records sharing angles are pooled.
pub fn chsh_rate_table(settings: &ChshSettings, records: &[CountRecord], tau: f64) -> Result<[[f64; 4]; 4]> {
    let mut table = [[0.0; 4]; 4];
    let wanted = settings.measurements();
    for (k, (m, _)) in wanted.iter().enumerate() {
        let (ts, ti) = (m.theta_s.expect("linear"), m.theta_i.expect("linear"));
        let matched: Vec<&CountRecord> = records
            .iter()
            .filter(|r| match (r.setting.theta_s, r.setting.theta_i) {
                (Some(a), Some(b)) => same_angle(a, ts) && same_angle(b, ti),
                _ => false,
            })
            .collect();
        if matched.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no record at θs = {:.3}°, θi = {:.3}°",
                ts.degrees(),
                ti.degrees()
            )));
        }
        let time: f64 = matched.iter().map(|r| r.acquisition_time).sum();
        table[k / 4][k % 4] = matched.iter().map(|r| correct_counts(r, tau) * r.acquisition_time).sum::<f64>() / time;
    }
    Ok(table)
}

pub fn chsh_s_from_records(settings: &ChshSettings, records: &[CountRecord], tau: f64) -> Result<f64> {
    chsh_s_from_rates(settings, &chsh_rate_table(settings, records, tau)?)
}

/// Noiseless S from Born probabilities.
pub fn chsh_predict(rho: &DensityMatrix, settings: &ChshSettings) -> Result<f64> {
    rho.ensure_physical()?;
    let probs: Vec<f64> = settings
        .measurements()
        .iter()
        .map(|(_, p)| polarimetry::expectation(rho.matrix(), p.matrix()).max(0.0))
        .collect();
    let mut rates = [[0.0; 4]; 4];
    for (k, p) in probs.into_iter().enumerate() {
        rates[k / 4][k % 4] = p;
    }
    chsh_s_from_rates(settings, &rates)
}

/// Correlation matrix restricted to linear analyzers, in Bloch coordinates
/// `(z, x)`: `M_jk = tr(ρ′ σ_j ⊗ σ_k)` with ρ′ the state after the idler
/// compensator.
fn linear_correlations(rho: &Mat4, chi: f64) -> Matrix2<f64> {
    let u = linalg::kron(&Mat2::identity(), &phase_retarder(chi));
    let rotated = u * rho * u.adjoint();
    let axes = [3usize, 1usize];
    Matrix2::from_fn(|j, k| {
        let op = linalg::kron(&linalg::pauli(axes[j]), &linalg::pauli(axes[k]));
        linalg::trace_product(&rotated, &op).re
    })
}

fn bloch_angle(v: Vector2<f64>) -> f64 {
    // (z, x) = (cos 2θ, sin 2θ)
    0.5 * v[1].atan2(v[0])
}

/// Maximises S over linear analyzer angles and the idler compensator phase.
///
/// For fixed χ the best S over linear analyzers is `2‖M(χ)‖_F` (the two
/// singular values of the 2×2 correlation matrix). χ is scanned on a
/// [`OPTIMIZE_GRID_STEP_DEG`] grid and refined by golden-section search;
/// the analyzer angles then follow from the singular vectors of `M`.
pub fn chsh_optimize(rho: &DensityMatrix) -> Result<(ChshSettings, f64)> {
    rho.ensure_physical()?;
    let m = rho.matrix();
    let score = |chi: f64| linear_correlations(m, chi).norm();

    let step = OPTIMIZE_GRID_STEP_DEG.to_radians();
    let n = (2.0 * PI / step).round() as usize;
    let (mut best_chi, mut best) = (0.0, score(0.0));
    for k in 1..n {
        let chi = k as f64 * step;
        let s = score(chi);
        if s > best {
            best = s;
            best_chi = chi;
        }
    }
    let chi = golden_section_max(&score, best_chi - step, best_chi + step, 1e-12);
    let chi = if score(chi) >= best { chi } else { best_chi };

    let corr = linear_correlations(m, chi);
    let svd = corr.svd(true, true);
    let u = svd.u.expect("requested");
    let candidate = if svd.singular_values.max() > 1e-12 {
        // order singular pairs descending
        let (i0, i1) = if svd.singular_values[0] >= svd.singular_values[1] { (0, 1) } else { (1, 0) };
        let la: Vector2<f64> = u.column(i0).into();
        let lap: Vector2<f64> = u.column(i1).into();
        let x = corr.transpose() * la;
        let y = corr.transpose() * lap;
        let vb = x + y;
        let vbp = y - x;
        let angle = |v: Vector2<f64>, fallback: f64| {
            if v.norm() > 1e-12 {
                bloch_angle(v)
            } else {
                fallback
            }
        };
        let a = bloch_angle(la);
        let ap = bloch_angle(lap);
        let b = angle(vb, a + PI / 8.0);
        let bp = angle(vbp, b + FRAC_PI_2);
        Some(ChshSettings {
            theta_s: AnalyzerSetting::new(a)?,
            theta_s_prime: AnalyzerSetting::new(ap)?,
            theta_i: AnalyzerSetting::new(b)?,
            theta_i_prime: AnalyzerSetting::new(bp)?,
            minus_term: CorrelatorTerm::ABPrime,
            idler_phase: wrap_phase(chi),
        })
    } else {
        None
    };

    let canonical = ChshSettings::canonical();
    let s_canonical = chsh_predict(rho, &canonical)?;
    match candidate {
        Some(settings) => {
            let s = chsh_predict(rho, &settings)?;
            if s >= s_canonical {
                Ok((settings, s))
            } else {
                Ok((canonical, s_canonical))
            }
        }
        None => Ok((canonical, s_canonical)),
    }
}

fn golden_section_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{basis_state, bell_phase_state, x_state, BellPhaseSpec, XStateSpec, HH};
    use std::f64::consts::SQRT_2;

    fn singlet() -> DensityMatrix {
        bell_phase_state(BellPhaseSpec::new(PI).unwrap())
    }

    #[test]
    fn correlator_examples() {
        assert_eq!(chsh_e([5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(chsh_e([5.0, 5.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(chsh_e([0.0; 4]), Err(Error::UndefinedCorrelator)));
        assert!(chsh_e([-1.0, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn singlet_correlator_at_22_5() {
        let s = ChshSettings::canonical();
        let table = {
            let rho = singlet();
            let mut t = [[0.0; 4]; 4];
            for (k, (_, p)) in s.measurements().iter().enumerate() {
                t[k / 4][k % 4] = crate::polarimetry::born_probability(&rho, p).unwrap();
            }
            t
        };
        assert!((chsh_e(table[0]).unwrap() + SQRT_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tsirelson_at_canonical_settings() {
        let s = chsh_predict(&singlet(), &ChshSettings::canonical()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn literal_and_relabeled_quoted_settings() {
        assert!(chsh_predict(&singlet(), &ChshSettings::quoted_literal()).unwrap() < 1e-12);
        let s = chsh_predict(&singlet(), &ChshSettings::quoted_relabeled()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn product_state_at_canonical_settings() {
        let s = chsh_predict(&basis_state(HH), &ChshSettings::canonical()).unwrap();
        assert!((s - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_gives_zero() {
        assert!(chsh_predict(&DensityMatrix::maximally_mixed(), &ChshSettings::canonical()).unwrap() < 1e-12);
        let (_, s) = chsh_optimize(&DensityMatrix::maximally_mixed()).unwrap();
        assert!(s < 1e-12);
    }

    #[test]
    fn optimize_singlet_and_phased_states() {
        let (settings, s) = chsh_optimize(&singlet()).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-6);
        assert!(settings.idler_phase.abs() < 1e-6 || (settings.idler_phase.abs() - PI).abs() < 1e-6);
        for phi in [0.0, 0.7, -2.2, 1.9] {
            let rho = bell_phase_state(BellPhaseSpec::new(phi).unwrap());
            let (_, s) = chsh_optimize(&rho).unwrap();
            assert!((s - 2.0 * SQRT_2).abs() < 1e-6, "phi {phi}: {s}");
        }
    }

    #[test]
    fn optimize_beats_two_for_laser_like_state() {
        let rho = x_state(XStateSpec::new(0.952, -0.943 * PI).unwrap());
        let (_, s) = chsh_optimize(&rho).unwrap();
        assert!(s > 2.0);
        assert!(s >= chsh_predict(&rho, &ChshSettings::canonical()).unwrap());
    }

    #[test]
    fn distinct_angles_required() {
        assert!(ChshSettings::from_degrees(0.0, 0.0, 22.5, 67.5, CorrelatorTerm::AB).is_err());
        assert!(ChshSettings::from_degrees(0.0, 180.0, 22.5, 67.5, CorrelatorTerm::AB).is_err());
    }

    #[test]
    fn rates_from_records_match_measurements() {
        let s = ChshSettings::canonical();
        let recs: Vec<CountRecord> = s
            .measurements()
            .into_iter()
            .enumerate()
            .map(|(k, (m, _))| CountRecord {
                setting: m,
                raw_counts: (k + 1) as f64 * 10.0,
                acquisition_time: 10.0,
                singles_signal: 0.0,
                singles_idler: 0.0,
            })
            .collect();
        let t = chsh_rate_table(&s, &recs, 1e-9).unwrap();
        assert_eq!(t[0], [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t[3], [13.0, 14.0, 15.0, 16.0]);
        assert!(chsh_rate_table(&s, &recs[1..], 1e-9).is_err());
    }

    #[test]
    fn s_from_fringe_scan_records() {
        // H, V, A, D scans on a 22.5° idler grid contain every canonical pair.
        let rho = singlet();
        let budget = crate::counting::RateBudget { pair_rate: 100.0, singles_signal: 0.0, singles_idler: 0.0, window_tau: 1e-9 };
        let mut recs = Vec::new();
        for ts_deg in [0.0, 90.0, 135.0, 45.0] {
            for k in 0..8 {
                let ts = AnalyzerSetting::from_degrees(ts_deg).unwrap();
                let ti = AnalyzerSetting::from_degrees(22.5 * k as f64).unwrap();
                let proj = TwoQubitProjector::new(&linear_projector(ts), &linear_projector(ti));
                let m = MeasurementSetting::linear("fringe", ts, ti);
                recs.push(crate::counting::simulate_record(&rho, m, &proj, &budget, 1.0, None).unwrap());
            }
        }
        let s = chsh_s_from_records(&ChshSettings::canonical(), &recs, 1e-9).unwrap();
        assert!((s - 2.0 * SQRT_2).abs() < 1e-9, "{s}");
    }
}
