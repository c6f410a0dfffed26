//! Seeded Monte Carlo checks of the shot-noise model and the estimators.

mod common;

use std::f64::consts::PI;

use sagnac_core::analysis::bootstrap::{bootstrap, Dataset};
use sagnac_core::analysis::fringe::{fit_fringe, FringeScan, SignalBasis};
use sagnac_core::analysis::tomography::{tomography_linear, tomography_mle, TomographyData};
use sagnac_core::counting::{derive_seed, sample_counts, simulate_record, CountRecord, MeasurementSetting, RateBudget};
use sagnac_core::polarimetry::{linear_projector, AnalyzerSetting, TwoQubitProjector};
use sagnac_core::qstate::{bell_phase_state, fidelity_to_pure, validate_physical, x_state, BellPhaseSpec, XStateSpec};

#[test]
fn poisson_moments() {
    let n = 10_000u64;
    let draws: Vec<f64> = (0..n).map(|k| sample_counts(50.0, 10.0, derive_seed(2024, k)) as f64).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 500.0).abs() < 5.0, "mean {mean}");
    assert!((var - 500.0).abs() < 50.0, "variance {var}");
}

#[test]
fn sampling_is_deterministic_per_seed() {
    assert_eq!(sample_counts(12.3, 4.0, 99), sample_counts(12.3, 4.0, 99));
    assert_eq!(sample_counts(0.0, 4.0, 99), 0);
    let distinct: std::collections::HashSet<u64> = (0..50).map(|k| derive_seed(7, k)).collect();
    assert_eq!(distinct.len(), 50);
}

fn led_scan(visibility: f64, seed: u64) -> FringeScan {
    let rho = x_state(XStateSpec::new(visibility, PI).unwrap());
    // peak expected count 2·pair_rate·(1 + V)/4·t = 500
    let t = 300.0;
    let pair_rate = 500.0 * 2.0 / ((1.0 + visibility) * t);
    let budget = RateBudget { pair_rate, singles_signal: 220.0, singles_idler: 220.0, window_tau: 1e-9 };
    let ts = SignalBasis::D.theta_s();
    let records: Vec<CountRecord> = (0..36)
        .map(|k| {
            let ti = AnalyzerSetting::from_degrees(5.0 * k as f64).unwrap();
            let proj = TwoQubitProjector::new(&linear_projector(ts), &linear_projector(ti));
            simulate_record(&rho, MeasurementSetting::linear("D", ts, ti), &proj, &budget, t, Some(derive_seed(seed, k))).unwrap()
        })
        .collect();
    FringeScan::from_records(SignalBasis::D, &records, 1e-9).unwrap()
}

#[test]
fn led_scale_fringe_visibility_envelope() {
    let truth = 0.8138;
    let trials = 200;
    let fits: Vec<f64> = (0..trials).map(|s| fit_fringe(&led_scan(truth, s)).unwrap().visibility).collect();
    let mean = fits.iter().sum::<f64>() / trials as f64;
    let inside = fits.iter().filter(|v| (*v - truth).abs() <= 0.03).count();
    assert!((mean - truth).abs() < 0.005, "mean {mean}");
    assert!(inside as f64 >= 0.99 * trials as f64, "{inside}/{trials} inside ±0.03");
}

#[test]
fn noisy_linear_inversion_can_be_unphysical() {
    // A pure state at low counts: some seed among the first few drives an
    // eigenvalue negative, which the validator must flag.
    let rho = bell_phase_state(BellPhaseSpec::new(PI).unwrap());
    let flagged = (0..20).any(|seed| {
        let data = TomographyData::from_records(&common::tomography_records(&rho, 2000.0, Some(seed)), 1e-9).unwrap();
        let report = validate_physical(&tomography_linear(&data).unwrap());
        report.min_eigenvalue < -1e-9 && !report.passed
    });
    assert!(flagged);
}

#[test]
fn mle_high_statistics_singlet() {
    let target = BellPhaseSpec::new(PI).unwrap();
    let rho = bell_phase_state(target);
    for seed in 0..20 {
        let data = TomographyData::from_records(&common::tomography_records(&rho, 1e6, Some(seed)), 1e-9).unwrap();
        let f = fidelity_to_pure(&tomography_mle(&data).unwrap(), target).unwrap();
        assert!(f > 0.999, "seed {seed}: F = {f}");
    }
}

#[test]
fn mle_led_statistics() {
    // ~500 counts at the brightest settings.
    let target = BellPhaseSpec::new(-0.941 * PI).unwrap();
    let rho = bell_phase_state(target);
    let trials = 50;
    let mut good = 0;
    for seed in 0..trials {
        let data = TomographyData::from_records(&common::tomography_records(&rho, 4000.0, Some(seed)), 1e-9).unwrap();
        let est = tomography_mle(&data).unwrap();
        assert!(validate_physical(&est).passed);
        if fidelity_to_pure(&est, target).unwrap() > 0.95 {
            good += 1;
        }
    }
    assert!(good as f64 >= 0.9 * trials as f64, "{good}/{trials} above 0.95");
}

#[test]
fn zero_noise_bootstrap_has_poisson_floor_only() {
    let target = BellPhaseSpec::new(PI).unwrap();
    let rho = bell_phase_state(target);
    let noiseless = common::tomography_records(&rho, 4e8, None);
    let data = Dataset { window_tau: 1e-9, fringe_scans: vec![], chsh: None, tomography: Some(noiseless), target };
    let summary = bootstrap(&data, 20, 3).unwrap();
    let c = summary.concurrence.unwrap();
    assert!((c.point - 1.0).abs() < 1e-6);
    assert!(c.std < 1e-3, "{c:?}");
}
