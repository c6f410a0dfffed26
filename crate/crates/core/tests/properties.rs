//! Randomized invariant checks across all modules.

mod common;

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use sagnac_core::analysis::chsh::{chsh_e, chsh_optimize, chsh_predict, ChshSettings, CorrelatorTerm};
use sagnac_core::analysis::fringe::{fit_fringe, FringeScan, SignalBasis};
use sagnac_core::analysis::tomography::{tomography_linear, tomography_mle, TomographyData};
use sagnac_core::counting::{accidental_rate, correct_counts, predict_rate, simulate_record, CountRecord, MeasurementSetting, RateBudget};
use sagnac_core::linalg::Mat4;
use sagnac_core::polarimetry::{
    born_probability, linear_projector, perpendicular, projector_from_waveplates, AnalyzerSetting, PolarizationLabel,
    TwoQubitProjector,
};
use sagnac_core::qstate::{
    bell_phase_state, concurrence, fidelity_to_pure, infer_phase, mix, product_state, trace_distance, validate_physical,
    x_state, BellPhaseSpec, DensityMatrix, XStateSpec,
};
use sagnac_core::source::{
    fiber_mode_count, led_profile, sagnac_output, DistortionEntry, DistortionMap, FiberSpec, PumpSample,
    PumpSpatialProfile,
};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn phase() -> impl Strategy<Value = f64> {
    (-PI..=PI).prop_filter("branch", |p| *p > -PI)
}

fn angle() -> impl Strategy<Value = AnalyzerSetting> {
    (0.0..PI).prop_map(|t| AnalyzerSetting::new(t).unwrap())
}

fn bell(phi: f64) -> DensityMatrix {
    bell_phase_state(BellPhaseSpec::new(phi).unwrap())
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn unit_ket() -> impl Strategy<Value = [C64; 2]> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| [C64::new((t / 2.0).cos(), 0.0), C64::from_polar((t / 2.0).sin(), p)])
}

fn separable_state() -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec((unit_ket(), unit_ket()), 1..4).prop_flat_map(|kets| {
        let n = kets.len();
        weights(n).prop_map(move |w| {
            let parts: Vec<(f64, DensityMatrix)> =
                w.iter().zip(&kets).map(|(&w, (a, b))| (w, product_state(*a, *b).unwrap())).collect();
            mix(&parts).unwrap()
        })
    })
}

mod qstate_props {
    use super::*;

    proptest! {
        #![proptest_config(cases(128))]

        #[test]
        fn concurrence_is_convex(seeds in prop::collection::vec(any::<u64>(), 2..5), raw in prop::collection::vec(0.01..1.0f64, 4)) {
            let states: Vec<DensityMatrix> = seeds.iter().map(|s| common::state_from_seed(*s)).collect();
            let total: f64 = raw[..states.len()].iter().sum();
            let parts: Vec<(f64, DensityMatrix)> = raw.iter().zip(&states).map(|(w, r)| (w / total, r.clone())).collect();
            let lhs = concurrence(&mix(&parts).unwrap()).unwrap();
            let rhs: f64 = parts.iter().map(|(w, r)| w * concurrence(r).unwrap()).sum();
            prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
        }

        #[test]
        fn bell_states_are_maximally_entangled(phi in phase()) {
            prop_assert!((concurrence(&bell(phi)).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn equal_bell_mixture_follows_cosine_law(p1 in phase(), p2 in phase()) {
            let m = mix(&[(0.5, bell(p1)), (0.5, bell(p2))]).unwrap();
            let expected = ((p1 - p2) / 2.0).cos().abs();
            prop_assert!((concurrence(&m).unwrap() - expected).abs() < 1e-9);
        }

        #[test]
        fn phase_round_trips(phi in phase()) {
            prop_assert!((infer_phase(&bell(phi)).unwrap() - phi).abs() < 1e-12);
        }

        #[test]
        fn fidelity_follows_cosine_squared(phi in phase(), target in phase()) {
            let f = fidelity_to_pure(&bell(phi), BellPhaseSpec::new(target).unwrap()).unwrap();
            prop_assert!((f - ((phi - target) / 2.0).cos().powi(2)).abs() < 1e-12);
        }

        #[test]
        fn constructors_produce_physical_states(phi in phase(), c in 0.0..=1.0f64, seed in any::<u64>(), w in 0.0..=1.0f64) {
            let xs = x_state(XStateSpec::new(c, phi).unwrap());
            let r = common::state_from_seed(seed);
            for rho in [bell(phi), xs.clone(), mix(&[(w, xs), (1.0 - w, r.clone())]).unwrap(), r] {
                let report = validate_physical(&rho);
                prop_assert!(report.passed, "{report}");
            }
        }

        #[test]
        fn json_round_trip_is_exact(seed in any::<u64>()) {
            let rho = common::state_from_seed(seed);
            let text = serde_json::to_string(&rho).unwrap();
            let back: DensityMatrix = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.matrix(), rho.matrix());
        }
    }
}

mod polarimetry_props {
    use super::*;

    proptest! {
        #![proptest_config(cases(256))]

        #[test]
        fn perpendicular_projectors_complete(theta in angle()) {
            let sum = linear_projector(theta).matrix() + linear_projector(perpendicular(theta)).matrix();
            prop_assert!((sum - nalgebra::Matrix2::<C64>::identity()).norm() < 1e-12);
        }

        #[test]
        fn singlet_probabilities_follow_sin_squared(ts in angle(), ti in angle()) {
            let p = born_probability(&bell(PI), &TwoQubitProjector::new(&linear_projector(ts), &linear_projector(ti))).unwrap();
            prop_assert!((p - 0.5 * (ts.radians() - ti.radians()).sin().powi(2)).abs() < 1e-12);
        }

        #[test]
        fn four_outcomes_sum_to_one(seed in any::<u64>(), ts in angle(), ti in angle()) {
            let rho = common::state_from_seed(seed);
            let total: f64 = [(ts, ti), (ts, perpendicular(ti)), (perpendicular(ts), ti), (perpendicular(ts), perpendicular(ti))]
                .iter()
                .map(|(a, b)| born_probability(&rho, &TwoQubitProjector::new(&linear_projector(*a), &linear_projector(*b))).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn waveplates_reproduce_every_label() {
        for label in PolarizationLabel::ALL {
            let (q, h) = label.waveplates_deg();
            let p = projector_from_waveplates(q.to_radians(), h.to_radians());
            assert!((p.matrix() - label.projector().matrix()).norm() < 1e-12, "{label:?}");
        }
    }
}

mod source_props {
    use super::*;

    fn profile() -> impl Strategy<Value = PumpSpatialProfile> {
        (1usize..12).prop_flat_map(|n| {
            (prop::collection::vec(-0.5..0.5f64, n), weights(n)).prop_map(|(x, w)| {
                PumpSpatialProfile::new(
                    x.into_iter().zip(w).map(|(position_mm, weight)| PumpSample { position_mm, weight }).collect(),
                )
                .unwrap()
            })
        })
    }

    fn ramp(unit: bool) -> impl Strategy<Value = DistortionMap> {
        prop::collection::vec((phase(), 0.0..=1.0f64), 3).prop_map(move |v| {
            let entries = v
                .iter()
                .enumerate()
                .map(|(k, (phi, c))| DistortionEntry {
                    position_mm: -0.5 + 0.5 * k as f64,
                    phi: *phi,
                    concurrence: if unit { 1.0 } else { *c },
                })
                .collect();
            DistortionMap::new(entries).unwrap()
        })
    }

    proptest! {
        #![proptest_config(cases(128))]

        #[test]
        fn uniform_map_is_independent_of_sampling(phi in phase(), c in 0.0..=1.0f64, n in 1usize..60, d in 0.1..3.0f64) {
            let map = DistortionMap::uniform(phi, c).unwrap();
            let a = sagnac_output(&led_profile(d, n).unwrap(), &map).unwrap();
            let b = sagnac_output(&led_profile(d, 1).unwrap(), &map).unwrap();
            prop_assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        }

        #[test]
        fn mixture_concurrence_bounded_by_components(p in profile(), map in ramp(false)) {
            let rho = sagnac_output(&p, &map).unwrap();
            let max_c = p.samples().iter().map(|s| map.at(s.position_mm).unwrap().1).fold(0.0, f64::max);
            prop_assert!(concurrence(&rho).unwrap() <= max_c + 1e-9);
        }

        #[test]
        fn phasor_average_law(p in profile(), map in ramp(true)) {
            let rho = sagnac_output(&p, &map).unwrap();
            let phasor: C64 = p.samples().iter().map(|s| C64::from_polar(s.weight, map.at(s.position_mm).unwrap().0)).sum();
            prop_assert!((concurrence(&rho).unwrap() - phasor.norm()).abs() < 1e-9);
        }

        #[test]
        fn mode_count_monotone(d in 1.0..500.0f64, na in 0.05..0.9f64, lambda in 300.0..2000.0f64, k in 1.01..2.0f64) {
            let n = |d: f64, na: f64, l: f64| fiber_mode_count(&FiberSpec { core_diameter_um: d, numerical_aperture: na, wavelength_nm: l }).unwrap();
            let base = n(d, na, lambda);
            prop_assert!(n(d * k, na, lambda) > base);
            prop_assert!(n(d, (na * k).min(0.99), lambda) > base);
            prop_assert!(n(d, na, lambda * k) < base);
        }
    }
}

mod counting_props {
    use super::*;

    fn budget() -> impl Strategy<Value = RateBudget> {
        (0.0..2e4f64, 0.0..2e5f64, 0.0..2e5f64, 1e-10..1e-8f64).prop_map(|(pair_rate, ss, si, tau)| RateBudget {
            pair_rate,
            singles_signal: ss,
            singles_idler: si,
            window_tau: tau,
        })
    }

    proptest! {
        #![proptest_config(cases(256))]

        #[test]
        fn perpendicular_rates_sum(seed in any::<u64>(), ts in angle(), ti in angle(), b in budget()) {
            let rho = common::state_from_seed(seed);
            let total: f64 = [(ts, ti), (ts, perpendicular(ti)), (perpendicular(ts), ti), (perpendicular(ts), perpendicular(ti))]
                .iter()
                .map(|(a, c)| predict_rate(&rho, &TwoQubitProjector::new(&linear_projector(*a), &linear_projector(*c)), &b).unwrap())
                .sum();
            let expected = 2.0 * b.pair_rate + 4.0 * b.accidental_rate().unwrap();
            prop_assert!((total - expected).abs() < 1e-9 * expected.max(1.0));
        }

        #[test]
        fn corrected_rates_are_nonnegative(n in 0u32..100_000, t in 0.1..1000.0f64, ss in 0.0..1e6f64, si in 0.0..1e6f64, tau in 0.0..1e-7f64) {
            let r = CountRecord {
                setting: MeasurementSetting { label: "HH".into(), theta_s: None, theta_i: None },
                raw_counts: n as f64,
                acquisition_time: t,
                singles_signal: ss,
                singles_idler: si,
            };
            prop_assert!(correct_counts(&r, tau) >= 0.0);
        }

        #[test]
        fn accidentals_linear_in_each_argument(ss in 0.0..1e6f64, si in 0.0..1e6f64, tau in 0.0..1e-7f64, k in 0.0..10.0f64) {
            let base = accidental_rate(ss, si, tau).unwrap();
            let tol = 1e-12 * (k * base).max(1e-300);
            prop_assert!((accidental_rate(k * ss, si, tau).unwrap() - k * base).abs() <= tol);
            prop_assert!((accidental_rate(ss, k * si, tau).unwrap() - k * base).abs() <= tol);
            prop_assert!((accidental_rate(ss, si, k * tau).unwrap() - k * base).abs() <= tol);
        }
    }
}

mod analysis_props {
    use super::*;

    fn settings() -> impl Strategy<Value = ChshSettings> {
        (angle(), angle(), angle(), angle(), 0usize..4, phase()).prop_filter_map("distinct angles", |(a, ap, b, bp, m, chi)| {
            ChshSettings::new(a, ap, b, bp, CorrelatorTerm::ALL[m]).ok().map(|s| s.with_idler_phase(chi))
        })
    }

    proptest! {
        #![proptest_config(cases(256))]

        #[test]
        fn tsirelson_bound(seed in any::<u64>(), s in settings()) {
            let rho = common::state_from_seed(seed);
            prop_assert!(chsh_predict(&rho, &s).unwrap() <= 2.0 * SQRT_2 + 1e-9);
        }

        #[test]
        fn correlator_is_bounded_and_scale_free(n in prop::array::uniform4(0.0..1e6f64), k in 1e-3..1e3f64) {
            prop_assume!(n.iter().sum::<f64>() > 0.0);
            let e = chsh_e(n).unwrap();
            prop_assert!((-1.0..=1.0).contains(&e));
            let scaled = chsh_e(n.map(|x| x * k)).unwrap();
            prop_assert!((e - scaled).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(cases(100))]

        #[test]
        fn separable_states_respect_chsh_bound(rho in separable_state()) {
            let (_, s) = chsh_optimize(&rho).unwrap();
            prop_assert!(s <= 2.0 + 1e-9, "S = {s}");
        }

        #[test]
        fn real_phase_x_state_visibility_equals_concurrence(c in 0.05..=1.0f64, flip in any::<bool>(), basis_d in any::<bool>()) {
            let phi = if flip { PI } else { 0.0 };
            let rho = x_state(XStateSpec::new(c, phi).unwrap());
            let basis = if basis_d { SignalBasis::D } else { SignalBasis::A };
            let budget = RateBudget { pair_rate: 1000.0, singles_signal: 0.0, singles_idler: 0.0, window_tau: 1e-9 };
            let records: Vec<CountRecord> = (0..36)
                .map(|k| {
                    let ti = AnalyzerSetting::from_degrees(5.0 * k as f64).unwrap();
                    let proj = TwoQubitProjector::new(&linear_projector(basis.theta_s()), &linear_projector(ti));
                    simulate_record(&rho, MeasurementSetting::linear("scan", basis.theta_s(), ti), &proj, &budget, 1.0, None).unwrap()
                })
                .collect();
            let fit = fit_fringe(&FringeScan::from_records(basis, &records, 1e-9).unwrap()).unwrap();
            prop_assert!((fit.visibility - c).abs() < 1e-9);
            prop_assert!((concurrence(&rho).unwrap() - c).abs() < 1e-9);
        }

        #[test]
        fn exact_tomography_round_trips(seed in any::<u64>()) {
            let rho = common::state_from_seed(seed);
            let data = TomographyData::from_records(&common::tomography_records(&rho, 1e5, None), 1e-9).unwrap();
            prop_assert!(trace_distance(&tomography_linear(&data).unwrap(), &rho) < 1e-8);
            prop_assert!(trace_distance(&tomography_mle(&data).unwrap(), &rho) < 1e-6);
        }

        #[test]
        fn mle_output_is_physical(seed in any::<u64>(), total in 50.0..1e6f64) {
            let rho = common::state_from_seed(seed);
            let data = TomographyData::from_records(&common::tomography_records(&rho, total, Some(seed)), 1e-9).unwrap();
            let est = tomography_mle(&data).unwrap();
            let report = validate_physical(&est);
            prop_assert!(report.passed, "{report}");
        }
    }

    #[test]
    fn identity_mixture_has_zero_s() {
        let m = DensityMatrix::from_matrix(Mat4::identity() / C64::new(4.0, 0.0));
        assert!(chsh_predict(&m, &ChshSettings::canonical()).unwrap().abs() < 1e-12);
    }
}
