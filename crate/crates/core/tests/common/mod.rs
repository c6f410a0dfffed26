#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sagnac_core::counting::{derive_seed, sample_counts, CountRecord, MeasurementSetting};
use sagnac_core::polarimetry;
use sagnac_core::qstate::{random_state, DensityMatrix};

pub fn state_from_seed(seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_state(&mut rng, 1 + (seed % 4) as usize)
}

/// Tomography records with mean count `total/4 · tr(ρPₖ)` per setting, so
/// `total` is roughly the summed count. `seed = None` stores the exact means.
pub fn tomography_records(rho: &DensityMatrix, total: f64, seed: Option<u64>) -> Vec<CountRecord> {
    polarimetry::tomography_settings()
        .into_iter()
        .enumerate()
        .map(|(k, (s, p))| {
            let mean = total / 4.0 * polarimetry::born_probability(rho, &p).unwrap();
            let raw_counts = match seed {
                Some(seed) => sample_counts(mean, 1.0, derive_seed(seed, k as u64)) as f64,
                None => mean,
            };
            CountRecord {
                setting: MeasurementSetting::tomography(s),
                raw_counts,
                acquisition_time: 1.0,
                singles_signal: 0.0,
                singles_idler: 0.0,
            }
        })
        .collect()
}
