//! End-to-end analysis of a dataset and Poisson parametric bootstrap of
//! every derived scalar.
//!
//! Resample `r` draws all its counts from a ChaCha8 stream seeded with
//! `derive_seed(seed, r)`, visiting records in a fixed order (fringe scans
//! in dataset order, then CHSH, then tomography). Resamples run in parallel
//! but are collected by index, so the summary depends only on the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::chsh::{chsh_s_from_records, ChshSettings};
use super::fringe::{fit_fringe, FringeScan, SignalBasis};
use super::tomography::{tomography_mle, TomographyData};
use crate::counting::{derive_seed, poisson_draw, CountRecord};
use crate::qstate::{concurrence, fidelity_to_pure, infer_phase, wrap_phase, BellPhaseSpec, DensityMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub window_tau: f64,
    pub fringe_scans: Vec<(SignalBasis, Vec<CountRecord>)>,
    pub chsh: Option<(ChshSettings, Vec<CountRecord>)>,
    pub tomography: Option<Vec<CountRecord>>,
    pub target: BellPhaseSpec,
}

impl Dataset {
    fn record_count(&self) -> usize {
        self.fringe_scans.iter().map(|(_, r)| r.len()).sum::<usize>()
            + self.chsh.as_ref().map_or(0, |(_, r)| r.len())
            + self.tomography.as_ref().map_or(0, Vec::len)
    }

    fn resampled<F: FnMut(&CountRecord) -> f64>(&self, mut draw: F) -> Self {
        let mut redo = |records: &[CountRecord]| records.iter().map(|r| r.with_counts(draw(r))).collect::<Vec<_>>();
        Self {
            window_tau: self.window_tau,
            fringe_scans: self.fringe_scans.iter().map(|(b, r)| (*b, redo(r))).collect(),
            chsh: self.chsh.as_ref().map(|(s, r)| (*s, redo(r))),
            tomography: self.tomography.as_ref().map(|r| redo(r)),
            target: self.target,
        }
    }
}

/// Scalars derived from one dataset. Fields are `None` when the dataset
/// has no data for them.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub visibilities: Vec<(SignalBasis, f64)>,
    pub s: Option<f64>,
    pub state: Option<DensityMatrix>,
    pub concurrence: Option<f64>,
    /// Radians in (−π, π].
    pub phase: Option<f64>,
    pub fidelity: Option<f64>,
}

impl Analysis {
    pub fn visibility(&self, basis: SignalBasis) -> Option<f64> {
        self.visibilities.iter().find(|(b, _)| *b == basis).map(|(_, v)| *v)
    }
}

pub fn analyze(dataset: &Dataset) -> Result<Analysis> {
    let tau = dataset.window_tau;
    let visibilities = dataset
        .fringe_scans
        .iter()
        .map(|(basis, records)| Ok((*basis, fit_fringe(&FringeScan::from_records(*basis, records, tau)?)?.visibility)))
        .collect::<Result<Vec<_>>>()?;
    let s = dataset.chsh.as_ref().map(|(settings, records)| chsh_s_from_records(settings, records, tau)).transpose()?;
    let state = dataset
        .tomography
        .as_ref()
        .map(|records| tomography_mle(&TomographyData::from_records(records, tau)?))
        .transpose()?;
    let (concurrence, phase, fidelity) = match &state {
        Some(rho) => (Some(concurrence(rho)?), Some(infer_phase(rho)?), Some(fidelity_to_pure(rho, dataset.target)?)),
        None => (None, None, None),
    };
    Ok(Analysis { visibilities, s, state, concurrence, phase, fidelity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarSummary {
    /// Value on the observed data.
    pub point: f64,
    pub mean: f64,
    /// Sample standard deviation over successful resamples.
    pub std: f64,
}

impl ScalarSummary {
    fn from_samples(point: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { point, mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapSummary {
    pub point: Analysis,
    pub visibilities: Vec<(SignalBasis, ScalarSummary)>,
    pub s: Option<ScalarSummary>,
    pub concurrence: Option<ScalarSummary>,
    /// Resampled phases are unwrapped around the point estimate before the
    /// spread is taken.
    pub phase: Option<ScalarSummary>,
    pub fidelity: Option<ScalarSummary>,
    pub n_resamples: usize,
    pub failed: usize,
}

impl BootstrapSummary {
    pub fn visibility(&self, basis: SignalBasis) -> Option<ScalarSummary> {
        self.visibilities.iter().find(|(b, _)| *b == basis).map(|(_, v)| *v)
    }
}

/// Analyzes `dataset` and `n_resamples` Poisson resamplings of it.
/// Resamples whose analysis fails are dropped; more than half failing is
/// an error.
pub fn bootstrap(dataset: &Dataset, n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if n_resamples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 resamples, got {n_resamples}")));
    }
    if dataset.record_count() == 0 {
        return Err(Error::InvalidArgument("dataset has no records".into()));
    }
    let point = analyze(dataset)?;
    let results: Vec<Option<Analysis>> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r));
            let resample = dataset.resampled(|rec| poisson_draw(&mut rng, rec.raw_counts) as f64);
            analyze(&resample).ok()
        })
        .collect();
    let ok: Vec<&Analysis> = results.iter().flatten().collect();
    let failed = n_resamples - ok.len();
    if 2 * failed > n_resamples {
        return Err(Error::BootstrapFailed { failed, total: n_resamples });
    }
    let summarize = |pt: Option<f64>, get: &dyn Fn(&Analysis) -> Option<f64>| {
        pt.map(|p| ScalarSummary::from_samples(p, &ok.iter().filter_map(|a| get(a)).collect::<Vec<_>>()))
    };
    let visibilities = point
        .visibilities
        .iter()
        .map(|&(b, v)| (b, summarize(Some(v), &|a| a.visibility(b)).expect("point present")))
        .collect();
    let phase = point.phase.map(|p| {
        let unwrapped: Vec<f64> = ok.iter().filter_map(|a| a.phase).map(|x| p + wrap_phase(x - p)).collect();
        ScalarSummary::from_samples(p, &unwrapped)
    });
    Ok(BootstrapSummary {
        visibilities,
        s: summarize(point.s, &|a| a.s),
        concurrence: summarize(point.concurrence, &|a| a.concurrence),
        phase,
        fidelity: summarize(point.fidelity, &|a| a.fidelity),
        point,
        n_resamples,
        failed,
    })
}
