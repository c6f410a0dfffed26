//! Simulated experiment: source state → counts → analysis → report.
//!
//! Count seeds are split per stream (tomography 0, CHSH 1, fringes 2,
//! bootstrap 3) and then per record: record `k`, repeat `r` of a stream
//! uses `derive_seed(derive_seed(seed, stream), k·n_repeats + r)`.

use std::fs;
use std::path::{Path, PathBuf};

use sagnac_core::analysis::bootstrap::{bootstrap, BootstrapSummary, Dataset};
use sagnac_core::analysis::chsh::{chsh_optimize, chsh_predict, ChshSettings};
use sagnac_core::analysis::fringe::{fit_fringe, FringeFit, FringeScan, SignalBasis};
use sagnac_core::counting::{derive_seed, simulate_record, write_records_csv, CountRecord, MeasurementSetting};
use sagnac_core::polarimetry::{self, linear_projector, AnalyzerSetting, TwoQubitProjector};
use sagnac_core::qstate::{concurrence, fidelity_to_pure, infer_phase, DensityMatrix};
use sagnac_core::source::sagnac_output;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::{BasisValues, ModelReport, Provenance, Report, SettingsReport};
use crate::scenario::{ChshPlan, Scenario};

const STREAM_TOMOGRAPHY: u64 = 0;
const STREAM_CHSH: u64 = 1;
const STREAM_FRINGE: u64 = 2;
const STREAM_BOOTSTRAP: u64 = 3;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub true_state: DensityMatrix,
    pub tomography_records: Vec<CountRecord>,
    pub chsh_settings: ChshSettings,
    pub chsh_records: Vec<CountRecord>,
    pub fringe_records: Vec<(SignalBasis, Vec<CountRecord>)>,
    pub fringe_fits: Vec<(SignalBasis, FringeFit)>,
    pub summary: BootstrapSummary,
    pub report: Report,
}

struct Simulator<'a> {
    scenario: &'a Scenario,
    rho: &'a DensityMatrix,
}

impl Simulator<'_> {
    fn records(&self, stream: u64, settings: Vec<(MeasurementSetting, TwoQubitProjector)>) -> Result<Vec<CountRecord>> {
        let s = self.scenario;
        let stream_seed = derive_seed(s.seed, stream);
        let repeats = u64::from(s.n_repeats);
        let mut out = Vec::with_capacity(settings.len() * repeats as usize);
        for (k, (setting, proj)) in settings.into_iter().enumerate() {
            for r in 0..repeats {
                let seed = derive_seed(stream_seed, k as u64 * repeats + r);
                out.push(simulate_record(self.rho, setting.clone(), &proj, &s.budget, s.time_per_setting, Some(seed))?);
            }
        }
        Ok(out)
    }
}

fn fringe_angles(step_deg: f64) -> Vec<f64> {
    (0..).map(|k| k as f64 * step_deg).take_while(|d| *d < 180.0 - 1e-9).collect()
}

/// Runs the full simulated experiment. `timestamp` goes into the report's
/// provenance block and nowhere else.
pub fn run(scenario: &Scenario, timestamp: &str) -> Result<RunOutput> {
    let rho = sagnac_output(&scenario.pump, &scenario.distortion)?;
    let sim = Simulator { scenario, rho: &rho };
    let tau = scenario.budget.window_tau;

    let tomography_records = if scenario.tomography {
        let settings = polarimetry::tomography_settings()
            .into_iter()
            .map(|(t, p)| (MeasurementSetting::tomography(t), p))
            .collect();
        sim.records(STREAM_TOMOGRAPHY, settings)?
    } else {
        Vec::new()
    };

    let chsh_settings = match scenario.chsh {
        ChshPlan::Fixed(s) => s,
        ChshPlan::Optimize => {
            // settings are chosen from the measured state, as an experimenter would
            let data = sagnac_core::analysis::tomography::TomographyData::from_records(&tomography_records, tau)?;
            let estimate = sagnac_core::analysis::tomography::tomography_mle(&data)?;
            chsh_optimize(&estimate)?.0
        }
    };
    let chsh_records = sim.records(STREAM_CHSH, chsh_settings.measurements())?;

    let angles = fringe_angles(scenario.fringe_step_deg);
    let mut fringe_settings = Vec::new();
    for basis in SignalBasis::ALL {
        for &deg in &angles {
            let ti = AnalyzerSetting::from_degrees(deg)?;
            let proj = TwoQubitProjector::new(&linear_projector(basis.theta_s()), &linear_projector(ti));
            fringe_settings.push((MeasurementSetting::linear(format!("{basis}:{deg:.1}"), basis.theta_s(), ti), proj));
        }
    }
    let all_fringe = sim.records(STREAM_FRINGE, fringe_settings)?;
    let per_basis = all_fringe.len() / SignalBasis::ALL.len();
    let fringe_records: Vec<(SignalBasis, Vec<CountRecord>)> = SignalBasis::ALL
        .iter()
        .enumerate()
        .map(|(b, basis)| (*basis, all_fringe[b * per_basis..(b + 1) * per_basis].to_vec()))
        .collect();
    let fringe_fits = fringe_records
        .iter()
        .map(|(b, r)| Ok((*b, fit_fringe(&FringeScan::from_records(*b, r, tau)?)?)))
        .collect::<Result<Vec<_>>>()?;

    let dataset = Dataset {
        window_tau: tau,
        fringe_scans: fringe_records.clone(),
        chsh: Some((chsh_settings, chsh_records.clone())),
        tomography: scenario.tomography.then(|| tomography_records.clone()),
        target: scenario.target,
    };
    let summary = bootstrap(&dataset, scenario.n_resamples, derive_seed(scenario.seed, STREAM_BOOTSTRAP))?;
    let report = build_report(scenario, &rho, &chsh_settings, &summary, timestamp)?;

    Ok(RunOutput {
        true_state: rho,
        tomography_records,
        chsh_settings,
        chsh_records,
        fringe_records,
        fringe_fits,
        summary,
        report,
    })
}

fn build_report(
    scenario: &Scenario,
    rho: &DensityMatrix,
    settings: &ChshSettings,
    summary: &BootstrapSummary,
    timestamp: &str,
) -> Result<Report> {
    let vis = |f: &dyn Fn(SignalBasis) -> f64| BasisValues {
        h: f(SignalBasis::H),
        v: f(SignalBasis::V),
        a: f(SignalBasis::A),
        d: f(SignalBasis::D),
    };
    let point = |b| summary.visibility(b).map_or(f64::NAN, |s| s.point);
    let spread = |b| summary.visibility(b).map_or(f64::NAN, |s| s.std);
    let pi = std::f64::consts::PI;
    let s = summary.s.ok_or_else(|| CliError::Core(sagnac_core::Error::InvalidArgument("no CHSH data".into())))?;
    Ok(Report {
        scenario: scenario.name.clone(),
        visibilities: vis(&point),
        visibility_std: vis(&spread),
        s: s.point,
        s_std: s.std,
        concurrence: summary.concurrence.map(|c| c.point),
        concurrence_std: summary.concurrence.map(|c| c.std),
        phase_over_pi: summary.phase.map(|p| p.point / pi),
        phase_over_pi_std: summary.phase.map(|p| p.std / pi),
        fidelity: summary.fidelity.map(|f| f.point),
        fidelity_std: summary.fidelity.map(|f| f.std),
        target_phase_over_pi: scenario.target.phi() / pi,
        settings: SettingsReport::new(settings, scenario.chsh == ChshPlan::Optimize),
        model: ModelReport {
            concurrence: concurrence(rho)?,
            phase_over_pi: infer_phase(rho).ok().map(|p| p / pi),
            fidelity: fidelity_to_pure(rho, scenario.target)?,
            s: chsh_predict(rho, settings)?,
        },
        provenance: Provenance {
            seed: scenario.seed,
            n_resamples: scenario.n_resamples,
            bootstrap_failed: summary.failed,
            config_hash: scenario.config_hash.clone(),
            timestamp: timestamp.to_string(),
        },
    })
}

#[derive(Serialize)]
struct FitRow {
    basis: SignalBasis,
    theta_i_deg: f64,
    rate_per_s: f64,
}

fn write_csv_file(path: &Path, records: &[CountRecord]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_records_csv(f, records)?;
    Ok(())
}

/// Writes `report.json`, the count CSVs, fitted fringe curves at 1°
/// resolution and (with tomography) the reconstructed density matrix.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&out.report).map_err(sagnac_core::Error::from)?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|e| CliError::io(&report_path, e))?;
    written.push(report_path);

    let fringe: Vec<CountRecord> = out.fringe_records.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    for (name, records) in [
        ("fringe_counts.csv", fringe.as_slice()),
        ("chsh_counts.csv", out.chsh_records.as_slice()),
        ("tomography_counts.csv", out.tomography_records.as_slice()),
    ] {
        if records.is_empty() {
            continue;
        }
        let path = dir.join(name);
        write_csv_file(&path, records)?;
        written.push(path);
    }

    let fits_path = dir.join("fringe_fits.csv");
    let f = fs::File::create(&fits_path).map_err(|e| CliError::io(&fits_path, e))?;
    let mut w = csv::Writer::from_writer(f);
    for (basis, fit) in &out.fringe_fits {
        for deg in 0..=180 {
            let theta = f64::from(deg).to_radians();
            w.serialize(FitRow { basis: *basis, theta_i_deg: f64::from(deg), rate_per_s: fit.evaluate(theta) })
                .map_err(sagnac_core::Error::from)?;
        }
    }
    w.flush().map_err(|e| CliError::io(&fits_path, e))?;
    written.push(fits_path);

    if let Some(state) = &out.summary.point.state {
        let path = dir.join("density_matrix.json");
        let mut text = serde_json::to_string_pretty(state).map_err(sagnac_core::Error::from)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_grid_covers_half_turn() {
        assert_eq!(fringe_angles(10.0).len(), 18);
        assert_eq!(fringe_angles(22.5), vec![0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5]);
        assert_eq!(fringe_angles(30.0).len(), 6);
    }
}
