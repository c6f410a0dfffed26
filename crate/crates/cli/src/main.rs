use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{ArgGroup, Parser, Subcommand};
use sagnac_cli::error::{CliError, Result};
use sagnac_cli::pipeline::{run, write_outputs};
use sagnac_cli::report::SettingsReport;
use sagnac_cli::reproduce::{print_table, reproduce, write_table, Target};
use sagnac_cli::scenario::Scenario;
use sagnac_cli::bundled;
use sagnac_core::analysis::chsh::{chsh_optimize, chsh_predict, chsh_s_from_records, ChshSettings, CorrelatorTerm};
use sagnac_core::analysis::tomography::{tomography_mle, TomographyData};
use sagnac_core::counting::{read_records_csv, CountRecord};
use sagnac_core::qstate::{concurrence, fidelity_to_pure, infer_phase, validate_physical, BellPhaseSpec, DensityMatrix};
use sagnac_core::source::{fiber_mode_count, fiber_v_number, FiberSpec};
use serde_json::json;

const OUT_DIR_ENV: &str = "SAGNAC_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "sagnac_out";

#[derive(Parser)]
#[command(name = "sagnac", version, about = "Simulate and analyse polarization-entangled photon pair experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario end to end and write the report and count files.
    RunScenario {
        /// Scenario file, or the name of a bundled one (led, laser, fig4_paths).
        path: PathBuf,
        /// Output directory [default: $SAGNAC_OUT_DIR, else ./sagnac_out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare published numbers with this model: fig2, fig3, fig4, modes, accidentals or all.
    Reproduce {
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Step-index fibre mode count V²/2.
    ModeCount {
        #[arg(long)]
        diameter_um: f64,
        #[arg(long)]
        na: f64,
        #[arg(long)]
        wavelength_nm: f64,
    },
    /// Maximum-likelihood reconstruction from 16 tomography settings.
    Tomography {
        counts: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tau_ns: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        target_phi_over_pi: f64,
    },
    /// CHSH S from measured counts, or optimal settings from tomography counts.
    #[command(group(ArgGroup::new("choice").args(["optimize", "angles", "quoted_literal", "quoted_relabeled"])))]
    Chsh {
        counts: PathBuf,
        /// Treat `counts` as tomography data and choose settings from the MLE state.
        #[arg(long)]
        optimize: bool,
        /// θs,θs′,θi,θi′ in degrees.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        angles: Option<Vec<f64>>,
        #[arg(long)]
        quoted_literal: bool,
        #[arg(long)]
        quoted_relabeled: bool,
        /// Correlator carrying the minus sign: ab, ab', a'b or a'b'.
        #[arg(long, default_value = "ab'")]
        minus: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        idler_phase_deg: f64,
        #[arg(long, default_value_t = 1.0)]
        tau_ns: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// RFC 3339, from `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0))
        .unwrap_or_else(Utc::now);
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    if !path.exists() {
        if let Some(text) = path.to_str().and_then(bundled::lookup) {
            let name = path.to_str().unwrap_or_default().trim_end_matches(".scenario");
            return Scenario::from_text(text, None, name);
        }
    }
    Scenario::from_path(path)
}

fn read_counts(path: &Path) -> Result<Vec<CountRecord>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(read_records_csv(f)?)
}

fn tau_seconds(tau_ns: f64) -> Result<f64> {
    if tau_ns.is_finite() && tau_ns > 0.0 {
        Ok(tau_ns * 1e-9)
    } else {
        Err(CliError::config("--tau-ns", format!("must be positive, got {tau_ns}")))
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(sagnac_core::Error::from)?);
    Ok(())
}

fn state_summary(rho: &DensityMatrix, target: BellPhaseSpec) -> Result<serde_json::Value> {
    Ok(json!({
        "concurrence": concurrence(rho)?,
        "phase_over_pi": infer_phase(rho).ok().map(|p| p / PI),
        "fidelity": fidelity_to_pure(rho, target)?,
        "target_phase_over_pi": target.phi() / PI,
        "physical": validate_physical(rho).passed,
        "density_matrix": rho,
    }))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::RunScenario { path, out } => {
            let scenario = load_scenario(&path)?;
            let output = run(&scenario, &timestamp())?;
            let dir = out_dir(out);
            for file in write_outputs(&output, &dir)? {
                println!("{}", file.display());
            }
            let r = &output.report;
            let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            eprintln!(
                "{}: S = {:.3} ± {:.3}, C = {} ± {}, F = {}",
                r.scenario,
                r.s,
                r.s_std,
                show(r.concurrence),
                show(r.concurrence_std),
                show(r.fidelity)
            );
            Ok(())
        }
        Command::Reproduce { target, out } => {
            let target: Target = target.parse()?;
            let table = reproduce(target)?;
            print_table(&table, std::io::stdout()).map_err(|e| CliError::io("<stdout>", e))?;
            let path = write_table(&table, target, &out_dir(out))?;
            eprintln!("wrote {}", path.display());
            table.check()
        }
        Command::ModeCount { diameter_um, na, wavelength_nm } => {
            let fiber = FiberSpec { core_diameter_um: diameter_um, numerical_aperture: na, wavelength_nm };
            let v = fiber_v_number(&fiber).map_err(|e| CliError::config("fiber", e.to_string()))?;
            let n = fiber_mode_count(&fiber)?;
            println!("V = {v:.2}");
            println!("modes = {n:.0}");
            Ok(())
        }
        Command::Tomography { counts, tau_ns, target_phi_over_pi } => {
            let data = TomographyData::from_records(&read_counts(&counts)?, tau_seconds(tau_ns)?)?;
            let target = BellPhaseSpec::new(target_phi_over_pi * PI)
                .map_err(|e| CliError::config("--target-phi-over-pi", e.to_string()))?;
            let rho = tomography_mle(&data)?;
            print_json(&state_summary(&rho, target)?)
        }
        Command::Chsh { counts, optimize, angles, quoted_literal, quoted_relabeled, minus, idler_phase_deg, tau_ns } => {
            let records = read_counts(&counts)?;
            let tau = tau_seconds(tau_ns)?;
            if optimize {
                let rho = tomography_mle(&TomographyData::from_records(&records, tau)?)?;
                let (settings, s) = chsh_optimize(&rho)?;
                return print_json(&json!({
                    "S_predicted": s,
                    "settings": SettingsReport::new(&settings, true),
                }));
            }
            let settings = if quoted_literal {
                ChshSettings::quoted_literal()
            } else if quoted_relabeled {
                ChshSettings::quoted_relabeled()
            } else if let Some(a) = angles {
                if a.len() != 4 {
                    return Err(CliError::config("--angles", format!("need four angles, got {}", a.len())));
                }
                let minus = CorrelatorTerm::parse(&minus)
                    .ok_or_else(|| CliError::config("--minus", format!("unknown term `{minus}` (ab, ab', a'b, a'b')")))?;
                ChshSettings::from_degrees(a[0], a[1], a[2], a[3], minus)
                    .map_err(|e| CliError::config("--angles", e.to_string()))?
                    .with_idler_phase(idler_phase_deg.to_radians())
            } else {
                ChshSettings::canonical()
            };
            let s = chsh_s_from_records(&settings, &records, tau)?;
            let mut value = json!({ "S": s, "settings": SettingsReport::new(&settings, false) });
            if let Ok(rho) = TomographyData::from_records(&records, tau).and_then(|d| tomography_mle(&d)) {
                value["S_predicted_from_tomography"] = json!(chsh_predict(&rho, &settings)?);
            }
            print_json(&value)
        }
    }
}
