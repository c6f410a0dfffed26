//! Side-by-side tables of published numbers against this model.
//!
//! Scoring rules, per row:
//! - `3σ`: |computed − published| ≤ 3·√(σ_published² + σ_computed²), where
//!   σ_computed is the bootstrap spread of one simulated run.
//! - `±tol`: |computed − published| ≤ tol.
//! - `> x`: computed exceeds x.
//! - `round`: computed rounded to the published precision equals it.
//! - `info`: shown, not scored.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use sagnac_core::analysis::fringe::SignalBasis;
use sagnac_core::counting::accidental_rate;
use sagnac_core::qstate::{concurrence, mix, x_state, XStateSpec};
use sagnac_core::source::{fiber_mode_count, FiberSpec};
use serde::Serialize;

use crate::bundled;
use crate::error::{CliError, Result};
use crate::pipeline::{run, RunOutput};
use crate::report::Report;
use crate::scenario::{PumpConfig, PumpKind, Scenario, ScenarioFile};

/// SPDC spatial modes estimated for the LED pump; an input, not derived.
pub const SPDC_MODES_ESTIMATE: f64 = 1500.0;
/// Collection fibre.
pub const COLLECTION_FIBER: FiberSpec = FiberSpec { core_diameter_um: 200.0, numerical_aperture: 0.39, wavelength_nm: 810.0 };
/// Pump delivery fibre.
pub const PUMP_FIBER: FiberSpec = FiberSpec { core_diameter_um: 50.0, numerical_aperture: 0.22, wavelength_nm: 405.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Fig2,
    Fig3,
    Fig4,
    Modes,
    Accidentals,
    All,
}

impl FromStr for Target {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            "modes" => Ok(Self::Modes),
            "accidentals" => Ok(Self::Accidentals),
            "all" => Ok(Self::All),
            other => Err(CliError::config(
                "target",
                format!("unknown target `{other}` (fig2, fig3, fig4, modes, accidentals, all)"),
            )),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Modes => "modes",
            Self::Accidentals => "accidentals",
            Self::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub target: String,
    pub quantity: String,
    pub published: String,
    pub computed: String,
    pub rule: String,
    pub status: Status,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.status == Status::Fail).collect()
    }

    pub fn render(&self) -> String {
        let header = ["target", "quantity", "published", "computed", "rule", "status"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [r.target.clone(), r.quantity.clone(), r.published.clone(), r.computed.clone(), r.rule.clone(), r.status.to_string()]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in row.iter().zip(widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                s.push_str(c);
                if i + 1 < row.len() {
                    s.extend(std::iter::repeat_n(' ', w - c.chars().count()));
                }
            }
            s.push('\n');
            s
        };
        let mut out = line(&header.map(String::from));
        out.push_str(&line(&widths.map(|w| "-".repeat(w))));
        for row in &cells {
            out.push_str(&line(row));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = csv::Writer::from_writer(f);
        for row in &self.rows {
            w.serialize(row).map_err(sagnac_core::Error::from)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    /// `Err(Mismatch)` naming every failed row.
    pub fn check(&self) -> Result<()> {
        let failed: Vec<String> = self.failures().iter().map(|r| format!("{} {}", r.target, r.quantity)).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Mismatch(failed))
        }
    }
}

/// A published value with its quoted uncertainty.
#[derive(Debug, Clone, Copy)]
struct Quoted {
    value: f64,
    sigma: f64,
}

const fn q(value: f64, sigma: f64) -> Quoted {
    Quoted { value, sigma }
}

fn z_row(target: &str, quantity: String, published: Quoted, value: f64, std: f64, digits: usize) -> Row {
    let bound = 3.0 * published.sigma.hypot(std);
    let ok = (value - published.value).abs() <= bound;
    Row {
        target: target.into(),
        quantity,
        published: format!("{:.*} ± {:.*}", digits, published.value, digits, published.sigma),
        computed: format!("{:.*} ± {:.*}", digits, value, digits, std),
        rule: format!("3σ ({bound:.*})", digits),
        status: if ok { Status::Pass } else { Status::Fail },
    }
}

fn tol_row(target: &str, quantity: &str, published: Quoted, value: f64, tol: f64) -> Row {
    Row {
        target: target.into(),
        quantity: quantity.into(),
        published: format!("{:.4} ± {:.4}", published.value, published.sigma),
        computed: format!("{value:.4}"),
        rule: format!("±{tol}"),
        status: if (value - published.value).abs() <= tol { Status::Pass } else { Status::Fail },
    }
}

/// Rounds to `digits` significant figures.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

fn missing(what: &str) -> CliError {
    CliError::Core(sagnac_core::Error::InvalidArgument(format!("run produced no {what}")))
}

struct Runs {
    led: Option<RunOutput>,
    laser: Option<RunOutput>,
}

impl Runs {
    fn bundled(name: &str) -> Result<RunOutput> {
        let text = bundled::lookup(name).expect("bundled scenario");
        run(&Scenario::from_text(text, None, name)?, "")
    }

    fn led(&mut self) -> Result<&Report> {
        if self.led.is_none() {
            self.led = Some(Self::bundled("led")?);
        }
        Ok(&self.led.as_ref().expect("just set").report)
    }

    fn laser(&mut self) -> Result<&Report> {
        if self.laser.is_none() {
            self.laser = Some(Self::bundled("laser")?);
        }
        Ok(&self.laser.as_ref().expect("just set").report)
    }
}

fn fig2(runs: &mut Runs) -> Result<Vec<Row>> {
    let published = [
        ("led", [q(0.9807, 0.0070), q(0.9585, 0.0078), q(0.8145, 0.0188), q(0.8131, 0.0289)], q(2.532, 0.069)),
        ("laser", [q(0.9769, 0.0007), q(0.9462, 0.0010), q(0.9508, 0.0007), q(0.9340, 0.0009)], q(2.695, 0.006)),
    ];
    let mut rows = Vec::new();
    for (source, vis, s) in published {
        let r = if source == "led" { runs.led()? } else { runs.laser()? };
        let computed = [
            (SignalBasis::H, r.visibilities.h, r.visibility_std.h),
            (SignalBasis::V, r.visibilities.v, r.visibility_std.v),
            (SignalBasis::A, r.visibilities.a, r.visibility_std.a),
            (SignalBasis::D, r.visibilities.d, r.visibility_std.d),
        ];
        for (published, (basis, v, std)) in vis.into_iter().zip(computed) {
            rows.push(z_row("fig2", format!("{source} visibility {basis}"), published, v, std, 4));
        }
        rows.push(z_row("fig2", format!("{source} S"), s, r.s, r.s_std, 3));
    }
    Ok(rows)
}

fn fig3(runs: &mut Runs) -> Result<Vec<Row>> {
    let published = [
        ("led", q(0.834, 0.038), q(-0.941, 0.024), q(0.8988, 0.0051)),
        ("laser", q(0.952, 0.002), q(-0.943, 0.001), q(0.9636, 0.0004)),
    ];
    let mut rows = Vec::new();
    for (source, c, phi, f) in published {
        let r = if source == "led" { runs.led()? } else { runs.laser()? };
        let get = |v: Option<f64>, s: Option<f64>, what| v.zip(s).ok_or_else(|| missing(what));
        let (cv, cs) = get(r.concurrence, r.concurrence_std, "concurrence")?;
        let (pv, ps) = get(r.phase_over_pi, r.phase_over_pi_std, "phase")?;
        let (fv, fs) = get(r.fidelity, r.fidelity_std, "fidelity")?;
        rows.push(z_row("fig3", format!("{source} concurrence"), c, cv, cs, 4));
        rows.push(z_row("fig3", format!("{source} phase/π"), phi, pv, ps, 4));
        rows.push(z_row("fig3", format!("{source} fidelity"), f, fv, fs, 4));
    }
    Ok(rows)
}

fn single_path(center_mm: f64) -> Result<RunOutput> {
    let mut file = ScenarioFile::parse(bundled::FIG4_PATHS)?;
    file.name = Some(format!("fig4_path_{center_mm:+}"));
    file.pump = PumpConfig {
        kind: PumpKind::Laser,
        diameter_mm: Some(0.1),
        n_samples: None,
        center_mm: Some(center_mm),
        centers_mm: None,
    };
    let scenario = Scenario::from_file(file, None, "fig4_path")?;
    run(&scenario, "")
}

/// Closed-form concurrence of the equal two-path mixture.
pub fn fig4_mixture_concurrence() -> Result<f64> {
    let a = x_state(XStateSpec::new(0.933, 0.5558 * PI)?);
    let b = x_state(XStateSpec::new(0.916, 0.3220 * PI)?);
    Ok(concurrence(&mix(&[(0.5, a), (0.5, b)])?)?)
}

fn fig4() -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (center, c, phi) in [(-0.5, q(0.933, 0.001), q(0.5558, 0.0002)), (0.5, q(0.916, 0.001), q(0.3220, 0.0001))] {
        let r = single_path(center)?.report;
        let cv = r.concurrence.zip(r.concurrence_std).ok_or_else(|| missing("concurrence"))?;
        let pv = r.phase_over_pi.zip(r.phase_over_pi_std).ok_or_else(|| missing("phase"))?;
        rows.push(z_row("fig4", format!("path {center:+} mm concurrence"), c, cv.0, cv.1, 4));
        rows.push(z_row("fig4", format!("path {center:+} mm phase/π"), phi, pv.0, pv.1, 4));
    }
    let mixture = q(0.8558, 0.0003);
    rows.push(tol_row("fig4", "mixture concurrence (model)", mixture, fig4_mixture_concurrence()?, 0.02));
    let r = Runs::bundled("fig4_paths")?.report;
    let c = r.concurrence.ok_or_else(|| missing("concurrence"))?;
    rows.push(tol_row("fig4", "mixture concurrence (simulated)", mixture, c, 0.02));
    Ok(rows)
}

fn modes() -> Result<Vec<Row>> {
    let n = fiber_mode_count(&COLLECTION_FIBER)?;
    let pump = fiber_mode_count(&PUMP_FIBER)?;
    Ok(vec![
        Row {
            target: "modes".into(),
            quantity: "collection fibre 200 µm / 0.39 at 810 nm".into(),
            published: "> 45,000".into(),
            computed: format!("{n:.0}"),
            rule: "> 45000".into(),
            status: if n > 45_000.0 { Status::Pass } else { Status::Fail },
        },
        Row {
            target: "modes".into(),
            quantity: "collection fibre vs SPDC modes".into(),
            published: format!("≫ {SPDC_MODES_ESTIMATE:.0}"),
            computed: format!("{:.1}×", n / SPDC_MODES_ESTIMATE),
            rule: format!("> {SPDC_MODES_ESTIMATE:.0}"),
            status: if n > SPDC_MODES_ESTIMATE { Status::Pass } else { Status::Fail },
        },
        Row {
            target: "modes".into(),
            quantity: "pump fibre 50 µm / 0.22 at 405 nm".into(),
            published: "-".into(),
            computed: format!("{pump:.0}"),
            rule: "info".into(),
            status: Status::Info,
        },
    ])
}

fn accidentals() -> Result<Vec<Row>> {
    let laser = accidental_rate(155_000.0, 155_000.0, 1e-9)?;
    let led_per_min = accidental_rate(220.0, 220.0, 1e-9)? * 60.0;
    let row = |quantity: &str, published: f64, published_text: &str, value: f64, unit: &str| {
        let rounded = round_sig(value, 1);
        Row {
            target: "accidentals".into(),
            quantity: quantity.into(),
            published: format!("{published_text} {unit}"),
            computed: format!("{value:.4} ≈ {} → {rounded} {unit}", round_sig(value, 2)),
            rule: "round to 1 s.f.".into(),
            status: if (rounded - published).abs() <= 1e-12 * published.abs() { Status::Pass } else { Status::Fail },
        }
    };
    Ok(vec![
        row("laser 2·Sₛ·Sᵢ·τ, S = 155000 s⁻¹", 50.0, "~50", laser, "s⁻¹"),
        row("led 2·Sₛ·Sᵢ·τ, S = 220 s⁻¹", 0.006, "~0.006", led_per_min, "min⁻¹"),
    ])
}

/// Builds the table for `target`. Nothing is written.
pub fn reproduce(target: Target) -> Result<Table> {
    let mut runs = Runs { led: None, laser: None };
    let mut rows = Vec::new();
    let all = target == Target::All;
    if all || target == Target::Fig2 {
        rows.extend(fig2(&mut runs)?);
    }
    if all || target == Target::Fig3 {
        rows.extend(fig3(&mut runs)?);
    }
    if all || target == Target::Fig4 {
        rows.extend(fig4()?);
    }
    if all || target == Target::Modes {
        rows.extend(modes()?);
    }
    if all || target == Target::Accidentals {
        rows.extend(accidentals()?);
    }
    Ok(Table { rows })
}

/// Writes `reproduce_<target>.csv` into `dir` and returns the path.
pub fn write_table(table: &Table, target: Target, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(format!("reproduce_{target}.csv"));
    table.write_csv(&path)?;
    Ok(path)
}

/// Prints the aligned table to `out`.
pub fn print_table(table: &Table, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(table.render().as_bytes())
}
