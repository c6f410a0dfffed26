//! Polarization analyzers: linear projectors, ideal waveplates and the
//! 16-setting tomography table.
//!
//! Angles are radians from horizontal. Circular states follow
//! `|R⟩ = (|H⟩ − i|V⟩)/√2` and `|L⟩ = (|H⟩ + i|V⟩)/√2`.
//!
//! An analyzer is a quarter-wave plate, then a half-wave plate, then a
//! polarizing beam splitter whose transmitted port is H. It therefore
//! projects onto `U†|H⟩` with `U = HWP(h)·QWP(q)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{SMatrix, Vector2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::linalg::{self, Mat2, Mat4, I, ONE, ZERO};
use crate::qstate::DensityMatrix;
use crate::{Error, Result};

/// Linear analyzer angle, normalised to `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AnalyzerSetting(f64);

impl AnalyzerSetting {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidArgument(format!("analyzer angle must be finite, got {theta}")));
        }
        let mut t = theta.rem_euclid(PI);
        // rem_euclid can round up to exactly π
        if t >= PI {
            t = 0.0;
        }
        Ok(Self(t))
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

/// Rank-one single-photon projector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitProjector(Mat2);

impl SingleQubitProjector {
    pub fn from_ket(ket: Vector2<C64>) -> Self {
        let v = ket / C64::new(ket.norm(), 0.0);
        Self(v * v.adjoint())
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    /// Projector seen through a preceding element `u`: `u†·P·u`.
    pub fn behind(&self, u: &Mat2) -> Self {
        Self(u.adjoint() * self.0 * u)
    }
}

/// Product projector, signal ⊗ idler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitProjector(Mat4);

impl TwoQubitProjector {
    pub fn new(signal: &SingleQubitProjector, idler: &SingleQubitProjector) -> Self {
        Self(linalg::kron(&signal.0, &idler.0))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }
}

/// Projector onto `cosθ|H⟩ + sinθ|V⟩`.
pub fn linear_projector(theta: AnalyzerSetting) -> SingleQubitProjector {
    let (s, c) = theta.0.sin_cos();
    SingleQubitProjector::from_ket(Vector2::new(C64::new(c, 0.0), C64::new(s, 0.0)))
}

/// `θ + 90°`, wrapped back to `[0, π)`.
pub fn perpendicular(theta: AnalyzerSetting) -> AnalyzerSetting {
    AnalyzerSetting::new(theta.0 + FRAC_PI_2).expect("finite angle stays finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveplateKind {
    Half,
    Quarter,
}

/// Ideal waveplate with its fast axis at `axis_angle`:
/// `R(θ)·diag(1, e^{iΓ})·R(−θ)` with retardance Γ = π or π/2.
pub fn waveplate_operator(kind: WaveplateKind, axis_angle: f64) -> Mat2 {
    let retard = match kind {
        WaveplateKind::Half => C64::from_polar(1.0, PI),
        WaveplateKind::Quarter => I,
    };
    let (s, c) = axis_angle.sin_cos();
    let rot = Mat2::new(C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0));
    let diag = Mat2::new(ONE, ZERO, ZERO, retard);
    rot * diag * rot.transpose()
}

/// Phase plate `diag(1, e^{iχ})` acting on a single photon.
pub fn phase_retarder(chi: f64) -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, C64::from_polar(1.0, chi))
}

/// Projector transmitted by QWP(`qwp`) → HWP(`hwp`) → H-polarizer.
pub fn projector_from_waveplates(qwp: f64, hwp: f64) -> SingleQubitProjector {
    let u = waveplate_operator(WaveplateKind::Half, hwp) * waveplate_operator(WaveplateKind::Quarter, qwp);
    let h = SingleQubitProjector(Mat2::new(ONE, ZERO, ZERO, ZERO));
    h.behind(&u)
}

/// Single-photon tomography label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PolarizationLabel {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolarizationLabel {
    pub const ALL: [PolarizationLabel; 6] = [Self::H, Self::V, Self::D, Self::A, Self::R, Self::L];

    pub fn ket(self) -> Vector2<C64> {
        let r = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Self::H => Vector2::new(ONE, ZERO),
            Self::V => Vector2::new(ZERO, ONE),
            Self::D => Vector2::new(r, r),
            Self::A => Vector2::new(-r, r),
            Self::R => Vector2::new(r, -I * r),
            Self::L => Vector2::new(r, I * r),
        }
    }

    pub fn projector(self) -> SingleQubitProjector {
        SingleQubitProjector::from_ket(self.ket())
    }

    /// `(qwp, hwp)` fast-axis angles in degrees realising this projection.
    pub fn waveplates_deg(self) -> (f64, f64) {
        match self {
            Self::H => (0.0, 0.0),
            Self::V => (0.0, 45.0),
            Self::D => (45.0, 22.5),
            Self::A => (135.0, 67.5),
            Self::R => (45.0, 45.0),
            Self::L => (45.0, 0.0),
        }
    }

    /// Linear-polarizer angle in degrees, if the label is linear.
    pub fn linear_angle_deg(self) -> Option<f64> {
        match self {
            Self::H => Some(0.0),
            Self::V => Some(90.0),
            Self::D => Some(45.0),
            Self::A => Some(135.0),
            Self::R | Self::L => None,
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'H' => Self::H,
            'V' => Self::V,
            'D' => Self::D,
            'A' => Self::A,
            'R' => Self::R,
            'L' => Self::L,
            _ => return None,
        })
    }
}

impl fmt::Display for PolarizationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TomographySetting {
    pub signal: PolarizationLabel,
    pub idler: PolarizationLabel,
}

impl TomographySetting {
    pub fn label(&self) -> String {
        format!("{}{}", self.signal, self.idler)
    }

    pub fn parse(label: &str) -> Option<Self> {
        let mut chars = label.trim().chars();
        let signal = PolarizationLabel::from_char(chars.next()?)?;
        let idler = PolarizationLabel::from_char(chars.next()?)?;
        if chars.next().is_some() {
            return None;
        }
        Some(Self { signal, idler })
    }

    pub fn projector(&self) -> TwoQubitProjector {
        TwoQubitProjector::new(&self.signal.projector(), &self.idler.projector())
    }

    pub fn waveplates_deg(&self) -> [f64; 4] {
        let (qs, hs) = self.signal.waveplates_deg();
        let (qi, hi) = self.idler.waveplates_deg();
        [qs, hs, qi, hi]
    }
}

/// Setting order used throughout the crate. This is the classic
/// informationally complete two-qubit sequence; it is not claimed to be the
/// order any particular experiment used.
pub const TOMOGRAPHY_LABELS: [&str; 16] = [
    "HH", "HV", "VV", "VH", "RV", "RH", "DH", "DV", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
];

/// The 16 tomography settings with their projectors, in
/// [`TOMOGRAPHY_LABELS`] order.
pub fn tomography_settings() -> Vec<(TomographySetting, TwoQubitProjector)> {
    TOMOGRAPHY_LABELS
        .iter()
        .map(|l| {
            let s = TomographySetting::parse(l).expect("static label");
            (s, s.projector())
        })
        .collect()
}

/// Gram matrix `Gₖₗ = tr(Pₖ Pₗ)` of the tomography projectors.
pub fn tomography_gram() -> SMatrix<f64, 16, 16> {
    let settings = tomography_settings();
    SMatrix::from_fn(|k, l| linalg::trace_product(settings[k].1.matrix(), settings[l].1.matrix()).re)
}

/// Matrix `Bₖⱼ = tr(Pₖ Γⱼ)` with `Γ_{4a+b} = σₐ ⊗ σ_b`, and its inverse.
/// `None` when the setting table is not informationally complete.
pub(crate) fn pauli_measurement_matrix() -> Option<&'static (SMatrix<f64, 16, 16>, SMatrix<f64, 16, 16>)> {
    static CELL: OnceLock<Option<(SMatrix<f64, 16, 16>, SMatrix<f64, 16, 16>)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let settings = tomography_settings();
        let basis: Vec<Mat4> = (0..16).map(|j| linalg::kron(&linalg::pauli(j / 4), &linalg::pauli(j % 4))).collect();
        let b = SMatrix::<f64, 16, 16>::from_fn(|k, j| linalg::trace_product(settings[k].1.matrix(), &basis[j]).re);
        let inv = b.try_inverse()?;
        Some((b, inv))
    })
    .as_ref()
}

/// Writes the setting table as
/// `label_s,label_i,qwp_s_deg,hwp_s_deg,qwp_i_deg,hwp_i_deg`.
pub fn write_tomography_table<W: Write>(out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        label_s: PolarizationLabel,
        label_i: PolarizationLabel,
        qwp_s_deg: f64,
        hwp_s_deg: f64,
        qwp_i_deg: f64,
        hwp_i_deg: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for (s, _) in tomography_settings() {
        let [qwp_s_deg, hwp_s_deg, qwp_i_deg, hwp_i_deg] = s.waveplates_deg();
        w.serialize(Row { label_s: s.signal, label_i: s.idler, qwp_s_deg, hwp_s_deg, qwp_i_deg, hwp_i_deg })?;
    }
    w.flush()?;
    Ok(())
}

/// `tr(ρ·P)` without any physicality check.
pub(crate) fn expectation(rho: &Mat4, proj: &Mat4) -> f64 {
    linalg::trace_product(rho, proj).re
}

/// Born-rule probability `tr(ρ·P)`, clamped to `[0, 1]`.
pub fn born_probability(rho: &DensityMatrix, proj: &TwoQubitProjector) -> Result<f64> {
    rho.ensure_physical()?;
    Ok(expectation(rho.matrix(), &proj.0).clamp(0.0, 1.0))
}
