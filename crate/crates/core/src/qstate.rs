//! Two-photon polarization states.
//!
//! Every matrix in this crate uses the basis order `(HH, HV, VH, VV)`, the
//! first letter being the signal photon. The two-photon phase φ is the
//! relative phase of `|VH⟩` against `|HV⟩` and always lives on the branch
//! `(−π, π]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Vector4;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Mat4, ONE};
use crate::{Error, Result};

pub const BASIS_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

/// Tolerances used by [`validate_physical`].
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const MIN_EIGENVALUE_TOL: f64 = -1e-9;

/// Looser limits applied before computing figures of merit on an input
/// state. Reconstructed states carry rounding well above machine epsilon.
const OPERATIONAL_HERMITICITY_TOL: f64 = 1e-9;
const OPERATIONAL_TRACE_TOL: f64 = 1e-9;
const OPERATIONAL_MIN_EIGENVALUE: f64 = -1e-6;

/// Maps an angle onto `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellPhaseSpec {
    phi: f64,
}

impl BellPhaseSpec {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("phase must be finite, got {phi}")));
        }
        Ok(Self { phi: wrap_phase(phi) })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// State vector `(|HV⟩ + e^{iφ}|VH⟩)/√2`.
    pub fn ket(&self) -> Vector4<C64> {
        let mut v = Vector4::zeros();
        v[HV] = C64::new(FRAC_1_SQRT_2, 0.0);
        v[VH] = C64::from_polar(FRAC_1_SQRT_2, self.phi);
        v
    }
}

/// Phase-damped Bell-phase state: diagonal `(0, ½, ½, 0)` with the
/// `HV/VH` coherence shrunk to `C/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XStateSpec {
    concurrence: f64,
    phi: f64,
}

impl XStateSpec {
    pub fn new(concurrence: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&concurrence) {
            return Err(Error::InvalidArgument(format!(
                "concurrence target must lie in [0, 1], got {concurrence}"
            )));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("phase must be finite, got {phi}")));
        }
        Ok(Self { concurrence, phi: wrap_phase(phi) })
    }

    pub fn concurrence(&self) -> f64 {
        self.concurrence
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// A 4×4 two-photon polarization operator.
///
/// Values built by the constructors in this module are physical. A value
/// obtained from [`DensityMatrix::from_matrix`] may not be (linear-inversion
/// tomography returns such states); use [`validate_physical`] to check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixJson", into = "DensityMatrixJson")]
pub struct DensityMatrix {
    m: Mat4,
}

impl DensityMatrix {
    /// Wraps `m` after checking all three physicality conditions.
    pub fn new(m: Mat4) -> Result<Self> {
        let rho = Self { m };
        let report = validate_physical(&rho);
        if !report.passed {
            return Err(Error::InvalidState(report.to_string()));
        }
        Ok(rho)
    }

    /// Wraps `m` without any check.
    pub fn from_matrix(m: Mat4) -> Self {
        Self { m }
    }

    pub fn from_pure(ket: &Vector4<C64>) -> Result<Self> {
        let norm = ket.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidArgument("state vector must be nonzero".into()));
        }
        let v = ket / C64::new(norm, 0.0);
        Ok(Self { m: v * v.adjoint() })
    }

    pub fn maximally_mixed() -> Self {
        Self { m: Mat4::identity() * C64::new(0.25, 0.0) }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        linalg::hermitian_eigenvalues(&self.m)
    }

    /// Returns an error unless the state is physical within the looser
    /// operational tolerances.
    pub fn ensure_physical(&self) -> Result<()> {
        let herm = linalg::hermiticity_defect(&self.m);
        let trace = (linalg::trace4(&self.m) - ONE).norm();
        let min_eig = self.eigenvalues()[0];
        if herm > OPERATIONAL_HERMITICITY_TOL
            || trace > OPERATIONAL_TRACE_TOL
            || !(min_eig >= OPERATIONAL_MIN_EIGENVALUE)
        {
            return Err(Error::InvalidState(format!(
                "hermiticity defect {herm:e}, trace defect {trace:e}, minimum eigenvalue {min_eig:e}"
            )));
        }
        Ok(())
    }

    /// Nearest physical state in the eigenvalue-clamping sense: negative
    /// eigenvalues are set to zero and the trace renormalised.
    pub fn clamp_to_physical(&self) -> Result<Self> {
        let clamped = linalg::hermitian_map(&self.m, |v| v.max(0.0));
        let tr = linalg::trace4(&clamped).re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState("no positive eigenvalue to keep".into()));
        }
        Ok(Self { m: clamped / C64::new(tr, 0.0) })
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    basis: Vec<String>,
    elements: Vec<Vec<[f64; 2]>>,
}

impl From<DensityMatrix> for DensityMatrixJson {
    fn from(rho: DensityMatrix) -> Self {
        Self {
            basis: BASIS_LABELS.iter().map(|s| s.to_string()).collect(),
            elements: (0..4)
                .map(|r| (0..4).map(|c| [rho.m[(r, c)].re, rho.m[(r, c)].im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<DensityMatrixJson> for DensityMatrix {
    type Error = String;

    fn try_from(json: DensityMatrixJson) -> std::result::Result<Self, String> {
        if json.basis != BASIS_LABELS {
            return Err(format!("basis must be {BASIS_LABELS:?}, got {:?}", json.basis));
        }
        if json.elements.len() != 4 || json.elements.iter().any(|row| row.len() != 4) {
            return Err("elements must be a 4x4 array of [re, im] pairs".into());
        }
        let m = Mat4::from_fn(|r, c| C64::new(json.elements[r][c][0], json.elements[r][c][1]));
        Ok(DensityMatrix::from_matrix(m))
    }
}

/// Pure state `(|HV⟩ + e^{iφ}|VH⟩)/√2`.
pub fn bell_phase_state(spec: BellPhaseSpec) -> DensityMatrix {
    let v = spec.ket();
    DensityMatrix::from_matrix(v * v.adjoint())
}

/// X-state with populations `(0, ½, ½, 0)` and `⟨HV|ρ|VH⟩ = (C/2)·e^{−iφ}`.
/// Its concurrence equals `C`.
pub fn x_state(spec: XStateSpec) -> DensityMatrix {
    let mut m = Mat4::zeros();
    m[(HV, HV)] = C64::new(0.5, 0.0);
    m[(VH, VH)] = C64::new(0.5, 0.0);
    let coherence = C64::from_polar(0.5 * spec.concurrence, -spec.phi);
    m[(HV, VH)] = coherence;
    m[(VH, HV)] = coherence.conj();
    DensityMatrix::from_matrix(m)
}

/// X-state whose noiseless correlation fringes have the given visibilities:
/// `hv` when the signal is analysed in H or V, `ad` when analysed in A or D
/// (for φ = π). Populations are `(p, ½−p, ½−p, p)` with `p = (1 − hv)/4`
/// and the `HV/VH` coherence has magnitude `ad/2`.
pub fn calibrated_x_state(hv_visibility: f64, ad_visibility: f64, phi: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&hv_visibility) || !(0.0..=1.0).contains(&ad_visibility) {
        return Err(Error::InvalidArgument("visibilities must lie in [0, 1]".into()));
    }
    if !phi.is_finite() {
        return Err(Error::InvalidArgument(format!("phase must be finite, got {phi}")));
    }
    let p = 0.25 * (1.0 - hv_visibility);
    let q = 0.5 - p;
    if 0.5 * ad_visibility > q + 1e-15 {
        return Err(Error::InvalidArgument(format!(
            "A/D visibility {ad_visibility} exceeds the positivity limit {} for H/V visibility {hv_visibility}",
            (1.0 + hv_visibility) / 2.0
        )));
    }
    let mut m = Mat4::zeros();
    m[(HH, HH)] = C64::new(p, 0.0);
    m[(VV, VV)] = C64::new(p, 0.0);
    m[(HV, HV)] = C64::new(q, 0.0);
    m[(VH, VH)] = C64::new(q, 0.0);
    let coherence = C64::from_polar(0.5 * ad_visibility, -wrap_phase(phi));
    m[(HV, VH)] = coherence;
    m[(VH, HV)] = coherence.conj();
    Ok(DensityMatrix::from_matrix(m))
}

/// Convex combination `Σ wₖ ρₖ`.
pub fn mix(components: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("mixture needs at least one component".into()));
    }
    let mut total = 0.0;
    for (w, _) in components {
        if !(w.is_finite() && *w >= 0.0) {
            return Err(Error::InvalidArgument(format!("mixture weight {w} is not a nonnegative number")));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("mixture weights sum to {total}, expected 1")));
    }
    let m = components
        .iter()
        .fold(Mat4::zeros(), |acc, (w, rho)| acc + rho.m * C64::new(*w, 0.0));
    Ok(DensityMatrix::from_matrix(m))
}

/// `σy ⊗ σy`, which is real in this basis.
fn spin_flip() -> Mat4 {
    let mut y = Mat4::zeros();
    y[(0, 3)] = -ONE;
    y[(1, 2)] = ONE;
    y[(2, 1)] = ONE;
    y[(3, 0)] = -ONE;
    y
}

/// Wootters concurrence.
///
/// The λᵢ are the singular values of `√ρ·Y·√ρ*` (`Y = σy⊗σy`), whose
/// squares are the eigenvalues of `ρ·ρ̃`. Taking singular values directly
/// avoids square roots of round-off noise on rank-deficient states.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    rho.ensure_physical()?;
    let root = linalg::psd_sqrt(&rho.m);
    let a = root * spin_flip() * root.map(|z| z.conj());
    let mut lambdas: Vec<f64> = a.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.clamp(0.0, 1.0))
}

/// `⟨ψ(φ_t)|ρ|ψ(φ_t)⟩` for the Bell-phase target.
pub fn fidelity_to_pure(rho: &DensityMatrix, target: BellPhaseSpec) -> Result<f64> {
    rho.ensure_physical()?;
    let psi = target.ket();
    let f = (psi.adjoint() * rho.m * psi)[(0, 0)];
    Ok(f.re.clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²` between two mixed states.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    rho.ensure_physical()?;
    sigma.ensure_physical()?;
    let root = linalg::psd_sqrt(&rho.m);
    let inner = root * sigma.m * root;
    let t: f64 = linalg::hermitian_eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((t * t).clamp(0.0, 1.0))
}

pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    linalg::trace_distance(&a.m, &b.m)
}

/// Argument of the `⟨VH|ρ|HV⟩` element on `(−π, π]`.
pub fn infer_phase(rho: &DensityMatrix) -> Result<f64> {
    let z = rho.m[(VH, HV)];
    let magnitude = z.norm();
    if !(magnitude > 1e-12) {
        return Err(Error::DegeneratePhase { magnitude });
    }
    Ok(wrap_phase(z.arg()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalityReport {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub passed: bool,
}

impl std::fmt::Display for PhysicalityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "hermiticity defect {:e}, trace defect {:e}, minimum eigenvalue {:e}: {}",
            self.hermiticity_defect,
            self.trace_defect,
            self.min_eigenvalue,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

/// Measures how far `rho` is from a valid density matrix.
pub fn validate_physical(rho: &DensityMatrix) -> PhysicalityReport {
    let hermiticity_defect = linalg::hermiticity_defect(&rho.m);
    let trace_defect = (linalg::trace4(&rho.m) - ONE).norm();
    let min_eigenvalue = if rho.m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        rho.eigenvalues()[0]
    } else {
        f64::NAN
    };
    let passed = hermiticity_defect <= HERMITICITY_TOL
        && trace_defect <= TRACE_TOL
        && min_eigenvalue >= MIN_EIGENVALUE_TOL;
    PhysicalityReport { hermiticity_defect, trace_defect, min_eigenvalue, passed }
}

/// Random state `G·G†/tr(G·G†)` with `G` a 4×`rank` complex Gaussian matrix.
/// `rank = 4` gives the Hilbert–Schmidt ensemble; `rank = 1` pure states.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, rank: usize) -> DensityMatrix {
    let rank = rank.clamp(1, 4);
    let mut m = Mat4::zeros();
    for _ in 0..rank {
        let v = Vector4::from_fn(|_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        m += v * v.adjoint();
    }
    let tr = linalg::trace4(&m).re;
    let mut m = m / C64::new(tr, 0.0);
    // exact hermiticity
    m = linalg::hermitian_part(&m);
    DensityMatrix::from_matrix(m)
}

/// Product state `|a⟩⟨a| ⊗ |b⟩⟨b|` for single-photon kets `a`, `b`.
pub fn product_state(signal: [C64; 2], idler: [C64; 2]) -> Result<DensityMatrix> {
    let ket = Vector4::new(
        signal[0] * idler[0],
        signal[0] * idler[1],
        signal[1] * idler[0],
        signal[1] * idler[1],
    );
    DensityMatrix::from_pure(&ket)
}

pub fn basis_state(index: usize) -> DensityMatrix {
    let mut m = Mat4::zeros();
    m[(index, index)] = ONE;
    DensityMatrix::from_matrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(phi: f64) -> DensityMatrix {
        bell_phase_state(BellPhaseSpec::new(phi).unwrap())
    }

    fn xs(c: f64, phi: f64) -> DensityMatrix {
        x_state(XStateSpec::new(c, phi).unwrap())
    }

    #[test]
    fn wrap_phase_branch() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(-0.941 * PI) + 0.941 * PI).abs() < 1e-15);
    }

    #[test]
    fn bell_state_coherences() {
        let singlet = bell(PI);
        assert!((singlet.element(HV, VH) - C64::new(-0.5, 0.0)).norm() < 1e-15);
        let triplet = bell(0.0);
        assert!((triplet.element(HV, VH) - C64::new(0.5, 0.0)).norm() < 1e-15);
        let led = bell(-0.941 * PI);
        assert!((led.element(VH, HV).arg() + 0.941 * PI).abs() < 1e-12);
        for (k, expected) in [0.0, 0.5, 0.5, 0.0].into_iter().enumerate() {
            assert!((led.element(k, k).re - expected).abs() < 1e-15);
            assert_eq!(led.element(HH, k), C64::new(0.0, 0.0));
            assert_eq!(led.element(k, VV), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn bell_state_rejects_nonfinite_phase() {
        assert!(matches!(BellPhaseSpec::new(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(matches!(BellPhaseSpec::new(f64::INFINITY), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn x_state_limits() {
        assert!((xs(1.0, PI).matrix() - bell(PI).matrix()).norm() < 1e-15);
        let dephased = xs(0.0, 1.234);
        assert!(concurrence(&dephased).unwrap() < 1e-12);
        assert!((concurrence(&xs(0.834, -0.941 * PI)).unwrap() - 0.834).abs() < 1e-12);
        assert!(matches!(XStateSpec::new(1.2, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(XStateSpec::new(-0.1, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn concurrence_examples() {
        for phi in [0.0, 0.3, -2.0, PI] {
            assert!((concurrence(&bell(phi)).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(concurrence(&basis_state(HV)).unwrap().abs() < 1e-12);
        assert!((concurrence(&xs(0.952, -0.943 * PI)).unwrap() - 0.952).abs() < 1e-9);
    }

    #[test]
    fn concurrence_rejects_unphysical() {
        let mut m = *bell(PI).matrix();
        m[(HH, HH)] = C64::new(-0.01, 0.0);
        m[(VV, VV)] = C64::new(0.01, 0.0);
        let rho = DensityMatrix::from_matrix(m);
        assert!(matches!(concurrence(&rho), Err(Error::InvalidState(_))));
    }

    #[test]
    fn mix_examples() {
        let half = mix(&[(0.5, bell(0.0)), (0.5, bell(PI))]).unwrap();
        assert!(concurrence(&half).unwrap() < 1e-9);
        let one = mix(&[(1.0, bell(0.7))]).unwrap();
        assert_eq!(one, bell(0.7));
        assert!(mix(&[]).is_err());
        assert!(mix(&[(0.6, bell(0.0)), (0.6, bell(PI))]).is_err());
        assert!(mix(&[(-0.5, bell(0.0)), (1.5, bell(PI))]).is_err());
    }

    #[test]
    fn fig4_mixture_concurrence_matches_phasor_average() {
        let a = xs(0.933, 0.5558 * PI);
        let b = xs(0.916, 0.3220 * PI);
        let m = mix(&[(0.5, a), (0.5, b)]).unwrap();
        let phasor = 0.5 * (C64::from_polar(0.933, 0.5558 * PI) + C64::from_polar(0.916, 0.3220 * PI)).norm();
        let c = concurrence(&m).unwrap();
        assert!((c - phasor).abs() < 1e-9);
        assert!((c - 0.8558).abs() < 0.02);
    }

    #[test]
    fn fidelity_examples() {
        let t = BellPhaseSpec::new(PI).unwrap();
        assert!((fidelity_to_pure(&bell(PI), t).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity_to_pure(&bell(0.0), t).unwrap().abs() < 1e-12);
        let f = fidelity_to_pure(&bell(-0.941 * PI), t).unwrap();
        let closed = (0.059 * PI / 2.0).cos().powi(2);
        assert!((f - closed).abs() < 1e-12);
        assert!((f - 0.9914).abs() < 1e-4);
    }

    #[test]
    fn phase_examples() {
        assert!((infer_phase(&bell(0.5)).unwrap() - 0.5).abs() < 1e-12);
        assert!((infer_phase(&xs(0.9, -0.943 * PI)).unwrap() + 0.943 * PI).abs() < 1e-12);
        assert!(matches!(infer_phase(&xs(0.0, 1.0)), Err(Error::DegeneratePhase { .. })));
    }

    #[test]
    fn validation_report() {
        let r = validate_physical(&bell(PI));
        assert!(r.passed);
        assert!(r.hermiticity_defect < 1e-12 && r.trace_defect < 1e-12);
        let m = bell(PI).matrix() * C64::new(0.9, 0.0);
        let r = validate_physical(&DensityMatrix::from_matrix(m));
        assert!(!r.passed);
        assert!((r.trace_defect - 0.1).abs() < 1e-12);
    }

    #[test]
    fn calibrated_state_rejects_nonpositive_combination() {
        assert!(calibrated_x_state(0.5, 0.9, PI).is_err());
        let rho = calibrated_x_state(0.97, 0.81, PI).unwrap();
        assert!(validate_physical(&rho).passed);
        // C = 2(|ρ₁₂| − √(ρ₀₀ρ₃₃))
        assert!((concurrence(&rho).unwrap() - 2.0 * (0.405 - 0.0075)).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rho = mix(&[(0.3, xs(0.77, 1.1)), (0.7, bell(-2.3))]).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.contains("\"basis\":[\"HH\",\"HV\",\"VH\",\"VV\"]"));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn json_rejects_wrong_basis() {
        let text = r#"{"basis":["HH","VH","HV","VV"],"elements":[[[1,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(text).is_err());
    }
}
