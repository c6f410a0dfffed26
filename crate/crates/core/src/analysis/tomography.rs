//! Two-qubit state tomography from the 16 settings of
//! [`polarimetry::tomography_settings`].
//!
//! Linear inversion solves for the Pauli-basis coefficients directly.
//! Maximum likelihood works with an unnormalised state `ρ̃ = L·L†`, `L`
//! lower-triangular with real diagonal (16 real parameters), and minimises
//! the Poisson negative log-likelihood of the raw counts
//!
//! ```text
//! μₖ = tₖ·(I₀·tr(ρ̃ Pₖ) + aₖ),   NLL = Σ μₖ − nₖ ln μₖ
//! ```
//!
//! where `aₖ` is the record's accidental rate. The overall intensity is
//! carried by `tr ρ̃`; the returned state is `ρ̃ / tr ρ̃`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64 as C64;

use crate::counting::{correct_counts, pool_records, CountRecord};
use crate::linalg::{self, Mat4};
use crate::polarimetry::{self, TomographySetting, TOMOGRAPHY_LABELS};
use crate::qstate::DensityMatrix;
use crate::{Error, Result};

type Params = SVector<f64, 16>;
type Hessian = SMatrix<f64, 16, 16>;

/// Records aligned with [`TOMOGRAPHY_LABELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyData {
    records: Vec<CountRecord>,
    window_tau: f64,
}

impl TomographyData {
    /// Matches records to the 16 canonical settings by label. Repeated
    /// records for a setting are pooled; missing or unknown labels are
    /// errors.
    pub fn from_records(records: &[CountRecord], window_tau: f64) -> Result<Self> {
        if !(window_tau.is_finite() && window_tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("window_tau must be nonnegative, got {window_tau}")));
        }
        let mut slots: Vec<Vec<CountRecord>> = vec![Vec::new(); 16];
        for r in records {
            r.validate()?;
            let setting = TomographySetting::parse(&r.setting.label).ok_or_else(|| {
                Error::InvalidArgument(format!("`{}` is not a tomography setting label", r.setting.label))
            })?;
            let k = TOMOGRAPHY_LABELS
                .iter()
                .position(|l| *l == setting.label())
                .ok_or_else(|| Error::InvalidArgument(format!("setting `{}` is not in the 16-setting table", setting.label())))?;
            slots[k].push(r.clone());
        }
        let mut aligned = Vec::with_capacity(16);
        for (k, slot) in slots.into_iter().enumerate() {
            if slot.is_empty() {
                return Err(Error::InvalidArgument(format!("missing tomography setting `{}`", TOMOGRAPHY_LABELS[k])));
            }
            let mut pooled = pool_records(&slot);
            if pooled.len() != 1 {
                // same label with different angle annotations
                let total_time: f64 = pooled.iter().map(|r| r.acquisition_time).sum();
                let mut first = pooled.remove(0);
                first.raw_counts += pooled.iter().map(|r| r.raw_counts).sum::<f64>();
                first.acquisition_time = total_time;
                pooled = vec![first];
            }
            aligned.push(pooled.remove(0));
        }
        Ok(Self { records: aligned, window_tau })
    }

    pub fn records(&self) -> &[CountRecord] {
        &self.records
    }

    pub fn window_tau(&self) -> f64 {
        self.window_tau
    }

    /// Same settings, new raw counts (in canonical order).
    pub fn with_counts(&self, counts: &[f64]) -> Self {
        Self {
            records: self.records.iter().zip(counts).map(|(r, &n)| r.with_counts(n)).collect(),
            window_tau: self.window_tau,
        }
    }

    fn corrected_rates(&self) -> SVector<f64, 16> {
        SVector::from_fn(|k, _| correct_counts(&self.records[k], self.window_tau))
    }
}

fn measurement_matrices() -> Result<&'static (SMatrix<f64, 16, 16>, SMatrix<f64, 16, 16>)> {
    polarimetry::pauli_measurement_matrix()
        .ok_or_else(|| Error::Configuration("tomography projectors are linearly dependent".into()))
}

/// Linear inversion of accidental-corrected rates. The result is Hermitian
/// with unit trace but may have negative eigenvalues.
pub fn tomography_linear(data: &TomographyData) -> Result<DensityMatrix> {
    let (_, inverse) = measurement_matrices()?;
    let coeffs = inverse * data.corrected_rates();
    let trace = coeffs[0];
    if !(trace > 0.0) {
        return Err(Error::InvalidArgument("tomography data contains no coincidences".into()));
    }
    let mut m = Mat4::zeros();
    for (j, c) in coeffs.iter().enumerate() {
        m += linalg::kron(&linalg::pauli(j / 4), &linalg::pauli(j % 4)) * C64::new(0.25 * c / trace, 0.0);
    }
    Ok(DensityMatrix::from_matrix(linalg::hermitian_part(&m)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iterations: 5000, gradient_tolerance: 1e-8, step_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub state: DensityMatrix,
    /// Poisson negative log-likelihood (constant terms dropped) of the
    /// returned state at its fitted intensity.
    pub negative_log_likelihood: f64,
    /// Same quantity for the clamped linear-inversion seed at its best
    /// intensity.
    pub seed_negative_log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Poisson likelihood of the 16 records.
struct Likelihood {
    projectors: Vec<Mat4>,
    times: Vec<f64>,
    accidentals: Vec<f64>,
    counts: Vec<f64>,
    intensity: f64,
    total_counts: f64,
}

impl Likelihood {
    fn new(data: &TomographyData) -> Result<Self> {
        let settings = polarimetry::tomography_settings();
        let projectors = settings.iter().map(|(_, p)| *p.matrix()).collect();
        let times: Vec<f64> = data.records.iter().map(|r| r.acquisition_time).collect();
        let accidentals = data.records.iter().map(|r| r.accidental_rate(data.window_tau)).collect();
        let counts: Vec<f64> = data.records.iter().map(|r| r.raw_counts).collect();
        let total_counts: f64 = counts.iter().sum();
        if !(total_counts > 0.0) {
            return Err(Error::InvalidArgument("tomography data contains no coincidences".into()));
        }
        let corrected: f64 = data.corrected_rates().iter().sum();
        let intensity = if corrected > 0.0 { corrected / 4.0 } else { total_counts / times.iter().sum::<f64>() };
        Ok(Self { projectors, times, accidentals, counts, intensity, total_counts })
    }

    fn means(&self, rho_tilde: &Mat4) -> impl Iterator<Item = f64> + '_ {
        let rho = *rho_tilde;
        self.projectors
            .iter()
            .zip(self.times.iter().zip(&self.accidentals))
            .map(move |(p, (t, a))| t * (self.intensity * polarimetry::expectation(&rho, p).max(0.0) + a))
    }

    /// NLL divided by the total count.
    fn value(&self, rho_tilde: &Mat4) -> f64 {
        let mut acc = 0.0;
        for (mu, &n) in self.means(rho_tilde).zip(&self.counts) {
            if n > 0.0 {
                if !(mu > 0.0) {
                    return f64::INFINITY;
                }
                acc += mu - n * mu.ln();
            } else {
                acc += mu;
            }
        }
        acc / self.total_counts
    }

    /// Derivative of [`Likelihood::value`] with respect to ρ̃.
    fn gradient_matrix(&self, rho_tilde: &Mat4) -> Mat4 {
        let mut g = Mat4::zeros();
        for ((mu, &n), (p, t)) in self.means(rho_tilde).zip(&self.counts).zip(self.projectors.iter().zip(&self.times)) {
            let ratio = if n > 0.0 { n / mu } else { 0.0 };
            g += p * C64::new(t * self.intensity * (1.0 - ratio) / self.total_counts, 0.0);
        }
        g
    }

    fn scaled_value(&self, shape: &Mat4, scale: f64) -> f64 {
        self.value(&(shape * C64::new(scale, 0.0)))
    }

    /// Best intensity scale for a fixed unit-trace state (convex 1-D Newton).
    fn best_scale(&self, shape: &Mat4) -> f64 {
        let probs: Vec<f64> = self.projectors.iter().map(|p| polarimetry::expectation(shape, p).max(0.0)).collect();
        let weighted: f64 = probs.iter().zip(&self.times).map(|(p, t)| p * t * self.intensity).sum();
        if !(weighted > 0.0) {
            return 1.0;
        }
        let mut s = (self.total_counts / weighted).max(1e-12);
        for _ in 0..100 {
            let (mut d1, mut d2) = (0.0, 0.0);
            for (k, prob) in probs.iter().enumerate() {
                let b = self.times[k] * self.intensity * prob;
                let mu = s * b + self.times[k] * self.accidentals[k];
                if mu <= 0.0 {
                    continue;
                }
                d1 += b * (1.0 - self.counts[k] / mu);
                d2 += self.counts[k] * b * b / (mu * mu);
            }
            if d2 <= 0.0 {
                break;
            }
            let mut next = s - d1 / d2;
            if next <= 0.0 {
                next = 0.5 * s;
            }
            if (next - s).abs() <= 1e-14 * s {
                s = next;
                break;
            }
            s = next;
        }
        s
    }
}

fn params_to_factor(x: &Params) -> Mat4 {
    let mut l = Mat4::zeros();
    for i in 0..4 {
        l[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            l[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    l
}

fn factor_to_params(l: &Mat4) -> Params {
    let mut x = Params::zeros();
    for i in 0..4 {
        x[i] = l[(i, i)].re;
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            x[k] = l[(i, j)].re;
            x[k + 1] = l[(i, j)].im;
            k += 2;
        }
    }
    x
}

/// Objective and its gradient in parameter space.
fn objective(lik: &Likelihood, x: &Params) -> (f64, Params) {
    let l = params_to_factor(x);
    let rho_tilde = l * l.adjoint();
    let f = lik.value(&rho_tilde);
    if !f.is_finite() {
        return (f, Params::zeros());
    }
    let g = lik.gradient_matrix(&rho_tilde);
    // d/dL_ij of tr(G L L†) is 2·(L† G)_ji
    let m = l.adjoint() * g;
    let mut grad = Params::zeros();
    for i in 0..4 {
        grad[i] = 2.0 * m[(i, i)].re;
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            grad[k] = 2.0 * m[(j, i)].re;
            grad[k + 1] = -2.0 * m[(j, i)].im;
            k += 2;
        }
    }
    (f, grad)
}

fn normalized_state(x: &Params) -> Result<DensityMatrix> {
    let l = params_to_factor(x);
    let rho = l * l.adjoint();
    let tr = linalg::trace4(&rho).re;
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::InvalidState("maximum-likelihood factor collapsed to zero".into()));
    }
    Ok(DensityMatrix::from_matrix(linalg::hermitian_part(&(rho / C64::new(tr, 0.0)))))
}

/// Maximum-likelihood reconstruction with default options.
pub fn tomography_mle(data: &TomographyData) -> Result<DensityMatrix> {
    tomography_mle_with(data, &MleOptions::default()).map(|o| o.state)
}

/// Maximum-likelihood reconstruction, BFGS on the triangular factor,
/// seeded from the clamped linear-inversion estimate.
pub fn tomography_mle_with(data: &TomographyData, options: &MleOptions) -> Result<MleOutcome> {
    let lik = Likelihood::new(data)?;
    let seed = match tomography_linear(data).and_then(|r| r.clamp_to_physical()) {
        Ok(s) => s,
        Err(_) => DensityMatrix::maximally_mixed(),
    };
    let seed_scale = lik.best_scale(seed.matrix());
    let seed_nll = lik.scaled_value(seed.matrix(), seed_scale);

    // A small admixture of the identity lifts the seed off the rank boundary
    // so no column of the factor starts identically zero.
    let start = seed.matrix() * C64::new(1.0 - 1e-3, 0.0) + Mat4::identity() * C64::new(1e-3 / 4.0, 0.0);
    let start_scale = lik.best_scale(&start);
    let mut x = factor_to_params(&linalg::psd_cholesky(&(start * C64::new(start_scale, 0.0))));

    let (mut f, mut g) = objective(&lik, &x);
    if !f.is_finite() {
        x = factor_to_params(&(Mat4::identity() * C64::new((start_scale / 4.0).sqrt(), 0.0)));
        (f, g) = objective(&lik, &x);
    }
    let mut h = Hessian::identity();
    let mut first_step = true;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        if g.norm() < options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut p = -(h * g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            h = Hessian::identity();
            p = -g;
            slope = g.dot(&p);
        }
        let mut alpha = 1.0;
        let accepted = loop {
            let trial = x + p * alpha;
            let (ft, gt) = objective(&lik, &trial);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                break Some((trial, ft, gt));
            }
            alpha *= 0.5;
            if alpha * p.norm() < options.step_tolerance {
                break None;
            }
        };
        let Some((x_new, f_new, g_new)) = accepted else {
            converged = true;
            break;
        };
        let s = x_new - x;
        let y = g_new - g;
        x = x_new;
        f = f_new;
        g = g_new;
        if s.norm() < options.step_tolerance {
            converged = true;
            break;
        }
        let sy = s.dot(&y);
        if sy > 1e-300 {
            if first_step {
                h = Hessian::identity() * (sy / y.dot(&y));
                first_step = false;
            }
            let rho_k = 1.0 / sy;
            let hy = h * y;
            h += (s * s.transpose()) * ((sy + y.dot(&hy)) * rho_k * rho_k)
                - (hy * s.transpose() + s * hy.transpose()) * rho_k;
        }
    }

    let state = normalized_state(&x)?;
    if !converged {
        return Err(Error::Convergence { iterations, gradient_norm: g.norm(), best: Box::new(state) });
    }
    let final_nll = lik.scaled_value(state.matrix(), lik.best_scale(state.matrix()));
    let (state, nll) = if final_nll <= seed_nll { (state, final_nll) } else { (seed, seed_nll) };
    Ok(MleOutcome {
        state,
        negative_log_likelihood: nll * lik.total_counts,
        seed_negative_log_likelihood: seed_nll * lik.total_counts,
        iterations,
        gradient_norm: g.norm(),
    })
}

/// Expected counts for `rho` at every tomography setting, in canonical
/// order: `tₖ·(2·pair_rate·tr(ρPₖ) + aₖ)`.
pub fn expected_counts(rho: &DensityMatrix, data: &TomographyData, pair_rate: f64) -> Vec<f64> {
    let settings = polarimetry::tomography_settings();
    data.records
        .iter()
        .zip(&settings)
        .map(|(r, (_, p))| {
            let prob = polarimetry::expectation(rho.matrix(), p.matrix()).max(0.0);
            r.acquisition_time * (2.0 * pair_rate * prob + r.accidental_rate(data.window_tau))
        })
        .collect()
}
