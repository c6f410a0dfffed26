//! Small dense complex matrix helpers shared by the state and analysis code.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64 as C64;

pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity2() -> Mat2 {
    Mat2::identity()
}

/// Pauli matrices in the order (1, X, Y, Z).
pub fn pauli(index: usize) -> Mat2 {
    match index {
        0 => Mat2::identity(),
        1 => Mat2::new(ZERO, ONE, ONE, ZERO),
        2 => Mat2::new(ZERO, -I, I, ZERO),
        3 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {index} out of range"),
    }
}

/// Kronecker product `a ⊗ b` with the first factor as the most
/// significant index, matching the `(HH, HV, VH, VV)` ordering.
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn trace4(m: &Mat4) -> C64 {
    (0..4).map(|k| m[(k, k)]).sum()
}

/// `tr(a·b)` without forming the product.
pub fn trace_product(a: &Mat4, b: &Mat4) -> C64 {
    let mut acc = ZERO;
    for i in 0..4 {
        for j in 0..4 {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn hermitian_part(m: &Mat4) -> Mat4 {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest `|m_ij − conj(m_ji)|`.
pub fn hermiticity_defect(m: &Mat4) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..4 {
        for j in i..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &Mat4) -> (Vector4<f64>, Mat4) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector4::from_fn(|k, _| eig.eigenvalues[order[k]]);
    let vectors = Mat4::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &Mat4) -> Vector4<f64> {
    hermitian_eigen(m).0
}

/// Rebuild `V·diag(f(λ))·V†` from a Hermitian eigen-decomposition.
pub fn hermitian_map(m: &Mat4, f: impl Fn(f64) -> f64) -> Mat4 {
    let (values, vectors) = hermitian_eigen(m);
    let diag = Mat4::from_diagonal(&values.map(|v| C64::new(f(v), 0.0)));
    vectors * diag * vectors.adjoint()
}

/// Principal square root of a positive-semidefinite Hermitian matrix;
/// small negative eigenvalues are clamped to zero first.
pub fn psd_sqrt(m: &Mat4) -> Mat4 {
    hermitian_map(m, |v| v.max(0.0).sqrt())
}

/// Trace norm distance `½‖a − b‖₁` for Hermitian arguments.
pub fn trace_distance(a: &Mat4, b: &Mat4) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Lower-triangular `L` with real diagonal such that `L·L† = m` for a
/// positive-semidefinite `m`. Columns whose pivot vanishes are left at
/// zero, which is exact for PSD input.
pub fn psd_cholesky(m: &Mat4) -> Mat4 {
    let a = hermitian_part(m);
    let mut l = Mat4::zeros();
    let scale = (0..4).map(|k| a[(k, k)].re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..4 {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 1e-14 * scale {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in (j + 1)..4 {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }
    l
}
