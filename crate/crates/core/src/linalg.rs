//! Small dense linear-algebra helpers shared by the propagators.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type Mat2 = Matrix2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Pauli matrices (σx, σy, σz).
pub fn pauli() -> [Mat2; 3] {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    [
        Mat2::new(o, l, l, o),
        Mat2::new(o, -I, I, o),
        Mat2::new(l, o, o, -l),
    ]
}

fn n_dot_sigma(n: [f64; 3]) -> Mat2 {
    Mat2::new(
        c(n[2], 0.0),
        c(n[0], -n[1]),
        c(n[0], n[1]),
        c(-n[2], 0.0),
    )
}

/// exp(−i(Ω·σ)dt) in closed form.
pub fn su2_step(omega: [f64; 3], dt: f64) -> Mat2 {
    let r = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if r == 0.0 {
        return Mat2::identity();
    }
    let w = r * dt;
    let n = [omega[0] / r, omega[1] / r, omega[2] / r];
    Mat2::identity() * c(w.cos(), 0.0) - n_dot_sigma(n) * c(0.0, w.sin())
}

/// exp(−i(Ω·σ)dt) together with its exact derivatives with respect to Ωx, Ωy, Ωz.
pub fn su2_step_with_derivative(omega: [f64; 3], dt: f64) -> (Mat2, [Mat2; 3]) {
    let sig = pauli();
    let r = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if r < 1e-300 {
        let d = sig.map(|s| s * c(0.0, -dt));
        return (Mat2::identity(), d);
    }
    let w = r * dt;
    let (s, co) = w.sin_cos();
    let n = [omega[0] / r, omega[1] / r, omega[2] / r];
    let ns = n_dot_sigma(n);
    let u = Mat2::identity() * c(co, 0.0) - ns * c(0.0, s);
    let sinc = s / r;
    let d = std::array::from_fn(|k| {
        let inner = ns * c(co * dt * n[k], 0.0) + (sig[k] - ns * c(n[k], 0.0)) * c(sinc, 0.0);
        Mat2::identity() * c(-s * dt * n[k], 0.0) - inner * I
    });
    (u, d)
}

pub fn mat2_to_dmatrix(m: &Mat2) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

pub fn dmatrix_to_mat2(m: &CMat) -> Mat2 {
    Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Frobenius norm of U†U − I.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMat::identity(n, n)).norm()
}

/// Frobenius norm of A − A†.
pub fn hermiticity_error(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// Matrix exponential exp(−iH dt) for a Hermitian H.
pub fn expm_hermitian_step(h: &CMat, dt: f64) -> CMat {
    (h * c(0.0, -dt)).exp()
}

/// Block-diagonal matrix diag(a, b).
pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = CMat::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_step_matches_matrix_exponential() {
        let omega = [0.7, -1.3, 2.1];
        let dt = 0.37;
        let sig = pauli();
        let h = sig[0] * c(omega[0], 0.0) + sig[1] * c(omega[1], 0.0) + sig[2] * c(omega[2], 0.0);
        let reference = expm_hermitian_step(&mat2_to_dmatrix(&h), dt);
        let u = mat2_to_dmatrix(&su2_step(omega, dt));
        assert!((u - reference).norm() < 1e-13);
    }

    #[test]
    fn su2_derivative_matches_finite_difference() {
        let omega = [0.4, 0.9, -0.2];
        let dt = 0.05;
        let (_, d) = su2_step_with_derivative(omega, dt);
        for k in 0..3 {
            let h = 1e-6;
            let mut p = omega;
            let mut m = omega;
            p[k] += h;
            m[k] -= h;
            let fd = (su2_step(p, dt) - su2_step(m, dt)) / c(2.0 * h, 0.0);
            assert!((fd - d[k]).norm() < 1e-9, "axis {k}");
        }
    }

    #[test]
    fn su2_derivative_at_zero_field() {
        let (u, d) = su2_step_with_derivative([0.0; 3], 0.1);
        assert_eq!(u, Mat2::identity());
        let (_, d_small) = su2_step_with_derivative([1e-9, 0.0, 0.0], 0.1);
        for k in 0..3 {
            assert!((d[k] - d_small[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = CMat::from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 0.0));
        let b = CMat::identity(3, 3);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(4, 1)], c(2.0, 0.0));
        assert_eq!(k[(4, 2)], c(0.0, 0.0));
    }
}
