//! Small complex vector helpers.

use num_complex::Complex64;

/// Euclidean norm.
pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate inner product `x^* y`.
pub fn dotc(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// `y += a x`
pub fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `||x - y|| / ||y||`, or the absolute difference when `y` vanishes.
pub fn rel_diff(x: &[Complex64], y: &[Complex64]) -> f64 {
    let d: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let ny = norm(y);
    if ny > 0.0 {
        d / ny
    } else {
        d
    }
}
