//! Independent reference computations used by the self-check suite.
//!
//! Nothing here shares code paths with the production routines it checks.

use num_complex::Complex64;

use crate::bandeig::DenseSymmetric;

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending. O(n^3) per sweep; meant for n up to a few hundred.
pub fn jacobi_eigenvalues(a: &DenseSymmetric) -> Vec<f64> {
    let n = a.n();
    let mut m: Vec<f64> = (0..n * n).map(|k| a.get(k / n, k % n)).collect();
    let total: f64 = m.iter().map(|v| v * v).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `h'(z)` of a holomorphic `h` by the trapezoidal rule on the circle of
/// radius `r` around `z` (complex-step differentiation).
pub fn contour_derivative<F: Fn(Complex64) -> Complex64>(
    h: F,
    z: Complex64,
    r: f64,
    points: usize,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..points {
        let e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / points as f64);
        acc += h(z + e * r) * e.conj();
    }
    acc / (points as f64 * r)
}

/// `d^2 H / dz1 dz2` of a function holomorphic in each variable, by the
/// tensor trapezoidal rule on two circles.
pub fn contour_mixed_derivative<F: Fn(Complex64, Complex64) -> Complex64>(
    h: F,
    z1: Complex64,
    z2: Complex64,
    r: f64,
    points: usize,
) -> Complex64 {
    let circle: Vec<Complex64> = (0..points)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / points as f64))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for e1 in &circle {
        for e2 in &circle {
            acc += h(z1 + e1 * r, z2 + e2 * r) * e1.conj() * e2.conj();
        }
    }
    acc / ((points * points) as f64 * r * r)
}

/// 2-d central difference of the mixed partial `d^2 f / dx dy`.
pub fn central_mixed_difference<F: Fn(f64, f64) -> f64>(f: F, x: f64, y: f64, h: f64) -> f64 {
    (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h)
}
