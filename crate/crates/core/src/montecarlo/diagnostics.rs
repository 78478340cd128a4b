//! Normality diagnostics for fluctuation samples.

use num_complex::Complex64;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::{Error, Result};

/// Fewest samples accepted by [`normality_tests`].
pub const MIN_NORMALITY_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityDiagnostics {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance to `Normal(0, s^2)`, `s^2` the
    /// Bessel-corrected sample variance.
    pub ks_statistic: f64,
    pub p_value: f64,
}

/// Sample mean and Bessel-corrected variance, summed in index order.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (
        mean,
        if samples.len() > 1 {
            ss / (n - 1.0)
        } else {
            0.0
        },
    )
}

/// `Q(l) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 l^2)`, the Kolmogorov tail.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, fast for small arguments.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|j| ((2 * j - 1) as f64).powi(2))
            .map(|k| (c * k).exp())
            .sum();
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn normality_tests(samples: &[f64]) -> Result<NormalityDiagnostics> {
    if samples.len() < MIN_NORMALITY_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "normality tests need at least {MIN_NORMALITY_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateSample("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let (mean, var) = mean_variance(samples);
    let (m2, m3, m4) = samples.iter().fold((0.0, 0.0, 0.0), |(a, b, c), x| {
        let d = x - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d, c + d2 * d2)
    });
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if !(m2 > 0.0) || m2 <= f64::EPSILON * f64::EPSILON * mean * mean {
        return Err(Error::DegenerateSample("samples have zero variance".into()));
    }

    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 0.5 * erfc(-x / (sd * SQRT_2));
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sqrt_n = n.sqrt();
    Ok(NormalityDiagnostics {
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        ks_statistic: d,
        p_value: kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d),
    })
}

/// `Z_R(t) = R^{-1} sum_r exp(i t x_r)`.
pub fn empirical_char_function(samples: &[f64], t: f64) -> Complex64 {
    let (re, im) = samples.iter().fold((0.0, 0.0), |(c, s), &x| {
        let (sin, cos) = (t * x).sin_cos();
        (c + cos, s + sin)
    });
    let r = samples.len() as f64;
    Complex64::new(re / r, im / r)
}

/// `(t, |Z_R(t) - exp(-t^2 V / 2)|)` for each `t`.
pub fn char_function_compare(samples: &[f64], v: f64, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be non-negative, got {v}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::DegenerateSample("no samples".into()));
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let z = empirical_char_function(samples, t);
            (t, (z - (-0.5 * t * t * v).exp()).norm())
        })
        .collect())
}

/// `points` equispaced values on `[-3/sqrt(V), 3/sqrt(V)]`; just `[0]` when
/// `V` is not positive.
pub fn default_t_grid(v: f64, points: usize) -> Vec<f64> {
    if !(v > 0.0 && v.is_finite()) || points < 2 {
        return vec![0.0];
    }
    let half = 3.0 / v.sqrt();
    let m = (points - 1) as f64;
    (0..points)
        .map(|i| half * (2.0 * i as f64 - m) / m)
        .collect()
}
