//! Oracle checks of the numerical core, runnable from the command line.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::bandeig::eigenvalues;
use crate::ensemble::{BandMatrix, BandProfile};
use crate::montecarlo::{char_function_compare, default_t_grid, normality_tests};
use crate::oracle::{
    central_mixed_difference, contour_derivative, contour_mixed_derivative, jacobi_eigenvalues,
};
use crate::record::Record;
use crate::statistics::TestFunction;
use crate::theory::{
    clt_variance, covariance_bracket, covariance_resolvents, g_prime, log_modulus_integral,
    stieltjes_g, variance_kernel,
};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed error.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }

    pub fn to_record(&self) -> Record {
        Record::new("check")
            .with("name", self.name)
            .with("status", if self.passed { "PASS" } else { "FAIL" })
            .with_f64("worst", self.worst)
            .with_f64("tolerance", self.tolerance)
    }
}

pub fn profiles() -> [BandProfile; 3] {
    [
        BandProfile::boxcar(),
        BandProfile::triangle(),
        BandProfile::epanechnikov(),
    ]
}

/// Band pipeline against cyclic Jacobi on `count` random band matrices with
/// `n <= max_n`, half-bandwidth `<= max_w`. The error is relative to the
/// spectral radius.
pub fn eigensolver_equivalence(
    count: usize,
    max_n: usize,
    max_w: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.random_range(1..=max_n);
        let w = rng.random_range(0..=max_w.min(n - 1));
        let diags = (0..=w)
            .map(|d| (0..n - d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let m = BandMatrix::from_diagonals(n, diags)?;
        let got = eigenvalues(&m)?;
        let want = jacobi_eigenvalues(&m.to_dense());
        let scale = want
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for (a, b) in got.eigenvalues().iter().zip(&want) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(CheckOutcome::new(
        "eigensolver_dense_equivalence",
        worst,
        1e-10,
    ))
}

/// `|g^2 + z g + 1|` on random `z` with `|Im z| >= 0.1`; a branch violation
/// (`|g| >= 1`) counts as an infinite error.
pub fn g_identity(count: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let im = rng.random_range(0.1..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let z = Complex64::new(rng.random_range(-5.0..5.0), im);
        let g = stieltjes_g(z)?;
        let err = if g.norm() < 1.0 {
            (g * g + z * g + 1.0).norm()
        } else {
            f64::INFINITY
        };
        worst = worst.max(err);
    }
    Ok(CheckOutcome::new("g_identity", worst, 1e-13))
}

/// `g(2i) = i (sqrt 2 - 1)`.
pub fn g_reference_value() -> Result<CheckOutcome> {
    let g = stieltjes_g(Complex64::new(0.0, 2.0))?;
    let err = (g - Complex64::new(0.0, 2f64.sqrt() - 1.0)).norm();
    Ok(CheckOutcome::new("g_at_2i", err, 1e-12))
}

/// `g'` against contour differentiation of `g`.
pub fn g_prime_contour() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for z in [
        Complex64::new(0.3, 1.0),
        Complex64::new(-1.5, -0.7),
        Complex64::new(2.5, 0.4),
    ] {
        let r = 0.5 * z.im.abs();
        let num = contour_derivative(
            |s| stieltjes_g(s).unwrap_or(Complex64::new(f64::NAN, 0.0)),
            z,
            r,
            64,
        );
        let exact = g_prime(z)?;
        worst = worst.max((num - exact).norm() / exact.norm());
    }
    Ok(CheckOutcome::new("g_prime_contour", worst, 1e-10))
}

/// Closed-form kernel against central differences of the log-modulus
/// integral on a `grid x grid` lattice, for all three profiles. The error is
/// relative to `max(|kernel|, 1e-2)`.
pub fn kernel_finite_differences(grid: usize) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for profile in profiles() {
        for i in 0..grid {
            for j in 0..grid {
                let x = (i as f64 + 0.3) * PI / grid as f64;
                let y = (j as f64 + 0.7) * PI / grid as f64;
                let k = variance_kernel(x, y, &profile)?;
                let fd = central_mixed_difference(
                    |a, b| log_modulus_integral(a, b, &profile),
                    x,
                    y,
                    1e-4,
                );
                worst = worst.max((k - fd).abs() / k.abs().max(1e-2));
            }
        }
    }
    Ok(CheckOutcome::new("kernel_finite_differences", worst, 1e-6))
}

/// Resolvent covariance against contour differentiation of the bracket
/// `H(g1 g2)`.
pub fn covariance_contour() -> Result<CheckOutcome> {
    let cases = [
        (BandProfile::boxcar(), 0.0, (0.0, 2.0), (0.0, 3.0), 0.5),
        (
            BandProfile::epanechnikov(),
            -1.2,
            (0.4, 1.5),
            (-0.8, -2.0),
            0.4,
        ),
        (BandProfile::triangle(), 2.0, (-0.5, 1.2), (1.0, 1.8), 0.4),
    ];
    let mut worst = 0.0f64;
    for (p, kappa4, (a, b), (c, d), r) in cases {
        let (z1, z2) = (Complex64::new(a, b), Complex64::new(c, d));
        let exact = covariance_resolvents(z1, z2, &p, kappa4)?;
        let h = |s: Complex64, t: Complex64| {
            let w = stieltjes_g(s).and_then(|gs| Ok(gs * stieltjes_g(t)?));
            w.and_then(|w| covariance_bracket(w, &p, kappa4))
                .unwrap_or(Complex64::new(f64::NAN, 0.0))
        };
        let num = contour_mixed_derivative(h, z1, z2, r, 40);
        let err = (num - exact).norm() / exact.norm();
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    Ok(CheckOutcome::new("covariance_contour", worst, 1e-8))
}

pub fn variance_of_constant() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for p in profiles() {
        let v = clt_variance(&TestFunction::constant(3.7), &p, -1.0)?;
        worst = worst.max(v.total.abs());
    }
    Ok(CheckOutcome::new("variance_constant_zero", worst, 1e-9))
}

/// `phi = lambda^2` gives `kappa4_term = kappa4 (u, u)`.
pub fn kappa4_term_quadratic() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for p in profiles() {
        for kappa4 in [-2.0, -1.2, 1.5] {
            let v = clt_variance(&TestFunction::monomial(2), &p, kappa4)?;
            worst = worst.max((v.kappa4_term - kappa4 * p.l2_norm_sq()).abs());
        }
    }
    Ok(CheckOutcome::new("kappa4_term_quadratic", worst, 1e-10))
}

/// `phi = lambda` gives `u0_term = u(0) / 2`.
pub fn u0_term_linear() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for p in profiles() {
        let v = clt_variance(&TestFunction::monomial(1), &p, 0.0)?;
        worst = worst.max((v.u0_term - 0.5 * p.at_zero()).abs());
    }
    Ok(CheckOutcome::new("u0_term_linear", worst, 1e-10))
}

fn normal_draws(seed: u64, count: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect()
}

/// Diagnostics on seeded standard normal draws stay inside their null
/// bands. The error is the largest ratio of a statistic to its bound.
pub fn normality_null(seed: u64) -> Result<CheckOutcome> {
    let d = normality_tests(&normal_draws(seed, 10_000, 1.0))?;
    let worst = [
        d.skewness.abs() / 0.08,
        d.excess_kurtosis.abs() / 0.15,
        0.01 / d.p_value,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CheckOutcome::new("normality_null", worst, 1.0))
}

pub fn char_function_null(seed: u64) -> Result<CheckOutcome> {
    let v = 1.7f64;
    let x = normal_draws(seed, 10_000, v.sqrt());
    let dev = char_function_compare(&x, v, &default_t_grid(v, 41))?;
    let worst = dev.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(CheckOutcome::new("char_function_null", worst, 0.05))
}

/// All checks at their default sizes, with the name under which each is
/// reported.
pub fn full_suite() -> Vec<(&'static str, Result<CheckOutcome>)> {
    vec![
        ("eigensolver_dense_equivalence", eigensolver_equivalence(200, 64, 8, 1)),
        ("g_identity", g_identity(1000, 2)),
        ("g_at_2i", g_reference_value()),
        ("g_prime_contour", g_prime_contour()),
        ("kernel_finite_differences", kernel_finite_differences(10)),
        ("covariance_contour", covariance_contour()),
        ("variance_constant_zero", variance_of_constant()),
        ("kappa4_term_quadratic", kappa4_term_quadratic()),
        ("u0_term_linear", u0_term_linear()),
        ("normality_null", normality_null(3)),
        ("char_function_null", char_function_null(4)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_match_outcomes() {
        for (name, outcome) in full_suite() {
            let outcome = outcome.unwrap();
            assert_eq!(name, outcome.name);
            assert!(outcome.passed, "{outcome:?}");
        }
    }

    #[test]
    fn record_form() {
        let r = CheckOutcome::new("x", 0.5, 1.0).to_record().to_string();
        assert_eq!(
            r,
            "check name=x status=PASS worst=5.0000000000000000e-1 tolerance=1.0000000000000000e0"
        );
        assert!(!CheckOutcome::new("x", f64::NAN, 1.0).passed);
    }
}
