//! Limiting objects of the band ensemble: the semicircle law, its Stieltjes
//! transform, the limiting variance of linear statistics, the limiting
//! covariance of resolvent traces and the finite-n operator identity.
//!
//! All integrals over the frequency `k` use the measure `dk / (2 pi)`, so that
//! `(2 pi)^{-1} int u_hat = u(0)` and `(2 pi)^{-1} int u_hat^2 = (u, u)`. With
//! `c_m = (2 pi)^{-1} int u_hat^m dk` the variance kernel is the cosine series
//! `sum_m 2 m c_m cos(m x) cos(m y)`.
//!
//! The profile transform decays like `1/k`, so the two leading orders in
//! `u_hat` are integrated in closed form and only the remainders, which are
//! `O(u_hat^3)`, go through quadrature.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bandeig::eigenvalues;
use crate::ensemble::{BandMatrix, BandProfile};
use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;
use crate::statistics::TestFunction;

/// `(2 pi)^{-1} sqrt(4 - l^2)` on `[-2, 2]`.
pub fn semicircle_density(l: f64) -> f64 {
    if l.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - l * l).sqrt() / (2.0 * PI)
    }
}

/// Root of `g^2 + z g + 1 = 0` with `|g| < 1`, i.e. the Stieltjes transform
/// `int rho_sc(l) / (l - z) dl` of the semicircle law.
pub fn stieltjes_g(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite argument {z}")));
    }
    if z.im == 0.0 && z.re.abs() <= 2.0 {
        return Err(Error::BranchCut);
    }
    let s = (z * z - 4.0).sqrt();
    // the larger root avoids cancellation; the roots multiply to one
    let a = (-z + s) * 0.5;
    let b = (-z - s) * 0.5;
    let big = if a.norm_sqr() >= b.norm_sqr() { a } else { b };
    Ok(big.inv())
}

/// `g'(z) = g^2 / (1 - g^2)`.
pub fn g_prime(z: Complex64) -> Result<Complex64> {
    let g = stieltjes_g(z)?;
    let g2 = g * g;
    Ok(g2 / (1.0 - g2))
}

/// Upper end of the frequency rule for a unit-radius profile.
const K_MAX: f64 = 2000.0;

/// Composite Gauss–Legendre rule on `[0, K_MAX]`: geometric panels near the
/// origin, where `u_hat` approaches 1, then panels of width `pi`.
fn unit_rule() -> &'static CompositeRule {
    static RULE: OnceLock<CompositeRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut near: Vec<f64> = vec![0.0, 1e-4];
        while *near.last().unwrap() < 4.0 {
            let next = near.last().unwrap() * 1.5;
            near.push(next.min(4.0));
        }
        let mut rule = CompositeRule::from_edges(&near, 16);
        let panels = ((K_MAX - 4.0) / PI).ceil() as usize;
        let far = CompositeRule::uniform(4.0, 4.0 + panels as f64 * PI, panels, 10);
        rule.nodes.extend(far.nodes);
        rule.weights.extend(far.weights);
        rule
    })
}

/// `(2 pi)^{-1} int_R f(u_hat(k)) dk` for an `f` with `f(a) = O(a^3)`.
fn frequency_average<T, F>(profile: &BandProfile, f: F) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    let r = profile.support_radius();
    // even integrand: twice the half line, and dk = d(kappa) / r
    unit_rule().integrate(|kappa| f(profile.fourier(kappa / r))) * (1.0 / (PI * r))
}

/// `c_m = (2 pi)^{-1} int u_hat^m dk` for `m = 0..=m_max`; `c_0` is reported
/// as 0.
pub fn profile_moments(profile: &BandProfile, m_max: usize) -> Vec<f64> {
    let mut c = vec![0.0; m_max + 1];
    if m_max >= 1 {
        c[1] = profile.at_zero();
    }
    if m_max >= 2 {
        c[2] = profile.l2_norm_sq();
    }
    if m_max >= 3 {
        let rule = unit_rule();
        let r = profile.support_radius();
        let mut acc = vec![0.0; m_max + 1];
        for (&kappa, &w) in rule.nodes.iter().zip(&rule.weights) {
            let a = profile.fourier(kappa / r);
            let mut p = a * a * a;
            for slot in acc[3..].iter_mut() {
                *slot += w * p;
                p *= a;
                if p == 0.0 {
                    break;
                }
            }
        }
        for m in 3..=m_max {
            c[m] = acc[m] / (PI * r);
        }
    }
    c
}

/// `sum_{m >= 3} m a^m cos(m theta)` for small `|a|`.
fn fpp_tail_series(theta: f64, a: f64) -> f64 {
    let (c1, mut cm1, mut cm) = (theta.cos(), (2.0 * theta).cos(), (3.0 * theta).cos());
    let mut p = a * a * a;
    let mut sum = 0.0f64;
    let mut m = 3.0;
    while p.abs() > 1e-18 * (1.0 + sum.abs()) {
        sum += m * p * cm;
        let next = 2.0 * c1 * cm - cm1;
        cm1 = cm;
        cm = next;
        p *= a;
        m += 1.0;
    }
    sum
}

/// `f''(theta; a) - a cos(theta) - 2 a^2 cos(2 theta)` where
/// `f(theta; a) = log|1 - a e^{i theta}|`.
fn fpp_remainder(theta: f64, a: f64) -> Result<f64> {
    if a.abs() < 0.25 {
        return Ok(fpp_tail_series(theta, a));
    }
    let c = theta.cos();
    let d = 1.0 - 2.0 * a * c + a * a;
    if d < 1e-12 {
        return Err(Error::NearSingular { theta });
    }
    let s2 = 1.0 - c * c;
    let full = (a * c * d - 2.0 * a * a * s2) / (d * d);
    Ok(full - a * c - 2.0 * a * a * (2.0 * c * c - 1.0))
}

/// `f(theta; a) + a cos(theta) + a^2 cos(2 theta) / 2`.
fn f_remainder(theta: f64, a: f64) -> f64 {
    if a.abs() < 0.25 {
        let (c1, mut cm1, mut cm) = (theta.cos(), (2.0 * theta).cos(), (3.0 * theta).cos());
        let mut p = a * a * a;
        let mut sum = 0.0f64;
        let mut m = 3.0;
        while p.abs() > 1e-18 * (1.0 + sum.abs()) {
            sum -= p * cm / m;
            let next = 2.0 * c1 * cm - cm1;
            cm1 = cm;
            cm = next;
            p *= a;
            m += 1.0;
        }
        return sum;
    }
    let c = theta.cos();
    0.5 * (1.0 - 2.0 * a * c + a * a).ln() + a * c + 0.5 * a * a * (2.0 * c * c - 1.0)
}

fn check_open_square(x: f64, y: f64) -> Result<()> {
    let inside = |t: f64| t > 0.0 && t < PI;
    if inside(x) && inside(y) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "({x}, {y}) is outside (0, pi)^2"
        )))
    }
}

/// `(2 pi)^{-1} int d^2/dx dy log|(1 - u_hat e^{i(x+y)}) / (1 - u_hat e^{i(x-y)})| dk`,
/// evaluated as `f''(x + y) + f''(x - y)` under the integral.
pub fn variance_kernel(x: f64, y: f64, profile: &BandProfile) -> Result<f64> {
    check_open_square(x, y)?;
    let failure = std::cell::Cell::new(None);
    let rem = frequency_average(profile, |a| {
        match (fpp_remainder(x + y, a), fpp_remainder(x - y, a)) {
            (Ok(p), Ok(m)) => p + m,
            (Err(e), _) | (_, Err(e)) => {
                failure.set(Some(e));
                0.0
            }
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let lead = 2.0 * profile.at_zero() * x.cos() * y.cos()
        + 4.0 * profile.l2_norm_sq() * (2.0 * x).cos() * (2.0 * y).cos();
    Ok(lead + rem)
}

/// `(2 pi)^{-1} int log|(1 - u_hat e^{i(x+y)}) / (1 - u_hat e^{i(x-y)})| dk`,
/// whose mixed partial is [`variance_kernel`].
pub fn log_modulus_integral(x: f64, y: f64, profile: &BandProfile) -> f64 {
    let (p, m) = (x + y, x - y);
    let rem = frequency_average(profile, |a| f_remainder(p, a) - f_remainder(m, a));
    let u0 = profile.at_zero();
    let uu = profile.l2_norm_sq();
    rem - u0 * (p.cos() - m.cos()) - 0.5 * uu * ((2.0 * p).cos() - (2.0 * m).cos())
}

/// The three parts of the limiting variance of `sqrt(b/n) N_n[phi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBreakdown {
    pub kernel_term: f64,
    pub kappa4_term: f64,
    pub u0_term: f64,
    pub total: f64,
}

/// Agreement required between successive cosine-grid refinements.
const VARIANCE_RTOL: f64 = 1e-7;
const VARIANCE_MAX_GRID: usize = 1 << 15;

/// `A_m = int_0^pi phi(2 cos x) cos(m x) dx` for `m = 0..=grid`, by the
/// trapezoid rule on `grid + 1` equispaced nodes (an even FFT).
fn cosine_coefficients(
    phi: &TestFunction,
    grid: usize,
    planner: &mut FftPlanner<f64>,
) -> Result<Vec<f64>> {
    let mut samples = Vec::with_capacity(grid + 1);
    for j in 0..=grid {
        let v = phi.try_eval(2.0 * (PI * j as f64 / grid as f64).cos())?;
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{phi} is not finite on [-2, 2]"
            )));
        }
        samples.push(v);
    }
    let len = 2 * grid;
    let mut buf: Vec<Complex64> = (0..len)
        .map(|j| Complex64::new(samples[if j <= grid { j } else { len - j }], 0.0))
        .collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let h = PI / len as f64;
    Ok(buf[..=grid].iter().map(|v| v.re * h).collect())
}

/// Limiting variance for test function `phi`:
/// `kernel_term = pi^{-2} sum_m 2 m c_m A_m^2`,
/// `kappa4_term = (u, u) kappa4 pi^{-2} A_2^2`,
/// `u0_term = u(0) (2 pi^2)^{-1} A_1^2`, with the cosine coefficients
/// `A_m` of `x -> phi(2 cos x)` on `(0, pi)`.
pub fn clt_variance(
    phi: &TestFunction,
    profile: &BandProfile,
    kappa4: f64,
) -> Result<VarianceBreakdown> {
    if !kappa4.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kappa4 must be finite, got {kappa4}"
        )));
    }
    let mut planner = FftPlanner::new();
    let mut grid = 32;
    let mut previous: Option<VarianceBreakdown> = None;
    loop {
        let a = cosine_coefficients(phi, grid, &mut planner)?;
        let m_max = grid / 2;
        let c = profile_moments(profile, m_max);
        let kernel_term = (1..=m_max)
            .map(|m| 2.0 * m as f64 * c[m] * a[m] * a[m])
            .sum::<f64>()
            / (PI * PI);
        let kappa4_term = profile.l2_norm_sq() * kappa4 * a[2] * a[2] / (PI * PI);
        let u0_term = profile.at_zero() * a[1] * a[1] / (2.0 * PI * PI);
        let current = VarianceBreakdown {
            kernel_term,
            kappa4_term,
            u0_term,
            total: kernel_term + kappa4_term + u0_term,
        };
        if let Some(p) = previous {
            let close =
                |x: f64, y: f64| (x - y).abs() <= VARIANCE_RTOL * x.abs().max(y.abs()) + 1e-14;
            if close(p.kernel_term, current.kernel_term)
                && close(p.kappa4_term, current.kappa4_term)
                && close(p.u0_term, current.u0_term)
            {
                return Ok(current);
            }
        }
        if grid >= VARIANCE_MAX_GRID {
            return Err(Error::QuadratureFailure(format!(
                "variance of {phi} unsettled at cosine grid {grid}"
            )));
        }
        previous = Some(current);
        grid *= 2;
    }
}

/// `log(1 - x) + x + x^2 / 2`.
fn log1m_rem2(x: Complex64) -> Complex64 {
    if x.norm_sqr() < 0.0625 {
        let mut p = x * x * x;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut m = 3.0;
        while p.norm_sqr() > 1e-36 * (1.0 + sum.norm_sqr()) {
            sum -= p / m;
            p *= x;
            m += 1.0;
        }
        return sum;
    }
    (1.0 - x).ln() + x + x * x * 0.5
}

/// `(1 - x)^{-2} - 1 - 2x`.
fn inv2_rem(x: Complex64) -> Complex64 {
    let d = 1.0 - x;
    x * x * (3.0 - 2.0 * x) / (d * d)
}

fn resolvent_pair(z1: Complex64, z2: Complex64) -> Result<(Complex64, Complex64)> {
    for z in [z1, z2] {
        if z.im == 0.0 {
            return Err(Error::RealArgument { re: z.re, im: z.im });
        }
    }
    let g1 = stieltjes_g(z1)?;
    let g2 = stieltjes_g(z2)?;
    let w = g1 * g2;
    if w.norm() >= 1.0 {
        return Err(Error::LogBranch(w.norm()));
    }
    Ok((g1, g2))
}

/// `H(w) = -2 (2 pi)^{-1} int log(1 - w u_hat) dk - w u(0) + kappa4 w^2`.
/// The limiting covariance of resolvent traces is the mixed derivative of
/// `H(g(z1) g(z2))`.
pub fn covariance_bracket(w: Complex64, profile: &BandProfile, kappa4: f64) -> Result<Complex64> {
    if w.norm() >= 1.0 {
        return Err(Error::LogBranch(w.norm()));
    }
    let rem: Complex64 = frequency_average(profile, |a| log1m_rem2(w * a));
    Ok(-2.0 * rem + w * profile.at_zero() + w * w * (profile.l2_norm_sq() + kappa4))
}

/// `d/dw [w H'(w)]`-type combination `w H''(w) + H'(w)`.
fn bracket_mixed_factor(w: Complex64, profile: &BandProfile, kappa4: f64) -> Complex64 {
    let rem: Complex64 = frequency_average(profile, |a| inv2_rem(w * a) * (2.0 * a));
    let u0 = profile.at_zero();
    rem + u0 + w * (4.0 * profile.l2_norm_sq() + 4.0 * kappa4)
}

/// Limiting covariance `C(z1, z2)` of `sqrt(b/n)`-scaled resolvent traces:
/// `g'(z1) g'(z2) [w H''(w) + H'(w)]` at `w = g(z1) g(z2)`.
pub fn covariance_resolvents(
    z1: Complex64,
    z2: Complex64,
    profile: &BandProfile,
    kappa4: f64,
) -> Result<Complex64> {
    let (g1, g2) = resolvent_pair(z1, z2)?;
    let gp = |g: Complex64| g * g / (1.0 - g * g);
    Ok(gp(g1) * gp(g2) * bracket_mixed_factor(g1 * g2, profile, kappa4))
}

fn eta_combination<F: Fn(Complex64, Complex64) -> Result<Complex64>>(
    l1: f64,
    l2: f64,
    eta: f64,
    cov: F,
) -> Result<Complex64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let up = |l: f64| Complex64::new(l, eta);
    let down = |l: f64| Complex64::new(l, -eta);
    let sum = cov(up(l1), down(l2))? + cov(down(l1), up(l2))?
        - cov(up(l1), up(l2))?
        - cov(down(l1), down(l2))?;
    Ok(sum / (4.0 * PI * PI))
}

/// `C_eta(l1, l2)`, the limiting covariance density of Poisson-smoothed
/// statistics, with its (rounding-level) imaginary part.
pub fn covariance_eta_complex(
    l1: f64,
    l2: f64,
    eta: f64,
    profile: &BandProfile,
    kappa4: f64,
) -> Result<Complex64> {
    eta_combination(l1, l2, eta, |a, b| {
        covariance_resolvents(a, b, profile, kappa4)
    })
}

/// `(4 pi^2)^{-1} [C(l1+i eta, l2-i eta) + C(l1-i eta, l2+i eta)
///  - C(l1+i eta, l2+i eta) - C(l1-i eta, l2-i eta)]`.
pub fn covariance_eta(
    l1: f64,
    l2: f64,
    eta: f64,
    profile: &BandProfile,
    kappa4: f64,
) -> Result<f64> {
    covariance_eta_complex(l1, l2, eta, profile, kappa4).map(|c| c.re)
}

/// `C(z1, z2)` through the power series `w H'' + H' = sum_m 2 m c_m w^{m-1}
/// - u(0) + 4 kappa4 w`, for repeated evaluation at moderate `|w|`.
#[derive(Debug, Clone)]
pub struct CovarianceSeries {
    weights: Vec<f64>,
    u0: f64,
    c_bound: f64,
    kappa4: f64,
}

impl CovarianceSeries {
    pub fn new(profile: &BandProfile, kappa4: f64, terms: usize) -> Self {
        let c = profile_moments(profile, terms.max(2));
        let weights = (1..c.len()).map(|m| 2.0 * m as f64 * c[m]).collect();
        CovarianceSeries {
            weights,
            u0: profile.at_zero(),
            c_bound: profile.at_zero().max(profile.l2_norm_sq()),
            kappa4,
        }
    }

    /// Largest `|w|` at which the first dropped term stays below `tol`,
    /// using `|c_m| <= max(u(0), (u, u))`.
    pub fn radius(&self, tol: f64) -> f64 {
        let m = self.weights.len() as f64 + 1.0;
        (tol / (2.0 * m * self.c_bound)).powf(1.0 / m).min(1.0)
    }

    fn factor(&self, w: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.weights.iter().rev() {
            acc = acc * w + c;
        }
        acc - self.u0 + w * (4.0 * self.kappa4)
    }

    pub fn covariance(&self, z1: Complex64, z2: Complex64) -> Result<Complex64> {
        let (g1, g2) = resolvent_pair(z1, z2)?;
        let w = g1 * g2;
        if w.norm() > self.radius(1e-13) {
            return Err(Error::SeriesDivergence(self.weights.len()));
        }
        let gp = |g: Complex64| g * g / (1.0 - g * g);
        Ok(gp(g1) * gp(g2) * self.factor(w))
    }

    pub fn covariance_eta(&self, l1: f64, l2: f64, eta: f64) -> Result<f64> {
        eta_combination(l1, l2, eta, |a, b| self.covariance(a, b)).map(|c| c.re)
    }
}

/// The deterministic band operator `U_ik = b^{-1} u(|i - k| / b)` on
/// `1..=n`, and its restrictions to indices above `p`.
#[derive(Debug, Clone)]
pub struct FiniteNOperator {
    n: usize,
    b: f64,
    profile: BandProfile,
    /// `U` on its `d`-th diagonal.
    weights: Vec<f64>,
}

/// Values of the finite-n identity at one `zeta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteNSigma {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub limit: Complex64,
}

/// Neumann terms below this sup-norm are dropped.
const NEUMANN_TOL: f64 = 1e-12;
const NEUMANN_MAX_TERMS: usize = 100_000;

impl FiniteNOperator {
    pub const MAX_N: usize = 8192;

    pub fn new(n: usize, b: f64, profile: BandProfile) -> Result<Self> {
        if !(b.is_finite() && b >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "b must be at least 1, got {b}"
            )));
        }
        if n == 0 || n > Self::MAX_N {
            return Err(Error::InvalidParameter(format!(
                "n must lie in 1..={}, got {n}",
                Self::MAX_N
            )));
        }
        let w = (profile.support_radius() * b).floor() as usize;
        if w >= n {
            return Err(Error::BandTooWide {
                n,
                half_bandwidth: w,
            });
        }
        let weights = (0..=w).map(|d| profile.value(d as f64 / b) / b).collect();
        Ok(FiniteNOperator {
            n,
            b,
            profile,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn profile(&self) -> &BandProfile {
        &self.profile
    }

    pub fn half_bandwidth(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.weights.get(i.abs_diff(k)).copied().unwrap_or(0.0)
    }

    /// `max_i sum_k |U_ik|`.
    pub fn row_sum_norm(&self) -> f64 {
        let w = self.half_bandwidth();
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(w);
                let hi = (i + w).min(self.n - 1);
                (lo..=hi).map(|k| self.entry(i, k)).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_band_matrix(&self) -> BandMatrix {
        let diags = self
            .weights
            .iter()
            .enumerate()
            .map(|(d, &v)| vec![v; self.n - d])
            .collect();
        BandMatrix::from_diagonals(self.n, diags).expect("diagonal lengths match")
    }

    fn check_zeta(&self, zeta: Complex64) -> Result<()> {
        if !(zeta.norm() > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "|zeta| must exceed 1, got {}",
                zeta.norm()
            )));
        }
        Ok(())
    }

    /// `(zeta n)^{-1} sum_p b^{-1} ((zeta - U^(p))^{-1} u^(p), u^(p))` with
    /// `u^(p)_i = 1_{i>p} u(|p - i| / b)`; each solve is a Neumann series
    /// truncated once a term drops below `1e-12` in sup-norm, leaving an
    /// error of at most that times `q / (1 - q)`, `q = ||U|| / |zeta|`.
    pub fn lhs(&self, zeta: Complex64) -> Result<Complex64> {
        self.check_zeta(zeta)?;
        let n = self.n;
        let w = self.half_bandwidth();
        let inv = zeta.inv();
        let mut total = Complex64::new(0.0, 0.0);
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        let (mut nre, mut nim) = (vec![0.0; n], vec![0.0; n]);
        for p in 0..n {
            let lo = p + 1;
            let mut hi = (p + w + 1).min(n);
            if lo >= hi {
                continue;
            }
            // t_0 = u^(p) / zeta
            for i in lo..hi {
                let t = inv * (self.profile.value((i - p) as f64 / self.b));
                re[i] = t.re;
                im[i] = t.im;
            }
            let u_p = |i: usize| self.profile.value((i - p) as f64 / self.b);
            let mut dot = Complex64::new(0.0, 0.0);
            let mut terms = 0;
            loop {
                let mut sup = 0.0f64;
                for i in lo..(p + w + 1).min(n) {
                    dot += Complex64::new(re[i], im[i]) * u_p(i);
                }
                for i in lo..hi {
                    sup = sup.max(re[i].abs().max(im[i].abs()));
                }
                if sup < NEUMANN_TOL {
                    break;
                }
                terms += 1;
                if terms > NEUMANN_MAX_TERMS {
                    return Err(Error::SeriesDivergence(NEUMANN_MAX_TERMS));
                }
                // t <- U^(p) t / zeta, support grows by w
                let new_hi = (hi + w).min(n);
                for i in lo..new_hi {
                    let k0 = i.saturating_sub(w).max(lo);
                    let k1 = (i + w + 1).min(hi);
                    let (mut sr, mut si) = (0.0, 0.0);
                    for k in k0..k1 {
                        let c = self.weights[i.abs_diff(k)];
                        sr += c * re[k];
                        si += c * im[k];
                    }
                    let t = inv * Complex64::new(sr, si);
                    nre[i] = t.re;
                    nim[i] = t.im;
                }
                std::mem::swap(&mut re, &mut nre);
                std::mem::swap(&mut im, &mut nim);
                hi = new_hi;
            }
            total += dot / self.b;
            re[lo..hi].iter_mut().for_each(|v| *v = 0.0);
            im[lo..hi].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(total * inv / n as f64)
    }

    /// `-(b/n) (Tr log(1 - U/zeta) + Tr U / zeta)`, traced through the
    /// eigenvalues of `U`.
    pub fn rhs(&self, zeta: Complex64) -> Result<Complex64> {
        self.check_zeta(zeta)?;
        let spectrum = eigenvalues(&self.to_band_matrix())?;
        let inv = zeta.inv();
        let mut sum = Complex64::new(0.0, 0.0);
        for &mu in spectrum.eigenvalues() {
            let x = inv * mu;
            if x.norm() >= 1.0 {
                return Err(Error::SeriesDivergence(0));
            }
            sum += (1.0 - x).ln() + x;
        }
        Ok(-sum * (self.b / self.n as f64))
    }

    /// `-(2 pi)^{-1} int log(1 - u_hat / zeta) dk - u(0) / zeta`.
    pub fn limit(&self, zeta: Complex64) -> Result<Complex64> {
        self.check_zeta(zeta)?;
        Ok(sigma_limit(&self.profile, zeta))
    }
}

fn sigma_limit(profile: &BandProfile, zeta: Complex64) -> Complex64 {
    let w = zeta.inv();
    let rem: Complex64 = frequency_average(profile, |a| log1m_rem2(w * a));
    w * w * (0.5 * profile.l2_norm_sq()) - rem
}

pub fn finite_n_sigma(op: &FiniteNOperator, zeta: Complex64) -> Result<FiniteNSigma> {
    Ok(FiniteNSigma {
        lhs: op.lhs(zeta)?,
        rhs: op.rhs(zeta)?,
        limit: op.limit(zeta)?,
    })
}
