//! Test functions and linear eigenvalue statistics.
//!
//! For a spectrum `lambda_1..lambda_n` and a test function `phi` the linear
//! statistic is `N_n[phi] = sum_j phi(lambda_j)`. Poisson smoothing replaces
//! `phi` by `phi_eta = phi * P_eta` with `P_eta(x) = eta / (pi (x^2 + eta^2))`,
//! and then `N_n[phi_eta]` has the resolvent representation
//! `pi^{-1} int phi(l) Im Tr (M - l - i eta)^{-1} dl`.
//!
//! Fourier transforms follow `phi_hat(k) = int e^{ikx} phi(x) dx`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bandeig::Spectrum;
use crate::error::{Error, Result};
use crate::quadrature::Adaptive;
use crate::rng::replica_seed;

/// Pointwise tolerance of Poisson smoothing.
pub const SMOOTHING_TOL: f64 = 1e-9;

/// Default Sobolev index for admissibility reports.
pub const DEFAULT_SOBOLEV_INDEX: f64 = 2.5;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `sum_m c_m x^m`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// `exp(-(x - center)^2 / (2 width^2))`.
    GaussianBump { center: f64, width: f64 },
    /// `exp(-1 / (1 - t^2))` for `|t| < 1`, `t = (x - center) / radius`.
    SmoothBump { center: f64, radius: f64 },
    /// `P_eta(x - center)`.
    PoissonKernel { center: f64, eta: f64 },
    /// `base * P_eta`.
    PoissonSmoothed { base: Box<TestFunction>, eta: f64 },
    /// `sum_i a_i phi_i`.
    Linear(Vec<(f64, TestFunction)>),
}

/// Interval outside which a function is negligible, and whether it decays
/// only algebraically there.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Support {
    lo: f64,
    hi: f64,
    heavy_tail: bool,
}

impl Support {
    fn union(self, other: Support) -> Support {
        Support {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            heavy_tail: self.heavy_tail || other.heavy_tail,
        }
    }
}

/// Gaussian bumps are cut where they fall below `exp(-72)`.
const GAUSS_CUT: f64 = 12.0;
/// Core half-width of a Poisson kernel in units of `eta`.
const POISSON_CORE: f64 = 50.0;

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Polynomial(vec![c])
    }

    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = 1.0;
        TestFunction::Polynomial(c)
    }

    pub fn gaussian_bump(center: f64, width: f64) -> Result<Self> {
        finite("center", center)?;
        positive("width", width)?;
        Ok(TestFunction::GaussianBump { center, width })
    }

    pub fn smooth_bump(center: f64, radius: f64) -> Result<Self> {
        finite("center", center)?;
        positive("radius", radius)?;
        Ok(TestFunction::SmoothBump { center, radius })
    }

    pub fn poisson_kernel(center: f64, eta: f64) -> Result<Self> {
        finite("center", center)?;
        positive("eta", eta)?;
        Ok(TestFunction::PoissonKernel { center, eta })
    }

    /// Checks parameters recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::Polynomial(c) => c
                .iter()
                .try_for_each(|&v| finite("polynomial coefficient", v)),
            TestFunction::GaussianBump { center, width } => {
                finite("center", *center)?;
                positive("width", *width)
            }
            TestFunction::SmoothBump { center, radius } => {
                finite("center", *center)?;
                positive("radius", *radius)
            }
            TestFunction::PoissonKernel { center, eta } => {
                finite("center", *center)?;
                positive("eta", *eta)
            }
            TestFunction::PoissonSmoothed { base, eta } => {
                positive("eta", *eta)?;
                base.validate()?;
                if !base.is_integrable() {
                    return Err(Error::NotIntegrable(base.to_string()));
                }
                Ok(())
            }
            TestFunction::Linear(terms) => terms.iter().try_for_each(|(a, f)| {
                finite("coefficient", *a)?;
                f.validate()
            }),
        }
    }

    /// `true` unless a nonzero polynomial part is present.
    pub fn is_integrable(&self) -> bool {
        match self {
            TestFunction::Polynomial(c) => c.iter().all(|&v| v == 0.0),
            TestFunction::Linear(terms) => {
                terms.iter().all(|(a, f)| *a == 0.0 || f.is_integrable())
            }
            _ => true,
        }
    }

    /// Value at `x`. Smoothed functions are integrated numerically.
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        match self {
            TestFunction::PoissonSmoothed { base, eta } => smoothed_value(base, *eta, x),
            TestFunction::Linear(terms) => terms
                .iter()
                .try_fold(0.0, |acc, (a, f)| Ok(acc + a * f.try_eval(x)?)),
            _ => Ok(self.eval_closed(x)),
        }
    }

    /// Value at `x`; `NaN` if a smoothing quadrature fails.
    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }

    fn eval_closed(&self, x: f64) -> f64 {
        match self {
            TestFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &v| acc * x + v),
            TestFunction::GaussianBump { center, width } => {
                let t = (x - center) / width;
                (-0.5 * t * t).exp()
            }
            TestFunction::SmoothBump { center, radius } => {
                let t = (x - center) / radius;
                let q = 1.0 - t * t;
                if q <= 0.0 {
                    0.0
                } else {
                    (-1.0 / q).exp()
                }
            }
            TestFunction::PoissonKernel { center, eta } => poisson_value(x - center, *eta),
            TestFunction::PoissonSmoothed { .. } | TestFunction::Linear(_) => {
                unreachable!("handled by try_eval")
            }
        }
    }

    /// `x -> self(x - c)`.
    pub fn shifted(&self, c: f64) -> TestFunction {
        match self {
            TestFunction::Polynomial(coef) => {
                // Horner in the variable (x - c)
                let mut out = vec![0.0; coef.len()];
                for &a in coef.iter().rev() {
                    let mut next = vec![0.0; coef.len()];
                    for (m, &v) in out.iter().enumerate() {
                        if m + 1 < next.len() {
                            next[m + 1] += v;
                        }
                        next[m] -= c * v;
                    }
                    next[0] += a;
                    out = next;
                }
                TestFunction::Polynomial(out)
            }
            TestFunction::GaussianBump { center, width } => TestFunction::GaussianBump {
                center: center + c,
                width: *width,
            },
            TestFunction::SmoothBump { center, radius } => TestFunction::SmoothBump {
                center: center + c,
                radius: *radius,
            },
            TestFunction::PoissonKernel { center, eta } => TestFunction::PoissonKernel {
                center: center + c,
                eta: *eta,
            },
            TestFunction::PoissonSmoothed { base, eta } => TestFunction::PoissonSmoothed {
                base: Box::new(base.shifted(c)),
                eta: *eta,
            },
            TestFunction::Linear(terms) => {
                TestFunction::Linear(terms.iter().map(|(a, f)| (*a, f.shifted(c))).collect())
            }
        }
    }

    fn support(&self) -> Option<Support> {
        match self {
            TestFunction::Polynomial(_) => self.is_integrable().then_some(Support {
                lo: 0.0,
                hi: 0.0,
                heavy_tail: false,
            }),
            TestFunction::GaussianBump { center, width } => Some(Support {
                lo: center - GAUSS_CUT * width,
                hi: center + GAUSS_CUT * width,
                heavy_tail: false,
            }),
            TestFunction::SmoothBump { center, radius } => Some(Support {
                lo: center - radius,
                hi: center + radius,
                heavy_tail: false,
            }),
            TestFunction::PoissonKernel { center, eta } => Some(Support {
                lo: center - POISSON_CORE * eta,
                hi: center + POISSON_CORE * eta,
                heavy_tail: true,
            }),
            TestFunction::PoissonSmoothed { base, eta } => base.support().map(|s| Support {
                lo: s.lo - POISSON_CORE * eta,
                hi: s.hi + POISSON_CORE * eta,
                heavy_tail: true,
            }),
            TestFunction::Linear(terms) => terms
                .iter()
                .filter(|(a, _)| *a != 0.0)
                .map(|(_, f)| f.support())
                .try_fold(None, |acc: Option<Support>, s| {
                    let s = s?;
                    Some(Some(match acc {
                        Some(a) => a.union(s),
                        None => s,
                    }))
                })
                .map(|s| {
                    s.unwrap_or(Support {
                        lo: 0.0,
                        hi: 0.0,
                        heavy_tail: false,
                    })
                }),
        }
    }

    /// Natural breakpoints for quadrature.
    fn features(&self, out: &mut Vec<f64>) {
        match self {
            TestFunction::Polynomial(_) => {}
            TestFunction::GaussianBump { center, width } => {
                out.extend([center - 3.0 * width, *center, center + 3.0 * width])
            }
            TestFunction::SmoothBump { center, radius } => {
                out.extend([center - radius, *center, center + radius])
            }
            TestFunction::PoissonKernel { center, eta } => out.extend([
                center - 10.0 * eta,
                center - eta,
                *center,
                center + eta,
                center + 10.0 * eta,
            ]),
            TestFunction::PoissonSmoothed { base, eta } => {
                base.features(out);
                if let Some(s) = base.support() {
                    out.extend([s.lo - 10.0 * eta, s.hi + 10.0 * eta]);
                }
            }
            TestFunction::Linear(terms) => terms.iter().for_each(|(_, f)| f.features(out)),
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn poisson_value(x: f64, eta: f64) -> f64 {
    eta / (PI * (x * x + eta * eta))
}

/// `P_eta(lambda) = eta / (pi (lambda^2 + eta^2))`.
pub fn poisson_kernel(lambda: f64, eta: f64) -> Result<f64> {
    positive("eta", eta)?;
    Ok(poisson_value(lambda, eta))
}

/// `phi_eta = phi * P_eta`. Nested smoothings collapse by the semigroup law.
pub fn poisson_smooth(phi: &TestFunction, eta: f64) -> Result<TestFunction> {
    positive("eta", eta)?;
    phi.validate()?;
    if !phi.is_integrable() {
        return Err(Error::NotIntegrable(phi.to_string()));
    }
    Ok(match phi {
        TestFunction::PoissonSmoothed { base, eta: inner } => TestFunction::PoissonSmoothed {
            base: base.clone(),
            eta: inner + eta,
        },
        _ => TestFunction::PoissonSmoothed {
            base: Box::new(phi.clone()),
            eta,
        },
    })
}

/// Integral of `f` over the real line, where `f` is negligible outside
/// `support` apart from algebraic tails when `support.heavy_tail`.
fn integrate_line<F: Fn(f64) -> f64>(
    f: F,
    support: Support,
    mut breaks: Vec<f64>,
    tail_scale: f64,
    quad: &Adaptive,
) -> Result<f64> {
    breaks.retain(|b| b.is_finite() && *b > support.lo && *b < support.hi);
    breaks.push(support.lo);
    breaks.push(support.hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = quad.integrate_with_breaks(&f, &breaks)?.value;
    if support.heavy_tail {
        total += quad.integrate_tail(&f, support.hi, tail_scale, true)?.value;
        total += quad
            .integrate_tail(&f, support.lo, tail_scale, false)?
            .value;
    }
    Ok(total)
}

fn smoothed_value(base: &TestFunction, eta: f64, x: f64) -> Result<f64> {
    if let TestFunction::Linear(terms) = base {
        return terms
            .iter()
            .try_fold(0.0, |acc, (a, f)| Ok(acc + a * smoothed_value(f, eta, x)?));
    }
    let s = base
        .support()
        .ok_or_else(|| Error::NotIntegrable(base.to_string()))?;
    if s.lo == s.hi {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    base.features(&mut breaks);
    breaks.extend([
        x - 100.0 * eta,
        x - 10.0 * eta,
        x - eta,
        x,
        x + eta,
        x + 10.0 * eta,
        x + 100.0 * eta,
    ]);
    let tail_scale = (s.hi - s.lo).max(eta);
    let quad = Adaptive::with_abs_tol(SMOOTHING_TOL * 0.25);
    integrate_line(
        |y| {
            let v = base.try_eval(y).unwrap_or(f64::NAN);
            v * poisson_value(x - y, eta)
        },
        s,
        breaks,
        tail_scale,
        &quad,
    )
}

/// `N_n[phi] = sum_j phi(lambda_j)`.
pub fn evaluate_les(s: &Spectrum, phi: &TestFunction) -> Result<f64> {
    s.eigenvalues()
        .iter()
        .try_fold(0.0, |acc, &l| Ok(acc + phi.try_eval(l)?))
}

/// One realization of `sqrt(b/n) (N_n[phi] - E N_n[phi])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationSample {
    pub value: f64,
    pub replica_id: u64,
    pub seed: u64,
}

/// Centers `values` by their empirical mean and scales by `sqrt(b/n)`.
/// Entry `r` is attributed to replica `r` of `master_seed`.
pub fn center_scale(
    values: &[f64],
    b: f64,
    n: usize,
    master_seed: u64,
) -> Result<Vec<FluctuationSample>> {
    if values.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "centering needs at least 2 replicas, got {}",
            values.len()
        )));
    }
    positive("b", b)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let scale = (b / n as f64).sqrt();
    Ok(values
        .iter()
        .enumerate()
        .map(|(r, &v)| FluctuationSample {
            value: scale * (v - mean),
            replica_id: r as u64,
            seed: replica_seed(master_seed, r as u64),
        })
        .collect())
}

/// `pi^{-1} int phi(l) Im gamma_n(l + i eta) dl`.
pub fn resolvent_les(s: &Spectrum, phi: &TestFunction, eta: f64) -> Result<f64> {
    positive("eta", eta)?;
    phi.validate()?;
    let support = phi
        .support()
        .ok_or_else(|| Error::NotIntegrable(phi.to_string()))?;
    if support.lo == support.hi {
        return Ok(0.0);
    }
    let ev = s.eigenvalues();
    let im_gamma = |l: f64| {
        ev.iter()
            .map(|&x| eta / ((x - l) * (x - l) + eta * eta))
            .sum::<f64>()
    };
    let mut breaks = Vec::new();
    phi.features(&mut breaks);
    if let (Some(&first), Some(&last)) = (ev.first(), ev.last()) {
        breaks.extend([first - eta, last + eta]);
    }
    let quad = Adaptive {
        abs_tol: SMOOTHING_TOL * 0.25,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    };
    let tail_scale = (support.hi - support.lo).max(eta);
    let total = integrate_line(
        |l| phi.try_eval(l).unwrap_or(f64::NAN) * im_gamma(l),
        support,
        breaks,
        tail_scale,
        &quad,
    )?;
    Ok(total / PI)
}

/// Fourier transform on `k_m = pi m / half_width`, `m = 0..=points/2`, from
/// `points` samples on `[-half_width, half_width)`. Poisson factors are
/// applied analytically.
fn transform_on_grid(
    phi: &TestFunction,
    half_width: f64,
    points: usize,
    planner: &mut FftPlanner<f64>,
) -> Vec<Complex64> {
    let modes = points / 2 + 1;
    let k = |m: usize| PI * m as f64 / half_width;
    match phi {
        TestFunction::Polynomial(_) => vec![Complex64::new(0.0, 0.0); modes],
        TestFunction::PoissonKernel { center, eta } => (0..modes)
            .map(|m| Complex64::from_polar((-eta * k(m)).exp(), k(m) * center))
            .collect(),
        TestFunction::PoissonSmoothed { base, eta } => {
            let mut t = transform_on_grid(base, half_width, points, planner);
            for (m, v) in t.iter_mut().enumerate() {
                *v *= (-eta * k(m)).exp();
            }
            t
        }
        TestFunction::Linear(terms) => {
            let mut out = vec![Complex64::new(0.0, 0.0); modes];
            for (a, f) in terms.iter().filter(|(a, _)| *a != 0.0) {
                for (o, v) in out
                    .iter_mut()
                    .zip(transform_on_grid(f, half_width, points, planner))
                {
                    *o += v * *a;
                }
            }
            out
        }
        TestFunction::GaussianBump { .. } | TestFunction::SmoothBump { .. } => {
            let h = 2.0 * half_width / points as f64;
            let mut buf: Vec<Complex64> = (0..points)
                .map(|j| Complex64::new(phi.eval_closed(-half_width + j as f64 * h), 0.0))
                .collect();
            // the inverse transform carries the e^{+ikx} sign
            planner.plan_fft_inverse(points).process(&mut buf);
            buf.truncate(modes);
            for (m, v) in buf.iter_mut().enumerate() {
                let sign = if m % 2 == 0 { h } else { -h };
                *v *= sign;
            }
            buf
        }
    }
}

/// `int_0^inf f` from samples `f(m h)` by the trapezoid rule with Gregory
/// end corrections at zero; the far end must be negligible.
fn gregory_half_line(samples: &[f64], h: f64) -> f64 {
    let trap = samples.iter().sum::<f64>() - 0.5 * samples[0];
    let mut diffs = samples[..samples.len().min(6)].to_vec();
    let coef = [
        1.0 / 12.0,
        -1.0 / 24.0,
        19.0 / 720.0,
        -3.0 / 160.0,
        863.0 / 60480.0,
    ];
    let mut correction = 0.0;
    for c in coef {
        if diffs.len() < 2 {
            break;
        }
        diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        correction += c * diffs[0];
    }
    h * (trap + correction)
}

/// Relative agreement required between successive grid refinements.
const SOBOLEV_RTOL: f64 = 1e-6;
const SOBOLEV_MAX_POINTS: usize = 1 << 24;

/// `(int (1 + 2|k|)^{2s} |phi_hat(k)|^2 dk)^{1/2}`.
pub fn sobolev_norm(phi: &TestFunction, s: f64) -> Result<f64> {
    positive("Sobolev index", s)?;
    phi.validate()?;
    let support = phi
        .support()
        .ok_or_else(|| Error::NotIntegrable(phi.to_string()))?;
    let mut widths = Vec::new();
    smallest_scales(phi, &mut widths);
    if widths.is_empty() {
        return Ok(0.0);
    }
    let finest = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let mut half_width = 2.0 * support.lo.abs().max(support.hi.abs()).max(finest);
    let mut points = ((2.0 * half_width) / (finest / 8.0)).ceil().max(64.0) as usize;
    points = points.next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut previous: Option<f64> = None;
    loop {
        let t = transform_on_grid(phi, half_width, points, &mut planner);
        let dk = PI / half_width;
        let f: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(m, v)| (1.0 + 2.0 * m as f64 * dk).powf(2.0 * s) * v.norm_sqr())
            .collect();
        let norm = (2.0 * gregory_half_line(&f, dk)).max(0.0).sqrt();
        if let Some(p) = previous {
            if (norm - p).abs() <= SOBOLEV_RTOL * norm.max(p) {
                return Ok(norm);
            }
        }
        if points * 4 > SOBOLEV_MAX_POINTS {
            return Err(Error::QuadratureFailure(format!(
                "Sobolev norm did not settle; last two values {norm} and {previous:?}"
            )));
        }
        previous = Some(norm);
        half_width *= 2.0;
        points *= 4;
    }
}

fn smallest_scales(phi: &TestFunction, out: &mut Vec<f64>) {
    match phi {
        TestFunction::Polynomial(_) => {}
        TestFunction::GaussianBump { width, .. } => out.push(*width),
        TestFunction::SmoothBump { radius, .. } => out.push(*radius / 4.0),
        TestFunction::PoissonKernel { eta, .. } => out.push(*eta),
        TestFunction::PoissonSmoothed { base, eta } => {
            let mut inner = Vec::new();
            smallest_scales(base, &mut inner);
            if !inner.is_empty() {
                out.push(*eta);
                out.extend(inner);
            }
        }
        TestFunction::Linear(terms) => terms
            .iter()
            .filter(|(a, _)| *a != 0.0)
            .for_each(|(_, f)| smallest_scales(f, out)),
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Polynomial(c) if c.len() == 1 => write!(f, "const:{}", c[0]),
            TestFunction::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            TestFunction::GaussianBump { center, width } => write!(f, "gauss:{center},{width}"),
            TestFunction::SmoothBump { center, radius } => write!(f, "bump:{center},{radius}"),
            TestFunction::PoissonKernel { center, eta } => write!(f, "poisson:{center},{eta}"),
            TestFunction::PoissonSmoothed { base, eta } => write!(f, "smooth:{eta}|{base}"),
            TestFunction::Linear(terms) => {
                let parts: Vec<String> = terms.iter().map(|(a, t)| format!("{a}*{t}")).collect();
                write!(f, "{}", parts.join(" + "))
            }
        }
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `poly:c0,c1,..`, `const:c`, `gauss:center,width`, `bump:center,radius`,
    /// `poisson:center,eta`, `smooth:eta|<function>`, and sums
    /// `a*<function> + b*<function>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |msg: &str| Error::InvalidParameter(format!("test function {s:?}: {msg}"));
        if let Some(rest) = s.strip_prefix("smooth:") {
            let (eta, base) = rest
                .split_once('|')
                .ok_or_else(|| bad("expected smooth:eta|<function>"))?;
            let eta: f64 = eta.trim().parse().map_err(|_| bad("bad eta"))?;
            return poisson_smooth(&base.parse()?, eta);
        }
        if s.contains(" + ") {
            let terms = s
                .split(" + ")
                .map(|t| {
                    let t = t.trim();
                    match t.split_once('*') {
                        Some((a, f)) if !a.contains(':') => Ok((
                            a.trim()
                                .parse::<f64>()
                                .map_err(|_| bad("bad coefficient"))?,
                            f.parse()?,
                        )),
                        _ => Ok((1.0, t.parse()?)),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(TestFunction::Linear(terms));
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| bad("expected family:parameters"))?;
        let nums = args
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad number")))
            .collect::<Result<Vec<f64>>>()?;
        let two = |nums: &[f64]| -> Result<(f64, f64)> {
            match nums {
                [a, b] => Ok((*a, *b)),
                _ => Err(bad("expected two parameters")),
            }
        };
        let phi = match name.trim() {
            "poly" => TestFunction::Polynomial(nums),
            "const" => match nums[..] {
                [c] => TestFunction::constant(c),
                _ => return Err(bad("expected one parameter")),
            },
            "gauss" => {
                let (c, w) = two(&nums)?;
                TestFunction::gaussian_bump(c, w)?
            }
            "bump" => {
                let (c, r) = two(&nums)?;
                TestFunction::smooth_bump(c, r)?
            }
            "poisson" => {
                let (c, e) = two(&nums)?;
                TestFunction::poisson_kernel(c, e)?
            }
            other => return Err(bad(&format!("unknown family {other:?}"))),
        };
        phi.validate()?;
        Ok(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(v: &[f64]) -> Spectrum {
        Spectrum::from_unsorted(v.to_vec()).unwrap()
    }

    #[test]
    fn counting_and_trace_identities() {
        let s = spectrum(&[-1.5, 0.25, 0.5, 2.0]);
        assert_eq!(evaluate_les(&s, &TestFunction::constant(1.0)).unwrap(), 4.0);
        let sq = evaluate_les(&s, &TestFunction::monomial(2)).unwrap();
        assert!((sq - (2.25 + 0.0625 + 0.25 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn centering_examples() {
        let out = center_scale(&[0.0, 2.0], 1.0, 4, 9).unwrap();
        assert_eq!(out[0].value, -0.5);
        assert_eq!(out[1].value, 0.5);
        assert_eq!(out[1].replica_id, 1);
        assert_eq!(out[1].seed, replica_seed(9, 1));
        assert!(center_scale(&[3.0; 5], 2.0, 8, 0)
            .unwrap()
            .iter()
            .all(|f| f.value == 0.0));
        assert!(center_scale(&[1.0], 1.0, 4, 0).is_err());
        let vals: Vec<f64> = (0..101)
            .map(|i| (i as f64 * 0.37).sin() * 10.0 + 3.0)
            .collect();
        let mean: f64 = center_scale(&vals, 4.0, 64, 0)
            .unwrap()
            .iter()
            .map(|f| f.value)
            .sum::<f64>()
            / 101.0;
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn poisson_kernel_values() {
        assert!((poisson_kernel(0.0, 1.0).unwrap() - 1.0 / PI).abs() < 1e-16);
        assert!((poisson_kernel(0.3, 0.3).unwrap() - 1.0 / (2.0 * PI * 0.3)).abs() < 1e-15);
        assert!(poisson_kernel(0.0, 0.0).is_err());
        let phi = TestFunction::poisson_kernel(0.0, 0.7).unwrap();
        let q = Adaptive::with_abs_tol(1e-11);
        let mass = q
            .integrate_real_line(|x| phi.eval(x), 0.0, 0.7)
            .unwrap()
            .value;
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smoothing_semigroup() {
        let phi = TestFunction::poisson_kernel(0.2, 0.15).unwrap();
        // build the smoothed function directly so the semigroup collapse
        // is not what gets tested
        let sm = TestFunction::PoissonSmoothed {
            base: Box::new(phi),
            eta: 0.1,
        };
        for x in [-3.0, -0.4, 0.0, 0.2, 0.35, 1.0, 7.5] {
            let want = poisson_value(x - 0.2, 0.25);
            assert!(
                (sm.eval(x) - want).abs() < 1e-8,
                "x={x}: {} vs {want}",
                sm.eval(x)
            );
        }
    }

    #[test]
    fn smoothing_approximate_identity() {
        let phi = TestFunction::gaussian_bump(0.3, 0.5).unwrap();
        let sm = poisson_smooth(&phi, 1e-4).unwrap();
        for x in [-0.5, 0.0, 0.3, 0.9] {
            assert!((sm.eval(x) - phi.eval(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn smoothing_rejects_polynomials() {
        assert!(matches!(
            poisson_smooth(&TestFunction::monomial(2), 0.1),
            Err(Error::NotIntegrable(_))
        ));
        assert!(poisson_smooth(&TestFunction::smooth_bump(0.0, 1.0).unwrap(), 0.0).is_err());
        assert!("smooth:0.1|poly:0,1".parse::<TestFunction>().is_err());
    }

    #[test]
    fn resolvent_single_eigenvalue() {
        let s = spectrum(&[0.0]);
        let phi = TestFunction::poisson_kernel(0.0, 0.3).unwrap();
        let got = resolvent_les(&s, &phi, 0.2).unwrap();
        assert!((got - 1.0 / (PI * 0.5)).abs() < 1e-8);
    }

    #[test]
    fn resolvent_matches_smoothed_statistic() {
        let s = spectrum(&[-1.9, -1.2, -0.3, 0.0, 0.1, 0.8, 1.7, 2.05]);
        let phi = TestFunction::smooth_bump(0.1, 1.5).unwrap();
        for eta in [0.1, 0.3] {
            let a = resolvent_les(&s, &phi, eta).unwrap();
            let b = evaluate_les(&s, &poisson_smooth(&phi, eta).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-6, "eta={eta}: {a} vs {b}");
            assert!(a > 0.0);
        }
    }

    #[test]
    fn gregory_on_exponential() {
        let h = 0.1;
        let samples: Vec<f64> = (0..600).map(|m| (-(m as f64) * h).exp()).collect();
        assert!((gregory_half_line(&samples, h) - 1.0).abs() < 1e-9);
    }

    fn gaussian_norm_oracle(s: f64) -> f64 {
        let q = Adaptive {
            abs_tol: 1e-13,
            rel_tol: 1e-14,
            max_intervals: 1000,
        };
        let half = q
            .integrate(
                |k| (1.0 + 2.0 * k).powf(2.0 * s) * (-k * k).exp(),
                0.0,
                40.0,
            )
            .unwrap()
            .value;
        (2.0 * PI * 2.0 * half).sqrt()
    }

    #[test]
    fn sobolev_gaussian_matches_oracle() {
        let phi = TestFunction::gaussian_bump(0.0, 1.0).unwrap();
        for s in [0.5, 1.0, 2.5] {
            let got = sobolev_norm(&phi, s).unwrap();
            let want = gaussian_norm_oracle(s);
            assert!((got - want).abs() < 2e-6 * want, "s={s}: {got} vs {want}");
        }
        // the center only changes the phase
        let moved = TestFunction::gaussian_bump(1.3, 1.0).unwrap();
        let want = gaussian_norm_oracle(2.5);
        assert!((sobolev_norm(&moved, 2.5).unwrap() - want).abs() < 2e-6 * want);
    }

    #[test]
    fn sobolev_basic_properties() {
        assert_eq!(
            sobolev_norm(&TestFunction::constant(0.0), 2.5).unwrap(),
            0.0
        );
        assert!(matches!(
            sobolev_norm(&TestFunction::monomial(1), 2.5),
            Err(Error::NotIntegrable(_))
        ));
        let phi = TestFunction::smooth_bump(0.0, 1.0).unwrap();
        let one = sobolev_norm(&phi, 2.5).unwrap();
        let three = sobolev_norm(&TestFunction::Linear(vec![(3.0, phi)]), 2.5).unwrap();
        assert!((three - 3.0 * one).abs() < 1e-10 * three);
    }

    #[test]
    fn sobolev_poisson_kernel_closed_form() {
        // |phi_hat|^2 = e^{-2 eta |k|}; s = 1 integrates in closed form
        let eta: f64 = 0.5;
        let a = 2.0 * eta;
        let half = 1.0 / a + 4.0 / (a * a) + 8.0 / (a * a * a);
        let want = (2.0 * half).sqrt();
        let got = sobolev_norm(&TestFunction::poisson_kernel(0.4, eta).unwrap(), 1.0).unwrap();
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "poly:0,0,1",
            "const:2.5",
            "gauss:0.5,0.25",
            "bump:0,1.5",
            "poisson:0,0.3",
            "smooth:0.1|bump:0,1",
            "2*gauss:0,1 + -0.5*bump:1,0.5",
        ] {
            let f: TestFunction = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
            assert_eq!(f.to_string().parse::<TestFunction>().unwrap(), f);
        }
        assert!("gauss:0,-1".parse::<TestFunction>().is_err());
        assert!("wave:1".parse::<TestFunction>().is_err());
        assert!("gauss:0".parse::<TestFunction>().is_err());
    }

    #[test]
    fn polynomial_shift() {
        let p = TestFunction::Polynomial(vec![1.0, -2.0, 0.5, 3.0]);
        let q = p.shifted(0.7);
        for x in [-1.0, 0.0, 0.4, 2.0] {
            assert!((q.eval(x) - p.eval(x - 0.7)).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn statistic_is_linear(
                ev in proptest::collection::vec(-2.5f64..2.5, 1..40),
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
                c in -1.0f64..1.0,
            ) {
                let s = spectrum(&ev);
                let phi = TestFunction::gaussian_bump(c, 0.4).unwrap();
                let psi = TestFunction::monomial(3);
                let combo = TestFunction::Linear(vec![(a, phi.clone()), (b, psi.clone())]);
                let lhs = evaluate_les(&s, &combo).unwrap();
                let rhs = a * evaluate_les(&s, &phi).unwrap() + b * evaluate_les(&s, &psi).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }

            #[test]
            fn smoothing_commutes_with_shift(c in -1.0f64..1.0, x in -2.0f64..2.0, eta in 0.05f64..0.5) {
                let phi = TestFunction::smooth_bump(0.2, 0.8).unwrap();
                let a = poisson_smooth(&phi.shifted(c), eta).unwrap().eval(x);
                let b = poisson_smooth(&phi, eta).unwrap().eval(x - c);
                prop_assert!((a - b).abs() < 2.0 * SMOOTHING_TOL);
            }

            #[test]
            fn sobolev_monotone_in_index(s1 in 0.1f64..3.0, ds in 0.0f64..1.5) {
                let phi = TestFunction::gaussian_bump(0.0, 0.6).unwrap();
                let lo = sobolev_norm(&phi, s1).unwrap();
                let hi = sobolev_norm(&phi, s1 + ds).unwrap();
                prop_assert!(lo <= hi * (1.0 + 1e-9));
            }
        }
    }
}
