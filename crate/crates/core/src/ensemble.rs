//! Band profiles, entry laws and the sampled band ensembles.
//!
//! Entry `(i, j)` of the band matrix is `(u(|i-j|/b) / b)^{1/2} w_ij` with
//! i.i.d. standardized `w_ij`. The periodized model truncates each entry at
//! `sqrt(b)`, recenters it and adds independent corner entries so that the
//! law becomes invariant under cyclic shifts.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::bandeig::DenseSymmetric;
use crate::error::{Error, Result};
use crate::quadrature::Adaptive;
use crate::rng::{unit_f64, Domain, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileFamily {
    /// `1/(2r)` on `[-r, r]`.
    Box,
    /// `(1 - |x|/r)_+ / r`.
    Triangle,
    /// `3/(4r) (1 - (x/r)^2)_+`.
    Epanechnikov,
}

/// Even, compactly supported, unit-mass band shape `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandProfile {
    family: ProfileFamily,
    radius: f64,
}

impl BandProfile {
    pub fn new(family: ProfileFamily, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "profile radius must be positive, got {radius}"
            )));
        }
        Ok(BandProfile { family, radius })
    }

    pub fn boxcar() -> Self {
        BandProfile {
            family: ProfileFamily::Box,
            radius: 1.0,
        }
    }

    pub fn triangle() -> Self {
        BandProfile {
            family: ProfileFamily::Triangle,
            radius: 1.0,
        }
    }

    pub fn epanechnikov() -> Self {
        BandProfile {
            family: ProfileFamily::Epanechnikov,
            radius: 1.0,
        }
    }

    pub fn family(&self) -> ProfileFamily {
        self.family
    }

    /// `C*`: `u` vanishes outside `[-C*, C*]`.
    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, x: f64) -> f64 {
        let r = self.radius;
        let t = x.abs() / r;
        if t > 1.0 {
            return 0.0;
        }
        match self.family {
            ProfileFamily::Box => 0.5 / r,
            ProfileFamily::Triangle => (1.0 - t) / r,
            ProfileFamily::Epanechnikov => 0.75 * (1.0 - t * t) / r,
        }
    }

    /// `u(0)`.
    pub fn at_zero(&self) -> f64 {
        self.value(0.0)
    }

    /// `(u, u) = int u^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        let r = self.radius;
        match self.family {
            ProfileFamily::Box => 0.5 / r,
            ProfileFamily::Triangle => 2.0 / (3.0 * r),
            ProfileFamily::Epanechnikov => 0.6 / r,
        }
    }

    /// `u_hat(k) = int e^{ikx} u(x) dx`, real by evenness.
    pub fn fourier(&self, k: f64) -> f64 {
        let t = self.radius * k;
        match self.family {
            ProfileFamily::Box => sinc(t),
            ProfileFamily::Triangle => {
                let s = sinc(0.5 * t);
                s * s
            }
            ProfileFamily::Epanechnikov => {
                let t2 = t * t;
                if t.abs() < 0.1 {
                    1.0 - t2 / 10.0 + t2 * t2 / 280.0 - t2 * t2 * t2 / 15120.0
                        + t2 * t2 * t2 * t2 / 1_330_560.0
                } else {
                    3.0 * (t.sin() - t * t.cos()) / (t2 * t)
                }
            }
        }
    }

    /// `(A, p)` with `|u_hat(k)| <= A / |r k|^p` for `|r k| >= 1`.
    pub fn fourier_envelope(&self) -> (f64, i32) {
        match self.family {
            ProfileFamily::Box => (1.0, 1),
            ProfileFamily::Triangle => (4.0, 2),
            ProfileFamily::Epanechnikov => (6.0, 2),
        }
    }

    /// Quadrature value of `int u`; should be 1.
    pub fn normalization(&self) -> f64 {
        let r = self.radius;
        Adaptive {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            max_intervals: 200,
        }
        .integrate_with_breaks(|x| self.value(x), &[-r, 0.0, r])
        .map(|e| e.value)
        .unwrap_or(f64::NAN)
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

impl fmt::Display for BandProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            ProfileFamily::Box => "box",
            ProfileFamily::Triangle => "triangle",
            ProfileFamily::Epanechnikov => "epanechnikov",
        };
        if self.radius == 1.0 {
            write!(f, "{name}")
        } else {
            write!(f, "{name}:{}", self.radius)
        }
    }
}

impl FromStr for BandProfile {
    type Err = Error;

    /// `box`, `triangle`, `epanechnikov`, optionally followed by `:radius`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, radius) = match s.split_once(':') {
            Some((n, r)) => (
                n,
                r.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad profile radius in {s:?}")))?,
            ),
            None => (s, 1.0),
        };
        let family = match name.trim() {
            "box" => ProfileFamily::Box,
            "triangle" => ProfileFamily::Triangle,
            "epanechnikov" => ProfileFamily::Epanechnikov,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown profile {other:?}; expected box, triangle or epanechnikov"
                )))
            }
        };
        BandProfile::new(family, radius)
    }
}

/// `u(|i - j| / b)`.
pub fn profile_value(profile: &BandProfile, i: usize, j: usize, b: f64) -> f64 {
    profile.value(i.abs_diff(j) as f64 / b)
}

pub fn fourier_profile(profile: &BandProfile, k: f64) -> f64 {
    profile.fourier(k)
}

/// Standardized (mean 0, variance 1) law of the entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryDistribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    /// Student t with `nu` degrees of freedom, rescaled to unit variance.
    StudentT {
        nu: f64,
    },
}

impl EntryDistribution {
    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 4.0) {
            return Err(Error::InvalidParameter(format!(
                "student_t needs nu > 4 for a finite (4+eps)th moment, got {nu}"
            )));
        }
        Ok(EntryDistribution::StudentT { nu })
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// `E w^4 - 3`.
    pub fn kappa4(&self) -> f64 {
        match *self {
            EntryDistribution::Gaussian => 0.0,
            EntryDistribution::Rademacher => -2.0,
            EntryDistribution::Uniform => -1.2,
            EntryDistribution::StudentT { nu } => 6.0 / (nu - 4.0),
        }
    }

    /// The `eps` of the `(4 + eps)`th moment condition.
    pub fn epsilon(&self) -> f64 {
        match *self {
            EntryDistribution::StudentT { nu } => (0.5 * (nu - 4.0)).min(1.0),
            _ => 1.0,
        }
    }

    /// `E |w|^{4 + eps}`.
    pub fn moment_bound(&self) -> f64 {
        self.absolute_moment(4.0 + self.epsilon())
    }

    /// `E |w|^p` in closed form (infinite for Student t with `p >= nu`).
    pub fn absolute_moment(&self, p: f64) -> f64 {
        match *self {
            EntryDistribution::Gaussian => 2f64.powf(0.5 * p) * gamma(0.5 * (p + 1.0)) / PI.sqrt(),
            EntryDistribution::Rademacher => 1.0,
            EntryDistribution::Uniform => 3f64.powf(0.5 * p) / (p + 1.0),
            EntryDistribution::StudentT { nu } => {
                if p >= nu {
                    return f64::INFINITY;
                }
                let ln_raw =
                    0.5 * p * nu.ln() + ln_gamma(0.5 * (p + 1.0)) + ln_gamma(0.5 * (nu - p))
                        - 0.5 * PI.ln()
                        - ln_gamma(0.5 * nu);
                (ln_raw + 0.5 * p * ((nu - 2.0) / nu).ln()).exp()
            }
        }
    }

    /// Density, for the continuous families.
    pub fn density(&self, x: f64) -> Option<f64> {
        match *self {
            EntryDistribution::Gaussian => Some((-0.5 * x * x).exp() / (2.0 * PI).sqrt()),
            EntryDistribution::Rademacher => None,
            EntryDistribution::Uniform => {
                let h = 3f64.sqrt();
                Some(if x.abs() <= h { 0.5 / h } else { 0.0 })
            }
            EntryDistribution::StudentT { nu } => {
                let sigma = ((nu - 2.0) / nu).sqrt();
                let t = x / sigma;
                let ln_c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
                Some((ln_c - 0.5 * (nu + 1.0) * (1.0 + t * t / nu).ln()).exp() / sigma)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EntryDistribution::Gaussian => StandardNormal.sample(rng),
            EntryDistribution::Rademacher => {
                if rng.next_u32() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::Uniform => 3f64.sqrt() * (2.0 * unit_f64(rng) - 1.0),
            EntryDistribution::StudentT { nu } => {
                let t: f64 = StudentT::new(nu).expect("validated nu").sample(rng);
                t * ((nu - 2.0) / nu).sqrt()
            }
        }
    }

    /// `E{w 1_{|w| <= sqrt b}}`: zero for every symmetric family.
    pub fn truncated_mean(&self, b: f64) -> f64 {
        if self.is_symmetric() {
            0.0
        } else {
            self.truncated_mean_quadrature(b)
        }
    }

    /// `E{w 1_{|w| <= sqrt b}}` by direct integration against the law.
    pub fn truncated_mean_quadrature(&self, b: f64) -> f64 {
        let cut = b.sqrt();
        match self {
            // the atoms at +-1 are kept or dropped together
            EntryDistribution::Rademacher => 0.0,
            _ => {
                let upper = match self {
                    EntryDistribution::Uniform => cut.min(3f64.sqrt()),
                    _ => cut,
                };
                Adaptive {
                    abs_tol: 1e-14,
                    rel_tol: 0.0,
                    max_intervals: 1000,
                }
                .integrate(|x| x * self.density(x).unwrap_or(0.0), -upper, upper)
                .map(|e| e.value)
                .unwrap_or(f64::NAN)
            }
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryDistribution::Gaussian => write!(f, "gaussian"),
            EntryDistribution::Rademacher => write!(f, "rademacher"),
            EntryDistribution::Uniform => write!(f, "uniform"),
            EntryDistribution::StudentT { nu } => write!(f, "student_t:{nu}"),
        }
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    /// `gaussian`, `rademacher`, `uniform` or `student_t:nu`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(EntryDistribution::Gaussian),
            "rademacher" => Ok(EntryDistribution::Rademacher),
            "uniform" => Ok(EntryDistribution::Uniform),
            other => match other.split_once(':') {
                Some(("student_t", nu)) => EntryDistribution::student_t(
                    nu.trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad degrees of freedom in {s:?}")))?,
                ),
                _ => Err(Error::InvalidParameter(format!(
                    "unknown distribution {other:?}; expected gaussian, rademacher, uniform or student_t:nu"
                ))),
            },
        }
    }
}

/// `w 1_{|w| <= sqrt b} - E{w 1_{|w| <= sqrt b}}`.
pub fn truncate_center(x: f64, b: f64, dist: &EntryDistribution) -> f64 {
    let kept = if x.abs() <= b.sqrt() { x } else { 0.0 };
    kept - dist.truncated_mean(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrixSpec {
    pub n: usize,
    pub b: f64,
    pub profile: BandProfile,
    pub distribution: EntryDistribution,
    pub seed: u64,
}

impl BandMatrixSpec {
    /// `floor(C* b)`.
    pub fn half_bandwidth(&self) -> usize {
        (self.profile.support_radius() * self.b).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth b must be >= 2, got {}",
                self.b
            )));
        }
        let w = self.half_bandwidth();
        if self.n == 0 || w >= self.n {
            return Err(Error::BandTooWide {
                n: self.n,
                half_bandwidth: w,
            });
        }
        if self.n >= 1 << 28 {
            return Err(Error::InvalidParameter(format!("n = {} too large", self.n)));
        }
        Ok(())
    }

    fn entry_scale(&self, distance: usize) -> f64 {
        (self.profile.value(distance as f64 / self.b) / self.b).sqrt()
    }
}

/// Symmetric band matrix stored by diagonals: `diagonals[d][i]` is `(i, i + d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    diagonals: Vec<Vec<f64>>,
}

impl BandMatrix {
    pub fn from_diagonals(n: usize, diagonals: Vec<Vec<f64>>) -> Result<Self> {
        if diagonals.is_empty() || diagonals.len() > n.max(1) {
            return Err(Error::InvalidParameter(format!(
                "need between 1 and n diagonals, got {}",
                diagonals.len()
            )));
        }
        for (d, diag) in diagonals.iter().enumerate() {
            if diag.len() != n - d {
                return Err(Error::InvalidParameter(format!(
                    "diagonal {d} has length {}, expected {}",
                    diag.len(),
                    n - d
                )));
            }
        }
        Ok(BandMatrix { n, diagonals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.diagonals.len() - 1
    }

    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.diagonals
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.diagonals.get(hi - lo).map_or(0.0, |d| d[lo])
    }

    pub fn trace(&self) -> f64 {
        self.diagonals[0].iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.diagonals
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let s: f64 = v.iter().map(|x| x * x).sum();
                if d == 0 {
                    s
                } else {
                    2.0 * s
                }
            })
            .sum()
    }

    pub fn to_dense(&self) -> DenseSymmetric {
        let mut a = DenseSymmetric::zeros(self.n);
        for (d, diag) in self.diagonals.iter().enumerate() {
            for (i, &v) in diag.iter().enumerate() {
                a.set(i, i + d, v);
            }
        }
        a
    }
}

/// `min(|i - j|, n - |i - j|)`.
pub fn periodic_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// Truncated band plus wrap-around corners.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicBandMatrix {
    core: BandMatrix,
    /// `corners[e - 1][i]` is entry `(i, i + n - e)`, for `i < e`.
    corners: Vec<Vec<f64>>,
}

impl PeriodicBandMatrix {
    pub fn n(&self) -> usize {
        self.core.n
    }

    pub fn core(&self) -> &BandMatrix {
        &self.core
    }

    pub fn corners(&self) -> &[Vec<f64>] {
        &self.corners
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d <= self.core.half_bandwidth() {
            return self.core.get(lo, hi);
        }
        let e = self.n() - d;
        match self.corners.get(e.wrapping_sub(1)) {
            Some(c) if lo < e => c[lo],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> DenseSymmetric {
        let n = self.n();
        let mut a = self.core.to_dense();
        for (k, c) in self.corners.iter().enumerate() {
            let e = k + 1;
            for (i, &v) in c.iter().enumerate() {
                a.set(i, i + n - e, v);
            }
        }
        a
    }

    pub fn corner_frobenius_sq(&self) -> f64 {
        2.0 * self.corners.iter().flatten().map(|v| v * v).sum::<f64>()
    }
}

/// Samples the band matrix.
pub fn sample_band_matrix(spec: &BandMatrixSpec) -> Result<BandMatrix> {
    spec.validate()?;
    let key = StreamKey::new(spec.seed);
    let n = spec.n;
    let diagonals = (0..=spec.half_bandwidth())
        .map(|d| {
            let scale = spec.entry_scale(d);
            (0..n - d)
                .map(|i| {
                    let w = spec
                        .distribution
                        .sample(&mut key.entry(Domain::Band, i, i + d));
                    scale * w
                })
                .collect()
        })
        .collect();
    BandMatrix::from_diagonals(n, diagonals)
}

/// Band and periodized matrices built from the same band draws.
pub fn sample_coupled(spec: &BandMatrixSpec) -> Result<(BandMatrix, PeriodicBandMatrix)> {
    spec.validate()?;
    let n = spec.n;
    let w = spec.half_bandwidth();
    if 2 * w + 1 >= n {
        return Err(Error::BandTooWide {
            n,
            half_bandwidth: w,
        });
    }
    let key = StreamKey::new(spec.seed);
    let dist = &spec.distribution;
    let mut raw = Vec::with_capacity(w + 1);
    let mut trunc = Vec::with_capacity(w + 1);
    for d in 0..=w {
        let scale = spec.entry_scale(d);
        let (r, t): (Vec<f64>, Vec<f64>) = (0..n - d)
            .map(|i| {
                let x = dist.sample(&mut key.entry(Domain::Band, i, i + d));
                (scale * x, scale * truncate_center(x, spec.b, dist))
            })
            .unzip();
        raw.push(r);
        trunc.push(t);
    }
    let corners = (1..=w)
        .map(|e| {
            let scale = spec.entry_scale(e);
            (0..e)
                .map(|i| {
                    let x = dist.sample(&mut key.entry(Domain::Corner, i, i + n - e));
                    scale * truncate_center(x, spec.b, dist)
                })
                .collect()
        })
        .collect();
    Ok((
        BandMatrix::from_diagonals(n, raw)?,
        PeriodicBandMatrix {
            core: BandMatrix::from_diagonals(n, trunc)?,
            corners,
        },
    ))
}

/// Samples the truncated, periodized matrix coupled to
/// [`sample_band_matrix`] with the same seed.
pub fn sample_periodized(spec: &BandMatrixSpec) -> Result<PeriodicBandMatrix> {
    sample_coupled(spec).map(|(_, p)| p)
}

/// `Tr (A - M)^2` split into the band part and the corner part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceDifference {
    pub band: f64,
    pub corner: f64,
}

impl TraceDifference {
    pub fn total(&self) -> f64 {
        self.band + self.corner
    }
}

pub fn trace_sq_difference(
    full: &BandMatrix,
    periodic: &PeriodicBandMatrix,
) -> Result<TraceDifference> {
    if full.n() != periodic.n() || full.half_bandwidth() != periodic.core.half_bandwidth() {
        return Err(Error::InvalidParameter("matrices are not coupled".into()));
    }
    let band = full
        .diagonals
        .iter()
        .zip(&periodic.core.diagonals)
        .enumerate()
        .map(|(d, (a, m))| {
            let s: f64 = a.iter().zip(m).map(|(x, y)| (x - y) * (x - y)).sum();
            if d == 0 {
                s
            } else {
                2.0 * s
            }
        })
        .sum();
    Ok(TraceDifference {
        band,
        corner: periodic.corner_frobenius_sq(),
    })
}
