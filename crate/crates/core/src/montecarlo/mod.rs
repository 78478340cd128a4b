//! Replicated experiments: fluctuation samples, diagnostics and comparison
//! with the limiting variance.
//!
//! Replicas are the unit of work. Workers pull replica ids from a shared
//! counter and every reduction runs over replica id order, so a report does
//! not depend on the worker count or on thread scheduling.

mod diagnostics;
mod sweep;

pub use diagnostics::{
    char_function_compare, default_t_grid, empirical_char_function, kolmogorov_q, mean_variance,
    normality_tests, NormalityDiagnostics, MIN_NORMALITY_SAMPLES,
};
pub use sweep::{
    sweep, truncation_effect, SweepRow, SweepTable, TrendSummary, TruncationRow, TruncationTable,
};

use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use crate::bandeig::{eigenvalues, Spectrum};
use crate::ensemble::{sample_band_matrix, BandMatrixSpec, BandProfile, EntryDistribution};
use crate::record::Record;
use crate::rng::replica_seed;
use crate::statistics::{
    center_scale, evaluate_les, poisson_smooth, FluctuationSample, TestFunction,
};
use crate::theory::{clt_variance, VarianceBreakdown};
use crate::{Error, Result};

/// Points of the characteristic-function grid in every report.
pub const CHAR_GRID_POINTS: usize = 25;

/// Called with the number of finished replicas.
pub type Progress<'a> = &'a (dyn Fn(usize) + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Explicit(f64),
    /// `b = c n^theta` with `0 < theta < 1`.
    Power {
        c: f64,
        theta: f64,
    },
}

impl BandwidthRule {
    pub fn resolve(&self, n: usize) -> Result<f64> {
        match *self {
            BandwidthRule::Explicit(b) => Ok(b),
            BandwidthRule::Power { c, theta } => {
                if !(theta > 0.0 && theta < 1.0) || !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "bandwidth rule needs c > 0 and 0 < theta < 1, got c = {c}, theta = {theta}"
                    )));
                }
                Ok(c * (n as f64).powf(theta))
            }
        }
    }
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::Explicit(b) => write!(f, "{b}"),
            BandwidthRule::Power { c, theta } => write!(f, "power:{c},{theta}"),
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;

    /// `b` or `power:c,theta`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad bandwidth rule {s:?}"));
        match s.trim().strip_prefix("power:") {
            Some(rest) => {
                let (c, t) = rest.split_once(',').ok_or_else(bad)?;
                Ok(BandwidthRule::Power {
                    c: c.trim().parse().map_err(|_| bad())?,
                    theta: t.trim().parse().map_err(|_| bad())?,
                })
            }
            None => s
                .trim()
                .parse()
                .map(BandwidthRule::Explicit)
                .map_err(|_| bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seeding {
    /// Replica `r` uses `replica_seed(master_seed, r)`.
    PerReplica,
    /// Every replica uses `master_seed`. Only useful for testing.
    Shared,
}

impl fmt::Display for Seeding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Seeding::PerReplica => "per_replica",
            Seeding::Shared => "shared",
        })
    }
}

impl FromStr for Seeding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_replica" => Ok(Seeding::PerReplica),
            "shared" => Ok(Seeding::Shared),
            _ => Err(Error::InvalidParameter(format!("unknown seeding {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub bandwidth: BandwidthRule,
    pub profile: BandProfile,
    pub distribution: EntryDistribution,
    pub test_functions: Vec<TestFunction>,
    pub replicas: usize,
    pub master_seed: u64,
    /// When set, each test function is replaced by its Poisson smoothing.
    pub eta: Option<f64>,
    pub worker_count: usize,
    pub seeding: Seeding,
}

impl ExperimentConfig {
    pub fn new(
        n: usize,
        b: f64,
        profile: BandProfile,
        distribution: EntryDistribution,
        test_functions: Vec<TestFunction>,
        replicas: usize,
        master_seed: u64,
    ) -> Self {
        ExperimentConfig {
            n,
            bandwidth: BandwidthRule::Explicit(b),
            profile,
            distribution,
            test_functions,
            replicas,
            master_seed,
            eta: None,
            worker_count: 1,
            seeding: Seeding::PerReplica,
        }
    }

    /// n = 2048, b = 32, box profile, gaussian entries, `phi = lambda^2`,
    /// R = 4000.
    pub fn desk_scale(master_seed: u64) -> Self {
        Self::new(
            2048,
            32.0,
            BandProfile::boxcar(),
            EntryDistribution::Gaussian,
            vec![TestFunction::monomial(2)],
            4000,
            master_seed,
        )
    }

    pub fn b(&self) -> Result<f64> {
        self.bandwidth.resolve(self.n)
    }

    pub fn replica_seed(&self, r: usize) -> u64 {
        match self.seeding {
            Seeding::PerReplica => replica_seed(self.master_seed, r as u64),
            Seeding::Shared => self.master_seed,
        }
    }

    pub fn band_spec(&self, r: usize) -> Result<BandMatrixSpec> {
        Ok(BandMatrixSpec {
            n: self.n,
            b: self.b()?,
            profile: self.profile,
            distribution: self.distribution,
            seed: self.replica_seed(r),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.band_spec(0)?.validate()?;
        if self.replicas < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 replicas, got {}",
                self.replicas
            )));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidParameter(
                "worker_count must be at least 1".into(),
            ));
        }
        if self.test_functions.is_empty() {
            return Err(Error::InvalidParameter("no test functions".into()));
        }
        for phi in &self.test_functions {
            phi.validate()?;
        }
        if let Some(eta) = self.eta {
            for phi in &self.test_functions {
                poisson_smooth(phi, eta)?;
            }
        }
        Ok(())
    }

    /// Test functions as evaluated on the spectra.
    pub fn effective_test_functions(&self) -> Result<Vec<TestFunction>> {
        match self.eta {
            None => Ok(self.test_functions.clone()),
            Some(eta) => self
                .test_functions
                .iter()
                .map(|phi| poisson_smooth(phi, eta))
                .collect(),
        }
    }

    /// The config with the worker count left out, which never affects
    /// results.
    fn canonical_record(&self) -> Record {
        let mut r = Record::new("config");
        r.push("n", self.n)
            .push("b", self.bandwidth)
            .push("profile", self.profile)
            .push("distribution", self.distribution);
        for phi in &self.test_functions {
            r.push("phi", phi);
        }
        r.push("replicas", self.replicas)
            .push("master_seed", self.master_seed);
        if let Some(eta) = self.eta {
            r.push("eta", eta);
        }
        r.push("seeding", self.seeding);
        r
    }

    pub fn to_record(&self) -> Record {
        self.canonical_record().with("workers", self.worker_count)
    }

    pub fn from_record(r: &Record) -> Result<Self> {
        r.expect_kind("config")?;
        Ok(ExperimentConfig {
            n: r.parse("n")?,
            bandwidth: r.require("b")?.parse()?,
            profile: r.require("profile")?.parse()?,
            distribution: r.require("distribution")?.parse()?,
            test_functions: r.get_all("phi").map(str::parse).collect::<Result<_>>()?,
            replicas: r.parse("replicas")?,
            master_seed: r.parse("master_seed")?,
            eta: r.parse_opt("eta")?,
            worker_count: r.parse("workers")?,
            seeding: r.require("seeding")?.parse()?,
        })
    }

    /// Hex SHA-256 of the canonical config record.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_record().to_string().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiReport {
    /// The function evaluated on each spectrum.
    pub phi: TestFunction,
    pub sample_count: usize,
    /// Mean of `N_n[phi]` over replicas.
    pub empirical_mean: f64,
    /// Bessel-corrected variance of `sqrt(b/n) N_n[phi]`.
    pub empirical_variance: f64,
    /// Absent for fewer than [`MIN_NORMALITY_SAMPLES`] replicas or
    /// degenerate samples.
    pub diagnostics: Option<NormalityDiagnostics>,
    /// `(t, |Z_R(t) - exp(-t^2 V / 2)|)` with `V` the limiting variance.
    pub char_function: Vec<(f64, f64)>,
    pub theory: VarianceBreakdown,
}

impl PhiReport {
    pub fn max_char_deviation(&self) -> f64 {
        self.char_function.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// `|var_emp - var_theory| / var_theory`, or the absolute gap when the
    /// limiting variance vanishes.
    pub fn relative_gap(&self) -> f64 {
        let gap = (self.empirical_variance - self.theory.total).abs();
        if self.theory.total == 0.0 {
            gap
        } else {
            gap / self.theory.total.abs()
        }
    }

    /// Standard error of the empirical variance for normal samples,
    /// `var sqrt(2 / (R - 1))`.
    pub fn variance_stderr(&self) -> f64 {
        self.empirical_variance * (2.0 / (self.sample_count as f64 - 1.0)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub digest: String,
    pub code_version: String,
    pub entries: Vec<PhiReport>,
}

/// Outcome of [`ExperimentReport::compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportComparison {
    pub identical: bool,
    /// `other - self` for each test function.
    pub variance_differences: Vec<f64>,
}

impl ExperimentReport {
    pub fn compare(&self, other: &ExperimentReport) -> Result<ReportComparison> {
        if self.digest != other.digest {
            return Err(Error::DigestMismatch {
                left: self.digest.clone(),
                right: other.digest.clone(),
            });
        }
        Ok(ReportComparison {
            identical: self.to_text() == other.to_text(),
            variance_differences: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| b.empirical_variance - a.empirical_variance)
                .collect(),
        })
    }

    pub fn to_records(&self) -> Vec<Record> {
        let mut out = vec![
            Record::new("report")
                .with("version", &self.code_version)
                .with("digest", &self.digest),
            self.config.to_record(),
        ];
        for (i, e) in self.entries.iter().enumerate() {
            let mut r = Record::new("phi");
            r.push("index", i)
                .push("f", &e.phi)
                .push("samples", e.sample_count)
                .push_f64("mean", e.empirical_mean)
                .push_f64("variance", e.empirical_variance);
            if let Some(d) = &e.diagnostics {
                r.push_f64("skewness", d.skewness)
                    .push_f64("excess_kurtosis", d.excess_kurtosis)
                    .push_f64("ks", d.ks_statistic)
                    .push_f64("p_value", d.p_value);
            }
            r.push_f64("kernel_term", e.theory.kernel_term)
                .push_f64("kappa4_term", e.theory.kappa4_term)
                .push_f64("u0_term", e.theory.u0_term)
                .push_f64("theory", e.theory.total);
            out.push(r);
            for &(t, dev) in &e.char_function {
                out.push(
                    Record::new("charfn")
                        .with("index", i)
                        .with_f64("t", t)
                        .with_f64("deviation", dev),
                );
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.to_records().iter().map(|r| format!("{r}\n")).collect()
    }

    pub fn from_records(records: &[Record]) -> Result<Self> {
        let head = records
            .first()
            .ok_or_else(|| Error::Record("empty report".into()))?;
        head.expect_kind("report")?;
        let config = ExperimentConfig::from_record(
            records
                .get(1)
                .ok_or_else(|| Error::Record("report lacks a config record".into()))?,
        )?;
        let mut entries: Vec<PhiReport> = Vec::new();
        for r in &records[2..] {
            let index: usize = r.parse("index")?;
            match r.kind() {
                "phi" => {
                    if index != entries.len() {
                        return Err(Error::Record(format!("phi record {index} out of order")));
                    }
                    let diagnostics = match r.parse_opt::<f64>("skewness")? {
                        None => None,
                        Some(skewness) => Some(NormalityDiagnostics {
                            skewness,
                            excess_kurtosis: r.parse("excess_kurtosis")?,
                            ks_statistic: r.parse("ks")?,
                            p_value: r.parse("p_value")?,
                        }),
                    };
                    entries.push(PhiReport {
                        phi: r.require("f")?.parse()?,
                        sample_count: r.parse("samples")?,
                        empirical_mean: r.parse("mean")?,
                        empirical_variance: r.parse("variance")?,
                        diagnostics,
                        char_function: Vec::new(),
                        theory: VarianceBreakdown {
                            kernel_term: r.parse("kernel_term")?,
                            kappa4_term: r.parse("kappa4_term")?,
                            u0_term: r.parse("u0_term")?,
                            total: r.parse("theory")?,
                        },
                    });
                }
                "charfn" => {
                    let last = entries.len().checked_sub(1);
                    let e = entries
                        .get_mut(index)
                        .filter(|_| Some(index) == last)
                        .ok_or_else(|| {
                            Error::Record(format!("charfn record for unknown phi {index}"))
                        })?;
                    e.char_function.push((r.parse("t")?, r.parse("deviation")?));
                }
                other => {
                    return Err(Error::Record(format!(
                        "unexpected {other} record in report"
                    )))
                }
            }
        }
        Ok(ExperimentReport {
            config,
            digest: head.require("digest")?.to_string(),
            code_version: head.require("version")?.to_string(),
            entries,
        })
    }
}

/// Runs `f(0..count)` on up to `workers` threads and returns the results in
/// index order. The first failure stops the queue; the error reported is the
/// failed replica with the smallest id.
pub(crate) fn par_map<T, F>(
    count: usize,
    workers: usize,
    f: F,
    progress: Option<Progress>,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let workers = workers.clamp(1, count.max(1));
    let parts: Vec<Vec<(usize, Result<T>)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let r = next.fetch_add(1, Ordering::Relaxed);
                        if r >= count {
                            break;
                        }
                        let out = f(r);
                        let failed = out.is_err();
                        local.push((r, out));
                        if failed {
                            next.fetch_max(count, Ordering::Relaxed);
                            break;
                        }
                        let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                        if let Some(p) = progress {
                            p(finished);
                        }
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replica worker panicked"))
            .collect()
    });

    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let mut failure: Option<(usize, Error)> = None;
    for (r, out) in parts.into_iter().flatten() {
        match out {
            Ok(v) => slots[r] = Some(v),
            Err(e) => {
                if failure.as_ref().is_none_or(|(q, _)| r < *q) {
                    failure = Some((r, e));
                }
            }
        }
    }
    if let Some((replica, e)) = failure {
        return Err(Error::Replica {
            replica,
            source: Box::new(e),
        });
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("every replica computed"))
        .collect())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, &RunOptions::default()).map(|out| out.report)
}

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub progress: Option<Progress<'a>>,
    /// Keep every replica's spectrum in the output.
    pub keep_spectra: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// One vector per test function, in replica order.
    pub samples: Vec<Vec<FluctuationSample>>,
    /// Spectra in replica order, when requested.
    pub spectra: Option<Vec<Spectrum>>,
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let phis = config.effective_test_functions()?;
    let b = config.b()?;

    let per_replica = par_map(
        config.replicas,
        config.worker_count,
        |r| {
            let m = sample_band_matrix(&config.band_spec(r)?)?;
            let s = eigenvalues(&m)?;
            let values = phis
                .iter()
                .map(|phi| evaluate_les(&s, phi))
                .collect::<Result<Vec<f64>>>()?;
            Ok((values, options.keep_spectra.then_some(s)))
        },
        options.progress,
    )?;
    let (raw, spectra): (Vec<Vec<f64>>, Vec<Option<Spectrum>>) = per_replica.into_iter().unzip();

    let kappa4 = config.distribution.kappa4();
    let mut entries = Vec::with_capacity(phis.len());
    let mut all_samples = Vec::with_capacity(phis.len());
    for (k, phi) in phis.iter().enumerate() {
        let values: Vec<f64> = raw.iter().map(|v| v[k]).collect();
        let mut samples = center_scale(&values, b, config.n, config.master_seed)?;
        for (r, s) in samples.iter_mut().enumerate() {
            s.seed = config.replica_seed(r);
        }
        let x: Vec<f64> = samples.iter().map(|s| s.value).collect();
        let (mean, _) = mean_variance(&values);
        let (_, variance) = mean_variance(&x);
        let diagnostics = match normality_tests(&x) {
            Ok(d) => Some(d),
            Err(Error::DegenerateSample(_) | Error::InvalidParameter(_)) => None,
            Err(e) => return Err(e),
        };
        let theory = clt_variance(phi, &config.profile, kappa4)?;
        let v = if theory.total > 0.0 {
            theory.total
        } else {
            variance
        };
        let char_function = char_function_compare(
            &x,
            theory.total.max(0.0),
            &default_t_grid(v, CHAR_GRID_POINTS),
        )?;
        entries.push(PhiReport {
            phi: phi.clone(),
            sample_count: x.len(),
            empirical_mean: mean,
            empirical_variance: variance,
            diagnostics,
            char_function,
            theory,
        });
        all_samples.push(samples);
    }

    let report = ExperimentReport {
        config: config.clone(),
        digest: config.digest(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        entries,
    };
    Ok(ExperimentOutput {
        report,
        samples: all_samples,
        spectra: spectra.into_iter().collect(),
    })
}
