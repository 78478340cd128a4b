//! `(n, b)` sweeps and the truncation experiment.

use super::{
    par_map, run_experiment_with, BandwidthRule, ExperimentConfig, PhiReport, Progress, RunOptions,
};
use crate::ensemble::{sample_coupled, trace_sq_difference};
use crate::montecarlo::mean_variance;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub b: f64,
    pub phi: String,
    pub var_emp: f64,
    pub var_theory: f64,
    pub rel_gap: f64,
    /// Standard error of `var_emp`.
    pub stderr: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 7] = [
        "n",
        "b",
        "phi",
        "var_emp",
        "var_theory",
        "rel_gap",
        "stderr",
    ];

    fn new(n: usize, b: f64, e: &PhiReport) -> Self {
        SweepRow {
            n,
            b,
            phi: e.phi.to_string(),
            var_emp: e.empirical_variance,
            var_theory: e.theory.total,
            rel_gap: e.relative_gap(),
            stderr: e.variance_stderr(),
        }
    }
}

/// Behaviour of the relative gap of one test function as `b` grows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub phi: String,
    /// Steps where the gap grew.
    pub inversions: usize,
    /// Steps where the gap grew by more than `noise_band`.
    pub significant_inversions: usize,
    /// `2 sqrt(2 / R)`.
    pub noise_band: f64,
}

impl TrendSummary {
    /// Non-increasing up to at most one inversion inside the noise band.
    pub fn is_non_increasing_within_noise(&self) -> bool {
        self.inversions <= 1 && self.significant_inversions == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub trends: Vec<TrendSummary>,
}

impl SweepTable {
    pub fn header_line() -> String {
        SweepRow::HEADER.join(",")
    }
}

pub fn sweep(
    base: &ExperimentConfig,
    grid: &[(usize, f64)],
    progress: Option<Progress>,
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    let mut per_phi: Vec<Vec<(f64, f64)>> = vec![Vec::new(); base.test_functions.len()];
    for &(n, b) in grid {
        let config = ExperimentConfig {
            n,
            bandwidth: BandwidthRule::Explicit(b),
            ..base.clone()
        };
        let report = run_experiment_with(
            &config,
            &RunOptions {
                progress,
                keep_spectra: false,
            },
        )?
        .report;
        for (k, e) in report.entries.iter().enumerate() {
            rows.push(SweepRow::new(n, b, e));
            per_phi[k].push((b, e.relative_gap()));
        }
    }
    let noise_band = 2.0 * (2.0 / base.replicas as f64).sqrt();
    let trends = if grid.is_empty() {
        Vec::new()
    } else {
        base.effective_test_functions()?
            .iter()
            .zip(per_phi)
            .map(|(phi, mut gaps)| {
                gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
                let rises: Vec<f64> = gaps
                    .windows(2)
                    .map(|w| w[1].1 - w[0].1)
                    .filter(|d| *d > 0.0)
                    .collect();
                TrendSummary {
                    phi: phi.to_string(),
                    inversions: rises.len(),
                    significant_inversions: rises.iter().filter(|d| **d > noise_band).count(),
                    noise_band,
                }
            })
            .collect()
    };
    Ok(SweepTable { rows, trends })
}

/// Monte Carlo estimate of `n^{-1} E Tr (M_band - M_periodic)^2` at one
/// `(n, b)`, split into the band part (truncated entries) and the corner
/// part (entries added by periodization).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRow {
    pub n: usize,
    pub b: f64,
    pub band: f64,
    pub corner: f64,
    pub total: f64,
    pub band_stderr: f64,
    pub total_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
    /// `alpha` in a least-squares fit `total ~ C b^{-alpha}`, when every
    /// estimate is positive and there are at least two distinct `b`.
    pub fitted_exponent: Option<f64>,
    /// The same fit for the band part.
    pub band_exponent: Option<f64>,
}

fn decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|p| !(p.1 > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(-sxy / sxx)
}

/// Runs the coupled sampler for each `(n, b)` of `grid` with the replicas,
/// seeds, profile and entry law of `base`. Spectra are not needed.
pub fn truncation_effect(
    base: &ExperimentConfig,
    grid: &[(usize, f64)],
    progress: Option<Progress>,
) -> Result<TruncationTable> {
    let mut rows = Vec::with_capacity(grid.len());
    for &(n, b) in grid {
        let config = ExperimentConfig {
            n,
            bandwidth: BandwidthRule::Explicit(b),
            ..base.clone()
        };
        config.band_spec(0)?.validate()?;
        let parts = par_map(
            config.replicas,
            config.worker_count,
            |r| {
                let (full, periodic) = sample_coupled(&config.band_spec(r)?)?;
                let d = trace_sq_difference(&full, &periodic)?;
                Ok((d.band / n as f64, d.corner / n as f64))
            },
            progress,
        )?;
        let band: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let corner: Vec<f64> = parts.iter().map(|p| p.1).collect();
        let total: Vec<f64> = parts.iter().map(|p| p.0 + p.1).collect();
        let r = parts.len() as f64;
        let (band_mean, band_var) = mean_variance(&band);
        let (corner_mean, _) = mean_variance(&corner);
        let (total_mean, total_var) = mean_variance(&total);
        rows.push(TruncationRow {
            n,
            b,
            band: band_mean,
            corner: corner_mean,
            total: total_mean,
            band_stderr: (band_var / r).sqrt(),
            total_stderr: (total_var / r).sqrt(),
        });
    }
    let fitted_exponent = decay_exponent(&rows.iter().map(|r| (r.b, r.total)).collect::<Vec<_>>());
    let band_exponent = decay_exponent(&rows.iter().map(|r| (r.b, r.band)).collect::<Vec<_>>());
    Ok(TruncationTable {
        rows,
        fitted_exponent,
        band_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{BandProfile, EntryDistribution};
    use crate::montecarlo::run_experiment;
    use crate::statistics::TestFunction;

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(
            128,
            4.0,
            BandProfile::boxcar(),
            EntryDistribution::Gaussian,
            vec![TestFunction::monomial(2)],
            100,
            77,
        )
    }

    #[test]
    fn empty_and_single_point() {
        let empty = sweep(&base(), &[], None).unwrap();
        assert!(empty.rows.is_empty() && empty.trends.is_empty());
        assert_eq!(
            SweepTable::header_line(),
            "n,b,phi,var_emp,var_theory,rel_gap,stderr"
        );

        let one = sweep(&base(), &[(96, 6.0)], None).unwrap();
        let mut c = base();
        c.n = 96;
        c.bandwidth = BandwidthRule::Explicit(6.0);
        let e = &run_experiment(&c).unwrap().entries[0];
        assert_eq!(one.rows, vec![SweepRow::new(96, 6.0, e)]);
        assert_eq!(one.trends[0].inversions, 0);
    }

    #[test]
    fn exponent_fit() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&b: &f64| (b, 3.0 * b.powf(-1.5)))
            .collect();
        assert!((decay_exponent(&pts).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(decay_exponent(&pts[..1]), None);
        assert_eq!(decay_exponent(&[(2.0, 1.0), (4.0, 0.0)]), None);
    }

    #[test]
    fn gaussian_band_part_negligible() {
        let mut c = base();
        c.replicas = 20;
        let t = truncation_effect(&c, &[(1024, 32.0)], None).unwrap();
        assert!(t.rows[0].band < 1e-6, "{:?}", t.rows[0]);
    }

    #[test]
    fn corner_only_scale() {
        // with b = 64 no gaussian entry exceeds 8 in practice, so only the
        // corners contribute: 2 sum_{e=1}^{w} e u(e/b)/b for the box profile
        // is about w(w+1)/(2b), divided by n.
        let mut c = base();
        c.replicas = 10;
        let (n, b) = (2048usize, 64.0);
        let t = truncation_effect(&c, &[(n, b)], None).unwrap();
        let row = &t.rows[0];
        assert!(row.band < 1e-12);
        let w = 64.0;
        let expected = w * (w + 1.0) / (2.0 * b) / n as f64;
        assert!(row.corner > 0.0);
        assert!(
            (row.corner / expected - 1.0).abs() < 0.1,
            "{} vs {}",
            row.corner,
            expected
        );
    }
}
