//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use bandclt::bandeig::eigenvalues;
use bandclt::ensemble::{sample_band_matrix, BandMatrixSpec, BandProfile, EntryDistribution};
use bandclt::montecarlo::{self, run_experiment_with, RunOptions, SweepTable};
use bandclt::record::{format_f64, Record};
use bandclt::selfcheck;
use bandclt::statistics::{sobolev_norm, TestFunction};
use bandclt::theory::{clt_variance, covariance_resolvents, finite_n_sigma, FiniteNOperator};
use num_complex::Complex64;

use crate::config::{ConfigError, ConfigFile};

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0} oracle check(s) failed")]
    Oracle(usize),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Oracle(_) => 4,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<bandclt::Error> for Failure {
    fn from(e: bandclt::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn csv_failure(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn config_arg<T, E: std::fmt::Display>(what: &str, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(format!("{what}: {e}")))
}

fn parse_complex(s: &str) -> Result<Complex64, Failure> {
    let bad = || {
        Failure::Config(format!(
            "cannot parse complex number {s:?}; expected re or re,im"
        ))
    };
    let (re, im) = match s.split_once(',') {
        Some((re, im)) => (re, im),
        None => (s, "0"),
    };
    Ok(Complex64::new(
        re.trim().parse().map_err(|_| bad())?,
        im.trim().parse().map_err(|_| bad())?,
    ))
}

fn progress_printer(total: usize) -> impl Fn(usize) + Sync {
    let step = (total / 10).max(1);
    move |done| {
        if done % step == 0 || done == total {
            eprintln!("progress replicas={done}/{total}");
        }
    }
}

pub fn simulate(path: &Path) -> Result<(), Failure> {
    let cfg = ConfigFile::load(path)?;
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(io_failure(dir))?;

    let start = Instant::now();
    let progress = progress_printer(cfg.experiment.replicas);
    let out = run_experiment_with(
        &cfg.experiment,
        &RunOptions {
            progress: Some(&progress),
            keep_spectra: cfg.output.dump_spectra,
        },
    )?;
    let elapsed = start.elapsed().as_secs_f64();

    let report_path = dir.join("report.txt");
    fs::write(&report_path, out.report.to_text()).map_err(io_failure(&report_path))?;

    if cfg.output.dump_samples {
        let p = dir.join("samples.csv");
        let mut w = csv::Writer::from_path(&p).map_err(csv_failure(&p))?;
        w.write_record(["replica", "seed", "phi", "value"])
            .map_err(csv_failure(&p))?;
        for (k, samples) in out.samples.iter().enumerate() {
            for s in samples {
                w.write_record([
                    s.replica_id.to_string(),
                    s.seed.to_string(),
                    k.to_string(),
                    format_f64(s.value),
                ])
                .map_err(csv_failure(&p))?;
            }
        }
        w.flush().map_err(io_failure(&p))?;
    }
    if let Some(spectra) = &out.spectra {
        let p = dir.join("spectra.csv");
        let mut w = csv::Writer::from_path(&p).map_err(csv_failure(&p))?;
        w.write_record(["replica", "lambda"])
            .map_err(csv_failure(&p))?;
        for (r, s) in spectra.iter().enumerate() {
            for l in s.eigenvalues() {
                w.write_record([r.to_string(), format_f64(*l)])
                    .map_err(csv_failure(&p))?;
            }
        }
        w.flush().map_err(io_failure(&p))?;
    }

    let stdout = io::stdout();
    let mut lock = stdout.lock();
    for (i, e) in out.report.entries.iter().enumerate() {
        let mut r = Record::new("summary");
        r.push("index", i)
            .push("f", &e.phi)
            .push_f64("variance", e.empirical_variance)
            .push_f64("theory", e.theory.total)
            .push_f64("rel_gap", e.relative_gap());
        if let Ok(norm) = sobolev_norm(&e.phi, cfg.sobolev_s) {
            r.push_f64("sobolev_norm", norm);
        }
        writeln!(lock, "{r}").map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    writeln!(
        lock,
        "{}",
        Record::new("written").with("report", report_path.display())
    )
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!(
        "{}",
        Record::new("timing").with_f64("wall_seconds", elapsed)
    );
    Ok(())
}

pub struct TheoryArgs {
    pub profile: String,
    pub kappa4: Option<f64>,
    pub distribution: Option<String>,
    pub phi: String,
    pub sobolev: Option<f64>,
    pub covariance: Option<Vec<String>>,
    pub finite_n: Option<Vec<String>>,
}

pub fn theory(args: &TheoryArgs) -> Result<(), Failure> {
    let profile: BandProfile = config_arg("--profile", args.profile.parse())?;
    let kappa4 = match (&args.distribution, args.kappa4) {
        (Some(d), _) => config_arg("--distribution", d.parse::<EntryDistribution>())?.kappa4(),
        (None, Some(k)) => k,
        (None, None) => 0.0,
    };
    if !kappa4.is_finite() {
        return Err(Failure::Config(format!(
            "--kappa4 must be finite, got {kappa4}"
        )));
    }
    let phi: TestFunction = config_arg("--phi", args.phi.parse())?;

    let mut lines = Vec::new();
    let v = clt_variance(&phi, &profile, kappa4)?;
    lines.push(
        Record::new("variance")
            .with("phi", &phi)
            .with("profile", profile)
            .with_f64("kappa4", kappa4)
            .with_f64("kernel_term", v.kernel_term)
            .with_f64("kappa4_term", v.kappa4_term)
            .with_f64("u0_term", v.u0_term)
            .with_f64("total", v.total),
    );
    if let Some(s) = args.sobolev {
        lines.push(
            Record::new("sobolev")
                .with("phi", &phi)
                .with_f64("s", s)
                .with_f64("norm", sobolev_norm(&phi, s)?),
        );
    }
    if let Some(zs) = &args.covariance {
        let (z1, z2) = (parse_complex(&zs[0])?, parse_complex(&zs[1])?);
        let c = covariance_resolvents(z1, z2, &profile, kappa4)?;
        lines.push(
            Record::new("covariance")
                .with_f64("z1_re", z1.re)
                .with_f64("z1_im", z1.im)
                .with_f64("z2_re", z2.re)
                .with_f64("z2_im", z2.im)
                .with_f64("re", c.re)
                .with_f64("im", c.im),
        );
    }
    if let Some(a) = &args.finite_n {
        let n: usize = config_arg("--finite-n N", a[0].parse())?;
        let b: f64 = config_arg("--finite-n B", a[1].parse())?;
        let zeta = parse_complex(&a[2])?;
        let op = FiniteNOperator::new(n, b, profile)?;
        let s = finite_n_sigma(&op, zeta)?;
        lines.push(
            Record::new("finite_n")
                .with("n", n)
                .with_f64("b", b)
                .with_f64("zeta_re", zeta.re)
                .with_f64("zeta_im", zeta.im)
                .with_f64("lhs_re", s.lhs.re)
                .with_f64("lhs_im", s.lhs.im)
                .with_f64("rhs_re", s.rhs.re)
                .with_f64("rhs_im", s.rhs.im)
                .with_f64("limit_re", s.limit.re)
                .with_f64("limit_im", s.limit.im)
                .with_f64("lhs_rhs_gap", (s.lhs - s.rhs).norm()),
        );
    }
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<(usize, f64)>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let bad = || Failure::Config(format!("bad grid point {p:?}; expected n:b"));
            let (n, b) = p.split_once(':').ok_or_else(bad)?;
            Ok((
                n.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

pub fn sweep(path: &Path, grid: Option<&str>) -> Result<(), Failure> {
    let cfg = ConfigFile::load(path)?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => vec![(cfg.experiment.n, cfg.experiment.b()?)],
    };
    for &(n, b) in &grid {
        let point = montecarlo::ExperimentConfig {
            n,
            bandwidth: montecarlo::BandwidthRule::Explicit(b),
            ..cfg.experiment.clone()
        };
        point
            .validate()
            .map_err(|e| Failure::Config(format!("grid point {n}:{b}: {e}")))?;
    }
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).map_err(io_failure(dir))?;

    let progress = progress_printer(cfg.experiment.replicas);
    let table = montecarlo::sweep(&cfg.experiment, &grid, Some(&progress))?;

    let p = dir.join("sweep.csv");
    write_sweep(&table, &p)?;
    for t in &table.trends {
        println!(
            "{}",
            Record::new("trend")
                .with("phi", &t.phi)
                .with("inversions", t.inversions)
                .with("significant_inversions", t.significant_inversions)
                .with_f64("noise_band", t.noise_band)
                .with("non_increasing", t.is_non_increasing_within_noise())
        );
    }
    println!("{}", Record::new("written").with("table", p.display()));
    Ok(())
}

fn write_sweep(table: &SweepTable, p: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(p).map_err(csv_failure(p))?;
    w.write_record(montecarlo::SweepRow::HEADER)
        .map_err(csv_failure(p))?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            r.b.to_string(),
            r.phi.clone(),
            format_f64(r.var_emp),
            format_f64(r.var_theory),
            format_f64(r.rel_gap),
            format_f64(r.stderr),
        ])
        .map_err(csv_failure(p))?;
    }
    w.flush().map_err(io_failure(p))
}

pub fn check() -> Result<(), Failure> {
    let mut failed = 0;
    let mut errored = Vec::new();
    for (name, outcome) in selfcheck::full_suite() {
        match outcome {
            Ok(c) => {
                failed += usize::from(!c.passed);
                println!("{}", c.to_record());
            }
            Err(e) => {
                println!(
                    "{}",
                    Record::new("check")
                        .with("name", name)
                        .with("status", "ERROR")
                        .with("message", &e)
                );
                errored.push(name);
            }
        }
    }
    if !errored.is_empty() {
        return Err(Failure::Runtime(format!(
            "check(s) could not run: {}",
            errored.join(", ")
        )));
    }
    if failed > 0 {
        return Err(Failure::Oracle(failed));
    }
    Ok(())
}

pub fn spectrum(
    n: usize,
    b: f64,
    profile: &str,
    distribution: &str,
    seed: u64,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let spec = BandMatrixSpec {
        n,
        b,
        profile: config_arg("--profile", profile.parse())?,
        distribution: config_arg("--distribution", distribution.parse())?,
        seed,
    };
    config_arg("matrix", spec.validate())?;
    let s = eigenvalues(&sample_band_matrix(&spec)?)?;
    match output {
        Some(p) => {
            let f = File::create(p).map_err(io_failure(p))?;
            let mut w = BufWriter::new(f);
            s.write_to(&mut w).map_err(io_failure(p))?;
            w.flush().map_err(io_failure(p))
        }
        None => s
            .write_to(io::stdout().lock())
            .map_err(|e| Failure::Runtime(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_and_grid_parsing() {
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(
            parse_complex("-0.5, 1.5").unwrap(),
            Complex64::new(-0.5, 1.5)
        );
        assert!(parse_complex("1,2,3").is_err());
        assert_eq!(parse_grid("").unwrap(), vec![]);
        assert_eq!(
            parse_grid("1024:16, 2048:32").unwrap(),
            vec![(1024, 16.0), (2048, 32.0)]
        );
        assert!(matches!(parse_grid("1024"), Err(Failure::Config(_))));
    }
}
