use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bandclt::montecarlo::ExperimentReport;
use bandclt::record::{parse_records, Record};

fn bandlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("BANDLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn records(o: &Output) -> Vec<Record> {
    parse_records(&stdout(o)).unwrap()
}

const MINIMAL: &str = "\
[ensemble]
n = 64
b = 4

[montecarlo]
replicas = 100
master_seed = 3
worker_count = 2

[output]
directory = \"out\"
";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandlab(&["simulate", "nowhere.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.toml"), "{}", stderr(&o));
}

#[test]
fn simulate_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = bandlab(&["simulate", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    let report = ExperimentReport::from_records(&parse_records(&text).unwrap()).unwrap();
    assert_eq!(report.to_text(), text);
    assert_eq!(report.entries[0].sample_count, 100);
    assert!(text.lines().all(|l| l.parse::<Record>().is_ok()));
    let summary = &records(&o)[0];
    assert_eq!(summary.kind(), "summary");
    assert!(summary.parse::<f64>("variance").unwrap() > 0.0);
    assert!(!dir.path().join("out/samples.csv").exists());
}

#[test]
fn simulate_is_reproducible_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace(
        "\"out\"",
        "\"out\"\ndump_samples = true\ndump_spectra = true",
    ) + "[statistics]\ntest_functions = [\"poly:0,0,1\", \"gauss:0,1\"]\n";
    let cfg = write_config(dir.path(), &text);
    assert_eq!(
        bandlab(&["simulate", &cfg], dir.path()).status.code(),
        Some(0)
    );
    let first = fs::read(dir.path().join("out/report.txt")).unwrap();
    let samples = fs::read_to_string(dir.path().join("out/samples.csv")).unwrap();
    assert_eq!(samples.lines().next(), Some("replica,seed,phi,value"));
    assert_eq!(samples.lines().count(), 1 + 2 * 100);
    let spectra = fs::read_to_string(dir.path().join("out/spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 1 + 64 * 100);

    let one_worker = text.replace("worker_count = 2", "worker_count = 1");
    let cfg = write_config(dir.path(), &one_worker);
    assert_eq!(
        bandlab(&["simulate", &cfg], dir.path()).status.code(),
        Some(0)
    );
    let second = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    let first = String::from_utf8(first).unwrap();
    // only the recorded worker count differs
    assert_eq!(
        first.replace("workers=2", "workers=1"),
        second,
        "reports differ beyond the worker count"
    );
}

#[test]
fn unknown_key_is_suggested() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("replicas", "replica"));
    let o = bandlab(&["simulate", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("\"replicas\""), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn worker_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("worker_count = 2\n", ""));
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_bandlab"))
            .args(["simulate", &cfg])
            .current_dir(dir.path())
            .env("BANDLAB_WORKERS", v)
            .output()
            .unwrap()
    };
    assert_eq!(run("3").status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(text.contains("workers=3"));
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn theory_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandlab(&["theory", "--phi", "const:1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(records(&o)[0].parse::<f64>("total").unwrap(), 0.0);

    let o = bandlab(
        &["theory", "--profile", "box", "--kappa4", "-2"],
        dir.path(),
    );
    let v = &records(&o)[0];
    assert!((v.parse::<f64>("kappa4_term").unwrap() + 1.0).abs() < 1e-12);
    assert!(stdout(&o).contains("kappa4_term=-1.0000000000000000e0"));

    let o = bandlab(&["theory", "--distribution", "rademacher"], dir.path());
    assert_eq!(records(&o)[0].parse::<f64>("kappa4").unwrap(), -2.0);

    let o = bandlab(
        &[
            "theory",
            "--finite-n",
            "1024",
            "16",
            "2.0",
            "--covariance",
            "0.5,1",
            "-0.3,0.8",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rs = records(&o);
    let f = rs.iter().find(|r| r.kind() == "finite_n").unwrap();
    for k in [
        "lhs_re",
        "lhs_im",
        "rhs_re",
        "rhs_im",
        "limit_re",
        "limit_im",
        "lhs_rhs_gap",
    ] {
        assert!(f.parse::<f64>(k).unwrap().is_finite(), "{k}");
    }
    assert!(rs.iter().any(|r| r.kind() == "covariance"));

    assert_eq!(
        bandlab(&["theory", "--profile", "boxx"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        bandlab(&["theory", "--finite-n", "64", "16", "0.5"], dir.path())
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = bandlab(&["sweep", &cfg, "--grid", ""], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(table, "n,b,phi,var_emp,var_theory,rel_gap,stderr\n");

    let o = bandlab(&["sweep", &cfg, "--grid", "64:4,128:6"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("64,4,\"poly:0,0,1\","));
    assert!(records(&o).iter().any(|r| r.kind() == "trend"));

    let o = bandlab(&["sweep", &cfg, "--grid", "64:100"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandlab(&["check"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let rs = records(&o);
    assert!(rs.len() >= 10);
    assert!(rs.iter().all(|r| r.get("status") == Some("PASS")));
}

#[test]
fn spectrum_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = bandlab(
        &["spectrum", "--n", "100", "--b", "5", "--seed", "4"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let values: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 100);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    let o = bandlab(
        &[
            "spectrum", "--n", "100", "--b", "5", "--seed", "4", "--output", "ev.txt",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(dir.path().join("ev.txt")).unwrap(),
        stdout(&bandlab(
            &["spectrum", "--n", "100", "--b", "5", "--seed", "4"],
            dir.path()
        ))
    );
    assert_eq!(
        bandlab(&["spectrum", "--n", "4", "--b", "5"], dir.path())
            .status
            .code(),
        Some(2)
    );
}
