use bandclt::bandeig::eigenvalues;
use bandclt::ensemble::{sample_band_matrix, BandProfile, EntryDistribution};
use bandclt::montecarlo::{run_experiment_with, ExperimentConfig, ExperimentReport, RunOptions};
use bandclt::record::parse_records;
use bandclt::statistics::{evaluate_les, TestFunction};

fn config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        256,
        8.0,
        BandProfile::triangle(),
        EntryDistribution::Gaussian,
        vec![TestFunction::monomial(2), TestFunction::gaussian_bump(0.0, 1.0).unwrap()],
        200,
        11,
    );
    c.worker_count = 2;
    c
}

#[test]
fn replicas_are_recomputable_from_their_seeds() {
    let c = config();
    let out = run_experiment_with(
        &c,
        &RunOptions {
            keep_spectra: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let spectra = out.spectra.unwrap();
    assert_eq!(spectra.len(), 200);
    for r in [0, 57, 199] {
        let s = eigenvalues(&sample_band_matrix(&c.band_spec(r).unwrap()).unwrap()).unwrap();
        assert_eq!(s, spectra[r]);
        assert_eq!(out.samples[0][r].seed, c.replica_seed(r));
    }
    let raw: Vec<f64> = spectra
        .iter()
        .map(|s| evaluate_les(s, &c.test_functions[1]).unwrap())
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    assert!((mean - out.report.entries[1].empirical_mean).abs() < 1e-9 * mean.abs());
    let scale = (8.0f64 / 256.0).sqrt();
    for (x, s) in raw.iter().zip(&out.samples[1]) {
        assert!((scale * (x - mean) - s.value).abs() < 1e-9);
    }
}

#[test]
fn report_survives_text_round_trip() {
    let out = run_experiment_with(&config(), &RunOptions::default()).unwrap();
    let text = out.report.to_text();
    let back = ExperimentReport::from_records(&parse_records(&text).unwrap()).unwrap();
    assert_eq!(back, out.report);
    assert!(out.report.compare(&back).unwrap().identical);
}

#[test]
fn quadratic_variance_is_near_theory() {
    let out = run_experiment_with(&config(), &RunOptions::default()).unwrap();
    let p = &out.report.entries[0];
    let gap = (p.empirical_variance - p.theory.total).abs();
    assert!(gap < 4.0 * p.variance_stderr() + 0.1 * p.theory.total, "{p:?}");
}
