//! Strict TOML experiment configuration.

use std::path::{Path, PathBuf};

use bandclt::ensemble::{BandProfile, EntryDistribution};
use bandclt::montecarlo::{BandwidthRule, ExperimentConfig, Seeding};
use bandclt::statistics::{TestFunction, DEFAULT_SOBOLEV_INDEX};
use toml::{Table, Value};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "BANDLAB_WORKERS";

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "ensemble",
        &["n", "b", "theta", "c", "profile", "distribution"],
    ),
    ("statistics", &["test_functions", "eta", "sobolev_s"]),
    ("montecarlo", &["replicas", "master_seed", "worker_count"]),
    ("output", &["directory", "dump_samples", "dump_spectra"]),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path} is not valid TOML: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("unknown key {key:?}{}", suggestion_text(.suggestion))]
    UnknownKey {
        key: String,
        suggestion: Option<String>,
    },
    #[error("missing key {0:?}")]
    Missing(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(s) => format!("; did you mean {s:?}?"),
        None => String::new(),
    }
}

fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub directory: PathBuf,
    pub dump_samples: bool,
    pub dump_spectra: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub sobolev_s: f64,
    pub output: OutputOptions,
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn invalid(&self, k: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: self.key(k),
            message: message.into(),
        }
    }

    fn integer(&self, k: &str) -> Result<Option<i64>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Integer(v)) => Ok(Some(*v)),
            Some(_) => Err(self.invalid(k, "expected an integer")),
        }
    }

    fn count(&self, k: &str, min: i64, max: i64) -> Result<Option<usize>, ConfigError> {
        match self.integer(k)? {
            None => Ok(None),
            Some(v) if (min..=max).contains(&v) => Ok(Some(v as usize)),
            Some(v) => Err(self.invalid(k, format!("{v} is outside [{min}, {max}]"))),
        }
    }

    fn real(&self, k: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Float(v)) if v.is_finite() => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(self.invalid(k, "expected a finite number")),
        }
    }

    fn string(&self, k: &str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.invalid(k, "expected a string")),
        }
    }

    fn boolean(&self, k: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(self.invalid(k, "expected true or false")),
        }
    }

    fn require<T>(&self, k: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing(self.key(k)))
    }
}

fn check_keys(doc: &Table) -> Result<(), ConfigError> {
    for (name, value) in doc {
        let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == name) else {
            return Err(ConfigError::UnknownKey {
                key: name.clone(),
                suggestion: suggest(name, SCHEMA.iter().map(|s| s.0)),
            });
        };
        let Value::Table(table) = value else {
            return Err(ConfigError::Invalid {
                key: name.clone(),
                message: "expected a section".into(),
            });
        };
        for k in table.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey {
                    key: format!("{name}.{k}"),
                    suggestion: suggest(k, keys.iter().copied()),
                });
            }
        }
    }
    Ok(())
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn default_workers() -> Result<usize, ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(ConfigError::Invalid {
                key: WORKERS_ENV.into(),
                message: format!("{v:?} is not a positive integer"),
            }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax {
                path: path.to_path_buf(),
                message: e.message().to_string(),
            })?;
        Self::from_table(&doc)
    }

    pub fn from_table(doc: &Table) -> Result<Self, ConfigError> {
        check_keys(doc)?;
        let section = |name| Section {
            name,
            table: doc.get(name).and_then(Value::as_table),
        };
        let ens = section("ensemble");
        let stats = section("statistics");
        let mc = section("montecarlo");
        let out = section("output");

        let n = ens.require("n", ens.count("n", 1, 1 << 27)?)?;
        let bandwidth = match (ens.real("b")?, ens.real("theta")?) {
            (Some(_), Some(_)) => return Err(ens.invalid("b", "give either b or theta, not both")),
            (None, None) => return Err(ConfigError::Missing("ensemble.b".into())),
            (Some(b), None) => {
                if ens.get("c").is_some() {
                    return Err(ens.invalid("c", "only used together with theta"));
                }
                if b < 2.0 {
                    return Err(ens.invalid("b", format!("{b} is below 2")));
                }
                BandwidthRule::Explicit(b)
            }
            (None, Some(theta)) => {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(ens.invalid("theta", format!("{theta} is outside (0, 1)")));
                }
                let c = ens.real("c")?.unwrap_or(1.0);
                if c <= 0.0 {
                    return Err(ens.invalid("c", format!("{c} is not positive")));
                }
                BandwidthRule::Power { c, theta }
            }
        };
        let profile: BandProfile = ens
            .string("profile")?
            .unwrap_or("box")
            .parse()
            .map_err(|e: bandclt::Error| ens.invalid("profile", e.to_string()))?;
        let distribution: EntryDistribution = ens
            .string("distribution")?
            .unwrap_or("gaussian")
            .parse()
            .map_err(|e: bandclt::Error| ens.invalid("distribution", e.to_string()))?;

        let test_functions = match stats.get("test_functions") {
            None => vec![TestFunction::monomial(2)],
            Some(Value::Array(items)) if !items.is_empty() => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s
                        .parse::<TestFunction>()
                        .map_err(|e| stats.invalid("test_functions", e.to_string())),
                    _ => Err(stats.invalid("test_functions", "expected strings")),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => {
                return Err(stats.invalid("test_functions", "expected a non-empty list of strings"))
            }
        };
        let eta = stats.real("eta")?;
        if let Some(eta) = eta {
            if eta <= 0.0 {
                return Err(stats.invalid("eta", format!("{eta} is not positive")));
            }
        }
        let sobolev_s = stats.real("sobolev_s")?.unwrap_or(DEFAULT_SOBOLEV_INDEX);
        if sobolev_s <= 2.0 {
            return Err(stats.invalid("sobolev_s", format!("{sobolev_s} is not above 2")));
        }

        let replicas = mc.require("replicas", mc.count("replicas", 2, 1 << 30)?)?;
        let master_seed = match mc.integer("master_seed")? {
            None => 0,
            Some(v) if v >= 0 => v as u64,
            Some(v) => return Err(mc.invalid("master_seed", format!("{v} is negative"))),
        };
        let worker_count = match mc.count("worker_count", 1, 4096)? {
            Some(w) => w,
            None => default_workers()?,
        };

        let output = OutputOptions {
            directory: PathBuf::from(out.string("directory")?.unwrap_or(".")),
            dump_samples: out.boolean("dump_samples")?.unwrap_or(false),
            dump_spectra: out.boolean("dump_spectra")?.unwrap_or(false),
        };

        let experiment = ExperimentConfig {
            n,
            bandwidth,
            profile,
            distribution,
            test_functions,
            replicas,
            master_seed,
            eta,
            worker_count,
            seeding: Seeding::PerReplica,
        };
        experiment.validate().map_err(|e| ConfigError::Invalid {
            key: "ensemble".into(),
            message: e.to_string(),
        })?;
        Ok(ConfigFile {
            experiment,
            sobolev_s,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        ConfigFile::from_table(&text.parse().unwrap())
    }

    const MINIMAL: &str =
        "[ensemble]\nn = 64\nb = 4\n[montecarlo]\nreplicas = 100\nworker_count = 2\n";

    #[test]
    fn minimal_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.experiment.n, 64);
        assert_eq!(c.experiment.bandwidth, BandwidthRule::Explicit(4.0));
        assert_eq!(c.experiment.test_functions, vec![TestFunction::monomial(2)]);
        assert_eq!(c.experiment.worker_count, 2);
        assert_eq!(c.output.directory, PathBuf::from("."));
        assert_eq!(c.sobolev_s, DEFAULT_SOBOLEV_INDEX);
    }

    #[test]
    fn unknown_key_suggestion() {
        let err = parse("[ensemble]\nn = 64\nb = 4\n[montecarlo]\nreplica = 100\n").unwrap_err();
        assert!(
            err.to_string().contains("did you mean \"replicas\""),
            "{err}"
        );
        let err = parse("[ensemble]\nn = 64\nb = 4\n[montecarl]\nreplicas = 100\n").unwrap_err();
        assert!(err.to_string().contains("\"montecarlo\""), "{err}");
        let err = parse("[ensemble]\nn = 64\nb = 4\nzzz = 1\n").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::UnknownKey {
                suggestion: None,
                ..
            }
        ));
    }

    #[test]
    fn range_checks() {
        for bad in [
            "[ensemble]\nn = 0\nb = 4\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 1\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\ntheta = 1.5\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 4\ntheta = 0.5\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 4\n[montecarlo]\nreplicas = 1\n",
            "[ensemble]\nn = 64\nb = 4\n[montecarlo]\nreplicas = 100\nworker_count = 0\n",
            "[ensemble]\nn = 64\nb = 4\n[montecarlo]\nreplicas = \"x\"\n",
            "[ensemble]\nn = 64\nb = 4\n[statistics]\neta = -1\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 4\n[statistics]\nsobolev_s = 1.5\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 4\n[statistics]\ntest_functions = []\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 80\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\nb = 4\nprofile = \"boxx\"\n[montecarlo]\nreplicas = 100\n",
            "[ensemble]\nn = 64\n[montecarlo]\nreplicas = 100\n",
        ] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn power_rule_and_functions() {
        let c = parse(
            "[ensemble]\nn = 1024\ntheta = 0.5\nc = 0.5\nprofile = \"triangle\"\ndistribution = \"student_t:9\"\n\
             [statistics]\ntest_functions = [\"gauss:0,1\", \"bump:0.5,1\"]\neta = 0.2\n\
             [montecarlo]\nreplicas = 100\nmaster_seed = 7\nworker_count = 1\n\
             [output]\ndirectory = \"out\"\ndump_samples = true\n",
        )
        .unwrap();
        assert_eq!(c.experiment.b().unwrap(), 16.0);
        assert_eq!(c.experiment.test_functions.len(), 2);
        assert_eq!(c.experiment.eta, Some(0.2));
        assert!(c.output.dump_samples && !c.output.dump_spectra);
    }
}
