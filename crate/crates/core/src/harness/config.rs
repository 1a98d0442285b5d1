//! Scenario files and experiment specifications.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};

/// Parses and validates a TOML scenario. Missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate().map_err(into_config)?;
    Ok(cfg)
}

/// Reads a scenario file; every failure is reported as a config error.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn into_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    PowerCompare,
    MuOutage,
    TrVsZf,
    BoundTightness,
    FuOutage,
    RobustPower,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::PowerCompare,
        Experiment::MuOutage,
        Experiment::TrVsZf,
        Experiment::BoundTightness,
        Experiment::FuOutage,
        Experiment::RobustPower,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PowerCompare => "power-compare",
            Experiment::MuOutage => "mu-outage",
            Experiment::TrVsZf => "tr-vs-zf",
            Experiment::BoundTightness => "bound-tightness",
            Experiment::FuOutage => "fu-outage",
            Experiment::RobustPower => "robust-power",
        }
    }

    pub fn default_trials(self) -> u64 {
        match self {
            Experiment::FuOutage => 100,
            _ => 1000,
        }
    }

    /// Sweep keys in output order with their default grids.
    pub fn default_sweep(self) -> Vec<(&'static str, Vec<f64>)> {
        let span = |lo: i32, hi: i32, step: i32| -> Vec<f64> {
            (lo..=hi).step_by(step as usize).map(f64::from).collect()
        };
        match self {
            Experiment::PowerCompare => vec![
                ("gamma_m_db", vec![-3.0, -1.0, 1.0]),
                ("gamma_f_db", span(-4, 4, 1)),
            ],
            Experiment::MuOutage => vec![
                ("gamma_m_db", vec![-1.0]),
                ("xi", vec![0.0, 0.05, 0.1, 0.2]),
            ],
            Experiment::TrVsZf => vec![("n1", vec![2.0, 4.0]), ("tx_dbm", span(0, 40, 2))],
            Experiment::BoundTightness => vec![("psi", vec![0.05, 0.1])],
            Experiment::FuOutage => vec![("psi", vec![0.04])],
            Experiment::RobustPower => vec![("psi", vec![0.04]), ("gamma_f_db", span(-4, 4, 1))],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// One swept parameter and its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

/// Parses `key=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<SweepAxis> {
    let (key, vals) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep {arg:?} is not key=v1,v2,...")))?;
    let values = vals
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("sweep value {v:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config(format!("sweep {key} has no values")));
    }
    Ok(SweepAxis {
        key: key.trim().to_string(),
        values,
    })
}

/// A fully resolved experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub trials: u64,
    /// Axes in the experiment's canonical order.
    pub sweep: Vec<SweepAxis>,
    pub seed: u64,
    pub output_path: PathBuf,
}

fn check_value(key: &str, v: f64) -> Result<()> {
    let ok = match key {
        "psi" | "xi" => (0.0..1.0).contains(&v),
        "n1" => v >= 1.0 && v.fract() == 0.0 && v <= 64.0,
        _ => v.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("sweep value {v} invalid for {key}")))
    }
}

impl ExperimentSpec {
    /// Default grids with `overrides` applied; unknown keys are rejected.
    pub fn new(
        experiment: Experiment,
        trials: Option<u64>,
        seed: u64,
        overrides: Vec<SweepAxis>,
        output_path: PathBuf,
    ) -> Result<Self> {
        let mut sweep: Vec<SweepAxis> = experiment
            .default_sweep()
            .into_iter()
            .map(|(k, v)| SweepAxis {
                key: k.to_string(),
                values: v,
            })
            .collect();
        for o in overrides {
            let axis = sweep.iter_mut().find(|a| a.key == o.key).ok_or_else(|| {
                let keys: Vec<_> = experiment.default_sweep().iter().map(|(k, _)| *k).collect();
                Error::Config(format!(
                    "{experiment} does not sweep {:?}; keys are {}",
                    o.key,
                    keys.join(", ")
                ))
            })?;
            axis.values = o.values;
        }
        for a in &sweep {
            for v in &a.values {
                check_value(&a.key, *v)?;
            }
        }
        let trials = trials.unwrap_or(experiment.default_trials());
        if trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        Ok(Self {
            experiment,
            trials,
            sweep,
            seed,
            output_path,
        })
    }

    pub fn axis(&self, key: &str) -> &[f64] {
        self.sweep
            .iter()
            .find(|a| a.key == key)
            .map(|a| a.values.as_slice())
            .unwrap_or(&[])
    }

    /// Cartesian product of the sweep axes, first axis outermost.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for a in &self.sweep {
            out = out
                .into_iter()
                .flat_map(|p| {
                    a.values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn partial_override() {
        let c = parse_config("[power]\ngamma_f_db = 3.5\n[network]\nfemto_users = 3\n").unwrap();
        assert_eq!(c.power.gamma_f_db, 3.5);
        assert_eq!(c.network.femto_users, 3);
        assert_eq!(c.network.macro_users, 2);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(parse_config("[power]\ngama = 1\n"), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_value_is_config_error() {
        assert!(matches!(parse_config("[robust]\npsi = 1.5\n"), Err(Error::Config(_))));
        assert!(matches!(
            parse_config("[channel]\nmacro_profile = \"nope\"\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_parsing() {
        let a = parse_sweep("gamma_f_db=-4,0,2.5").unwrap();
        assert_eq!(a.key, "gamma_f_db");
        assert_eq!(a.values, vec![-4.0, 0.0, 2.5]);
        assert!(parse_sweep("psi").is_err());
        assert!(parse_sweep("psi=a").is_err());
    }

    #[test]
    fn spec_rejects_foreign_keys_and_bad_values() {
        let p = PathBuf::from("x.csv");
        let bad = parse_sweep("psi=0.1").unwrap();
        assert!(ExperimentSpec::new(Experiment::PowerCompare, None, 1, vec![bad], p.clone()).is_err());
        let bad = parse_sweep("psi=1.2").unwrap();
        assert!(ExperimentSpec::new(Experiment::BoundTightness, None, 1, vec![bad], p.clone()).is_err());
        assert!(ExperimentSpec::new(Experiment::BoundTightness, Some(0), 1, vec![], p).is_err());
    }

    #[test]
    fn grid_order() {
        let s = ExperimentSpec::new(
            Experiment::PowerCompare,
            Some(1),
            1,
            vec![parse_sweep("gamma_f_db=0,1").unwrap()],
            PathBuf::from("x.csv"),
        )
        .unwrap();
        let g = s.grid();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![-3.0, 0.0]);
        assert_eq!(g[1], vec![-3.0, 1.0]);
        assert_eq!(g[5], vec![1.0, 1.0]);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }
}
