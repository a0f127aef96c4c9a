use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adiabatic::check_tau_list;
use crate::eigenflow::Gauge;
use crate::error::{Error, Result};
use crate::propagator::Integrator;
use crate::schedule::{HamiltonianSchedule, ScheduleDescriptor};

pub const DEFAULT_STEPS: usize = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve,
    Phases,
    CheckAdiabatic,
    MsTest,
    BerryTest,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Evolve,
        Experiment::Phases,
        Experiment::CheckAdiabatic,
        Experiment::MsTest,
        Experiment::BerryTest,
        Experiment::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Phases => "phases",
            Experiment::CheckAdiabatic => "check-adiabatic",
            Experiment::MsTest => "ms-test",
            Experiment::BerryTest => "berry-test",
            Experiment::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// One experiment, as read from a JSON config file.
///
/// `experiment` may be omitted in the file when the command line names it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub schedule: ScheduleDescriptor,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_list: Option<Vec<f64>>,
    /// `None` selects the highest level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default)]
    pub gauge: Gauge,
    #[serde(default = "default_true")]
    pub include_geometric: bool,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, schedule: ScheduleDescriptor) -> Self {
        Self {
            experiment: Some(experiment),
            schedule,
            steps: DEFAULT_STEPS,
            tau_list: None,
            level: None,
            gauge: Gauge::default(),
            include_geometric: true,
            integrator: Integrator::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                Error::Config(e.inner().to_string())
            } else {
                Error::Config(format!("`{path}`: {}", e.inner()))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn experiment(&self) -> Result<Experiment> {
        self.experiment
            .ok_or_else(|| Error::param("experiment", "not set in the config or on the command line"))
    }

    /// Resolve the experiment named on the command line against the file.
    pub fn with_experiment(mut self, requested: Experiment) -> Result<Self> {
        match self.experiment {
            Some(e) if e != requested => Err(Error::param(
                "experiment",
                format!("config says `{e}`, command line says `{requested}`"),
            )),
            _ => {
                self.experiment = Some(requested);
                Ok(self)
            }
        }
    }

    /// Range checks beyond what the JSON types enforce; also builds the
    /// schedule once so that family parameters are checked.
    pub fn validate(&self) -> Result<HamiltonianSchedule> {
        let schedule = self.schedule.build()?;
        if self.steps < 2 {
            return Err(Error::param("steps", format!("must be ≥ 2, got {}", self.steps)));
        }
        if let Some(level) = self.level {
            if level >= schedule.dimension() {
                return Err(Error::param(
                    "level",
                    format!("{level} out of range for dimension {}", schedule.dimension()),
                ));
            }
        }
        if let Some(taus) = &self.tau_list {
            check_tau_list(taus)?;
        }
        if self.experiment == Some(Experiment::Sweep) && self.tau_list.is_none() {
            return Err(Error::param("tau_list", "required by the sweep experiment"));
        }
        Ok(schedule)
    }

    pub fn level_for(&self, schedule: &HamiltonianSchedule) -> usize {
        self.level.unwrap_or(schedule.dimension() - 1)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
        .map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schedule": {"family": "precessing_spin", "omega0": 1.0, "omega": 0.02, "theta": 1.0}}"#;

    #[test]
    fn defaults_are_filled() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.steps, 8000);
        assert_eq!(cfg.level, None);
        assert_eq!(cfg.gauge, Gauge::Parallel);
        assert!(cfg.include_geometric);
        assert_eq!(cfg.integrator, Integrator::Magnus4);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
        assert_eq!(cfg.experiment, None);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("{\"schedule\"", "{\"stepz\": 10, \"schedule\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("stepz"), "{err}");
        assert_eq!(err.exit_code(), 2);
        let text = MINIMAL.replace("\"theta\": 1.0", "\"theta\": 1.0, \"phi\": 2");
        assert!(ExperimentConfig::from_json(&text).unwrap_err().to_string().contains("phi"));
    }

    #[test]
    fn out_of_range_theta_is_named() {
        let text = MINIMAL.replace("1.0}", "4.0}");
        match ExperimentConfig::from_json(&text).unwrap_err() {
            Error::InvalidParameter { field, .. } => assert_eq!(field, "theta"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn type_mismatch_and_missing_schedule() {
        let err = ExperimentConfig::from_json(r#"{"steps": 10}"#).unwrap_err();
        assert!(err.to_string().contains("schedule"));
        let text = MINIMAL.replace("{\"schedule\"", "{\"steps\": \"many\", \"schedule\"");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn experiment_resolution() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert!(cfg.experiment().is_err());
        let cfg = cfg.with_experiment(Experiment::Phases).unwrap();
        assert_eq!(cfg.experiment().unwrap(), Experiment::Phases);
        assert!(cfg.with_experiment(Experiment::Evolve).is_err());
        assert_eq!("ms-test".parse::<Experiment>().unwrap(), Experiment::MsTest);
    }

    #[test]
    fn sweep_needs_a_valid_tau_list() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.experiment = Some(Experiment::Sweep);
        assert!(cfg.validate().is_err());
        cfg.tau_list = Some(vec![1.0, 2.0]);
        assert!(cfg.validate().is_err());
        cfg.tau_list = Some(vec![1.0, 2.0, 4.0]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        cfg.tau_list = Some(vec![78.53981633974483, 157.07963267948966, 314.1592653589793]);
        cfg.output.path = Some("out.csv".into());
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }
}
