//! Scenario and experiment configuration files.
//!
//! ```toml
//! [scenario]
//! n_subjects = 20000
//! horizon = 4
//! frailty_prevalence = 0.3
//! award_probability = 0.5
//! award_delay = 0.4
//! base_death_hazard = 0.05
//! log_effect = -0.3
//! log_frailty_effect = 0.6931471805599453
//! eligibility_age = 2
//!
//! [competing]            # optional
//! base_outcome_hazard = 0.02
//! base_cr_hazard = 0.15
//! log_effect_on_cr = 0.0
//!
//! [experiment]
//! replicates = 200
//! master_seed = 1
//! oracle_n = 200000
//! output_dir = "out"     # optional
//!
//! [[design]]             # one table per design run
//! design = "ever_exposed_full"
//! estimator = "rate_ratio"
//! tau = 2                # optional, defaults to eligibility_age
//! window = 2             # optional, defaults to eligibility_age
//! ```
//!
//! Keys mirror the field names of the core types. Unknown keys are errors.

use std::path::PathBuf;

use immortal_core::cohort::{CompetingConfig, ScenarioConfig};
use immortal_core::estimators::EstimatorId;
use immortal_core::study_designs::{DesignId, DesignParams};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    n_subjects: usize,
    horizon: usize,
    frailty_prevalence: f64,
    award_probability: f64,
    award_delay: f64,
    base_death_hazard: f64,
    log_effect: f64,
    log_frailty_effect: f64,
    eligibility_age: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompetingSection {
    base_outcome_hazard: f64,
    base_cr_hazard: f64,
    log_effect_on_cr: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    replicates: usize,
    master_seed: u64,
    oracle_n: usize,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignSection {
    design: String,
    estimator: String,
    tau: Option<usize>,
    window: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    competing: Option<CompetingSection>,
    experiment: Option<ExperimentSection>,
    #[serde(default)]
    design: Vec<DesignSection>,
}

/// One design compiled and estimated in every replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignRun {
    pub design: DesignId,
    /// The matching seed is replaced per replicate.
    pub params: DesignParams,
    pub estimator: EstimatorId,
}

impl DesignRun {
    pub fn label(&self) -> String {
        format!("{}/{}", self.design, self.estimator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub designs: Vec<DesignRun>,
    pub replicates: usize,
    pub master_seed: u64,
    pub oracle_n: usize,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Runs every design in `designs` with its default parameters.
    pub fn new(
        scenario: ScenarioConfig,
        designs: &[(DesignId, EstimatorId)],
        replicates: usize,
        master_seed: u64,
        oracle_n: usize,
    ) -> Self {
        let designs = designs
            .iter()
            .map(|&(design, estimator)| DesignRun {
                design,
                params: default_params(&scenario),
                estimator,
            })
            .collect();
        Self {
            scenario,
            designs,
            replicates,
            master_seed,
            oracle_n,
            output_dir: PathBuf::from("."),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.replicates == 0 {
            return Err(ConfigError::Invalid("replicates must be at least 1".into()));
        }
        if self.designs.is_empty() {
            return Err(ConfigError::Invalid("no [[design]] entries".into()));
        }
        if self.oracle_n < 2 {
            return Err(ConfigError::Invalid("oracle_n must be at least 2".into()));
        }
        Ok(())
    }
}

fn default_params(scenario: &ScenarioConfig) -> DesignParams {
    DesignParams::new(scenario.horizon)
        .with_tau(scenario.eligibility_age)
        .with_window(scenario.eligibility_age)
}

fn scenario_from(file: &ConfigFile) -> ScenarioConfig {
    let s = &file.scenario;
    ScenarioConfig {
        n_subjects: s.n_subjects,
        horizon: s.horizon,
        frailty_prevalence: s.frailty_prevalence,
        award_probability: s.award_probability,
        award_delay: s.award_delay,
        base_death_hazard: s.base_death_hazard,
        log_effect: s.log_effect,
        log_frailty_effect: s.log_frailty_effect,
        competing: file.competing.as_ref().map(|c| CompetingConfig {
            base_outcome_hazard: c.base_outcome_hazard,
            base_cr_hazard: c.base_cr_hazard,
            log_effect_on_cr: c.log_effect_on_cr,
        }),
        eligibility_age: s.eligibility_age,
    }
}

/// Reads the `[scenario]` and `[competing]` sections; other sections are
/// parsed but ignored.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    let scenario = scenario_from(&file);
    scenario
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(scenario)
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    let scenario = scenario_from(&file);
    let experiment = file
        .experiment
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("missing [experiment] section".into()))?;
    let designs = file
        .design
        .iter()
        .map(|d| {
            let design: DesignId = d
                .design
                .parse()
                .map_err(|e: immortal_core::study_designs::CompileError| ConfigError::Invalid(e.to_string()))?;
            let estimator: EstimatorId = d
                .estimator
                .parse()
                .map_err(|e: immortal_core::estimators::EstimateError| ConfigError::Invalid(e.to_string()))?;
            let mut params = default_params(&scenario);
            params.tau = d.tau.or(params.tau);
            params.window = d.window.or(params.window);
            Ok(DesignRun {
                design,
                params,
                estimator,
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let config = ExperimentConfig {
        scenario,
        designs,
        replicates: experiment.replicates,
        master_seed: experiment.master_seed,
        oracle_n: experiment.oracle_n,
        output_dir: experiment
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    config.validate()?;
    Ok(config)
}
