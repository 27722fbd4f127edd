//! Monte Carlo harness: replicate cohorts, compile designs, estimate, and
//! summarise bias against the oracle.

use immortal_core::cohort::rng::{derive_seed, mix64};
use immortal_core::cohort::{oracle_itt_effect, oracle_true_effect, simulate_cohort, TrueEffect};
use immortal_core::estimators::{Estimate, EstimatorId};
use immortal_core::study_designs::{apply_design, DesignId};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

const ORACLE_DOMAIN: u64 = 0x4F52_4143_4C45;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("replicate {replicate}, {stage}: {message}")]
    Replicate {
        replicate: usize,
        stage: String,
        message: String,
    },
}

/// Seed of the oracle run for a master seed.
pub fn oracle_seed(master_seed: u64) -> u64 {
    mix64(master_seed ^ ORACLE_DOMAIN)
}

/// Cohort seed of replicate `r`.
pub fn replicate_seed(master_seed: u64, r: usize) -> u64 {
    derive_seed(master_seed, r as u64)
}

/// Which oracle a summary row is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthLabel {
    /// Always exposed versus never exposed.
    Marginal,
    /// Exposed at baseline versus not exposed at baseline.
    Baseline,
}

impl TruthLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Marginal => "marginal_log_rate_ratio",
            TruthLabel::Baseline => "baseline_log_rate_ratio",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [TruthLabel::Marginal, TruthLabel::Baseline]
            .into_iter()
            .find(|t| t.as_str() == s)
    }

    fn for_design(design: DesignId) -> Self {
        if design == DesignId::IttAligned {
            TruthLabel::Baseline
        } else {
            TruthLabel::Marginal
        }
    }
}

/// Summary of one (design, estimator) over all replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub design: DesignId,
    pub estimator: EstimatorId,
    pub replicates: usize,
    pub mean: f64,
    pub sd: f64,
    pub truth: f64,
    pub truth_se: f64,
    pub truth_label: TruthLabel,
    /// `mean - truth`.
    pub bias: f64,
    /// `sqrt(sd^2 / replicates + truth_se^2)`.
    pub mc_error: f64,
    pub frac_negative: f64,
    pub coverage: f64,
    pub corrected: usize,
    /// Exposure coefficient of the generating hazard model, reported next to
    /// hazard-model rows. Not the bias baseline.
    pub conditional_log_hr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub oracle_seed: u64,
    pub oracle: TrueEffect,
    /// Present when a baseline-exposure design is configured.
    pub baseline_oracle: Option<TrueEffect>,
    pub rows: Vec<DesignSummary>,
    /// `estimates[i][r]`: design `i`, replicate `r`.
    pub estimates: Vec<Vec<Estimate>>,
}

fn run_replicate(config: &ExperimentConfig, r: usize) -> Result<Vec<Estimate>, ExperimentError> {
    let seed = replicate_seed(config.master_seed, r);
    let fail = |stage: String, message: String| ExperimentError::Replicate {
        replicate: r,
        stage,
        message,
    };
    let cohort = simulate_cohort(&config.scenario, seed)
        .map_err(|e| fail("simulation".into(), e.to_string()))?;
    let frailty: Vec<u8> = cohort.iter().map(|h| h.u).collect();
    config
        .designs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            let params = run.params.with_seed(derive_seed(seed, i as u64));
            let data = apply_design(run.design, &cohort, &params)
                .map_err(|e| fail(run.label(), e.to_string()))?;
            run.estimator
                .estimate(&data, Some(&frailty))
                .map_err(|e| fail(run.label(), e.to_string()))
        })
        .collect()
}

fn summarise(values: &[Estimate], truth: &TrueEffect) -> (f64, f64, f64, f64, f64, usize) {
    let n = values.len() as f64;
    let mean = values.iter().map(|e| e.log_value).sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|e| (e.log_value - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mc_error = (sd * sd / n + truth.mc_se * truth.mc_se).sqrt();
    let frac_negative = values.iter().filter(|e| e.log_value < 0.0).count() as f64 / n;
    let coverage = values.iter().filter(|e| e.covers(truth.value)).count() as f64 / n;
    let corrected = values.iter().filter(|e| e.corrected).count();
    (mean, sd, mc_error, frac_negative, coverage, corrected)
}

/// Runs the experiment. Replicates run in parallel; results are gathered in
/// replicate order before any reduction, so the report is bit-identical for
/// a fixed config. The first failing replicate (by index) is reported.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    let seed = oracle_seed(config.master_seed);
    let oracle = oracle_true_effect(&config.scenario, seed, config.oracle_n)
        .map_err(|e| ExperimentError::Oracle(e.to_string()))?;
    let baseline_oracle = if config.designs.iter().any(|d| d.design == DesignId::IttAligned) {
        Some(
            oracle_itt_effect(&config.scenario, seed, config.oracle_n)
                .map_err(|e| ExperimentError::Oracle(e.to_string()))?,
        )
    } else {
        None
    };

    let per_replicate: Vec<Result<Vec<Estimate>, ExperimentError>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect();
    let per_replicate = per_replicate.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut estimates = Vec::with_capacity(config.designs.len());
    let mut rows = Vec::with_capacity(config.designs.len());
    for (i, run) in config.designs.iter().enumerate() {
        let values: Vec<Estimate> = per_replicate.iter().map(|rep| rep[i]).collect();
        let label = TruthLabel::for_design(run.design);
        let truth = match label {
            TruthLabel::Marginal => &oracle,
            TruthLabel::Baseline => baseline_oracle.as_ref().unwrap_or(&oracle),
        };
        let (mean, sd, mc_error, frac_negative, coverage, corrected) = summarise(&values, truth);
        rows.push(DesignSummary {
            design: run.design,
            estimator: run.estimator,
            replicates: values.len(),
            mean,
            sd,
            truth: truth.value,
            truth_se: truth.mc_se,
            truth_label: label,
            bias: mean - truth.value,
            mc_error,
            frac_negative,
            coverage,
            corrected,
            conditional_log_hr: (run.estimator != EstimatorId::RateRatio)
                .then(|| TrueEffect::conditional(&config.scenario).value),
        });
        estimates.push(values);
    }
    Ok(ExperimentReport {
        config: config.clone(),
        oracle_seed: seed,
        oracle,
        baseline_oracle,
        rows,
        estimates,
    })
}
