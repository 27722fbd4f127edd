//! Effect estimators over [`AnalysisDataset`]s.

mod cif;
mod hazard;
mod logistic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::study_designs::{AnalysisDataset, StratumTotals};

pub use cif::{cumulative_incidence, CifCurves, CifReport};
pub use hazard::{expand_records, fit_discrete_hazard, HazardFit, PeriodRecord, HAZARD_MAX_ITER, HAZARD_TOLERANCE};
pub use logistic::{
    logistic_log_likelihood, newton_raphson_logistic, newton_raphson_weighted, LogisticFit,
    DIVERGENCE_LIMIT,
};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("the {0} stratum has no person-time")]
    ZeroPersonTime(&'static str),
    #[error("Newton-Raphson did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("information matrix is singular")]
    Singular,
    #[error("complete separation: {0}")]
    Separation(String),
    #[error("invalid input: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub log_value: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Weighted event counts, indexed by exposure code.
    pub events: [f64; 2],
    pub person_time: [f64; 2],
    /// A continuity correction was applied.
    pub corrected: bool,
}

pub const ESTIMATE_HEADER: [&str; 11] = [
    "design",
    "estimator",
    "log_value",
    "se",
    "ci_low",
    "ci_high",
    "events_exposed",
    "events_unexposed",
    "pt_exposed",
    "pt_unexposed",
    "corrected_flag",
];

impl Estimate {
    fn new(log_value: f64, se: f64, totals: &StratumTotals, corrected: bool) -> Self {
        Self {
            log_value,
            se,
            ci_low: log_value - Z_95 * se,
            ci_high: log_value + Z_95 * se,
            events: totals.events,
            person_time: totals.person_time,
            corrected,
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    /// Fields in [`ESTIMATE_HEADER`] order.
    pub fn csv_row(&self, design: &str, estimator: &str) -> Vec<String> {
        vec![
            design.to_string(),
            estimator.to_string(),
            self.log_value.to_string(),
            self.se.to_string(),
            self.ci_low.to_string(),
            self.ci_high.to_string(),
            self.events[1].to_string(),
            self.events[0].to_string(),
            self.person_time[1].to_string(),
            self.person_time[0].to_string(),
            u8::from(self.corrected).to_string(),
        ]
    }
}

/// Person-time rate ratio from stratum totals.
pub fn rate_ratio_from_totals(totals: &StratumTotals) -> Result<Estimate, EstimateError> {
    if !(totals.person_time[1] > 0.0) {
        return Err(EstimateError::ZeroPersonTime("exposed"));
    }
    if !(totals.person_time[0] > 0.0) {
        return Err(EstimateError::ZeroPersonTime("unexposed"));
    }
    let corrected = totals.events[0] == 0.0 || totals.events[1] == 0.0;
    let shift = if corrected { 0.5 } else { 0.0 };
    let a = totals.events[1] + shift;
    let b = totals.events[0] + shift;
    let log_value = (a / totals.person_time[1]).ln() - (b / totals.person_time[0]).ln();
    let se = (1.0 / a + 1.0 / b).sqrt();
    Ok(Estimate::new(log_value, se, totals, corrected))
}

/// `ln[(a / PT1) / (b / PT0)]` with `se = sqrt(1/a + 1/b)`. A stratum with
/// no events triggers a +0.5 correction to both counts.
pub fn rate_ratio(data: &AnalysisDataset) -> Result<Estimate, EstimateError> {
    rate_ratio_from_totals(&data.totals())
}

/// Selectable estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorId {
    RateRatio,
    DiscreteHazard,
    /// Discrete hazard model adjusted for frailty.
    DiscreteHazardAdjusted,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 3] = [
        EstimatorId::RateRatio,
        EstimatorId::DiscreteHazard,
        EstimatorId::DiscreteHazardAdjusted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::RateRatio => "rate_ratio",
            EstimatorId::DiscreteHazard => "discrete_hazard",
            EstimatorId::DiscreteHazardAdjusted => "discrete_hazard_adjusted",
        }
    }

    /// Runs the estimator. `frailty[i]` is subject `i`'s frailty, needed only
    /// by the adjusted model.
    pub fn estimate(
        self,
        data: &AnalysisDataset,
        frailty: Option<&[u8]>,
    ) -> Result<Estimate, EstimateError> {
        match self {
            EstimatorId::RateRatio => rate_ratio(data),
            EstimatorId::DiscreteHazard => fit_discrete_hazard(data, None).map(|f| f.estimate),
            EstimatorId::DiscreteHazardAdjusted => {
                let u = frailty.ok_or_else(|| {
                    EstimateError::Shape("frailty adjustment needs the cohort's u column".into())
                })?;
                fit_discrete_hazard(data, Some(u)).map(|f| f.estimate)
            }
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = EstimateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        EstimatorId::ALL
            .into_iter()
            .find(|e| e.as_str() == key)
            .ok_or_else(|| EstimateError::Shape(format!("unknown estimator `{s}`")))
    }
}
