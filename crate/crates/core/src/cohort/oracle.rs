//! Counterfactual truth for the exposure effect.

use serde::{Deserialize, Serialize};

use super::sim::simulate_regime;
use super::{CohortError, ExposureRegime, PersonHistory, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimand {
    MarginalLogRateRatio,
    ConditionalLogHazardRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueEffect {
    pub estimand: Estimand,
    pub value: f64,
    /// Monte Carlo standard error; 0 for exact values.
    pub mc_se: f64,
}

impl TrueEffect {
    /// The per-period log hazard ratio of the generating model.
    pub fn conditional(config: &ScenarioConfig) -> Self {
        Self {
            estimand: Estimand::ConditionalLogHazardRatio,
            value: config.log_effect,
            mc_se: 0.0,
        }
    }
}

fn arm_totals(arm: &[PersonHistory], horizon: usize) -> (Vec<f64>, Vec<f64>) {
    arm.iter()
        .map(|h| {
            (
                f64::from(u8::from(h.outcome.is_some())),
                h.exit(horizon) as f64,
            )
        })
        .unzip()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Log rate ratio of two paired arms with a delta-method standard error.
///
/// Subject `i` appears in both arms, so the influence function is taken per
/// subject: `e1/E1 - t1/T1 - e0/E0 + t0/T0` with bars denoting means.
fn paired_log_rate_ratio(
    treated: &[PersonHistory],
    control: &[PersonHistory],
    horizon: usize,
) -> Result<TrueEffect, CohortError> {
    let (e1, t1) = arm_totals(treated, horizon);
    let (e0, t0) = arm_totals(control, horizon);
    let (me1, mt1, me0, mt0) = (mean(&e1), mean(&t1), mean(&e0), mean(&t0));
    if me1 == 0.0 {
        return Err(CohortError::NoEvents("exposed"));
    }
    if me0 == 0.0 {
        return Err(CohortError::NoEvents("unexposed"));
    }
    let value = (me1 / mt1).ln() - (me0 / mt0).ln();
    let psi: Vec<f64> = (0..e1.len())
        .map(|i| e1[i] / me1 - t1[i] / mt1 - e0[i] / me0 + t0[i] / mt0)
        .collect();
    let mp = mean(&psi);
    let n = psi.len() as f64;
    let var = psi.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(TrueEffect {
        estimand: Estimand::MarginalLogRateRatio,
        value,
        mc_se: (var / n).sqrt(),
    })
}

fn regime_contrast(
    config: &ScenarioConfig,
    seed: u64,
    n: usize,
    control: ExposureRegime,
) -> Result<TrueEffect, CohortError> {
    if n < 2 {
        return Err(CohortError::OracleSize(n));
    }
    let treated = simulate_regime(config, seed, n, ExposureRegime::Always)?;
    let untreated = simulate_regime(config, seed, n, control)?;
    paired_log_rate_ratio(&treated, &untreated, config.horizon)
}

/// Marginal log rate ratio of the primary event: everyone exposed from
/// period 0 versus nobody ever exposed, on `n` subjects sharing random
/// numbers across arms.
pub fn oracle_true_effect(
    config: &ScenarioConfig,
    seed: u64,
    n: usize,
) -> Result<TrueEffect, CohortError> {
    regime_contrast(config, seed, n, ExposureRegime::Never)
}

/// Estimand of a baseline-only contrast: award at period 0 versus the natural
/// course among those not awarded at period 0.
pub fn oracle_itt_effect(
    config: &ScenarioConfig,
    seed: u64,
    n: usize,
) -> Result<TrueEffect, CohortError> {
    regime_contrast(config, seed, n, ExposureRegime::NoBaselineAward)
}

/// Closed-form value of [`oracle_true_effect`]'s estimand.
///
/// Under a fixed regime the per-period hazards are constant within a frailty
/// stratum, so `E[events] = sum_k S^k h` and `E[person-time] = sum_k S^k`
/// with `S` the all-cause survival per period.
pub fn exact_true_effect(config: &ScenarioConfig) -> Result<TrueEffect, CohortError> {
    config.validate()?;
    let arm = |exposed: bool| {
        let mut events = 0.0;
        let mut person_time = 0.0;
        for (frail, weight) in [
            (false, 1.0 - config.frailty_prevalence),
            (true, config.frailty_prevalence),
        ] {
            let h = config.hazards(frail, exposed);
            let stay = 1.0 - h.outcome - h.cr;
            let mut s = 1.0;
            for _ in 0..config.horizon {
                events += weight * s * h.outcome;
                person_time += weight * s;
                s *= stay;
            }
        }
        (events, person_time)
    };
    let (e1, t1) = arm(true);
    let (e0, t0) = arm(false);
    if e1 == 0.0 {
        return Err(CohortError::NoEvents("exposed"));
    }
    if e0 == 0.0 {
        return Err(CohortError::NoEvents("unexposed"));
    }
    Ok(TrueEffect {
        estimand: Estimand::MarginalLogRateRatio,
        value: (e1 / t1).ln() - (e0 / t0).ln(),
        mc_se: 0.0,
    })
}
