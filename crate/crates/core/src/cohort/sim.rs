use rayon::prelude::*;

use super::rng::CounterRng;
use super::{CohortError, PersonHistory, ScenarioConfig, MAX_CLAMP_SHARE};

// Draw indices within a subject's stream.
const DRAW_FRAILTY: u64 = 0;
const DRAW_TRACK: u64 = 1;
const DRAW_DELAY: u64 = 2;
const DRAW_FIRST_PERIOD: u64 = 3;

/// How a subject's exposure is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureRegime {
    /// Scheduled award, realized only if alive and event-free when due.
    Natural,
    /// Exposed from period 0 regardless of survival.
    Always,
    /// Never exposed.
    Never,
    /// Natural course conditional on no award at period 0: the comparison
    /// arm of a baseline-only (intention-to-treat) contrast.
    NoBaselineAward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDraw {
    pub history: PersonHistory,
    /// Hazard draws made while the subject was at risk.
    pub draws: u64,
    pub clamped: u64,
}

fn geometric(v: f64, p: f64) -> Option<usize> {
    if p <= 0.0 {
        None
    } else if p >= 1.0 {
        Some(0)
    } else {
        let k = ((1.0 - v).ln() / (1.0 - p).ln()).floor();
        (k < usize::MAX as f64).then_some(k as usize)
    }
}

fn scheduled_award(
    config: &ScenarioConfig,
    rng: &CounterRng,
    id: u64,
    regime: ExposureRegime,
) -> Option<usize> {
    let track_draw = rng.uniform(id, DRAW_TRACK);
    let delay_draw = rng.uniform(id, DRAW_DELAY);
    match regime {
        ExposureRegime::Always => Some(0),
        ExposureRegime::Never => None,
        ExposureRegime::Natural => {
            if track_draw < config.award_probability {
                geometric(delay_draw, config.award_delay)
            } else {
                None
            }
        }
        ExposureRegime::NoBaselineAward => {
            let p = config.award_probability;
            let q = config.award_delay;
            let rest = 1.0 - p * q;
            if rest <= 0.0 {
                return None;
            }
            if track_draw < p * (1.0 - q) / rest {
                geometric(delay_draw, q).map(|k| k + 1)
            } else {
                None
            }
        }
    }
}

/// Simulates one subject. Uniforms are keyed by `(rng, id, draw index)`, so the
/// same subject under different regimes shares its random numbers.
pub fn simulate_subject(
    config: &ScenarioConfig,
    rng: &CounterRng,
    id: usize,
    regime: ExposureRegime,
) -> SubjectDraw {
    let stream = id as u64;
    let frail = rng.uniform(stream, DRAW_FRAILTY) < config.frailty_prevalence;
    let scheduled = scheduled_award(config, rng, stream, regime)
        .filter(|&a| a < config.horizon);

    let mut history = PersonHistory {
        id,
        u: u8::from(frail),
        scheduled_award: scheduled,
        realized_award: None,
        death: None,
        outcome: None,
        cr_event: None,
    };
    let mut draws = 0;
    let mut clamped = 0;
    for k in 0..config.horizon {
        if scheduled == Some(k) {
            history.realized_award = Some(k);
        }
        let h = config.hazards(frail, history.exposed_in(k));
        draws += 1;
        clamped += u64::from(h.clamped);
        let v = rng.uniform(stream, DRAW_FIRST_PERIOD + k as u64);
        let t = k + 1;
        if v < h.outcome {
            history.outcome = Some(t);
            if config.competing.is_none() {
                history.death = Some(t);
            }
            break;
        } else if v < h.outcome + h.cr {
            history.cr_event = Some(t);
            history.death = Some(t);
            break;
        }
    }
    SubjectDraw {
        history,
        draws,
        clamped,
    }
}

pub(crate) fn simulate_regime(
    config: &ScenarioConfig,
    seed: u64,
    n: usize,
    regime: ExposureRegime,
) -> Result<Vec<PersonHistory>, CohortError> {
    config.validate()?;
    let rng = CounterRng::new(seed);
    let draws: Vec<SubjectDraw> = (0..n)
        .into_par_iter()
        .map(|id| simulate_subject(config, &rng, id, regime))
        .collect();
    let total: u64 = draws.iter().map(|d| d.draws).sum();
    let clamped: u64 = draws.iter().map(|d| d.clamped).sum();
    if total > 0 && clamped as f64 > MAX_CLAMP_SHARE * total as f64 {
        return Err(CohortError::ClampRate {
            clamped,
            draws: total,
        });
    }
    Ok(draws.into_iter().map(|d| d.history).collect())
}

/// Simulates `config.n_subjects` subjects, ordered by id. Deterministic in
/// `(config, seed)`.
pub fn simulate_cohort(config: &ScenarioConfig, seed: u64) -> Result<Vec<PersonHistory>, CohortError> {
    simulate_regime(config, seed, config.n_subjects, ExposureRegime::Natural)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_config;

    #[test]
    fn zero_hazard_realizes_every_scheduled_award() {
        let mut c = test_config();
        c.base_death_hazard = 0.0;
        c.horizon = 10;
        c.eligibility_age = 3;
        let cohort = simulate_cohort(&c, 3).unwrap();
        assert!(cohort.iter().all(|h| h.death.is_none()));
        assert!(cohort.iter().all(|h| h.realized_award == h.scheduled_award));
        assert!(cohort.iter().any(|h| h.realized_award.is_some()));
    }

    #[test]
    fn no_award_track_means_no_exposure() {
        let mut c = test_config();
        c.award_probability = 0.0;
        let cohort = simulate_cohort(&c, 5).unwrap();
        assert!(cohort.iter().all(|h| h.realized_award.is_none()));
    }

    #[test]
    fn deterministic_in_seed() {
        let c = test_config();
        assert_eq!(simulate_cohort(&c, 11).unwrap(), simulate_cohort(&c, 11).unwrap());
        assert_ne!(simulate_cohort(&c, 11).unwrap(), simulate_cohort(&c, 12).unwrap());
    }

    #[test]
    fn extreme_effects_trip_the_clamp_monitor() {
        let mut c = test_config();
        c.base_death_hazard = 0.5;
        c.log_frailty_effect = 3.0;
        c.frailty_prevalence = 0.5;
        assert!(matches!(
            simulate_cohort(&c, 1),
            Err(CohortError::ClampRate { .. })
        ));
    }

    #[test]
    fn competing_events_are_exclusive() {
        let mut c = test_config();
        c.competing = Some(crate::cohort::CompetingConfig {
            base_outcome_hazard: 0.1,
            base_cr_hazard: 0.1,
            log_effect_on_cr: 0.0,
        });
        let cohort = simulate_cohort(&c, 2).unwrap();
        for h in &cohort {
            h.check(c.horizon).unwrap();
            assert_eq!(h.death, h.cr_event);
        }
        assert!(cohort.iter().any(|h| h.outcome.is_some()));
        assert!(cohort.iter().any(|h| h.cr_event.is_some()));
    }

    #[test]
    fn geometric_edges() {
        assert_eq!(geometric(0.3, 1.0), Some(0));
        assert_eq!(geometric(0.3, 0.0), None);
        assert_eq!(geometric(0.0, 0.5), Some(0));
        assert_eq!(geometric(0.5, 0.5), Some(1));
        assert_eq!(geometric(0.74, 0.5), Some(1));
        assert_eq!(geometric(0.76, 0.5), Some(2));
    }
}
