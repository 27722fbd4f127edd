//! Discrete-time cohort simulator.
//!
//! Every subject enters at period 0 (publication of the discovery). A latent
//! laureate-track flag and a geometric delay schedule an award; the award is
//! realized only if the subject is still alive and event-free when it falls
//! due. That gate is what creates immortal time.
//!
//! Time conventions: interval `k` covers `[k, k + 1)`. An award realized at
//! `a` makes the subject exposed from the start of interval `a`. A terminal
//! event in interval `k` is recorded at time `k + 1`, so event times lie in
//! `1..=horizon` and a realized award always precedes the event.

mod exact;
mod io;
mod oracle;
pub mod rng;
mod sim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{
    enumerate_exact, ExactDistribution, ExactTrajectory, LatticePoint, PeriodDraw, MAX_LATTICE,
};
pub use io::{read_cohort_csv, write_cohort_csv, COHORT_HEADER};
pub use oracle::{exact_true_effect, oracle_itt_effect, oracle_true_effect, Estimand, TrueEffect};
pub use sim::{simulate_cohort, simulate_subject, ExposureRegime, SubjectDraw};

/// Largest per-period hazard the simulator will use.
pub const MAX_HAZARD: f64 = 0.999;

/// Clamped draws above this share of all hazard draws abort a simulation.
pub const MAX_CLAMP_SHARE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("hazard clamp triggered on {clamped} of {draws} draws; effect sizes are too extreme")]
    ClampRate { clamped: u64, draws: u64 },
    #[error("exact enumeration needs {needed} lattice points, above the cap of {cap}")]
    StateSpace { needed: u128, cap: usize },
    #[error("oracle needs at least two subjects, got {0}")]
    OracleSize(usize),
    #[error("no primary events in the {0} arm")]
    NoEvents(&'static str),
    #[error("cohort file: {0}")]
    Io(String),
}

/// Competing-event process: the primary outcome is a non-fatal diagnosis and
/// the competing event is death, which precludes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetingConfig {
    pub base_outcome_hazard: f64,
    pub base_cr_hazard: f64,
    pub log_effect_on_cr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_subjects: usize,
    /// Number of follow-up periods.
    pub horizon: usize,
    pub frailty_prevalence: f64,
    pub award_probability: f64,
    /// Per-period probability that a scheduled award falls due.
    pub award_delay: f64,
    pub base_death_hazard: f64,
    /// Log hazard ratio of exposure on the primary event.
    pub log_effect: f64,
    /// Log hazard ratio of frailty on every event hazard.
    pub log_frailty_effect: f64,
    pub competing: Option<CompetingConfig>,
    /// Eligibility period used by eligibility-defined designs.
    pub eligibility_age: usize,
}

/// Hazards for one interval. `outcome + cr <= MAX_HAZARD`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PeriodHazards {
    pub outcome: f64,
    pub cr: f64,
    pub clamped: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CohortError> {
        let err = |m: String| Err(CohortError::Config(m));
        let probs = [
            ("frailty_prevalence", self.frailty_prevalence),
            ("award_probability", self.award_probability),
            ("award_delay", self.award_delay),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} = {p} is not a probability"));
            }
        }
        let mut hazards = vec![("base_death_hazard", self.base_death_hazard)];
        if let Some(c) = &self.competing {
            hazards.push(("base_outcome_hazard", c.base_outcome_hazard));
            hazards.push(("base_cr_hazard", c.base_cr_hazard));
            if !c.log_effect_on_cr.is_finite() {
                return err("log_effect_on_cr must be finite".into());
            }
        }
        for (name, h) in hazards {
            if !(0.0..1.0).contains(&h) {
                return err(format!("{name} = {h} must lie in [0, 1)"));
            }
        }
        if !self.log_effect.is_finite() || !self.log_frailty_effect.is_finite() {
            return err("log effects must be finite".into());
        }
        if self.horizon < 2 {
            return err(format!("horizon = {} must be at least 2", self.horizon));
        }
        if self.eligibility_age >= self.horizon {
            return err(format!(
                "eligibility_age = {} must be below horizon = {}",
                self.eligibility_age, self.horizon
            ));
        }
        Ok(())
    }

    pub(crate) fn hazards(&self, frail: bool, exposed: bool) -> PeriodHazards {
        let e = if exposed { 1.0 } else { 0.0 };
        let u = if frail { self.log_frailty_effect } else { 0.0 };
        let (outcome, cr) = match &self.competing {
            None => (
                self.base_death_hazard * (self.log_effect * e + u).exp(),
                0.0,
            ),
            Some(c) => (
                c.base_outcome_hazard * (self.log_effect * e + u).exp(),
                c.base_cr_hazard * (c.log_effect_on_cr * e + u).exp(),
            ),
        };
        let total = outcome + cr;
        if total > MAX_HAZARD {
            let scale = MAX_HAZARD / total;
            PeriodHazards {
                outcome: outcome * scale,
                cr: cr * scale,
                clamped: true,
            }
        } else {
            PeriodHazards {
                outcome,
                cr,
                clamped: false,
            }
        }
    }

    /// `P(scheduled award = k)` for a laureate-track subject.
    pub(crate) fn delay_probability(&self, k: usize) -> f64 {
        self.award_delay * (1.0 - self.award_delay).powi(k as i32)
    }
}

/// One simulated subject. Periods are absolute (time zero = publication).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonHistory {
    pub id: usize,
    pub u: u8,
    pub scheduled_award: Option<usize>,
    pub realized_award: Option<usize>,
    pub death: Option<usize>,
    /// Primary event; equals `death` when no competing process is modelled.
    pub outcome: Option<usize>,
    pub cr_event: Option<usize>,
}

impl PersonHistory {
    /// Time of the first terminal event, if any.
    pub fn event_time(&self) -> Option<usize> {
        [self.death, self.outcome, self.cr_event]
            .into_iter()
            .flatten()
            .min()
    }

    /// End of follow-up: first terminal event or the horizon.
    pub fn exit(&self, horizon: usize) -> usize {
        self.event_time().map_or(horizon, |t| t.min(horizon))
    }

    pub fn is_winner(&self) -> bool {
        self.realized_award.is_some()
    }

    /// Exposure status during interval `[k, k + 1)`.
    pub fn exposed_in(&self, k: usize) -> bool {
        self.realized_award.is_some_and(|a| a <= k)
    }

    /// Checks the ordering invariants.
    pub fn check(&self, horizon: usize) -> Result<(), String> {
        if self.outcome.is_some() && self.cr_event.is_some() {
            return Err(format!("subject {} has both outcome and competing event", self.id));
        }
        let all = [
            self.scheduled_award,
            self.realized_award,
            self.death,
            self.outcome,
            self.cr_event,
        ];
        if all.iter().flatten().any(|&t| t > horizon) {
            return Err(format!("subject {} has a period beyond the horizon", self.id));
        }
        if let (Some(a), Some(t)) = (self.realized_award, self.event_time()) {
            if a >= t {
                return Err(format!("subject {} realized an award at {a} after an event at {t}", self.id));
            }
        }
        if self.realized_award.is_some() && self.realized_award != self.scheduled_award {
            return Err(format!("subject {} realized an unscheduled award", self.id));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn test_config() -> ScenarioConfig {
    ScenarioConfig {
        n_subjects: 1000,
        horizon: 4,
        frailty_prevalence: 0.3,
        award_probability: 0.5,
        award_delay: 0.4,
        base_death_hazard: 0.1,
        log_effect: 0.0,
        log_frailty_effect: 3f64.ln(),
        competing: None,
        eligibility_age: 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut c = test_config();
        assert!(c.validate().is_ok());
        c.eligibility_age = 4;
        assert!(c.validate().is_err());
        let mut c = test_config();
        c.horizon = 1;
        c.eligibility_age = 0;
        assert!(c.validate().is_err());
        let mut c = test_config();
        c.base_death_hazard = 1.0;
        assert!(c.validate().is_err());
        let mut c = test_config();
        c.award_probability = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn clamping_scales_total_hazard() {
        let mut c = test_config();
        c.base_death_hazard = 0.5;
        c.log_frailty_effect = 2.0;
        let h = c.hazards(true, false);
        assert!(h.clamped);
        assert!((h.outcome - MAX_HAZARD).abs() < 1e-15);
        assert!(!c.hazards(false, false).clamped);
    }

    #[test]
    fn history_accessors() {
        let h = PersonHistory {
            id: 0,
            u: 0,
            scheduled_award: Some(5),
            realized_award: Some(5),
            death: Some(9),
            outcome: Some(9),
            cr_event: None,
        };
        assert_eq!(h.exit(10), 9);
        assert!(!h.exposed_in(4));
        assert!(h.exposed_in(5));
        assert!(h.check(10).is_ok());
        let bad = PersonHistory {
            realized_award: Some(9),
            scheduled_award: Some(9),
            ..h
        };
        assert!(bad.check(10).is_err());
    }
}
