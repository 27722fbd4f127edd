//! Exact distribution of one subject's trajectory.
//!
//! Walks the full lattice the simulator samples from: frailty, award
//! schedule, and one categorical draw per interval (none / primary /
//! competing). Draws after the terminal event are still enumerated, so the
//! lattice mirrors the per-period coin flips; collapsing points with the same
//! history gives the trajectory distribution.

use std::collections::BTreeMap;

use super::{CohortError, PersonHistory, ScenarioConfig};

/// Cap on the number of lattice points.
pub const MAX_LATTICE: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeriodDraw {
    None,
    Primary,
    Competing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub u: u8,
    pub scheduled_award: Option<usize>,
    pub draws: Vec<PeriodDraw>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactTrajectory {
    /// History with `id = 0`.
    pub history: PersonHistory,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub horizon: usize,
    pub lattice: Vec<LatticePoint>,
    /// Distinct histories, in history order.
    pub trajectories: Vec<ExactTrajectory>,
}

impl ExactDistribution {
    pub fn total_probability(&self) -> f64 {
        self.trajectories.iter().map(|t| t.probability).sum()
    }

    /// Expectation of `f` over trajectories.
    pub fn expect(&self, mut f: impl FnMut(&PersonHistory) -> f64) -> f64 {
        self.trajectories
            .iter()
            .map(|t| t.probability * f(&t.history))
            .sum()
    }
}

fn schedules(config: &ScenarioConfig) -> Vec<(Option<usize>, f64)> {
    let p = config.award_probability;
    let mut out = Vec::with_capacity(config.horizon + 1);
    let mut beyond = 1.0 - p;
    let mut remaining_track = p;
    for k in 0..config.horizon {
        let pk = p * config.delay_probability(k);
        remaining_track -= pk;
        out.push((Some(k), pk));
    }
    beyond += remaining_track.max(0.0);
    out.push((None, beyond));
    out
}

fn history_for(
    config: &ScenarioConfig,
    u: u8,
    scheduled: Option<usize>,
    draws: &[PeriodDraw],
) -> PersonHistory {
    let mut h = PersonHistory {
        id: 0,
        u,
        scheduled_award: scheduled,
        realized_award: None,
        death: None,
        outcome: None,
        cr_event: None,
    };
    for (k, draw) in draws.iter().enumerate() {
        if scheduled == Some(k) {
            h.realized_award = Some(k);
        }
        let t = k + 1;
        match draw {
            PeriodDraw::None => continue,
            PeriodDraw::Primary => {
                h.outcome = Some(t);
                if config.competing.is_none() {
                    h.death = Some(t);
                }
            }
            PeriodDraw::Competing => {
                h.cr_event = Some(t);
                h.death = Some(t);
            }
        }
        break;
    }
    h
}

/// Enumerates every lattice point with positive probability.
pub fn enumerate_exact(config: &ScenarioConfig) -> Result<ExactDistribution, CohortError> {
    config.validate()?;
    let horizon = config.horizon;
    let categories: &[PeriodDraw] = if config.competing.is_some() {
        &[PeriodDraw::None, PeriodDraw::Primary, PeriodDraw::Competing]
    } else {
        &[PeriodDraw::None, PeriodDraw::Primary]
    };
    let patterns = (categories.len() as u128).checked_pow(horizon as u32);
    let needed = patterns.map(|p| p * 2 * (horizon as u128 + 1));
    match needed {
        Some(n) if n <= MAX_LATTICE as u128 => {}
        _ => {
            return Err(CohortError::StateSpace {
                needed: needed.unwrap_or(u128::MAX),
                cap: MAX_LATTICE,
            })
        }
    }

    let mut lattice = Vec::new();
    let mut collapsed: BTreeMap<PersonHistory, f64> = BTreeMap::new();
    let frailty = [
        (0u8, 1.0 - config.frailty_prevalence),
        (1u8, config.frailty_prevalence),
    ];
    let pattern_count = patterns.unwrap() as usize;

    for (u, pu) in frailty {
        if pu <= 0.0 {
            continue;
        }
        for (scheduled, ps) in schedules(config) {
            if ps <= 0.0 {
                continue;
            }
            'pattern: for code in 0..pattern_count {
                let mut rest = code;
                let mut draws = Vec::with_capacity(horizon);
                let mut prob = pu * ps;
                for k in 0..horizon {
                    let draw = categories[rest % categories.len()];
                    rest /= categories.len();
                    let exposed = scheduled.is_some_and(|a| a <= k);
                    let h = config.hazards(u == 1, exposed);
                    prob *= match draw {
                        PeriodDraw::None => 1.0 - h.outcome - h.cr,
                        PeriodDraw::Primary => h.outcome,
                        PeriodDraw::Competing => h.cr,
                    };
                    if prob <= 0.0 {
                        continue 'pattern;
                    }
                    draws.push(draw);
                }
                let history = history_for(config, u, scheduled, &draws);
                *collapsed.entry(history).or_insert(0.0) += prob;
                lattice.push(LatticePoint {
                    u,
                    scheduled_award: scheduled,
                    draws,
                    probability: prob,
                });
            }
        }
    }

    Ok(ExactDistribution {
        horizon,
        lattice,
        trajectories: collapsed
            .into_iter()
            .map(|(history, probability)| ExactTrajectory {
                history,
                probability,
            })
            .collect(),
    })
}
