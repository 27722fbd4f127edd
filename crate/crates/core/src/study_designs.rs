//! Compilers from raw cohorts to person-period analysis datasets.
//!
//! Each [`DesignId`] fixes a time zero, an exposure coding and an eligibility
//! filter. Rows carry analysis time, i.e. periods since the subject's own
//! time zero. Periods follow the cohort conventions: interval `k` is
//! `[k, k + 1)`, an award at `a` exposes from `a`, and an event at `t`
//! happened during `[t - 1, t)`.
//!
//! The same per-subject compiler drives both datasets built from simulated
//! cohorts and exact expectations over an [`ExactDistribution`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::rng::CounterRng;
use crate::cohort::{ExactDistribution, PersonHistory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("design {design} needs the `{param}` parameter")]
    MissingParam { design: DesignId, param: &'static str },
    #[error("{param} = {value} must be below the horizon {horizon}")]
    ParamRange {
        param: &'static str,
        value: usize,
        horizon: usize,
    },
    #[error("design {design} left the {group} group empty")]
    EmptyGroup {
        design: DesignId,
        group: &'static str,
    },
    #[error("prescription time-distribution matching needs at least one winner")]
    NoWinners,
    #[error("design {0} has no notion of immortal time")]
    NoImmortalTime(DesignId),
    #[error("design {0} cannot be evaluated exactly")]
    NotExact(DesignId),
    #[error("unknown design `{0}`")]
    UnknownDesign(String),
    #[error("dataset file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DesignId {
    EverExposedFull,
    SurvivorEligibility,
    ExcludeImmortalExposure,
    ExcludeImmortalEligibility,
    IttAligned,
    PersonTimeSplit,
    TimeDependent,
    SequentialTrials,
    Ptdm,
    ExposureWindowExclusion,
}

impl DesignId {
    pub const ALL: [DesignId; 10] = [
        DesignId::EverExposedFull,
        DesignId::SurvivorEligibility,
        DesignId::ExcludeImmortalExposure,
        DesignId::ExcludeImmortalEligibility,
        DesignId::IttAligned,
        DesignId::PersonTimeSplit,
        DesignId::TimeDependent,
        DesignId::SequentialTrials,
        DesignId::Ptdm,
        DesignId::ExposureWindowExclusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignId::EverExposedFull => "EverExposedFull",
            DesignId::SurvivorEligibility => "SurvivorEligibility",
            DesignId::ExcludeImmortalExposure => "ExcludeImmortalExposure",
            DesignId::ExcludeImmortalEligibility => "ExcludeImmortalEligibility",
            DesignId::IttAligned => "IttAligned",
            DesignId::PersonTimeSplit => "PersonTimeSplit",
            DesignId::TimeDependent => "TimeDependent",
            DesignId::SequentialTrials => "SequentialTrials",
            DesignId::Ptdm => "Ptdm",
            DesignId::ExposureWindowExclusion => "ExposureWindowExclusion",
        }
    }
}

impl fmt::Display for DesignId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignId {
    type Err = CompileError;

    /// Accepts the variant name in any ASCII case, with or without `_`/`-`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        DesignId::ALL
            .into_iter()
            .find(|d| d.as_str().to_ascii_lowercase() == key)
            .ok_or_else(|| CompileError::UnknownDesign(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignParams {
    /// Number of follow-up periods in the cohort.
    pub horizon: usize,
    /// Eligibility period.
    pub tau: Option<usize>,
    /// Exposure-window length.
    pub window: Option<usize>,
    /// Seed for the matching draw.
    pub seed: Option<u64>,
}

impl DesignParams {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            tau: None,
            window: None,
            seed: None,
        }
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn below_horizon(
        &self,
        design: DesignId,
        param: &'static str,
        value: Option<usize>,
    ) -> Result<usize, CompileError> {
        let value = value.ok_or(CompileError::MissingParam { design, param })?;
        if value >= self.horizon {
            return Err(CompileError::ParamRange {
                param,
                value,
                horizon: self.horizon,
            });
        }
        Ok(value)
    }

    /// The landmark period of eligibility-type designs.
    fn landmark(&self, design: DesignId) -> Result<Option<usize>, CompileError> {
        match design {
            DesignId::SurvivorEligibility | DesignId::ExcludeImmortalEligibility => {
                self.below_horizon(design, "tau", self.tau).map(Some)
            }
            DesignId::ExposureWindowExclusion => {
                self.below_horizon(design, "window", self.window).map(Some)
            }
            DesignId::Ptdm if self.seed.is_none() => {
                Err(CompileError::MissingParam { design, param: "seed" })
            }
            _ => Ok(None),
        }
    }
}

/// One interval of follow-up in analysis time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub subject: usize,
    pub trial: Option<usize>,
    pub t_start: usize,
    pub t_stop: usize,
    pub exposed: u8,
    pub event: u8,
    pub cr_event: u8,
    pub weight: f64,
}

impl AnalysisRow {
    pub fn duration(&self) -> usize {
        self.t_stop - self.t_start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// FNV-1a digest of the input cohort.
    pub cohort_digest: u64,
    pub seed: Option<u64>,
    pub params: DesignParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDataset {
    pub design: DesignId,
    pub rows: Vec<AnalysisRow>,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

/// Weighted event and person-time totals, indexed by exposure code.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StratumTotals {
    pub events: [f64; 2],
    pub cr_events: [f64; 2],
    pub person_time: [f64; 2],
}

impl StratumTotals {
    fn add(&mut self, row: &AnalysisRow) {
        let s = usize::from(row.exposed);
        let w = row.weight;
        self.events[s] += w * f64::from(row.event);
        self.cr_events[s] += w * f64::from(row.cr_event);
        self.person_time[s] += w * row.duration() as f64;
    }

    /// `ln[(events_1 / pt_1) / (events_0 / pt_0)]`.
    pub fn log_rate_ratio(&self) -> f64 {
        (self.events[1] / self.person_time[1]).ln() - (self.events[0] / self.person_time[0]).ln()
    }
}

impl AnalysisDataset {
    pub fn totals(&self) -> StratumTotals {
        let mut t = StratumTotals::default();
        for row in &self.rows {
            t.add(row);
        }
        t
    }

    pub fn person_time(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.weight * r.duration() as f64)
            .sum()
    }

    /// Distinct subjects contributing rows.
    pub fn subjects(&self) -> BTreeSet<usize> {
        self.rows.iter().map(|r| r.subject).collect()
    }

    /// Checks the row invariants: positive intervals, contiguous series from
    /// time zero, and events only on a series' final row.
    pub fn check(&self) -> Result<(), String> {
        let mut i = 0;
        while i < self.rows.len() {
            let key = (self.rows[i].subject, self.rows[i].trial);
            let mut expected_start = 0;
            let start = i;
            while i < self.rows.len() && (self.rows[i].subject, self.rows[i].trial) == key {
                let r = &self.rows[i];
                if r.t_start >= r.t_stop {
                    return Err(format!("empty interval for {key:?}"));
                }
                if r.t_start != expected_start {
                    return Err(format!("gap or overlap for {key:?} at {}", r.t_start));
                }
                if r.event + r.cr_event > 1 || r.exposed > 1 || !(r.weight >= 0.0) {
                    return Err(format!("invalid codes for {key:?}"));
                }
                expected_start = r.t_stop;
                i += 1;
            }
            if self.rows[start..i - 1]
                .iter()
                .any(|r| r.event + r.cr_event > 0)
            {
                return Err(format!("event before the final row for {key:?}"));
            }
        }
        Ok(())
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Order-sensitive digest of every field of every history.
pub fn cohort_digest(cohort: &[PersonHistory]) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325;
    for h in cohort {
        let fields = [
            Some(h.id),
            Some(usize::from(h.u)),
            h.scheduled_award,
            h.realized_award,
            h.death,
            h.outcome,
            h.cr_event,
        ];
        for f in fields {
            let v = f.map_or(u64::MAX, |x| x as u64);
            hash = fnv1a(v.to_le_bytes(), hash);
        }
    }
    hash
}

/// Cohort-level context a per-subject compiler may need.
enum Context<'a> {
    Plain,
    Trials(&'a BTreeSet<usize>),
    /// Pseudo time zero drawn for a control, or `None` for winners.
    Matched(Option<usize>),
}

fn push_series(
    out: &mut Vec<AnalysisRow>,
    h: &PersonHistory,
    horizon: usize,
    trial: Option<usize>,
    zero: usize,
    splits: &[(usize, u8)],
    censor: Option<usize>,
) {
    let exit = h.exit(horizon);
    let stop = censor.map_or(exit, |c| c.min(exit));
    if stop <= zero {
        return;
    }
    let first = out.len();
    for (i, &(from, exposed)) in splits.iter().enumerate() {
        let to = splits.get(i + 1).map_or(stop, |s| s.0).min(stop);
        if to > from {
            out.push(AnalysisRow {
                subject: h.id,
                trial,
                t_start: from - zero,
                t_stop: to - zero,
                exposed,
                event: 0,
                cr_event: 0,
                weight: 1.0,
            });
        }
    }
    if out.len() > first && stop == exit {
        let last = out.last_mut().expect("row pushed");
        last.event = u8::from(h.outcome == Some(exit));
        last.cr_event = u8::from(h.cr_event == Some(exit));
    }
}

/// Has the subject had any terminal event by time `t`?
fn event_by(h: &PersonHistory, t: usize) -> bool {
    h.event_time().is_some_and(|e| e <= t)
}

fn exposed_by(h: &PersonHistory, t: usize) -> u8 {
    u8::from(h.realized_award.is_some_and(|a| a <= t))
}

fn compile_subject(
    design: DesignId,
    h: &PersonHistory,
    params: &DesignParams,
    landmark: Option<usize>,
    context: &Context<'_>,
    out: &mut Vec<AnalysisRow>,
) {
    let horizon = params.horizon;
    let series = |out: &mut Vec<AnalysisRow>, zero: usize, exposed: u8| {
        push_series(out, h, horizon, None, zero, &[(zero, exposed)], None)
    };
    match design {
        DesignId::EverExposedFull => series(out, 0, u8::from(h.is_winner())),
        DesignId::SurvivorEligibility => {
            let tau = landmark.expect("validated");
            if !event_by(h, tau) {
                series(out, 0, exposed_by(h, tau));
            }
        }
        DesignId::ExcludeImmortalExposure => match h.realized_award {
            Some(a) => series(out, a, 1),
            None => series(out, 0, 0),
        },
        DesignId::ExcludeImmortalEligibility | DesignId::ExposureWindowExclusion => {
            let zero = landmark.expect("validated");
            if !event_by(h, zero) {
                series(out, zero, exposed_by(h, zero));
            }
        }
        DesignId::IttAligned => series(out, 0, u8::from(h.realized_award == Some(0))),
        DesignId::PersonTimeSplit => match h.realized_award {
            Some(a) if a > 0 => push_series(out, h, horizon, None, 0, &[(0, 0), (a, 1)], None),
            Some(_) => series(out, 0, 1),
            None => series(out, 0, 0),
        },
        DesignId::TimeDependent => {
            let periods: Vec<(usize, u8)> = (0..h.exit(horizon))
                .map(|k| (k, u8::from(h.exposed_in(k))))
                .collect();
            push_series(out, h, horizon, None, 0, &periods, None);
        }
        DesignId::SequentialTrials => {
            let Context::Trials(trials) = context else {
                unreachable!("trial periods supplied by caller")
            };
            for &k in trials.iter() {
                let eligible = !event_by(h, k) && h.realized_award.map_or(true, |a| a >= k);
                if !eligible {
                    continue;
                }
                if h.realized_award == Some(k) {
                    push_series(out, h, horizon, Some(k), k, &[(k, 1)], None);
                } else {
                    push_series(out, h, horizon, Some(k), k, &[(k, 0)], h.realized_award);
                }
            }
        }
        DesignId::Ptdm => match (h.realized_award, context) {
            (Some(a), _) => series(out, a, 1),
            (None, Context::Matched(Some(t))) => {
                if !event_by(h, *t) {
                    series(out, *t, 0);
                }
            }
            _ => unreachable!("matched time supplied by caller"),
        },
    }
}

/// Award periods that open a sequential trial: every period with at least
/// one realized award.
fn trial_periods(cohort: &[PersonHistory]) -> BTreeSet<usize> {
    cohort.iter().filter_map(|h| h.realized_award).collect()
}

fn check_groups(design: DesignId, totals: &StratumTotals) -> Result<(), CompileError> {
    if totals.person_time[0] <= 0.0 {
        return Err(CompileError::EmptyGroup {
            design,
            group: "unexposed",
        });
    }
    if totals.person_time[1] <= 0.0 {
        return Err(CompileError::EmptyGroup {
            design,
            group: "exposed",
        });
    }
    Ok(())
}

/// Compiles `cohort` through `design`. Rows are ordered by
/// `(subject, trial, t_start)`.
pub fn apply_design(
    design: DesignId,
    cohort: &[PersonHistory],
    params: &DesignParams,
) -> Result<AnalysisDataset, CompileError> {
    let landmark = params.landmark(design)?;
    let trials = trial_periods(cohort);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    if design == DesignId::Ptdm {
        let pool: Vec<usize> = cohort.iter().filter_map(|h| h.realized_award).collect();
        if pool.is_empty() {
            return Err(CompileError::NoWinners);
        }
        let rng = CounterRng::new(params.seed.expect("validated"));
        for h in cohort {
            let drawn = h.realized_award.is_none().then(|| {
                let i = (rng.uniform(h.id as u64, 0) * pool.len() as f64) as usize;
                pool[i.min(pool.len() - 1)]
            });
            compile_subject(design, h, params, landmark, &Context::Matched(drawn), &mut rows);
        }
    } else {
        let context = if design == DesignId::SequentialTrials {
            Context::Trials(&trials)
        } else {
            Context::Plain
        };
        for h in cohort {
            compile_subject(design, h, params, landmark, &context, &mut rows);
        }
    }
    rows.sort_by_key(|r| (r.subject, r.trial, r.t_start));

    let dataset = AnalysisDataset {
        design,
        rows,
        provenance: Provenance {
            cohort_digest: cohort_digest(cohort),
            seed: params.seed,
            params: *params,
        },
        warnings: Vec::new(),
    };
    let totals = dataset.totals();
    if design == DesignId::IttAligned && totals.person_time[1] <= 0.0 {
        warnings.push(
            "no awards at period 0: every subject is in the unexposed arm, so the baseline contrast is uninformative"
                .to_string(),
        );
        if totals.person_time[0] <= 0.0 {
            check_groups(design, &totals)?;
        }
    } else {
        check_groups(design, &totals)?;
    }
    Ok(AnalysisDataset { warnings, ..dataset })
}

/// Total immortal person-time the design builds into follow-up.
pub fn immortal_time_total(
    cohort: &[PersonHistory],
    design: DesignId,
    params: &DesignParams,
) -> Result<usize, CompileError> {
    let landmark = params.landmark(design)?;
    match design {
        DesignId::EverExposedFull => Ok(cohort.iter().filter_map(|h| h.realized_award).sum()),
        DesignId::SurvivorEligibility => {
            let tau = landmark.expect("validated");
            Ok(tau * cohort.iter().filter(|h| !event_by(h, tau)).count())
        }
        DesignId::ExcludeImmortalExposure | DesignId::ExcludeImmortalEligibility => Ok(0),
        other => Err(CompileError::NoImmortalTime(other)),
    }
}

/// Compiles every trajectory of `dist`, weighting its rows by the
/// trajectory's probability. `subject` is the trajectory index.
///
/// Sequential trials open at every period where an award has positive
/// probability, the large-cohort limit of [`apply_design`]'s rule.
pub fn exact_dataset(
    design: DesignId,
    dist: &ExactDistribution,
    params: &DesignParams,
) -> Result<AnalysisDataset, CompileError> {
    if design == DesignId::Ptdm {
        return Err(CompileError::NotExact(design));
    }
    let landmark = params.landmark(design)?;
    let trials: BTreeSet<usize> = dist
        .trajectories
        .iter()
        .filter(|t| t.probability > 0.0)
        .filter_map(|t| t.history.realized_award)
        .collect();
    let context = if design == DesignId::SequentialTrials {
        Context::Trials(&trials)
    } else {
        Context::Plain
    };
    let mut rows = Vec::new();
    for (i, t) in dist.trajectories.iter().enumerate() {
        let history = PersonHistory {
            id: i,
            ..t.history.clone()
        };
        let first = rows.len();
        compile_subject(design, &history, params, landmark, &context, &mut rows);
        for row in &mut rows[first..] {
            row.weight = t.probability;
        }
    }
    rows.sort_by_key(|r| (r.subject, r.trial, r.t_start));
    let dataset = AnalysisDataset {
        design,
        rows,
        provenance: Provenance {
            cohort_digest: 0,
            seed: params.seed,
            params: *params,
        },
        warnings: Vec::new(),
    };
    check_groups(design, &dataset.totals())?;
    Ok(dataset)
}

/// Expected totals of `design` per subject drawn from `dist`.
pub fn exact_design_totals(
    design: DesignId,
    dist: &ExactDistribution,
    params: &DesignParams,
) -> Result<StratumTotals, CompileError> {
    exact_dataset(design, dist, params).map(|d| d.totals())
}

pub const DATASET_HEADER: [&str; 8] = [
    "subject", "trial", "t_start", "t_stop", "exposed", "event", "cr_event", "weight",
];

pub fn write_dataset_csv<W: Write>(out: W, dataset: &AnalysisDataset) -> Result<(), CompileError> {
    let io = |e: csv::Error| CompileError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER).map_err(io)?;
    for r in &dataset.rows {
        w.write_record([
            r.subject.to_string(),
            r.trial.map(|t| t.to_string()).unwrap_or_default(),
            r.t_start.to_string(),
            r.t_stop.to_string(),
            r.exposed.to_string(),
            r.event.to_string(),
            r.cr_event.to_string(),
            r.weight.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CompileError::Io(e.to_string()))
}
