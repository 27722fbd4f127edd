//! Discrete-time hazard model: a logistic regression on person-period
//! records with `event ~ 1 + exposed (+ u)`.

use std::collections::BTreeMap;

use super::logistic::{newton_raphson_weighted, LogisticFit, DIVERGENCE_LIMIT};
use super::{Estimate, EstimateError};
use crate::study_designs::AnalysisDataset;

pub const HAZARD_MAX_ITER: usize = 50;
pub const HAZARD_TOLERANCE: f64 = 1e-10;

/// One person-period at risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord {
    pub exposed: u8,
    pub u: Option<u8>,
    pub event: u8,
    pub weight: f64,
}

impl PeriodRecord {
    pub fn predictors(&self) -> Vec<f64> {
        let mut x = vec![1.0, f64::from(self.exposed)];
        if let Some(u) = self.u {
            x.push(f64::from(u));
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardFit {
    pub estimate: Estimate,
    pub fit: LogisticFit,
}

/// Expands every row into one record per period it covers. The event flag
/// sits on the row's last period. `frailty[s]` is subject `s`'s frailty.
pub fn expand_records(
    data: &AnalysisDataset,
    frailty: Option<&[u8]>,
) -> Result<Vec<PeriodRecord>, EstimateError> {
    let mut out = Vec::new();
    for row in &data.rows {
        let u = match frailty {
            None => None,
            Some(f) => Some(*f.get(row.subject).ok_or_else(|| {
                EstimateError::Shape(format!("no frailty value for subject {}", row.subject))
            })?),
        };
        for k in row.t_start..row.t_stop {
            out.push(PeriodRecord {
                exposed: row.exposed,
                u,
                event: u8::from(k + 1 == row.t_stop && row.event == 1),
                weight: row.weight,
            });
        }
    }
    Ok(out)
}

/// Collapses records to one weighted binomial cell per covariate pattern.
fn aggregate(records: &[PeriodRecord]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut cells: BTreeMap<(u8, Option<u8>), (f64, f64)> = BTreeMap::new();
    for r in records {
        let cell = cells.entry((r.exposed, r.u)).or_default();
        cell.0 += r.weight * f64::from(r.event);
        cell.1 += r.weight;
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for ((exposed, u), (events, total)) in cells {
        if total <= 0.0 {
            continue;
        }
        x.push(
            PeriodRecord {
                exposed,
                u,
                event: 0,
                weight: 0.0,
            }
            .predictors(),
        );
        y.push(events / total);
        w.push(total);
    }
    (x, y, w)
}

/// Fits the discrete-time hazard model and reports the exposure coefficient.
pub fn fit_discrete_hazard(
    data: &AnalysisDataset,
    frailty: Option<&[u8]>,
) -> Result<HazardFit, EstimateError> {
    let records = expand_records(data, frailty)?;
    let events: f64 = records.iter().map(|r| r.weight * f64::from(r.event)).sum();
    let total: f64 = records.iter().map(|r| r.weight).sum();
    if events <= 0.0 || events >= total {
        return Err(EstimateError::Separation(
            "event indicator is constant across person-periods".into(),
        ));
    }
    let (x, y, w) = aggregate(&records);
    // The coefficient of a binary covariate whose level has no events (or
    // only events) runs off to infinity; the fit would stop wherever the
    // gradient first drops below tolerance, so reject it up front.
    for (j, name) in [(1, "exposed"), (2, "u")] {
        for level in [0.0, 1.0] {
            let (mut ev, mut tot) = (0.0, 0.0);
            for ((xi, yi), wi) in x.iter().zip(&y).zip(&w) {
                if xi.get(j) == Some(&level) {
                    ev += yi * wi;
                    tot += wi;
                }
            }
            if tot > 0.0 && (ev <= 0.0 || ev >= tot) {
                return Err(EstimateError::Separation(format!(
                    "{name} = {level} has {} events in {tot} person-periods",
                    if ev <= 0.0 { "no" } else { "only" }
                )));
            }
        }
    }
    if x.len() < x[0].len() {
        return Err(EstimateError::Singular);
    }
    let fit = newton_raphson_weighted(&x, &y, &w, HAZARD_TOLERANCE, HAZARD_MAX_ITER, Some(DIVERGENCE_LIMIT))?;
    let totals = data.totals();
    let beta = fit.coefficients[1];
    let estimate = Estimate::new(beta, fit.se(1), &totals, false);
    Ok(HazardFit { estimate, fit })
}
