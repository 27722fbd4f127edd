//! Discrete Aalen-Johansen cumulative incidence per exposure stratum.

use serde::{Deserialize, Serialize};

use crate::study_designs::AnalysisDataset;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CifCurves {
    /// Analysis times `1..=t_max`; entry `i` covers the interval ending at
    /// `grid[i]`.
    pub grid: Vec<usize>,
    pub at_risk: Vec<f64>,
    pub cif_outcome: Vec<f64>,
    pub cif_cr: Vec<f64>,
    /// All-cause survival.
    pub survival: Vec<f64>,
    /// `1 - prod(1 - h_outcome)`, treating competing events as censoring.
    pub naive_outcome: Vec<f64>,
    /// The risk set emptied before the end of the grid; curves stop there.
    pub truncated: bool,
}

impl CifCurves {
    /// Largest violation of `cif_outcome + cif_cr + survival = 1`.
    pub fn normalization_error(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| (self.cif_outcome[i] + self.cif_cr[i] + self.survival[i] - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CifReport {
    /// Curves indexed by exposure code.
    pub strata: [CifCurves; 2],
}

/// Estimates `CIF_k(t) = sum_{s <= t} S(s-) h_k(s)` per exposure stratum,
/// where the risk set at `s` is every row covering the interval ending at `s`.
pub fn cumulative_incidence(data: &AnalysisDataset) -> CifReport {
    let t_max = data.rows.iter().map(|r| r.t_stop).max().unwrap_or(0);
    let mut risk = [vec![0.0; t_max], vec![0.0; t_max]];
    let mut outcome = [vec![0.0; t_max], vec![0.0; t_max]];
    let mut competing = [vec![0.0; t_max], vec![0.0; t_max]];
    for r in &data.rows {
        let s = usize::from(r.exposed);
        for k in r.t_start..r.t_stop {
            risk[s][k] += r.weight;
        }
        outcome[s][r.t_stop - 1] += r.weight * f64::from(r.event);
        competing[s][r.t_stop - 1] += r.weight * f64::from(r.cr_event);
    }
    let curves = |s: usize| {
        let mut c = CifCurves::default();
        let (mut surv, mut fo, mut fc, mut naive_surv) = (1.0, 0.0, 0.0, 1.0);
        for k in 0..t_max {
            let n = risk[s][k];
            if n <= 0.0 {
                c.truncated = true;
                break;
            }
            let ho = outcome[s][k] / n;
            let hc = competing[s][k] / n;
            fo += surv * ho;
            fc += surv * hc;
            surv *= 1.0 - ho - hc;
            naive_surv *= 1.0 - ho;
            c.grid.push(k + 1);
            c.at_risk.push(n);
            c.cif_outcome.push(fo);
            c.cif_cr.push(fc);
            c.survival.push(surv);
            c.naive_outcome.push(1.0 - naive_surv);
        }
        c
    };
    CifReport {
        strata: [curves(0), curves(1)],
    }
}
