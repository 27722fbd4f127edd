use std::io::{Read, Write};

use super::{CohortError, PersonHistory};

pub const COHORT_HEADER: [&str; 7] = [
    "id",
    "u",
    "scheduled_award",
    "realized_award",
    "death",
    "outcome",
    "cr_event",
];

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(e: impl std::fmt::Display) -> CohortError {
    CohortError::Io(e.to_string())
}

pub fn write_cohort_csv<W: Write>(out: W, cohort: &[PersonHistory]) -> Result<(), CohortError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COHORT_HEADER).map_err(io_err)?;
    for h in cohort {
        w.write_record([
            h.id.to_string(),
            h.u.to_string(),
            opt(h.scheduled_award),
            opt(h.realized_award),
            opt(h.death),
            opt(h.outcome),
            opt(h.cr_event),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn parse_field(record: &csv::StringRecord, i: usize, line: u64) -> Result<Option<usize>, CohortError> {
    let raw = record.get(i).unwrap_or("").trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| {
        CohortError::Io(format!(
            "line {line}: {} = {raw:?} is not a non-negative integer",
            COHORT_HEADER[i]
        ))
    })
}

/// Reads a cohort written by [`write_cohort_csv`] and checks each history's
/// ordering invariants against `horizon`.
pub fn read_cohort_csv<R: Read>(input: R, horizon: usize) -> Result<Vec<PersonHistory>, CohortError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?;
    if header.iter().ne(COHORT_HEADER) {
        return Err(CohortError::Io(format!(
            "expected header {}",
            COHORT_HEADER.join(",")
        )));
    }
    let mut cohort = Vec::new();
    for record in r.records() {
        let record = record.map_err(io_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let required = |i| {
            parse_field(&record, i, line)?
                .ok_or_else(|| CohortError::Io(format!("line {line}: {} is required", COHORT_HEADER[i])))
        };
        let id = required(0)?;
        let u = required(1)?;
        if u > 1 {
            return Err(CohortError::Io(format!("line {line}: u must be 0 or 1")));
        }
        let h = PersonHistory {
            id,
            u: u as u8,
            scheduled_award: parse_field(&record, 2, line)?,
            realized_award: parse_field(&record, 3, line)?,
            death: parse_field(&record, 4, line)?,
            outcome: parse_field(&record, 5, line)?,
            cr_event: parse_field(&record, 6, line)?,
        };
        h.check(horizon)
            .map_err(|m| CohortError::Io(format!("line {line}: {m}")))?;
        cohort.push(h);
    }
    Ok(cohort)
}
