//! CSV and SVG renderings of an [`ExperimentReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use immortal_core::estimators::EstimatorId;
use immortal_core::study_designs::DesignId;
use thiserror::Error;

use crate::experiment::{DesignSummary, ExperimentReport, TruthLabel};

pub const REPORT_HEADER: [&str; 14] = [
    "design",
    "estimator",
    "replicates",
    "mean_log_estimate",
    "sd",
    "truth",
    "truth_se",
    "truth_estimand",
    "bias",
    "mc_error",
    "frac_negative",
    "coverage",
    "corrected",
    "conditional_log_hr",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("report csv: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            _ => Err(format!("unknown format `{s}` (expected csv or svg)")),
        }
    }
}

/// One row per (design, estimator). Floats use the shortest representation
/// that parses back to the same value.
pub fn render_csv(report: &ExperimentReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).expect("in-memory write");
    for r in &report.rows {
        w.write_record([
            r.design.as_str().to_string(),
            r.estimator.as_str().to_string(),
            r.replicates.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.truth.to_string(),
            r.truth_se.to_string(),
            r.truth_label.as_str().to_string(),
            r.bias.to_string(),
            r.mc_error.to_string(),
            r.frac_negative.to_string(),
            r.coverage.to_string(),
            r.corrected.to_string(),
            r.conditional_log_hr.map_or(String::new(), |v| v.to_string()),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Parses the output of [`render_csv`].
pub fn parse_report_csv(text: &str) -> Result<Vec<DesignSummary>, ReportError> {
    let err = |m: String| ReportError::Parse(m);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| err(format!("row {}, {}: {e}", line + 1, REPORT_HEADER[i])))
        };
        let count = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| err(format!("row {}, {}: {e}", line + 1, REPORT_HEADER[i])))
        };
        rows.push(DesignSummary {
            design: field(0)
                .parse::<DesignId>()
                .map_err(|e| err(e.to_string()))?,
            estimator: field(1)
                .parse::<EstimatorId>()
                .map_err(|e| err(e.to_string()))?,
            replicates: count(2)?,
            mean: num(3)?,
            sd: num(4)?,
            truth: num(5)?,
            truth_se: num(6)?,
            truth_label: TruthLabel::parse(field(7))
                .ok_or_else(|| err(format!("unknown estimand `{}`", field(7))))?,
            bias: num(8)?,
            mc_error: num(9)?,
            frac_negative: num(10)?,
            coverage: num(11)?,
            corrected: count(12)?,
            conditional_log_hr: if field(13).is_empty() {
                None
            } else {
                Some(num(13)?)
            },
        });
    }
    Ok(rows)
}

/// Bias-by-design chart: one dot per row at the bias, with a bar spanning
/// `bias +/- 1.96 sd`, and a vertical line at zero.
pub fn render_svg(report: &ExperimentReport) -> String {
    const WIDTH: f64 = 760.0;
    const LEFT: f64 = 300.0;
    const RIGHT: f64 = 30.0;
    const TOP: f64 = 40.0;
    const ROW: f64 = 28.0;
    const Z: f64 = 1.96;

    let rows = &report.rows;
    let height = TOP + ROW * rows.len() as f64 + 40.0;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for r in rows {
        lo = lo.min(r.bias - Z * r.sd);
        hi = hi.max(r.bias + Z * r.sd);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    let (lo, hi) = (lo - pad, hi + pad);
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle">bias of the mean log estimate</text>"#,
        WIDTH / 2.0
    );
    let axis_y = TOP + ROW * rows.len() as f64;
    let _ = writeln!(
        s,
        r##"<line class="zero" x1="{0:.2}" y1="{TOP:.2}" x2="{0:.2}" y2="{axis_y:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        x(0.0)
    );
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + ROW * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{} / {}</text>"#,
            LEFT - 10.0,
            y + 4.0,
            r.design,
            r.estimator
        );
        let _ = writeln!(
            s,
            r##"<line class="interval" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#333"/>"##,
            x(r.bias - Z * r.sd),
            x(r.bias + Z * r.sd)
        );
        let _ = writeln!(
            s,
            r##"<circle class="marker" cx="{:.2}" cy="{y:.2}" r="4" fill="#c0392b"><title>bias {}</title></circle>"##,
            x(r.bias),
            r.bias
        );
    }
    for v in [lo, 0.0, hi] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#,
            x(v),
            axis_y + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Run settings and oracle values, one `key = value` per line.
pub fn render_provenance(report: &ExperimentReport) -> String {
    let c = &report.config;
    let s = &c.scenario;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("master_seed", c.master_seed.to_string());
    line("replicates", c.replicates.to_string());
    line("oracle_n", c.oracle_n.to_string());
    line("oracle_seed", report.oracle_seed.to_string());
    line("oracle_value", report.oracle.value.to_string());
    line("oracle_mc_se", report.oracle.mc_se.to_string());
    if let Some(b) = &report.baseline_oracle {
        line("baseline_oracle_value", b.value.to_string());
        line("baseline_oracle_mc_se", b.mc_se.to_string());
    }
    line("n_subjects", s.n_subjects.to_string());
    line("horizon", s.horizon.to_string());
    line("frailty_prevalence", s.frailty_prevalence.to_string());
    line("award_probability", s.award_probability.to_string());
    line("award_delay", s.award_delay.to_string());
    line("base_death_hazard", s.base_death_hazard.to_string());
    line("log_effect", s.log_effect.to_string());
    line("log_frailty_effect", s.log_frailty_effect.to_string());
    line("eligibility_age", s.eligibility_age.to_string());
    if let Some(cr) = &s.competing {
        line("base_outcome_hazard", cr.base_outcome_hazard.to_string());
        line("base_cr_hazard", cr.base_cr_hazard.to_string());
        line("log_effect_on_cr", cr.log_effect_on_cr.to_string());
    }
    for d in &c.designs {
        let p = &d.params;
        line(
            "design",
            format!(
                "{} estimator={} tau={} window={}",
                d.design,
                d.estimator,
                p.tau.map_or("-".into(), |v| v.to_string()),
                p.window.map_or("-".into(), |v| v.to_string())
            ),
        );
    }
    out
}

/// Writes `report.csv` and/or `report.svg` plus `provenance.txt` into `dir`.
pub fn write_report(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>, ReportError> {
    let write = |name: &str, body: String| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| ReportError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };
    fs::create_dir_all(dir).map_err(|source| ReportError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for f in formats {
        written.push(match f {
            Format::Csv => write("report.csv", render_csv(report))?,
            Format::Svg => write("report.svg", render_svg(report))?,
        });
    }
    written.push(write("provenance.txt", render_provenance(report))?);
    Ok(written)
}
