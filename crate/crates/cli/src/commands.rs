//! Subcommand implementations. Each returns its stdout text; the binary maps
//! errors to exit codes.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use immortal_core::cohort::{read_cohort_csv, simulate_cohort, write_cohort_csv};
use immortal_core::dag::{classify_bias, exposure_paths, parse_dag, AnnotatedPath, Dag};
use immortal_core::design_library::{build_design_dag, verify_claims, FigureId};
use immortal_core::estimators::{EstimatorId, ESTIMATE_HEADER};
use immortal_core::study_designs::{apply_design, write_dataset_csv, DesignId, DesignParams};
use thiserror::Error;

use crate::config::{parse_experiment, parse_scenario};
use crate::experiment::run_experiment;
use crate::report::{write_report, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

/// Text output and whether the command's checks passed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub success: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, success: true }
    }
}

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Data(format!("{context}: {e}"))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(data(format!("cannot read {}", path.display())))
}

fn write_paths(out: &mut String, paths: &[AnnotatedPath]) {
    if paths.is_empty() {
        out.push_str("  (none)\n");
    }
    for p in paths {
        let status = if p.is_open() { "open" } else { "blocked" };
        let _ = writeln!(out, "  {status:<8} {:<16} {p}", format!("{:?}", p.classification));
    }
}

fn describe(out: &mut String, dag: &Dag, exposures: &[String], outcome: &str) -> Result<(), CliError> {
    let conditioned: Vec<String> = dag.conditioned().map(|v| v.label()).collect();
    let _ = writeln!(out, "exposures: {}", exposures.join(", "));
    let _ = writeln!(out, "outcome: {outcome}");
    let _ = writeln!(
        out,
        "conditioned: {}",
        if conditioned.is_empty() { "(none)".to_string() } else { conditioned.join(", ") }
    );
    let paths = exposure_paths(dag, exposures, outcome, &conditioned).map_err(data("path query"))?;
    out.push_str("paths:\n");
    write_paths(out, &paths);
    let structure = classify_bias(dag, exposures, outcome, None).map_err(data("classification"))?;
    let _ = writeln!(out, "classification: {}", structure.kind);
    for w in &structure.witness_paths {
        let _ = writeln!(out, "  witness {w}");
    }
    Ok(())
}

/// Default query for a DAG file: every node named `E` is an exposure and the
/// outcome is the last node (by label) named `D`.
fn default_query(dag: &Dag) -> (Vec<String>, Option<String>) {
    let exposures = dag
        .nodes()
        .iter()
        .filter(|v| v.name() == "E")
        .map(|v| v.label())
        .collect();
    let outcome = dag
        .nodes()
        .iter()
        .filter(|v| v.name() == "D")
        .map(|v| v.label())
        .max();
    (exposures, outcome)
}

/// `dag check <target>`: a builtin figure id or a DAG source file. Builtins
/// also run their claim table; success means every claim passed.
pub fn dag_check(
    target: &str,
    exposures: &[String],
    outcome: Option<&str>,
) -> Result<Outcome, CliError> {
    let mut out = String::new();
    if let Ok(figure) = target.parse::<FigureId>() {
        let spec = figure.spec();
        let scenario = build_design_dag(&spec).map_err(data(figure))?;
        let _ = writeln!(out, "figure: {figure}");
        describe(&mut out, &scenario.dag, &scenario.exposures, &scenario.outcome)?;
        let report = verify_claims(&spec).map_err(data(figure))?;
        out.push_str("claims:\n");
        for c in &report.claims {
            let _ = writeln!(
                out,
                "  {} {} (expected {}, observed {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.description,
                c.expected,
                c.observed
            );
        }
        let passed = report.claims.iter().filter(|c| c.pass).count();
        let _ = writeln!(out, "{passed}/{} claims pass", report.claims.len());
        return Ok(Outcome {
            text: out,
            success: report.all_pass(),
        });
    }

    let path = Path::new(target);
    if !path.exists() && !target.contains(['.', '/']) {
        let known: Vec<&str> = FigureId::ALL.iter().map(|f| f.as_str()).collect();
        return Err(CliError::Usage(format!(
            "`{target}` is neither a builtin figure ({}) nor a file",
            known.join(", ")
        )));
    }
    let dag = parse_dag(&read_text(path)?).map_err(data(format!("cannot parse {target}")))?;
    let (default_exposures, default_outcome) = default_query(&dag);
    let exposures = if exposures.is_empty() { default_exposures } else { exposures.to_vec() };
    let outcome = outcome
        .map(str::to_string)
        .or(default_outcome)
        .ok_or_else(|| CliError::Usage("no outcome node; pass --outcome".into()))?;
    if exposures.is_empty() {
        return Err(CliError::Usage("no exposure nodes; pass --exposure".into()));
    }
    let _ = writeln!(out, "file: {target}");
    describe(&mut out, &dag, &exposures, &outcome)?;
    Ok(Outcome::ok(out))
}

/// `simulate`: writes the cohort CSV and returns a one-line summary.
pub fn simulate(config: &Path, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let scenario = parse_scenario(&read_text(config)?).map_err(data(config.display()))?;
    let cohort = simulate_cohort(&scenario, seed).map_err(data("simulation"))?;
    let file = File::create(out).map_err(data(format!("cannot create {}", out.display())))?;
    write_cohort_csv(BufWriter::new(file), &cohort).map_err(data(out.display()))?;
    let winners = cohort.iter().filter(|h| h.is_winner()).count();
    let events = cohort.iter().filter(|h| h.outcome.is_some()).count();
    Ok(Outcome::ok(format!(
        "wrote {} subjects ({winners} winners, {events} primary events) to {}\n",
        cohort.len(),
        out.display()
    )))
}

pub struct AnalyzeArgs<'a> {
    pub design: &'a str,
    pub estimator: &'a str,
    pub cohort: &'a Path,
    pub horizon: usize,
    pub tau: Option<usize>,
    pub window: Option<usize>,
    pub seed: Option<u64>,
    pub dataset_out: Option<&'a Path>,
}

/// `analyze`: compiles a cohort file through one design and prints one
/// estimate row. Design warnings are prefixed with `warning:`.
pub fn analyze(args: &AnalyzeArgs) -> Result<Outcome, CliError> {
    let design: DesignId = args.design.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let estimator: EstimatorId = args
        .estimator
        .parse()
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    let file = File::open(args.cohort).map_err(data(format!("cannot read {}", args.cohort.display())))?;
    let cohort = read_cohort_csv(file, args.horizon).map_err(data(args.cohort.display()))?;
    let mut params = DesignParams::new(args.horizon);
    params.tau = args.tau;
    params.window = args.window;
    params.seed = args.seed;
    let dataset = apply_design(design, &cohort, &params).map_err(data(design))?;
    if let Some(path) = args.dataset_out {
        let f = File::create(path).map_err(data(format!("cannot create {}", path.display())))?;
        write_dataset_csv(BufWriter::new(f), &dataset).map_err(data(path.display()))?;
    }
    let frailty: Vec<u8> = cohort.iter().map(|h| h.u).collect();
    let estimate = estimator
        .estimate(&dataset, Some(&frailty))
        .map_err(data(format!("{design}/{estimator}")))?;
    let mut out = String::new();
    for w in &dataset.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "{}", ESTIMATE_HEADER.join(","));
    let _ = writeln!(out, "{}", estimate.csv_row(design.as_str(), estimator.as_str()).join(","));
    Ok(Outcome::ok(out))
}

/// `experiment`: runs the configured study and writes the report files.
pub fn experiment(
    config: &Path,
    out: Option<&Path>,
    replicates: Option<usize>,
    formats: &[Format],
) -> Result<Outcome, CliError> {
    let mut cfg = parse_experiment(&read_text(config)?).map_err(data(config.display()))?;
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    if let Some(dir) = out {
        cfg.output_dir = PathBuf::from(dir);
    }
    let report = run_experiment(&cfg).map_err(data("experiment"))?;
    let written = write_report(&report, &cfg.output_dir, formats).map_err(data("report"))?;
    let mut text = String::new();
    for row in &report.rows {
        let _ = writeln!(
            text,
            "{:<30} {:<26} bias {:+.4} (mc error {:.4})",
            row.design.as_str(),
            row.estimator.as_str(),
            row.bias,
            row.mc_error
        );
    }
    for p in written {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    Ok(Outcome::ok(text))
}
